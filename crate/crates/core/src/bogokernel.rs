//! Effective quadratic Hamiltonian per momentum k and its Bogoliubov diagonalization.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{FermiBall, InteractionPotential, Momentum};
use crate::linalg::{log_pd, max_abs, sqrt_pair_pd, symmetrize, SymEigen};
use crate::patches::{ModeIndexSet, PatchDecomposition};

/// Mode data and the matrices D, W, W̃ for one k.
///
/// Rows `0..I` are plus-side patches, row `α + I` is the reflection of row `α`.
#[derive(Clone, Debug)]
pub struct ModeSystem {
    pub k: Momentum,
    pub indices: ModeIndexSet,
    /// Patch index of every row.
    pub modes: Vec<usize>,
    /// Plus-side patches dropped because their pair count vanished.
    pub dropped: Vec<usize>,
    pub n_vals: Vec<f64>,
    pub u_vals: Vec<f64>,
    pub v_vals: Vec<f64>,
    pub coupling: f64,
    pub vhat_k: f64,
    pub m_patches: usize,
    pub n_particles: u64,
    pub d: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub w_tilde: DMatrix<f64>,
}

impl ModeSystem {
    /// Assembles D = diag(u², u²), W = diag(b, b), W̃ = [[0, b], [b, 0]] with b = g|v⟩⟨v|.
    pub fn from_blocks(u: &[f64], v: &[f64], coupling: f64) -> Result<Self> {
        let half = u.len();
        if half == 0 || v.len() != half {
            return Err(Error::InvalidInput(format!(
                "need matching nonempty u, v; got {} and {}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) || v.iter().any(|x| !(*x > 0.0)) || !(coupling >= 0.0) {
            return Err(Error::InvalidInput("need 0 < u <= 1, v > 0, g >= 0".into()));
        }
        let n = 2 * half;
        let uu: Vec<f64> = u.iter().chain(u).copied().collect();
        let vv: Vec<f64> = v.iter().chain(v).copied().collect();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(n, uu.iter().map(|x| x * x)));
        let mut w = DMatrix::zeros(n, n);
        let mut w_tilde = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let x = coupling * vv[i] * vv[j];
                if (i < half) == (j < half) {
                    w[(i, j)] = x;
                } else {
                    w_tilde[(i, j)] = x;
                }
            }
        }
        let plus_side: Vec<usize> = (0..half).collect();
        let minus_side: Vec<usize> = (half..n).collect();
        Ok(ModeSystem {
            k: Momentum::new(0, 0, 1),
            indices: ModeIndexSet {
                k: Momentum::new(0, 0, 1),
                delta: 0.0,
                threshold: 0.0,
                plus_side,
                minus_side,
            },
            modes: (0..n).collect(),
            dropped: Vec::new(),
            n_vals: vv.clone(),
            u_vals: uu,
            v_vals: vv,
            coupling,
            vhat_k: coupling,
            m_patches: n,
            n_particles: 0,
            d,
            w,
            w_tilde,
        })
    }

    /// Random valid system with `half` modes per side.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, half: usize) -> Result<Self> {
        let u: Vec<f64> = (0..half).map(|_| rng.random_range(0.05f64..1.0).sqrt()).collect();
        let scale = (1.0 / half as f64).sqrt();
        let v: Vec<f64> = (0..half).map(|_| scale * rng.random_range(0.05..1.0)).collect();
        let g = 10f64.powf(rng.random_range(-3.0..1.0));
        Self::from_blocks(&u, &v, g)
    }

    pub fn half(&self) -> usize {
        self.u_vals.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.u_vals.len()
    }
}

pub fn build_mode_system(
    decomp: &PatchDecomposition,
    ball: &FermiBall,
    v: &InteractionPotential,
    k: &Momentum,
    delta: f64,
) -> Result<ModeSystem> {
    if !v.gamma_nor().contains(k) {
        return Err(Error::NotInGammaNor(*k));
    }
    let indices = decomp.index_sets(k, delta)?;
    let plus_counts = decomp.pair_counts(ball, k);
    let minus_counts = decomp.pair_counts(ball, &-*k);
    let kn = k.norm();
    let kappa = ball.kappa_eff();
    let hbar = ball.hbar();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut u = Vec::new();
    let mut n_vals = Vec::new();
    for &a in &indices.plus_side {
        let b = decomp.reflect(a);
        debug_assert!(indices.minus_side.binary_search(&b).is_ok());
        debug_assert_eq!(plus_counts[a], minus_counts[b]);
        if plus_counts[a] == 0 {
            log::warn!("k = {k}: patch {a} has no particle-hole pairs and is dropped");
            dropped.push(a);
            continue;
        }
        kept.push(a);
        u.push((k.dot_f64(&decomp.omegas[a]) / kn).abs().sqrt());
        n_vals.push((plus_counts[a] as f64).sqrt());
    }
    if kept.is_empty() {
        return Err(Error::EmptyModeSystem {
            k: *k,
            reason: format!(
                "{} patches pass the equator cut, {} have pairs (M = {}, N = {})",
                indices.plus_side.len(),
                kept.len(),
                decomp.m_patches,
                ball.n_particles()
            ),
        });
    }
    let vv: Vec<f64> = n_vals.iter().map(|n| hbar / (kappa * kn.sqrt()) * n).collect();
    let vhat = v.get(k);
    let mut ms = ModeSystem::from_blocks(&u, &vv, 0.5 * kappa * vhat)?;
    ms.k = *k;
    ms.modes = kept
        .iter()
        .copied()
        .chain(kept.iter().map(|a| decomp.reflect(*a)))
        .collect();
    ms.indices = indices;
    ms.dropped = dropped;
    ms.n_vals = n_vals.iter().chain(&n_vals).copied().collect();
    ms.vhat_k = vhat;
    ms.m_patches = decomp.m_patches;
    ms.n_particles = ball.n_particles();
    Ok(ms)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Residuals {
    /// ‖S₁ᵀ(D+W+W̃)S₁ − E‖ / ‖E‖.
    pub symplectic_plus: f64,
    /// ‖S₂ᵀ(D+W−W̃)S₂ − E‖ / ‖E‖.
    pub symplectic_minus: f64,
    /// ‖S₂S₁ᵀ − I‖.
    pub inverse: f64,
    /// ‖cosh²K − sinh²K − I‖.
    pub hyperbolic: f64,
    /// ‖OᵀO − I‖.
    pub orthogonality: f64,
    /// ‖coshK(D+W)sinhK + sinhK(D+W)coshK + coshK W̃ coshK + sinhK W̃ sinhK‖ / ‖D+W‖.
    pub cancellation: f64,
    /// max(‖coshK − ½(S₁+S₂)O‖, ‖sinhK − ½(S₁−S₂)O‖).
    pub polar: f64,
    /// ‖K − Kᵀ‖.
    pub kernel_symmetry: f64,
}

#[derive(Clone, Debug)]
pub struct BogoliubovSolution {
    pub e: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    pub o: DMatrix<f64>,
    pub kernel: DMatrix<f64>,
    pub cosh_k: DMatrix<f64>,
    pub sinh_k: DMatrix<f64>,
    pub frak_k: DMatrix<f64>,
    pub off_diagonal: DMatrix<f64>,
    pub trace_correction: f64,
    pub det_o: f64,
    pub residuals: Residuals,
}

pub fn diagonalize(ms: &ModeSystem) -> Result<BogoliubovSolution> {
    let n = ms.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let dw = &ms.d + &ms.w;
    let a_plus = symmetrize(&(&dw + &ms.w_tilde));
    let a_minus = symmetrize(&(&dw - &ms.w_tilde));
    SymEigen::new(&a_plus).require_pd("D+W+W~")?;
    let (am_sqrt, am_isqrt) = sqrt_pair_pd(&a_minus, "D+W-W~")?;

    let inner = symmetrize(&(&am_sqrt * &a_plus * &am_sqrt));
    let inner_eig = SymEigen::new(&inner);
    inner_eig.require_pd("(D+W-W~)^1/2 (D+W+W~) (D+W-W~)^1/2")?;
    let e = inner_eig.map(f64::sqrt);
    let e_sqrt = inner_eig.map(|x| x.powf(0.25));
    let e_isqrt = inner_eig.map(|x| x.powf(-0.25));

    let s1 = &am_sqrt * &e_isqrt;
    let s2 = &am_isqrt * &e_sqrt;

    let p = symmetrize(&(&s1 * s1.transpose()));
    let p_eig = SymEigen::new(&p);
    p_eig.require_pd("S1 S1^T")?;
    let kernel = p_eig.map(|x| 0.5 * x.ln());
    let o = s1.transpose() * p_eig.map(|x| 1.0 / x.sqrt());
    let cosh_k = p_eig.map(|x| 0.5 * (x.sqrt() + 1.0 / x.sqrt()));
    let sinh_k = p_eig.map(|x| 0.5 * (x.sqrt() - 1.0 / x.sqrt()));

    let ch_dw = &cosh_k * &dw;
    let sh_dw = &sinh_k * &dw;
    let ch_wt = &cosh_k * &ms.w_tilde;
    let sh_wt = &sinh_k * &ms.w_tilde;
    let frak_k = symmetrize(&(&ch_dw * &cosh_k + &sh_dw * &sinh_k + &ch_wt * &sinh_k + &sh_wt * &cosh_k));
    let off_diagonal = &ch_dw * &sinh_k + &sh_dw * &cosh_k + &ch_wt * &cosh_k + &sh_wt * &sinh_k;

    let trace_correction = 0.5 * (e.trace() - dw.trace());
    let e_norm = e.norm();
    let residuals = Residuals {
        symplectic_plus: (s1.transpose() * &a_plus * &s1 - &e).norm() / e_norm,
        symplectic_minus: (s2.transpose() * &a_minus * &s2 - &e).norm() / e_norm,
        inverse: (&s2 * s1.transpose() - &id).norm(),
        hyperbolic: (&cosh_k * &cosh_k - &sinh_k * &sinh_k - &id).norm(),
        orthogonality: (o.transpose() * &o - &id).norm(),
        cancellation: off_diagonal.norm() / dw.norm(),
        polar: (&cosh_k - (&s1 + &s2) * &o * 0.5)
            .norm()
            .max((&sinh_k - (&s1 - &s2) * &o * 0.5).norm()),
        kernel_symmetry: (&kernel - kernel.transpose()).norm(),
    };
    let det_o = o.clone().determinant();
    Ok(BogoliubovSolution {
        e,
        s1,
        s2,
        o,
        kernel,
        cosh_k,
        sinh_k,
        frak_k,
        off_diagonal,
        trace_correction,
        det_o,
        residuals,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntryBound {
    pub c_star: f64,
    pub worst_pair: (usize, usize),
}

/// max |A_αβ|·M / (V̂(k)·min{n_α/n_β, n_β/n_α}).
pub fn fit_entry_bound(a: &DMatrix<f64>, ms: &ModeSystem) -> EntryBound {
    let mut best = EntryBound {
        c_star: 0.0,
        worst_pair: (0, 0),
    };
    if ms.vhat_k <= 0.0 {
        return best;
    }
    let n = ms.dim();
    for i in 0..n {
        for j in 0..n {
            let ratio = (ms.n_vals[i] / ms.n_vals[j]).min(ms.n_vals[j] / ms.n_vals[i]);
            let c = a[(i, j)].abs() * ms.m_patches as f64 / (ms.vhat_k * ratio);
            if c > best.c_star {
                best = EntryBound {
                    c_star: c,
                    worst_pair: (i, j),
                };
            }
        }
    }
    best
}

pub fn check_kernel_bound(sol: &BogoliubovSolution, ms: &ModeSystem) -> EntryBound {
    fit_entry_bound(&sol.kernel, ms)
}

pub fn check_sinh_bound(sol: &BogoliubovSolution, ms: &ModeSystem) -> EntryBound {
    fit_entry_bound(&sol.sinh_k, ms)
}

/// Kernel rebuilt from the I×I blocks L₁, L₂; returns the max entry deviation from `diagonalize`.
pub fn check_l_blocks(ms: &ModeSystem) -> Result<f64> {
    let kernel = diagonalize(ms)?.kernel;
    Ok(max_abs(&(kernel_from_l_blocks(ms)? - kernel)))
}

pub fn kernel_from_l_blocks(ms: &ModeSystem) -> Result<DMatrix<f64>> {
    let half = ms.half();
    let id = DMatrix::<f64>::identity(half, half);
    let d_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(half, ms.u_vals[..half].iter().copied()));
    let d = &d_sqrt * &d_sqrt;
    let v = DVector::from_iterator(half, ms.v_vals[..half].iter().copied());
    let b = &v * v.transpose() * ms.coupling;
    let db = symmetrize(&(&d + &b * 2.0));

    let (_, inner1_isqrt) = sqrt_pair_pd(&symmetrize(&(&d_sqrt * &db * &d_sqrt)), "d^1/2 (d+2b) d^1/2")?;
    let l1 = &d_sqrt * inner1_isqrt * &d_sqrt - &id;
    let (db_sqrt, _) = sqrt_pair_pd(&db, "d+2b")?;
    let (_, inner2_isqrt) = sqrt_pair_pd(&symmetrize(&(&db_sqrt * &d * &db_sqrt)), "(d+2b)^1/2 d (d+2b)^1/2")?;
    let l2 = &db_sqrt * inner2_isqrt * &db_sqrt - &id;

    let log1 = log_pd(&symmetrize(&(&id + l1)), "I+L1")?;
    let log2 = log_pd(&symmetrize(&(&id + l2)), "I+L2")?;
    let n = 2 * half;
    let mut blocks = DMatrix::zeros(n, n);
    blocks.view_mut((0, 0), (half, half)).copy_from(&log1);
    blocks.view_mut((half, half), (half, half)).copy_from(&log2);
    let u = unitary_u(half);
    Ok(symmetrize(&(u.transpose() * blocks * u * 0.5)))
}

/// U = (1/√2)[[I, I], [I, −I]].
pub fn unitary_u(half: usize) -> DMatrix<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(2 * half, 2 * half, |i, j| {
        if i % half != j % half {
            0.0
        } else if i >= half && j >= half {
            -s
        } else {
            s
        }
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FrakKCheck {
    /// ‖𝔎 − OᵀEO‖_max.
    pub max_entry_deviation: f64,
    /// max_i |λ_i(𝔎) − λ_i(E)| / λ_i(E), eigenvalues sorted.
    pub spectrum_deviation: f64,
}

pub fn check_frak_k_vs_e(sol: &BogoliubovSolution) -> FrakKCheck {
    let rotated = sol.o.transpose() * &sol.e * &sol.o;
    let a = SymEigen::new(&sol.frak_k).values;
    let b = SymEigen::new(&sol.e).values;
    let spectrum_deviation = a
        .iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs() / y.abs()));
    FrakKCheck {
        max_entry_deviation: max_abs(&(&sol.frak_k - rotated)),
        spectrum_deviation,
    }
}

/// max |(𝔎 − D)_αβ|·M / (V̂(k)·u_α·u_β).
pub fn check_frak_k_minus_d_bound(sol: &BogoliubovSolution, ms: &ModeSystem) -> f64 {
    if ms.vhat_k <= 0.0 {
        return 0.0;
    }
    let diff = &sol.frak_k - &ms.d;
    let n = ms.dim();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let c = diff[(i, j)].abs() * ms.m_patches as f64 / (ms.vhat_k * ms.u_vals[i] * ms.u_vals[j]);
            best = best.max(c);
        }
    }
    best
}

/// Row-major dump of every matrix of a solution.
pub fn write_solution_csv<W: Write>(sol: &BogoliubovSolution, ms: &ModeSystem, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record([
        "kx",
        "ky",
        "kz",
        "m_patches",
        "n_particles",
        "matrix",
        "row",
        "col",
        "value",
    ])
    .map_err(io)?;
    let mats: [(&str, &DMatrix<f64>); 11] = [
        ("D", &ms.d),
        ("W", &ms.w),
        ("W_tilde", &ms.w_tilde),
        ("E", &sol.e),
        ("S1", &sol.s1),
        ("S2", &sol.s2),
        ("O", &sol.o),
        ("K", &sol.kernel),
        ("cosh_K", &sol.cosh_k),
        ("sinh_K", &sol.sinh_k),
        ("frak_K", &sol.frak_k),
    ];
    for (name, m) in mats {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_record([
                    ms.k.px.to_string(),
                    ms.k.py.to_string(),
                    ms.k.pz.to_string(),
                    ms.m_patches.to_string(),
                    ms.n_particles.to_string(),
                    name.to_string(),
                    i.to_string(),
                    j.to_string(),
                    m[(i, j)].to_string(),
                ])
                .map_err(io)?;
            }
        }
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}
