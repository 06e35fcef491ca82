//! RPA correlation energy: the closed log-integral formula and the trace over Bogoliubov systems.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::bogokernel::{build_mode_system, diagonalize};
use crate::error::{Error, Result};
use crate::lattice::{FermiBall, InteractionPotential, Momentum};
use crate::numeric::{integrate, KahanSum, Quadrature};
use crate::patches::PatchDecomposition;

/// (3/4π)^{1/3}.
pub fn kappa_ideal() -> f64 {
    (3.0 / (4.0 * PI)).cbrt()
}

/// π(1 − log 2)/2, the magnitude of the small-coupling coefficient for m = 1/2.
pub fn small_v_reference() -> f64 {
    PI * (1.0 - 2f64.ln()) / 2.0
}

/// g(λ) = 1 − λ·arctan(1/λ), with g(0) = 1.
pub fn g(lambda: f64) -> f64 {
    if lambda < 4.0 {
        1.0 - lambda * (PI / 2.0 - lambda.atan())
    } else {
        // 1/(3λ²) − 1/(5λ⁴) + 1/(7λ⁶) − …
        let x = 1.0 / (lambda * lambda);
        let mut term = x;
        let mut sum = 0.0;
        let mut n = 1;
        loop {
            let t = term / (2 * n + 1) as f64;
            sum += if n % 2 == 1 { t } else { -t };
            if t < 1e-18 * sum {
                return sum;
            }
            term *= x;
            n += 1;
        }
    }
}

/// ∫_Λ^∞ g(λ) dλ from the asymptotic series.
fn g_tail(cut: f64) -> f64 {
    let x = 1.0 / (cut * cut);
    let mut sum = 0.0;
    let mut pow = 1.0 / cut;
    for n in 1..40 {
        let t = pow / ((2 * n + 1) * (2 * n - 1)) as f64;
        sum += if n % 2 == 1 { t } else { -t };
        if t < 1e-18 * sum {
            break;
        }
        pow *= x;
    }
    sum
}

/// log(1 + x) − x without cancellation for small x.
fn log1p_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x2 * (-0.5 + x * (1.0 / 3.0 + x * (-0.25 + x * (0.2 - x / 6.0))))
    } else {
        x.ln_1p() - x
    }
}

const REL_TOL: f64 = 1e-12;

/// ∫₀^∞ g(λ) dλ by quadrature plus series tail.
pub fn g_integral() -> Result<Quadrature> {
    let cut = 50.0;
    let mut q = integrate(g, 0.0, cut, 1e-16, 1e-14)?;
    q.value += g_tail(cut);
    Ok(q)
}

/// (1/π)∫₀^∞ log(1 + c·g(λ)) dλ − c/4 with its quadrature error estimate.
///
/// Because ∫g = π/4 the subtraction is done inside the integrand, which keeps
/// full relative accuracy as c → 0.
pub fn mode_integral(c: f64) -> Result<Quadrature> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::NegativeCoupling(c));
    }
    if c == 0.0 {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let cut = 50f64.max(10.0 * c.sqrt());
    let q = integrate(|l| log1p_minus_x(c * g(l)), 0.0, cut, 1e-300, REL_TOL)?;
    // log(1+cg) − cg = −(cg)²/2 + (cg)³/3 + …, with g = 1/(3λ²) − 1/(5λ⁴) + …
    let tail = -c * c / (54.0 * cut.powi(3)) + c * c / (75.0 * cut.powi(5)) + c.powi(3) / (405.0 * cut.powi(5));
    Ok(Quadrature {
        value: (q.value + tail) / PI,
        error: (q.error + (c * c + c.powi(4)) / cut.powi(7)) / PI,
        evaluations: q.evaluations,
    })
}

pub fn rpa_mode_integral(c: f64) -> Result<f64> {
    Ok(mode_integral(c)?.value)
}

/// ħκΣ_{k∈ℤ³}|k|·F(2πκV̂(k)) with the ideal κ, plus the propagated quadrature error.
pub fn rpa_energy_analytic_with_error(ball: &FermiBall, v: &InteractionPotential) -> Result<(f64, f64)> {
    let (value, error) = analytic_per_hbar(v)?;
    Ok((ball.hbar() * value, ball.hbar() * error))
}

pub fn rpa_energy_analytic(ball: &FermiBall, v: &InteractionPotential) -> Result<f64> {
    Ok(rpa_energy_analytic_with_error(ball, v)?.0)
}

fn analytic_per_hbar(v: &InteractionPotential) -> Result<(f64, f64)> {
    let kappa = kappa_ideal();
    let mut value = KahanSum::default();
    let mut error = 0.0;
    for (k, vk) in v.iter() {
        if k.is_zero() {
            continue;
        }
        let q = mode_integral(2.0 * PI * kappa * vk)?;
        value.add(kappa * k.norm() * q.value);
        error += kappa * k.norm() * q.error;
    }
    Ok((value.value(), error))
}

#[derive(Clone, Debug, Serialize)]
pub struct PerKTerm {
    pub k: Momentum,
    /// 2ħκ|k|F(2πκV̂(k)), the ±k pair of the closed formula.
    pub analytic: f64,
    /// ħκ_eff|k|·tr(E − D − W).
    pub trace: f64,
    pub modes_per_side: usize,
    pub dropped: usize,
    pub max_cancellation_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RpaParams {
    pub n_particles: u64,
    pub k_fermi: f64,
    pub m_requested: usize,
    pub m_actual: usize,
    pub delta: f64,
    pub kappa_ideal: f64,
    pub kappa_eff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RpaReport {
    pub e_analytic: f64,
    pub e_trace: f64,
    pub per_k_terms: Vec<PerKTerm>,
    pub quadrature_error_estimate: f64,
    pub params: RpaParams,
}

impl RpaReport {
    pub fn relative_gap(&self) -> f64 {
        (self.e_trace - self.e_analytic).abs() / self.e_analytic.abs()
    }
}

pub fn rpa_energy_trace(
    decomp: &PatchDecomposition,
    ball: &FermiBall,
    v: &InteractionPotential,
    delta: f64,
) -> Result<RpaReport> {
    let kappa = kappa_ideal();
    let hbar = ball.hbar();
    let terms: Vec<Result<(PerKTerm, f64)>> = v
        .gamma_nor()
        .into_par_iter()
        .map(|k| {
            let at = |e: Error| Error::AtMomentum { k, source: Box::new(e) };
            let ms = build_mode_system(decomp, ball, v, &k, delta).map_err(at)?;
            let sol = diagonalize(&ms).map_err(at)?;
            let q = mode_integral(2.0 * PI * kappa * v.get(&k)).map_err(at)?;
            let kn = k.norm();
            Ok((
                PerKTerm {
                    k,
                    analytic: 2.0 * hbar * kappa * kn * q.value,
                    trace: hbar * ball.kappa_eff() * kn * 2.0 * sol.trace_correction,
                    modes_per_side: ms.half(),
                    dropped: ms.dropped.len(),
                    max_cancellation_residual: sol.residuals.cancellation,
                },
                2.0 * hbar * kappa * kn * q.error,
            ))
        })
        .collect();
    let mut per_k_terms = Vec::with_capacity(terms.len());
    let mut e_trace = KahanSum::default();
    let mut qerr = 0.0;
    for t in terms {
        let (term, err) = t?;
        e_trace.add(term.trace);
        qerr += err;
        per_k_terms.push(term);
    }
    let (e_analytic, _) = rpa_energy_analytic_with_error(ball, v)?;
    Ok(RpaReport {
        e_analytic,
        e_trace: e_trace.value(),
        per_k_terms,
        quadrature_error_estimate: qerr,
        params: RpaParams {
            n_particles: ball.n_particles(),
            k_fermi: ball.k_fermi(),
            m_requested: decomp.m_requested,
            m_actual: decomp.m_patches,
            delta,
            kappa_ideal: kappa,
            kappa_eff: ball.kappa_eff(),
        },
    })
}

/// Richardson-extrapolated limit of F(c)/c² from c ∈ {1e-3, 1e-4}.
pub fn mode_integral_small_c_limit() -> Result<f64> {
    let (c1, c2) = (1e-4, 1e-5);
    let r1 = rpa_mode_integral(c1)? / (c1 * c1);
    let r2 = rpa_mode_integral(c2)? / (c2 * c2);
    Ok((c1 * r2 - c2 * r1) / (c1 - c2))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SmallVFit {
    /// Signed χ with E_RPA ≈ ħ·χ·Σ_k |k|V̂(k)².
    pub chi: f64,
    pub reference_magnitude: f64,
    /// |χ| / π(1 − log 2)/2.
    pub magnitude_ratio: f64,
}

pub fn small_v_quadratic_coefficient(v: &InteractionPotential) -> Result<SmallVFit> {
    let weight: f64 = v.iter().map(|(k, vk)| k.norm() * vk * vk).sum();
    let reference_magnitude = small_v_reference();
    if weight == 0.0 {
        return Ok(SmallVFit {
            chi: 0.0,
            reference_magnitude,
            magnitude_ratio: 0.0,
        });
    }
    let chi_at = |eps: f64| -> Result<f64> {
        let (e, _) = analytic_per_hbar(&v.scaled(eps)?)?;
        Ok(e / (eps * eps * weight))
    };
    let (e1, e2) = (1e-3, 1e-4);
    let (x1, x2) = (chi_at(e1)?, chi_at(e2)?);
    let chi = (e1 * x2 - e2 * x1) / (e1 - e2);
    Ok(SmallVFit {
        chi,
        reference_magnitude,
        magnitude_ratio: chi.abs() / reference_magnitude,
    })
}
