//! Decomposition of the Fermi sphere into M patches separated by corridors.
//!
//! Patch indices are 0-based. Indices `0..M/2` cover the northern hemisphere
//! (cap first, then collars from the pole towards the equator), and patch
//! `α + M/2` is the point reflection of patch `α`.

use std::collections::{HashMap, HashSet};
use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{FermiBall, Momentum};

/// Safety margin added to 2R_V̂ when sizing corridors, in lattice units.
pub const DEFAULT_CORRIDOR_MARGIN: f64 = 1.0;

/// Upper end of the admissible equator-cut range for index sets.
pub const DELTA_MAX: f64 = 1.0 / 6.0;

#[derive(Clone, Debug, Serialize)]
pub struct PatchSpec {
    pub index: usize,
    /// 0 for the cap, i ≥ 1 for the i-th collar.
    pub collar: usize,
    pub north: bool,
    /// Polar interval after corridor removal.
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Polar interval before corridor removal.
    pub theta_lo_nominal: f64,
    pub theta_hi_nominal: f64,
    pub phi_center: f64,
    /// Half-width of the azimuthal interval after corridor removal (π for caps and full rings).
    pub phi_half_width: f64,
    pub phi_half_width_nominal: f64,
    pub omega: [f64; 3],
    pub area_nominal: f64,
    pub area: f64,
}

#[derive(Clone, Debug, Serialize)]
struct Collar {
    theta_lo: f64,
    theta_hi: f64,
    count: usize,
    phi_half_width: f64,
    first: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PatchDecomposition {
    pub m_requested: usize,
    pub m_patches: usize,
    pub k_fermi: f64,
    pub n_particles: u64,
    pub r_v: f64,
    pub corridor_margin: f64,
    /// Angular width ψ of the latitude corridors.
    pub corridor_angle: f64,
    pub patches: Vec<PatchSpec>,
    pub omegas: Vec<[f64; 3]>,
    cap_theta: f64,
    collars: Vec<Collar>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeIndexSet {
    pub k: Momentum,
    pub delta: f64,
    pub threshold: f64,
    pub plus_side: Vec<usize>,
    pub minus_side: Vec<usize>,
}

impl ModeIndexSet {
    pub fn contains(&self, alpha: usize) -> bool {
        self.plus_side.binary_search(&alpha).is_ok() || self.minus_side.binary_search(&alpha).is_ok()
    }

    pub fn len(&self) -> usize {
        self.plus_side.len() + self.minus_side.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn band_area(theta_lo: f64, theta_hi: f64, phi_half: f64) -> f64 {
    2.0 * phi_half * (theta_lo.cos() - theta_hi.cos())
}

fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Azimuthal patch centers sit a quarter patch off the x axis so that no center is orthogonal to e₁ or e₂.
fn phi_center(j: usize, n: usize) -> f64 {
    (j as f64 + 0.25) * TAU / n as f64
}

impl PatchDecomposition {
    pub fn build(m: usize, ball: &FermiBall, r_v: f64) -> Result<Self> {
        Self::build_with_margin(m, ball, r_v, DEFAULT_CORRIDOR_MARGIN)
    }

    pub fn build_with_margin(m: usize, ball: &FermiBall, r_v: f64, margin: f64) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::InvalidPatchCount(m));
        }
        if !(r_v >= 0.0 && margin >= 0.0 && r_v.is_finite() && margin.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need r_v >= 0 and margin >= 0, got {r_v}, {margin}"
            )));
        }
        let k_fermi = ball.k_fermi();
        let mf = m as f64;
        if 2.0 * r_v >= k_fermi / mf.sqrt() {
            return Err(Error::InfeasibleCorridor(format!(
                "corridor width 2R = {} not below patch scale k_F/sqrt(M) = {}",
                2.0 * r_v,
                k_fermi / mf.sqrt()
            )));
        }
        let r_in = k_fermi - r_v;
        let chord = 2.0 * r_v + margin;
        if chord >= 2.0 * r_in {
            return Err(Error::InfeasibleCorridor(format!(
                "chord {chord} exceeds inner diameter {}",
                2.0 * r_in
            )));
        }
        let psi = 2.0 * (chord / (2.0 * r_in)).asin();

        // Nominal layout with the requested M decides the integer counts.
        let cap0 = (1.0 - 2.0 / mf).acos();
        let n_collars = if m == 2 {
            0
        } else {
            ((mf.sqrt() / 2.0).round() as usize).max(1)
        };
        let width0 = (PI / 2.0 - cap0) / n_collars.max(1) as f64;
        let counts: Vec<usize> = (0..n_collars)
            .map(|i| {
                let center = cap0 + (i as f64 + 0.5) * width0;
                ((mf.sqrt() * center.sin()).round() as usize).max(1)
            })
            .collect();
        let half = 1 + counts.iter().sum::<usize>();
        let m_actual = 2 * half;
        let patch_area = 4.0 * PI / m_actual as f64;

        // Boundaries chosen so that every patch has area exactly 4π/M'.
        let boundary = |cells: usize| (1.0 - cells as f64 * patch_area / TAU).clamp(-1.0, 1.0).acos();
        let cap_nominal = boundary(1);
        let cap_theta = cap_nominal - psi / 2.0;
        if cap_theta <= 0.0 {
            return Err(Error::InfeasibleCorridor(format!("cap vanishes for M = {m}")));
        }
        let mut patches = Vec::with_capacity(m_actual);
        patches.push(PatchSpec {
            index: 0,
            collar: 0,
            north: true,
            theta_lo: 0.0,
            theta_hi: cap_theta,
            theta_lo_nominal: 0.0,
            theta_hi_nominal: cap_nominal,
            phi_center: 0.0,
            phi_half_width: PI,
            phi_half_width_nominal: PI,
            omega: [0.0, 0.0, 1.0],
            area_nominal: band_area(0.0, cap_nominal, PI),
            area: band_area(0.0, cap_theta, PI),
        });
        let mut collars = Vec::with_capacity(n_collars);
        let mut cells = 1;
        for (i, &n) in counts.iter().enumerate() {
            let lo_nom = boundary(cells);
            cells += n;
            let hi_nom = if i + 1 == n_collars { PI / 2.0 } else { boundary(cells) };
            let lo = lo_nom + psi / 2.0;
            let hi = hi_nom - psi / 2.0;
            if hi <= lo {
                return Err(Error::InfeasibleCorridor(format!(
                    "collar {} vanishes for M = {m}",
                    i + 1
                )));
            }
            let nominal_half = PI / n as f64;
            let half_width = if n == 1 {
                PI
            } else {
                let s = (psi / 2.0).sin() / lo.sin();
                if s >= 1.0 {
                    return Err(Error::InfeasibleCorridor(format!(
                        "azimuthal corridor too wide in collar {}",
                        i + 1
                    )));
                }
                nominal_half - s.asin()
            };
            if half_width <= 0.0 {
                return Err(Error::InfeasibleCorridor(format!(
                    "patches of collar {} vanish for M = {m}",
                    i + 1
                )));
            }
            let center = 0.5 * (lo_nom + hi_nom);
            let first = patches.len();
            for j in 0..n {
                let phi = phi_center(j, n);
                patches.push(PatchSpec {
                    index: first + j,
                    collar: i + 1,
                    north: true,
                    theta_lo: lo,
                    theta_hi: hi,
                    theta_lo_nominal: lo_nom,
                    theta_hi_nominal: hi_nom,
                    phi_center: phi,
                    phi_half_width: half_width,
                    phi_half_width_nominal: nominal_half,
                    omega: unit(center, phi),
                    area_nominal: band_area(lo_nom, hi_nom, nominal_half),
                    area: band_area(lo, hi, half_width),
                });
            }
            collars.push(Collar {
                theta_lo: lo,
                theta_hi: hi,
                count: n,
                phi_half_width: half_width,
                first,
            });
        }
        debug_assert_eq!(patches.len(), half);
        for a in 0..half {
            let p = &patches[a];
            let reflected = PatchSpec {
                index: a + half,
                collar: p.collar,
                north: false,
                theta_lo: PI - p.theta_hi,
                theta_hi: PI - p.theta_lo,
                theta_lo_nominal: PI - p.theta_hi_nominal,
                theta_hi_nominal: PI - p.theta_lo_nominal,
                phi_center: (p.phi_center + PI).rem_euclid(TAU),
                phi_half_width: p.phi_half_width,
                phi_half_width_nominal: p.phi_half_width_nominal,
                omega: [-p.omega[0], -p.omega[1], -p.omega[2]],
                area_nominal: p.area_nominal,
                area: p.area,
            };
            patches.push(reflected);
        }
        if m_actual != m {
            log::info!("patch count rounded from M = {m} to M' = {m_actual}");
        }
        let omegas = patches.iter().map(|p| p.omega).collect();
        Ok(PatchDecomposition {
            m_requested: m,
            m_patches: m_actual,
            k_fermi,
            n_particles: ball.n_particles(),
            r_v,
            corridor_margin: margin,
            corridor_angle: psi,
            patches,
            omegas,
            cap_theta,
            collars,
        })
    }

    pub fn half(&self) -> usize {
        self.m_patches / 2
    }

    pub fn reflect(&self, alpha: usize) -> usize {
        (alpha + self.half()) % self.m_patches
    }

    pub fn in_shell(&self, p: &Momentum) -> bool {
        let r = p.norm();
        r >= self.k_fermi - self.r_v && r <= self.k_fermi + self.r_v
    }

    /// Patch whose extended region contains p, if any.
    pub fn patch_of(&self, p: &Momentum) -> Option<usize> {
        if !self.in_shell(p) {
            return None;
        }
        match p.pz {
            0 => None,
            z if z > 0 => self.north_patch_of(p),
            _ => self.north_patch_of(&-*p).map(|a| a + self.half()),
        }
    }

    /// Angular lookup for a point with pz > 0.
    fn north_patch_of(&self, p: &Momentum) -> Option<usize> {
        let (x, y, z) = (p.px as f64, p.py as f64, p.pz as f64);
        let theta = x.hypot(y).atan2(z);
        if theta <= self.cap_theta {
            return Some(0);
        }
        let c = self
            .collars
            .iter()
            .find(|c| theta >= c.theta_lo && theta <= c.theta_hi)?;
        if c.count == 1 {
            return Some(c.first);
        }
        let phi = y.atan2(x).rem_euclid(TAU);
        let step = TAU / c.count as f64;
        let j = ((phi / step - 0.25).round() as i64).rem_euclid(c.count as i64) as usize;
        let d = wrap_angle(phi - phi_center(j, c.count));
        (d.abs() <= c.phi_half_width).then_some(c.first + j)
    }

    pub fn index_sets(&self, k: &Momentum, delta: f64) -> Result<ModeIndexSet> {
        if k.is_zero() {
            return Err(Error::ZeroMomentum);
        }
        if !(delta > 0.0 && delta < DELTA_MAX) {
            return Err(Error::DeltaOutOfRange {
                delta,
                lo: 0.0,
                hi: DELTA_MAX,
            });
        }
        let threshold = (self.n_particles as f64).powf(-delta);
        let mut plus_side = Vec::new();
        let mut minus_side = Vec::new();
        for (a, w) in self.omegas.iter().enumerate() {
            let d = k.dot_f64(w);
            if d >= threshold {
                plus_side.push(a);
            } else if d <= -threshold {
                minus_side.push(a);
            }
        }
        Ok(ModeIndexSet {
            k: *k,
            delta,
            threshold,
            plus_side,
            minus_side,
        })
    }

    /// For every α, #{p ∉ B_F, p − k ∈ B_F, both in B_α}.
    pub fn pair_counts(&self, ball: &FermiBall, k: &Momentum) -> Vec<u64> {
        let mut counts = vec![0u64; self.m_patches];
        for p in ball.shell_pairs(k) {
            if let Some(a) = self.patch_of(&p) {
                if self.patch_of(&(p - *k)) == Some(a) {
                    counts[a] += 1;
                }
            }
        }
        counts
    }

    /// n_α(k)² for α in the index set; minus-side patches pair p with p + k.
    pub fn pair_count(&self, ball: &FermiBall, idx: &ModeIndexSet, alpha: usize) -> Result<u64> {
        let k = if idx.plus_side.binary_search(&alpha).is_ok() {
            idx.k
        } else if idx.minus_side.binary_search(&alpha).is_ok() {
            -idx.k
        } else {
            return Err(Error::PatchNotInIndexSet { alpha, k: idx.k });
        };
        Ok(self.pair_counts(ball, &k)[alpha])
    }

    pub fn total_area(&self) -> f64 {
        self.patches.iter().map(|p| p.area).sum()
    }

    pub fn corridor_area(&self) -> f64 {
        4.0 * PI - self.total_area()
    }

    /// Lattice points of the radial shell [k_F − R, k_F + R].
    pub fn shell_points(&self) -> Vec<Momentum> {
        let r = (self.k_fermi + self.r_v).ceil() as i64;
        let mut out = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let p = Momentum::new(x, y, z);
                    if self.in_shell(&p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    /// Pairs of lattice points in different extended patches at distance ≤ 2R_V̂.
    pub fn separation_violations(&self) -> Vec<(Momentum, Momentum)> {
        let assigned: HashMap<Momentum, usize> = self
            .shell_points()
            .into_iter()
            .filter_map(|p| self.patch_of(&p).map(|a| (p, a)))
            .collect();
        let reach = (2.0 * self.r_v).floor() as i64;
        let limit = 4.0 * self.r_v * self.r_v;
        let mut bad = Vec::new();
        for (p, a) in &assigned {
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        let d = Momentum::new(dx, dy, dz);
                        if d.is_zero() || d.norm_sq() as f64 > limit || d <= Momentum::ZERO {
                            continue;
                        }
                        let q = *p + d;
                        if let Some(b) = assigned.get(&q) {
                            if b != a {
                                bad.push((*p, q));
                            }
                        }
                    }
                }
            }
        }
        bad
    }

    /// Largest pairwise distance inside each extended patch.
    pub fn diameters(&self) -> Vec<f64> {
        let mut members: Vec<Vec<Momentum>> = vec![Vec::new(); self.m_patches];
        for p in self.shell_points() {
            if let Some(a) = self.patch_of(&p) {
                members[a].push(p);
            }
        }
        members
            .iter()
            .map(|pts| {
                let hull = extreme_points(pts);
                let mut best = 0i64;
                for (i, a) in hull.iter().enumerate() {
                    for b in &hull[i + 1..] {
                        best = best.max((*a - *b).norm_sq());
                    }
                }
                (best as f64).sqrt()
            })
            .collect()
    }

    /// JSON document with the geometry and, for each requested k, index sets and pair counts.
    pub fn to_json(&self, ball: Option<&FermiBall>, ks: &[Momentum], delta: f64) -> Result<String> {
        #[derive(Serialize)]
        struct CountsAtK {
            k: Momentum,
            index_set: ModeIndexSet,
            n_sq_plus: Vec<u64>,
            n_sq_minus: Vec<u64>,
        }
        #[derive(Serialize)]
        struct Export<'a> {
            decomposition: &'a PatchDecomposition,
            corridor_area: f64,
            counts: Vec<CountsAtK>,
        }
        let mut counts = Vec::new();
        if let Some(ball) = ball {
            for k in ks {
                counts.push(CountsAtK {
                    k: *k,
                    index_set: self.index_sets(k, delta)?,
                    n_sq_plus: self.pair_counts(ball, k),
                    n_sq_minus: self.pair_counts(ball, &-*k),
                });
            }
        }
        let doc = Export {
            decomposition: self,
            corridor_area: self.corridor_area(),
            counts,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidInput(e.to_string()))
    }
}

/// Candidates for the farthest pair: points extreme along a grid of directions.
/// Exact for small sets, a tight lower bound for convex-like sectors.
fn extreme_points(pts: &[Momentum]) -> Vec<Momentum> {
    if pts.len() <= 400 {
        return pts.to_vec();
    }
    let mut keep: HashSet<Momentum> = HashSet::new();
    let dirs = 12;
    for i in 0..=dirs {
        let theta = PI * i as f64 / dirs as f64;
        for j in 0..2 * dirs {
            let phi = PI * j as f64 / dirs as f64;
            let w = unit(theta, phi);
            let mut scored: Vec<(f64, Momentum)> = pts.iter().map(|p| (p.dot_f64(&w), *p)).collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            keep.extend(scored.iter().take(4).map(|s| s.1));
        }
    }
    keep.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(n: i64) -> FermiBall {
        FermiBall::half_integer(n).unwrap()
    }

    #[test]
    fn two_patches_are_hemispheres() {
        let d = PatchDecomposition::build(2, &ball(100), 2.0).unwrap();
        assert_eq!(d.m_patches, 2);
        assert_eq!(d.omegas, vec![[0.0, 0.0, 1.0], [-0.0, -0.0, -1.0]]);
        let idx = d.index_sets(&Momentum::new(0, 0, 1), 1.0 / 24.0).unwrap();
        assert_eq!(idx.plus_side, vec![0]);
        assert_eq!(idx.minus_side, vec![1]);
        assert!((d.patches[0].area_nominal - TAU).abs() < 1e-12);
    }

    #[test]
    fn nominal_areas_are_equal() {
        for m in [4, 6, 8, 16, 30, 50] {
            let d = PatchDecomposition::build_with_margin(m, &ball(40_000), 0.0, 0.0).unwrap();
            let want = 4.0 * PI / d.m_patches as f64;
            for p in &d.patches {
                assert!((p.area_nominal - want).abs() < 1e-12, "M={m} patch {}", p.index);
                assert!((p.area - p.area_nominal).abs() < 1e-12);
            }
            assert!(d.corridor_area().abs() < 1e-10);
        }
        assert_eq!(PatchDecomposition::build(8, &ball(400), 2.0).unwrap().m_patches, 8);
        assert_eq!(PatchDecomposition::build(16, &ball(1600), 2.0).unwrap().m_patches, 16);
    }

    #[test]
    fn centers_belong_to_their_patch() {
        let b = ball(1600);
        let d = PatchDecomposition::build(16, &b, 2.0).unwrap();
        for (a, w) in d.omegas.iter().enumerate() {
            let p = Momentum::new(
                (b.k_fermi() * w[0]).round() as i64,
                (b.k_fermi() * w[1]).round() as i64,
                (b.k_fermi() * w[2]).round() as i64,
            );
            assert_eq!(d.patch_of(&p), Some(a));
            assert_eq!(d.patch_of(&-p), Some(d.reflect(a)));
        }
        assert_eq!(d.patch_of(&Momentum::ZERO), None);
    }

    #[test]
    fn reflection_and_omegas() {
        let d = PatchDecomposition::build(30, &ball(6400), 2.0).unwrap();
        for a in 0..d.half() {
            let b = d.reflect(a);
            for c in 0..3 {
                assert_eq!(d.omegas[b][c], -d.omegas[a][c]);
            }
            assert!((d.patches[a].area - d.patches[b].area).abs() < 1e-15);
        }
        let norms: Vec<f64> = d
            .omegas
            .iter()
            .map(|w| (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt())
            .collect();
        assert!(norms.iter().all(|n| (n - 1.0).abs() < 1e-14));
    }

    #[test]
    fn corridors_separate_patches() {
        for (n, m) in [(100, 2), (144, 4), (225, 6), (400, 8)] {
            let d = PatchDecomposition::build(m, &ball(n), 2.0).unwrap();
            assert!(d.separation_violations().is_empty(), "M={m}");
        }
        let d = PatchDecomposition::build_with_margin(8, &ball(400), 1.0, 0.0).unwrap();
        assert!(d.separation_violations().is_empty());
    }

    #[test]
    fn infeasible_geometry_is_rejected() {
        assert!(matches!(
            PatchDecomposition::build(30, &ball(100), 2.0),
            Err(Error::InfeasibleCorridor(_))
        ));
        assert!(matches!(
            PatchDecomposition::build(7, &ball(100), 2.0),
            Err(Error::InvalidPatchCount(7))
        ));
        assert!(matches!(
            PatchDecomposition::build(0, &ball(100), 2.0),
            Err(Error::InvalidPatchCount(0))
        ));
    }

    #[test]
    fn orthogonal_patch_is_cut() {
        let d = PatchDecomposition::build(2, &ball(100), 2.0).unwrap();
        let idx = d.index_sets(&Momentum::new(1, 0, 0), 0.01).unwrap();
        assert!(idx.is_empty());
        assert!(d.index_sets(&Momentum::ZERO, 0.1).is_err());
        assert!(d.index_sets(&Momentum::new(1, 0, 0), 0.2).is_err());
    }

    #[test]
    fn pair_counts_against_brute_force() {
        let b = ball(100);
        let d = PatchDecomposition::build(2, &b, 2.0).unwrap();
        let k = Momentum::new(0, 0, 1);
        let idx = d.index_sets(&k, 1.0 / 24.0).unwrap();
        let mut brute = 0;
        for x in -13i64..=13 {
            for y in -13i64..=13 {
                for z in -13i64..=13 {
                    let p = Momentum::new(x, y, z);
                    let h = p - k;
                    if !b.contains(&p) && b.contains(&h) && d.patch_of(&p) == Some(0) && d.patch_of(&h) == Some(0) {
                        brute += 1;
                    }
                }
            }
        }
        assert!(brute > 0);
        assert_eq!(d.pair_count(&b, &idx, 0).unwrap(), brute);
        assert_eq!(d.pair_count(&b, &idx, 1).unwrap(), brute);
        let idx_x = d.index_sets(&Momentum::new(1, 0, 0), 1.0 / 24.0).unwrap();
        assert!(matches!(
            d.pair_count(&b, &idx_x, 0),
            Err(Error::PatchNotInIndexSet { .. })
        ));
    }

    #[test]
    fn json_export_round_trips_through_serde() {
        let b = ball(400);
        let d = PatchDecomposition::build(8, &b, 2.0).unwrap();
        let s = d.to_json(Some(&b), &[Momentum::new(0, 0, 1)], 1.0 / 24.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["decomposition"]["m_patches"], 8);
        assert_eq!(v["counts"][0]["n_sq_plus"].as_array().unwrap().len(), 8);
    }
}
