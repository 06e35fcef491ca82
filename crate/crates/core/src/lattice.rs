//! Integer-lattice geometry of the Fermi ball.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::KahanSum;

/// Upper end of the admissible equator-cut range for the restricted kinetic sum.
pub const EQUATOR_DELTA_MAX: f64 = 77.0 / 624.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i64; 3]", into = "[i64; 3]")]
pub struct Momentum {
    pub px: i64,
    pub py: i64,
    pub pz: i64,
}

impl Momentum {
    pub const ZERO: Momentum = Momentum { px: 0, py: 0, pz: 0 };

    pub const fn new(px: i64, py: i64, pz: i64) -> Self {
        Momentum { px, py, pz }
    }

    pub const fn norm_sq(&self) -> i64 {
        self.px * self.px + self.py * self.py + self.pz * self.pz
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub const fn dot(&self, other: &Momentum) -> i64 {
        self.px * other.px + self.py * other.py + self.pz * other.pz
    }

    pub fn is_zero(&self) -> bool {
        *self == Momentum::ZERO
    }

    pub fn to_f64(&self) -> [f64; 3] {
        [self.px as f64, self.py as f64, self.pz as f64]
    }

    pub fn dot_f64(&self, w: &[f64; 3]) -> f64 {
        self.px as f64 * w[0] + self.py as f64 * w[1] + self.pz as f64 * w[2]
    }

    /// Half-space test defining the representative half of a symmetric support.
    pub fn is_normal(&self) -> bool {
        self.pz > 0 || (self.pz == 0 && self.py > 0) || (self.pz == 0 && self.py == 0 && self.px > 0)
    }
}

impl From<[i64; 3]> for Momentum {
    fn from(a: [i64; 3]) -> Self {
        Momentum::new(a[0], a[1], a[2])
    }
}

impl From<Momentum> for [i64; 3] {
    fn from(p: Momentum) -> Self {
        [p.px, p.py, p.pz]
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.px, self.py, self.pz)
    }
}

impl Add for Momentum {
    type Output = Momentum;
    fn add(self, o: Momentum) -> Momentum {
        Momentum::new(self.px + o.px, self.py + o.py, self.pz + o.pz)
    }
}

impl Sub for Momentum {
    type Output = Momentum;
    fn sub(self, o: Momentum) -> Momentum {
        Momentum::new(self.px - o.px, self.py - o.py, self.pz - o.pz)
    }
}

impl Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum::new(-self.px, -self.py, -self.pz)
    }
}

/// Number of lattice points with norm_sq ≤ m, counted column by column.
pub fn count_ball(m: i64) -> u64 {
    if m < 0 {
        return 0;
    }
    let r = m.isqrt();
    let mut total = 0u64;
    for x in -r..=r {
        let mx = m - x * x;
        let ry = mx.isqrt();
        for y in -ry..=ry {
            total += 2 * (mx - y * y).isqrt() as u64 + 1;
        }
    }
    total
}

/// The set of lattice momenta with |p| ≤ k_F.
#[derive(Clone, Debug)]
pub struct FermiBall {
    kf_sq: Ratio<i64>,
    max_norm_sq: i64,
    k_fermi: f64,
    n_particles: u64,
    hbar: f64,
    kappa_eff: f64,
}

impl FermiBall {
    pub fn from_kf_sq(kf_sq: Ratio<i64>) -> Result<Self> {
        if *kf_sq.numer() <= 0 || *kf_sq.denom() <= 0 {
            return Err(Error::InvalidRadius(format!("k_F^2 = {kf_sq} must be positive")));
        }
        let max_norm_sq = kf_sq.numer().div_euclid(*kf_sq.denom());
        let k_fermi = (*kf_sq.numer() as f64 / *kf_sq.denom() as f64).sqrt();
        let n_particles = count_ball(max_norm_sq);
        let hbar = (n_particles as f64).powf(-1.0 / 3.0);
        Ok(FermiBall {
            kf_sq,
            max_norm_sq,
            k_fermi,
            n_particles,
            hbar,
            kappa_eff: k_fermi * hbar,
        })
    }

    /// Ball of radius `k_fermi`; k_F² is stored as the closest small rational.
    pub fn new(k_fermi: f64) -> Result<Self> {
        if !(k_fermi.is_finite() && k_fermi > 0.0) {
            return Err(Error::InvalidRadius(format!(
                "k_F = {k_fermi} must be positive and finite"
            )));
        }
        let sq = k_fermi * k_fermi;
        let kf_sq = Ratio::approximate_float(sq)
            .filter(|r: &Ratio<i64>| *r.numer() > 0)
            .ok_or_else(|| Error::InvalidRadius(format!("k_F = {k_fermi} not representable")))?;
        let mut ball = Self::from_kf_sq(kf_sq)?;
        ball.k_fermi = k_fermi;
        ball.kappa_eff = k_fermi * ball.hbar;
        Ok(ball)
    }

    /// Tie-free preset with k_F² = n + 1/2.
    pub fn half_integer(n: i64) -> Result<Self> {
        Self::from_kf_sq(Ratio::new(2 * n + 1, 2))
    }

    /// Ball with k_F² given as a float, snapped to a rational.
    pub fn from_kf_sq_f64(kf_sq: f64) -> Result<Self> {
        if !(kf_sq.is_finite() && kf_sq > 0.0) {
            return Err(Error::InvalidRadius(format!(
                "k_F^2 = {kf_sq} must be positive and finite"
            )));
        }
        let r = Ratio::approximate_float(kf_sq)
            .ok_or_else(|| Error::InvalidRadius(format!("k_F^2 = {kf_sq} not representable")))?;
        Self::from_kf_sq(r)
    }

    pub fn kf_sq(&self) -> Ratio<i64> {
        self.kf_sq
    }

    pub fn kf_sq_f64(&self) -> f64 {
        *self.kf_sq.numer() as f64 / *self.kf_sq.denom() as f64
    }

    pub fn k_fermi(&self) -> f64 {
        self.k_fermi
    }

    pub fn max_norm_sq(&self) -> i64 {
        self.max_norm_sq
    }

    pub fn n_particles(&self) -> u64 {
        self.n_particles
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn lambda(&self) -> f64 {
        1.0 / self.n_particles as f64
    }

    pub fn kappa_eff(&self) -> f64 {
        self.kappa_eff
    }

    pub fn contains(&self, p: &Momentum) -> bool {
        p.norm_sq() <= self.max_norm_sq
    }

    /// Members in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Momentum> + '_ {
        let m = self.max_norm_sq;
        let r = m.isqrt();
        (-r..=r).flat_map(move |x| {
            let mx = m - x * x;
            let ry = mx.isqrt();
            (-ry..=ry).flat_map(move |y| {
                let rz = (mx - y * y).isqrt();
                (-rz..=rz).map(move |z| Momentum::new(x, y, z))
            })
        })
    }

    pub fn dispersion(&self, p: &Momentum) -> f64 {
        let h2 = self.hbar * self.hbar;
        (h2 * p.norm_sq() as f64 - self.kappa_eff * self.kappa_eff).abs()
    }

    /// All p outside the ball with p − k inside, sorted lexicographically.
    pub fn shell_pairs(&self, k: &Momentum) -> Vec<Momentum> {
        if k.is_zero() {
            return Vec::new();
        }
        let m = self.max_norm_sq;
        let r = m.isqrt();
        let mut out = Vec::new();
        for x in -r..=r {
            let mx = m - x * x;
            let ry = mx.isqrt();
            for y in -ry..=ry {
                let rz = (mx - y * y).isqrt();
                for z in -rz..=rz {
                    let p = Momentum::new(x + k.px, y + k.py, z + k.pz);
                    if p.norm_sq() > m {
                        out.push(p);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Histogram of the denominators |p|² − |p−k|² = 2p·k − k² over the shell.
    pub fn denominator_counts(&self, k: &Momentum) -> BTreeMap<i64, u64> {
        let mut hist = BTreeMap::new();
        let k2 = k.norm_sq();
        for p in self.shell_pairs(k) {
            *hist.entry(2 * p.dot(k) - k2).or_insert(0) += 1;
        }
        hist
    }

    pub fn kinetic_reciprocal_sum(&self, k: &Momentum) -> Result<f64> {
        if k.is_zero() {
            return Err(Error::ZeroMomentum);
        }
        let mut acc = KahanSum::default();
        for (d, c) in self.denominator_counts(k) {
            acc.add(c as f64 / d as f64);
        }
        Ok(acc.value())
    }

    /// Kinetic sum restricted to pairs with e(p) + e(p−k) ≤ 4N^{−1/3−δ}.
    pub fn equator_reciprocal_sum(&self, k: &Momentum, delta: f64) -> Result<f64> {
        if k.is_zero() {
            return Err(Error::ZeroMomentum);
        }
        if !(delta > 0.0 && delta < EQUATOR_DELTA_MAX) {
            return Err(Error::DeltaOutOfRange {
                delta,
                lo: 0.0,
                hi: EQUATOR_DELTA_MAX,
            });
        }
        // e(p) + e(p−k) = ħ²(2p·k − k²) on the shell, so the cut is on the integer denominator.
        let cut = 4.0 * (self.n_particles as f64).powf(1.0 / 3.0 - delta);
        let mut acc = KahanSum::default();
        for (d, c) in self.denominator_counts(k) {
            if (d as f64) <= cut {
                acc.add(c as f64 / d as f64);
            }
        }
        Ok(acc.value())
    }

    pub fn count_slice(&self, k: &Momentum, s: i64) -> Result<u64> {
        Ok(self.slice_counts(k)?.get(&s).copied().unwrap_or(0))
    }

    /// |B_s| for every s with a nonempty slice.
    pub fn slice_counts(&self, k: &Momentum) -> Result<BTreeMap<i64, u64>> {
        if k.is_zero() {
            return Err(Error::ZeroMomentum);
        }
        let mut hist = BTreeMap::new();
        for p in self.shell_pairs(k) {
            *hist.entry(p.dot(k)).or_insert(0) += 1;
        }
        Ok(hist)
    }

    /// Window [(1+|k|²)/2, (k_F+|k|)|k|] outside which every slice is empty.
    ///
    /// p·k = h·k + |k|² with |h| ≤ k_F; the upper end is at most 2k_F|k| when |k| ≤ k_F.
    pub fn slice_window(&self, k: &Momentum) -> (f64, f64) {
        ((1.0 + k.norm_sq() as f64) / 2.0, (self.k_fermi + k.norm()) * k.norm())
    }

    /// #{q ∈ B_F : q + s ∈ B_F}.
    pub fn overlap_count(&self, s: &Momentum) -> u64 {
        self.iter().filter(|q| self.contains(&(*q + *s))).count() as u64
    }

    /// G(k) = Σ_s V̂(s)·[k − s ∈ B_F].
    fn exchange_field(&self, v: &InteractionPotential, k: &Momentum) -> f64 {
        let mut acc = KahanSum::default();
        for (s, val) in v.iter() {
            if self.contains(&(*k - *s)) {
                acc.add(val);
            }
        }
        acc.value()
    }
}

/// Smallest half-integer k_F² reaching a given particle number.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KFermiSolution {
    pub kf_sq_num: i64,
    pub kf_sq_den: i64,
    pub k_fermi: f64,
    pub n_requested: u64,
    pub n_attained: u64,
}

impl KFermiSolution {
    pub fn exact(&self) -> bool {
        self.n_requested == self.n_attained
    }

    pub fn ball(&self) -> Result<FermiBall> {
        FermiBall::from_kf_sq(Ratio::new(self.kf_sq_num, self.kf_sq_den))
    }
}

pub fn solve_kfermi_for_n(n_target: u64) -> KFermiSolution {
    let n_target = n_target.max(1);
    let mut hi = 1i64;
    while count_ball(hi) < n_target {
        hi *= 2;
    }
    let mut lo = 0i64;
    if count_ball(lo) < n_target {
        // invariant: count_ball(lo) < n_target <= count_ball(hi)
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if count_ball(mid) >= n_target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = 0;
    }
    let mut m = hi;
    let mut attained = count_ball(hi);
    if attained != n_target && hi > 0 {
        let below = count_ball(lo);
        if n_target - below < attained - n_target {
            m = lo;
            attained = below;
        }
    }
    if attained != n_target {
        log::warn!("N = {n_target} is not attainable as a Fermi ball size; using nearest N = {attained}");
    }
    KFermiSolution {
        kf_sq_num: 2 * m + 1,
        kf_sq_den: 2,
        k_fermi: ((2 * m + 1) as f64 / 2.0).sqrt(),
        n_requested: n_target,
        n_attained: attained,
    }
}

/// Lattice points with r₁² < d₀x² + y² ≤ r₂², and the area of that elliptic annulus.
pub fn annulus_count_vs_area(radius_inner: f64, radius_outer: f64, d0: u32) -> Result<(u64, f64)> {
    if !(radius_inner >= 0.0 && radius_inner < radius_outer && radius_outer.is_finite()) || d0 == 0 {
        return Err(Error::InvalidInput(format!(
            "need 0 <= r1 < r2 and d0 >= 1, got r1={radius_inner}, r2={radius_outer}, d0={d0}"
        )));
    }
    let d = d0 as f64;
    let (a2, b2) = (radius_inner * radius_inner, radius_outer * radius_outer);
    let xmax = (b2 / d).sqrt().floor() as i64 + 1;
    let mut count = 0u64;
    for x in -xmax..=xmax {
        let dx2 = d * (x * x) as f64;
        // E(0) is taken as empty so the origin counts when the inner radius is zero.
        let inner = if radius_inner > 0.0 { column_count(a2 - dx2) } else { 0 };
        count += column_count(b2 - dx2) - inner;
    }
    let area = std::f64::consts::PI / d.sqrt() * (b2 - a2);
    Ok((count, area))
}

/// #{y ∈ ℤ : y² ≤ a}.
fn column_count(a: f64) -> u64 {
    if a < 0.0 {
        return 0;
    }
    let mut f = a.sqrt().floor() as i64;
    while ((f + 1) * (f + 1)) as f64 <= a {
        f += 1;
    }
    while f > 0 && (f * f) as f64 > a {
        f -= 1;
    }
    2 * f as u64 + 1
}

/// Finitely supported, nonnegative, reflection-symmetric Fourier coefficients V̂.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Momentum, f64)>", into = "Vec<(Momentum, f64)>")]
pub struct InteractionPotential {
    values: BTreeMap<Momentum, f64>,
}

impl TryFrom<Vec<(Momentum, f64)>> for InteractionPotential {
    type Error = Error;
    fn try_from(v: Vec<(Momentum, f64)>) -> Result<Self> {
        InteractionPotential::new(v)
    }
}

impl From<InteractionPotential> for Vec<(Momentum, f64)> {
    fn from(v: InteractionPotential) -> Self {
        v.values.into_iter().collect()
    }
}

impl InteractionPotential {
    /// Strict constructor: every entry must come with its mirror image.
    pub fn new<I: IntoIterator<Item = (Momentum, f64)>>(entries: I) -> Result<Self> {
        let values = collect_entries(entries)?;
        for (k, a) in &values {
            match values.get(&-*k) {
                Some(b) if b == a => {}
                Some(b) => return Err(Error::AsymmetricPotential { k: *k, a: *a, b: *b }),
                None => {
                    return Err(Error::AsymmetricPotential {
                        k: *k,
                        a: *a,
                        b: f64::NAN,
                    })
                }
            }
        }
        Ok(InteractionPotential { values })
    }

    /// Inserts missing mirror images; conflicting values are an error.
    pub fn symmetrized<I: IntoIterator<Item = (Momentum, f64)>>(entries: I) -> Result<Self> {
        let mut values = collect_entries(entries)?;
        let keys: Vec<Momentum> = values.keys().copied().collect();
        for k in keys {
            let a = values[&k];
            match values.get(&-k) {
                Some(b) if *b != a => return Err(Error::AsymmetricPotential { k, a, b: *b }),
                Some(_) => {}
                None => {
                    values.insert(-k, a);
                }
            }
        }
        Ok(InteractionPotential { values })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// V̂ = value on ±e₁, ±e₂, ±e₃.
    pub fn unit_vectors(value: f64) -> Result<Self> {
        let e = [Momentum::new(1, 0, 0), Momentum::new(0, 1, 0), Momentum::new(0, 0, 1)];
        Self::symmetrized(e.into_iter().map(|k| (k, value)))
    }

    pub fn get(&self, k: &Momentum) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Momentum, f64)> + '_ {
        self.values.iter().map(|(k, v)| (k, *v))
    }

    pub fn support(&self) -> Vec<Momentum> {
        self.values.keys().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Diameter of the support.
    pub fn radius(&self) -> f64 {
        let keys: Vec<&Momentum> = self.values.keys().collect();
        let mut best = 0i64;
        for (i, a) in keys.iter().enumerate() {
            for b in &keys[i + 1..] {
                best = best.max((**a - **b).norm_sq());
            }
        }
        (best as f64).sqrt()
    }

    pub fn gamma_nor(&self) -> Vec<Momentum> {
        self.values.keys().filter(|k| k.is_normal()).copied().collect()
    }

    pub fn l1_norm(&self) -> f64 {
        let mut acc = KahanSum::default();
        for v in self.values.values() {
            acc.add(v.abs());
        }
        acc.value()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scale factor {factor} must be nonnegative"
            )));
        }
        Ok(InteractionPotential {
            values: self.values.iter().map(|(k, v)| (*k, v * factor)).collect(),
        })
    }
}

fn collect_entries<I: IntoIterator<Item = (Momentum, f64)>>(entries: I) -> Result<BTreeMap<Momentum, f64>> {
    let mut values = BTreeMap::new();
    for (k, v) in entries {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativePotential { k, value: v });
        }
        if let Some(old) = values.insert(k, v) {
            if old != v {
                return Err(Error::InvalidInput(format!("duplicate entries for {k}: {old} and {v}")));
            }
        }
    }
    Ok(values)
}

/// Integer ingredients of the energy of a Slater determinant of plane waves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlaterParts {
    pub n: u64,
    pub norm_sq_sum: i64,
    /// #{(a, b) occupied, a ≠ b, a − b = s} for each s in the potential's support.
    pub pair_counts: BTreeMap<Momentum, i64>,
}

impl SlaterParts {
    /// Brute-force evaluation for an arbitrary occupied set.
    pub fn of_set(occupied: &HashSet<Momentum>, v: &InteractionPotential) -> Self {
        let mut pair_counts = BTreeMap::new();
        for (s, _) in v.iter() {
            let c = if s.is_zero() {
                0
            } else {
                occupied.iter().filter(|q| occupied.contains(&(**q + *s))).count() as i64
            };
            pair_counts.insert(*s, c);
        }
        SlaterParts {
            n: occupied.len() as u64,
            norm_sq_sum: occupied.iter().map(|p| p.norm_sq()).sum(),
            pair_counts,
        }
    }

    pub fn of_ball(ball: &FermiBall, v: &InteractionPotential) -> Self {
        let mut pair_counts = BTreeMap::new();
        for (s, _) in v.iter() {
            let c = if s.is_zero() { 0 } else { ball.overlap_count(s) as i64 };
            pair_counts.insert(*s, c);
        }
        SlaterParts {
            n: ball.n_particles(),
            norm_sq_sum: ball.iter().map(|p| p.norm_sq()).sum(),
            pair_counts,
        }
    }

    /// ħ²Σ|p|² + (λ/2)[n(n−1)V̂(0) − Σ_{a≠b} V̂(a−b)].
    pub fn energy(&self, hbar: f64, lambda: f64, v: &InteractionPotential) -> f64 {
        let n = self.n as f64;
        let mut exchange = KahanSum::default();
        for (s, c) in &self.pair_counts {
            exchange.add(v.get(s) * *c as f64);
        }
        hbar * hbar * self.norm_sq_sum as f64
            + 0.5 * lambda * (n * (n - 1.0) * v.get(&Momentum::ZERO) - exchange.value())
    }

    /// Energy difference self − base with all integer differences taken exactly first.
    pub fn energy_difference(&self, base: &SlaterParts, hbar: f64, lambda: f64, v: &InteractionPotential) -> f64 {
        let (n1, n0) = (self.n as f64, base.n as f64);
        let mut exchange = KahanSum::default();
        for (s, c) in &self.pair_counts {
            let c0 = base.pair_counts.get(s).copied().unwrap_or(0);
            exchange.add(v.get(s) * (c - c0) as f64);
        }
        let direct = (n1 * (n1 - 1.0) - n0 * (n0 - 1.0)) * v.get(&Momentum::ZERO);
        hbar * hbar * (self.norm_sq_sum - base.norm_sq_sum) as f64 + 0.5 * lambda * (direct - exchange.value())
    }
}

/// Energy of the plane-wave Slater determinant filling the Fermi ball.
pub fn hartree_fock_energy(ball: &FermiBall, v: &InteractionPotential) -> f64 {
    SlaterParts::of_ball(ball, v).energy(ball.hbar(), ball.lambda(), v)
}

/// Energy change when the occupied `hole` is replaced by the empty `particle`.
pub fn excitation_energy(
    ball: &FermiBall,
    v: &InteractionPotential,
    hole: &Momentum,
    particle: &Momentum,
) -> Result<f64> {
    if !ball.contains(hole) {
        return Err(Error::HoleOutsideBall(*hole));
    }
    if ball.contains(particle) {
        return Err(Error::ParticleInsideBall(*particle));
    }
    let h2 = ball.hbar() * ball.hbar();
    let kinetic = h2 * (particle.norm_sq() - hole.norm_sq()) as f64;
    let exchange = ball.exchange_field(v, particle) - v.get(&(*particle - *hole)) - ball.exchange_field(v, hole)
        + v.get(&Momentum::ZERO);
    Ok(kinetic - ball.lambda() * exchange)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_ball(m: i64) -> Vec<Momentum> {
        let r = m.isqrt() + 1;
        let mut v = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let p = Momentum::new(x, y, z);
                    if p.norm_sq() <= m {
                        v.push(p);
                    }
                }
            }
        }
        v
    }

    #[test]
    fn small_balls() {
        assert_eq!(FermiBall::new(0.5).unwrap().n_particles(), 1);
        assert_eq!(FermiBall::new(1.0).unwrap().n_particles(), 7);
        let b = FermiBall::new(10.0).unwrap();
        assert_eq!(b.n_particles() as usize, brute_ball(100).len());
        let vol = 4.0 * std::f64::consts::PI / 3.0 * 1000.0;
        assert!((b.n_particles() as f64 - vol).abs() / 100.0 < 3.0);
    }

    #[test]
    fn iteration_is_lexicographic_and_complete() {
        let b = FermiBall::half_integer(12).unwrap();
        let v: Vec<_> = b.iter().collect();
        let mut sorted = brute_ball(12);
        sorted.sort();
        assert_eq!(v, sorted);
    }

    #[test]
    fn dispersion_examples() {
        let b = FermiBall::new(1.0).unwrap();
        let h2 = 7f64.powf(-2.0 / 3.0);
        assert!((b.dispersion(&Momentum::new(2, 0, 0)) - 3.0 * h2).abs() < 1e-15);
        assert!((b.dispersion(&Momentum::ZERO) - b.kappa_eff().powi(2)).abs() < 1e-15);
        assert!(b.dispersion(&Momentum::new(1, 0, 0)) < 1e-15);
    }

    #[test]
    fn unit_shell() {
        let b = FermiBall::new(1.0).unwrap();
        let k = Momentum::new(1, 0, 0);
        let mut want = vec![
            Momentum::new(2, 0, 0),
            Momentum::new(1, 1, 0),
            Momentum::new(1, -1, 0),
            Momentum::new(1, 0, 1),
            Momentum::new(1, 0, -1),
        ];
        want.sort();
        assert_eq!(b.shell_pairs(&k), want);
        assert!(b.shell_pairs(&Momentum::ZERO).is_empty());
        assert!((b.kinetic_reciprocal_sum(&k).unwrap() - 13.0 / 3.0).abs() < 1e-15);
        assert_eq!(b.count_slice(&k, 1).unwrap(), 4);
        assert_eq!(b.count_slice(&k, 2).unwrap(), 1);
        assert_eq!(b.count_slice(&k, 3).unwrap(), 0);
        assert_eq!(b.kinetic_reciprocal_sum(&Momentum::ZERO), Err(Error::ZeroMomentum));
    }

    #[test]
    fn far_momentum_has_no_pairs_left_inside() {
        // every hole is shifted out of the ball, so all of B_F + k counts
        let b = FermiBall::new(1.0).unwrap();
        assert_eq!(b.shell_pairs(&Momentum::new(5, 0, 0)).len(), 7);
    }

    #[test]
    fn equator_sum_limits() {
        let b = FermiBall::half_integer(100).unwrap();
        let k = Momentum::new(0, 0, 1);
        let full = b.kinetic_reciprocal_sum(&k).unwrap();
        assert_eq!(b.equator_reciprocal_sum(&k, 1e-9).unwrap(), full);
        assert!(b.equator_reciprocal_sum(&k, 0.0).is_err());
        assert!(b.equator_reciprocal_sum(&k, 0.2).is_err());
        let tiny = FermiBall::new(1.0).unwrap();
        // 4·7^{1/3−δ} < 1 never holds for admissible δ, so use a far k with large gaps
        let far = Momentum::new(9, 0, 0);
        assert_eq!(tiny.equator_reciprocal_sum(&far, 0.12).unwrap(), 0.0);
    }

    #[test]
    fn annulus_examples() {
        let (c, a) = annulus_count_vs_area(0.0, 1.0, 1).unwrap();
        assert_eq!(c, 5);
        assert!((a - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(annulus_count_vs_area(0.0, 2.5, 1).unwrap().0, 21);
        let mut brute = 0;
        for x in -10i64..=10 {
            for y in -10i64..=10 {
                let q = (5 * x * x + y * y) as f64;
                if q > 4.0 && q <= 49.0 {
                    brute += 1;
                }
            }
        }
        assert_eq!(annulus_count_vs_area(2.0, 7.0, 5).unwrap().0, brute);
        assert!(annulus_count_vs_area(2.0, 1.0, 1).is_err());
    }

    #[test]
    fn kfermi_solver() {
        for (n, num) in [(1u64, 1i64), (7, 3), (33, 9)] {
            let s = solve_kfermi_for_n(n);
            assert!(s.exact());
            assert_eq!((s.kf_sq_num, s.kf_sq_den), (num, 2));
        }
        let s = solve_kfermi_for_n(8);
        assert!(!s.exact());
        assert_eq!(s.n_attained, 7);
    }

    #[test]
    fn potential_construction() {
        let e3 = Momentum::new(0, 0, 1);
        assert!(InteractionPotential::new([(e3, 1.0)]).is_err());
        let v = InteractionPotential::symmetrized([(e3, 1.0)]).unwrap();
        assert_eq!(v.get(&-e3), 1.0);
        assert!(InteractionPotential::symmetrized([(e3, 1.0), (-e3, 2.0)]).is_err());
        assert!(InteractionPotential::symmetrized([(e3, -1.0)]).is_err());
        let u = InteractionPotential::unit_vectors(0.5).unwrap();
        assert_eq!(u.radius(), 2.0);
        assert_eq!(u.gamma_nor(), vec![e3, Momentum::new(0, 1, 0), Momentum::new(1, 0, 0)]);
        assert_eq!(u.l1_norm(), 3.0);
        let json = serde_json::to_string(&u).unwrap();
        let back: InteractionPotential = serde_json::from_str(&json).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn hf_energy_examples() {
        let b = FermiBall::new(1.0).unwrap();
        let h2 = b.hbar().powi(2);
        let zero = InteractionPotential::zero();
        assert!((hartree_fock_energy(&b, &zero) - 6.0 * h2).abs() < 1e-15);
        let v0 = InteractionPotential::new([(Momentum::ZERO, 0.7)]).unwrap();
        assert!((hartree_fock_energy(&b, &v0) - (6.0 * h2 + 3.0 * 0.7)).abs() < 1e-14);
    }

    #[test]
    fn hf_exchange_against_double_sum() {
        let b = FermiBall::half_integer(6).unwrap();
        let v = InteractionPotential::symmetrized([
            (Momentum::ZERO, 0.3),
            (Momentum::new(1, 0, 0), 0.2),
            (Momentum::new(1, 1, 0), 0.1),
            (Momentum::new(0, 2, 1), 0.05),
        ])
        .unwrap();
        let pts: Vec<_> = b.iter().collect();
        let mut ex = 0.0;
        for p in &pts {
            for q in &pts {
                if p != q {
                    ex += v.get(&(*p - *q));
                }
            }
        }
        let n = pts.len() as f64;
        let kin: i64 = pts.iter().map(|p| p.norm_sq()).sum();
        let want = b.hbar().powi(2) * kin as f64 + 0.5 / n * (n * (n - 1.0) * 0.3 - ex);
        assert!((hartree_fock_energy(&b, &v) - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn excitation_matches_resummation() {
        let b = FermiBall::half_integer(8).unwrap();
        let v = InteractionPotential::symmetrized([
            (Momentum::ZERO, 0.4),
            (Momentum::new(1, 0, 0), 0.2),
            (Momentum::new(0, 1, 1), 0.1),
        ])
        .unwrap();
        let base: HashSet<Momentum> = b.iter().collect();
        let p0 = SlaterParts::of_set(&base, &v);
        assert_eq!(p0, SlaterParts::of_ball(&b, &v));
        let hole = Momentum::new(2, 2, 0);
        let particle = Momentum::new(3, 0, 0);
        let mut swapped = base.clone();
        swapped.remove(&hole);
        swapped.insert(particle);
        let want = SlaterParts::of_set(&swapped, &v).energy_difference(&p0, b.hbar(), b.lambda(), &v);
        let got = excitation_energy(&b, &v, &hole, &particle).unwrap();
        assert!((got - want).abs() <= 1e-12 * want.abs());
        assert!(excitation_energy(&b, &v, &particle, &hole).is_err());
    }
}
