//! Experiment registry and batch runner behind the command-line tool.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bogokernel::{
    build_mode_system, check_frak_k_minus_d_bound, check_frak_k_vs_e, check_kernel_bound, check_l_blocks,
    check_sinh_bound, diagonalize, ModeSystem,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::lattice::{
    annulus_count_vs_area, excitation_energy, FermiBall, InteractionPotential, Momentum, SlaterParts,
};
use crate::patches::PatchDecomposition;
use crate::rpa::{rpa_energy_trace, small_v_quadratic_coefficient};

/// Header plus rows, written as one CSV file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

type Runner = fn(&RunConfig) -> Result<Table>;

pub const REGISTRY: [(&str, Runner); 12] = [
    ("gauss_count", gauss_count),
    ("kinetic_sum_scaling", kinetic_sum_scaling),
    ("equator_sum_scaling", equator_sum_scaling),
    ("slice_count_bound", slice_count_bound),
    ("ellipse_count", ellipse_count),
    ("patch_audit", patch_audit),
    ("normalization_asymptotics", normalization_asymptotics),
    ("kernel_identities", kernel_identities),
    ("kernel_bound_fit", kernel_bound_fit),
    ("rpa_compare", rpa_compare),
    ("small_v_fit", small_v_fit),
    ("hf_stability", hf_stability),
];

pub fn experiment_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn run_experiment(name: &str, cfg: &RunConfig) -> Result<Table> {
    let (_, f) = REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown experiment `{name}`")))?;
    f(cfg)
}

const E3: Momentum = Momentum::new(0, 0, 1);
const UNIT_AXES: [Momentum; 3] = [Momentum::new(1, 0, 0), Momentum::new(0, 1, 0), Momentum::new(0, 0, 1)];

fn gauss_count(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["k_F", "N", "volume", "rel_error", "error_over_kf_sq"]);
    for &k in &cfg.params.gauss_k_fermi {
        let ball = FermiBall::new(k)?;
        let vol = 4.0 * PI / 3.0 * k.powi(3);
        let n = ball.n_particles() as f64;
        t.push(row![
            k,
            ball.n_particles(),
            vol,
            (n - vol).abs() / vol,
            (n - vol).abs() / (k * k)
        ]);
    }
    Ok(t)
}

fn kinetic_sum_scaling(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["kf_sq", "N", "shell_pairs", "sum", "sum_over_n_third"]);
    for &k2 in &cfg.params.kinetic_kf_sq {
        let ball = FermiBall::from_kf_sq_f64(k2)?;
        let s = ball.kinetic_reciprocal_sum(&E3)?;
        let n = ball.n_particles() as f64;
        t.push(row![
            k2,
            ball.n_particles(),
            ball.shell_pairs(&E3).len(),
            s,
            s / n.cbrt()
        ]);
    }
    Ok(t)
}

fn equator_sum_scaling(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["kf_sq", "N", "delta", "sum", "full_sum", "sum_over_n_power"]);
    for &k2 in &cfg.params.kinetic_kf_sq {
        let ball = FermiBall::from_kf_sq_f64(k2)?;
        let delta = cfg.params.equator_delta;
        let s = ball.equator_reciprocal_sum(&E3, delta)?;
        let n = ball.n_particles() as f64;
        let full = ball.kinetic_reciprocal_sum(&E3)?;
        t.push(row![
            k2,
            ball.n_particles(),
            delta,
            s,
            full,
            s / n.powf(1.0 / 3.0 - delta)
        ]);
    }
    Ok(t)
}

/// max_s |B_s| / (s + N^{2/9}), the fitted slice constant for γ = 2/3.
pub fn slice_constant(ball: &FermiBall, k: &Momentum) -> Result<f64> {
    let scale = (ball.n_particles() as f64).powf(2.0 / 9.0);
    Ok(ball
        .slice_counts(k)?
        .iter()
        .map(|(s, c)| *c as f64 / (*s as f64 + scale))
        .fold(0.0, f64::max))
}

fn slice_count_bound(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "k_F",
        "N",
        "shell_pairs",
        "slice_total",
        "nonempty_slices",
        "window_ok",
        "c_fit",
    ]);
    for &kf in &cfg.params.slice_k_fermi {
        let ball = FermiBall::half_integer(kf * kf)?;
        let slices = ball.slice_counts(&E3)?;
        let (lo, hi) = ball.slice_window(&E3);
        let window_ok = slices.keys().all(|s| (*s as f64) >= lo && (*s as f64) <= hi);
        let total: u64 = slices.values().sum();
        t.push(row![
            kf,
            ball.n_particles(),
            ball.shell_pairs(&E3).len(),
            total,
            slices.len(),
            window_ok,
            slice_constant(&ball, &E3)?
        ]);
    }
    Ok(t)
}

fn ellipse_count(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "d0",
        "radius",
        "count",
        "area",
        "deviation",
        "deviation_over_r_two_thirds",
    ]);
    for &d0 in &cfg.params.ellipse_axis_ratios {
        for &r in &cfg.params.ellipse_radii {
            let (c, a) = annulus_count_vs_area(0.0, r, d0)?;
            let dev = (c as f64 - a).abs();
            t.push(row![d0, r, c, a, dev, dev / r.powf(2.0 / 3.0)]);
        }
    }
    Ok(t)
}

fn patch_audit(cfg: &RunConfig) -> Result<Table> {
    let d = PatchDecomposition::build(cfg.m_patches, &cfg.ball, cfg.potential.radius())?;
    let diam = d.diameters();
    let mut points = vec![0usize; d.m_patches];
    for p in d.shell_points() {
        if let Some(a) = d.patch_of(&p) {
            points[a] += 1;
        }
    }
    let violations = d.separation_violations().len();
    let scale = (d.m_patches as f64).sqrt() / (cfg.ball.n_particles() as f64).cbrt();
    let mut t = Table::new(&[
        "alpha",
        "collar",
        "north",
        "theta_lo",
        "theta_hi",
        "phi_center",
        "phi_half_width",
        "area_nominal",
        "area",
        "omega_x",
        "omega_y",
        "omega_z",
        "lattice_points",
        "diameter",
        "diameter_scaled",
        "m_requested",
        "m_actual",
        "corridor_area",
        "separation_violations",
    ]);
    for p in &d.patches {
        t.push(row![
            p.index,
            p.collar,
            p.north,
            p.theta_lo,
            p.theta_hi,
            p.phi_center,
            p.phi_half_width,
            p.area_nominal,
            p.area,
            p.omega[0],
            p.omega[1],
            p.omega[2],
            points[p.index],
            diam[p.index],
            diam[p.index] * scale,
            d.m_requested,
            d.m_patches,
            d.corridor_area(),
            violations
        ]);
    }
    Ok(t)
}

/// (α, side, k·ω̂_α, n_α², (4πk_F²/M)|k·ω̂_α|).
pub type NormalizationRow = (usize, &'static str, f64, u64, f64);

/// One [`NormalizationRow`] for every α in the index set.
pub fn normalization_rows(
    d: &PatchDecomposition,
    ball: &FermiBall,
    k: &Momentum,
    delta: f64,
) -> Result<Vec<NormalizationRow>> {
    let idx = d.index_sets(k, delta)?;
    let plus = d.pair_counts(ball, k);
    let minus = d.pair_counts(ball, &-*k);
    let area = 4.0 * PI * ball.kf_sq_f64() / d.m_patches as f64;
    let mut out = Vec::new();
    for (side, list, counts) in [("plus", &idx.plus_side, &plus), ("minus", &idx.minus_side, &minus)] {
        for &a in list {
            let kw = k.dot_f64(&d.omegas[a]);
            out.push((a, side, kw, counts[a], area * kw.abs()));
        }
    }
    Ok(out)
}

fn normalization_asymptotics(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "kf_sq",
        "m_actual",
        "kx",
        "ky",
        "kz",
        "alpha",
        "side",
        "k_dot_omega",
        "n_sq",
        "predicted",
        "ratio",
    ]);
    for &k2 in &cfg.params.normalization_kf_sq {
        let ball = FermiBall::from_kf_sq_f64(k2)?;
        let d = PatchDecomposition::build(cfg.m_patches, &ball, cfg.potential.radius())?;
        for k in UNIT_AXES {
            for (a, side, kw, n2, pred) in normalization_rows(&d, &ball, &k, cfg.delta)? {
                t.push(row![
                    k2,
                    d.m_patches,
                    k.px,
                    k.py,
                    k.pz,
                    a,
                    side,
                    kw,
                    n2,
                    pred,
                    n2 as f64 / pred
                ]);
            }
        }
    }
    Ok(t)
}

fn kernel_identities(cfg: &RunConfig) -> Result<Table> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut t = Table::new(&[
        "system",
        "dim",
        "coupling",
        "cancellation",
        "spectrum_deviation",
        "frak_k_entry_deviation",
        "l_block_deviation",
        "symplectic",
        "hyperbolic",
        "orthogonality",
        "det_o",
        "trace_correction",
    ]);
    for i in 0..cfg.params.identity_systems {
        let half = rng.random_range(1..=cfg.params.identity_max_half);
        let ms = ModeSystem::random(&mut rng, half)?;
        let sol = diagonalize(&ms)?;
        let fk = check_frak_k_vs_e(&sol);
        let r = &sol.residuals;
        t.push(row![
            i,
            ms.dim(),
            ms.coupling,
            r.cancellation,
            fk.spectrum_deviation,
            fk.max_entry_deviation,
            check_l_blocks(&ms)?,
            r.symplectic_plus.max(r.symplectic_minus),
            r.hyperbolic,
            r.orthogonality,
            sol.det_o,
            sol.trace_correction
        ]);
    }
    Ok(t)
}

fn kernel_bound_fit(cfg: &RunConfig) -> Result<Table> {
    let ball = FermiBall::from_kf_sq_f64(cfg.params.bound_kf_sq)?;
    let mut t = Table::new(&[
        "m_requested",
        "m_actual",
        "kx",
        "ky",
        "kz",
        "modes_per_side",
        "c_kernel",
        "worst_row",
        "worst_col",
        "c_sinh",
        "c_frak_k_minus_d",
    ]);
    for &m in &cfg.params.bound_m {
        let d = PatchDecomposition::build(m, &ball, cfg.potential.radius())?;
        for k in cfg.potential.gamma_nor() {
            let ms = build_mode_system(&d, &ball, &cfg.potential, &k, cfg.delta)?;
            let sol = diagonalize(&ms)?;
            let kb = check_kernel_bound(&sol, &ms);
            t.push(row![
                m,
                d.m_patches,
                k.px,
                k.py,
                k.pz,
                ms.half(),
                kb.c_star,
                kb.worst_pair.0,
                kb.worst_pair.1,
                check_sinh_bound(&sol, &ms).c_star,
                check_frak_k_minus_d_bound(&sol, &ms)
            ]);
        }
    }
    Ok(t)
}

fn rpa_compare(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&[
        "kf_sq",
        "N",
        "m_requested",
        "m_actual",
        "delta",
        "e_analytic",
        "e_trace",
        "rel_gap",
        "quad_error",
    ]);
    for &(k2, m) in &cfg.params.rpa_schedule {
        let ball = FermiBall::from_kf_sq_f64(k2)?;
        let d = PatchDecomposition::build(m, &ball, cfg.potential.radius())?;
        let r = rpa_energy_trace(&d, &ball, &cfg.potential, cfg.delta)?;
        t.push(row![
            k2,
            ball.n_particles(),
            m,
            d.m_patches,
            cfg.delta,
            r.e_analytic,
            r.e_trace,
            r.relative_gap(),
            r.quadrature_error_estimate
        ]);
    }
    Ok(t)
}

fn small_v_fit(cfg: &RunConfig) -> Result<Table> {
    let mut t = Table::new(&["potential", "chi", "reference_magnitude", "magnitude_ratio"]);
    let single = |k: Momentum| InteractionPotential::symmetrized([(k, 0.1)]);
    for (name, v) in [
        ("config", cfg.potential.clone()),
        ("single_001", single(E3)?),
        ("single_110", single(Momentum::new(1, 1, 0))?),
    ] {
        let fit = small_v_quadratic_coefficient(&v)?;
        t.push(row![name, fit.chi, fit.reference_magnitude, fit.magnitude_ratio]);
    }
    Ok(t)
}

/// Random swaps of an occupied momentum just inside the Fermi surface with an empty one just outside.
pub fn boundary_swaps(ball: &FermiBall, count: usize, seed: u64) -> Vec<(Momentum, Momentum)> {
    let m = ball.max_norm_sq();
    let width = 2 * (ball.k_fermi().ceil() as i64);
    let holes: Vec<Momentum> = ball.iter().filter(|p| p.norm_sq() > m - width).collect();
    let r = (m + width).isqrt();
    let mut particles = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            for z in -r..=r {
                let p = Momentum::new(x, y, z);
                if p.norm_sq() > m && p.norm_sq() <= m + width {
                    particles.push(p);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (
                holes[rng.random_range(0..holes.len())],
                particles[rng.random_range(0..particles.len())],
            )
        })
        .collect()
}

/// Excitation energy recomputed from the full occupied set, with integer parts differenced exactly.
pub fn excitation_by_resummation(
    ball: &FermiBall,
    v: &InteractionPotential,
    base: &SlaterParts,
    occupied: &HashSet<Momentum>,
    hole: &Momentum,
    particle: &Momentum,
) -> f64 {
    let mut swapped = occupied.clone();
    swapped.remove(hole);
    swapped.insert(*particle);
    SlaterParts::of_set(&swapped, v).energy_difference(base, ball.hbar(), ball.lambda(), v)
}

fn hf_stability(cfg: &RunConfig) -> Result<Table> {
    let ball = FermiBall::from_kf_sq_f64(cfg.params.hf_kf_sq)?;
    let v = &cfg.potential;
    let margin = ball.hbar().powi(2) / 2.0 - ball.lambda() * v.l1_norm();
    if margin <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "stability hypothesis fails: lambda*|V|_1 = {} >= hbar^2/2 = {}",
            ball.lambda() * v.l1_norm(),
            ball.hbar().powi(2) / 2.0
        )));
    }
    let occupied: HashSet<Momentum> = ball.iter().collect();
    let base = SlaterParts::of_set(&occupied, v);
    let swaps = boundary_swaps(&ball, cfg.params.hf_swaps, cfg.seed);
    let oracle: Vec<Option<f64>> = swaps
        .par_iter()
        .enumerate()
        .map(|(i, (h, p))| {
            (i < cfg.params.hf_oracle_swaps).then(|| excitation_by_resummation(&ball, v, &base, &occupied, h, p))
        })
        .collect();
    let mut t = Table::new(&[
        "swap",
        "hole",
        "particle",
        "kinetic_gap",
        "excitation_energy",
        "positive",
        "resummed",
    ]);
    for (i, ((h, p), o)) in swaps.iter().zip(oracle).enumerate() {
        let e = excitation_energy(&ball, v, h, p)?;
        t.push(row![
            i,
            h,
            p,
            p.norm_sq() - h.norm_sq(),
            e,
            e > 0.0,
            o.map(|x| x.to_string()).unwrap_or_default()
        ]);
    }
    Ok(t)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub status: String,
    pub error: Option<String>,
    pub file: Option<String>,
    pub sha256: Option<String>,
    pub rows: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: serde_json::Value,
    pub n_particles: u64,
    pub k_fermi: f64,
    pub workers: usize,
    pub experiments: Vec<ExperimentRecord>,
    pub total_seconds: f64,
}

impl Manifest {
    pub fn failures(&self) -> usize {
        self.experiments.iter().filter(|e| e.status != "ok").count()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every configured experiment, writes `<name>.csv` files and `manifest.json` into `out`.
pub fn run_all(cfg: &RunConfig, out: &Path, workers: usize) -> Result<Manifest> {
    let started = Instant::now();
    fs::create_dir_all(out).map_err(|e| Error::InvalidInput(format!("{}: {e}", out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let results: Vec<(String, Result<Table>, f64)> = pool.install(|| {
        cfg.experiments
            .par_iter()
            .map(|name| {
                let t0 = Instant::now();
                let r = run_experiment(name, cfg);
                (name.clone(), r, t0.elapsed().as_secs_f64())
            })
            .collect()
    });
    let mut records = Vec::new();
    for (name, result, seconds) in results {
        let record = match result.and_then(|t| Ok((t.to_csv()?, t.rows.len()))) {
            Ok((bytes, rows)) => {
                let file = format!("{name}.csv");
                let path: PathBuf = out.join(&file);
                match fs::write(&path, &bytes) {
                    Ok(()) => ExperimentRecord {
                        name,
                        status: "ok".into(),
                        error: None,
                        sha256: Some(sha256_hex(&bytes)),
                        file: Some(file),
                        rows,
                        seconds,
                    },
                    Err(e) => ExperimentRecord {
                        name,
                        status: "failed".into(),
                        error: Some(format!("{}: {e}", path.display())),
                        file: None,
                        sha256: None,
                        rows: 0,
                        seconds,
                    },
                }
            }
            Err(e) => {
                log::error!("experiment {name} failed: {e}");
                ExperimentRecord {
                    name,
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    file: None,
                    sha256: None,
                    rows: 0,
                    seconds,
                }
            }
        };
        records.push(record);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&cfg.raw).map_err(|e| Error::InvalidInput(e.to_string()))?,
        n_particles: cfg.ball.n_particles(),
        k_fermi: cfg.ball.k_fermi(),
        workers,
        experiments: records,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(out.join("manifest.json"), text).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(json: &str) -> RunConfig {
        RunConfig::from_json(json).unwrap()
    }

    #[test]
    fn gauss_table_columns() {
        let c = cfg(r#"{"k_fermi": 10, "params": {"gauss_k_fermi": [5, 10, 20]}}"#);
        let t = run_experiment("gauss_count", &c).unwrap();
        assert_eq!(t.header, vec!["k_F", "N", "volume", "rel_error", "error_over_kf_sq"]);
        assert_eq!(t.rows.len(), 3);
        assert_eq!(t.rows[1][1], FermiBall::new(10.0).unwrap().n_particles().to_string());
    }

    #[test]
    fn csv_quoting_and_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push(row!["x,y", 0.1 + 0.2]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b\n\"x,y\",0.30000000000000004\n");
    }

    #[test]
    fn registry_is_complete() {
        assert_eq!(experiment_names().len(), 12);
        let names: HashSet<_> = experiment_names().into_iter().collect();
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn hf_swaps_are_positive_and_match() {
        let c = cfg(r#"{"k_fermi": 5, "params": {"hf_kf_sq": 30.5, "hf_swaps": 40, "hf_oracle_swaps": 10}}"#);
        let t = run_experiment("hf_stability", &c).unwrap();
        assert!(t.column("positive").unwrap().iter().all(|x| *x == "true"));
        let e = t.column("excitation_energy").unwrap();
        for (i, o) in t.column("resummed").unwrap().iter().enumerate().take(10) {
            let (a, b): (f64, f64) = (e[i].parse().unwrap(), o.parse().unwrap());
            assert!((a - b).abs() <= 1e-10 * b.abs());
        }
    }

    #[test]
    fn empty_run_writes_manifest_only() {
        let dir = std::env::temp_dir().join(format!("fermion-rpa-empty-{}", std::process::id()));
        let m = run_all(&cfg(r#"{"k_fermi": 3}"#), &dir, 2).unwrap();
        assert!(m.experiments.is_empty());
        let files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(files, vec![std::ffi::OsString::from("manifest.json")]);
        fs::remove_dir_all(dir).unwrap();
    }
}
