//! Run configuration: JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::REGISTRY;
use crate::lattice::{solve_kfermi_for_n, FermiBall, InteractionPotential, Momentum, EQUATOR_DELTA_MAX};
use crate::patches::DELTA_MAX;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FERMION_RPA_OUT";
/// Equator-cut exponent for the patch experiments, close to the largest admissible value.
pub const DEFAULT_DELTA: f64 = 0.16;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialEntry {
    pub k: [i64; 3],
    pub value: f64,
}

/// Parameter grids of the individual experiments.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentParams {
    pub gauss_k_fermi: Vec<f64>,
    pub kinetic_kf_sq: Vec<f64>,
    pub slice_k_fermi: Vec<i64>,
    pub ellipse_radii: Vec<f64>,
    pub ellipse_axis_ratios: Vec<u32>,
    /// Exponent of the equator cut in equator_sum_scaling, in (0, 77/624).
    pub equator_delta: f64,
    pub normalization_kf_sq: Vec<f64>,
    pub identity_systems: usize,
    pub identity_max_half: usize,
    pub bound_kf_sq: f64,
    pub bound_m: Vec<usize>,
    pub rpa_schedule: Vec<(f64, usize)>,
    pub hf_kf_sq: f64,
    pub hf_swaps: usize,
    pub hf_oracle_swaps: usize,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            gauss_k_fermi: vec![5.0, 10.0, 20.0, 40.0, 80.0],
            kinetic_kf_sq: vec![100.5, 400.5, 1600.5, 6400.5],
            slice_k_fermi: vec![20, 40, 80],
            ellipse_radii: vec![10.0, 20.0, 30.0, 50.0, 70.0, 100.0, 150.0, 200.0, 250.0, 300.0],
            ellipse_axis_ratios: vec![1, 2, 5],
            equator_delta: 1.0 / 24.0,
            normalization_kf_sq: vec![900.5, 1600.5, 3600.5],
            identity_systems: 200,
            identity_max_half: 30,
            bound_kf_sq: 1600.5,
            bound_m: vec![6, 16, 30],
            rpa_schedule: vec![(400.5, 8), (1600.5, 16), (6400.5, 30)],
            hf_kf_sq: 400.5,
            hf_swaps: 1000,
            hf_oracle_swaps: 50,
        }
    }
}

/// The file format as written by users.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub k_fermi: Option<f64>,
    #[serde(default)]
    pub kf_sq: Option<f64>,
    #[serde(default)]
    pub n_particles: Option<u64>,
    #[serde(default)]
    pub m_patches: Option<usize>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub potential: Option<Vec<PotentialEntry>>,
    #[serde(default)]
    pub experiments: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: ExperimentParams,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub ball: FermiBall,
    pub m_patches: usize,
    pub delta: f64,
    pub potential: InteractionPotential,
    pub experiments: Vec<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub params: ExperimentParams,
}

fn field(name: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: name.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| field("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let name = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.contains("unknown field") || msg.contains("missing field"))
                .unwrap_or("<json>")
                .to_string();
            field(&name, msg)
        })?;
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let given = [raw.k_fermi.is_some(), raw.kf_sq.is_some(), raw.n_particles.is_some()];
        let ball = match given.iter().filter(|g| **g).count() {
            0 => return Err(field("k_fermi", "one of k_fermi, kf_sq, n_particles is required")),
            1 => {
                if let Some(k) = raw.k_fermi {
                    FermiBall::new(k).map_err(|e| field("k_fermi", e.to_string()))?
                } else if let Some(k2) = raw.kf_sq {
                    FermiBall::from_kf_sq_f64(k2).map_err(|e| field("kf_sq", e.to_string()))?
                } else {
                    let n = raw.n_particles.unwrap_or(0);
                    if n == 0 {
                        return Err(field("n_particles", "must be at least 1"));
                    }
                    solve_kfermi_for_n(n)
                        .ball()
                        .map_err(|e| field("n_particles", e.to_string()))?
                }
            }
            _ => return Err(field("k_fermi", "give only one of k_fermi, kf_sq, n_particles")),
        };
        let m_patches = raw.m_patches.unwrap_or(16);
        if m_patches < 2 || !m_patches.is_multiple_of(2) {
            return Err(field("m_patches", format!("{m_patches} must be even and at least 2")));
        }
        let delta = raw.delta.unwrap_or(DEFAULT_DELTA);
        if !(delta > 0.0 && delta < DELTA_MAX) {
            return Err(field("delta", format!("{delta} must lie in (0, 1/6)")));
        }
        let eq = raw.params.equator_delta;
        if !(eq > 0.0 && eq < EQUATOR_DELTA_MAX) {
            return Err(field("params.equator_delta", format!("{eq} must lie in (0, 77/624)")));
        }
        let potential = match &raw.potential {
            None => InteractionPotential::unit_vectors(0.05).expect("valid preset"),
            Some(entries) => InteractionPotential::symmetrized(entries.iter().map(|e| (Momentum::from(e.k), e.value)))
                .map_err(|e| field("potential", e.to_string()))?,
        };
        for name in &raw.experiments {
            if !REGISTRY.iter().any(|(n, _)| n == name) {
                return Err(field("experiments", format!("unknown experiment `{name}`")));
            }
        }
        let p = &raw.params;
        if p.identity_max_half == 0 || p.hf_oracle_swaps > p.hf_swaps {
            return Err(field(
                "params",
                "need identity_max_half >= 1 and hf_oracle_swaps <= hf_swaps",
            ));
        }
        if p.rpa_schedule.iter().any(|(_, m)| *m < 2 || m % 2 != 0) || p.bound_m.iter().any(|m| *m < 2 || m % 2 != 0) {
            return Err(field("params", "patch counts must be even and at least 2"));
        }
        Ok(RunConfig {
            ball,
            m_patches,
            delta,
            potential,
            experiments: raw.experiments.clone(),
            output_dir: raw.output_dir.clone(),
            seed: raw.seed.unwrap_or(0),
            params: raw.params.clone(),
            raw,
        })
    }

    /// CLI flag, then config file, then environment, then `./results`.
    pub fn resolve_output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = RunConfig::from_json(r#"{"k_fermi": 10.0}"#).unwrap();
        assert_eq!(c.m_patches, 16);
        assert_eq!(c.delta, DEFAULT_DELTA);
        assert!((c.params.equator_delta - 1.0 / 24.0).abs() < 1e-15);
        assert_eq!(c.potential.support().len(), 6);
        assert!(c.experiments.is_empty());
    }

    #[test]
    fn particle_number_config() {
        let c = RunConfig::from_json(r#"{"n_particles": 33}"#).unwrap();
        assert_eq!(c.ball.n_particles(), 33);
        assert!((c.ball.kf_sq_f64() - 4.5).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (r#"{}"#, "k_fermi"),
            (r#"{"k_fermi": 5, "n_particles": 7}"#, "k_fermi"),
            (r#"{"k_fermi": 5, "delta": 0.2}"#, "delta"),
            (r#"{"k_fermi": 5, "m_patches": 7}"#, "m_patches"),
            (r#"{"k_fermi": 5, "experiments": ["nope"]}"#, "experiments"),
            (r#"{"k_fermi": 5, "bogus": 1}"#, "bogus"),
            (
                r#"{"k_fermi": 5, "potential": [{"k": [0,0,1], "value": 1}, {"k": [0,0,-1], "value": 2}]}"#,
                "potential",
            ),
        ];
        for (text, name) in cases {
            match RunConfig::from_json(text) {
                Err(Error::Config { field, .. }) => assert_eq!(field, name, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn potential_is_completed() {
        let c = RunConfig::from_json(r#"{"k_fermi": 5, "potential": [{"k": [1,1,0], "value": 0.5}]}"#).unwrap();
        assert_eq!(c.potential.get(&Momentum::new(-1, -1, 0)), 0.5);
    }
}
