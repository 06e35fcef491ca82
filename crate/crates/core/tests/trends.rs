//! Finite-size trends that must improve with k_F.

use fermion_rpa::experiments::normalization_rows;
use fermion_rpa::lattice::{FermiBall, InteractionPotential, Momentum};
use fermion_rpa::patches::PatchDecomposition;

fn mean_normalization_deviation(kf_sq: f64, m: usize) -> f64 {
    let ball = FermiBall::from_kf_sq_f64(kf_sq).unwrap();
    let v = InteractionPotential::unit_vectors(0.05).unwrap();
    let d = PatchDecomposition::build(m, &ball, v.radius()).unwrap();
    let mut devs = Vec::new();
    for k in [Momentum::new(1, 0, 0), Momentum::new(0, 1, 0), Momentum::new(0, 0, 1)] {
        for (_, _, kw, n2, pred) in normalization_rows(&d, &ball, &k, 0.16).unwrap() {
            if kw.abs() >= 0.3 {
                devs.push((n2 as f64 / pred - 1.0).abs());
            }
        }
    }
    devs.iter().sum::<f64>() / devs.len() as f64
}

#[test]
fn normalization_deviation_shrinks_with_kf() {
    let devs: Vec<f64> = [900.5, 1600.5, 3600.5, 6400.5]
        .iter()
        .map(|&k2| mean_normalization_deviation(k2, 16))
        .collect();
    assert!(devs.windows(2).all(|w| w[1] < w[0]), "{devs:?}");
}
