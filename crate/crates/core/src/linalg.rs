//! Dense symmetric eigendecomposition (cyclic Jacobi) and matrix functions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue is not accepted as positive.
pub const PD_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SymEigen {
    /// Ascending.
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(a: &DMatrix<f64>) -> Self {
        jacobi(a)
    }

    /// V f(Λ) Vᵀ.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            scaled.column_mut(j).scale_mut(fj);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rejects anything whose smallest eigenvalue is not safely positive.
    pub fn require_pd(&self, which: &str) -> Result<()> {
        let min = self.min();
        if !(min > PD_TOLERANCE * self.max_abs()) {
            return Err(Error::NotPositiveDefinite {
                which: which.to_string(),
                min_eig: min,
            });
        }
        Ok(())
    }
}

/// (A + Aᵀ)/2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

fn jacobi(a: &DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut m = symmetrize(a);
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();
    if n > 1 && scale > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for q in 1..n {
                for p in 0..q {
                    off += m[(p, q)] * m[(p, q)];
                }
            }
            if off.sqrt() <= 1e-17 * scale {
                break;
            }
            for q in 1..n {
                for p in 0..q {
                    let apq = m[(p, q)];
                    if apq.abs() <= 1e-3 * f64::EPSILON * (m[(p, p)].abs() + m[(q, q)].abs()) {
                        m[(p, q)] = 0.0;
                        m[(q, p)] = 0.0;
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s, t, apq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &v.column(src));
    }
    SymEigen { values, vectors }
}

#[allow(clippy::too_many_arguments)]
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64, t: f64, apq: f64) {
    let n = m.nrows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        let np = c * mkp - s * mkq;
        let nq = s * mkp + c * mkq;
        m[(k, p)] = np;
        m[(p, k)] = np;
        m[(k, q)] = nq;
        m[(q, k)] = nq;
    }
    m[(p, p)] -= t * apq;
    m[(q, q)] += t * apq;
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

pub fn sqrt_pd(a: &DMatrix<f64>, which: &str) -> Result<DMatrix<f64>> {
    let e = SymEigen::new(a);
    e.require_pd(which)?;
    Ok(e.map(f64::sqrt))
}

pub fn inv_sqrt_pd(a: &DMatrix<f64>, which: &str) -> Result<DMatrix<f64>> {
    let e = SymEigen::new(a);
    e.require_pd(which)?;
    Ok(e.map(|x| 1.0 / x.sqrt()))
}

pub fn log_pd(a: &DMatrix<f64>, which: &str) -> Result<DMatrix<f64>> {
    let e = SymEigen::new(a);
    e.require_pd(which)?;
    Ok(e.map(f64::ln))
}

/// Square root and inverse square root from one decomposition.
pub fn sqrt_pair_pd(a: &DMatrix<f64>, which: &str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let e = SymEigen::new(a);
    e.require_pd(which)?;
    Ok((e.map(f64::sqrt), e.map(|x| 1.0 / x.sqrt())))
}

/// Entry-wise max |a_ij|.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        symmetrize(&a)
    }

    #[test]
    fn jacobi_matches_reference_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 3, 7, 20, 45] {
            let a = random_sym(n, &mut rng);
            let mine = SymEigen::new(&a);
            let mut reference: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (x, y) in mine.values.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
            }
            let recon = &mine.vectors * DMatrix::from_diagonal(&mine.values) * mine.vectors.transpose();
            assert!((recon - &a).norm() < 1e-12 * (1.0 + a.norm()));
            let orth = mine.vectors.transpose() * &mine.vectors - DMatrix::identity(n, n);
            assert!(orth.norm() < 1e-13);
        }
    }

    #[test]
    fn degenerate_and_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = SymEigen::new(&a);
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0]);
        let i = DMatrix::<f64>::identity(4, 4) * 2.0;
        let s = sqrt_pd(&i, "I").unwrap();
        assert!((s - DMatrix::<f64>::identity(4, 4) * 2f64.sqrt()).norm() < 1e-15);
    }

    #[test]
    fn functions_of_spd_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
        let a = symmetrize(&(&b * b.transpose())) + DMatrix::identity(12, 12) * 0.1;
        let (s, si) = sqrt_pair_pd(&a, "A").unwrap();
        assert!((&s * &s - &a).norm() < 1e-11 * a.norm());
        assert!((&s * &si - DMatrix::identity(12, 12)).norm() < 1e-11);
        let l = log_pd(&a, "A").unwrap();
        let back = SymEigen::new(&l).map(f64::exp);
        assert!((back - &a).norm() < 1e-11 * a.norm());
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match sqrt_pd(&a, "A") {
            Err(Error::NotPositiveDefinite { min_eig, .. }) => assert!((min_eig + 1.0).abs() < 1e-14),
            other => panic!("unexpected {other:?}"),
        }
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(sqrt_pd(&z, "zero").is_err());
    }
}
