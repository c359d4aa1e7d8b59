//! Symmetric eigendecomposition (cyclic Jacobi) and SPD linear solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative off-diagonal Frobenius threshold for Jacobi convergence.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
/// Maximum number of full cyclic sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Absolute asymmetry accepted by [`sym_eigendecompose`] (scaled by the largest entry).
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
///
/// `vectors` is row-major `n x n`; column `j` is the unit eigenvector of `values[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        let n = self.dim();
        (0..n).map(|i| self.vectors[i * n + j]).collect()
    }

    /// `Qᵀ y`: coordinates of `y` in the eigenbasis.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|i| self.vectors[i * n + j] * y[i]).sum())
            .collect()
    }

    /// `Q diag(values) Qᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.vectors[i * n + k] * self.values[k] * self.vectors[j * n + k];
                }
                out[i * n + j] = s;
            }
        }
        out
    }
}

fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            s += a[p * n + q] * a[p * n + q];
        }
    }
    (2.0 * s).sqrt()
}

/// Largest asymmetry `|a_ij - a_ji|`, with its position.
pub fn max_asymmetry(a: &[f64], n: usize) -> (usize, usize, f64) {
    let mut worst = (0, 0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (a[i * n + j] - a[j * n + i]).abs();
            if d > worst.2 {
                worst = (i, j, d);
            }
        }
    }
    worst
}

/// Replaces `a` by `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
}

/// Eigendecomposition of a symmetric `n x n` row-major matrix by cyclic Jacobi rotations.
///
/// Each rotation annihilates one off-diagonal pair; sweeps repeat until the off-diagonal
/// Frobenius norm drops below `JACOBI_TOLERANCE * max(1, ‖A‖_F)`.
pub fn sym_eigendecompose(matrix: &[f64], n: usize) -> Result<SymEigen> {
    if matrix.len() != n * n || n == 0 {
        return Err(Error::Shape(format!(
            "eigendecomposition needs a non-empty square matrix, got {} values for n = {n}",
            matrix.len()
        )));
    }
    if let Some(bad) = matrix.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            layer: format!("matrix entry {bad}"),
            kind: "eigendecompose",
        });
    }
    let scale = matrix.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (i, j, diff) = max_asymmetry(matrix, n);
    if diff > SYMMETRY_TOLERANCE * scale {
        return Err(Error::NotSymmetric { i, j, diff });
    }

    let mut a = matrix.to_vec();
    symmetrize(&mut a, n);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let threshold = JACOBI_TOLERANCE * frobenius(&a).max(1.0);
    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, n);
        if off < threshold {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            return Err(Error::EigenNonConvergence {
                sweeps,
                off_norm: off,
                diag_min: diag.iter().cloned().fold(f64::INFINITY, f64::min),
                diag_max: diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, n, p, q, c, s);
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].total_cmp(&a[y * n + y]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let mut vectors = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + dst] = v[i * n + src];
        }
    }
    Ok(SymEigen {
        values,
        vectors,
        sweeps,
    })
}

// A <- Jᵀ A J for the plane rotation acting on coordinates (p, q).
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
}

/// Solves `(a + ridge·I) x = b` for each column of `b` (row-major `n x m`) by Cholesky.
pub fn spd_solve(a: &[f64], n: usize, ridge: f64, b: &[f64], m: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n * m {
        return Err(Error::Shape(format!(
            "spd_solve: matrix {}x{n} / rhs {}x{m} inconsistent",
            a.len() / n.max(1),
            b.len() / m.max(1)
        )));
    }
    let mut mat = DMatrix::from_row_slice(n, n, a);
    for i in 0..n {
        mat[(i, i)] += ridge;
    }
    let chol = mat.cholesky().ok_or_else(|| {
        Error::Singular(format!(
            "system of size {n} is not positive definite at ridge {ridge:e}; use a nonzero ridge"
        ))
    })?;
    // pivot ratio guards against numerically singular but technically PD systems
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..n).map(|i| l[(i, i)]).collect();
    let dmax = diag.iter().cloned().fold(0.0f64, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if dmin <= dmax * 1e-12 {
        return Err(Error::Singular(format!(
            "Cholesky pivot ratio {:.3e} at ridge {ridge:e}; use a nonzero ridge",
            dmin / dmax
        )));
    }
    let mut out = vec![0.0; n * m];
    for col in 0..m {
        let rhs = DVector::from_iterator(n, (0..n).map(|i| b[i * m + col]));
        let x = chol.solve(&rhs);
        for i in 0..n {
            out[i * m + col] = x[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let a = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let e = sym_eigendecompose(&a, 3).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_is_sorted_and_axis_aligned() {
        let e = sym_eigendecompose(&[4.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(e.values, vec![1.0, 4.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0]);
        assert_eq!(e.vector(1), vec![1.0, 0.0]);
    }

    #[test]
    fn random_8x8_reconstructs() {
        let a = random_symmetric(8, 7);
        let e = sym_eigendecompose(&a, 8).unwrap();
        let r = e.reconstruct();
        let resid: f64 = a.iter().zip(&r).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(resid < 1e-10, "residual {resid}");
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        // QᵀQ = I
        for i in 0..8 {
            for j in 0..8 {
                let qi = e.vector(i);
                let qj = e.vector(j);
                let d: f64 = qi.iter().zip(&qj).map(|(x, y)| x * y).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let err = sym_eigendecompose(&[1.0, 2.0, 2.5, 1.0], 2).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn spd_solve_identity_and_singular() {
        let x = spd_solve(&[1.0, 0.0, 0.0, 1.0], 2, 0.0, &[3.0, -2.0], 1).unwrap();
        assert_eq!(x, vec![3.0, -2.0]);
        let err = spd_solve(&[1.0, 1.0, 1.0, 1.0], 2, 0.0, &[1.0, 1.0], 1).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
        assert!(spd_solve(&[1.0, 1.0, 1.0, 1.0], 2, 1e-3, &[1.0, 1.0], 1).is_ok());
    }
}
