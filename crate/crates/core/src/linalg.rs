//! Complex tridiagonal LU with partial pivoting and small dense helpers.
//!
//! The factorization follows the classical banded scheme: row interchanges
//! between adjacent rows produce an upper factor with two superdiagonals,
//!
//! ```text
//! P A = L U,   U = diag(d) + diag₁(du) + diag₂(du2),
//! ```
//!
//! and the unit lower factor stores one multiplier per column. Factorization
//! and each solve cost `O(n)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{CtpError, Result};

/// LU factors of a complex tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Factor the matrix with sub-diagonal `dl`, diagonal `d` and
    /// super-diagonal `du`.
    pub fn factor(dl: &[Complex64], d: &[Complex64], du: &[Complex64]) -> Result<Self> {
        let n = d.len();
        if n == 0 || dl.len() + 1 != n || du.len() + 1 != n {
            return Err(CtpError::InvalidInput(format!(
                "tridiagonal bands have lengths {}/{}/{}",
                dl.len(),
                n,
                du.len()
            )));
        }
        let mut dl = dl.to_vec();
        let mut d = d.to_vec();
        let mut du = du.to_vec();
        let mut du2 = vec![Complex64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] != Complex64::new(0.0, 0.0) {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }

        if let Some(k) = d.iter().position(|v| *v == Complex64::new(0.0, 0.0)) {
            return Err(CtpError::SingularMatrix(format!(
                "zero pivot in tridiagonal factor at row {k}"
            )));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) -> Result<()> {
        let n = self.dim();
        if b.len() != n {
            return Err(CtpError::LengthMismatch {
                expected: n,
                found: b.len(),
            });
        }
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let bi = b[i];
                b[i + 1] -= self.dl[i] * bi;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

/// Numerical rank from singular values above `rel_tol * σ_max`.
pub fn numeric_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Neville extrapolation of samples `(h_k, y_k)` to `h = 0`.
pub fn extrapolate_to_zero(h: &[f64], y: &[Complex64]) -> Complex64 {
    assert_eq!(h.len(), y.len());
    let mut p = y.to_vec();
    let n = p.len();
    for level in 1..n {
        for i in 0..n - level {
            let (hi, hj) = (h[i], h[i + level]);
            p[i] = (p[i + 1] * hi - p[i] * hj) / (hi - hj);
        }
    }
    p[0]
}
