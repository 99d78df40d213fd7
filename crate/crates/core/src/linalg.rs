//! Small dense symmetric matrices (dimension ≤ 4) and their principal
//! square root via cyclic Jacobi eigendecomposition.

use thiserror::Error;

pub const MAX_DIM: usize = 4;

/// Eigenvalues below this times `1 + ‖Σ‖_F` are treated as exact zeros.
pub const EIGEN_ZERO_CLAMP: f64 = 1e-12;
/// Eigenvalues below this times `1 + ‖Σ‖_F` mean the input is not positive
/// semidefinite.
pub const EIGEN_NEGATIVE_LIMIT: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },
    #[error("matrix is not symmetric (|a[{row}][{col}] - a[{col}][{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Square matrix of dimension up to [`MAX_DIM`], stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    data: [[f64; MAX_DIM]; MAX_DIM],
    dim: usize,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "dimension {dim} exceeds {MAX_DIM}");
        Self {
            data: [[0.0; MAX_DIM]; MAX_DIM],
            dim,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.data[k][k] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (k, &v) in values.iter().enumerate() {
            m.data[k][k] = v;
        }
        m
    }

    /// Builds from row slices; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), rows.len(), "matrix must be square");
            m.data[r][..row.len()].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r][c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r][c] = v;
    }

    /// Sets both `(r, c)` and `(c, r)`.
    #[inline]
    pub fn set_sym(&mut self, r: usize, c: usize, v: f64) {
        self.data[r][c] = v;
        self.data[c][r] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                t.data[c][r] = self.data[r][c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.data[r][c] = (0..n).map(|k| self.data[r][k] * other.data[k][c]).sum();
            }
        }
        out
    }

    #[inline]
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for r in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += self.data[r][k] * v[k];
            }
            out[r] = acc;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.data[r][c] -= other.data[r][c];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows()
            .flat_map(|r| r.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.dim {
            for c in 0..r {
                worst = worst.max((self.data[r][c] - self.data[c][r]).abs());
            }
        }
        worst
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data[..self.dim]
            .iter()
            .map(move |row| &row[..self.dim])
    }

    pub fn is_zero(&self) -> bool {
        self.rows().all(|r| r.iter().all(|&v| v == 0.0))
    }
}

/// Eigenpairs of a symmetric matrix; `vectors` holds eigenvectors as columns.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricEigen {
    pub values: [f64; MAX_DIM],
    pub vectors: SymMatrix,
}

/// Cyclic Jacobi eigendecomposition. Only the symmetric part of the input is
/// meaningful.
pub fn symmetric_eigen(a: &SymMatrix) -> SymmetricEigen {
    let n = a.dim;
    let mut m = a.data;
    let mut v = SymMatrix::identity(n).data;

    let total: f64 = m[..n]
        .iter()
        .flat_map(|r| r[..n].iter())
        .map(|x| x * x)
        .sum();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p][q] * m[p][q];
            }
        }
        if off == 0.0 || off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in m.iter_mut().take(n) {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * apk - s * aqk;
                    m[q][k] = s * apk + c * aqk;
                }
                m[p][q] = 0.0;
                m[q][p] = 0.0;
                for row in v.iter_mut().take(n) {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut values = [0.0; MAX_DIM];
    for k in 0..n {
        values[k] = m[k][k];
    }
    SymmetricEigen {
        values,
        vectors: SymMatrix { data: v, dim: n },
    }
}

/// Symmetric positive semidefinite square root `B` with `B·B = Σ`.
pub fn psd_sqrt(sigma: &SymMatrix) -> Result<SymMatrix, LinalgError> {
    let n = sigma.dim;
    if sigma.rows().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(LinalgError::NonFinite);
    }
    let scale = 1.0 + sigma.frobenius_norm();
    for r in 0..n {
        for c in 0..r {
            let gap = (sigma.data[r][c] - sigma.data[c][r]).abs();
            if gap > 1e-12 * scale {
                return Err(LinalgError::NotSymmetric {
                    row: r,
                    col: c,
                    gap,
                });
            }
        }
    }

    // Diagonal input is common (no infected animals); skip the eigensolve.
    let mut diagonal = true;
    for r in 0..n {
        for c in 0..n {
            if r != c && sigma.data[r][c] != 0.0 {
                diagonal = false;
            }
        }
    }
    if diagonal {
        let mut b = SymMatrix::zeros(n);
        for k in 0..n {
            let lam = sigma.data[k][k];
            if lam < EIGEN_NEGATIVE_LIMIT * scale {
                return Err(LinalgError::NotPsd { eigenvalue: lam });
            }
            b.data[k][k] = if lam < EIGEN_ZERO_CLAMP * scale {
                0.0
            } else {
                lam.sqrt()
            };
        }
        return Ok(b);
    }

    let eig = symmetric_eigen(sigma);
    let mut roots = [0.0; MAX_DIM];
    for k in 0..n {
        let lam = eig.values[k];
        if lam < EIGEN_NEGATIVE_LIMIT * scale {
            return Err(LinalgError::NotPsd { eigenvalue: lam });
        }
        roots[k] = if lam < EIGEN_ZERO_CLAMP * scale {
            0.0
        } else {
            lam.sqrt()
        };
    }
    let v = &eig.vectors.data;
    let mut b = SymMatrix::zeros(n);
    for r in 0..n {
        for c in r..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += v[r][k] * roots[k] * v[c][k];
            }
            b.set_sym(r, c, acc);
        }
    }
    Ok(b)
}
