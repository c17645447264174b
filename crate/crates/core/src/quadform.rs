//! Quadratic Hamiltonian `H(p) = ½ Ap·p` and its Legendre dual `L(q) = ½ A⁻¹q·q`.
//!
//! [`SpdForm`] stores the matrix together with its inverse and the extreme
//! eigenvalues of `A⁻¹`, so every downstream evaluation is a couple of small
//! dense loops with no allocation.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

/// Largest dimension accepted by [`SpdForm::new`].
pub const MAX_DIM: usize = 8;

const SYMMETRY_TOL: f64 = 1e-12;

/// A symmetric positive definite matrix `A` with cached inverse and spectral bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdForm {
    n: usize,
    a: Vec<f64>,
    a_inv: Vec<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl SpdForm {
    /// Builds the form from `n²` row-major entries.
    pub fn new(n: usize, entries: &[f64]) -> Result<Self> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "dimension must be in 1..={MAX_DIM}, got {n}"
            )));
        }
        check_dim(n * n, entries.len())?;
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (entries[i * n + j] - entries[j * n + i]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::NotSymmetric { i, j, gap });
                }
            }
        }
        let a = DMatrix::from_row_slice(n, n, entries);
        let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let a_inv = chol.inverse();
        // Symmetrize to wash out round-off so quadratic forms stay exact under transposition.
        let a_inv = (&a_inv + a_inv.transpose()) * 0.5;

        let eig = SymmetricEigen::new(a_inv.clone());
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if !(lambda_min > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }

        let mut inv_rows = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                inv_rows.push(a_inv[(i, j)]);
            }
        }
        Ok(Self {
            n,
            a: entries.to_vec(),
            a_inv: inv_rows,
            lambda_min,
            lambda_max,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = 1.0;
        }
        Self::new(n, &m)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            m[i * n + i] = *d;
        }
        Self::new(n, &m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Row-major entries of `A`.
    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    /// Row-major entries of `A⁻¹`.
    pub fn inverse(&self) -> &[f64] {
        &self.a_inv
    }

    /// `min { A⁻¹z·z : |z| = 1 }`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// `max { A⁻¹z·z : |z| = 1 }`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn hamiltonian(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.n, p.len())?;
        Ok(self.h(p))
    }

    pub fn lagrangian(&self, q: &[f64]) -> Result<f64> {
        check_dim(self.n, q.len())?;
        Ok(self.l(q))
    }

    /// `∇H(p) = Ap`.
    pub fn grad_hamiltonian(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, p.len())?;
        let mut out = vec![0.0; self.n];
        self.apply(p, &mut out);
        Ok(out)
    }

    /// `∇L(q) = A⁻¹q`.
    pub fn grad_lagrangian(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, q.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_inv(q, &mut out);
        Ok(out)
    }

    // Unchecked kernels for the hot loops. Callers guarantee lengths.

    #[inline]
    pub(crate) fn h(&self, p: &[f64]) -> f64 {
        0.5 * quad(&self.a, p)
    }

    #[inline]
    pub(crate) fn l(&self, q: &[f64]) -> f64 {
        0.5 * quad(&self.a_inv, q)
    }

    #[inline]
    pub(crate) fn apply(&self, p: &[f64], out: &mut [f64]) {
        matvec(&self.a, p, out);
    }

    #[inline]
    pub(crate) fn apply_inv(&self, q: &[f64], out: &mut [f64]) {
        matvec(&self.a_inv, q, out);
    }

    /// `Au·v`.
    #[inline]
    pub(crate) fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let mut r = 0.0;
            for j in 0..n {
                r += row[j] * v[j];
            }
            acc += u[i] * r;
        }
        acc
    }
}

#[inline]
fn quad(m: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        let mut r = 0.0;
        for j in 0..n {
            r += row[j] * v[j];
        }
        acc += v[i] * r;
    }
    acc
}

#[inline]
fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}
