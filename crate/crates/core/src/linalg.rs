//! Sparse Hermitian operators and dense eigen-decomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Hermitian matrix stored as a list of entries (both triangles), with an
/// optional partition of the index set into invariant blocks.
#[derive(Clone, Debug, Default)]
pub struct OperatorMatrix {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
    pub blocks: Option<Vec<Vec<usize>>>,
}

impl OperatorMatrix {
    pub fn zeros(dim: usize) -> Self {
        OperatorMatrix { dim, entries: Vec::new(), blocks: None }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    /// Adds `v` at `(i, j)` and its conjugate at `(j, i)`.
    pub fn add_hermitian(&mut self, i: usize, j: usize, v: C64) {
        if v == C64::new(0.0, 0.0) {
            return;
        }
        if i == j {
            self.entries.push((i, i, C64::new(v.re, 0.0)));
        } else {
            self.entries.push((i, j, v));
            self.entries.push((j, i, v.conj()));
        }
    }

    /// Adds `v` at `(i, j)` only.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        if v != C64::new(0.0, 0.0) {
            self.entries.push((i, j, v));
        }
    }

    pub fn add_diagonal(&mut self, diag: &[f64]) {
        for (i, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                self.entries.push((i, i, C64::new(d, 0.0)));
            }
        }
    }

    /// Merges duplicate positions and drops exact zeros.
    pub fn compress(&mut self) {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut out: Vec<(usize, usize, C64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match out.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        out.retain(|e| e.2 != C64::new(0.0, 0.0));
        self.entries = out;
    }

    pub fn scaled(&self, s: f64) -> Self {
        OperatorMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, j, v)| (i, j, v * s)).collect(),
            blocks: self.blocks.clone(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &OperatorMatrix) {
        assert_eq!(self.dim, other.dim);
        self.entries.extend(other.entries.iter().map(|&(i, j, v)| (i, j, v * s)));
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|e| e.2.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_dense().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2).sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// Dense sub-matrix on `idx` (rows and columns).
    pub fn submatrix(&self, idx: &[usize]) -> DMatrix<C64> {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut m = DMatrix::zeros(idx.len(), idx.len());
        for &(i, j, v) in &self.entries {
            let (a, b) = (pos[i], pos[j]);
            if a != usize::MAX && b != usize::MAX {
                m[(a, b)] += v;
            }
        }
        m
    }

    /// Largest `|H_ij - conj(H_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.to_dense();
        (&d - d.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn sweep_limit(n: usize) -> usize {
    100 * n.max(10)
}

fn sorted<T: nalgebra::Scalar + Copy>(vals: &[f64], vecs: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = DMatrix::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    (sorted_vals, sorted_vecs)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues ascending,
/// eigenvectors in the columns. Uses a real solver when the matrix is real.
pub fn eigh(m: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    if m.iter().all(|v| v.im == 0.0) {
        let (vals, vecs) = eigh_real(&m.map(|v| v.re))?;
        return Ok((vals, vecs.map(|v| C64::new(v, 0.0))));
    }
    let n = m.nrows();
    let e = SymmetricEigen::try_new(m.clone(), f64::EPSILON, sweep_limit(n))
        .ok_or_else(|| Error::numerical(format!("eigensolver did not converge ({n} x {n})")))?;
    Ok(sorted(e.eigenvalues.as_slice(), &e.eigenvectors))
}

/// Real symmetric variant.
pub fn eigh_real(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let e = SymmetricEigen::try_new(m.clone(), f64::EPSILON, sweep_limit(n))
        .ok_or_else(|| Error::numerical(format!("eigensolver did not converge ({n} x {n})")))?;
    Ok(sorted(e.eigenvalues.as_slice(), &e.eigenvectors))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let mut vals: Vec<f64> = if m.iter().all(|v| v.im == 0.0) {
        if n == 0 {
            return Ok(Vec::new());
        }
        SymmetricEigen::try_new(m.map(|v| v.re), f64::EPSILON, sweep_limit(n))
            .ok_or_else(|| Error::numerical("eigensolver did not converge"))?
            .eigenvalues
            .as_slice()
            .to_vec()
    } else {
        SymmetricEigen::try_new(m.clone(), f64::EPSILON, sweep_limit(n))
            .ok_or_else(|| Error::numerical("eigensolver did not converge"))?
            .eigenvalues
            .as_slice()
            .to_vec()
    };
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_complex() {
        let mut op = OperatorMatrix::zeros(2);
        op.add_diagonal(&[1.0, -1.0]);
        op.add_hermitian(0, 1, C64::new(0.0, 1.0));
        let (vals, vecs) = eigh(&op.to_dense()).unwrap();
        let r = 2f64.sqrt();
        assert!((vals[0] + r).abs() < 1e-14 && (vals[1] - r).abs() < 1e-14);
        let d = op.to_dense();
        let v0 = vecs.column(0);
        let res = &d * v0 - v0 * C64::new(vals[0], 0.0);
        assert!(res.norm() < 1e-13);
        assert_eq!(op.hermiticity_defect(), 0.0);
    }

    #[test]
    fn compress_merges() {
        let mut op = OperatorMatrix::zeros(3);
        op.add(0, 1, C64::new(1.0, 0.0));
        op.add(0, 1, C64::new(-1.0, 0.0));
        op.add(2, 2, C64::new(3.0, 0.0));
        op.compress();
        assert_eq!(op.entries().len(), 1);
    }
}
