//! Small dense square matrices for covariance-type quantities.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Row-major `dim x dim` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim, "row-major data has wrong length");
        Self { dim, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// `a ⊗ b`, i.e. entry `(i, j) = a[i] * b[j]`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len());
        let dim = a.len();
        let mut data = Vec::with_capacity(dim * dim);
        for &x in a {
            data.extend(b.iter().map(|&y| x * y));
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.dim.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn symmetrized(&self) -> Self {
        let t = self.transpose();
        self.zip_map(&t, |a, b| 0.5 * (a + b))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                for j in 0..d {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Eigen-decomposition of the symmetric part, eigenvalues ascending.
    pub fn symmetric_eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let s = self.symmetrized();
        let m = DMatrix::from_row_slice(self.dim, self.dim, &s.data);
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        (values, vectors)
    }

    /// Lower-triangular-up-to-permutation factor `L` with `L Lᵀ = self`.
    ///
    /// Zero modes are allowed; a pivot more negative than the tolerance is
    /// reported as [`Error::NotPsd`].
    pub fn psd_factor(&self) -> Result<Self> {
        let d = self.dim;
        if !self.is_symmetric(1e-9 * self.max_abs().max(1.0)) {
            return Err(Error::NotPsd("matrix is not symmetric".into()));
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let tol = 1e-12 * scale;
        let mut a = self.symmetrized();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut l = Self::zeros(d);
        for k in 0..d {
            // pivot on the largest remaining diagonal entry
            let (p, &best) = (k..d)
                .map(|i| (i, &a[(perm[i], perm[i])]))
                .max_by(|x, y| x.1.total_cmp(y.1))
                .expect("non-empty pivot range");
            if best < -tol {
                return Err(Error::NotPsd(format!("negative pivot {best:.3e}")));
            }
            perm.swap(k, p);
            let pk = perm[k];
            if best <= tol {
                // remaining Schur complement is numerically zero
                for &pi in &perm[k..] {
                    for &pj in &perm[k..] {
                        if a[(pi, pj)].abs() > 1e-8 * scale {
                            return Err(Error::NotPsd(format!(
                                "indefinite residual {:.3e}",
                                a[(pi, pj)]
                            )));
                        }
                    }
                }
                break;
            }
            let root = best.sqrt();
            l[(pk, k)] = root;
            for &pi in &perm[k + 1..] {
                l[(pi, k)] = a[(pi, pk)] / root;
            }
            for &pi in &perm[k + 1..] {
                for &pj in &perm[k + 1..] {
                    a[(pi, pj)] -= l[(pi, k)] * l[(pj, k)];
                }
            }
        }
        Ok(l)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
