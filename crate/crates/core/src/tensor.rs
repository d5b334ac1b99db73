//! Small dense index containers.

use nalgebra::{DMatrix, DVector};

/// Rank-3 array `T^i_jk`, stored row-major in `(i, j, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    t.data[(i * dim + j) * dim + k] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry.
    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        Tensor3 {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// `v^i = T^i_jk a^j b^k`
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| {
            let mut s = 0.0;
            for j in 0..self.dim {
                for k in 0..self.dim {
                    s += self.get(i, j, k) * a[j] * b[k];
                }
            }
            s
        })
    }

    /// Matrix `M^i_j = T^i_jk v^k` (last slot contracted).
    pub fn contract_last(&self, v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| (0..self.dim).map(|k| self.get(i, j, k) * v[k]).sum())
    }
}

/// Outer product `column ⊗ row` as a matrix acting on column vectors.
pub fn outer(column: &DVector<f64>, row: &DVector<f64>) -> DMatrix<f64> {
    column * row.transpose()
}
