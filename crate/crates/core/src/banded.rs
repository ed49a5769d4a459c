//! Block-tridiagonal systems with 3×3 blocks and their LU factorization
//! (block Thomas algorithm). Storage never exceeds the three block
//! diagonals.

use nalgebra::{DMatrix, Matrix3};

use crate::error::{FilamentError, Result};
use crate::grid::Vec3;

/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` is unused),
/// `upper[i]` multiplies `x[i+1]` (`upper[n-1]` is unused).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiag {
    pub lower: Vec<Matrix3<f64>>,
    pub diag: Vec<Matrix3<f64>>,
    pub upper: Vec<Matrix3<f64>>,
}

impl BlockTridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![Matrix3::zeros(); n],
            diag: vec![Matrix3::zeros(); n],
            upper: vec![Matrix3::zeros(); n],
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    /// Number of block diagonals stored: always 3.
    pub fn bandwidth_blocks(&self) -> usize {
        3
    }

    pub fn matvec(&self, x: &[Vec3]) -> Vec<Vec3> {
        let n = self.n_blocks();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_blocks();
        let mut m = DMatrix::zeros(3 * n, 3 * n);
        for i in 0..n {
            m.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(&self.diag[i]);
            if i > 0 {
                m.fixed_view_mut::<3, 3>(3 * i, 3 * (i - 1)).copy_from(&self.lower[i]);
            }
            if i + 1 < n {
                m.fixed_view_mut::<3, 3>(3 * i, 3 * (i + 1)).copy_from(&self.upper[i]);
            }
        }
        m
    }

    pub fn factor(&self) -> Result<BlockLu> {
        let n = self.n_blocks();
        let mut inv_d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        l.push(Matrix3::zeros());
        let mut d = self.diag[0];
        for i in 0..n {
            if i > 0 {
                let li = self.lower[i] * inv_d[i - 1];
                d = self.diag[i] - li * self.upper[i - 1];
                l.push(li);
            }
            let inv = d
                .try_inverse()
                .filter(|m| m.iter().all(|x| x.is_finite()))
                .ok_or(FilamentError::SingularBlock { block: i })?;
            inv_d.push(inv);
        }
        Ok(BlockLu {
            l,
            inv_d,
            upper: self.upper.clone(),
        })
    }

    pub fn solve(&self, rhs: &[Vec3]) -> Result<Vec<Vec3>> {
        Ok(self.factor()?.solve(rhs))
    }
}

/// Factors `A = L U` with unit block-lower `L` and `U` holding the
/// modified diagonal blocks (stored inverted) and the original upper
/// blocks.
#[derive(Debug, Clone)]
pub struct BlockLu {
    l: Vec<Matrix3<f64>>,
    inv_d: Vec<Matrix3<f64>>,
    upper: Vec<Matrix3<f64>>,
}

impl BlockLu {
    pub fn bandwidth_blocks(&self) -> usize {
        3
    }

    pub fn solve(&self, rhs: &[Vec3]) -> Vec<Vec3> {
        let n = self.inv_d.len();
        assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in 1..n {
            let prev = y[i - 1];
            y[i] -= self.l[i] * prev;
        }
        let mut x = vec![Vec3::zeros(); n];
        x[n - 1] = self.inv_d[n - 1] * y[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = self.inv_d[i] * (y[i] - self.upper[i] * x[i + 1]);
        }
        x
    }
}

#[cfg(test)]
pub(crate) fn flatten(x: &[Vec3]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(3 * x.len(), x.iter().flat_map(|v| [v.x, v.y, v.z]))
}
