//! Dense/sparse matrix helpers on top of nalgebra.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Coordinate-format sparse matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, value)` with distinct positions, sorted by column then row.
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    /// Builds from possibly repeated entries, summing duplicates.
    pub fn from_triplets(rows: usize, cols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|t| (t.1, t.0));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(trip.len());
        for (i, j, v) in trip {
            match entries.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => entries.push((i, j, v)),
            }
        }
        entries.retain(|e| e.2 != 0.0);
        Self { rows, cols, entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        self.add_into(&mut d, 1.0);
        d
    }

    /// `dense += scale * self`.
    pub fn add_into<T>(&self, dense: &mut DMatrix<T>, scale: T)
    where
        T: ComplexField + Copy + From<f64>,
    {
        for &(i, j, v) in &self.entries {
            dense[(i, j)] += scale * T::from(v);
        }
    }

    /// `out += left * self` for dense `left`.
    pub fn left_mul_into(&self, left: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            let src = left.column(i);
            let mut dst = out.column_mut(j);
            dst.axpy(v, &src, 1.0);
        }
    }

    /// `out += self * right` for dense `right`.
    pub fn right_mul_into(&self, right: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            for c in 0..right.ncols() {
                out[(i, c)] += v * right[(j, c)];
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let entries = self.entries.iter().map(|&(i, j, v)| (i, j, v * factor)).collect();
        Self { rows: self.rows, cols: self.cols, entries }
    }

    /// Maximum absolute row sum.
    pub fn sup_norm(&self) -> f64 {
        let mut rows = vec![0.0; self.rows];
        for &(i, _, v) in &self.entries {
            rows[i] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Operator norm on `L¹(μ)`: `max_j Σ_i μ_i |M_ij| / μ_j`.
    pub fn weighted_l1_norm(&self, masses: &[f64]) -> f64 {
        let mut cols = vec![0.0; self.cols];
        for &(i, j, v) in &self.entries {
            cols[j] += masses[i] * v.abs();
        }
        cols.iter().zip(masses).map(|(c, m)| c / m).fold(0.0, f64::max)
    }
}

/// Maximum absolute row sum of a complex matrix.
pub fn sup_norm_c(m: &CMatrix) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn sup_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|z| z.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `L¹(μ)` operator norm of a complex matrix.
pub fn weighted_l1_norm_c(m: &CMatrix, masses: &[f64]) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| masses[i] * m[(i, j)].norm()).sum::<f64>() / masses[j])
        .fold(0.0, f64::max)
}

pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|z| z.abs()).fold(0.0, f64::max)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Inverse by LU with partial pivoting, with a lower bound on the smallest
/// singular value (`1 / ‖A⁻¹‖_F`).
pub fn inverse_with_sigma(a: &CMatrix) -> Option<(CMatrix, f64)> {
    let inv = a.clone().lu().try_inverse()?;
    let fro = inv.norm();
    if !fro.is_finite() {
        return None;
    }
    Some((inv, 1.0 / fro))
}

/// Smallest singular value of `D^{1/2} A D^{-1/2}`, i.e. in the `L²(μ)`
/// geometry with cell masses `D`.
pub fn sigma_min_weighted(a: &CMatrix, masses: &[f64]) -> f64 {
    let n = a.nrows();
    let sq: Vec<f64> = masses.iter().map(|m| m.sqrt()).collect();
    let b = CMatrix::from_fn(n, n, |i, j| a[(i, j)] * (sq[i] / sq[j]));
    b.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

/// Rank-one averaging projection `1 μᵀ`.
pub fn averaging_projection(masses: &[f64]) -> DMatrix<f64> {
    let n = masses.len();
    DMatrix::from_fn(n, n, |_, j| masses[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_duplicates() {
        let s = SparseMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 0.5)]);
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.to_dense()[(0, 1)], 3.0);
    }

    #[test]
    fn sparse_products_match_dense() {
        let s = SparseMatrix::from_triplets(3, 3, vec![(0, 1, 1.5), (2, 0, -2.0), (1, 1, 0.25)]);
        let d = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 + 1.0);
        let mut left = DMatrix::zeros(3, 3);
        s.left_mul_into(&d, &mut left);
        assert!((left - &d * s.to_dense()).abs().max() < 1e-14);
        let mut right = DMatrix::zeros(3, 3);
        s.right_mul_into(&d, &mut right);
        assert!((right - s.to_dense() * &d).abs().max() < 1e-14);
    }

    #[test]
    fn identity_sigma_is_one() {
        let i = CMatrix::identity(4, 4);
        let s = sigma_min_weighted(&i, &[0.1, 0.2, 0.3, 0.4]);
        assert!((s - 1.0).abs() < 1e-14);
    }
}
