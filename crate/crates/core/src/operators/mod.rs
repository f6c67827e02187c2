//! Renewal operators `R_n` of the induced map and their power series.

mod spectral;

pub use spectral::{
    check_h2ii, contour_projection, eigenvalue_derivative_at_one, eigenvalue_path, spectral_data,
    ContourOptions, H2Report, SpectralData,
};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, SparseMatrix};
use crate::systems::{InducedSystem, Kernel};

/// Operator norm used for `‖R_n‖`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormKind {
    /// Maximum absolute row sum on densities.
    #[default]
    Sup,
    /// Operator norm on `L¹(μ)`.
    WeightedL1,
}

/// The matrices `R_1, ..., R_N` acting on densities with respect to the cell
/// masses: `(R_n v)(i) = Σ_{pieces p, φ(p)=n} μ(p) v(cell p) P(p → i) / μ(i)`.
#[derive(Clone, Debug)]
pub struct OperatorFamily {
    cell_masses: Vec<f64>,
    terms: Vec<SparseMatrix>,
    truncation: Option<usize>,
    norm: NormKind,
    term_norms: Vec<f64>,
    /// `norm_tails[j] = Σ_{ℓ>j} ‖R_ℓ‖`.
    norm_tails: Vec<f64>,
}

impl OperatorFamily {
    fn from_terms(
        cell_masses: Vec<f64>,
        terms: Vec<SparseMatrix>,
        truncation: Option<usize>,
        norm: NormKind,
    ) -> Self {
        let term_norms: Vec<f64> = terms
            .iter()
            .map(|t| match norm {
                NormKind::Sup => t.sup_norm(),
                NormKind::WeightedL1 => t.weighted_l1_norm(&cell_masses),
            })
            .collect();
        let mut norm_tails = vec![0.0; terms.len() + 1];
        for j in (0..terms.len()).rev() {
            norm_tails[j] = norm_tails[j + 1] + term_norms[j];
        }
        Self { cell_masses, terms, truncation, norm, term_norms, norm_tails }
    }

    /// Builds `R_n` for every return time of `system`.
    pub fn build(system: &InducedSystem) -> Result<Self> {
        let m = system.cells();
        let masses = system.cell_masses().to_vec();
        let nmax = system.max_return();
        let mut acc: Vec<BTreeMap<(usize, usize), f64>> = vec![BTreeMap::new(); nmax];
        for (idx, p) in system.pieces().iter().enumerate() {
            let slot = &mut acc[p.return_time - 1];
            match system.kernel() {
                // landing probability equals μ(i), which cancels the density factor
                Kernel::RankOne => {
                    for i in 0..m {
                        *slot.entry((i, p.cell)).or_insert(0.0) += p.mass;
                    }
                }
                Kernel::PerPiece(rows) => {
                    for &(i, prob) in &rows[idx] {
                        *slot.entry((i, p.cell)).or_insert(0.0) += p.mass * prob / masses[i];
                    }
                }
            }
        }
        let terms = acc
            .into_iter()
            .map(|map| {
                let trip = map.into_iter().map(|((i, j), v)| (i, j, v)).collect();
                SparseMatrix::from_triplets(m, m, trip)
            })
            .collect();
        let fam = Self::from_terms(masses, terms, None, NormKind::Sup);
        for v in fam.terms.iter().flat_map(|t| t.entries.iter().map(|e| e.2)) {
            if !v.is_finite() {
                return Err(Error::NonFinite("renewal operator entries"));
            }
        }
        Ok(fam)
    }

    /// Same matrices measured in another norm.
    pub fn with_norm(&self, norm: NormKind) -> Self {
        Self::from_terms(self.cell_masses.clone(), self.terms.clone(), self.truncation, norm)
    }

    /// Family of the truncated return time `min(φ, k)`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("truncation level must be at least 1".into()));
        }
        if self.truncation.is_some() {
            return Err(Error::InvalidParameter("family is already truncated".into()));
        }
        let m = self.dim();
        let mut terms: Vec<SparseMatrix> = self.terms.iter().take(k.min(self.terms.len())).cloned().collect();
        if self.terms.len() > k {
            let trip: Vec<_> = self.terms[k - 1..].iter().flat_map(|t| t.entries.iter().copied()).collect();
            terms[k - 1] = SparseMatrix::from_triplets(m, m, trip);
        }
        Ok(Self::from_terms(self.cell_masses.clone(), terms, Some(k), self.norm))
    }

    /// `γ R_n` for every `n`.
    pub fn twisted(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter("twist must lie in (0, 1)".into()));
        }
        let terms = self.terms.iter().map(|t| t.scaled(gamma)).collect();
        Ok(Self::from_terms(self.cell_masses.clone(), terms, self.truncation, self.norm))
    }

    pub fn dim(&self) -> usize {
        self.cell_masses.len()
    }

    pub fn cell_masses(&self) -> &[f64] {
        &self.cell_masses
    }

    /// Largest index with a stored term.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }

    /// `R_n` (zero beyond the stored range).
    pub fn term(&self, n: usize) -> SparseMatrix {
        if n >= 1 && n <= self.terms.len() {
            self.terms[n - 1].clone()
        } else {
            SparseMatrix::zeros(self.dim(), self.dim())
        }
    }

    /// `R_1, ..., R_len`.
    pub fn terms(&self) -> &[SparseMatrix] {
        &self.terms
    }

    /// `‖R_n‖` in the family's norm.
    pub fn term_norm(&self, n: usize) -> f64 {
        if n >= 1 && n <= self.terms.len() {
            self.term_norms[n - 1]
        } else {
            0.0
        }
    }

    /// `Σ_{ℓ>j} ‖R_ℓ‖`.
    pub fn norm_tail(&self, j: usize) -> f64 {
        self.norm_tails.get(j).copied().unwrap_or(0.0)
    }

    /// Norm of a complex matrix in the family's norm.
    pub fn matrix_norm(&self, m: &CMatrix) -> f64 {
        match self.norm {
            NormKind::Sup => linalg::sup_norm_c(m),
            NormKind::WeightedL1 => linalg::weighted_l1_norm_c(m, &self.cell_masses),
        }
    }

    /// `R(z) = Σ_n R_n z^n`.
    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let m = self.dim();
        let mut out = CMatrix::zeros(m, m);
        let mut zn = Complex64::new(1.0, 0.0);
        for t in &self.terms {
            zn *= z;
            if !t.is_zero() {
                t.add_into(&mut out, zn);
            }
        }
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("R(z)"));
        }
        Ok(out)
    }

    /// `R(1) = Σ_n R_n`.
    pub fn sum(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for t in &self.terms {
            t.add_into(&mut out, 1.0);
        }
        out
    }

    /// `∫ φ dμ` of the family's return time, from `∫ R_n 1 dμ = μ(φ=n)`.
    pub fn mean_return(&self) -> f64 {
        let ones = vec![1.0; self.dim()];
        self.terms
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let y = t.mul_vec(&ones);
                (i + 1) as f64 * y.iter().zip(&self.cell_masses).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum()
    }

    /// `max_j |(μᵀ R(1))_j - μ_j|`.
    pub fn integral_defect(&self) -> f64 {
        let r = self.sum();
        (0..self.dim())
            .map(|j| {
                let s: f64 = (0..self.dim()).map(|i| self.cell_masses[i] * r[(i, j)]).sum();
                (s - self.cell_masses[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Rank-one averaging projection `Pv = (∫ v dμ) 1`.
    pub fn projection(&self) -> DMatrix<f64> {
        linalg::averaging_projection(&self.cell_masses)
    }
}

/// Free-function form of [`OperatorFamily::build`].
pub fn build_family(system: &InducedSystem) -> Result<OperatorFamily> {
    OperatorFamily::build(system)
}

/// Free-function form of [`OperatorFamily::eval`].
pub fn eval_r(family: &OperatorFamily, z: Complex64) -> Result<CMatrix> {
    family.eval(z)
}

/// Free-function form of [`OperatorFamily::twisted`].
pub fn twisted_family(family: &OperatorFamily, gamma: f64) -> Result<OperatorFamily> {
    family.twisted(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_iid_system, TailModel};

    fn family(p: &[f64]) -> OperatorFamily {
        OperatorFamily::build(&build_iid_system(&TailModel::from_masses(p).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn point_mass_family_is_the_averaging_projection() {
        let f = family(&[1.0]);
        assert_eq!(f.len(), 1);
        assert_eq!(f.term(1).to_dense(), f.projection());
        assert!(f.term(2).is_zero());
    }

    #[test]
    fn rank_one_terms_act_on_constants_by_mass() {
        let f = family(&[0.5, 0.5]);
        for n in 1..=2 {
            let y = f.term(n).mul_vec(&[1.0, 1.0]);
            assert_eq!(y, vec![0.5, 0.5]);
            assert_eq!(f.term_norm(n), 0.5);
        }
    }

    #[test]
    fn eval_at_i_on_constants() {
        let f = family(&[0.5, 0.5]);
        let r = f.eval(Complex64::i()).unwrap();
        let s = r[(0, 0)] + r[(0, 1)];
        assert!((s - Complex64::new(-0.5, 0.5)).norm() < 1e-15);
        let zero = f.eval(Complex64::new(0.0, 0.0)).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn norm_tails_of_three_point_law() {
        let f = family(&[0.5, 0.25, 0.25]);
        assert_eq!(f.norm_tail(1), 0.5);
        assert_eq!(f.norm_tail(2), 0.25);
        assert_eq!(f.norm_tail(3), 0.0);
    }

    #[test]
    fn truncation_keeps_the_sum() {
        let f = family(&[0.3, 0.2, 0.1, 0.4]);
        for k in 1..=5 {
            let t = f.truncated(k).unwrap();
            assert!((t.sum() - f.sum()).abs().max() < 1e-15);
            assert_eq!(t.len(), k.min(4));
        }
        assert!(f.truncated(0).is_err());
    }

    #[test]
    fn weighted_norm_of_rank_one_terms() {
        let f = family(&[0.25, 0.75]).with_norm(NormKind::WeightedL1);
        assert!((f.term_norm(1) - 1.0).abs() < 1e-15);
        assert!((f.term_norm(2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn twisting_scales_entries() {
        let f = family(&[0.5, 0.5]);
        let g = f.twisted(0.3).unwrap();
        assert_eq!(g.term(2).to_dense(), f.term(2).to_dense() * 0.3);
        assert!(f.twisted(1.0).is_err());
    }
}
