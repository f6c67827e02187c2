//! Boundary operators of the truncated tower: `A'_n` lifts base densities to
//! level `n`, `D'_n` collects mass that first reaches the base after `n`
//! steps, and `E'_n` is the part of `L'^n` that never visits the base.

use nalgebra::DMatrix;

use super::transfer_matrix;
use crate::error::{Error, Result};
use crate::linalg::{self, averaging_projection, SparseMatrix};
use crate::operators::OperatorFamily;
use crate::renewal::compute_t;
use crate::tower::Tower;

/// Largest truncated tower for which the decomposition is checked densely.
const DENSE_STATE_LIMIT: usize = 4000;

#[derive(Clone, Debug)]
pub struct BoundaryOps {
    k: usize,
    cells: usize,
    states: usize,
    /// `states × cells`, `n = 0..k`.
    a: Vec<SparseMatrix>,
    /// `cells × states`.
    d: Vec<SparseMatrix>,
    /// `states × states`.
    e: Vec<SparseMatrix>,
    /// `μ` of the piece under each state.
    piece_mass: Vec<f64>,
}

impl BoundaryOps {
    pub fn truncation(&self) -> usize {
        self.k
    }

    /// `A'_n`; zero for `n ≥ k`.
    pub fn a(&self, n: usize) -> SparseMatrix {
        self.a.get(n).cloned().unwrap_or_else(|| SparseMatrix::zeros(self.states, self.cells))
    }

    pub fn d(&self, n: usize) -> SparseMatrix {
        self.d.get(n).cloned().unwrap_or_else(|| SparseMatrix::zeros(self.cells, self.states))
    }

    pub fn e(&self, n: usize) -> SparseMatrix {
        self.e.get(n).cloned().unwrap_or_else(|| SparseMatrix::zeros(self.states, self.states))
    }

    /// `‖A'_n‖` from `L^∞(Y)` to `L¹(μ)` on the tower, i.e. `‖A'_n 1‖₁`.
    pub fn a_norm(&self, n: usize) -> f64 {
        self.a.get(n).map_or(0.0, |a| a.entries.iter().map(|&(s, _, v)| v * self.piece_mass[s]).sum())
    }
}

pub fn build_boundary_ops(truncated: &Tower, family: &OperatorFamily) -> Result<BoundaryOps> {
    let k = truncated
        .truncation()
        .ok_or_else(|| Error::InvalidParameter("boundary operators need a truncated tower".into()))?;
    if family.truncation() != Some(k) {
        return Err(Error::InvalidParameter(format!(
            "operator family truncated at {:?}, tower at {k}",
            family.truncation()
        )));
    }
    let base = truncated.base();
    let m = base.cells();
    if family.dim() != m {
        return Err(Error::DimensionMismatch { expected: m, got: family.dim() });
    }
    let states = truncated.state_count();
    let pieces = base.pieces();
    let masses = base.cell_masses();
    let mut a = vec![Vec::new(); k];
    let mut d = vec![Vec::new(); k];
    let mut e = vec![Vec::new(); k];
    let mut piece_mass = vec![0.0; states];
    for (p, piece) in pieces.iter().enumerate() {
        let off = truncated.offset(p);
        let h = truncated.height(p);
        piece_mass[off..off + h].iter_mut().for_each(|x| *x = piece.mass);
        d[0].push((piece.cell, off, piece.mass / masses[piece.cell]));
        let landing = base.landing(p);
        for n in 0..h {
            a[n].push((off + n, piece.cell, 1.0));
            if n >= 1 {
                for &(c, prob) in &landing {
                    d[n].push((c, off + h - n, piece.mass * prob / masses[c]));
                }
            }
            for l in n + 1..h {
                e[n].push((off + l, off + l - n, 1.0));
            }
        }
    }
    let sparse = |v: Vec<Vec<(usize, usize, f64)>>, r: usize, c: usize| {
        v.into_iter().map(|t| SparseMatrix::from_triplets(r, c, t)).collect()
    };
    Ok(BoundaryOps {
        k,
        cells: m,
        states,
        a: sparse(a, states, m),
        d: sparse(d, m, states),
        e: sparse(e, states, states),
        piece_mass,
    })
}

/// Replaces level-0 values by their `μ`-average over each cell: the
/// decomposition acts on densities that are cell-constant on the base.
fn base_averaging(truncated: &Tower) -> SparseMatrix {
    let base = truncated.base();
    let pieces = base.pieces();
    let masses = base.cell_masses();
    let mut trip = Vec::with_capacity(truncated.state_count());
    for (p, piece) in pieces.iter().enumerate() {
        let off = truncated.offset(p);
        for q in base.cell_pieces(piece.cell) {
            trip.push((off, truncated.offset(*q), pieces[*q].mass / masses[piece.cell]));
        }
        for l in 1..truncated.height(p) {
            trip.push((off + l, off + l, 1.0));
        }
    }
    SparseMatrix::from_triplets(truncated.state_count(), truncated.state_count(), trip)
}

/// `max_{n ≤ n_max} max |L'^n − Σ_{n₁+n₂+n₃=n} A'_{n₁} T'_{n₂} D'_{n₃} − E'_n|`,
/// both sides composed with the base averaging (the identity for rank-one
/// i.i.d. systems).
pub fn check_gouezel_identity(truncated: &Tower, family: &OperatorFamily, n_max: usize) -> Result<f64> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let states = truncated.state_count();
    if states > DENSE_STATE_LIMIT {
        return Err(Error::StateExplosion { states, limit: DENSE_STATE_LIMIT });
    }
    let ops = build_boundary_ops(truncated, family)?;
    let k = ops.k;
    let m = ops.cells;
    let t = compute_t(family, n_max)?;
    let l = transfer_matrix(truncated);
    let pi = base_averaging(truncated);
    let pi_dense = pi.to_dense();

    let dpi: Vec<DMatrix<f64>> = ops
        .d
        .iter()
        .map(|d| {
            let mut out = DMatrix::zeros(m, states);
            d.right_mul_into(&pi_dense, &mut out);
            out
        })
        .collect();
    let epi: Vec<DMatrix<f64>> = ops
        .e
        .iter()
        .map(|e| {
            let mut out = DMatrix::zeros(states, states);
            e.right_mul_into(&pi_dense, &mut out);
            out
        })
        .collect();

    // b[n] = Σ_{n₂+n₃=n} T'_{n₂} D'_{n₃} Π
    let mut b: Vec<DMatrix<f64>> = Vec::with_capacity(n_max + 1);
    let mut power = pi_dense.clone();
    let mut worst: f64 = 0.0;
    for n in 0..=n_max {
        let mut bn = DMatrix::zeros(m, states);
        for (n3, d) in dpi.iter().enumerate().take(n.min(k - 1) + 1) {
            bn.gemm(1.0, t.term(n - n3), d, 1.0);
        }
        b.push(bn);
        let mut g = epi.get(n).cloned().unwrap_or_else(|| DMatrix::zeros(states, states));
        for (n1, a) in ops.a.iter().enumerate().take(n.min(k - 1) + 1) {
            a.right_mul_into(&b[n - n1], &mut g);
        }
        worst = worst.max(linalg::max_abs(&(&power - g)));
        let mut next = DMatrix::zeros(states, states);
        l.right_mul_into(&power, &mut next);
        power = next;
    }
    Ok(worst)
}

/// `max |(1/h̄') A'(1) P D'(1) − P_Δ'|` in density coordinates.
pub fn check_projection_identity(truncated: &Tower, ops: &BoundaryOps) -> Result<f64> {
    if truncated.state_count() != ops.states {
        return Err(Error::DimensionMismatch { expected: ops.states, got: truncated.state_count() });
    }
    let base = truncated.base();
    let states = ops.states;
    let mut a1 = DMatrix::zeros(states, ops.cells);
    for a in &ops.a {
        a.add_into(&mut a1, 1.0);
    }
    let mut d1 = DMatrix::zeros(ops.cells, states);
    for d in &ops.d {
        d.add_into(&mut d1, 1.0);
    }
    let p = averaging_projection(base.cell_masses());
    let lhs = a1 * p * d1 / truncated.mean_height();
    let masses = nalgebra::RowDVector::from_vec(truncated.state_masses());
    let rhs = linalg::ones(states) * masses;
    Ok(linalg::max_abs(&(lhs - rhs)))
}

/// `(n, ‖A'_n‖, μ(φ ≥ n))` for `n = 0..k`.
pub fn check_a_norms(truncated: &Tower, ops: &BoundaryOps) -> Vec<(usize, f64, f64)> {
    let pieces = truncated.base().pieces();
    (0..ops.k)
        .map(|n| {
            let bound: f64 = pieces.iter().filter(|p| p.return_time >= n).map(|p| p.mass).sum();
            (n, ops.a_norm(n), bound)
        })
        .collect()
}
