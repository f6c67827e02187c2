//! Correlation functions on towers: exact operator iteration, Monte Carlo,
//! boundary operators of the renewal decomposition, and rate fits.

mod boundary;
mod fit;
mod monte_carlo;

pub use boundary::{
    build_boundary_ops, check_a_norms, check_gouezel_identity, check_projection_identity, BoundaryOps,
};
pub use fit::{fit_rate, RateFit, RateModel};
pub use monte_carlo::{mc_correlation, McOptions, McTarget};

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use crate::bounds::trunc_bound;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::numeric::neumaier_sum;
use crate::systems::{TailModel, SystemKind};
use crate::tower::{Flow, Tower};

/// Above this many states the operator path streams instead of building the
/// transfer matrix.
pub const EXPLICIT_STATE_LIMIT: usize = 10_000;

/// A function on tower states `(piece, level)`.
///
/// Every variant is constant on the `(piece, level)` cylinders, so the same
/// observable lives on a tower and on its truncations.
#[derive(Clone)]
pub enum Observable {
    /// Value by level; levels past the end take the last value.
    Level(Vec<f64>),
    /// Value per `(piece, level)` of the full tower, piece-major.
    State(Vec<f64>),
    /// A function on `[0, 1]`, averaged over the quadrature orbits of an
    /// Ulam-discretized map.
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Level(v) => f.debug_tuple("Level").field(v).finish(),
            Self::State(v) => f.debug_tuple("State").field(&v.len()).finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Observable {
    pub fn constant(c: f64) -> Self {
        Self::Level(vec![c])
    }

    /// `1_Y`, the indicator of level 0.
    pub fn base_indicator() -> Self {
        Self::Level(vec![1.0, 0.0])
    }

    pub fn function<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Function(Arc::new(f))
    }

    pub(crate) fn lift(&self, tower: &Tower) -> Result<Lifted> {
        let lifted = match self {
            Self::Level(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidParameter("level observable needs at least one value".into()));
                }
                Lifted::ByLevel(v.clone())
            }
            Self::State(v) => {
                let pieces = tower.base().pieces();
                let expected: usize = pieces.iter().map(|p| p.return_time).sum();
                if v.len() != expected {
                    return Err(Error::DimensionMismatch { expected, got: v.len() });
                }
                let mut out = Vec::with_capacity(tower.state_count());
                let mut full_offset = 0;
                for (p, piece) in pieces.iter().enumerate() {
                    out.extend_from_slice(&v[full_offset..full_offset + tower.height(p)]);
                    full_offset += piece.return_time;
                }
                Lifted::ByState(out)
            }
            Self::Function(f) => {
                let base = tower.base();
                let SystemKind::Ulam(ulam) = base.kind() else {
                    return Err(Error::Unsupported("function observables need an Ulam-discretized base".into()));
                };
                let mut out = Vec::with_capacity(tower.state_count());
                for (p, piece) in base.pieces().iter().enumerate() {
                    let h = piece.return_time;
                    let orbits = &ulam.orbits[p];
                    let count = orbits.len() / h;
                    for level in 0..tower.height(p) {
                        let s = neumaier_sum((0..count).map(|c| f(orbits[c * h + level])));
                        out.push(s / count as f64);
                    }
                }
                Lifted::ByState(out)
            }
        };
        if !lifted.values().iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("observable"));
        }
        Ok(lifted)
    }

    /// `sup |v|` over the states of `tower`.
    pub fn sup_norm(&self, tower: &Tower) -> Result<f64> {
        let lifted = self.lift(tower)?;
        Ok(match &lifted {
            Lifted::ByLevel(v) => v.iter().take(tower.max_height()).fold(0.0, |m, x| m.max(x.abs())),
            Lifted::ByState(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        })
    }
}

pub(crate) enum Lifted {
    ByLevel(Vec<f64>),
    ByState(Vec<f64>),
}

impl Lifted {
    fn values(&self) -> &[f64] {
        match self {
            Self::ByLevel(v) | Self::ByState(v) => v,
        }
    }

    #[inline]
    pub(crate) fn at(&self, tower: &Tower, piece: usize, level: usize) -> f64 {
        match self {
            Self::ByLevel(v) => v[level.min(v.len() - 1)],
            Self::ByState(v) => v[tower.offset(piece) + level],
        }
    }

    fn by_level(&self, levels: usize) -> Option<Vec<f64>> {
        match self {
            Self::ByLevel(v) => Some((0..levels).map(|l| v[l.min(v.len() - 1)]).collect()),
            Self::ByState(_) => None,
        }
    }

    fn states(&self, tower: &Tower) -> Vec<f64> {
        let mut out = Vec::with_capacity(tower.state_count());
        for p in 0..tower.heights().len() {
            out.extend((0..tower.height(p)).map(|l| self.at(tower, p, l)));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Operator,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Operator => "operator",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

/// `ρ(n)` for `n = 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSeries {
    pub values: Vec<f64>,
    /// Batch-means standard errors; Monte Carlo only.
    pub std_errors: Option<Vec<f64>>,
    pub method: Method,
    pub truncation: Option<usize>,
    pub states: usize,
}

impl CorrelationSeries {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }
}

/// Transfer operator of the tower on densities with respect to `μ_Δ`, in
/// state order: `(row, col)` moves mass from state `col` to state `row`.
pub fn transfer_matrix(tower: &Tower) -> SparseMatrix {
    let base = tower.base();
    let pieces = base.pieces();
    let masses = base.cell_masses();
    let mut trip = Vec::with_capacity(tower.state_count() + pieces.len());
    for (p, piece) in pieces.iter().enumerate() {
        let off = tower.offset(p);
        let h = tower.height(p);
        for l in 0..h - 1 {
            trip.push((off + l + 1, off + l, 1.0));
        }
        for (cell, prob) in base.landing(p) {
            let w = piece.mass * prob / masses[cell];
            for &q in base.cell_pieces(cell) {
                trip.push((tower.offset(q), off + h - 1, w));
            }
        }
    }
    SparseMatrix::from_triplets(tower.state_count(), tower.state_count(), trip)
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Exact `ρ(n) = ∫ v·w∘f^n dμ_Δ − ∫v ∫w` by evolving `(v − ∫v) μ_Δ`.
pub fn operator_correlation(tower: &Tower, v: &Observable, w: &Observable, horizon: usize) -> Result<CorrelationSeries> {
    check_horizon(horizon)?;
    let lv = v.lift(tower)?;
    let lw = w.lift(tower)?;
    let levels = tower.max_height();
    let values = match (tower.base().is_rank_one(), lv.by_level(levels), lw.by_level(levels)) {
        (true, Some(vl), Some(wl)) => level_chain(tower, &vl, &wl, horizon),
        _ => {
            let vs = lv.states(tower);
            let ws = lw.states(tower);
            if tower.state_count() <= EXPLICIT_STATE_LIMIT {
                explicit(tower, &vs, &ws, horizon)
            } else {
                streaming(tower, &vs, &ws, horizon)
            }
        }
    };
    if !values.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("correlation"));
    }
    Ok(CorrelationSeries {
        values,
        std_errors: None,
        method: Method::Operator,
        truncation: tower.truncation(),
        states: tower.state_count(),
    })
}

/// Rank-one kernel with level observables: the density at `(p, ℓ)` does not
/// depend on `p`, so one value per level suffices.
fn level_chain(tower: &Tower, v: &[f64], w: &[f64], horizon: usize) -> Vec<f64> {
    let levels = tower.max_height();
    let pieces = tower.base().pieces();
    // exits[ℓ] = μ(h = ℓ+1), alive[ℓ] = μ(h > ℓ)
    let mut exits = vec![0.0; levels];
    for (p, piece) in pieces.iter().enumerate() {
        exits[tower.height(p) - 1] += piece.mass;
    }
    let mut alive = vec![0.0; levels];
    let mut acc = 0.0;
    for l in (0..levels).rev() {
        acc += exits[l];
        alive[l] = acc;
    }
    let hbar = tower.mean_height();
    let vbar = neumaier_sum((0..levels).map(|l| v[l] * alive[l])) / hbar;
    let mut y: VecDeque<f64> = v.iter().map(|x| x - vbar).collect();
    let exit_levels: Vec<usize> = (0..levels).filter(|&l| exits[l] != 0.0).collect();
    let mut out = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        out.push(neumaier_sum((0..levels).map(|l| w[l] * y[l] * alive[l])) / hbar);
        if t == horizon {
            break;
        }
        let inflow = neumaier_sum(exit_levels.iter().map(|&l| y[l] * exits[l]));
        y.pop_back();
        y.push_front(inflow);
    }
    out
}

fn centered(tower: &Tower, v: &[f64]) -> Vec<f64> {
    let masses = tower.state_masses();
    let vbar = neumaier_sum(v.iter().zip(&masses).map(|(a, m)| a * m));
    v.iter().map(|x| x - vbar).collect()
}

fn explicit(tower: &Tower, v: &[f64], w: &[f64], horizon: usize) -> Vec<f64> {
    let l = transfer_matrix(tower);
    let masses = tower.state_masses();
    let mut x = centered(tower, v);
    let mut out = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        out.push(neumaier_sum(x.iter().zip(w).zip(&masses).map(|((a, b), m)| a * b * m)));
        if t < horizon {
            x = l.mul_vec(&x);
        }
    }
    out
}

fn streaming(tower: &Tower, v: &[f64], w: &[f64], horizon: usize) -> Vec<f64> {
    let x = centered(tower, v);
    let mut flow = Flow::new(tower, &x);
    let hbar = tower.mean_height();
    let mut out = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        out.push(flow.pair(w) / hbar);
        if t < horizon {
            flow.step(|_| false);
        }
    }
    out
}

/// Per-`n` comparison of full and truncated correlations against the
/// truncation bound.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncReport {
    pub k: usize,
    pub differences: Vec<f64>,
    pub bounds: Vec<f64>,
    /// `|ρ(n) − ρ'(n)| / bound(n)`; `0/0` counts as zero.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax: usize,
}

pub fn trunc_compare(full: &CorrelationSeries, truncated: &CorrelationSeries, tail: &TailModel, k: usize) -> Result<TruncReport> {
    if full.values.len() != truncated.values.len() {
        return Err(Error::DimensionMismatch { expected: full.values.len(), got: truncated.values.len() });
    }
    let mut report = TruncReport {
        k,
        differences: Vec::with_capacity(full.values.len()),
        bounds: Vec::with_capacity(full.values.len()),
        ratios: Vec::with_capacity(full.values.len()),
        max_ratio: 0.0,
        argmax: 0,
    };
    for (n, (a, b)) in full.values.iter().zip(&truncated.values).enumerate() {
        let d = (a - b).abs();
        let bound = trunc_bound(tail, n, k);
        let r = if d == 0.0 { 0.0 } else if bound == 0.0 { f64::INFINITY } else { d / bound };
        if r > report.max_ratio {
            report.max_ratio = r;
            report.argmax = n;
        }
        report.differences.push(d);
        report.bounds.push(bound);
        report.ratios.push(r);
    }
    Ok(report)
}
