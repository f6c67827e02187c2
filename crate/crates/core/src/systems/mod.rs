//! Return-time laws and finite-rank induced systems.

mod lsv;
mod tail;

pub use lsv::{build_lsv_system, lsv_map, LsvParams, UlamData};
pub use tail::{sample_return_time, tail_prob, LogPower, TailClass, TailModel};

use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;

/// A cylinder of the induced map: a subset of one base cell on which the
/// return time is constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub cell: usize,
    pub return_time: usize,
    pub mass: f64,
}

/// Where the image of each piece lands in the base.
#[derive(Clone, Debug)]
pub enum Kernel {
    /// Every piece maps onto all of `Y`, landing with the cell masses.
    RankOne,
    /// Per-piece landing distributions over cells, each summing to one.
    PerPiece(Vec<Vec<(usize, f64)>>),
}

#[derive(Clone, Debug)]
pub enum SystemKind {
    RankOneIid(TailModel),
    Ulam(Box<UlamData>),
}

/// Finite-rank model of an induced map `F: Y → Y` with return time `φ`.
#[derive(Clone, Debug)]
pub struct InducedSystem {
    kind: SystemKind,
    cell_masses: Vec<f64>,
    pieces: Vec<Piece>,
    kernel: Kernel,
    cell_pieces: Vec<Vec<usize>>,
}

impl InducedSystem {
    pub(crate) fn new(
        kind: SystemKind,
        cell_masses: Vec<f64>,
        pieces: Vec<Piece>,
        kernel: Kernel,
    ) -> Result<Self> {
        let m = cell_masses.len();
        if m == 0 || pieces.is_empty() {
            return Err(Error::InvalidParameter("system needs at least one cell and piece".into()));
        }
        if cell_masses.iter().any(|&c| !(c > 0.0)) {
            let empty = (0..m).filter(|&j| !(cell_masses[j] > 0.0)).collect();
            return Err(Error::EmptyCells(empty));
        }
        let total = neumaier_sum(cell_masses.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization { defect: total - 1.0 });
        }
        let mut cell_pieces = vec![Vec::new(); m];
        for (i, p) in pieces.iter().enumerate() {
            if p.cell >= m || p.return_time == 0 || !(p.mass > 0.0) {
                return Err(Error::InvalidParameter(format!("malformed piece {i}: {p:?}")));
            }
            cell_pieces[p.cell].push(i);
        }
        if let Kernel::PerPiece(rows) = &kernel {
            if rows.len() != pieces.len() {
                return Err(Error::DimensionMismatch { expected: pieces.len(), got: rows.len() });
            }
        }
        Ok(Self { kind, cell_masses, pieces, kernel, cell_pieces })
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn is_rank_one(&self) -> bool {
        matches!(self.kernel, Kernel::RankOne)
    }

    pub fn ulam(&self) -> Option<&UlamData> {
        match &self.kind {
            SystemKind::Ulam(u) => Some(u),
            SystemKind::RankOneIid(_) => None,
        }
    }

    /// Number of base cells `m`.
    pub fn cells(&self) -> usize {
        self.cell_masses.len()
    }

    pub fn cell_masses(&self) -> &[f64] {
        &self.cell_masses
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Indices of the pieces inside `cell`.
    pub fn cell_pieces(&self, cell: usize) -> &[usize] {
        &self.cell_pieces[cell]
    }

    /// Landing distribution of `piece` as `(cell, probability)` pairs.
    pub fn landing(&self, piece: usize) -> Vec<(usize, f64)> {
        match &self.kernel {
            Kernel::RankOne => self.cell_masses.iter().copied().enumerate().collect(),
            Kernel::PerPiece(rows) => rows[piece].clone(),
        }
    }

    pub fn max_return(&self) -> usize {
        self.pieces.iter().map(|p| p.return_time).max().unwrap_or(1)
    }

    /// `∫ φ dμ`.
    pub fn mean_return(&self) -> f64 {
        neumaier_sum(self.pieces.iter().map(|p| p.mass * p.return_time as f64))
    }

    /// Law of `φ` recovered from the pieces.
    pub fn return_tail(&self) -> Result<TailModel> {
        let mut masses = vec![0.0; self.max_return()];
        for p in &self.pieces {
            masses[p.return_time - 1] += p.mass;
        }
        TailModel::from_masses(&masses)
    }
}

/// Rank-one i.i.d. model: one cell per return-time value, every cell mapped
/// onto the whole base.
pub fn build_iid_system(tail: &TailModel) -> Result<InducedSystem> {
    let total = neumaier_sum(tail.atoms().iter().map(|a| a.1));
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Normalization { defect: total - 1.0 });
    }
    let atoms = tail.atoms();
    let cell_masses: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    let pieces = atoms
        .iter()
        .enumerate()
        .map(|(cell, &(n, p))| Piece { cell, return_time: n, mass: p })
        .collect();
    InducedSystem::new(SystemKind::RankOneIid(tail.clone()), cell_masses, pieces, Kernel::RankOne)
}
