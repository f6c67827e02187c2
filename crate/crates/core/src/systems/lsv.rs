use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{InducedSystem, Kernel, Piece, SystemKind, TailModel};
use crate::error::{Error, Result};

/// Liverani–Saussol–Vaienti map on `[0, 1]`.
#[inline]
pub fn lsv_map(alpha: f64, x: f64) -> f64 {
    if x < 0.5 {
        x * (1.0 + (2.0 * x).powf(alpha))
    } else {
        2.0 * x - 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsvParams {
    pub alpha: f64,
    /// Number of Ulam cells on `Y = [1/2, 1]`.
    pub cells: usize,
    /// Quadrature points per cell.
    pub quadrature: usize,
    pub seed: u64,
    /// Orbits longer than this are discarded.
    pub iteration_cap: usize,
}

impl LsvParams {
    pub fn new(alpha: f64, cells: usize, quadrature: usize, seed: u64) -> Self {
        Self { alpha, cells, quadrature, seed, iteration_cap: 1_000_000 }
    }
}

/// Quadrature data behind an Ulam-discretized first-return map.
#[derive(Clone, Debug)]
pub struct UlamData {
    pub params: LsvParams,
    pub discarded: usize,
    pub total_points: usize,
    /// Return-time law of the quadrature, weighted by cell mass; the
    /// residual is the discarded mass.
    pub tail: TailModel,
    /// For each piece, the orbits of its quadrature points, point-major:
    /// entry `c * height + level` is level `level` of point `c`.
    pub orbits: Vec<Vec<f64>>,
}

impl UlamData {
    pub fn points_in_piece(&self, piece: usize, height: usize) -> usize {
        self.orbits[piece].len() / height
    }
}

struct CellSample {
    /// (return time, landing cell, orbit) sorted by return time.
    kept: Vec<(usize, usize, Vec<f64>)>,
    discarded: usize,
}

fn sample_cell(p: &LsvParams, j: usize) -> CellSample {
    let m = p.cells as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(j as u64);
    let mut kept = Vec::with_capacity(p.quadrature);
    let mut discarded = 0;
    let width = 0.5 / m;
    let left = 0.5 + j as f64 * width;
    for i in 0..p.quadrature {
        let u: f64 = rng.random();
        let x0 = left + width * (i as f64 + u) / p.quadrature as f64;
        let mut orbit = vec![x0];
        let mut x = lsv_map(p.alpha, x0);
        while x < 0.5 && orbit.len() < p.iteration_cap {
            orbit.push(x);
            x = lsv_map(p.alpha, x);
        }
        if x < 0.5 {
            discarded += 1;
            continue;
        }
        let landing = (((x - 0.5) * 2.0 * m) as usize).min(p.cells - 1);
        kept.push((orbit.len(), landing, orbit));
    }
    kept.sort_by_key(|k| k.0);
    CellSample { kept, discarded }
}

/// Stationary row vector of a row-stochastic matrix by power iteration.
fn stationary(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = q.len();
    let mut v = vec![1.0 / m as f64; m];
    for _ in 0..100_000 {
        let mut next = vec![0.0; m];
        for (j, row) in q.iter().enumerate() {
            for (i, qji) in row.iter().enumerate() {
                next[i] += v[j] * qji;
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff < 1e-15 {
            return Ok(v);
        }
    }
    Err(Error::NotConverged { what: "Ulam stationary vector", iterations: 100_000 })
}

/// Ulam discretization of the first-return map of the LSV map to `[1/2, 1]`.
///
/// Quadrature points are jittered-stratified within each cell; each orbit is
/// followed until it re-enters `Y`. Pieces are the pairs (cell, return time).
pub fn build_lsv_system(params: LsvParams) -> Result<InducedSystem> {
    if !(params.alpha > 0.0 && params.alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    if params.cells < 2 || params.quadrature < 10 {
        return Err(Error::InvalidParameter("need at least 2 cells and 10 quadrature points".into()));
    }
    let m = params.cells;
    let samples: Vec<CellSample> = (0..m).into_par_iter().map(|j| sample_cell(&params, j)).collect();

    let total_points = m * params.quadrature;
    let discarded: usize = samples.iter().map(|s| s.discarded).sum();
    let fraction = discarded as f64 / total_points as f64;
    if fraction > 0.01 {
        return Err(Error::DiscardFraction { discarded, total: total_points, fraction });
    }
    let empty: Vec<usize> = (0..m).filter(|&j| samples[j].kept.is_empty()).collect();
    if !empty.is_empty() {
        return Err(Error::EmptyCells(empty));
    }

    let mut q = vec![vec![0.0; m]; m];
    for (j, s) in samples.iter().enumerate() {
        let w = 1.0 / s.kept.len() as f64;
        for k in &s.kept {
            q[j][k.1] += w;
        }
    }
    let cell_masses = stationary(&q)?;

    let mut pieces = Vec::new();
    let mut landing = Vec::new();
    let mut orbits = Vec::new();
    let mut tail_masses: Vec<f64> = Vec::new();
    let mut residual = 0.0;
    for (j, s) in samples.into_iter().enumerate() {
        let kept_n = s.kept.len() as f64;
        let all_n = (s.kept.len() + s.discarded) as f64;
        residual += cell_masses[j] * s.discarded as f64 / all_n;
        let mut start = 0;
        while start < s.kept.len() {
            let n = s.kept[start].0;
            let end = start + s.kept[start..].iter().take_while(|k| k.0 == n).count();
            let count = (end - start) as f64;
            pieces.push(Piece { cell: j, return_time: n, mass: cell_masses[j] * count / kept_n });
            let mut land: Vec<(usize, f64)> = Vec::new();
            let mut flat = Vec::with_capacity((end - start) * n);
            for k in &s.kept[start..end] {
                match land.iter_mut().find(|e| e.0 == k.1) {
                    Some(e) => e.1 += 1.0,
                    None => land.push((k.1, 1.0)),
                }
                flat.extend_from_slice(&k.2);
            }
            land.sort_by_key(|e| e.0);
            land.iter_mut().for_each(|e| e.1 /= count);
            landing.push(land);
            orbits.push(flat);
            if tail_masses.len() < n {
                tail_masses.resize(n, 0.0);
            }
            tail_masses[n - 1] += cell_masses[j] * count / all_n;
            start = end;
        }
    }
    let tail = TailModel::from_masses_with_residual(&tail_masses, residual)?;
    let data = UlamData { params, discarded, total_points, tail, orbits };
    InducedSystem::new(SystemKind::Ulam(Box::new(data)), cell_masses, pieces, Kernel::PerPiece(landing))
}
