//! Birkhoff estimates of `ρ(n)` along simulated stationary trajectories.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_horizon, CorrelationSeries, Lifted, Method, Observable};
use crate::error::{Error, Result};
use crate::systems::lsv_map;
use crate::tower::Tower;

pub enum McTarget<'a> {
    /// The tower chain itself.
    Tower(&'a Tower),
    /// The LSV interval map, iterated in floating point.
    Lsv { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McOptions {
    /// Total trajectory length across all batches.
    pub samples: usize,
    pub seed: u64,
    /// Independent trajectories, each seeded `seed + index`.
    pub batches: usize,
    pub burn_in: usize,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, batches: 32, burn_in: 1000 }
    }
}

struct TowerSampler<'a> {
    tower: &'a Tower,
    start: WeightedIndex<f64>,
    in_cell: Vec<WeightedIndex<f64>>,
    cell_pieces: Vec<Vec<usize>>,
    /// Shared landing law for rank-one kernels, else one per piece.
    landing: Vec<(Vec<usize>, WeightedIndex<f64>)>,
}

impl<'a> TowerSampler<'a> {
    fn new(tower: &'a Tower) -> Result<Self> {
        let base = tower.base();
        let pieces = base.pieces();
        let bad = |_| Error::InvalidParameter("degenerate sampling weights".into());
        let start = WeightedIndex::new(pieces.iter().enumerate().map(|(p, x)| x.mass * tower.height(p) as f64))
            .map_err(bad)?;
        let mut in_cell = Vec::with_capacity(base.cells());
        let mut cell_pieces = Vec::with_capacity(base.cells());
        for c in 0..base.cells() {
            let ids = base.cell_pieces(c).to_vec();
            in_cell.push(WeightedIndex::new(ids.iter().map(|&p| pieces[p].mass)).map_err(bad)?);
            cell_pieces.push(ids);
        }
        let laws = if base.is_rank_one() { 1 } else { pieces.len() };
        let landing = (0..laws)
            .map(|p| {
                let (cells, probs): (Vec<usize>, Vec<f64>) = base.landing(p).into_iter().unzip();
                Ok((cells, WeightedIndex::new(probs).map_err(bad)?))
            })
            .collect::<Result<_>>()?;
        Ok(Self { tower, start, in_cell, cell_pieces, landing })
    }

    fn initial<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let p = self.start.sample(rng);
        (p, rng.random_range(0..self.tower.height(p)))
    }

    fn step<R: Rng>(&self, (p, l): (usize, usize), rng: &mut R) -> (usize, usize) {
        if l + 1 < self.tower.height(p) {
            return (p, l + 1);
        }
        let (cells, law) = &self.landing[if self.landing.len() == 1 { 0 } else { p }];
        let c = cells[law.sample(rng)];
        (self.cell_pieces[c][self.in_cell[c].sample(rng)], 0)
    }
}

/// Per-batch estimate with local means.
fn batch_estimate(v: &[f64], w: &[f64], len: usize, horizon: usize) -> Vec<f64> {
    let vbar = v[..len].iter().sum::<f64>() / len as f64;
    let wbar = w.iter().sum::<f64>() / w.len() as f64;
    (0..=horizon)
        .map(|n| {
            let s: f64 = v[..len].iter().zip(&w[n..n + len]).map(|(a, b)| (a - vbar) * (b - wbar)).sum();
            s / len as f64
        })
        .collect()
}

fn function_values(obs: &Observable) -> Result<&(dyn Fn(f64) -> f64 + Send + Sync)> {
    match obs {
        Observable::Function(f) => Ok(f.as_ref()),
        _ => Err(Error::Unsupported("the LSV map needs function observables".into())),
    }
}

/// `ρ̂(n)` from `batches` independent stationary trajectories; the standard
/// error is the spread of the batch estimates.
pub fn mc_correlation(
    target: &McTarget<'_>,
    v: &Observable,
    w: &Observable,
    horizon: usize,
    options: &McOptions,
) -> Result<CorrelationSeries> {
    check_horizon(horizon)?;
    if options.samples < 1000 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least 1000 samples".into()));
    }
    if options.batches < 2 {
        return Err(Error::InvalidParameter("need at least two batches".into()));
    }
    let len = options.samples / options.batches;
    if len <= horizon {
        return Err(Error::InvalidParameter("batches are shorter than the horizon".into()));
    }
    let total = len + horizon;

    let (estimates, truncation, states) = match target {
        McTarget::Tower(tower) => {
            let lv = v.lift(tower)?;
            let lw = w.lift(tower)?;
            let sampler = TowerSampler::new(tower)?;
            let run = |b: usize| -> Vec<f64> {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(b as u64));
                let mut s = sampler.initial(&mut rng);
                for _ in 0..options.burn_in {
                    s = sampler.step(s, &mut rng);
                }
                let eval = |l: &Lifted, s: (usize, usize)| l.at(tower, s.0, s.1);
                let mut vs = Vec::with_capacity(total);
                let mut ws = Vec::with_capacity(total);
                for _ in 0..total {
                    vs.push(eval(&lv, s));
                    ws.push(eval(&lw, s));
                    s = sampler.step(s, &mut rng);
                }
                batch_estimate(&vs, &ws, len, horizon)
            };
            let est: Vec<Vec<f64>> = (0..options.batches).into_par_iter().map(run).collect();
            (est, tower.truncation(), tower.state_count())
        }
        McTarget::Lsv { alpha } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
            }
            let fv = function_values(v)?;
            let fw = function_values(w)?;
            let run = |b: usize| -> Result<Vec<f64>> {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(b as u64));
                let fresh = |rng: &mut ChaCha8Rng| loop {
                    let x: f64 = rng.random();
                    if x > 0.0 {
                        break x;
                    }
                };
                let mut x = fresh(&mut rng);
                // rounding can land an orbit on the fixed point 0; restart it
                let advance = |x: f64, rng: &mut ChaCha8Rng| {
                    let y = lsv_map(*alpha, x);
                    if y > 0.0 && y < 1.0 { y } else { fresh(rng) }
                };
                for _ in 0..options.burn_in {
                    x = advance(x, &mut rng);
                }
                let mut vs = Vec::with_capacity(total);
                let mut ws = Vec::with_capacity(total);
                for _ in 0..total {
                    let (a, c) = (fv(x), fw(x));
                    if !(a.is_finite() && c.is_finite()) {
                        return Err(Error::NonFinite("observable"));
                    }
                    vs.push(a);
                    ws.push(c);
                    x = advance(x, &mut rng);
                }
                Ok(batch_estimate(&vs, &ws, len, horizon))
            };
            let est = (0..options.batches).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
            (est, None, 0)
        }
    };

    let b = estimates.len() as f64;
    let mut values = Vec::with_capacity(horizon + 1);
    let mut errors = Vec::with_capacity(horizon + 1);
    for n in 0..=horizon {
        let mean = estimates.iter().map(|e| e[n]).sum::<f64>() / b;
        let var = estimates.iter().map(|e| (e[n] - mean).powi(2)).sum::<f64>() / (b - 1.0);
        values.push(mean);
        errors.push((var / b).sqrt());
    }
    Ok(CorrelationSeries { values, std_errors: Some(errors), method: Method::MonteCarlo, truncation, states })
}
