//! Discrete suspension (Young tower) over an induced system, its dynamical
//! truncation, and the exact set measures around truncation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;
use crate::systems::{InducedSystem, Kernel};

/// Tower `Δ = {(y, ℓ) : 0 ≤ ℓ < h(y)}` with `μ_Δ = μ × counting / h̄`.
///
/// States are indexed piece-major: state `offset(p) + ℓ` is level `ℓ` of
/// piece `p`.
#[derive(Clone, Debug)]
pub struct Tower {
    base: Arc<InducedSystem>,
    heights: Vec<usize>,
    truncation: Option<usize>,
    offsets: Vec<usize>,
    states: usize,
    mean_height: f64,
    level_masses: Vec<f64>,
}

impl Tower {
    fn with_heights(base: Arc<InducedSystem>, heights: Vec<usize>, truncation: Option<usize>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(heights.len());
        let mut states = 0usize;
        for &h in &heights {
            offsets.push(states);
            states = states.checked_add(h).ok_or(Error::NonFinite("tower state count"))?;
        }
        let mean_height = neumaier_sum(base.pieces().iter().zip(&heights).map(|(p, &h)| p.mass * h as f64));
        if !mean_height.is_finite() {
            return Err(Error::NonFinite("mean height"));
        }
        let top = heights.iter().copied().max().unwrap_or(0);
        let mut level_masses = vec![0.0; top];
        for (p, &h) in base.pieces().iter().zip(&heights) {
            for lm in level_masses.iter_mut().take(h) {
                *lm += p.mass / mean_height;
            }
        }
        Ok(Self { base, heights, truncation, offsets, states, mean_height, level_masses })
    }

    /// Full tower with heights `φ`.
    pub fn new(base: Arc<InducedSystem>) -> Result<Self> {
        let heights = base.pieces().iter().map(|p| p.return_time).collect();
        Self::with_heights(base, heights, None)
    }

    /// Tower with heights `min(φ, k)` over the same base.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("truncation level must be at least 1".into()));
        }
        if self.truncation.is_some() {
            return Err(Error::InvalidParameter("tower is already truncated".into()));
        }
        let heights = self.heights.iter().map(|&h| h.min(k)).collect();
        Self::with_heights(self.base.clone(), heights, Some(k))
    }

    pub fn base(&self) -> &Arc<InducedSystem> {
        &self.base
    }

    pub fn heights(&self) -> &[usize] {
        &self.heights
    }

    pub fn height(&self, piece: usize) -> usize {
        self.heights[piece]
    }

    pub fn offset(&self, piece: usize) -> usize {
        self.offsets[piece]
    }

    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn max_height(&self) -> usize {
        self.level_masses.len()
    }

    /// `h̄ = Σ μ(p) h(p)`.
    pub fn mean_height(&self) -> f64 {
        self.mean_height
    }

    /// `μ_Δ(level ℓ)`.
    pub fn level_masses(&self) -> &[f64] {
        &self.level_masses
    }

    /// `μ_Δ` of one state of `piece`.
    pub fn state_mass(&self, piece: usize) -> f64 {
        self.base.pieces()[piece].mass / self.mean_height
    }

    /// `μ_Δ` of every state, in state order.
    pub fn state_masses(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.states);
        for (p, &h) in self.heights.iter().enumerate() {
            out.extend(std::iter::repeat_n(self.state_mass(p), h));
        }
        out
    }

    pub fn same_base(&self, other: &Tower) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
    }
}

/// Free-function form of [`Tower::new`].
pub fn build_tower(system: &Arc<InducedSystem>) -> Result<Tower> {
    Tower::new(system.clone())
}

/// Free-function form of [`Tower::truncate`].
pub fn truncate(tower: &Tower, k: usize) -> Result<Tower> {
    tower.truncate(k)
}

fn check_pair(full: &Tower, truncated: &Tower) -> Result<usize> {
    if !full.same_base(truncated) {
        return Err(Error::MismatchedBase);
    }
    if full.truncation.is_some() {
        return Err(Error::InvalidParameter("first tower must be untruncated".into()));
    }
    truncated
        .truncation
        .ok_or_else(|| Error::InvalidParameter("second tower must be truncated".into()))
}

/// `h̄ - h̄'`.
pub fn height_defect(full: &Tower, truncated: &Tower) -> Result<f64> {
    check_pair(full, truncated)?;
    let pieces = full.base.pieces();
    Ok(neumaier_sum(
        pieces.iter().zip(full.heights.iter().zip(&truncated.heights)).map(|(p, (&h, &hk))| p.mass * (h - hk) as f64),
    ))
}

/// `μ_Δ{(y, ℓ) : ℓ ≥ k}`.
pub fn trunc_region_mass(full: &Tower, k: usize) -> Result<f64> {
    if full.truncation.is_some() {
        return Err(Error::InvalidParameter("trunc_region_mass needs the full tower".into()));
    }
    let pieces = full.base.pieces();
    Ok(neumaier_sum(
        pieces.iter().zip(&full.heights).map(|(p, &h)| p.mass * h.saturating_sub(k) as f64 / full.mean_height),
    ))
}

/// Density transport on a tower: a level shift on each piece and
/// redistribution of top-level mass by the base kernel.
///
/// Values are densities with respect to `μ` on every level, so the shift is a
/// pure relabelling; a rotating offset avoids moving data.
pub(crate) struct Flow<'a> {
    tower: &'a Tower,
    buf: Vec<f64>,
    time: usize,
    /// `landing[p] = [(cell, μ(p) P(p→cell) / μ(cell))]`; empty for rank one.
    landing: Vec<Vec<(usize, f64)>>,
    inflow: Vec<f64>,
}

impl<'a> Flow<'a> {
    pub fn new(tower: &'a Tower, initial: &[f64]) -> Self {
        let base = tower.base();
        let masses = base.cell_masses();
        let landing = match base.kernel() {
            Kernel::RankOne => Vec::new(),
            Kernel::PerPiece(rows) => rows
                .iter()
                .zip(base.pieces())
                .map(|(row, p)| row.iter().map(|&(i, pr)| (i, p.mass * pr / masses[i])).collect())
                .collect(),
        };
        Self { tower, buf: initial.to_vec(), time: 0, landing, inflow: vec![0.0; base.cells()] }
    }

    #[inline]
    fn slot(&self, piece: usize, level: usize) -> usize {
        let h = self.tower.heights[piece];
        self.tower.offsets[piece] + (level + h - self.time % h) % h
    }

    pub fn get(&self, piece: usize, level: usize) -> f64 {
        self.buf[self.slot(piece, level)]
    }

    /// Advances one step. Top mass of pieces with `absorb(p)` leaves the
    /// system; returns the absorbed `μ`-mass.
    pub fn step<F: Fn(usize) -> bool>(&mut self, absorb: F) -> f64 {
        let base = self.tower.base();
        let pieces = base.pieces();
        let mut absorbed = 0.0;
        self.inflow.iter_mut().for_each(|c| *c = 0.0);
        let mut scalar = 0.0;
        for (p, piece) in pieces.iter().enumerate() {
            let top = self.get(p, self.tower.heights[p] - 1);
            if absorb(p) {
                absorbed += top * piece.mass;
                continue;
            }
            if self.landing.is_empty() {
                scalar += top * piece.mass;
            } else {
                for &(i, w) in &self.landing[p] {
                    self.inflow[i] += top * w;
                }
            }
        }
        self.time += 1;
        for (p, piece) in pieces.iter().enumerate() {
            let s = self.slot(p, 0);
            self.buf[s] = if self.landing.is_empty() { scalar } else { self.inflow[piece.cell] };
        }
        absorbed
    }

    /// `Σ_{p,ℓ} w(p,ℓ) x(p,ℓ) μ(p)` for `w` in state order.
    pub fn pair(&self, w: &[f64]) -> f64 {
        let pieces = self.tower.base().pieces();
        let mut total = 0.0;
        for (p, piece) in pieces.iter().enumerate() {
            let h = self.tower.heights[p];
            let off = self.tower.offsets[p];
            let shift = self.time % h;
            let mut acc = 0.0;
            for (l, wl) in w[off..off + h].iter().enumerate() {
                acc += wl * self.buf[off + (l + h - shift) % h];
            }
            total += acc * piece.mass;
        }
        total
    }

    /// Densities on level 0, one per base cell.
    pub fn base_density(&self) -> Vec<f64> {
        let base = self.tower.base();
        let mut out = vec![0.0; base.cells()];
        for (i, o) in out.iter_mut().enumerate() {
            if let Some(&p) = base.cell_pieces(i).first() {
                *o = self.get(p, 0);
            }
        }
        out
    }
}

/// `μ_Δ(E_j)` for `j = 1..=n`, where `E_j` is the set of points of `Δ'` whose
/// orbit under the full tower map enters `{ℓ ≥ k}` at some time in `1..=j`.
pub fn en_mass_sequence(full: &Tower, k: usize, n: usize) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    let truncated = full.truncate(k)?;
    let limit = full.max_height().saturating_mul(full.base().cells());
    if truncated.states > limit {
        return Err(Error::StateExplosion { states: truncated.states, limit });
    }
    let init = vec![1.0; truncated.states];
    let mut flow = Flow::new(&truncated, &init);
    let mut out = Vec::with_capacity(n);
    let mut total = 0.0;
    for _ in 0..n {
        total += flow.step(|p| full.heights[p] > k);
        out.push(total / full.mean_height);
    }
    Ok(out)
}

/// `μ_Δ(E_n)` for the truncation level of `truncated`.
pub fn en_mass(full: &Tower, truncated: &Tower, n: usize) -> Result<f64> {
    let k = check_pair(full, truncated)?;
    Ok(*en_mass_sequence(full, k, n)?.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_iid_system, TailModel};

    fn tower(p: &[f64]) -> Tower {
        let sys = build_iid_system(&TailModel::from_masses(p).unwrap()).unwrap();
        Tower::new(Arc::new(sys)).unwrap()
    }

    #[test]
    fn height_one_tower_is_the_base() {
        let t = tower(&[1.0]);
        assert_eq!(t.mean_height(), 1.0);
        assert_eq!(t.state_count(), 1);
    }

    #[test]
    fn level_masses_of_two_point_law() {
        let t = tower(&[0.5, 0.5]);
        assert_eq!(t.mean_height(), 1.5);
        assert!((t.level_masses()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((t.level_masses()[1] - 1.0 / 3.0).abs() < 1e-15);
        let total: f64 = t.state_masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_of_three_point_law() {
        let t = tower(&[0.5, 0.25, 0.25]);
        assert_eq!(t.mean_height(), 1.75);
        let t2 = t.truncate(2).unwrap();
        assert_eq!(t2.mean_height(), 1.5);
        assert_eq!(height_defect(&t, &t2).unwrap(), 0.25);
        assert!((trunc_region_mass(&t, 2).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(t.truncate(5).unwrap().mean_height(), 1.75);
        assert!(t.truncate(0).is_err());
        assert!(t2.truncate(1).is_err());
    }

    #[test]
    fn two_point_law_truncated_at_one() {
        let t = tower(&[0.5, 0.5]);
        let t1 = t.truncate(1).unwrap();
        assert_eq!(t1.mean_height(), 1.0);
        assert_eq!(height_defect(&t, &t1).unwrap(), 0.5);
        assert!((trunc_region_mass(&t, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let a = tower(&[0.5, 0.5]);
        let b = tower(&[0.5, 0.5]).truncate(1).unwrap();
        assert!(matches!(height_defect(&a, &b), Err(Error::MismatchedBase)));
    }

    #[test]
    fn en_mass_examples() {
        let t = tower(&[0.5, 0.5]);
        let t1 = t.truncate(1).unwrap();
        let e1 = en_mass(&t, &t1, 1).unwrap();
        assert!((e1 - 1.0 / 3.0).abs() < 1e-15);
        let seq = en_mass_sequence(&t, 1, 3).unwrap();
        assert!(seq[2] <= 1.0 && seq[2] >= e1);
        assert!(seq.windows(2).all(|w| w[1] >= w[0]));
        let high = en_mass_sequence(&t, 2, 10).unwrap();
        assert!(high.iter().all(|&e| e == 0.0));
    }
}
