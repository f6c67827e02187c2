use std::f64::consts::E;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;

/// Slowly varying factor `ℓ(x) = (log(x + e))^s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogPower {
    pub s: f64,
}

impl LogPower {
    pub fn new(s: f64) -> Self {
        Self { s }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (x + E).ln().powf(self.s)
    }
}

/// Return-time law families.
#[derive(Clone, Debug, PartialEq)]
pub enum TailClass {
    /// `μ(φ>n) = min(1, C n^{-(β+1)})`.
    Polynomial { beta: f64, scale: f64 },
    /// `μ(φ>n) = min(1, C ℓ(n) n^{-(β+1)})` with `ℓ(n) = log(n+e)^s`.
    RegularlyVarying { beta: f64, s: f64, scale: f64 },
    /// `μ(φ>n) = min(1, ℓ(n)/n)` with `ℓ(n) = log(n+e)^{-s}`, s > 0.
    SlowBoundary { s: f64 },
    /// `μ(φ>n) = min(1, C exp(-c n^γ))`.
    StretchedExponential { c: f64, gamma: f64, scale: f64 },
    /// `μ(φ>n) = min(1, C exp(-c n))`.
    Exponential { c: f64, scale: f64 },
    /// Finite histogram.
    Empirical,
}

impl TailClass {
    pub fn name(&self) -> &'static str {
        match self {
            TailClass::Polynomial { .. } => "polynomial",
            TailClass::RegularlyVarying { .. } => "regvar",
            TailClass::SlowBoundary { .. } => "slow",
            TailClass::StretchedExponential { .. } => "stretched",
            TailClass::Exponential { .. } => "exponential",
            TailClass::Empirical => "empirical",
        }
    }

    fn closed_survival(&self, n: f64) -> f64 {
        let raw = match *self {
            TailClass::Polynomial { beta, scale } => scale * n.powf(-(beta + 1.0)),
            TailClass::RegularlyVarying { beta, s, scale } => {
                scale * LogPower::new(s).eval(n) * n.powf(-(beta + 1.0))
            }
            TailClass::SlowBoundary { s } => LogPower::new(-s).eval(n) / n,
            TailClass::StretchedExponential { c, gamma, scale } => scale * (-c * n.powf(gamma)).exp(),
            TailClass::Exponential { c, scale } => scale * (-c * n).exp(),
            TailClass::Empirical => unreachable!("empirical tails have no closed form"),
        };
        raw.min(1.0)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match *self {
            TailClass::Polynomial { beta, scale } if !(beta > 0.0 && scale > 0.0) => {
                bad("polynomial tail needs beta > 0 and scale > 0")
            }
            TailClass::RegularlyVarying { beta, scale, s } if !(beta >= 0.0 && scale > 0.0 && s.is_finite()) => {
                bad("regularly varying tail needs beta >= 0, scale > 0, finite s")
            }
            TailClass::SlowBoundary { s } if !(s > 0.0) => bad("slow boundary tail needs s > 0"),
            TailClass::StretchedExponential { c, gamma, scale }
                if !(c > 0.0 && gamma > 0.0 && gamma < 1.0 && scale > 0.0) =>
            {
                bad("stretched exponential tail needs c > 0, 0 < gamma < 1, scale > 0")
            }
            TailClass::Exponential { c, scale } if !(c > 0.0 && scale > 0.0) => {
                bad("exponential tail needs c > 0 and scale > 0")
            }
            _ => Ok(()),
        }
    }
}

/// Law of the return time with hard support cutoff `N_max`.
///
/// The mass beyond `N_max` is kept as a single atom at `N_max + 1`, so every
/// series over the law is a finite sum.
#[derive(Clone, Debug)]
pub struct TailModel {
    class: TailClass,
    nmax: usize,
    /// `survival[n] = μ(φ>n)` for `n = 0..=nmax`.
    survival: Vec<f64>,
    /// `masses[n-1] = μ(φ=n)` for `n = 1..=nmax`.
    masses: Vec<f64>,
    residual: f64,
    /// `tail_sums[k] = Σ_{j≥k} μ(φ>j)` for `k = 0..=nmax+1`.
    tail_sums: Vec<f64>,
    cdf: Vec<f64>,
    top: usize,
}

impl TailModel {
    /// Parametric law with closed-form survival function.
    pub fn parametric(class: TailClass, nmax: usize) -> Result<Self> {
        if nmax == 0 {
            return Err(Error::InvalidParameter("N_max must be at least 1".into()));
        }
        if class == TailClass::Empirical {
            return Err(Error::InvalidParameter("use from_masses for empirical tails".into()));
        }
        class.validate()?;
        let mut survival = Vec::with_capacity(nmax + 1);
        survival.push(1.0);
        for n in 1..=nmax {
            let s = class.closed_survival(n as f64);
            if !s.is_finite() || s < 0.0 {
                return Err(Error::NonFinite("survival function"));
            }
            if s > survival[n - 1] {
                return Err(Error::InvalidParameter(format!(
                    "survival function increases at n = {n}; adjust the parameters"
                )));
            }
            survival.push(s);
        }
        let masses = (1..=nmax).map(|n| survival[n - 1] - survival[n]).collect();
        let residual = survival[nmax];
        Ok(Self::assemble(class, survival, masses, residual))
    }

    pub fn polynomial(beta: f64, nmax: usize) -> Result<Self> {
        Self::parametric(TailClass::Polynomial { beta, scale: 1.0 }, nmax)
    }

    pub fn exponential(c: f64, scale: f64, nmax: usize) -> Result<Self> {
        Self::parametric(TailClass::Exponential { c, scale }, nmax)
    }

    /// Empirical law from masses `p_1, ..., p_N`; they must sum to one.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        Self::from_masses_with_residual(masses, 0.0)
    }

    /// Empirical law whose masses sum to `1 - residual`.
    pub fn from_masses_with_residual(masses: &[f64], residual: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidParameter("empty mass sequence".into()));
        }
        if masses.iter().chain(std::iter::once(&residual)).any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter("masses must be finite and nonnegative".into()));
        }
        let total = neumaier_sum(masses.iter().copied().chain(std::iter::once(residual)));
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Normalization { defect: total - 1.0 });
        }
        let nmax = masses.len();
        let mut survival = vec![0.0; nmax + 1];
        survival[nmax] = residual;
        for n in (0..nmax).rev() {
            survival[n] = survival[n + 1] + masses[n];
        }
        survival[0] = 1.0;
        Ok(Self::assemble(TailClass::Empirical, survival, masses.to_vec(), residual))
    }

    /// Empirical law proportional to nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total = neumaier_sum(weights.iter().copied());
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidParameter("weights must have positive finite sum".into()));
        }
        let mut masses: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // push the rounding defect onto the largest mass
        let defect = 1.0 - neumaier_sum(masses.iter().copied());
        let imax = (0..masses.len()).max_by(|&a, &b| masses[a].total_cmp(&masses[b])).unwrap_or(0);
        masses[imax] += defect;
        Self::from_masses(&masses)
    }

    fn assemble(class: TailClass, survival: Vec<f64>, masses: Vec<f64>, residual: f64) -> Self {
        let nmax = masses.len();
        let mut tail_sums = vec![0.0; nmax + 2];
        for k in (0..=nmax).rev() {
            tail_sums[k] = tail_sums[k + 1] + survival[k];
        }
        let mut cdf = Vec::with_capacity(nmax);
        let mut acc = 0.0;
        for p in &masses {
            acc += p;
            cdf.push(acc);
        }
        let top = if residual > 0.0 {
            nmax + 1
        } else {
            masses.iter().rposition(|&p| p > 0.0).map_or(1, |i| i + 1)
        };
        Self { class, nmax, survival, masses, residual, tail_sums, cdf, top }
    }

    pub fn class(&self) -> &TailClass {
        &self.class
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    /// `p_n` for `n = 1..=nmax`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mass beyond `nmax`, carried by the atom at `nmax + 1`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `μ(φ=n)`, including the residual atom.
    pub fn mass(&self, n: usize) -> f64 {
        match n {
            0 => 0.0,
            n if n <= self.nmax => self.masses[n - 1],
            n if n == self.nmax + 1 => self.residual,
            _ => 0.0,
        }
    }

    /// Return-time values with positive mass and their masses.
    pub fn atoms(&self) -> Vec<(usize, f64)> {
        (1..=self.nmax + 1)
            .map(|n| (n, self.mass(n)))
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }

    /// Largest return time with positive mass.
    pub fn max_return(&self) -> usize {
        self.top
    }

    /// `μ(φ>n)`.
    pub fn tail_prob(&self, n: usize) -> f64 {
        if n <= self.nmax {
            self.survival[n]
        } else {
            0.0
        }
    }

    /// `Σ_{j≥k} μ(φ>j) = E[(φ-k)^+]`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        self.tail_sums.get(k).copied().unwrap_or(0.0)
    }

    /// `E[φ]`.
    pub fn mean(&self) -> f64 {
        self.tail_sums[0]
    }

    /// Inverse-CDF draw of a return time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u);
        // zero-mass values share a cdf level with their predecessor and are skipped
        if i < self.nmax {
            i + 1
        } else {
            self.top
        }
    }
}

/// Free-function form of [`TailModel::tail_prob`].
pub fn tail_prob(tail: &TailModel, n: usize) -> f64 {
    tail.tail_prob(n)
}

/// Free-function form of [`TailModel::sample`].
pub fn sample_return_time<R: Rng + ?Sized>(tail: &TailModel, rng: &mut R) -> usize {
    tail.sample(rng)
}
