//! Bound machinery: `S_q(k, a)`, truncation error bounds, the main
//! correlation bound, parameter recipes, rate envelopes and tail asymptotics.

use std::f64::consts::E;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::neumaier_sum;
use crate::operators::OperatorFamily;
use crate::systems::{LogPower, TailClass, TailModel};

/// Anything that supplies `U_j = Σ_{ℓ>j} ‖R_ℓ‖`.
pub trait NormTail {
    fn norm_tail(&self, j: usize) -> f64;
}

/// Rank-one model: `‖R_ℓ‖ = μ(φ=ℓ)`, so `U_j = μ(φ>j)`.
impl NormTail for TailModel {
    fn norm_tail(&self, j: usize) -> f64 {
        self.tail_prob(j)
    }
}

impl NormTail for OperatorFamily {
    fn norm_tail(&self, j: usize) -> f64 {
        OperatorFamily::norm_tail(self, j)
    }
}

/// `S_q(k, a) = Σ_{j=1}^k U_j j^q e^{ja}`.
pub fn s_q<S: NormTail + ?Sized>(source: &S, k: usize, a: f64, q: f64) -> Result<f64> {
    s_q_variable(source, k, |_| a, q)
}

/// `Σ_{j=1}^k U_j j^q e^{j a(j)}`.
pub fn s_q_variable<S, A>(source: &S, k: usize, a: A, q: f64) -> Result<f64>
where
    S: NormTail + ?Sized,
    A: Fn(usize) -> f64,
{
    if k < 1 || q < 0.0 {
        return Err(Error::InvalidParameter("S_q needs k >= 1 and q >= 0".into()));
    }
    let v = neumaier_sum((1..=k).map(|j| {
        let jf = j as f64;
        let u = source.norm_tail(j);
        if u == 0.0 {
            0.0
        } else {
            (u.ln() + q * jf.ln() + jf * a(j)).exp()
        }
    }));
    if !v.is_finite() {
        return Err(Error::NonFinite("S_q(k, a)"));
    }
    Ok(v)
}

/// `Σ_{j≥k} μ(φ>j) = E[(φ-k)^+]`.
pub fn tail_sum(tail: &TailModel, k: usize) -> f64 {
    tail.tail_sum(k)
}

/// `Σ_{j≥k} μ(φ>j) + n μ(φ>k)`.
pub fn trunc_bound(tail: &TailModel, n: usize, k: usize) -> f64 {
    tail.tail_sum(k) + n as f64 * tail.tail_prob(k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams {
    pub k: usize,
    pub a: f64,
    pub q: f64,
    pub r: f64,
    /// Selects the `S_q(k,a)` spectral piece; otherwise `k² e^{2ka}`.
    pub embedded: bool,
}

/// One row of the correlation bound, constants set to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRow {
    pub n: usize,
    pub params: BoundParams,
    pub tail_piece: f64,
    pub linear_piece: f64,
    pub spectral_piece: f64,
    pub total: f64,
}

/// `Σ_{j≥k} μ(φ>j) + n μ(φ>k) + {S_q(k,a) | k² e^{2ka}} e^{-na}`.
pub fn main_bound(tail: &TailModel, n: usize, params: &BoundParams) -> Result<BoundRow> {
    let BoundParams { k, a, q, .. } = *params;
    if n < k {
        return Err(Error::InvalidParameter(format!("main bound needs n >= k (n = {n}, k = {k})")));
    }
    if k < 1 || !(a > 0.0) {
        return Err(Error::InvalidParameter("main bound needs k >= 1 and a > 0".into()));
    }
    let decay = (-(n as f64) * a).exp();
    let spectral_piece = if params.embedded {
        s_q(tail, k, a, q)? * decay
    } else {
        let kf = k as f64;
        // k² e^{(2k-n)a}, combined to avoid overflow
        kf * kf * ((2.0 * kf - n as f64) * a).exp()
    };
    let tail_piece = tail.tail_sum(k);
    let linear_piece = n as f64 * tail.tail_prob(k);
    let total = tail_piece + linear_piece + spectral_piece;
    if !total.is_finite() {
        return Err(Error::NonFinite("bound"));
    }
    Ok(BoundRow { n, params: *params, tail_piece, linear_piece, spectral_piece, total })
}

/// Tail regimes with a parameter recipe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecipeClass {
    /// `φ ∈ L^{1+ε}` / polynomial tails.
    Good,
    /// `μ(φ>n) = O((n log n)^{-1})`.
    Slow,
    /// `μ(φ>n) ≪ ℓ(n)/n` with `ℓ → 0`.
    Sv,
    Stretched,
    Exponential,
}

impl FromStr for RecipeClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "good" | "polynomial" => Ok(Self::Good),
            "slow" => Ok(Self::Slow),
            "sv" => Ok(Self::Sv),
            "stretched" => Ok(Self::Stretched),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::Unsupported(format!("bound class `{other}`"))),
        }
    }
}

impl RecipeClass {
    pub fn name(self) -> &'static str {
        match self {
            Self::Good => "good",
            Self::Slow => "slow",
            Self::Sv => "sv",
            Self::Stretched => "stretched",
            Self::Exponential => "exponential",
        }
    }

    /// Default Hölder exponent for both `q` and `r`: the recipes for the good
    /// and stretched classes only control `S_r` for small `r`.
    pub fn default_exponent(self) -> f64 {
        match self {
            Self::Good | Self::Stretched => 0.1,
            _ => 1.0,
        }
    }

    /// Representative tail for the class under `options`.
    pub fn default_tail(self, options: &RecipeOptions, nmax: usize) -> Result<TailModel> {
        let class = match self {
            Self::Good => TailClass::RegularlyVarying { beta: options.beta, s: options.s, scale: 1.0 },
            Self::Slow | Self::Sv => TailClass::SlowBoundary { s: options.s },
            Self::Stretched => TailClass::StretchedExponential { c: options.c, gamma: options.gamma, scale: 1.0 },
            Self::Exponential => TailClass::Exponential { c: options.c, scale: 2.0 },
        };
        TailModel::parametric(class, nmax)
    }
}

/// Class options for the recipes and envelopes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecipeOptions {
    /// Target polynomial rate for the good class; `δ = 1/(2p+6)`.
    pub p: f64,
    /// Stretched class: envelope exponent `n^{1+ε}`.
    pub eps: f64,
    pub c: f64,
    pub gamma: f64,
    /// Exponent of the slowly varying factor `log(n+e)^{±s}`.
    pub s: f64,
    /// Tail exponent for the good class envelope `ℓ(n)/n^β`.
    pub beta: f64,
    /// Exponential class radius `ε₁`; defaults to `c/2`.
    pub eps1: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub embedded: Option<bool>,
}

impl RecipeOptions {
    /// Defaults for each class.
    pub fn defaults(class: RecipeClass) -> Self {
        let base = Self {
            p: 1.0,
            eps: 0.1,
            c: 1.0,
            gamma: 0.5,
            s: 0.0,
            beta: 0.2,
            eps1: None,
            q: None,
            r: None,
            embedded: None,
        };
        match class {
            RecipeClass::Good => base,
            RecipeClass::Slow => Self { s: 1.0, ..base },
            RecipeClass::Sv => Self { s: 2.0, ..base },
            RecipeClass::Stretched | RecipeClass::Exponential => base,
        }
    }

    fn eps1(&self) -> f64 {
        self.eps1.unwrap_or(self.c / 2.0)
    }
}

/// `a(k)` of each recipe.
pub fn recipe_a(class: RecipeClass, k: usize, options: &RecipeOptions) -> f64 {
    let kf = k as f64;
    match class {
        RecipeClass::Good => 0.5 * kf.ln() / kf,
        RecipeClass::Slow => 0.5 * kf.ln().ln() / kf,
        RecipeClass::Sv => 0.5 * options.s * (kf + E).ln().ln() / kf,
        RecipeClass::Stretched => (options.c * kf.powf(options.gamma) - (1.0 + options.eps) * kf.ln()) / kf,
        RecipeClass::Exponential => options.eps1(),
    }
}

fn slow_n_of_k(k: usize) -> f64 {
    let kf = k as f64;
    2.0 * kf * kf.ln() / kf.ln().ln()
}

/// Truncation level for horizon `n` under the class's `k ↔ n` relation.
pub fn recipe_k(class: RecipeClass, n: usize, options: &RecipeOptions) -> usize {
    let nf = n as f64;
    match class {
        RecipeClass::Good => ((nf / (2.0 * options.p + 6.0)).round() as usize).max(2),
        RecipeClass::Slow => {
            // n(k) is not monotone for small k; take the largest admissible k
            let best = (3..=(n / 2).max(3)).filter(|&k| slow_n_of_k(k) <= nf).max();
            best.unwrap_or_else(|| {
                (3..64).min_by(|&a, &b| slow_n_of_k(a).total_cmp(&slow_n_of_k(b))).unwrap()
            })
        }
        RecipeClass::Sv => ((nf / 5.0).round() as usize).max(2),
        RecipeClass::Stretched | RecipeClass::Exponential => n.max(2),
    }
}

/// Parameters `(k, a, q, r)` for horizon `n`.
pub fn select_params(class: RecipeClass, n: usize, options: &RecipeOptions) -> Result<BoundParams> {
    if class == RecipeClass::Good && !(options.p > 0.0) {
        return Err(Error::InvalidParameter("good class needs p > 0".into()));
    }
    let k = recipe_k(class, n, options);
    let a = recipe_a(class, k, options);
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("{} recipe gives a = {a} <= 0 at k = {k}", class.name())));
    }
    let q = options.q.unwrap_or(class.default_exponent());
    let r = options.r.unwrap_or(class.default_exponent());
    if !(q > 0.0 && q <= 1.0 && r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidParameter("q and r must lie in (0, 1]".into()));
    }
    let embedded = options.embedded.unwrap_or(class != RecipeClass::Good);
    Ok(BoundParams { k, a, q, r, embedded })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecipeRow {
    pub k: usize,
    pub a: f64,
    pub s_r: f64,
    pub scaled: f64,
}

/// `a(k)^r S_r(k, a(k))` over `k_grid`.
pub fn recipe_vanishing_check(
    class: RecipeClass,
    options: &RecipeOptions,
    tail: &TailModel,
    k_grid: &[usize],
) -> Result<Vec<RecipeRow>> {
    if k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("k grid must be increasing".into()));
    }
    let r = options.r.unwrap_or(class.default_exponent());
    k_grid
        .iter()
        .map(|&k| {
            let a = recipe_a(class, k, options);
            let s_r = s_q(tail, k, a, r)?;
            Ok(RecipeRow { k, a, s_r, scaled: a.powf(r) * s_r })
        })
        .collect()
}

/// `ℓ̃(n) = Σ_{j≥n} ℓ(j)/j` for `ℓ(j) = log(j+e)^{-s}`, `s > 1`.
pub fn ell_tilde(s: f64, n: usize) -> f64 {
    let cutoff = (n as f64 * 1e3).max(1e6) as usize;
    let ell = LogPower::new(-s);
    let head = neumaier_sum((n.max(1)..cutoff).map(|j| ell.eval(j as f64) / j as f64));
    // ∫_J^∞ log(x+e)^{-s}/x dx ≈ log(J+e)^{1-s}/(s-1), plus the endpoint half-weight
    let jf = cutoff as f64;
    head + (jf + E).ln().powf(1.0 - s) / (s - 1.0) + 0.5 * ell.eval(jf) / jf
}

/// Rate envelope of the class at `n`; `None` for the slow class, whose only
/// rate is the main bound itself.
pub fn predicted_envelope(class: RecipeClass, options: &RecipeOptions, n: usize) -> Option<f64> {
    let nf = n as f64;
    match class {
        RecipeClass::Good => Some(LogPower::new(options.s).eval(nf) / nf.powf(options.beta)),
        RecipeClass::Slow => None,
        RecipeClass::Sv => Some(ell_tilde(options.s, n)),
        RecipeClass::Stretched => Some(nf.powf(1.0 + options.eps) * (-options.c * nf.powf(options.gamma)).exp()),
        RecipeClass::Exponential => Some(nf * nf * (-options.eps1() * nf).exp()),
    }
}

/// [`predicted_envelope`] for `n = 0..=n_max` (`None` at `n = 0`). The sv
/// column is filled backwards from one evaluation of `ℓ̃(n_max)`.
pub fn envelope_series(class: RecipeClass, options: &RecipeOptions, n_max: usize) -> Vec<Option<f64>> {
    if class != RecipeClass::Sv || n_max == 0 {
        return (0..=n_max).map(|n| if n == 0 { None } else { predicted_envelope(class, options, n) }).collect();
    }
    let ell = LogPower::new(-options.s);
    let mut out = vec![None; n_max + 1];
    let mut acc = ell_tilde(options.s, n_max);
    out[n_max] = Some(acc);
    for n in (1..n_max).rev() {
        acc += ell.eval(n as f64) / n as f64;
        out[n] = Some(acc);
    }
    out
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `Σ_{j>n} ℓ(j) j^{-(β+1)} / (β⁻¹ ℓ(n) n^{-β})`.
pub fn karamata_ratio(ell: LogPower, beta: f64, n: usize) -> Result<f64> {
    if !(beta > 0.0) || n < 2 {
        return Err(Error::InvalidParameter("karamata_ratio needs beta > 0 and n >= 2".into()));
    }
    let f = |x: f64| ell.eval(x) * x.powf(-(beta + 1.0));
    let cutoff = 64 * n;
    let head = neumaier_sum((n + 1..=cutoff).map(|j| f(j as f64)));
    let jf = cutoff as f64;
    // ∫_J^∞ f = J^{-β} ∫_0^∞ ℓ(J e^u) e^{-βu} du
    let upper = 60.0 / beta;
    let integral = jf.powf(-beta) * simpson(|u| ell.eval(jf * u.exp()) * (-beta * u).exp(), 0.0, upper, 20_000);
    let sum = head + integral - 0.5 * f(jf);
    let nf = n as f64;
    Ok(sum / (ell.eval(nf) * nf.powf(-beta) / beta))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummabilityReport {
    pub partial_sum: f64,
    /// `Σ n^{q-1} b(n)` over `(N/10, N]`.
    pub last_decade: f64,
    /// The same over `(N/100, N/10]`.
    pub previous_decade: f64,
    pub convergent: bool,
}

/// `Σ_{n=1}^N n^{q-1} b(n)` with `bound[n-1] = b(n)`; divergence is flagged
/// when the last decade contributes at least as much as the one before.
pub fn summability_weight(bound: &[f64], q: f64) -> Result<SummabilityReport> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter("q must be positive".into()));
    }
    let big_n = bound.len();
    if big_n < 100 {
        return Err(Error::InvalidParameter("need at least 100 terms".into()));
    }
    let term = |n: usize| (n as f64).powf(q - 1.0) * bound[n - 1];
    let range = |lo: usize, hi: usize| neumaier_sum((lo + 1..=hi).map(term));
    let last_decade = range(big_n / 10, big_n);
    let previous_decade = range(big_n / 100, big_n / 10);
    Ok(SummabilityReport {
        partial_sum: range(0, big_n),
        last_decade,
        previous_decade,
        convergent: last_decade < previous_decade,
    })
}
