//! Least-squares rate fits of `|ρ(n)|`.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::least_squares;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateModel {
    /// `log|ρ|` against `log n`.
    Power,
    /// `log|ρ|` against `n`.
    Exponential,
    /// `log|ρ|` against `n^γ`.
    Stretched { gamma: f64 },
}

impl RateModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Power => "power",
            Self::Exponential => "exponential",
            Self::Stretched { .. } => "stretched",
        }
    }
}

impl FromStr for RateModel {
    type Err = Error;
    /// `power`, `exponential`, or `stretched:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(Self::Power),
            "exponential" => Ok(Self::Exponential),
            _ => {
                let gamma = s
                    .strip_prefix("stretched:")
                    .and_then(|g| g.parse::<f64>().ok())
                    .filter(|g| *g > 0.0 && *g < 1.0)
                    .ok_or_else(|| Error::Unsupported(format!("rate model `{s}`")))?;
                Ok(Self::Stretched { gamma })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub model: RateModel,
    pub slope: f64,
    pub intercept: f64,
    /// `-slope`: the decay rate for the exponential and stretched models.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
    /// Sign changes of `ρ` inside the window.
    pub sign_flips: usize,
}

/// Fits `values[n]` for `n` in `window` (inclusive); zero entries are skipped.
pub fn fit_rate(values: &[f64], model: RateModel, window: (usize, usize)) -> Result<RateFit> {
    let (lo, hi) = window;
    let hi = hi.min(values.len().saturating_sub(1));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut sign_flips = 0;
    let mut last_sign = 0.0;
    for n in lo..=hi {
        let r = values[n];
        if !r.is_finite() || r == 0.0 || (model == RateModel::Power && n == 0) {
            continue;
        }
        if last_sign != 0.0 && r.signum() != last_sign {
            sign_flips += 1;
        }
        last_sign = r.signum();
        let nf = n as f64;
        xs.push(match model {
            RateModel::Power => nf.ln(),
            RateModel::Exponential => nf,
            RateModel::Stretched { gamma } => nf.powf(gamma),
        });
        ys.push(r.abs().ln());
    }
    if xs.len() < 5 {
        return Err(Error::TooFewPoints { usable: xs.len() });
    }
    let fit = least_squares(&xs, &ys).ok_or(Error::TooFewPoints { usable: xs.len() })?;
    Ok(RateFit {
        model,
        slope: fit.slope,
        intercept: fit.intercept,
        rate: -fit.slope,
        r_squared: fit.r_squared,
        points: xs.len(),
        sign_flips,
    })
}
