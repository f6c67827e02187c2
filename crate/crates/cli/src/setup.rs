//! Turning a config into systems, tails and recipe options.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use optrunc_core::systems::{build_iid_system, build_lsv_system};
use optrunc_core::{InducedSystem, LsvParams, Observable, RecipeClass, RecipeOptions, TailClass, TailModel};

use crate::config::Config;

pub const DEFAULT_NMAX: usize = 10_000;

#[derive(Clone, Debug)]
pub enum SystemKind {
    Iid,
    Lsv(LsvParams),
}

/// The system under study together with the tail law its bounds are computed
/// from (the Ulam return-time law for LSV).
#[derive(Clone, Debug)]
pub struct Setup {
    pub kind: SystemKind,
    pub system: Arc<InducedSystem>,
    pub tail: TailModel,
    pub label: String,
}

impl Setup {
    pub fn build(config: &Config, seed: u64) -> Result<Self> {
        match config.require("system.kind")? {
            "iid" => {
                let tail = tail_from_config(config)?;
                let system = Arc::new(build_iid_system(&tail)?);
                let label = format!("iid:{}", tail.class().name());
                Ok(Self { kind: SystemKind::Iid, system, tail, label })
            }
            "lsv" => {
                let params = LsvParams::new(
                    config.parsed_or("lsv.alpha", 0.5)?,
                    config.parsed_or("lsv.cells", 200)?,
                    config.parsed_or("lsv.quadrature", 1000)?,
                    seed,
                );
                let system = Arc::new(build_lsv_system(params).context("building the LSV system")?);
                let tail = system.return_tail()?;
                let label = format!("lsv:alpha={}", params.alpha);
                Ok(Self { kind: SystemKind::Lsv(params), system, tail, label })
            }
            other => bail!("key `system.kind`: expected iid or lsv, got `{other}`"),
        }
    }

    /// `1_Y` for i.i.d. systems, the identity `x ↦ x` for LSV.
    pub fn observable(&self) -> Observable {
        match self.kind {
            SystemKind::Iid => Observable::base_indicator(),
            SystemKind::Lsv(_) => Observable::function(|x| x),
        }
    }
}

/// Tail law named by `tail.class`.
pub fn tail_from_config(config: &Config) -> Result<TailModel> {
    let class = config.require("tail.class")?;
    if class == "empirical" {
        let masses = config.list("tail.masses")?.context("missing key `tail.masses`")?;
        return Ok(TailModel::from_masses(&masses)?);
    }
    let nmax = config.parsed_or("tail.nmax", DEFAULT_NMAX)?;
    Ok(TailModel::parametric(tail_class(config, class)?, nmax)?)
}

fn tail_class(config: &Config, class: &str) -> Result<TailClass> {
    let beta = config.parsed_or("tail.beta", 1.0)?;
    let c = config.parsed_or("tail.c", 1.0)?;
    Ok(match class {
        "polynomial" => TailClass::Polynomial { beta, scale: 1.0 },
        "regvar" => TailClass::RegularlyVarying { beta, s: config.parsed_or("tail.s", 0.0)?, scale: 1.0 },
        "slow" => TailClass::SlowBoundary { s: config.parsed_or("tail.s", 1.0)? },
        "stretched" => TailClass::StretchedExponential { c, gamma: config.parsed_or("tail.gamma", 0.5)?, scale: 1.0 },
        "exponential" => TailClass::Exponential { c, scale: 1.0 },
        other => bail!(
            "key `tail.class`: expected polynomial, regvar, slow, stretched, exponential or empirical, got `{other}`"
        ),
    })
}

/// `bound.class`, or the class matching the tail when absent.
pub fn recipe_class(config: &Config, setup: &Setup) -> Result<RecipeClass> {
    if let Some(name) = config.get("bound.class") {
        return Ok(name.parse()?);
    }
    Ok(match (&setup.kind, setup.tail.class()) {
        (SystemKind::Lsv(_), _) => RecipeClass::Good,
        (_, TailClass::Polynomial { .. } | TailClass::RegularlyVarying { .. }) => RecipeClass::Good,
        (_, TailClass::SlowBoundary { .. }) => RecipeClass::Slow,
        (_, TailClass::StretchedExponential { .. }) => RecipeClass::Stretched,
        (_, TailClass::Exponential { .. } | TailClass::Empirical) => RecipeClass::Exponential,
    })
}

/// Recipe options: class defaults, then tail parameters, then `bound.*`.
pub fn recipe_options(config: &Config, class: RecipeClass, setup: &Setup) -> Result<RecipeOptions> {
    let mut opts = RecipeOptions::defaults(class);
    match (&setup.kind, setup.tail.class()) {
        (SystemKind::Lsv(p), _) => opts.beta = 1.0 / p.alpha - 1.0,
        (_, TailClass::Polynomial { beta, .. }) => opts.beta = *beta,
        (_, TailClass::RegularlyVarying { beta, s, .. }) => {
            opts.beta = *beta;
            opts.s = *s;
        }
        (_, TailClass::SlowBoundary { s }) => opts.s = *s,
        (_, TailClass::StretchedExponential { c, gamma, .. }) => {
            opts.c = *c;
            opts.gamma = *gamma;
        }
        (_, TailClass::Exponential { c, .. }) => opts.c = *c,
        (_, TailClass::Empirical) => {}
    }
    opts.beta = config.parsed_or("tail.beta", opts.beta)?;
    opts.s = config.parsed_or("tail.s", opts.s)?;
    opts.c = config.parsed_or("tail.c", opts.c)?;
    opts.gamma = config.parsed_or("tail.gamma", opts.gamma)?;
    opts.p = config.parsed_or("bound.p", opts.p)?;
    opts.eps = config.parsed_or("bound.eps", opts.eps)?;
    opts.q = config.parsed("bound.q")?;
    opts.r = config.parsed("bound.r")?;
    opts.embedded = config.parsed("bound.embedded")?;
    Ok(opts)
}
