//! `decay` and `fit`: correlation series with the bound overlay.

use anyhow::{Context, Result};
use optrunc_core::bounds::{envelope_series, main_bound, select_params};
use optrunc_core::correlate::{fit_rate, mc_correlation, operator_correlation, McOptions, McTarget, RateFit, RateModel};
use optrunc_core::{BoundRow, RecipeClass, RecipeOptions, TailModel, Tower};

use crate::config::RunConfig;
use crate::csvout::{num, opt, read_column, Table};
use crate::setup::{recipe_class, recipe_options, Setup, SystemKind};

pub const CORRELATION_HEADER: [&str; 9] = [
    "n",
    "rho",
    "rho_se",
    "rho_trunc",
    "bound_tail",
    "bound_linear",
    "bound_spectral",
    "bound_total",
    "envelope",
];

/// The recipe bound at `n`, or `None` where the recipe is undefined (`k > n`
/// or `k < 1`).
pub fn bound_at(tail: &TailModel, class: RecipeClass, opts: &RecipeOptions, n: usize) -> Option<BoundRow> {
    let params = select_params(class, n, opts).ok()?;
    main_bound(tail, n, &params).ok()
}

/// The predicted envelope; the slow class has no closed form and falls back
/// to the bound itself.
pub fn with_fallback(envelope: Option<f64>, bound: Option<&BoundRow>) -> Option<f64> {
    envelope.or_else(|| bound.map(|b| b.total))
}

/// Entries below `1e-13 |ρ(0)|` are rounding noise; they are zeroed so the fit
/// skips them.
pub fn above_noise_floor(values: &[f64]) -> Vec<f64> {
    let floor = 1e-13 * values.first().map_or(0.0, |v| v.abs());
    values.iter().map(|&v| if v.abs() < floor { 0.0 } else { v }).collect()
}

pub fn rate_model(class: RecipeClass, opts: &RecipeOptions) -> RateModel {
    match class {
        RecipeClass::Exponential => RateModel::Exponential,
        RecipeClass::Stretched => RateModel::Stretched { gamma: opts.gamma },
        _ => RateModel::Power,
    }
}

/// `[max(1, n/40), n]`.
pub fn fit_window(horizon: usize) -> (usize, usize) {
    ((horizon / 40).max(1), horizon)
}

fn write_fit(run: &RunConfig, name: &str, fit: &RateFit, window: (usize, usize)) -> Result<()> {
    let mut table = Table::create(
        &run.output_path(name),
        &["model", "window_lo", "window_hi", "slope", "intercept", "rate", "r_squared", "points", "sign_flips"],
    )?;
    table.row([
        fit.model.name().to_string(),
        window.0.to_string(),
        window.1.to_string(),
        num(fit.slope),
        num(fit.intercept),
        num(fit.rate),
        num(fit.r_squared),
        fit.points.to_string(),
        fit.sign_flips.to_string(),
    ])?;
    table.finish()?;
    println!(
        "{} fit on [{}, {}]: slope {:.4}, rate {:.4}, r^2 {:.4}, {} points",
        fit.model.name(),
        window.0,
        window.1,
        fit.slope,
        fit.rate,
        fit.r_squared,
        fit.points
    );
    Ok(())
}

pub fn cmd_decay(run: &RunConfig) -> Result<()> {
    let cfg = &run.config;
    let setup = Setup::build(cfg, run.seed)?;
    let class = recipe_class(cfg, &setup)?;
    let opts = recipe_options(cfg, class, &setup)?;
    let horizon = cfg.parsed_or("horizon.n", 200)?;
    let k = cfg.parsed_or("trunc.k", 16)?;
    let full = Tower::new(setup.system.clone())?;
    let v = setup.observable();

    let rho = match cfg.parsed::<usize>("mc.samples")? {
        Some(samples) => {
            let opts = McOptions {
                samples,
                seed: run.seed,
                batches: run.shards.map_or_else(|| cfg.parsed_or("mc.batches", 32), Ok)?,
                burn_in: cfg.parsed_or("mc.burnin", 1000)?,
            };
            let target = match setup.kind {
                SystemKind::Iid => McTarget::Tower(&full),
                SystemKind::Lsv(p) => McTarget::Lsv { alpha: p.alpha },
            };
            mc_correlation(&target, &v, &v, horizon, &opts).context("Monte Carlo correlation")?
        }
        None => operator_correlation(&full, &v, &v, horizon)?,
    };
    let trunc = operator_correlation(&full.truncate(k)?, &v, &v, horizon)?;

    let envelope = envelope_series(class, &opts, horizon);
    let mut table = Table::create(&run.output_path("correlation.csv"), &CORRELATION_HEADER)?;
    for n in 0..=horizon {
        let bound = if n >= 1 { bound_at(&setup.tail, class, &opts, n) } else { None };
        let env = with_fallback(envelope[n], bound.as_ref());
        table.row([
            n.to_string(),
            num(rho.values[n]),
            opt(rho.std_errors.as_ref().map(|se| se[n])),
            num(trunc.values[n]),
            opt(bound.as_ref().map(|b| b.tail_piece)),
            opt(bound.as_ref().map(|b| b.linear_piece)),
            opt(bound.as_ref().map(|b| b.spectral_piece)),
            opt(bound.as_ref().map(|b| b.total)),
            opt(env),
        ])?;
    }
    table.finish()?;

    let window = fit_window(horizon);
    match fit_rate(&above_noise_floor(&rho.values), rate_model(class, &opts), window) {
        Ok(fit) => write_fit(run, "summary.csv", &fit, window)?,
        Err(e) => eprintln!("no rate fit: {e}"),
    }
    Ok(())
}

/// Re-fits the `rho` column of an existing `correlation.csv`.
pub fn cmd_fit(run: &RunConfig) -> Result<()> {
    let cfg = &run.config;
    let setup = Setup::build(cfg, run.seed)?;
    let class = recipe_class(cfg, &setup)?;
    let opts = recipe_options(cfg, class, &setup)?;
    let rho: Vec<f64> = read_column(&run.output_path("correlation.csv"), "rho")?
        .into_iter()
        .map(|x| x.unwrap_or(f64::NAN))
        .collect();
    anyhow::ensure!(rho.len() >= 2, "correlation.csv has too few rows");
    let horizon = cfg.parsed_or("horizon.n", rho.len() - 1)?.min(rho.len() - 1);
    let window = fit_window(horizon);
    let fit = fit_rate(&above_noise_floor(&rho), rate_model(class, &opts), window)?;
    write_fit(run, "fit.csv", &fit, window)
}
