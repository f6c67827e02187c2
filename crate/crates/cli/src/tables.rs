//! `bounds` and `renewal` tables.

use anyhow::Result;
use optrunc_core::bounds::{envelope_series, karamata_ratio, recipe_vanishing_check, select_params};
use optrunc_core::renewal::{compute_t, renewal_residuals, return_sequence_from_tower, scalar_renewal};
use optrunc_core::{LogPower, OperatorFamily, RecipeClass, TailModel, Tower};

use crate::config::RunConfig;
use crate::csvout::{num, opt, Table};
use crate::decay::{bound_at, with_fallback};
use crate::setup::{recipe_class, recipe_options, Setup, SystemKind};

pub const RECIPE_GRID: [usize; 6] = [50, 100, 200, 400, 800, 1600];
pub const KARAMATA_POINTS: [usize; 3] = [100, 1000, 10_000];
/// The tower-side residual iterates one flow per base cell.
pub const TOWER_RESIDUAL_CELLS: usize = 50;

pub fn cmd_bounds(run: &RunConfig) -> Result<()> {
    let cfg = &run.config;
    let setup = Setup::build(cfg, run.seed)?;
    let class = recipe_class(cfg, &setup)?;
    let opts = recipe_options(cfg, class, &setup)?;
    let horizon = cfg.parsed_or("horizon.n", 200)?;

    let mut table = Table::create(
        &run.output_path("bounds.csv"),
        &["n", "k", "a", "q", "r", "tail_piece", "linear_piece", "spectral_piece", "total", "envelope"],
    )?;
    let envelope = envelope_series(class, &opts, horizon);
    for n in 1..=horizon {
        let Some(b) = bound_at(&setup.tail, class, &opts, n) else { continue };
        let p = &b.params;
        table.row([
            n.to_string(),
            p.k.to_string(),
            num(p.a),
            num(p.q),
            num(p.r),
            num(b.tail_piece),
            num(b.linear_piece),
            num(b.spectral_piece),
            num(b.total),
            opt(with_fallback(envelope[n], Some(&b))),
        ])?;
    }
    table.finish()?;

    let mut params = Table::create(&run.output_path("params.csv"), &["kind", "n", "k", "a", "q", "r", "s_r", "value"])?;
    let sel = select_params(class, horizon, &opts)?;
    params.row([
        "selected".to_string(),
        horizon.to_string(),
        sel.k.to_string(),
        num(sel.a),
        num(sel.q),
        num(sel.r),
        String::new(),
        String::new(),
    ])?;
    let q = opts.q.unwrap_or(class.default_exponent());
    let r = opts.r.unwrap_or(class.default_exponent());
    for row in recipe_vanishing_check(class, &opts, &setup.tail, &RECIPE_GRID)? {
        params.row([
            "recipe".to_string(),
            String::new(),
            row.k.to_string(),
            num(row.a),
            num(q),
            num(r),
            num(row.s_r),
            num(row.scaled),
        ])?;
    }
    if class == RecipeClass::Good {
        for n in KARAMATA_POINTS {
            let ratio = karamata_ratio(LogPower::new(opts.s), opts.beta, n)?;
            let mut row = vec![String::new(); 8];
            row[0] = "karamata".into();
            row[1] = n.to_string();
            row[7] = num(ratio);
            params.row(row)?;
        }
    }
    params.finish()?;
    println!("{} recipe at n = {horizon}: k = {}, a = {:.6}, q = {}, r = {}", class.name(), sel.k, sel.a, sel.q, sel.r);
    Ok(())
}

pub fn cmd_renewal(run: &RunConfig) -> Result<()> {
    let cfg = &run.config;
    let setup = Setup::build(cfg, run.seed)?;
    let horizon = cfg.parsed_or("horizon.n", 200)?;
    let mut fam = OperatorFamily::build(&setup.system)?;
    let mut tower = Tower::new(setup.system.clone())?;
    if let Some(k) = cfg.parsed::<usize>("trunc.k")? {
        fam = fam.truncated(k)?;
        tower = tower.truncate(k)?;
    }
    let seq = compute_t(&fam, horizon)?;
    let u = match setup.kind {
        SystemKind::Iid => {
            let tail = fam.truncation().map_or(Ok(setup.tail.clone()), |k| truncated_tail(&setup.tail, k))?;
            let mut p = vec![0.0; tail.max_return()];
            for (n, m) in tail.atoms() {
                p[n - 1] = m;
            }
            Some(scalar_renewal(&p, horizon))
        }
        SystemKind::Lsv(_) => None,
    };
    let residuals = if setup.system.cells() <= TOWER_RESIDUAL_CELLS {
        Some(renewal_residuals(&return_sequence_from_tower(&tower, horizon), &fam))
    } else {
        eprintln!("more than {TOWER_RESIDUAL_CELLS} cells: skipping the tower-side residual");
        None
    };

    let mut table = Table::create(&run.output_path("renewal.csv"), &["n", "t_min", "t_max", "u_n", "residual"])?;
    for (n, row) in seq.on_constants().iter().enumerate() {
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        table.row([
            n.to_string(),
            num(lo),
            num(hi),
            opt(u.as_ref().map(|u| u[n])),
            opt(residuals.as_ref().map(|r| r[n])),
        ])?;
    }
    table.finish()?;
    let worst = residuals.map(|r| r.into_iter().fold(0.0, f64::max));
    println!(
        "T_n for n <= {horizon}: tower residual {}, commuted residual {:.2e}",
        worst.map_or("skipped".to_string(), |w| format!("{w:.2e}")),
        seq.commuted_residual(&fam)
    );
    Ok(())
}

/// Law of `min(φ, k)`.
fn truncated_tail(tail: &TailModel, k: usize) -> Result<TailModel> {
    let mut masses: Vec<f64> = (1..k).map(|n| tail.mass(n)).collect();
    masses.push(tail.tail_prob(k - 1));
    Ok(TailModel::from_masses(&masses)?)
}
