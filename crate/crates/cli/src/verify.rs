//! `verify`: identity checks on the configured system.

use anyhow::{bail, Result};
use optrunc_core::correlate::{build_boundary_ops, check_a_norms, check_gouezel_identity, check_projection_identity};
use optrunc_core::operators::{check_h2ii, eigenvalue_derivative_at_one, ContourOptions};
use optrunc_core::renewal::{compute_t, renewal_residual, return_sequence_from_tower, scalar_renewal};
use optrunc_core::tower::{en_mass_sequence, height_defect, trunc_region_mass};
use optrunc_core::{OperatorFamily, Tower};

use crate::config::RunConfig;
use crate::csvout::{num, Table};
use crate::setup::{Setup, SystemKind};

/// Dense checks need the whole `T_n` sequence; beyond this many base cells
/// they are refused.
pub const MAX_CELLS: usize = 200;

pub struct Check {
    pub name: &'static str,
    pub params: String,
    pub measured: f64,
    pub target: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &'static str, params: String, measured: f64, target: f64) -> Self {
        Self { name, params, measured, target, pass: measured <= target }
    }
}

fn attempt(name: &'static str, params: String, target: f64, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| {
        eprintln!("{name}: {e:#}");
        Check { name, params, measured: f64::NAN, target, pass: false }
    })
}

pub fn run_checks(setup: &Setup, k: usize, horizon: usize) -> Result<Vec<Check>> {
    if setup.system.cells() > MAX_CELLS {
        bail!(
            "verify needs at most {MAX_CELLS} base cells, the system has {}; lower `tail.nmax` or `lsv.cells`",
            setup.system.cells()
        );
    }
    let fam = OperatorFamily::build(&setup.system)?;
    let full = Tower::new(setup.system.clone())?;
    let tail = &setup.tail;
    let mut out = Vec::new();
    let np = format!("n<={horizon}");
    let kp = format!("k={k}");

    out.push(attempt("renewal_recursion", np.clone(), 1e-12, || {
        let seq = return_sequence_from_tower(&full, horizon);
        Ok(Check::at_most("renewal_recursion", np.clone(), renewal_residual(&seq, &fam), 1e-12))
    }));
    out.push(attempt("renewal_commuted", np.clone(), 1e-12, || {
        let r = compute_t(&fam, horizon)?.commuted_residual(&fam);
        Ok(Check::at_most("renewal_commuted", np.clone(), r, 1e-12))
    }));
    if matches!(setup.kind, SystemKind::Iid) {
        out.push(attempt("scalar_oracle", np.clone(), 1e-12, || {
            let mut p = vec![0.0; tail.max_return()];
            for (n, m) in tail.atoms() {
                p[n - 1] = m;
            }
            let u = scalar_renewal(&p, horizon);
            let worst = compute_t(&fam, horizon)?
                .on_constants()
                .iter()
                .zip(&u)
                .flat_map(|(row, un)| row.iter().map(move |x| (x - un).abs()))
                .fold(0.0, f64::max);
            Ok(Check::at_most("scalar_oracle", np.clone(), worst, 1e-12))
        }));
    }
    out.push(attempt("height_defect", kp.clone(), 1e-12, || {
        let d = (height_defect(&full, &full.truncate(k)?)? - tail.tail_sum(k)).abs();
        Ok(Check::at_most("height_defect", kp.clone(), d, 1e-12))
    }));
    out.push(attempt("truncated_region_mass", kp.clone(), 1e-12, || {
        let d = (trunc_region_mass(&full, k)? - tail.tail_sum(k) / full.mean_height()).abs();
        Ok(Check::at_most("truncated_region_mass", kp.clone(), d, 1e-12))
    }));
    let ep = format!("k={k};n<=100");
    out.push(attempt("en_mass_bound", ep.clone(), 0.0, || {
        let bound_at = |n: usize| n as f64 / full.mean_height() * tail.tail_prob(k) * (1.0 + 1e-12);
        let violations = en_mass_sequence(&full, k, 100)?
            .iter()
            .enumerate()
            .filter(|(i, e)| **e > bound_at(i + 1))
            .count();
        Ok(Check::at_most("en_mass_bound", ep.clone(), violations as f64, 0.0))
    }));
    let hp = "points=256;delta=0.05".to_string();
    out.push(attempt("aperiodicity", hp.clone(), 1e-8, || {
        let report = check_h2ii(&fam, 256, 0.05)?;
        if report.min_sigma <= 1e-8 {
            eprintln!("aperiodicity: I - R(z) is singular near z = {:.6}", report.argmin);
        }
        Ok(Check {
            name: "aperiodicity",
            params: hp.clone(),
            measured: report.min_sigma,
            target: 1e-8,
            pass: report.min_sigma > 1e-8,
        })
    }));
    out.push(attempt("eigenvalue_slope", kp.clone(), 1e-6, || {
        let tk = fam.truncated(k)?;
        let d = eigenvalue_derivative_at_one(&tk, &ContourOptions::for_family(&tk)?)?;
        let rel = (d - tk.mean_return()).norm() / tk.mean_return();
        Ok(Check::at_most("eigenvalue_slope", kp.clone(), rel, 1e-6))
    }));
    let dp = format!("k={k};n<=50");
    out.push(attempt("decomposition", dp.clone(), 1e-10, || {
        let r = check_gouezel_identity(&full.truncate(k)?, &fam.truncated(k)?, 50)?;
        Ok(Check::at_most("decomposition", dp.clone(), r, 1e-10))
    }));
    let boundary = full.truncate(k).and_then(|t| {
        let ops = build_boundary_ops(&t, &fam.truncated(k)?)?;
        Ok((t, ops))
    });
    match boundary {
        Ok((t, ops)) => {
            out.push(attempt("projection_identity", kp.clone(), 1e-10, || {
                Ok(Check::at_most("projection_identity", kp.clone(), check_projection_identity(&t, &ops)?, 1e-10))
            }));
            let violations = check_a_norms(&t, &ops).iter().filter(|(_, norm, b)| *norm > b + 1e-15).count();
            out.push(Check::at_most("boundary_norms", kp.clone(), violations as f64, 0.0));
        }
        Err(e) => {
            eprintln!("boundary operators: {e}");
            for name in ["projection_identity", "boundary_norms"] {
                out.push(Check { name, params: kp.clone(), measured: f64::NAN, target: 0.0, pass: false });
            }
        }
    }
    Ok(out)
}

/// Writes `verify_report.csv`; returns the number of failed checks.
pub fn cmd_verify(run: &RunConfig) -> Result<usize> {
    let setup = Setup::build(&run.config, run.seed)?;
    let k = run.config.parsed_or("trunc.k", 4)?;
    let horizon = run.config.parsed_or("horizon.n", 200)?;
    let checks = run_checks(&setup, k, horizon)?;
    let mut table = Table::create(
        &run.output_path("verify_report.csv"),
        &["check_name", "system", "params", "measured", "bound_or_target", "pass"],
    )?;
    for c in &checks {
        table.row([c.name, &setup.label, &c.params, &num(c.measured), &num(c.target), &c.pass.to_string()])?;
        println!("{:<22} {} {:.3e} (target {:.1e})", c.name, if c.pass { "pass" } else { "FAIL" }, c.measured, c.target);
    }
    table.finish()?;
    Ok(checks.iter().filter(|c| !c.pass).count())
}
