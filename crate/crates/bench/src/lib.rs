//! Shared fixtures for the benchmarks in `benches/`.

use std::sync::Arc;

use optrunc_core::systems::{build_iid_system, build_lsv_system};
use optrunc_core::{InducedSystem, LsvParams, OperatorFamily, TailModel, Tower};

/// i.i.d. system with `μ(φ>n) = n^{-(β+1)}` cut at `nmax`.
pub fn polynomial(beta: f64, nmax: usize) -> Arc<InducedSystem> {
    Arc::new(build_iid_system(&TailModel::polynomial(beta, nmax).expect("tail")).expect("system"))
}

/// Ulam-discretized LSV system with `cells` cells.
pub fn lsv(cells: usize) -> Arc<InducedSystem> {
    Arc::new(build_lsv_system(LsvParams::new(0.5, cells, 256, 7)).expect("lsv"))
}

pub fn family(system: &InducedSystem) -> OperatorFamily {
    OperatorFamily::build(system).expect("family")
}

pub fn tower(system: &Arc<InducedSystem>) -> Tower {
    Tower::new(system.clone()).expect("tower")
}
