//! Structural invariants over randomly generated return-time laws.

use std::sync::Arc;

use proptest::prelude::*;

use optrunc_core::bounds::{s_q, select_params, trunc_bound};
use optrunc_core::correlate::{
    build_boundary_ops, check_a_norms, check_gouezel_identity, check_projection_identity, operator_correlation,
};
use optrunc_core::linalg::max_abs;
use optrunc_core::renewal::{compute_t, scalar_renewal};
use optrunc_core::systems::build_iid_system;
use optrunc_core::tower::{en_mass_sequence, height_defect, trunc_region_mass};
use optrunc_core::{Observable, OperatorFamily, RecipeClass, RecipeOptions, TailClass, TailModel, Tower};

fn law() -> impl Strategy<Value = TailModel> {
    prop::collection::vec(0.0f64..1.0, 1..12).prop_filter_map("needs positive mass", |w| {
        TailModel::from_weights(&w).ok()
    })
}

fn setup(tail: &TailModel) -> (Arc<optrunc_core::InducedSystem>, OperatorFamily) {
    let sys = Arc::new(build_iid_system(tail).unwrap());
    let fam = OperatorFamily::build(&sys).unwrap();
    (sys, fam)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tails_are_normalized_and_monotone(tail in law()) {
        let total: f64 = tail.masses().iter().sum::<f64>() + tail.residual();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for n in 0..tail.max_return() + 2 {
            prop_assert!(tail.tail_prob(n + 1) <= tail.tail_prob(n));
        }
    }

    #[test]
    fn parametric_tails_are_normalized(beta in 0.05f64..3.0, nmax in 2usize..400) {
        let tail = TailModel::polynomial(beta, nmax).unwrap();
        let total: f64 = tail.masses().iter().sum::<f64>() + tail.residual();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn iid_system_reproduces_its_law(tail in law()) {
        let (sys, _) = setup(&tail);
        let back = sys.return_tail().unwrap();
        for n in 1..=tail.max_return() {
            prop_assert_eq!(back.mass(n), tail.mass(n));
        }
    }

    #[test]
    fn renewal_matches_scalar_oracle(tail in law()) {
        let (_, fam) = setup(&tail);
        let seq = compute_t(&fam, 120).unwrap();
        let mut p = vec![0.0; tail.max_return()];
        for (n, m) in tail.atoms() {
            p[n - 1] = m;
        }
        let u = scalar_renewal(&p, 120);
        for (n, row) in seq.on_constants().iter().enumerate() {
            for x in row {
                prop_assert!((x - u[n]).abs() <= 1e-12);
            }
        }
        prop_assert!(seq.commuted_residual(&fam) <= 1e-12);
    }

    #[test]
    fn truncation_keeps_the_induced_map(tail in law(), k in 1usize..14) {
        let (_, fam) = setup(&tail);
        let tk = fam.truncated(k).unwrap();
        prop_assert!(max_abs(&(fam.sum() - tk.sum())) <= 1e-14);
        let p = fam.projection();
        prop_assert!(max_abs(&(&p * &p - &p)) <= 1e-12);
    }

    #[test]
    fn appendix_identities(tail in law(), k in 1usize..14) {
        let (sys, _) = setup(&tail);
        let full = Tower::new(sys).unwrap();
        let trunc = full.truncate(k).unwrap();
        prop_assert!((height_defect(&full, &trunc).unwrap() - tail.tail_sum(k)).abs() <= 1e-12);
        let outside = trunc_region_mass(&full, k).unwrap();
        prop_assert!((outside - tail.tail_sum(k) / full.mean_height()).abs() <= 1e-12);
        let inside: f64 = (0..trunc.heights().len())
            .map(|p| full.state_mass(p) * trunc.height(p) as f64)
            .sum();
        prop_assert!((inside + outside - 1.0).abs() <= 1e-12);
        let en = en_mass_sequence(&full, k, 40).unwrap();
        for (i, e) in en.iter().enumerate() {
            prop_assert!(*e <= (i + 1) as f64 / full.mean_height() * tail.tail_prob(k) * (1.0 + 1e-12));
            if i > 0 {
                prop_assert!(*e >= en[i - 1]);
            }
        }
        if k >= tail.max_return() {
            prop_assert!(en.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn decomposition_holds(tail in law(), k in 1usize..9) {
        let (sys, fam) = setup(&tail);
        let tower = Tower::new(sys).unwrap().truncate(k).unwrap();
        let tk = fam.truncated(k).unwrap();
        prop_assert!(check_gouezel_identity(&tower, &tk, 30).unwrap() <= 1e-10);
        let ops = build_boundary_ops(&tower, &tk).unwrap();
        prop_assert!(check_projection_identity(&tower, &ops).unwrap() <= 1e-10);
        for (_, norm, bound) in check_a_norms(&tower, &ops) {
            prop_assert!(norm <= bound + 1e-15);
        }
    }

    #[test]
    fn constants_never_correlate(tail in law(), v in prop::collection::vec(-2.0f64..2.0, 1..8), c in -3.0f64..3.0) {
        let (sys, _) = setup(&tail);
        let tower = Tower::new(sys).unwrap();
        let rho = operator_correlation(&tower, &Observable::Level(v), &Observable::constant(c), 30).unwrap();
        for r in &rho.values {
            prop_assert!(r.abs() <= 1e-12);
        }
    }

    #[test]
    fn s_q_matches_brute_force(tail in law(), k in 1usize..14, a in 0.0f64..0.5, q in 0.0f64..1.0) {
        let brute: f64 = (1..=k)
            .map(|j| {
                let u: f64 = (j + 1..=tail.max_return()).map(|l| tail.mass(l)).sum();
                u * (j as f64).powf(q) * (j as f64 * a).exp()
            })
            .sum();
        let v = s_q(&tail, k, a, q).unwrap();
        prop_assert!((v - brute).abs() <= 1e-12 * brute.max(1.0));
    }

    #[test]
    fn trunc_bound_is_monotone(beta in 0.2f64..2.0, n in 1usize..300, k in 1usize..100) {
        let tail = TailModel::parametric(TailClass::Polynomial { beta, scale: 1.0 }, 400).unwrap();
        prop_assert!(trunc_bound(&tail, n, k + 1) <= trunc_bound(&tail, n, k));
        prop_assert!(trunc_bound(&tail, n + 1, k) >= trunc_bound(&tail, n, k));
    }

    #[test]
    fn select_params_is_pure(n in 10usize..5000, p in 0.5f64..4.0) {
        for class in [RecipeClass::Good, RecipeClass::Slow, RecipeClass::Sv, RecipeClass::Exponential] {
            let opts = RecipeOptions { p, ..RecipeOptions::defaults(class) };
            prop_assert_eq!(select_params(class, n, &opts).ok(), select_params(class, n, &opts).ok());
        }
    }
}
