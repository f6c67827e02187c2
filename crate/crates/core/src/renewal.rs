//! Renewal sequences `T_n = 1_Y L^n 1_Y`, the resolvent `T(z) = (I - R(z))⁻¹`,
//! its pole-free part `J(z)`, and coefficient recovery by contour quadrature.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operators::OperatorFamily;
use crate::tower::{Flow, Tower};

/// `T_0, ..., T_N` for one operator family.
#[derive(Clone, Debug)]
pub struct RenewalSequence {
    terms: Vec<DMatrix<f64>>,
    truncation: Option<usize>,
}

impl RenewalSequence {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, n: usize) -> &DMatrix<f64> {
        &self.terms[n]
    }

    pub fn terms(&self) -> &[DMatrix<f64>] {
        &self.terms
    }

    pub fn truncation(&self) -> Option<usize> {
        self.truncation
    }

    /// `T_n 1` for every `n`.
    pub fn on_constants(&self) -> Vec<Vec<f64>> {
        self.terms.iter().map(|t| t.column_sum().iter().copied().collect()).collect()
    }

    /// `max_n max_ij |T_n - Σ_j R_j T_{n-j}|`, the mirror-image recursion that
    /// holds because `R(z)` commutes with `(I - R(z))⁻¹`.
    pub fn commuted_residual(&self, family: &OperatorFamily) -> f64 {
        let m = family.dim();
        let mut worst: f64 = 0.0;
        for n in 1..self.terms.len() {
            let mut acc = DMatrix::zeros(m, m);
            for j in 1..=n.min(family.len()) {
                family.terms()[j - 1].right_mul_into(&self.terms[n - j], &mut acc);
            }
            worst = worst.max(linalg::max_abs(&(&self.terms[n] - acc)));
        }
        worst
    }
}

/// `T_0 = I`, `T_n = Σ_{j=1}^{n} T_{n-j} R_j`.
pub fn compute_t(family: &OperatorFamily, horizon: usize) -> Result<RenewalSequence> {
    let m = family.dim();
    let mut terms = Vec::with_capacity(horizon + 1);
    terms.push(DMatrix::identity(m, m));
    for n in 1..=horizon {
        let mut t = DMatrix::zeros(m, m);
        for j in 1..=n.min(family.len()) {
            family.terms()[j - 1].left_mul_into(&terms[n - j], &mut t);
        }
        if t.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
            return Err(Error::NonFinite("renewal sequence (spectral radius above one?)"));
        }
        terms.push(t);
    }
    Ok(RenewalSequence { terms, truncation: family.truncation() })
}

/// `max_ij |T_n - Σ_{j=1}^n T_{n-j} R_j|` for each `n` of an externally
/// supplied sequence (zero at `n = 0`).
pub fn renewal_residuals(terms: &[DMatrix<f64>], family: &OperatorFamily) -> Vec<f64> {
    let m = family.dim();
    let mut out = vec![0.0; terms.len().min(1)];
    for n in 1..terms.len() {
        let mut acc = DMatrix::zeros(m, m);
        for j in 1..=n.min(family.len()) {
            family.terms()[j - 1].left_mul_into(&terms[n - j], &mut acc);
        }
        out.push(linalg::max_abs(&(&terms[n] - acc)));
    }
    out
}

/// Largest of [`renewal_residuals`].
pub fn renewal_residual(terms: &[DMatrix<f64>], family: &OperatorFamily) -> f64 {
    renewal_residuals(terms, family).into_iter().fold(0.0, f64::max)
}

/// `1_Y L^n 1_Y` for `n = 0..=horizon`, read off the tower dynamics directly
/// (column `j` is the base density after starting from the indicator of
/// cell `j`).
pub fn return_sequence_from_tower(tower: &Tower, horizon: usize) -> Vec<DMatrix<f64>> {
    let base = tower.base();
    let m = base.cells();
    let mut out = vec![DMatrix::zeros(m, m); horizon + 1];
    for j in 0..m {
        let mut init = vec![0.0; tower.state_count()];
        for &p in base.cell_pieces(j) {
            init[tower.offset(p)] = 1.0;
        }
        let mut flow = Flow::new(tower, &init);
        out[0][(j, j)] = 1.0;
        for t in out.iter_mut().skip(1) {
            flow.step(|_| false);
            t.set_column(j, &nalgebra::DVector::from_vec(flow.base_density()));
        }
    }
    out
}

/// Scalar renewal sequence `u_0 = 1`, `u_n = Σ_{j=1}^n p_j u_{n-j}` with
/// `p[j-1] = p_j`.
pub fn scalar_renewal(p: &[f64], horizon: usize) -> Vec<f64> {
    let mut u = Vec::with_capacity(horizon + 1);
    u.push(1.0);
    for n in 1..=horizon {
        let s = (1..=n.min(p.len())).map(|j| p[j - 1] * u[n - j]).sum();
        u.push(s);
    }
    u
}

/// `T(z) = (I - R(z))⁻¹`.
pub fn eval_tprime(family: &OperatorFamily, z: Complex64) -> Result<CMatrix> {
    let m = family.dim();
    let a = CMatrix::identity(m, m) - family.eval(z)?;
    let hint = "; T(z) has a simple pole at z = 1";
    let (inv, sigma) = linalg::inverse_with_sigma(&a).ok_or(Error::Singular { z, sigma: 0.0, hint })?;
    if sigma <= 1e-10 {
        return Err(Error::Singular { z, sigma, hint });
    }
    Ok(inv)
}

/// `J(z) = T(z) - (1 - z)⁻¹ h̄⁻¹ P`, by subtraction.
pub fn split_j(family: &OperatorFamily, z: Complex64) -> Result<CMatrix> {
    if z == Complex64::new(1.0, 0.0) {
        return Err(Error::InvalidParameter("split_j is evaluated away from z = 1".into()));
    }
    let t = eval_tprime(family, z)?;
    let scale = 1.0 / ((1.0 - z) * family.mean_return());
    Ok(t - linalg::to_complex(&family.projection()) * scale)
}

/// Suprema of `‖J(z)‖` and `|z - 1|^{1-q} ‖J(z)‖` over the circle `|z| = e^a`.
#[derive(Clone, Copy, Debug)]
pub struct RingScan {
    pub sup_norm: f64,
    pub sup_weighted: f64,
    pub argmax: Complex64,
    pub points: usize,
}

/// Scans `n_points` equispaced angles plus a geometric cluster near `θ = 0`.
pub fn j_ring_scan(family: &OperatorFamily, a: f64, q: f64, n_points: usize) -> Result<RingScan> {
    let mut thetas: Vec<f64> = (0..n_points).map(|j| 2.0 * PI * j as f64 / n_points as f64).collect();
    for e in -8..=4 {
        let t = a.abs().max(1e-3) * 2f64.powi(e);
        if t < PI {
            thetas.push(t);
            thetas.push(-t);
        }
    }
    let r = a.exp();
    let vals: Vec<Result<(f64, f64, Complex64)>> = thetas
        .par_iter()
        .map(|&th| {
            let z = Complex64::from_polar(r, th);
            let j = split_j(family, z)?;
            let nj = family.matrix_norm(&j);
            Ok((nj, (z - 1.0).norm().powf(1.0 - q) * nj, z))
        })
        .collect();
    let mut scan = RingScan { sup_norm: 0.0, sup_weighted: 0.0, argmax: Complex64::new(r, 0.0), points: thetas.len() };
    for v in vals {
        let (nj, w, z) = v?;
        scan.sup_norm = scan.sup_norm.max(nj);
        if w > scan.sup_weighted {
            scan.sup_weighted = w;
            scan.argmax = z;
        }
    }
    Ok(scan)
}

fn coefficients_on_grid<F>(f: &F, radius_exp: f64, count: usize, n_grid: usize) -> Result<Vec<CMatrix>>
where
    F: Fn(Complex64) -> Result<CMatrix> + Sync,
{
    let r = radius_exp.exp();
    let values: Vec<CMatrix> = (0..n_grid)
        .into_par_iter()
        .map(|k| f(Complex64::from_polar(r, 2.0 * PI * k as f64 / n_grid as f64)))
        .collect::<Result<_>>()?;
    let (rows, cols) = values[0].shape();
    let mut out = Vec::with_capacity(count + 1);
    for n in 0..=count {
        let mut acc = CMatrix::zeros(rows, cols);
        for (k, v) in values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -2.0 * PI * ((n * k) % n_grid) as f64 / n_grid as f64);
            acc += v * phase;
        }
        let scale = (-(n as f64) * radius_exp).exp() / n_grid as f64;
        out.push(acc * Complex64::new(scale, 0.0));
    }
    Ok(out)
}

/// Taylor coefficients `M_0, ..., M_N` of `f` by the trapezoid rule on the
/// circle of radius `e^{a - |a|/10}`. The grid is doubled once as an aliasing
/// check.
pub fn extract_coefficients<F>(f: F, a: f64, count: usize, n_grid: usize) -> Result<Vec<CMatrix>>
where
    F: Fn(Complex64) -> Result<CMatrix> + Sync,
{
    if n_grid < 4 * count.max(1) {
        return Err(Error::InvalidParameter(format!("n_grid {n_grid} is below 4N = {}", 4 * count)));
    }
    let radius_exp = a - a.abs() / 10.0;
    let coarse = coefficients_on_grid(&f, radius_exp, count, n_grid)?;
    let fine = coefficients_on_grid(&f, radius_exp, count, 2 * n_grid)?;
    let scale = fine.iter().map(linalg::max_abs_c).fold(1.0, f64::max);
    let shift = coarse.iter().zip(&fine).map(|(c, f)| linalg::max_abs_c(&(c - f))).fold(0.0, f64::max);
    if shift > 1e-8 * scale {
        return Err(Error::Aliasing { shift });
    }
    Ok(fine)
}

/// Coefficients of `T(z)` recovered through its pole-free part:
/// `T_n = h̄⁻¹ P + J_n`, with `J_n` extracted on `|z| = e^{a - a/10}`.
pub fn tprime_coefficients(family: &OperatorFamily, a: f64, count: usize, n_grid: usize) -> Result<Vec<DMatrix<f64>>> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter("radius exponent must be positive".into()));
    }
    let js = extract_coefficients(|z| split_j(family, z), a, count, n_grid)?;
    let p = family.projection() / family.mean_return();
    Ok(js.into_iter().map(|j| j.map(|c| c.re) + &p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_iid_system, TailModel};
    use std::sync::Arc;

    fn family(p: &[f64]) -> OperatorFamily {
        OperatorFamily::build(&build_iid_system(&TailModel::from_masses(p).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn point_mass_sequence_is_the_projection() {
        let f = family(&[1.0]);
        let t = compute_t(&f, 5).unwrap();
        assert_eq!(t.term(0), &DMatrix::identity(1, 1));
        for n in 1..=5 {
            assert_eq!(t.term(n), &f.projection());
        }
    }

    #[test]
    fn first_term_is_r1() {
        let f = family(&[0.2, 0.3, 0.5]);
        let t = compute_t(&f, 3).unwrap();
        assert_eq!(t.term(1), &f.term(1).to_dense());
    }

    #[test]
    fn two_point_law_on_constants() {
        let f = family(&[0.5, 0.5]);
        let t = compute_t(&f, 4).unwrap();
        let expect = [1.0, 0.5, 0.75, 0.625, 0.6875];
        for (n, u) in t.on_constants().iter().enumerate() {
            assert!(u.iter().all(|x| (x - expect[n]).abs() < 1e-15));
        }
    }

    #[test]
    fn scalar_renewal_examples() {
        assert!(scalar_renewal(&[1.0], 10).iter().all(|&u| u == 1.0));
        let u = scalar_renewal(&[0.5, 0.5], 40);
        assert_eq!(u[3], 0.625);
        for (n, un) in u.iter().enumerate() {
            let exact = 2.0 / 3.0 + (-0.5f64).powi(n as i32) / 3.0;
            assert!((un - exact).abs() < 1e-15);
        }
        let u = scalar_renewal(&[0.5, 0.25, 0.25], 200);
        assert!((u[200] - 4.0 / 7.0).abs() < 1e-10);
    }

    #[test]
    fn tower_returns_satisfy_the_recursion() {
        let tail = TailModel::from_masses(&[0.3, 0.1, 0.4, 0.2]).unwrap();
        let sys = Arc::new(build_iid_system(&tail).unwrap());
        let tower = Tower::new(sys.clone()).unwrap();
        let f = OperatorFamily::build(&sys).unwrap();
        let seq = return_sequence_from_tower(&tower, 60);
        assert!(renewal_residual(&seq, &f) < 1e-14);
        let t = compute_t(&f, 60).unwrap();
        assert!(t.commuted_residual(&f) < 1e-14);
    }

    #[test]
    fn resolvent_values() {
        let f = family(&[0.5, 0.5]).truncated(2).unwrap();
        let t0 = eval_tprime(&f, Complex64::new(0.0, 0.0)).unwrap();
        assert!(linalg::max_abs_c(&(t0 - CMatrix::identity(2, 2))) < 1e-15);
        let t = eval_tprime(&f, Complex64::new(0.5, 0.0)).unwrap();
        let s = t[(0, 0)] + t[(0, 1)];
        assert!((s.re - 1.6).abs() < 1e-14);
        assert!(matches!(eval_tprime(&f, Complex64::new(1.0, 0.0)), Err(Error::Singular { .. })));
    }

    #[test]
    fn j_of_two_point_law() {
        let f = family(&[0.5, 0.5]).truncated(2).unwrap();
        for z in [Complex64::new(0.3, 0.4), Complex64::new(1.0 - 1e-3, 0.0), Complex64::new(-0.5, 0.2)] {
            let j = split_j(&f, z).unwrap();
            let s = j[(0, 0)] + j[(0, 1)];
            let exact = (1.0 / 3.0) / (1.0 + z / 2.0);
            assert!((s - exact).norm() < 1e-8, "{z}: {s} vs {exact}");
        }
        let p1 = family(&[1.0]);
        let j = split_j(&p1, Complex64::new(0.2, 0.7)).unwrap();
        assert!(j[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn geometric_series_coefficients() {
        let f = |z: Complex64| Ok(CMatrix::from_element(1, 1, 1.0 / (1.0 - z / 2.0)));
        let c = extract_coefficients(f, 0.1, 50, 256).unwrap();
        for (n, m) in c.iter().enumerate() {
            assert!((m[(0, 0)].re - 0.5f64.powi(n as i32)).abs() < 1e-10);
        }
        let k = extract_coefficients(|_| Ok(CMatrix::from_element(1, 1, Complex64::new(3.0, 0.0))), 0.1, 5, 32).unwrap();
        assert!((k[0][(0, 0)].re - 3.0).abs() < 1e-14);
        assert!(k[1..].iter().all(|m| m[(0, 0)].norm() < 1e-14));
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let f = |z: Complex64| Ok(CMatrix::from_element(1, 1, 1.0 / (1.0 - z / 1.02)));
        assert!(matches!(extract_coefficients(f, 0.0, 10, 40), Err(Error::Aliasing { .. })));
        assert!(extract_coefficients(f, 0.0, 10, 20).is_err());
    }

    #[test]
    fn tprime_coefficients_match_the_recursion() {
        let f = family(&[0.5, 0.5]).truncated(2).unwrap();
        let c = tprime_coefficients(&f, 0.05, 40, 1024).unwrap();
        let t = compute_t(&f, 40).unwrap();
        for n in 0..=40 {
            assert!(linalg::max_abs(&(&c[n] - t.term(n))) < 1e-8, "n={n}");
        }
    }
}
