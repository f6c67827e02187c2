use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::OperatorFamily;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

const TOL: f64 = 1e-12;
const MAX_ITER: usize = 100_000;

/// Leading eigen-data of a nonnegative matrix.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalue: f64,
    /// Right eigenvector, scaled so that `leftᵀ right = 1`.
    pub right: DVector<f64>,
    /// Left eigenvector, scaled to unit sum.
    pub left: DVector<f64>,
    /// `right leftᵀ`.
    pub projection: DMatrix<f64>,
    /// Modulus of the second eigenvalue, from the deflated matrix.
    pub second_modulus: f64,
    pub gap: f64,
    /// Set when the gap is below `1e-6`.
    pub gap_warning: bool,
    pub iterations: usize,
}

fn start_vector(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| 1.0 + 0.5 * (1.7 * i as f64 + 0.3).sin())
}

fn power_iteration(a: &DMatrix<f64>) -> Result<(f64, DVector<f64>, usize)> {
    let mut x = start_vector(a.nrows());
    x /= x.norm();
    for it in 1..=MAX_ITER {
        let y = a * &x;
        let lambda = x.dot(&y);
        let resid = (&y - lambda * &x).norm();
        let ny = y.norm();
        if ny == 0.0 {
            return Ok((0.0, x, it));
        }
        if resid <= TOL * lambda.abs().max(1.0) {
            return Ok((lambda, y / ny, it));
        }
        x = y / ny;
    }
    Err(Error::NotConverged { what: "power iteration", iterations: MAX_ITER })
}

/// Growth rate of `‖Bⁿ x‖` estimated over doubling windows.
fn growth_rate(b: &DMatrix<f64>) -> f64 {
    let mut x = start_vector(b.nrows());
    x /= x.norm();
    let mut log_norms = vec![0.0];
    let mut prev: Option<f64> = None;
    let mut window = 16;
    loop {
        while log_norms.len() <= window {
            let y = b * &x;
            let ny = y.norm();
            if ny < 1e-300 {
                return 0.0;
            }
            log_norms.push(log_norms.last().unwrap() + ny.ln());
            x = y / ny;
        }
        let half = window / 2;
        let rate = ((log_norms[window] - log_norms[half]) / (window - half) as f64).exp();
        if let Some(p) = prev {
            if (rate - p).abs() <= 1e-6 + 1e-4 * rate || window >= MAX_ITER {
                return rate;
            }
        }
        prev = Some(rate);
        window *= 2;
    }
}

/// Leading eigenpair by power iteration and the spectral gap by one deflation.
pub fn spectral_data(a: &DMatrix<f64>) -> Result<SpectralData> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(Error::InvalidParameter("spectral_data needs a nonempty square matrix".into()));
    }
    let (lambda, h, it_r) = power_iteration(a)?;
    let (_, l, it_l) = power_iteration(&a.transpose())?;
    let mut left = l.clone();
    let s = left.sum();
    if s == 0.0 {
        return Err(Error::InvalidParameter("left eigenvector has zero sum".into()));
    }
    left /= s;
    let lh = left.dot(&h);
    if lh == 0.0 {
        return Err(Error::InvalidParameter("leading eigenvalue is not simple".into()));
    }
    let right = h / lh;
    let projection = &right * left.transpose();
    let deflated = a - lambda * &projection;
    let second_modulus = growth_rate(&deflated);
    let gap = lambda - second_modulus;
    Ok(SpectralData {
        eigenvalue: lambda,
        right,
        left,
        projection,
        second_modulus,
        gap,
        gap_warning: gap < 1e-6,
        iterations: it_r.max(it_l),
    })
}

/// Result of the aperiodicity scan on the unit circle.
#[derive(Clone, Copy, Debug)]
pub struct H2Report {
    pub min_sigma: f64,
    pub argmin: Complex64,
    pub points: usize,
}

/// Minimum of `σ_min(I - R(z))` over `n_points` equispaced points of the unit
/// circle with `|z - 1| ≥ delta`. Singular values are taken in `L²(μ)`.
pub fn check_h2ii(family: &OperatorFamily, n_points: usize, delta: f64) -> Result<H2Report> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("delta must be positive".into()));
    }
    let zs: Vec<Complex64> = (0..n_points)
        .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n_points as f64))
        .filter(|z| (z - 1.0).norm() >= delta)
        .collect();
    let sigmas: Vec<Result<f64>> = zs
        .par_iter()
        .map(|&z| {
            let a = CMatrix::identity(family.dim(), family.dim()) - family.eval(z)?;
            Ok(linalg::sigma_min_weighted(&a, family.cell_masses()))
        })
        .collect();
    let mut best = H2Report { min_sigma: f64::INFINITY, argmin: Complex64::new(1.0, 0.0), points: zs.len() };
    for (z, s) in zs.iter().zip(sigmas) {
        let s = s?;
        if s < best.min_sigma {
            best.min_sigma = s;
            best.argmin = *z;
        }
    }
    Ok(best)
}

/// Discretization of the contour `|ξ - 1| = radius`.
#[derive(Clone, Copy, Debug)]
pub struct ContourOptions {
    pub radius: f64,
    pub nodes: usize,
}

impl ContourOptions {
    /// Radius half the spectral gap of `R(1)`, 256 nodes.
    pub fn for_family(family: &OperatorFamily) -> Result<Self> {
        let sd = spectral_data(&family.sum())?;
        Ok(Self { radius: sd.gap / 2.0, nodes: 256 })
    }
}

/// `P(z) = (2πi)⁻¹ ∮ (ξ - R(z))⁻¹ dξ` by the trapezoid rule.
pub fn contour_projection(family: &OperatorFamily, z: Complex64, opts: &ContourOptions) -> Result<CMatrix> {
    let m = family.dim();
    let r = family.eval(z)?;
    let mut p = CMatrix::zeros(m, m);
    for k in 0..opts.nodes {
        let w = Complex64::from_polar(opts.radius, 2.0 * PI * k as f64 / opts.nodes as f64);
        let xi = 1.0 + w;
        let a = CMatrix::identity(m, m) * xi - &r;
        let (inv, sigma) = linalg::inverse_with_sigma(&a).ok_or(Error::Singular {
            z: xi,
            sigma: 0.0,
            hint: "; change the contour radius",
        })?;
        if sigma < 1e-12 {
            return Err(Error::Singular { z: xi, sigma, hint: "; change the contour radius" });
        }
        p += inv * w;
    }
    Ok(p / Complex64::new(opts.nodes as f64, 0.0))
}

/// `λ(z) = tr(R(z) P(z)) / tr(P(z))`.
pub fn eigenvalue_path(family: &OperatorFamily, z: Complex64, opts: &ContourOptions) -> Result<Complex64> {
    let p = contour_projection(family, z, opts)?;
    let r = family.eval(z)?;
    Ok((r * &p).trace() / p.trace())
}

/// Central difference of `λ` along the real axis at `z = 1`.
pub fn eigenvalue_derivative_at_one(family: &OperatorFamily, opts: &ContourOptions) -> Result<Complex64> {
    let h = 1e-5;
    let up = eigenvalue_path(family, Complex64::new(1.0 + h, 0.0), opts)?;
    let down = eigenvalue_path(family, Complex64::new(1.0 - h, 0.0), opts)?;
    Ok((up - down) / (2.0 * h))
}
