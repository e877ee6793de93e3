//! Fractional iteration of scalar programs near a hyperbolic fixed point.
//!
//! Given `p` with `p(v_f) = v_f` and multiplier `L = p'(v_f)`, `|L|` not in
//! `{0, 1}`, the Schroeder eigenfunction `h` solves `h(p(v)) = L h(v)` with
//! `h(v_f) = 0`, `h'(v_f) = 1`. Then `p^x = h^{-1}(L^x h(v))` and the
//! iterating velocity is `Psi = log(L) h / h'`.

use crate::error::{Error, Result};
use crate::operators::shift;
use crate::program::Program;

/// Residual accepted for a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Newton iteration cap for [`find_fixed_point`].
pub const MAX_NEWTON_ITERATIONS: usize = 100;
/// Fraction of the root-test radius treated as safe for evaluation.
pub const RADIUS_FACTOR: f64 = 0.5;
/// Tolerance of the coefficientwise check `h . p = L h`.
pub const EIGEN_CHECK_TOL: f64 = 1e-9;

/// Truncated power series product.
fn mul_trunc(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate().take(len) {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `[P^0, P^1, ..., P^k]` truncated to degree `k`.
fn powers(p: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(k + 1);
    let mut one = vec![0.0; k + 1];
    one[0] = 1.0;
    out.push(one);
    for j in 1..=k {
        let next = mul_trunc(&out[j - 1], p, k + 1);
        out.push(next);
    }
    out
}

fn horner(coeffs: &[f64], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
}

fn horner_derivative(coeffs: &[f64], z: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, c)| acc * z + i as f64 * c)
}

/// Solves `p(v) = v` by Newton's method from `seed`.
pub fn find_fixed_point(p: &Program, seed: f64) -> Result<f64> {
    check_scalar(p)?;
    let mut v = seed;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let t = p.tau(&[v], 1)?;
        let residual = t.value()[0] - v;
        if residual.abs() <= FIXED_POINT_TOL {
            return Ok(v);
        }
        let slope = t.tower.component(1)?[0] - 1.0;
        if slope == 0.0 || !slope.is_finite() {
            return Err(Error::SingularNewtonStep { at: v });
        }
        v -= residual / slope;
        if !v.is_finite() {
            break;
        }
    }
    let last = v;
    if (p.eval(&[v])?[0] - v).abs() <= FIXED_POINT_TOL {
        return Ok(v);
    }
    Err(Error::NoConvergence {
        iterations: MAX_NEWTON_ITERATIONS,
        last,
    })
}

fn check_scalar(p: &Program) -> Result<()> {
    if p.dim_in() != 1 || p.dim_out() != 1 {
        return Err(Error::Invalid(format!(
            "iteration needs a scalar program, got {} -> {}",
            p.dim_in(),
            p.dim_out()
        )));
    }
    Ok(())
}

/// Schroeder eigenfunction of a program around a hyperbolic fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct SchroederData {
    pub v_f: f64,
    pub lambda: f64,
    /// `log(lambda)`; `None` when `lambda < 0`.
    pub nu: Option<f64>,
    /// Coefficients of `z -> h(v_f + z)`; `[0] = 0`, `[1] = 1`.
    pub h_coeffs: Vec<f64>,
    /// Coefficients of `w -> h^{-1}(w) - v_f`.
    pub h_inv_coeffs: Vec<f64>,
    /// Taylor coefficients of `z -> p(v_f + z) - v_f`.
    pub p_coeffs: Vec<f64>,
    pub order: usize,
    /// Root-test estimate of the radius of convergence of `h`.
    pub radius: f64,
    /// Same estimate for `h^{-1}`.
    pub radius_inv: f64,
}

/// Builds `h` and `h^{-1}` to order `k` from the series of `p` at `v_f`.
pub fn schroeder(p: &Program, v_f: f64, k: usize) -> Result<SchroederData> {
    check_scalar(p)?;
    if k < 1 {
        return Err(Error::Invalid("Schroeder series needs order >= 1".into()));
    }
    let series = shift(p, &[v_f], k)?;
    let mut p_coeffs: Vec<f64> = series.coefficients.components().iter().map(|c| c[0]).collect();
    if (p_coeffs[0] - v_f).abs() > 1e-10 {
        return Err(Error::Invalid(format!(
            "{v_f} is not a fixed point: p(v_f) = {}",
            p_coeffs[0]
        )));
    }
    p_coeffs[0] = 0.0;
    let lambda = p_coeffs[1];
    if lambda == 0.0 || (lambda.abs() - 1.0).abs() < 1e-12 || !lambda.is_finite() {
        return Err(Error::NotHyperbolic { at: v_f, lambda });
    }

    let p_pow = powers(&p_coeffs, k);
    let mut h = vec![0.0; k + 1];
    h[1] = 1.0;
    for n in 2..=k {
        let denom = lambda.powi(n as i32) - lambda;
        if denom.abs() < 1e-14 * lambda.abs().max(1.0) {
            return Err(Error::Resonance { lambda, degree: n });
        }
        let s: f64 = (1..n).map(|j| h[j] * p_pow[j][n]).sum();
        h[n] = -s / denom;
    }

    // h . p must equal lambda h through degree k.
    for n in 1..=k {
        let lhs: f64 = (1..=n).map(|j| h[j] * p_pow[j][n]).sum();
        let rhs = lambda * h[n];
        if (lhs - rhs).abs() > EIGEN_CHECK_TOL * rhs.abs().max(1.0) {
            return Err(Error::Invalid(format!(
                "eigen equation violated at degree {n}: {lhs} vs {rhs}"
            )));
        }
    }

    let h_pow = powers(&h, k);
    let mut g = vec![0.0; k + 1];
    g[1] = 1.0;
    for n in 2..=k {
        g[n] = -(1..n).map(|j| g[j] * h_pow[j][n]).sum::<f64>();
    }

    let radius = root_test_radius(&h);
    let radius_inv = root_test_radius(&g);
    let nu = (lambda > 0.0).then(|| lambda.ln());
    Ok(SchroederData {
        v_f,
        lambda,
        nu,
        h_coeffs: h,
        h_inv_coeffs: g,
        p_coeffs,
        order: k,
        radius,
        radius_inv,
    })
}

fn root_test_radius(c: &[f64]) -> f64 {
    let k = c.len() - 1;
    (k.div_ceil(2).max(2)..=k)
        .filter(|&n| c[n] != 0.0)
        .map(|n| c[n].abs().powf(-1.0 / n as f64))
        .fold(f64::INFINITY, f64::min)
}

impl SchroederData {
    /// `h(v)` through the truncated series.
    pub fn h(&self, v: f64) -> f64 {
        horner(&self.h_coeffs, v - self.v_f)
    }

    pub fn h_prime(&self, v: f64) -> f64 {
        horner_derivative(&self.h_coeffs, v - self.v_f)
    }

    pub fn h_inv(&self, w: f64) -> f64 {
        self.v_f + horner(&self.h_inv_coeffs, w)
    }

    /// Whether `v` and `h(v)` lie within half the estimated convergence
    /// radii of `h` and `h^{-1}`.
    pub fn in_radius(&self, v: f64) -> bool {
        (v - self.v_f).abs() < RADIUS_FACTOR * self.radius
            && self.h(v).abs() < RADIUS_FACTOR * self.radius_inv
    }

    /// `h(p(v)) - lambda h(v)` using the series of `p` and `h`.
    pub fn eigen_residual(&self, v: f64) -> f64 {
        let pv = self.v_f + horner(&self.p_coeffs, v - self.v_f);
        self.h(pv) - self.lambda * self.h(v)
    }
}

/// `p^x(v) = h^{-1}(lambda^x h(v))`.
pub fn fractional_iterate(s: &SchroederData, x: f64, v: f64) -> Result<f64> {
    let scale = if s.lambda > 0.0 {
        s.lambda.powf(x)
    } else if x.fract() == 0.0 {
        s.lambda.powi(x as i32)
    } else {
        return Err(Error::NegativeMultiplier {
            x,
            lambda: s.lambda,
        });
    };
    if !s.in_radius(v) {
        log::warn!(
            "{v} is outside the estimated convergence region around {} (radii {}, {})",
            s.v_f,
            s.radius,
            s.radius_inv
        );
    }
    Ok(s.h_inv(scale * s.h(v)))
}

/// Iterating velocity `Psi(v) = log(lambda) h(v) / h'(v)`.
pub fn iterating_velocity(s: &SchroederData, v: f64) -> Result<f64> {
    let nu = s.nu.ok_or(Error::NegativeMultiplier {
        x: f64::NAN,
        lambda: s.lambda,
    })?;
    let dh = s.h_prime(v);
    if dh.abs() < 1e-12 {
        return Err(Error::SingularVelocity {
            at: v,
            derivative: dh,
        });
    }
    if !s.in_radius(v) {
        log::warn!("{v} is outside the estimated convergence region around {}", s.v_f);
    }
    Ok(nu * s.h(v) / dh)
}
