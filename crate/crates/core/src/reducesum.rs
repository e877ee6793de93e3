//! Closed forms for `R_+^n p = sum_{h=0}^{n} p(v0 + h v)` as exact polynomials
//! in `n`, built from Bernoulli numbers, and their derivatives in `n`.
//!
//! Bernoulli numbers use the `B_1 = +1/2` convention. With it the
//! Faulhaber form `1/(m+1) sum_i C(m+1, i) B_i n^(m+1-i)` equals
//! `sum_{h=1}^{n} h^m`, and for a polynomial restriction `q(t) = p(v0 + t v)`
//!
//! ```text
//! sum_{h=0}^{n} q(h) = G(n) - G(0) + q(0),
//! G = B_0 D^{-1} q + sum_{i>=1} B_i D^{i-1} q / i!
//! ```

use std::fmt;
use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::program::Program;

pub type Rational = BigRational;

/// Exact univariate polynomial in the iteration count `n`, ascending coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalPoly {
    coeffs: Vec<Rational>,
}

impl RationalPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        RationalPoly { coeffs }
    }

    pub fn zero() -> Self {
        RationalPoly { coeffs: Vec::new() }
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_int(&self, n: i64) -> Rational {
        self.eval(&Rational::from_integer(BigInt::from(n)))
    }

    /// Evaluates at a real argument.
    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + to_f64(c))
    }

    pub fn derivative(&self) -> Self {
        RationalPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Rational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    /// Antiderivative with zero constant term.
    pub fn antiderivative(&self) -> Self {
        let mut coeffs = vec![Rational::zero()];
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c / Rational::from_integer(BigInt::from(i + 1))),
        );
        RationalPoly::new(coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let zero = Rational::zero();
        RationalPoly::new(
            (0..len)
                .map(|i| {
                    self.coeffs.get(i).unwrap_or(&zero) + other.coeffs.get(i).unwrap_or(&zero)
                })
                .collect(),
        )
    }

    pub fn scale(&self, c: &Rational) -> Self {
        RationalPoly::new(self.coeffs.iter().map(|x| x * c).collect())
    }
}

impl fmt::Display for RationalPoly {
    /// Descending powers of `n`, e.g. `1/3 n^3 + 1/2 n^2 + 1/6 n`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (deg, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let magnitude = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c.is_negative() { "-" } else { "+" })?;
            }
            first = false;
            let mag = if magnitude.is_integer() {
                magnitude.numer().to_string()
            } else {
                format!("{}/{}", magnitude.numer(), magnitude.denom())
            };
            match deg {
                0 => write!(f, "{mag}")?,
                _ if magnitude.is_one() => write!(f, "n")?,
                _ => write!(f, "{mag} n")?,
            }
            if deg > 1 {
                write!(f, "^{deg}")?;
            }
        }
        Ok(())
    }
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn int(n: usize) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn factorial(n: usize) -> Rational {
    (1..=n).fold(Rational::one(), |acc, i| acc * int(i))
}

fn binomial(n: usize, k: usize) -> Rational {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn bernoulli_table() -> &'static RwLock<Vec<Rational>> {
    static TABLE: OnceLock<RwLock<Vec<Rational>>> = OnceLock::new();
    TABLE.get_or_init(|| RwLock::new(Vec::new()))
}

/// Bernoulli number `B_i` with `B_1 = +1/2`.
pub fn bernoulli(i: usize) -> Rational {
    if let Some(b) = bernoulli_table().read().unwrap().get(i) {
        return b.clone();
    }
    let mut table = bernoulli_table().write().unwrap();
    // Akiyama-Tanigawa; rebuilt whole so concurrent writers agree.
    let len = (i + 1).max(table.len());
    let mut a: Vec<Rational> = Vec::with_capacity(len);
    let mut out = Vec::with_capacity(len);
    for m in 0..len {
        a.push(Rational::one() / int(m + 1));
        for j in (1..=m).rev() {
            a[j - 1] = int(j) * (&a[j - 1] - &a[j]);
        }
        out.push(a[0].clone());
    }
    *table = out;
    table[i].clone()
}

/// Exact polynomial `S_m(n) = sum_{h=0}^{n} h^m` (with `0^0 = 1`).
pub fn reduce_sum_closed_form(m: usize) -> RationalPoly {
    let mut coeffs = vec![Rational::zero(); m + 2];
    let scale = Rational::one() / int(m + 1);
    for i in 0..=m {
        coeffs[m + 1 - i] = &scale * binomial(m + 1, i) * bernoulli(i);
    }
    if m == 0 {
        // The h = 0 term, absent from the Faulhaber form.
        coeffs[0] = Rational::one();
    }
    RationalPoly::new(coeffs)
}

/// Linear shift `p -> p(v0 + n v)` evaluated through the tensor series at `v0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOp {
    pub v0: Vec<f64>,
    pub v: Vec<f64>,
    pub n: f64,
}

impl ShiftOp {
    pub fn new(v0: Vec<f64>, v: Vec<f64>, n: f64) -> Result<Self> {
        if v0.len() != v.len() {
            return Err(Error::DimensionMismatch {
                context: "shift direction",
                expected: v0.len(),
                got: v.len(),
            });
        }
        Ok(ShiftOp { v0, v, n })
    }

    /// `S^n` applied to `p` through its order-`order` series.
    pub fn apply(&self, p: &Program, order: usize) -> Result<Vec<f64>> {
        crate::operators::shift(p, &self.v0, order)?.eval(self.n, &self.v)
    }

    /// `S^m . S^n = S^{n+m}`.
    pub fn then(&self, other: &ShiftOp) -> Result<ShiftOp> {
        if self.v != other.v || self.v0 != other.v0 {
            return Err(Error::Invalid("shifts along different lines".into()));
        }
        Ok(ShiftOp {
            n: self.n + other.n,
            ..self.clone()
        })
    }

    /// The same shift restarted from `v0 + n v`.
    pub fn rebased(&self) -> ShiftOp {
        ShiftOp {
            v0: self.v0.iter().zip(&self.v).map(|(a, b)| a + self.n * b).collect(),
            v: self.v.clone(),
            n: 0.0,
        }
    }
}

fn check_line(p: &Program, v0: &[f64], v: &[f64]) -> Result<()> {
    for (context, x) in [("reduction base point", v0), ("reduction direction", v)] {
        if x.len() != p.dim_in() {
            return Err(Error::DimensionMismatch {
                context,
                expected: p.dim_in(),
                got: x.len(),
            });
        }
    }
    Ok(())
}

/// Exact Taylor coefficients of `t -> p(v0 + t v)` up to `order`, one
/// polynomial per output coordinate.
pub fn restriction_polys(
    p: &Program,
    v0: &[f64],
    v: &[f64],
    order: usize,
) -> Result<Vec<RationalPoly>> {
    check_line(p, v0, v)?;
    let tower = p.tau(v0, order)?.tower;
    let mut per_output = vec![Vec::with_capacity(order + 1); p.dim_out()];
    for j in 0..=order {
        let c = tower.contract_component(j, v)?;
        let fact = factorial(j);
        for (o, x) in c.into_iter().enumerate() {
            let exact = Rational::from_float(x).ok_or_else(|| {
                Error::Invalid(format!("non-finite derivative of order {j}: {x}"))
            })?;
            per_output[o].push(exact / &fact);
        }
    }
    Ok(per_output.into_iter().map(RationalPoly::new).collect())
}

/// `sum_{h=0}^{n} q(h)` as a polynomial in `n`, through the Bernoulli
/// operator form.
pub fn reduce_sum_of_poly(q: &RationalPoly) -> RationalPoly {
    let degree = match q.degree() {
        Some(d) => d,
        None => return RationalPoly::zero(),
    };
    let mut g = q.antiderivative().scale(&bernoulli(0));
    let mut dq = q.clone();
    for i in 1..=degree + 1 {
        let coeff = bernoulli(i) / factorial(i);
        g = g.add(&dq.scale(&coeff));
        dq = dq.derivative();
    }
    let g0 = g.eval(&Rational::zero());
    let q0 = q.eval(&Rational::zero());
    g.add(&RationalPoly::new(vec![q0 - g0]))
}

/// Closed forms in `n` of `sum_{h=0}^{n} p(v0 + h v)`, one per output
/// coordinate, from the order-`order` series of `p` along the line.
pub fn reduce_sum_polys(
    p: &Program,
    v0: &[f64],
    v: &[f64],
    order: usize,
) -> Result<Vec<RationalPoly>> {
    Ok(restriction_polys(p, v0, v, order)?
        .iter()
        .map(reduce_sum_of_poly)
        .collect())
}

/// `sum_{h=0}^{n} p(v0 + h v)` through the closed form, rounded once.
///
/// Exact when the restriction of `p` to the line is a polynomial of degree
/// at most `order`; otherwise carries the series truncation error.
pub fn reduce_sum_apply(
    p: &Program,
    v0: &[f64],
    v: &[f64],
    n: u64,
    order: usize,
) -> Result<Vec<f64>> {
    reduction_velocity(p, v0, v, n as f64, 0, order)
}

/// `d^k/dn^k` of the closed-form reduction, evaluated at `n`.
pub fn reduction_velocity(
    p: &Program,
    v0: &[f64],
    v: &[f64],
    n: f64,
    k: usize,
    order: usize,
) -> Result<Vec<f64>> {
    let exact_n = Rational::from_float(n)
        .ok_or_else(|| Error::Invalid(format!("non-finite iteration count {n}")))?;
    Ok(reduce_sum_polys(p, v0, v, order)?
        .iter()
        .map(|r| to_f64(&r.nth_derivative(k).eval(&exact_n)))
        .collect())
}

/// The same velocity from the shifted Bernoulli series
/// `sum_{i=0}^{terms} B_i / i! d^{k-1+i} p(v0 + n v) . v^{(x)(k-1+i)}`.
///
/// Requires `k >= 1`; exact for polynomial restrictions once `terms`
/// reaches their degree.
pub fn reduction_velocity_series(
    p: &Program,
    v0: &[f64],
    v: &[f64],
    n: f64,
    k: usize,
    terms: usize,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Invalid(
            "the shifted series form needs a derivative order k >= 1".into(),
        ));
    }
    check_line(p, v0, v)?;
    let at: Vec<f64> = v0.iter().zip(v).map(|(a, b)| a + n * b).collect();
    let top = k - 1 + terms;
    let tower = p.tau(&at, top)?.tower;
    let mut out = vec![0.0; p.dim_out()];
    for i in 0..=terms {
        let b = to_f64(&(bernoulli(i) / factorial(i)));
        if b == 0.0 {
            continue;
        }
        let d = tower.contract_component(k - 1 + i, v)?;
        out.iter_mut().zip(d).for_each(|(o, x)| *o += b * x);
    }
    Ok(out)
}

/// Literal loop `sum_{h=0}^{n} p(v0 + h v)`.
pub fn brute_force_partial_sum(p: &Program, v0: &[f64], v: &[f64], n: u64) -> Result<Vec<f64>> {
    check_line(p, v0, v)?;
    let mut acc = vec![0.0; p.dim_out()];
    for h in 0..=n {
        let x: Vec<f64> = v0.iter().zip(v).map(|(a, b)| a + h as f64 * b).collect();
        acc.iter_mut()
            .zip(p.eval(&x)?)
            .for_each(|(s, y)| *s += y);
    }
    Ok(acc)
}
