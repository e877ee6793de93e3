//! Elementwise analytic primitives with closed-form derivatives of every order.

use std::fmt;
use std::sync::Arc;

type DerivFn = dyn Fn(usize, f64) -> std::result::Result<f64, String> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Sigmoid,
    Pow(i32),
    Custom(Arc<DerivFn>),
}

/// A scalar analytic function applied per coordinate.
#[derive(Clone)]
pub struct Primitive {
    name: String,
    kind: Kind,
}

impl fmt::Debug for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Primitive({})", self.name)
    }
}

impl PartialEq for Primitive {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (Kind::Custom(a), Kind::Custom(b)) => self.name == other.name && Arc::ptr_eq(a, b),
            (Kind::Custom(_), _) | (_, Kind::Custom(_)) => false,
            _ => self.name == other.name,
        }
    }
}

impl Primitive {
    pub fn exp() -> Self {
        Self::builtin("exp", Kind::Exp)
    }

    pub fn log() -> Self {
        Self::builtin("log", Kind::Log)
    }

    pub fn sin() -> Self {
        Self::builtin("sin", Kind::Sin)
    }

    pub fn cos() -> Self {
        Self::builtin("cos", Kind::Cos)
    }

    pub fn tanh() -> Self {
        Self::builtin("tanh", Kind::Tanh)
    }

    pub fn sigmoid() -> Self {
        Self::builtin("sigmoid", Kind::Sigmoid)
    }

    /// `x -> x^n` for any integer `n`.
    pub fn pow(n: i32) -> Self {
        Primitive {
            name: format!("pow{n}"),
            kind: Kind::Pow(n),
        }
    }

    /// `x -> 1/x`.
    pub fn reciprocal() -> Self {
        Primitive {
            name: "recip".into(),
            kind: Kind::Pow(-1),
        }
    }

    /// A user primitive given by its derivative sequence `(j, x) -> f^(j)(x)`.
    pub fn custom<F>(name: impl Into<String>, deriv_seq: F) -> Self
    where
        F: Fn(usize, f64) -> std::result::Result<f64, String> + Send + Sync + 'static,
    {
        Primitive {
            name: name.into(),
            kind: Kind::Custom(Arc::new(deriv_seq)),
        }
    }

    fn builtin(name: &str, kind: Kind) -> Self {
        Primitive {
            name: name.into(),
            kind,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Looks a built-in primitive up by name (`exp`, `pow3`, `pow-2`, ...).
    pub fn by_name(name: &str) -> Option<Self> {
        let p = match name {
            "exp" => Self::exp(),
            "log" => Self::log(),
            "sin" => Self::sin(),
            "cos" => Self::cos(),
            "tanh" => Self::tanh(),
            "sigmoid" => Self::sigmoid(),
            "recip" => Self::reciprocal(),
            _ => {
                let n = name.strip_prefix("pow")?.parse().ok()?;
                Self::pow(n)
            }
        };
        Some(p)
    }

    /// The `j`-th derivative at `x`; `j = 0` is the function value.
    pub fn deriv_seq(&self, j: usize, x: f64) -> std::result::Result<f64, String> {
        match &self.kind {
            Kind::Tanh | Kind::Sigmoid => Ok(self.derivatives(x, j)?[j]),
            Kind::Custom(f) => f(j, x),
            _ => self.closed_form(j, x),
        }
    }

    /// Derivatives of orders `0..=k` at `x`.
    pub fn derivatives(&self, x: f64, k: usize) -> std::result::Result<Vec<f64>, String> {
        match &self.kind {
            Kind::Tanh => {
                let t = x.tanh();
                Ok(chain_polynomials(k, &[0.0, 1.0], &[1.0, 0.0, -1.0], t))
            }
            Kind::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                Ok(chain_polynomials(k, &[0.0, 1.0], &[0.0, 1.0, -1.0], s))
            }
            _ => (0..=k).map(|j| self.deriv_seq(j, x)).collect(),
        }
    }

    fn closed_form(&self, j: usize, x: f64) -> std::result::Result<f64, String> {
        match self.kind {
            Kind::Exp => Ok(x.exp()),
            Kind::Sin => Ok(trig_cycle(x, j)),
            Kind::Cos => Ok(trig_cycle(x, j + 1)),
            Kind::Log => {
                if x <= 0.0 {
                    return Err(format!("log of non-positive input {x}"));
                }
                if j == 0 {
                    return Ok(x.ln());
                }
                // (-1)^(j-1) (j-1)! / x^j
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                Ok(sign * factorial(j - 1) / x.powi(j as i32))
            }
            Kind::Pow(n) => {
                if n < 0 && x == 0.0 {
                    return Err(format!("pow{n} undefined at 0"));
                }
                if n >= 0 && j > n as usize {
                    return Ok(0.0);
                }
                let falling: f64 = (0..j).map(|i| (n - i as i32) as f64).product();
                Ok(falling * x.powi(n - j as i32))
            }
            Kind::Tanh | Kind::Sigmoid | Kind::Custom(_) => unreachable!(),
        }
    }
}

/// Derivatives of `u(x)` when `u' = q(u)`, given `u(x) = y`.
///
/// `f^(j) = P_j(u)` with `P_0 = start` and `P_{j+1} = P_j' * q`.
fn chain_polynomials(k: usize, start: &[f64], q: &[f64], y: f64) -> Vec<f64> {
    let mut poly = start.to_vec();
    let mut out = Vec::with_capacity(k + 1);
    for _ in 0..=k {
        out.push(horner(&poly, y));
        let deriv: Vec<f64> = poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect();
        let mut next = vec![0.0; deriv.len() + q.len()];
        for (i, a) in deriv.iter().enumerate() {
            for (l, b) in q.iter().enumerate() {
                next[i + l] += a * b;
            }
        }
        poly = next;
    }
    out
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `d^j/dx^j sin(x)`: the cycle sin, cos, -sin, -cos.
fn trig_cycle(x: f64, j: usize) -> f64 {
    match j % 4 {
        0 => x.sin(),
        1 => x.cos(),
        2 => -x.sin(),
        _ => -x.cos(),
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// The built-in primitives.
pub fn primitive_library() -> Vec<Primitive> {
    vec![
        Primitive::exp(),
        Primitive::log(),
        Primitive::sin(),
        Primitive::cos(),
        Primitive::tanh(),
        Primitive::sigmoid(),
        Primitive::reciprocal(),
        Primitive::pow(2),
        Primitive::pow(3),
    ]
}
