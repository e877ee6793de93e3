//! Operators acting on programs and their derivative towers: the generalized
//! shift `e^{h d}`, the composer (Faa di Bruno over integer partitions),
//! forward/reverse chaining, and order reduction.

use std::fmt;

use crate::error::{Error, Result};
use crate::multitensor::{symmetrize_slots, MultiTensor, Shape};
use crate::program::{DerivativeTower, Program};

/// Base-point tolerance accepted by [`compose_towers`].
pub const BASE_POINT_TOL: f64 = 1e-9;

/// Truncated tensor series `sum_n h^n / n! d^n P(v0) . v^{(x) n}`.
///
/// `coefficients` component `n` already carries the `1/n!` factor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSeries {
    pub base_point: Vec<f64>,
    pub coefficients: MultiTensor,
}

impl TensorSeries {
    pub fn from_tower(t: &DerivativeTower) -> Self {
        TensorSeries {
            base_point: t.at.clone(),
            coefficients: t.tower.map_components(|n, x| x / factorial(n)),
        }
    }

    pub fn to_tower(&self) -> DerivativeTower {
        DerivativeTower {
            at: self.base_point.clone(),
            tower: self.coefficients.map_components(|n, x| x * factorial(n)),
        }
    }

    pub fn order(&self) -> usize {
        self.coefficients.order()
    }

    /// Evaluates the truncated series at step `h` in direction `v`.
    pub fn eval(&self, h: f64, v: &[f64]) -> Result<Vec<f64>> {
        let hv: Vec<f64> = v.iter().map(|x| h * x).collect();
        self.coefficients.eval_polynomial(&hv)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Expands `p` into its order-`k` tensor series at `v0`.
pub fn shift(p: &Program, v0: &[f64], k: usize) -> Result<TensorSeries> {
    Ok(TensorSeries::from_tower(&p.tau(v0, k)?))
}

/// Evaluates a tensor series at `(h, v)`.
pub fn series_eval(s: &TensorSeries, h: f64, v: &[f64]) -> Result<Vec<f64>> {
    s.eval(h, v)
}

/// An integer partition, parts in non-increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// `(part, multiplicity)` pairs, largest part first.
    pub fn multiplicities(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &p in &self.parts {
            match out.last_mut() {
                Some((q, k)) if *q == p => *k += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }

    /// Number of set partitions of `{1..n}` with these block sizes,
    /// `n! / prod_l ((l!)^k_l k_l!)`.
    pub fn set_partition_count(&self) -> f64 {
        let denom: f64 = self
            .multiplicities()
            .iter()
            .map(|&(l, k)| factorial(l).powi(k as i32) * factorial(k))
            .product();
        factorial(self.total()) / denom
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.parts.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// All partitions of `n` in descending lexicographic order.
pub fn partitions(n: usize) -> Vec<Partition> {
    fn go(remaining: usize, max: usize, current: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition {
                parts: current.clone(),
            });
            return;
        }
        for part in (1..=max.min(remaining)).rev() {
            current.push(part);
            go(remaining - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    go(n, n, &mut Vec::new(), &mut out);
    out
}

/// Tower of `f . g` at `g_tower.at`, given the tower of `f` at `g(v0)`.
pub fn compose_towers(f_tower: &DerivativeTower, g_tower: &DerivativeTower) -> Result<DerivativeTower> {
    if f_tower.order() != g_tower.order() {
        return Err(Error::OrderMismatch(f_tower.order(), g_tower.order()));
    }
    let inner_value = g_tower.value();
    if f_tower.at.len() != inner_value.len()
        || f_tower
            .at
            .iter()
            .zip(inner_value)
            .any(|(a, b)| (a - b).abs() > BASE_POINT_TOL * 1f64.max(b.abs()))
    {
        return Err(Error::BasePointMismatch {
            expected: f_tower.at.clone(),
            got: inner_value.to_vec(),
        });
    }
    Ok(DerivativeTower {
        at: g_tower.at.clone(),
        tower: compose_tensors(&f_tower.tower, &g_tower.tower)?,
    })
}

/// Faa di Bruno composition of raw derivative multi-tensors.
///
/// Component `n` of the result is the symmetrization of
/// `sum_{lambda |- n} c(lambda) d^{|lambda|} f . (d^{l_1} g (x) ... (x) d^{l_r} g)`
/// where `c(lambda)` counts the set partitions of shape `lambda`.
pub(crate) fn compose_tensors(f: &MultiTensor, g: &MultiTensor) -> Result<MultiTensor> {
    if f.dim_in() != g.dim_out() {
        return Err(Error::DimensionMismatch {
            context: "tower composition",
            expected: f.dim_in(),
            got: g.dim_out(),
        });
    }
    let order = f.order().min(g.order());
    let (d, p, m) = (f.dim_out(), f.dim_in(), g.dim_in());
    let mut out = MultiTensor::zero(Shape::new(d, m, order)?);
    out.component_mut(0).copy_from_slice(f.value());
    for n in 1..=order {
        for lambda in partitions(n) {
            let coeff = lambda.set_partition_count();
            let mut t = f.component(lambda.len())?.to_vec();
            let mut rest = p.pow(lambda.len() as u32);
            let mut done = 1usize;
            for &l in lambda.parts() {
                rest /= p;
                let gl = g.component(l)?;
                let ml = m.pow(l as u32);
                t = contract_front(&t, d, p, rest, done, gl, ml);
                done *= ml;
            }
            for (x, y) in out.component_mut(n).iter_mut().zip(t) {
                *x += coeff * y;
            }
        }
        symmetrize_slots(out.component_mut(n), m, n);
    }
    Ok(out)
}

/// Contracts the first `p`-slot of `t` (layout `[d][p][rest][done]`) with
/// `g` (layout `[p][width]`), appending the new slots last:
/// result layout `[d][rest][done][width]`.
fn contract_front(
    t: &[f64],
    d: usize,
    p: usize,
    rest: usize,
    done: usize,
    g: &[f64],
    width: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; d * rest * done * width];
    for i in 0..d {
        for beta in 0..p {
            let grow = &g[beta * width..(beta + 1) * width];
            for r in 0..rest {
                for a in 0..done {
                    let val = t[((i * p + beta) * rest + r) * done + a];
                    if val == 0.0 {
                        continue;
                    }
                    let base = ((i * rest + r) * done + a) * width;
                    for (o, gv) in out[base..base + width].iter_mut().zip(grow) {
                        *o += val * gv;
                    }
                }
            }
        }
    }
    out
}

/// Composes two tensor series, `outer` expanded at the value of `inner`.
pub fn compose_series(outer: &TensorSeries, inner: &TensorSeries) -> Result<TensorSeries> {
    let t = compose_towers(&outer.to_tower(), &inner.to_tower())?;
    Ok(TensorSeries::from_tower(&t))
}

fn check_chain(programs: &[Program]) -> Result<()> {
    if programs.is_empty() {
        return Err(Error::EmptyChain);
    }
    for w in programs.windows(2) {
        if w[1].dim_in() != w[0].dim_out() {
            return Err(Error::DimensionMismatch {
                context: "program chain",
                expected: w[0].dim_out(),
                got: w[1].dim_in(),
            });
        }
    }
    Ok(())
}

/// Tower of `P_n . ... . P_1` accumulated from the input side.
pub fn forward_chain(programs: &[Program], v0: &[f64], k: usize) -> Result<DerivativeTower> {
    check_chain(programs)?;
    let mut acc = programs[0].tau(v0, k)?;
    for p in &programs[1..] {
        let next = p.tau(acc.value(), k)?;
        acc = compose_towers(&next, &acc)?;
    }
    Ok(acc)
}

/// Tower of `P_n . ... . P_1` accumulated from the output side.
///
/// A forward sweep records the intermediate points; the towers are then
/// folded right to left, `T_n . (T_{n-1} . (...))` becoming
/// `((T_n . T_{n-1}) . ...) . T_1`.
pub fn reverse_chain(programs: &[Program], v0: &[f64], k: usize) -> Result<DerivativeTower> {
    check_chain(programs)?;
    let mut points = vec![v0.to_vec()];
    for p in &programs[..programs.len() - 1] {
        let next = p.eval(points.last().unwrap())?;
        points.push(next);
    }
    let towers = programs
        .iter()
        .zip(&points)
        .map(|(p, x)| p.tau(x, k))
        .collect::<Result<Vec<_>>>()?;
    let mut iter = towers.into_iter().rev();
    let mut acc = iter.next().unwrap();
    for t in iter {
        acc = compose_towers(&acc, &t)?;
    }
    Ok(acc)
}

/// Order reduction: the tower of `v -> dP(v)` from the tower of `P`.
///
/// Component `j` of the result is component `j + 1` of `t`, with its first
/// dual slot folded into the output index. In the row-major layout this is
/// a relabelling of the same entries.
pub fn order_reduce(t: &DerivativeTower) -> Result<DerivativeTower> {
    Ok(DerivativeTower {
        at: t.at.clone(),
        tower: reduce_tensor_order(&t.tower)?,
    })
}

pub(crate) fn reduce_tensor_order(t: &MultiTensor) -> Result<MultiTensor> {
    if t.order() == 0 {
        return Err(Error::NothingToReduce);
    }
    let components = t.components()[1..].to_vec();
    MultiTensor::from_components(t.dim_out() * t.dim_in(), t.dim_in(), components)
}

/// The `k`-th derivative of `p` as a program in its own right.
///
/// Its tower of order `n` is obtained from the order `n + k` tower of `p`
/// by `k` order reductions.
pub fn differentiable_derivative(p: &Program, k: usize) -> Result<Program> {
    Program::extracted_derivative(p.clone(), k)
}
