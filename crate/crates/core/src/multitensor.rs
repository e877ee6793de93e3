//! Dense multi-tensors: a value vector together with tensors of orders `1..=k`.
//!
//! A [`MultiTensor`] of shape `(dim_out, dim_in, k)` holds `k + 1` components.
//! Component `j` has `dim_out * dim_in^j` entries stored row-major, so that the
//! entry `(i; a_1, ..., a_j)` lives at `i * dim_in^j + sum_m a_m * dim_in^(j - m)`.
//! Component 0 is the value vector, component `j` is a linear map from
//! `j` copies of the input space into the output space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions and truncation order of a [`MultiTensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub dim_out: usize,
    pub dim_in: usize,
    pub order: usize,
}

impl Shape {
    pub fn new(dim_out: usize, dim_in: usize, order: usize) -> Result<Self> {
        if dim_out == 0 || dim_in == 0 {
            return Err(Error::InvalidShape(format!(
                "dimensions must be positive (dim_out={dim_out}, dim_in={dim_in})"
            )));
        }
        Ok(Shape {
            dim_out,
            dim_in,
            order,
        })
    }

    /// Number of entries of component `j`.
    pub fn component_len(&self, j: usize) -> usize {
        self.dim_out * self.dim_in.pow(j as u32)
    }

    pub fn with_order(self, order: usize) -> Self {
        Shape { order, ..self }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(dim_out={}, dim_in={}, order={})",
            self.dim_out, self.dim_in, self.order
        )
    }
}

/// A bilinear map `V x V -> V` used by the algebra product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BilinearMap {
    /// `(a * b)_i = a_i * b_i`; both factors must have the same dimension.
    Componentwise,
    /// `(a * b)_i = sum_{p,q} coeffs[i][p][q] a_p b_q`, stored row-major.
    Dense {
        out: usize,
        left: usize,
        right: usize,
        coeffs: Vec<f64>,
    },
}

impl BilinearMap {
    pub fn dense(out: usize, left: usize, right: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != out * left * right {
            return Err(Error::DimensionMismatch {
                context: "bilinear map coefficients",
                expected: out * left * right,
                got: coeffs.len(),
            });
        }
        Ok(BilinearMap::Dense {
            out,
            left,
            right,
            coeffs,
        })
    }

    /// Output dimension for factors of the given dimensions.
    pub fn output_dim(&self, left: usize, right: usize) -> Result<usize> {
        match self {
            BilinearMap::Componentwise => {
                if left != right {
                    return Err(Error::DimensionMismatch {
                        context: "componentwise product",
                        expected: left,
                        got: right,
                    });
                }
                Ok(left)
            }
            BilinearMap::Dense {
                out,
                left: l,
                right: r,
                ..
            } => {
                if *l != left {
                    return Err(Error::DimensionMismatch {
                        context: "bilinear map left factor",
                        expected: *l,
                        got: left,
                    });
                }
                if *r != right {
                    return Err(Error::DimensionMismatch {
                        context: "bilinear map right factor",
                        expected: *r,
                        got: right,
                    });
                }
                Ok(*out)
            }
        }
    }

    /// Applies the map to two vectors whose dimensions were already checked.
    pub fn apply(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        match self {
            BilinearMap::Componentwise => a.iter().zip(b).map(|(x, y)| x * y).collect(),
            BilinearMap::Dense {
                out,
                left,
                right,
                coeffs,
            } => (0..*out)
                .map(|i| {
                    let mut acc = 0.0;
                    for p in 0..*left {
                        let row = &coeffs[(i * left + p) * right..(i * left + p + 1) * right];
                        let dot: f64 = row.iter().zip(b).map(|(c, y)| c * y).sum();
                        acc += a[p] * dot;
                    }
                    acc
                })
                .collect(),
        }
    }
}

/// Result of [`MultiTensor::algebra_product`].
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraProduct {
    pub tensor: MultiTensor,
    /// True when orders above the requested maximum were discarded.
    pub truncated: bool,
}

/// Element of `V (x) T_k(V*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMultiTensor", into = "RawMultiTensor")]
pub struct MultiTensor {
    shape: Shape,
    components: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawMultiTensor {
    dim_out: usize,
    dim_in: usize,
    order: usize,
    components: Vec<Vec<f64>>,
}

impl From<MultiTensor> for RawMultiTensor {
    fn from(w: MultiTensor) -> Self {
        RawMultiTensor {
            dim_out: w.shape.dim_out,
            dim_in: w.shape.dim_in,
            order: w.shape.order,
            components: w.components,
        }
    }
}

impl TryFrom<RawMultiTensor> for MultiTensor {
    type Error = Error;

    fn try_from(raw: RawMultiTensor) -> Result<Self> {
        if raw.components.len() != raw.order + 1 {
            return Err(Error::InvalidShape(format!(
                "order {} needs {} components, found {}",
                raw.order,
                raw.order + 1,
                raw.components.len()
            )));
        }
        MultiTensor::from_components(raw.dim_out, raw.dim_in, raw.components)
    }
}

impl MultiTensor {
    pub fn zero(shape: Shape) -> Self {
        let components = (0..=shape.order)
            .map(|j| vec![0.0; shape.component_len(j)])
            .collect();
        MultiTensor { shape, components }
    }

    /// Builds a multi-tensor from its components; the order is `components.len() - 1`.
    pub fn from_components(
        dim_out: usize,
        dim_in: usize,
        components: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidShape("at least one component required".into()));
        }
        let shape = Shape::new(dim_out, dim_in, components.len() - 1)?;
        for (j, c) in components.iter().enumerate() {
            if c.len() != shape.component_len(j) {
                return Err(Error::InvalidShape(format!(
                    "component {j} has {} entries, expected {}",
                    c.len(),
                    shape.component_len(j)
                )));
            }
        }
        Ok(MultiTensor { shape, components })
    }

    /// Order-0 multi-tensor holding a value vector; `dim_in` is the dual dimension.
    pub fn constant(value: Vec<f64>, dim_in: usize) -> Result<Self> {
        let dim_out = value.len();
        Self::from_components(dim_out, dim_in, vec![value])
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order
    }

    pub fn dim_out(&self) -> usize {
        self.shape.dim_out
    }

    pub fn dim_in(&self) -> usize {
        self.shape.dim_in
    }

    pub fn component(&self, j: usize) -> Result<&[f64]> {
        self.components
            .get(j)
            .map(Vec::as_slice)
            .ok_or(Error::ComponentOutOfRange {
                index: j,
                order: self.shape.order,
            })
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn value(&self) -> &[f64] {
        &self.components[0]
    }

    pub(crate) fn component_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.components[j]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flatten().all(|x| x.is_finite())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape,
                right: other.shape,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |x, y| x + y))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |x, y| x - y))
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_components(|_, x| c * x)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
            .collect();
        MultiTensor {
            shape: self.shape,
            components,
        }
    }

    /// Applies `f(j, entry)` to every entry of every component `j`.
    pub fn map_components(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(j, c)| c.iter().map(|x| f(j, *x)).collect())
            .collect();
        MultiTensor {
            shape: self.shape,
            components,
        }
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.shape.dim_in {
            return Err(Error::DimensionMismatch {
                context: "contraction vector",
                expected: self.shape.dim_in,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Contracts every component of order `j >= 1` once (last slot) with `v`.
    ///
    /// The contracted order-1 component is added into the value; an order-0
    /// tensor is returned unchanged (`u . v = u`).
    pub fn contract_once(&self, v: &[f64]) -> Result<Self> {
        self.check_vector(v)?;
        if self.shape.order == 0 {
            return Ok(self.clone());
        }
        let mut components: Vec<Vec<f64>> = self.components[1..]
            .iter()
            .map(|c| contract_last(c, self.shape.dim_in, v))
            .collect();
        for (x, w0) in components[0].iter_mut().zip(&self.components[0]) {
            *x += w0;
        }
        Ok(MultiTensor {
            shape: self.shape.with_order(self.shape.order - 1),
            components,
        })
    }

    /// Full contraction `w_j . v^{(x) j}` of component `j`.
    pub fn contract_component(&self, j: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(v)?;
        let mut c = self.component(j)?.to_vec();
        for _ in 0..j {
            c = contract_last(&c, self.shape.dim_in, v);
        }
        Ok(c)
    }

    /// Evaluates the polynomial map `v -> w_0 + w_1.v + ... + w_k.v^{(x) k}`.
    pub fn eval_polynomial(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_vector(v)?;
        let mut out = vec![0.0; self.shape.dim_out];
        for j in 0..=self.shape.order {
            let term = self.contract_component(j, v)?;
            for (o, t) in out.iter_mut().zip(term) {
                *o += t;
            }
        }
        Ok(out)
    }

    /// Bilinear algebra product, slots of `self` first, truncated at `max_order`.
    pub fn algebra_product(
        &self,
        other: &Self,
        bilinear: &BilinearMap,
        max_order: usize,
    ) -> Result<AlgebraProduct> {
        if self.shape.dim_in != other.shape.dim_in {
            return Err(Error::DimensionMismatch {
                context: "algebra product dual dimension",
                expected: self.shape.dim_in,
                got: other.shape.dim_in,
            });
        }
        let dim_out = bilinear.output_dim(self.shape.dim_out, other.shape.dim_out)?;
        let full_order = self.shape.order + other.shape.order;
        let order = full_order.min(max_order);
        let shape = Shape::new(dim_out, self.shape.dim_in, order)?;
        let mut result = MultiTensor::zero(shape);
        for r in 0..=self.shape.order.min(order) {
            for s in 0..=other.shape.order.min(order - r) {
                let block = outer_bilinear(
                    &self.components[r],
                    self.shape.dim_out,
                    &other.components[s],
                    other.shape.dim_out,
                    self.shape.dim_in,
                    r,
                    s,
                    bilinear,
                    dim_out,
                );
                for (x, y) in result.components[r + s].iter_mut().zip(block) {
                    *x += y;
                }
            }
        }
        Ok(AlgebraProduct {
            tensor: result,
            truncated: full_order > order,
        })
    }

    /// Averages every component over permutations of its dual slots.
    pub fn symmetrize(&self) -> Self {
        let mut out = self.clone();
        for j in 2..=self.shape.order {
            symmetrize_slots(&mut out.components[j], self.shape.dim_in, j);
        }
        out
    }

    /// True when every component is symmetric in its dual slots, up to
    /// `tol * max(1, |a|, |b|)` per entry pair.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (2..=self.shape.order).all(|j| {
            let canon = canonical_indices(self.shape.dim_in, j);
            let block = canon.len();
            self.components[j].chunks(block).all(|c| {
                c.iter().zip(&canon).all(|(x, &k)| {
                    let y = c[k];
                    (x - y).abs() <= tol * 1f64.max(x.abs()).max(y.abs())
                })
            })
        })
    }

    /// Drops components above `new_order`; a larger order pads with zeros.
    pub fn truncate(&self, new_order: usize) -> Self {
        let shape = self.shape.with_order(new_order);
        let components = (0..=new_order)
            .map(|j| {
                self.components
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| vec![0.0; shape.component_len(j)])
            })
            .collect();
        MultiTensor { shape, components }
    }

    /// Largest absolute entry difference against another tensor of equal shape.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

/// Contracts the last slot of a row-major tensor with `v`.
pub(crate) fn contract_last(c: &[f64], dim_in: usize, v: &[f64]) -> Vec<f64> {
    c.chunks(dim_in)
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn outer_bilinear(
    a: &[f64],
    a_out: usize,
    b: &[f64],
    b_out: usize,
    dim_in: usize,
    r: usize,
    s: usize,
    bilinear: &BilinearMap,
    dim_out: usize,
) -> Vec<f64> {
    let na = dim_in.pow(r as u32);
    let nb = dim_in.pow(s as u32);
    let mut out = vec![0.0; dim_out * na * nb];
    let mut av = vec![0.0; a_out];
    let mut bv = vec![0.0; b_out];
    for alpha in 0..na {
        for (p, x) in av.iter_mut().enumerate() {
            *x = a[p * na + alpha];
        }
        for beta in 0..nb {
            for (q, y) in bv.iter_mut().enumerate() {
                *y = b[q * nb + beta];
            }
            let prod = bilinear.apply(&av, &bv);
            for (i, z) in prod.into_iter().enumerate() {
                out[(i * na + alpha) * nb + beta] = z;
            }
        }
    }
    out
}

/// For each flat multi-index of `order` slots over `dim` values, the flat index
/// of its sorted rearrangement.
pub(crate) fn canonical_indices(dim: usize, order: usize) -> Vec<usize> {
    let n = dim.pow(order as u32);
    let mut digits = vec![0usize; order];
    (0..n)
        .map(|flat| {
            let mut rest = flat;
            for d in digits.iter_mut().rev() {
                *d = rest % dim;
                rest /= dim;
            }
            digits.sort_unstable();
            digits.iter().fold(0, |acc, d| acc * dim + d)
        })
        .collect()
}

/// Replaces each entry of every output block by the mean over its orbit
/// under slot permutations.
pub(crate) fn symmetrize_slots(data: &mut [f64], dim_in: usize, order: usize) {
    if order < 2 {
        return;
    }
    let canon = canonical_indices(dim_in, order);
    let block = canon.len();
    let mut counts = vec![0usize; block];
    for &k in &canon {
        counts[k] += 1;
    }
    let mut deviation = vec![0.0; block];
    for chunk in data.chunks_mut(block) {
        deviation.iter_mut().for_each(|d| *d = 0.0);
        // The canonical entry is the pivot, so constant orbits stay bit-identical.
        for (flat, &k) in canon.iter().enumerate() {
            deviation[k] += chunk[flat] - chunk[k];
        }
        let means: Vec<f64> = (0..block)
            .map(|k| {
                if counts[k] == 0 {
                    0.0
                } else {
                    chunk[k] + deviation[k] / counts[k] as f64
                }
            })
            .collect();
        for (flat, &k) in canon.iter().enumerate() {
            chunk[flat] = means[k];
        }
    }
}
