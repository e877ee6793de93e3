//! Programs as expression DAGs over analytic building blocks, and the
//! operator `tau_k` returning a program's value together with all of its
//! derivatives up to order `k`.

mod primitive;

use std::sync::Arc;

pub use primitive::{primitive_library, Primitive};

use crate::error::{Error, Result};
use crate::multitensor::{symmetrize_slots, BilinearMap, MultiTensor, Shape};
use crate::operators;

/// Input and output dimensions of a program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProgramSignature {
    pub dim_in: usize,
    pub dim_out: usize,
}

/// Node kinds of a program DAG.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Identity,
    Constant(Vec<f64>),
    /// `v -> A v + b`, `A` stored row-major with `rows = offset.len()`.
    Affine {
        matrix: Vec<f64>,
        offset: Vec<f64>,
    },
    /// `v -> sum_j W_j . v^{(x) j}`.
    ContractionLayer {
        weights: MultiTensor,
        symmetric: MultiTensor,
    },
    Elementwise(Primitive),
    Sum(Vec<Program>),
    Product(Vec<Program>, BilinearMap),
    /// `outer(inner(v))`.
    Compose {
        outer: Program,
        inner: Program,
    },
    /// The `order`-th derivative of `inner`, flattened row-major.
    ExtractedDerivative {
        inner: Program,
        order: usize,
    },
}

/// An immutable, cheaply clonable program `V -> V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    node: Arc<Node>,
    sig: ProgramSignature,
}

/// Value and derivatives of a program at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTower {
    pub at: Vec<f64>,
    pub tower: MultiTensor,
}

impl DerivativeTower {
    pub fn order(&self) -> usize {
        self.tower.order()
    }

    pub fn value(&self) -> &[f64] {
        self.tower.value()
    }
}

fn dim_check(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

fn within(segment: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Domain { path, message } => Error::Domain {
            path: format!("{segment}{path}"),
            message,
        },
        other => other,
    }
}

impl Program {
    fn new(node: Node, dim_in: usize, dim_out: usize) -> Self {
        Program {
            node: Arc::new(node),
            sig: ProgramSignature { dim_in, dim_out },
        }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Shape::new(dim, dim, 0)?;
        Ok(Self::new(Node::Identity, dim, dim))
    }

    pub fn constant(value: Vec<f64>, dim_in: usize) -> Result<Self> {
        Shape::new(value.len(), dim_in, 0)?;
        let dim_out = value.len();
        Ok(Self::new(Node::Constant(value), dim_in, dim_out))
    }

    /// Affine map from a row-major matrix with `offset.len()` rows.
    pub fn affine(matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let rows = offset.len();
        if rows == 0 || matrix.is_empty() || !matrix.len().is_multiple_of(rows) {
            return Err(Error::InvalidShape(format!(
                "affine map with {} matrix entries and {rows} rows",
                matrix.len()
            )));
        }
        let cols = matrix.len() / rows;
        Ok(Self::new(Node::Affine { matrix, offset }, cols, rows))
    }

    pub fn contraction_layer(weights: MultiTensor) -> Result<Self> {
        let symmetric = weights.symmetrize();
        let (dim_in, dim_out) = (weights.dim_in(), weights.dim_out());
        Ok(Self::new(
            Node::ContractionLayer { weights, symmetric },
            dim_in,
            dim_out,
        ))
    }

    pub fn elementwise(primitive: Primitive, dim: usize) -> Result<Self> {
        Shape::new(dim, dim, 0)?;
        Ok(Self::new(Node::Elementwise(primitive), dim, dim))
    }

    pub fn sum(children: Vec<Program>) -> Result<Self> {
        let first = children
            .first()
            .ok_or_else(|| Error::Invalid("sum of no programs".into()))?
            .sig;
        for c in &children[1..] {
            dim_check("sum operand input", first.dim_in, c.sig.dim_in)?;
            dim_check("sum operand output", first.dim_out, c.sig.dim_out)?;
        }
        Ok(Self::new(Node::Sum(children), first.dim_in, first.dim_out))
    }

    pub fn product(children: Vec<Program>, bilinear: BilinearMap) -> Result<Self> {
        let first = children
            .first()
            .ok_or_else(|| Error::Invalid("product of no programs".into()))?
            .sig;
        let mut dim_out = first.dim_out;
        for c in &children[1..] {
            dim_check("product operand input", first.dim_in, c.sig.dim_in)?;
            dim_out = bilinear.output_dim(dim_out, c.sig.dim_out)?;
        }
        Ok(Self::new(
            Node::Product(children, bilinear),
            first.dim_in,
            dim_out,
        ))
    }

    /// Componentwise product of two programs.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Program, b: Program) -> Result<Self> {
        Self::product(vec![a, b], BilinearMap::Componentwise)
    }

    /// `outer . inner`.
    pub fn compose(outer: Program, inner: Program) -> Result<Self> {
        dim_check("composition", outer.sig.dim_in, inner.sig.dim_out)?;
        let (dim_in, dim_out) = (inner.sig.dim_in, outer.sig.dim_out);
        Ok(Self::new(Node::Compose { outer, inner }, dim_in, dim_out))
    }

    pub(crate) fn extracted_derivative(inner: Program, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Invalid("derivative order must be at least 1".into()));
        }
        let dim_in = inner.sig.dim_in;
        let dim_out = inner.sig.dim_out * dim_in.pow(order as u32);
        Ok(Self::new(
            Node::ExtractedDerivative { inner, order },
            dim_in,
            dim_out,
        ))
    }

    pub fn signature(&self) -> ProgramSignature {
        self.sig
    }

    pub fn dim_in(&self) -> usize {
        self.sig.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.sig.dim_out
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// Evaluates the program at `v`.
    pub fn eval(&self, v: &[f64]) -> Result<Vec<f64>> {
        dim_check("program input", self.sig.dim_in, v.len())?;
        self.eval_unchecked(v)
    }

    fn eval_unchecked(&self, v: &[f64]) -> Result<Vec<f64>> {
        match &*self.node {
            Node::Identity => Ok(v.to_vec()),
            Node::Constant(c) => Ok(c.clone()),
            Node::Affine { matrix, offset } => Ok(affine_apply(matrix, offset, v)),
            Node::ContractionLayer { weights, .. } => weights.eval_polynomial(v),
            Node::Elementwise(p) => v
                .iter()
                .map(|x| p.deriv_seq(0, *x))
                .collect::<std::result::Result<_, _>>()
                .map_err(|message| Error::Domain {
                    path: format!("/elem:{}", p.name()),
                    message,
                }),
            Node::Sum(children) => {
                let mut out = vec![0.0; self.sig.dim_out];
                for (i, c) in children.iter().enumerate() {
                    let y = c.eval_unchecked(v).map_err(within(&format!("/sum[{i}]")))?;
                    out.iter_mut().zip(y).for_each(|(o, y)| *o += y);
                }
                Ok(out)
            }
            Node::Product(children, bilinear) => {
                let mut acc = children[0]
                    .eval_unchecked(v)
                    .map_err(within("/prod[0]"))?;
                for (i, c) in children.iter().enumerate().skip(1) {
                    let y = c
                        .eval_unchecked(v)
                        .map_err(within(&format!("/prod[{i}]")))?;
                    acc = bilinear.apply(&acc, &y);
                }
                Ok(acc)
            }
            Node::Compose { outer, inner } => {
                let u = inner.eval_unchecked(v).map_err(within("/compose.inner"))?;
                outer.eval_unchecked(&u).map_err(within("/compose.outer"))
            }
            Node::ExtractedDerivative { inner, order } => {
                let t = inner.tau(v, *order).map_err(within("/deriv"))?;
                Ok(t.tower.component(*order)?.to_vec())
            }
        }
    }

    /// Value and derivatives of orders `0..=k` at `v`.
    pub fn tau(&self, v: &[f64], k: usize) -> Result<DerivativeTower> {
        dim_check("program input", self.sig.dim_in, v.len())?;
        let tower = self.tower(v, k)?;
        Ok(DerivativeTower {
            at: v.to_vec(),
            tower,
        })
    }

    fn shape(&self, k: usize) -> Shape {
        Shape {
            dim_out: self.sig.dim_out,
            dim_in: self.sig.dim_in,
            order: k,
        }
    }

    fn tower(&self, v: &[f64], k: usize) -> Result<MultiTensor> {
        let (n, m) = (self.sig.dim_out, self.sig.dim_in);
        let mut t = MultiTensor::zero(self.shape(k));
        match &*self.node {
            Node::Identity => {
                t.component_mut(0).copy_from_slice(v);
                if k >= 1 {
                    let c = t.component_mut(1);
                    for i in 0..n {
                        c[i * m + i] = 1.0;
                    }
                }
            }
            Node::Constant(c) => t.component_mut(0).copy_from_slice(c),
            Node::Affine { matrix, offset } => {
                t.component_mut(0)
                    .copy_from_slice(&affine_apply(matrix, offset, v));
                if k >= 1 {
                    t.component_mut(1).copy_from_slice(matrix);
                }
            }
            Node::ContractionLayer { symmetric, .. } => {
                // d^r (W_j . v^j) = j!/(j-r)! W_j . v^(j-r) for symmetric W_j.
                for j in 0..=symmetric.order() {
                    let mut c = symmetric.component(j)?.to_vec();
                    for r in (0..=j).rev() {
                        if r <= k {
                            let coeff: f64 = ((j - r + 1)..=j).map(|x| x as f64).product();
                            for (x, y) in t.component_mut(r).iter_mut().zip(&c) {
                                *x += coeff * y;
                            }
                        }
                        if r > 0 {
                            c = crate::multitensor::contract_last(&c, m, v);
                        }
                    }
                }
            }
            Node::Elementwise(p) => {
                for (i, x) in v.iter().enumerate() {
                    let d = p.derivatives(*x, k).map_err(|message| Error::Domain {
                        path: format!("/elem:{}", p.name()),
                        message,
                    })?;
                    for (j, dj) in d.into_iter().enumerate() {
                        let block = m.pow(j as u32);
                        let diag = (0..j).fold(0, |acc, _| acc * m + i);
                        t.component_mut(j)[i * block + diag] = dj;
                    }
                }
            }
            Node::Sum(children) => {
                for (i, c) in children.iter().enumerate() {
                    let ct = c.tower(v, k).map_err(within(&format!("/sum[{i}]")))?;
                    t = t.add(&ct)?;
                }
            }
            Node::Product(children, bilinear) => {
                let mut acc = children[0].tower(v, k).map_err(within("/prod[0]"))?;
                for (i, c) in children.iter().enumerate().skip(1) {
                    let ct = c.tower(v, k).map_err(within(&format!("/prod[{i}]")))?;
                    acc = leibniz(&acc, &ct, bilinear, k)?;
                }
                t = acc;
            }
            Node::Compose { outer, inner } => {
                let gt = inner.tower(v, k).map_err(within("/compose.inner"))?;
                let ft = outer
                    .tower(gt.value(), k)
                    .map_err(within("/compose.outer"))?;
                t = operators::compose_tensors(&ft, &gt)?;
            }
            Node::ExtractedDerivative { inner, order } => {
                let mut full = inner.tower(v, k + order).map_err(within("/deriv"))?;
                for _ in 0..*order {
                    full = operators::reduce_tensor_order(&full)?;
                }
                t = full;
            }
        }
        Ok(t)
    }
}

fn affine_apply(matrix: &[f64], offset: &[f64], v: &[f64]) -> Vec<f64> {
    matrix
        .chunks(v.len())
        .zip(offset)
        .map(|(row, b)| row.iter().zip(v).map(|(a, x)| a * x).sum::<f64>() + b)
        .collect()
}

/// General Leibniz rule `d^n (a * b) = sum_r C(n, r) sym(d^r a * d^(n-r) b)`.
fn leibniz(a: &MultiTensor, b: &MultiTensor, bilinear: &BilinearMap, k: usize) -> Result<MultiTensor> {
    let m = a.dim_in();
    let dim_out = bilinear.output_dim(a.dim_out(), b.dim_out())?;
    let mut t = MultiTensor::zero(Shape::new(dim_out, m, k)?);
    for n in 0..=k {
        let mut binom = 1.0;
        for r in 0..=n {
            let s = n - r;
            let (na, nb) = (m.pow(r as u32), m.pow(s as u32));
            let (ar, bs) = (a.component(r)?, b.component(s)?);
            let out = t.component_mut(n);
            let mut av = vec![0.0; a.dim_out()];
            let mut bv = vec![0.0; b.dim_out()];
            for alpha in 0..na {
                for (p, x) in av.iter_mut().enumerate() {
                    *x = ar[p * na + alpha];
                }
                for beta in 0..nb {
                    for (q, y) in bv.iter_mut().enumerate() {
                        *y = bs[q * nb + beta];
                    }
                    for (i, z) in bilinear.apply(&av, &bv).into_iter().enumerate() {
                        out[(i * na + alpha) * nb + beta] += binom * z;
                    }
                }
            }
            binom = binom * (n - r) as f64 / (r + 1) as f64;
        }
        symmetrize_slots(t.component_mut(n), m, n);
    }
    Ok(t)
}

/// A dense feedforward network `phi_k . W_k . ... . phi_0 . W_0` built from
/// contraction layers and elementwise activations.
pub fn tensor_network(layers: Vec<(MultiTensor, Primitive)>) -> Result<Program> {
    let mut net: Option<Program> = None;
    for (w, phi) in layers {
        let dim = w.dim_out();
        let layer = Program::compose(
            Program::elementwise(phi, dim)?,
            Program::contraction_layer(w)?,
        )?;
        net = Some(match net {
            None => layer,
            Some(prev) => Program::compose(layer, prev)?,
        });
    }
    net.ok_or_else(|| Error::Invalid("tensor network with no layers".into()))
}
