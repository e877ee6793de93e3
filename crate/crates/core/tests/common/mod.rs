//! Shared oracles for the integration suites: random programs, finite
//! differences and a univariate Taylor-jet interpreter that walks the
//! program DAG without touching the multi-tensor machinery.

#![allow(dead_code)]

use opcalc_core::{BilinearMap, MultiTensor, Node, Primitive, Program};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn smooth_primitive(rng: &mut ChaCha8Rng) -> Primitive {
    match rng.gen_range(0..6) {
        0 => Primitive::sin(),
        1 => Primitive::cos(),
        2 => Primitive::tanh(),
        3 => Primitive::sigmoid(),
        4 => Primitive::exp(),
        _ => Primitive::pow(2),
    }
}

fn random_layer(rng: &mut ChaCha8Rng, dim_in: usize, dim_out: usize, max_order: usize) -> MultiTensor {
    let order = rng.gen_range(1..=max_order);
    let comps = (0..=order)
        .map(|j| uniform_vec(rng, dim_out * dim_in.pow(j as u32), 0.8))
        .collect();
    MultiTensor::from_components(dim_out, dim_in, comps).unwrap()
}

fn leaf(rng: &mut ChaCha8Rng, dim_in: usize, dim_out: usize) -> Program {
    match rng.gen_range(0..4) {
        0 if dim_in == dim_out => Program::identity(dim_in).unwrap(),
        1 => Program::contraction_layer(random_layer(rng, dim_in, dim_out, 2)).unwrap(),
        _ => Program::affine(
            uniform_vec(rng, dim_in * dim_out, 1.0),
            uniform_vec(rng, dim_out, 0.5),
        )
        .unwrap(),
    }
}

/// Random smooth program of the given signature and depth at most `depth`.
pub fn random_program(rng: &mut ChaCha8Rng, depth: usize, dim_in: usize, dim_out: usize) -> Program {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, dim_in, dim_out);
    }
    match rng.gen_range(0..4) {
        0 => Program::compose(
            Program::elementwise(smooth_primitive(rng), dim_out).unwrap(),
            random_program(rng, depth - 1, dim_in, dim_out),
        )
        .unwrap(),
        1 => Program::sum(vec![
            random_program(rng, depth - 1, dim_in, dim_out),
            random_program(rng, depth - 1, dim_in, dim_out),
        ])
        .unwrap(),
        2 => {
            let bilinear = if rng.gen_bool(0.5) {
                BilinearMap::Componentwise
            } else {
                BilinearMap::dense(dim_out, dim_out, dim_out, uniform_vec(rng, dim_out.pow(3), 1.0))
                    .unwrap()
            };
            Program::product(
                vec![
                    random_program(rng, depth - 1, dim_in, dim_out),
                    random_program(rng, depth - 1, dim_in, dim_out),
                ],
                bilinear,
            )
            .unwrap()
        }
        _ => {
            let mid = rng.gen_range(1..=3);
            Program::compose(
                random_program(rng, depth - 1, mid, dim_out),
                random_program(rng, depth - 1, dim_in, mid),
            )
            .unwrap()
        }
    }
}

/// Random program whose restriction to any line is a polynomial.
pub fn random_polynomial_program(rng: &mut ChaCha8Rng, dim_in: usize, dim_out: usize) -> Program {
    match rng.gen_range(0..3) {
        0 => Program::contraction_layer(random_layer(rng, dim_in, dim_out, 3)).unwrap(),
        1 => Program::mul(
            leaf(rng, dim_in, dim_out),
            Program::affine(
                uniform_vec(rng, dim_in * dim_out, 1.0),
                uniform_vec(rng, dim_out, 1.0),
            )
            .unwrap(),
        )
        .unwrap(),
        _ => Program::compose(
            Program::elementwise(Primitive::pow(rng.gen_range(0..=3)), dim_out).unwrap(),
            Program::affine(
                uniform_vec(rng, dim_in * dim_out, 1.0),
                uniform_vec(rng, dim_out, 1.0),
            )
            .unwrap(),
        )
        .unwrap(),
    }
}

pub fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

/// Central-difference Jacobian, row-major `[out][in]`.
pub fn fd_jacobian(p: &Program, x: &[f64], h: f64) -> Vec<f64> {
    let (n, m) = (p.dim_out(), p.dim_in());
    let mut jac = vec![0.0; n * m];
    for a in 0..m {
        let mut e = vec![0.0; m];
        e[a] = 1.0;
        let fp = p.eval(&axpy(x, h, &e)).unwrap();
        let fm = p.eval(&axpy(x, -h, &e)).unwrap();
        for i in 0..n {
            jac[i * m + a] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Second-order central-difference Hessian, row-major `[out][in][in]`.
pub fn fd_hessian(p: &Program, x: &[f64], h: f64) -> Vec<f64> {
    let (n, m) = (p.dim_out(), p.dim_in());
    let mut hess = vec![0.0; n * m * m];
    for a in 0..m {
        for b in 0..m {
            let mut d = vec![0.0; m];
            let eval = |sa: f64, sb: f64, d: &mut Vec<f64>| {
                d.iter_mut().for_each(|x| *x = 0.0);
                d[a] += sa * h;
                d[b] += sb * h;
                p.eval(&axpy(x, 1.0, d)).unwrap()
            };
            let pp = eval(1.0, 1.0, &mut d);
            let pm = eval(1.0, -1.0, &mut d);
            let mp = eval(-1.0, 1.0, &mut d);
            let mm = eval(-1.0, -1.0, &mut d);
            for i in 0..n {
                hess[(i * m + a) * m + b] = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h);
            }
        }
    }
    hess
}

/// `max |a - b| / max(1, |b|)`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Univariate Taylor jets: series in t with coefficients c_n = D^n f[u^n] / n!.

type Jet = Vec<f64>;

fn jet_mul(a: &[f64], b: &[f64]) -> Jet {
    let k = a.len();
    let mut out = vec![0.0; k];
    for i in 0..k {
        for j in 0..k - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn jet_primitive(p: &Primitive, x: &[f64]) -> Jet {
    let k = x.len() - 1;
    let d = p.derivatives(x[0], k).unwrap();
    let mut delta = x.to_vec();
    delta[0] = 0.0;
    let mut power = vec![0.0; k + 1];
    power[0] = 1.0;
    let mut out = vec![0.0; k + 1];
    let mut fact = 1.0;
    for (j, dj) in d.iter().enumerate() {
        if j > 0 {
            fact *= j as f64;
            power = jet_mul(&power, &delta);
        }
        for (o, pw) in out.iter_mut().zip(&power) {
            *o += dj / fact * pw;
        }
    }
    out
}

fn jet_bilinear(b: &BilinearMap, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
    let k = x[0].len();
    match b {
        BilinearMap::Componentwise => x.iter().zip(y).map(|(a, b)| jet_mul(a, b)).collect(),
        BilinearMap::Dense {
            out,
            left,
            right,
            coeffs,
        } => (0..*out)
            .map(|i| {
                let mut acc = vec![0.0; k];
                for p in 0..*left {
                    for q in 0..*right {
                        let c = coeffs[(i * left + p) * right + q];
                        for (a, z) in acc.iter_mut().zip(jet_mul(&x[p], &y[q])) {
                            *a += c * z;
                        }
                    }
                }
                acc
            })
            .collect(),
    }
}

/// Evaluates `p` on a vector of univariate jets.
pub fn jet_eval(p: &Program, x: &[Jet]) -> Vec<Jet> {
    let k = x[0].len();
    match p.node() {
        Node::Identity => x.to_vec(),
        Node::Constant(c) => c
            .iter()
            .map(|v| {
                let mut j = vec![0.0; k];
                j[0] = *v;
                j
            })
            .collect(),
        Node::Affine { matrix, offset } => offset
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let mut j = vec![0.0; k];
                j[0] = *b;
                for (a, xa) in x.iter().enumerate() {
                    let w = matrix[i * x.len() + a];
                    for (o, v) in j.iter_mut().zip(xa) {
                        *o += w * v;
                    }
                }
                j
            })
            .collect(),
        Node::ContractionLayer { weights, .. } => {
            let m = weights.dim_in();
            let mut out = vec![vec![0.0; k]; weights.dim_out()];
            for j in 0..=weights.order() {
                let comp = weights.component(j).unwrap();
                let block = m.pow(j as u32);
                for alpha in 0..block {
                    let mut term = vec![0.0; k];
                    term[0] = 1.0;
                    let mut rest = alpha;
                    for _ in 0..j {
                        term = jet_mul(&term, &x[rest % m]);
                        rest /= m;
                    }
                    for (i, o) in out.iter_mut().enumerate() {
                        let w = comp[i * block + alpha];
                        for (a, t) in o.iter_mut().zip(&term) {
                            *a += w * t;
                        }
                    }
                }
            }
            out
        }
        Node::Elementwise(prim) => x.iter().map(|xi| jet_primitive(prim, xi)).collect(),
        Node::Sum(children) => {
            let mut out = jet_eval(&children[0], x);
            for c in &children[1..] {
                for (o, y) in out.iter_mut().zip(jet_eval(c, x)) {
                    o.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                }
            }
            out
        }
        Node::Product(children, b) => {
            let mut acc = jet_eval(&children[0], x);
            for c in &children[1..] {
                acc = jet_bilinear(b, &acc, &jet_eval(c, x));
            }
            acc
        }
        Node::Compose { outer, inner } => jet_eval(outer, &jet_eval(inner, x)),
        Node::ExtractedDerivative { .. } => panic!("jet oracle does not model extracted derivatives"),
    }
}

/// Normalized Taylor coefficients of `t -> p(v0 + t u)` up to order `k`,
/// indexed `[n][output]`.
pub fn directional_jet(p: &Program, v0: &[f64], u: &[f64], k: usize) -> Vec<Vec<f64>> {
    let x: Vec<Jet> = v0
        .iter()
        .zip(u)
        .map(|(a, b)| {
            let mut j = vec![0.0; k + 1];
            j[0] = *a;
            if k >= 1 {
                j[1] = *b;
            }
            j
        })
        .collect();
    let y = jet_eval(p, &x);
    (0..=k).map(|n| y.iter().map(|yi| yi[n]).collect()).collect()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Largest relative deviation between `tower` contracted along `u` and
/// the directional jet oracle.
pub fn jet_discrepancy(tower: &MultiTensor, p: &Program, v0: &[f64], u: &[f64]) -> f64 {
    let k = tower.order();
    let jet = directional_jet(p, v0, u, k);
    (0..=k)
        .map(|n| {
            let t: Vec<f64> = tower
                .contract_component(n, u)
                .unwrap()
                .iter()
                .map(|x| x / factorial(n))
                .collect();
            max_rel_err(&t, &jet[n])
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
