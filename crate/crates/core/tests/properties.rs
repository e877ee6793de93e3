mod common;

use common::*;
use num_rational::BigRational;
use opcalc_core::iterators::{fractional_iterate, iterating_velocity, schroeder};
use opcalc_core::operators::{partitions, shift};
use opcalc_core::reducesum::{
    bernoulli, brute_force_partial_sum, reduce_sum_apply, reduction_velocity,
    reduction_velocity_series, ShiftOp,
};
use opcalc_core::sexpr::{parse, Expr};
use opcalc_core::{tensor_network, MultiTensor, Primitive, Program};
use proptest::prelude::*;
use rand::Rng;

/// Partition counts p(n) from the pentagonal-number recurrence.
fn partition_counts(max: usize) -> Vec<usize> {
    let mut p = vec![0i64; max + 1];
    p[0] = 1;
    for n in 1..=max as i64 {
        let mut acc = 0i64;
        for k in 1.. {
            let g1 = k * (3 * k - 1) / 2;
            if g1 > n {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            acc += sign * p[(n - g1) as usize];
            let g2 = k * (3 * k + 1) / 2;
            if g2 <= n {
                acc += sign * p[(n - g2) as usize];
            }
        }
        p[n as usize] = acc;
    }
    p.into_iter().map(|x| x as usize).collect()
}

/// Bell numbers from the Bell triangle.
fn bell_numbers(max: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut row = vec![1.0];
    for _ in 0..max {
        let mut next = vec![*row.last().unwrap()];
        for x in &row {
            let y = next.last().unwrap() + x;
            next.push(y);
        }
        out.push(next[0]);
        row = next;
    }
    out
}

#[test]
fn partitions_match_independent_counts() {
    let counts = partition_counts(16);
    let bell = bell_numbers(16);
    for n in 0..=16 {
        let parts = partitions(n);
        assert_eq!(parts.len(), counts[n], "p({n})");
        for w in parts.windows(2) {
            assert!(w[0].parts() > w[1].parts());
        }
        for p in &parts {
            assert_eq!(p.total(), n);
            assert!(p.parts().windows(2).all(|w| w[0] >= w[1]));
        }
        let total: f64 = parts.iter().map(|p| p.set_partition_count()).sum();
        assert_eq!(total, bell[n], "Bell({n})");
    }
}

#[test]
fn tau_agrees_with_eval_and_is_symmetric() {
    let mut rng = rng(11);
    for _ in 0..100 {
        let (m, n) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let p = random_program(&mut rng, 4, m, n);
        let x = uniform_vec(&mut rng, m, 1.0);
        let t = p.tau(&x, 3).unwrap();
        assert!(max_rel_err(t.value(), &p.eval(&x).unwrap()) < 1e-13);
        assert!(t.tower.is_symmetric(1e-12));
        let u = uniform_vec(&mut rng, m, 1.0);
        assert!(jet_discrepancy(&t.tower, &p, &x, &u) < 1e-10);
    }
}

#[test]
fn lower_components_do_not_depend_on_requested_order() {
    let mut rng = rng(12);
    for _ in 0..50 {
        let p = random_program(&mut rng, 3, 2, 2);
        let x = uniform_vec(&mut rng, 2, 1.0);
        let lo = p.tau(&x, 2).unwrap().tower;
        let hi = p.tau(&x, 4).unwrap().tower;
        assert_eq!(hi.truncate(2), lo);
    }
}

#[test]
fn tensor_network_matches_feedforward_loop() {
    let mut rng = rng(13);
    let dims = [3, 2, 3, 1];
    let layers: Vec<(MultiTensor, Primitive)> = dims
        .windows(2)
        .map(|w| {
            let comps = vec![uniform_vec(&mut rng, w[1], 0.5), uniform_vec(&mut rng, w[1] * w[0], 1.0)];
            (MultiTensor::from_components(w[1], w[0], comps).unwrap(), Primitive::tanh())
        })
        .collect();
    let net = tensor_network(layers.clone()).unwrap();
    for _ in 0..20 {
        let x = uniform_vec(&mut rng, 3, 1.0);
        let mut h = x.clone();
        for (w, _) in &layers {
            let (b, a) = (w.component(0).unwrap(), w.component(1).unwrap());
            h = (0..w.dim_out())
                .map(|i| (b[i] + (0..h.len()).map(|j| a[i * h.len() + j] * h[j]).sum::<f64>()).tanh())
                .collect();
        }
        assert!(max_rel_err(&net.eval(&x).unwrap(), &h) < 1e-14);
        let t = net.tau(&x, 2).unwrap();
        assert!(max_rel_err(&fd_jacobian(&net, &x, 1e-6), t.tower.component(1).unwrap()) < 1e-7);
    }
}

#[test]
fn domain_errors_name_the_failing_node() {
    let p = Program::compose(
        Program::elementwise(Primitive::log(), 1).unwrap(),
        Program::affine(vec![1.0], vec![-1.0]).unwrap(),
    )
    .unwrap();
    let msg = p.tau(&[0.5], 2).unwrap_err().to_string();
    assert!(msg.contains("log"), "{msg}");
}

#[test]
fn reduce_sum_matches_literal_loop_on_polynomials() {
    let mut rng = rng(14);
    for _ in 0..100 {
        let (m, n) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let p = random_polynomial_program(&mut rng, m, n);
        let v0 = uniform_vec(&mut rng, m, 1.0);
        let v = uniform_vec(&mut rng, m, 0.5);
        let steps = rng.gen_range(0..=25);
        let closed = reduce_sum_apply(&p, &v0, &v, steps, 5).unwrap();
        let brute = brute_force_partial_sum(&p, &v0, &v, steps).unwrap();
        assert!(max_rel_err(&closed, &brute) < 1e-10, "{closed:?} vs {brute:?}");
    }
}

#[test]
fn velocity_polynomial_and_series_forms_agree() {
    let mut rng = rng(15);
    for _ in 0..40 {
        let p = random_polynomial_program(&mut rng, 2, 2);
        let v0 = uniform_vec(&mut rng, 2, 1.0);
        let v = uniform_vec(&mut rng, 2, 0.5);
        let n = rng.gen_range(0.0..8.0);
        for k in 1..=2 {
            let a = reduction_velocity(&p, &v0, &v, n, k, 5).unwrap();
            let b = reduction_velocity_series(&p, &v0, &v, n, k, 5).unwrap();
            assert!(max_rel_err(&a, &b) < 1e-9, "k={k}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn bernoulli_generating_function() {
    // sum_{i<=n} C(n+1, i) B_i = n + 1 for the B+ convention.
    for n in 0..20usize {
        let mut acc = BigRational::from_integer(0.into());
        let mut binom = BigRational::from_integer(1.into());
        for i in 0..=n {
            acc += &binom * bernoulli(i);
            binom *= BigRational::new(((n + 1 - i) as i64).into(), ((i + 1) as i64).into());
        }
        assert_eq!(acc, BigRational::from_integer(((n + 1) as i64).into()));
    }
}

#[test]
fn shift_operators_compose() {
    let p = Program::compose(
        Program::elementwise(Primitive::pow(3), 1).unwrap(),
        Program::affine(vec![1.0], vec![0.5]).unwrap(),
    )
    .unwrap();
    let a = ShiftOp::new(vec![0.2], vec![1.0], 0.75).unwrap();
    let b = ShiftOp::new(vec![0.2], vec![1.0], 1.5).unwrap();
    let ab = a.then(&b).unwrap();
    let x = ab.apply(&p, 3).unwrap();
    let direct = p.eval(&[0.2 + 2.25]).unwrap();
    assert!(max_rel_err(&x, &direct) < 1e-13);
    let y = a.rebased().apply(&p, 3).unwrap();
    assert!(max_rel_err(&y, &p.eval(&[0.95]).unwrap()) < 1e-14);
}

#[test]
fn series_converges_for_entire_primitives() {
    let p = Program::elementwise(Primitive::exp(), 1).unwrap();
    let s = shift(&p, &[0.0], 20).unwrap();
    let approx = s.eval(2.0, &[1.0]).unwrap()[0];
    assert!((approx - 2f64.exp()).abs() < 1e-9);
}

fn quadratic() -> Program {
    let w = MultiTensor::from_components(1, 1, vec![vec![0.0], vec![0.5], vec![0.25]]).unwrap();
    Program::contraction_layer(w).unwrap()
}

#[test]
fn eigen_residual_decays_at_truncation_order() {
    let p = quadratic();
    let k = 6;
    let s = schroeder(&p, 0.0, k).unwrap();
    let steps = [0.1, 0.05, 0.025, 0.0125];
    let res: Vec<f64> = steps
        .iter()
        .map(|v| (s.h(p.eval(&[*v]).unwrap()[0]) - s.lambda * s.h(*v)).abs())
        .collect();
    let slope = log_log_slope(&steps, &res);
    assert!((slope - (k + 1) as f64).abs() < 0.5, "slope {slope}");
}

#[test]
fn fractional_iterates_form_a_semigroup() {
    let p = quadratic();
    let s = schroeder(&p, 0.0, 30).unwrap();
    for (x, y) in [(0.3, 0.7), (1.5, -0.5), (0.25, 0.25)] {
        for v in [0.08, -0.05] {
            let a = fractional_iterate(&s, x, fractional_iterate(&s, y, v).unwrap()).unwrap();
            let b = fractional_iterate(&s, x + y, v).unwrap();
            assert!((a - b).abs() < 1e-9, "x={x} y={y} v={v}");
        }
    }
}

#[test]
fn velocity_chain_matches_finite_differences() {
    let p = quadratic();
    let s = schroeder(&p, 0.0, 30).unwrap();
    let v = 0.1;
    let h = 1e-5;
    for n in [0.0, 0.5, 1.0, 2.0] {
        let at = fractional_iterate(&s, n, v).unwrap();
        let psi = iterating_velocity(&s, at).unwrap();
        let fd = (fractional_iterate(&s, n + h, v).unwrap() - fractional_iterate(&s, n - h, v).unwrap())
            / (2.0 * h);
        assert!((psi - fd).abs() < 1e-6, "n={n}: {psi} vs {fd}");
    }
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Id),
        prop::sample::select(vec!["sin", "cos", "tanh", "exp", "sigmoid", "pow2"])
            .prop_map(|n| Expr::Elem(n.to_string())),
        (-5.0f64..5.0).prop_map(|c| Expr::Const {
            value: vec![c],
            dim_in: None
        }),
        ((-3.0f64..3.0), (-3.0f64..3.0)).prop_map(|(a, b)| Expr::Affine {
            matrix: vec![vec![a]],
            offset: vec![b],
        }),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sum(vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Prod(vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Compose(Box::new(a), Box::new(b))),
            (inner, 1usize..3).prop_map(|(a, k)| Expr::Deriv(Box::new(a), k)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sexpr_print_parse_round_trip(e in arb_expr()) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn symmetrize_is_a_projection(n in 1usize..=3, m in 1usize..=3, k in 0usize..=4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let comps = (0..=k).map(|j| uniform_vec(&mut r, n * m.pow(j as u32), 1.0)).collect();
        let t = MultiTensor::from_components(n, m, comps).unwrap();
        let s = t.symmetrize();
        prop_assert_eq!(s.symmetrize(), s.clone());
        let v = uniform_vec(&mut r, m, 1.0);
        // Contracting with v^{(x)j} cannot see the antisymmetric part.
        for j in 0..=k {
            let a = t.contract_component(j, &v).unwrap();
            let b = s.contract_component(j, &v).unwrap();
            prop_assert!(max_rel_err(&a, &b) < 1e-12);
        }
    }
}

#[test]
fn nested_derivatives_match_higher_order_extraction() {
    use opcalc_core::operators::differentiable_derivative;
    let mut rng = rng(16);
    for _ in 0..30 {
        let (m, n) = (rng.gen_range(1..=3), rng.gen_range(1..=2));
        let p = random_program(&mut rng, 3, m, n);
        let x = uniform_vec(&mut rng, m, 1.0);
        let twice = differentiable_derivative(&differentiable_derivative(&p, 1).unwrap(), 1).unwrap();
        let direct = differentiable_derivative(&p, 2).unwrap();
        let a = twice.tau(&x, 2).unwrap().tower;
        let b = direct.tau(&x, 2).unwrap().tower;
        assert_eq!(a.shape(), b.shape());
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-12 * b.max_abs().max(1.0));
        let hess = p.tau(&x, 2).unwrap().tower;
        assert_eq!(direct.eval(&x).unwrap(), hess.component(2).unwrap());
    }
}
