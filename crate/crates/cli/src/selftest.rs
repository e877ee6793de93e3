//! Quick oracle checks runnable from the installed binary.

use opcalc_core::iterators::{find_fixed_point, fractional_iterate, schroeder};
use opcalc_core::operators::{compose_towers, differentiable_derivative, forward_chain, reverse_chain, shift};
use opcalc_core::reducesum::reduce_sum_closed_form;
use opcalc_core::sexpr::parse_program;
use opcalc_core::{MultiTensor, Primitive, Program};

use crate::{Failure, Outcome};

type Check = Result<String, String>;
type Entry = (&'static str, fn() -> Check);

fn prog(text: &str) -> Program {
    parse_program(text).expect("built-in selftest program")
}

fn within(worst: f64, tol: f64) -> Check {
    let line = format!("worst {worst:.2e}, tol {tol:.0e}");
    if worst <= tol {
        Ok(line)
    } else {
        Err(line)
    }
}

fn exp_tower() -> Check {
    let t = prog("(elem exp)").tau(&[0.0], 6).map_err(|e| e.to_string())?;
    let worst = t
        .tower
        .components()
        .iter()
        .map(|c| (c[0] - 1.0).abs())
        .fold(0.0, f64::max);
    within(worst, 0.0)
}

fn finite_differences() -> Check {
    let p = prog("(compose (elem tanh) (sum (affine [[0.7,-0.4],[0.2,0.9]] [0.1,-0.3]) (prod (elem sin) (elem cos))))");
    let x = [0.3, -0.6];
    let t = p.tau(&x, 2).map_err(|e| e.to_string())?;
    let h = 1e-4;
    let mut worst = 0.0f64;
    for a in 0..2 {
        for b in 0..2 {
            let at = |sa: f64, sb: f64| {
                let mut y = x;
                y[a] += sa * h;
                y[b] += sb * h;
                p.eval(&y).unwrap()
            };
            let (pp, pm, mp, mm) = (at(1.0, 1.0), at(1.0, -1.0), at(-1.0, 1.0), at(-1.0, -1.0));
            for i in 0..2 {
                let fd = (pp[i] - pm[i] - mp[i] + mm[i]) / (4.0 * h * h);
                let exact = t.tower.component(2).unwrap()[(i * 2 + a) * 2 + b];
                worst = worst.max((fd - exact).abs() / exact.abs().max(1.0));
            }
        }
    }
    within(worst, 1e-4)
}

fn second_order_chain_rule() -> Check {
    // (sin . x^2)'' = cos(x^2) 2 + (-sin(x^2)) (2x)^2
    let x: f64 = 0.7;
    let g = prog("(elem pow2)");
    let f = prog("(elem sin)");
    let gt = g.tau(&[x], 2).map_err(|e| e.to_string())?;
    let ft = f.tau(gt.value(), 2).map_err(|e| e.to_string())?;
    let d2 = compose_towers(&ft, &gt).map_err(|e| e.to_string())?.tower.component(2).unwrap()[0];
    let y = x * x;
    within((d2 - (2.0 * y.cos() - y.sin() * 4.0 * y)).abs(), 1e-12)
}

fn forward_reverse() -> Check {
    let chain = [
        prog("(affine [[1,0.5],[-0.3,0.8]] [0.1,0.2])"),
        prog("(compose (elem tanh) (affine [[1,0],[0,1]] [0,0]))"),
        prog("(prod (affine [[1,0],[0,1]] [0,0]) (compose (elem sin) (affine [[1,0],[0,1]] [0,0])))"),
        prog("(affine [[0.4,-1.1]] [0.5])"),
    ];
    let v0 = [0.2, -0.4];
    let a = forward_chain(&chain, &v0, 2).map_err(|e| e.to_string())?;
    let b = reverse_chain(&chain, &v0, 2).map_err(|e| e.to_string())?;
    within(a.tower.max_abs_diff(&b.tower).unwrap(), 1e-10)
}

fn truncation_slope() -> Check {
    let p = Program::elementwise(Primitive::exp(), 1).unwrap();
    let hs = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let mut worst = 0.0f64;
    for k in 1..=3 {
        let s = shift(&p, &[0.5], k).map_err(|e| e.to_string())?;
        let pts: Vec<(f64, f64)> = hs
            .iter()
            .map(|h| {
                let err = (s.eval(*h, &[1.0]).unwrap()[0] - (0.5 + h).exp()).abs();
                (h.ln(), err.ln())
            })
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
        worst = worst.max((slope - (k + 1) as f64).abs());
    }
    within(worst, 0.3)
}

fn derivative_of_sin() -> Check {
    let d = differentiable_derivative(&prog("(elem sin)"), 1).map_err(|e| e.to_string())?;
    let cos = prog("(elem cos)");
    let mut worst = 0.0f64;
    for x in [-1.0, 0.0, 0.8] {
        let a = d.tau(&[x], 4).map_err(|e| e.to_string())?;
        let b = cos.tau(&[x], 4).map_err(|e| e.to_string())?;
        worst = worst.max(a.tower.max_abs_diff(&b.tower).unwrap());
    }
    within(worst, 1e-12)
}

fn closed_forms() -> Check {
    for m in 0..=8u32 {
        let r = reduce_sum_closed_form(m as usize);
        for n in 0..=30i64 {
            let brute: i128 = (0..=n as i128).map(|h| h.pow(m)).sum();
            if r.eval_int(n).to_string() != brute.to_string() {
                return Err(format!("m={m} n={n}"));
            }
        }
    }
    Ok("exact for m<=8, n<=30".into())
}

fn half_iterate() -> Check {
    let p = prog("(layer {\"dim_out\":1,\"dim_in\":1,\"order\":2,\"components\":[[0],[0.5],[0.25]]})");
    let v_f = find_fixed_point(&p, 0.3).map_err(|e| e.to_string())?;
    let s = schroeder(&p, v_f, 30).map_err(|e| e.to_string())?;
    let v = 0.1;
    let half = fractional_iterate(&s, 0.5, v).map_err(|e| e.to_string())?;
    let twice = fractional_iterate(&s, 0.5, half).map_err(|e| e.to_string())?;
    within((twice - p.eval(&[v]).unwrap()[0]).abs(), 1e-8)
}

fn json_round_trip() -> Check {
    let t = prog("(compose (elem sigmoid) (affine [[0.3,0.1]] [0.7]))")
        .tau(&[0.11, -2.7], 3)
        .map_err(|e| e.to_string())?
        .tower;
    let text = serde_json::to_string(&t).map_err(|e| e.to_string())?;
    let back: MultiTensor = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if back == t {
        Ok("bit-exact".into())
    } else {
        Err("values changed".into())
    }
}

pub fn run() -> Outcome {
    let checks: [Entry; 9] = [
        ("exp tower at 0", exp_tower),
        ("hessian vs finite differences", finite_differences),
        ("second-order chain rule", second_order_chain_rule),
        ("forward vs reverse chain", forward_reverse),
        ("taylor truncation slope", truncation_slope),
        ("derivative of sin is cos", derivative_of_sin),
        ("power-sum closed forms", closed_forms),
        ("half-iterate squared", half_iterate),
        ("multitensor json round trip", json_round_trip),
    ];
    let mut lines = Vec::new();
    let mut failed = 0;
    for (name, check) in checks {
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        lines.push(format!("{status}  {name:<30}  {detail}"));
    }
    let table = lines.join("\n");
    if failed == 0 {
        Ok(table)
    } else {
        println!("{table}");
        Err(Failure::Numeric(format!("{failed} selftest check(s) failed")))
    }
}
