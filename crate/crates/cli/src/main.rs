//! `opcalc`: derivative towers, shifts, reductions and fractional iterates
//! of programs written as s-expressions.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical or domain
//! failure. Results go to standard output, diagnostics to standard error.

mod format;
mod selftest;

use std::io::Read;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use opcalc_core::iterators::{find_fixed_point, fractional_iterate, iterating_velocity, schroeder};
use opcalc_core::operators::{forward_chain, reverse_chain, shift};
use opcalc_core::reducesum::{reduce_sum_apply, reduce_sum_closed_form, reduce_sum_polys, reduction_velocity};
use opcalc_core::sexpr::parse_program;
use opcalc_core::{DerivativeTower, MultiTensor, Program};
use serde::Serialize;

use crate::format::to_json;

#[derive(Parser)]
#[command(name = "opcalc", version, about = "Operator calculus on programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derivative tower of a program at a point.
    Tau {
        /// Program file, or `-` for standard input.
        #[arg(long)]
        program: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        order: usize,
    },
    /// Truncated Taylor series against the true value.
    Taylor {
        #[arg(long)]
        program: String,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        order: usize,
        #[arg(long, allow_hyphen_values = true)]
        h: f64,
        #[arg(long, allow_hyphen_values = true)]
        dir: String,
    },
    /// Tower of a chain of programs, accumulated from either end.
    ComposeModes {
        /// Program files in application order.
        #[arg(long, num_args = 1.., required = true)]
        chain: Vec<String>,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        order: usize,
        #[arg(long, value_enum, default_value = "both")]
        mode: Mode,
    },
    /// Closed-form partial sums `sum_{h=0}^{n}`.
    ReduceSum {
        /// Sum the monomial `h^m`.
        #[arg(long, conflicts_with = "program", required_unless_present = "program")]
        m: Option<usize>,
        /// Sum `p(at + h dir)`.
        #[arg(long, requires_all = ["at", "dir"])]
        program: Option<String>,
        #[arg(long)]
        n: u64,
        /// Also report the k-th derivative in n.
        #[arg(long)]
        velocity: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        dir: Option<String>,
        /// Series order used along the line.
        #[arg(long, default_value_t = 8)]
        order: usize,
    },
    /// Fractional iterate and iterating velocity of a scalar program.
    Iterate {
        #[arg(long)]
        program: String,
        /// Starting point of the fixed-point search.
        #[arg(long, allow_hyphen_values = true)]
        seed: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        at: f64,
        #[arg(long, default_value_t = 24)]
        order: usize,
    },
    /// Runs the built-in oracle checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Forward,
    Reverse,
    Both,
}

pub enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<opcalc_core::Error> for Failure {
    fn from(e: opcalc_core::Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

#[derive(Serialize)]
struct TowerOut<'a> {
    at: &'a [f64],
    tower: &'a MultiTensor,
}

impl<'a> From<&'a DerivativeTower> for TowerOut<'a> {
    fn from(t: &'a DerivativeTower) -> Self {
        TowerOut {
            at: &t.at,
            tower: &t.tower,
        }
    }
}

fn parse_vec(text: &str) -> Result<Vec<f64>, Failure> {
    let inner = text.trim();
    let inner = inner
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .unwrap_or(inner);
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Usage(format!("bad number {:?} in vector {text:?}", s.trim())))
        })
        .collect()
}

fn load_program(path: &str) -> Result<Program, Failure> {
    let text = if path == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::Usage(format!("reading standard input: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{path}: {e}")))?
    };
    parse_program(&text).map_err(|e| Failure::Usage(format!("{path}: {e}")))
}

fn check_dim(what: &str, expected: usize, got: usize) -> Result<(), Failure> {
    if expected != got {
        return Err(Failure::Usage(format!(
            "{what} has {got} entries, the program takes {expected}"
        )));
    }
    Ok(())
}

fn tau(program: &str, at: &str, order: usize) -> Outcome {
    let p = load_program(program)?;
    let at = parse_vec(at)?;
    check_dim("--at", p.dim_in(), at.len())?;
    let t = p.tau(&at, order)?;
    Ok(to_json(&TowerOut::from(&t)))
}

fn taylor(program: &str, at: &str, order: usize, h: f64, dir: &str) -> Outcome {
    #[derive(Serialize)]
    struct Out {
        series: Vec<f64>,
        truth: Vec<f64>,
        error: f64,
    }
    let p = load_program(program)?;
    let at = parse_vec(at)?;
    let dir = parse_vec(dir)?;
    check_dim("--at", p.dim_in(), at.len())?;
    check_dim("--dir", p.dim_in(), dir.len())?;
    let series = shift(&p, &at, order)?.eval(h, &dir)?;
    let moved: Vec<f64> = at.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
    let truth = p.eval(&moved)?;
    let error = series
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(to_json(&Out {
        series,
        truth,
        error,
    }))
}

fn compose_modes(chain: &[String], at: &str, order: usize, mode: Mode) -> Outcome {
    #[derive(Serialize)]
    struct Out<'a> {
        #[serde(skip_serializing_if = "Option::is_none")]
        forward: Option<TowerOut<'a>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        reverse: Option<TowerOut<'a>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        max_discrepancy: Option<f64>,
    }
    let programs = chain
        .iter()
        .map(|p| load_program(p))
        .collect::<Result<Vec<_>, _>>()?;
    for w in programs.windows(2) {
        if w[1].dim_in() != w[0].dim_out() {
            return Err(Failure::Usage(format!(
                "chain link takes {} inputs but the previous one produces {}",
                w[1].dim_in(),
                w[0].dim_out()
            )));
        }
    }
    let at = parse_vec(at)?;
    check_dim("--at", programs[0].dim_in(), at.len())?;
    let fw = match mode {
        Mode::Forward | Mode::Both => Some(forward_chain(&programs, &at, order)?),
        Mode::Reverse => None,
    };
    let rv = match mode {
        Mode::Reverse | Mode::Both => Some(reverse_chain(&programs, &at, order)?),
        Mode::Forward => None,
    };
    let max_discrepancy = match (&fw, &rv) {
        (Some(a), Some(b)) => Some(a.tower.max_abs_diff(&b.tower)?),
        _ => None,
    };
    Ok(to_json(&Out {
        forward: fw.as_ref().map(TowerOut::from),
        reverse: rv.as_ref().map(TowerOut::from),
        max_discrepancy,
    }))
}

struct LineSum<'a> {
    program: &'a str,
    at: &'a str,
    dir: &'a str,
}

fn reduce_sum(m: Option<usize>, line: Option<LineSum>, n: u64, velocity: Option<usize>, order: usize) -> Outcome {
    if let Some(m) = m {
        let closed = reduce_sum_closed_form(m);
        let mut out = format!("{}\n{closed}", closed.eval_int(n as i64));
        if let Some(k) = velocity {
            let d = closed.nth_derivative(k).eval_int(n as i64);
            out.push_str(&format!("\n{d}"));
        }
        return Ok(out);
    }

    #[derive(Serialize)]
    struct Out {
        closed_forms: Vec<String>,
        value: Vec<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        velocity: Option<Vec<f64>>,
    }
    let line = line.expect("clap requires --m or --program");
    let p = load_program(line.program)?;
    let at = parse_vec(line.at)?;
    let dir = parse_vec(line.dir)?;
    check_dim("--at", p.dim_in(), at.len())?;
    check_dim("--dir", p.dim_in(), dir.len())?;
    let closed_forms = reduce_sum_polys(&p, &at, &dir, order)?
        .iter()
        .map(ToString::to_string)
        .collect();
    let value = reduce_sum_apply(&p, &at, &dir, n, order)?;
    let velocity = velocity
        .map(|k| reduction_velocity(&p, &at, &dir, n as f64, k, order))
        .transpose()?;
    Ok(to_json(&Out {
        closed_forms,
        value,
        velocity,
    }))
}

fn iterate(program: &str, seed: f64, x: f64, at: f64, order: usize) -> Outcome {
    #[derive(Serialize)]
    struct Out {
        fixed_point: f64,
        lambda: f64,
        iterate: f64,
        velocity: Option<f64>,
        in_radius: bool,
    }
    let p = load_program(program)?;
    if p.dim_in() != 1 || p.dim_out() != 1 {
        return Err(Failure::Usage(format!(
            "iterate needs a scalar program, got {} -> {}",
            p.dim_in(),
            p.dim_out()
        )));
    }
    let v_f = find_fixed_point(&p, seed)?;
    let s = schroeder(&p, v_f, order)?;
    let iterate = fractional_iterate(&s, x, at)?;
    let velocity = if s.lambda > 0.0 {
        Some(iterating_velocity(&s, at)?)
    } else {
        None
    };
    Ok(to_json(&Out {
        fixed_point: v_f,
        lambda: s.lambda,
        iterate,
        velocity,
        in_radius: s.in_radius(at),
    }))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Tau { program, at, order } => tau(&program, &at, order),
        Command::Taylor {
            program,
            at,
            order,
            h,
            dir,
        } => taylor(&program, &at, order, h, &dir),
        Command::ComposeModes {
            chain,
            at,
            order,
            mode,
        } => compose_modes(&chain, &at, order, mode),
        Command::ReduceSum {
            m,
            program,
            n,
            velocity,
            at,
            dir,
            order,
        } => {
            let line = match (&program, &at, &dir) {
                (Some(program), Some(at), Some(dir)) => Some(LineSum { program, at, dir }),
                _ => None,
            };
            reduce_sum(m, line, n, velocity, order)
        }
        Command::Iterate {
            program,
            seed,
            x,
            at,
            order,
        } => iterate(&program, seed, x, at, order),
        Command::Selftest => selftest::run(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            // Help and version go to standard output, errors to standard error.
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
