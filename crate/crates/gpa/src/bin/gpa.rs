use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gpa::graphs::{augment, build_graph, perron_data, BipartiteGraph, GraphError, GraphSpec, Normalization, PerronData};
use gpa::loopspace::{loop_basis, loop_text, parse_element, Element, Grade, Sign};
use gpa::tangles::{evaluate_counted, parse_tangle};
use gpa::tower::{grade, Tower};
use gpa::verify::{self, Config, Format, Report, Suite};

#[derive(Parser)]
#[command(name = "gpa", version, about = "Graph planar algebra calculator")]
struct Cli {
    /// Residual tolerance for `verify`.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Largest loop grade that may be built.
    #[arg(long = "cap-n", global = true, default_value_t = 6)]
    cap_n: usize,
    #[arg(long, global = true, value_enum, default_value_t = NormArg::Markov)]
    normalization: NormArg,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Markov,
    Base,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Cmd {
    /// Perron-Frobenius data of a graph file.
    Fp { graph: String },
    /// Loop basis: `basis GRAPH N SIGN` for G_{N,SIGN}, `basis GRAPH tower N` for A_N.
    Basis {
        graph: String,
        #[arg(num_args = 2, allow_hyphen_values = true)]
        args: Vec<String>,
    },
    /// Evaluate a tangle file on input elements (text, or @file).
    Eval {
        graph: String,
        tangle: String,
        #[arg(allow_hyphen_values = true)]
        inputs: Vec<String>,
    },
    /// Run a verification suite: tl, rotation, tower, ppbasis, embed or all.
    Verify { graph: String, suite: String },
}

enum Failure {
    Usage(String),
    NonConvergence(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::NonConvergence(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Verification(report) => print!("{report}"),
                Failure::Usage(m) | Failure::NonConvergence(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn load(cli: &Cli, path: &str) -> Result<(BipartiteGraph, PerronData), Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?;
    let spec = GraphSpec::from_json(&text).map_err(|e| usage(format!("{path}: {e}")))?;
    let graph = build_graph(&spec).map_err(|e| usage(format!("{path}: {e}")))?;
    let norm = match cli.normalization {
        NormArg::Markov => Normalization::Markov,
        NormArg::Base => Normalization::Base,
    };
    let perron = perron_data(&graph, norm).map_err(|e| match e {
        GraphError::NonConvergence(_) => Failure::NonConvergence(e.to_string()),
        other => usage(other),
    })?;
    Ok((graph, perron))
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let machine = matches!(cli.format, FormatArg::Machine);
    let mut out = String::new();
    match &cli.cmd {
        Cmd::Fp { graph } => {
            let (g, p) = load(cli, graph)?;
            let norm = match p.normalization {
                Normalization::Markov => "markov",
                Normalization::Base => "base",
            };
            let markov: f64 = g.even_vertices().map(|v| g.dim(v) as f64 * p.lambda(v)).sum();
            if machine {
                let _ = writeln!(out, "d\t{:e}", p.d);
                let _ = writeln!(out, "index\t{:e}", p.index());
                let _ = writeln!(out, "normalization\t{norm}");
                for v in 0..g.n_vertices() {
                    let _ = writeln!(out, "lambda\t{}\t{:e}", g.vertex_name(v), p.lambda(v));
                }
                let _ = writeln!(out, "residual\t{:e}", p.residual(&g));
                let _ = writeln!(out, "markov_sum\t{:e}", markov);
            } else {
                let _ = writeln!(out, "d = {:.15}", p.d);
                let _ = writeln!(out, "d^2 = {:.15}", p.index());
                let _ = writeln!(out, "normalization = {norm} (sum m+ lambda over even = {markov:.15})");
                for v in 0..g.n_vertices() {
                    let side = if g.is_even(v) { "even" } else { "odd" };
                    let _ = writeln!(out, "lambda({}) = {:.15}  [{side}]", g.vertex_name(v), p.lambda(v));
                }
                let _ = writeln!(out, "eigen-equation residual = {:.3e}", p.residual(&g));
            }
        }
        Cmd::Basis { graph, args } => {
            let (g, p) = load(cli, graph)?;
            let parse_n = |s: &str| s.parse::<usize>().map_err(|_| usage(format!("bad level `{s}`")));
            let (label, dim, texts) = if args[0] == "tower" {
                let n = parse_n(&args[1])?;
                if n + 1 > cli.cap_n {
                    return Err(usage(format!("level {n} exceeds the cap --cap-n {}", cli.cap_n)));
                }
                let aug = augment(&g);
                let t = Tower::new(&aug, &p);
                let b = t.basis(n);
                let texts: Vec<String> = b.iter().map(|l| loop_text(aug.full(), grade(n), l)).collect();
                (format!("A_{n}"), b.len(), texts)
            } else {
                let n = parse_n(&args[0])?;
                let sign = parse_sign(&args[1])?;
                if n > cli.cap_n {
                    return Err(usage(format!("grade {n} exceeds the cap --cap-n {}", cli.cap_n)));
                }
                let gr = Grade::new(n, sign);
                let b = loop_basis(&g, gr);
                let texts: Vec<String> = b.iter().map(|l| loop_text(&g, gr, l)).collect();
                (format!("G_{gr}"), b.len(), texts)
            };
            if machine {
                let _ = writeln!(out, "dim\t{label}\t{dim}");
                for t in texts {
                    let _ = writeln!(out, "loop\t{t}");
                }
            } else {
                let _ = writeln!(out, "{label}: {dim} loops");
                for t in texts {
                    let _ = writeln!(out, "  {t}");
                }
            }
        }
        Cmd::Eval { graph, tangle, inputs } => {
            let (g, p) = load(cli, graph)?;
            let text = fs::read_to_string(tangle).map_err(|e| usage(format!("{tangle}: {e}")))?;
            let t = parse_tangle(&text).map_err(|e| usage(format!("{tangle}: {e}")))?;
            if t.boundary().n > cli.cap_n {
                return Err(usage(format!("grade {} exceeds the cap --cap-n {}", t.boundary().n, cli.cap_n)));
            }
            if inputs.len() != t.inputs().len() {
                return Err(usage(format!("tangle takes {} inputs, {} given", t.inputs().len(), inputs.len())));
            }
            let xs: Vec<Element> = inputs
                .iter()
                .zip(t.inputs())
                .map(|(s, &gr)| {
                    let body = match s.strip_prefix('@') {
                        Some(path) => fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?,
                        None => s.clone(),
                    };
                    parse_element(&g, gr, &body).map_err(usage)
                })
                .collect::<Result<_, _>>()?;
            let ev = evaluate_counted(&t, &xs, &g, &p).map_err(usage)?;
            if machine {
                let _ = writeln!(out, "grade\t{}", ev.value.grade);
                let _ = writeln!(out, "states\t{}", ev.states);
                for (k, c) in ev.value.terms() {
                    let _ = writeln!(out, "term\t{:e}\t{}", c, loop_text(&g, ev.value.grade, k));
                }
            } else {
                let _ = writeln!(out, "grade {}, {} compatible states", ev.value.grade, ev.states);
                out.push_str(&ev.value.to_text(&g));
            }
        }
        Cmd::Verify { graph, suite } => {
            let suite: Suite = suite.parse().map_err(usage)?;
            let (g, p) = load(cli, graph)?;
            let cfg = Config {
                cap_n: cli.cap_n,
                ..Config::default()
            };
            let report = Report {
                tol: cli.tol,
                checks: verify::run(&g, &p, suite, &cfg),
            };
            let fmt = if machine { Format::Machine } else { Format::Text };
            let text = report.render(fmt);
            if !report.passed() {
                return Err(Failure::Verification(text));
            }
            out = text;
        }
    }
    Ok(out)
}

fn parse_sign(s: &str) -> Result<Sign, Failure> {
    match s {
        "+" | "plus" => Ok(Sign::Plus),
        "-" | "minus" => Ok(Sign::Minus),
        _ => Err(usage(format!("bad sign `{s}` (expected + or -)"))),
    }
}
