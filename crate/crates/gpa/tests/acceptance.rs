//! The ten acceptance criteria. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::Command;
use std::time::{Duration, Instant};

use gpa::embed::{self, TlDiagram};
use gpa::graphs::{augment, build_graph, path_graph, perron_data, star_graph, BipartiteGraph, GraphSpec, Normalization, PerronData};
use gpa::loopspace::Sign;
use gpa::tower::Tower;
use gpa::verify::{self, Check, Config};

type Criterion = (&'static str, fn() -> (f64, String), f64, Option<u64>);

fn setup(g: BipartiteGraph) -> (BipartiteGraph, PerronData) {
    let p = perron_data(&g, Normalization::Markov).unwrap();
    (g, p)
}

fn parallel() -> BipartiteGraph {
    let spec = GraphSpec::new(&["a", "b"], &["x", "y"], &[("a", "x"), ("a", "x"), ("b", "x"), ("b", "y")])
        .with_dim(&[("a", 2)]);
    build_graph(&spec).unwrap()
}

fn worst(checks: &[Check]) -> f64 {
    checks.iter().map(|c| c.residual).fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Power iteration on ΛᵀΛ (odd side), independent of the library's solver.
fn power_oracle(g: &BipartiteGraph) -> f64 {
    let lam = g.lambda_matrix();
    let (ne, no) = (lam.len(), lam[0].len());
    let m: Vec<Vec<f64>> = (0..no)
        .map(|i| (0..no).map(|j| (0..ne).map(|k| lam[k][i] * lam[k][j]).sum()).collect())
        .collect();
    let mut x = vec![1.0; no];
    let mut rho = 0.0;
    for _ in 0..100_000 {
        let y: Vec<f64> = m.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let next = y.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|v| v * v).sum::<f64>();
        x = y.iter().map(|v| v / norm).collect();
        if (next - rho).abs() < 1e-15 {
            return next;
        }
        rho = next;
    }
    rho
}

fn c1() -> (f64, String) {
    // d² of A_k is 4cos²(π/(k+1)); of the 3-star, 3
    let cases = [
        (path_graph(2), 1.0),
        (path_graph(3), 2.0),
        (path_graph(4), (1.0 + 5f64.sqrt()) / 2.0 + 1.0),
        (star_graph(3), 3.0),
    ];
    let mut r: f64 = 0.0;
    for (g, frozen) in cases {
        let p = perron_data(&g, Normalization::Markov).unwrap();
        r = r.max(p.residual(&g));
        r = r.max((p.index() - power_oracle(&g)).abs());
        r = r.max((p.index() - frozen).abs());
        let markov: f64 = g.even_vertices().map(|v| g.dim(v) as f64 * p.lambda(v)).sum();
        r = r.max((markov - 1.0).abs());
    }
    (r, "A2, A3, A4, 3-star".into())
}

fn c2() -> (f64, String) {
    let mut r: f64 = 0.0;
    for g in [path_graph(3), path_graph(4)] {
        let (g, p) = setup(g);
        r = r.max(worst(&verify::tl_relations(&g, &p, 4)));
    }
    (r, "n <= 4 on A3, A4".into())
}

fn c3() -> (f64, String) {
    let mut r: f64 = 0.0;
    let mut dims = Vec::new();
    for (g, top) in [(path_graph(3), 3), (parallel(), 2)] {
        let (g, p) = setup(g);
        let aug = augment(&g);
        let t = Tower::new(&aug, &p);
        for n in 0..=top {
            let o = t.matrix_oracle(n);
            if o.dim_loops != o.dim_blocks {
                r = f64::INFINITY;
            }
            dims.push(o.dim_loops);
            r = r.max(o.max_residual());
        }
    }
    (r, format!("dims {dims:?}"))
}

fn c4() -> (f64, String) {
    let (g, p) = setup(path_graph(3));
    let checks: Vec<Check> = verify::tower_checks(&g, &p, &Config::default())
        .into_iter()
        .filter(|c| c.anchor == "basic construction" && !c.name.starts_with("n=3"))
        .collect();
    (worst(&checks), format!("{} identities on A3", checks.len()))
}

fn c5() -> (f64, String) {
    let mut r: f64 = 0.0;
    let mut k = 0;
    for g in [path_graph(3), star_graph(3)] {
        let (g, p) = setup(g);
        let checks: Vec<Check> = verify::ppbasis_checks(&g, &p)
            .into_iter()
            .filter(|c| c.anchor == "Pimsner-Popa basis")
            .collect();
        k += checks.len();
        r = r.max(worst(&checks));
    }
    (r, format!("{k} identities, both families"))
}

fn c6() -> (f64, String) {
    let (g, p) = setup(path_graph(3));
    let checks: Vec<Check> = verify::ppbasis_checks(&g, &p)
        .into_iter()
        .filter(|c| c.anchor == "commutant conditional expectation" && c.name.contains("A_2"))
        .collect();
    (worst(&checks), format!("{} families on A_0' cap A_2", checks.len()))
}

fn c7() -> (f64, String) {
    let (g, p) = setup(path_graph(3));
    let checks = verify::rotation_checks(&g, &p, &Config::default());
    (worst(&checks), format!("{} checks", checks.len()))
}

fn c8() -> (f64, String) {
    let (g, p) = setup(path_graph(3));
    let checks = verify::tangle_consistency(&g, &p, 2);
    (worst(&checks), format!("{} operations", checks.len()))
}

fn c9() -> (f64, String) {
    let (g, p) = setup(path_graph(4));
    let checks = embed::verify_embedding(&g, &p, 2, 3, 1e-7).unwrap();
    let mut r = checks.iter().map(|c| c.residual).fold(0.0, f64::max);
    let mut ranks = Vec::new();
    for n in 1..=3 {
        let cat = TlDiagram::all(n).len();
        let want = format!("n={n} injective (rank {cat} of {cat})");
        if !checks.iter().any(|c| c.name == want) {
            r = f64::INFINITY;
        }
        let img = embed::tl_image(&g, &p, n, Sign::Plus);
        ranks.push(embed::rank(&embed::gram(&g, &p, &img), 1e-7));
    }
    (r, format!("{} checks, TL ranks {ranks:?}", checks.len()))
}

fn c10() -> (f64, String) {
    let graph = concat!(env!("CARGO_MANIFEST_DIR"), "/data/a3.json");
    let run = || Command::new(env!("CARGO_BIN_EXE_gpa")).args(["verify", graph, "all"]).output().unwrap();
    let (a, b) = (run(), run());
    let exit = (a.status.code(), b.status.code());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    let r = if exit == (Some(0), Some(0)) && same { 0.0 } else { 1.0 };
    (r, format!("exit codes {exit:?}, identical {same}, {} bytes", a.stdout.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Perron data", c1, 1e-9, Some(1)),
        ("Temperley-Lieb relations", c2, 1e-9, Some(10)),
        ("matrix-unit oracle", c3, 1e-12, Some(10)),
        ("basic construction", c4, 1e-9, None),
        ("Pimsner-Popa basis", c5, 1e-9, None),
        ("commutant conditional expectation", c6, 1e-9, None),
        ("rotation periodicity and adjoint", c7, 1e-8, None),
        ("tangle evaluator consistency", c8, 1e-9, Some(60)),
        ("embedding", c9, 1e-8, Some(120)),
        ("CLI determinism", c10, 0.0, None),
    ];
    let mut failed = 0;
    for (i, (name, f, tol, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (residual, detail) = f();
        let elapsed = start.elapsed();
        let limit = limit.map(Duration::from_secs);
        let ok = residual <= tol && limit.is_none_or(|l| elapsed <= l);
        if !ok {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {}s", l.as_secs()));
        println!(
            "{} criterion {:>2} {name}: residual {:.3e} (tol {:.0e}), {:.2}s{budget}; {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            residual,
            tol,
            elapsed.as_secs_f64(),
        );
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
