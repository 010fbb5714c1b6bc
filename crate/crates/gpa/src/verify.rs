//! Named identity checks grouped into suites, and the report printed by
//! `gpa verify`.
//!
//! Every check is a residual (a max-abs coefficient difference or an absolute
//! scalar difference) compared against one tolerance. Random probes use a
//! fixed seed so reports are reproducible byte for byte.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embed::{self, TlDiagram};
use crate::gpa_ops::Gpa;
use crate::graphs::{augment, BipartiteGraph, PerronData};
use crate::loopspace::{loop_basis, star, AlgebraError, Element, Grade, Sign};
use crate::tangles::{evaluate, library, Tangle};
use crate::tower::{grade, Tower};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Tl,
    Rotation,
    Tower,
    PpBasis,
    Embed,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Tl => "tl",
            Suite::Rotation => "rotation",
            Suite::Tower => "tower",
            Suite::PpBasis => "ppbasis",
            Suite::Embed => "embed",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "tl" => Suite::Tl,
            "rotation" => Suite::Rotation,
            "tower" => Suite::Tower,
            "ppbasis" => Suite::PpBasis,
            "embed" => Suite::Embed,
            "all" => Suite::All,
            _ => return Err(format!("unknown suite `{s}` (expected tl, rotation, tower, ppbasis, embed or all)")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    /// The statement the identity comes from.
    pub anchor: &'static str,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Debug, Clone, Copy)]
pub struct Config {
    /// Largest loop grade any check may build.
    pub cap_n: usize,
    pub seed: u64,
    pub cutoff: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            cap_n: 6,
            seed: 0x5eed,
            cutoff: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub tol: f64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !passes(c.residual, self.tol)).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Text => {
                for c in &self.checks {
                    let status = if passes(c.residual, self.tol) { "ok  " } else { "FAIL" };
                    let _ = writeln!(out, "{status} {:<9} {:>10.3e}  {}  [{}]", c.suite, c.residual, c.name, c.anchor);
                }
                let _ = writeln!(
                    out,
                    "{} checks, {} failed, max residual {:.3e}, tolerance {:.1e}",
                    self.checks.len(),
                    self.failures(),
                    self.max_residual(),
                    self.tol
                );
            }
            Format::Machine => {
                for c in &self.checks {
                    let status = if passes(c.residual, self.tol) { "pass" } else { "fail" };
                    let _ = writeln!(out, "check\t{}\t{}\t{}\t{:e}\t{status}", c.suite, c.name, c.anchor, c.residual);
                }
                let _ = writeln!(
                    out,
                    "summary\t{}\t{}\t{:e}\t{:e}",
                    self.checks.len(),
                    self.failures(),
                    self.max_residual(),
                    self.tol
                );
            }
        }
        out
    }
}

/// NaN never passes.
fn passes(r: f64, tol: f64) -> bool {
    r <= tol
}

/// Run one suite, or all of them in the order tl, tower, ppbasis, rotation, embed.
pub fn run(graph: &BipartiteGraph, perron: &PerronData, suite: Suite, cfg: &Config) -> Vec<Check> {
    match suite {
        Suite::Tl => {
            let mut v = tl_relations(graph, perron, 4.min(cfg.cap_n));
            v.extend(tangle_consistency(graph, perron, 2.min(cfg.cap_n.saturating_sub(2))));
            v
        }
        Suite::Tower => tower_checks(graph, perron, cfg),
        Suite::PpBasis => ppbasis_checks(graph, perron),
        Suite::Rotation => rotation_checks(graph, perron, cfg),
        Suite::Embed => embed_checks(graph, perron, cfg),
        Suite::All => [Suite::Tl, Suite::Tower, Suite::PpBasis, Suite::Rotation, Suite::Embed]
            .into_iter()
            .flat_map(|s| run(graph, perron, s, cfg))
            .collect(),
    }
}

fn check(suite: &'static str, name: String, anchor: &'static str, residual: f64) -> Check {
    Check {
        suite,
        name,
        anchor,
        residual,
    }
}

type Op<'a> = &'a dyn Fn(&Element) -> Result<Element, AlgebraError>;

fn basis_elems(graph: &BipartiteGraph, g: Grade) -> Vec<Element> {
    loop_basis(graph, g).into_iter().map(|l| Element::from_loop(g, l)).collect()
}

/// E_i² = dE_i, far commutation and E_iE_{i±1}E_i = E_i in G_{k,±}, k ≤ n_max.
pub fn tl_relations(graph: &BipartiteGraph, perron: &PerronData, n_max: usize) -> Vec<Check> {
    const A: &str = "Temperley-Lieb relations";
    let ops = Gpa::new(graph, perron);
    let d = perron.d;
    let mut out = Vec::new();
    for sign in [Sign::Plus, Sign::Minus] {
        for k in 2..=n_max {
            let e: Vec<Element> = (1..k).map(|i| ops.jones_in(i, k, sign).unwrap()).collect();
            let (mut sq, mut far, mut near, mut sa): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
            for (i, ei) in e.iter().enumerate() {
                sa = sa.max(star(ei).distance(ei));
                sq = sq.max((ei * ei).distance(&ei.scaled(d)));
                for (j, ej) in e.iter().enumerate() {
                    if i.abs_diff(j) > 1 {
                        far = far.max((ei * ej).distance(&(ej * ei)));
                    } else if i.abs_diff(j) == 1 {
                        near = near.max((&(ei * ej) * ei).distance(ei));
                    }
                }
            }
            let g = Grade::new(k, sign);
            out.push(check("tl", format!("{g} E_i self-adjoint"), A, sa));
            out.push(check("tl", format!("{g} E_i^2 = d E_i"), A, sq));
            out.push(check("tl", format!("{g} E_i E_j = E_j E_i, |i-j| > 1"), A, far));
            out.push(check("tl", format!("{g} E_i E_(i+-1) E_i = E_i"), A, near));
        }
    }
    out
}

/// Closed forms of the named operations against the state sums of their
/// tangles, on full loop bases of grade ≤ n_max.
pub fn tangle_consistency(graph: &BipartiteGraph, perron: &PerronData, n_max: usize) -> Vec<Check> {
    const A: &str = "tangle state sum";
    let ops = Gpa::new(graph, perron);
    let mut out = Vec::new();
    let agree = |t: &Tangle, g: Grade, f: Op| -> f64 {
        basis_elems(graph, g)
            .into_iter()
            .map(|x| {
                let a = f(&x).unwrap();
                let b = evaluate(t, &[x], graph, perron).unwrap();
                a.distance(&b)
            })
            .fold(0.0, f64::max)
    };
    for sign in [Sign::Plus, Sign::Minus] {
        for n in 1..=n_max {
            let g = Grade::new(n, sign);
            let r = ops
                .jones_projection(n, sign)
                .unwrap()
                .distance(&evaluate(&library::jones(n, sign), &[], graph, perron).unwrap());
            out.push(check("tl", format!("{g} Jones projection E_{n}"), A, r));
            let mut r: f64 = 0.0;
            for j in 1..2 * n {
                r = r.max(agree(&library::alpha(j, g), g, &|x| ops.alpha(j, x)));
            }
            r = r.max(agree(&library::alpha_wrap(g), g, &|x| ops.alpha(2 * n, x)));
            out.push(check("tl", format!("{g} capping alpha_j"), A, r));
            out.push(check(
                "tl",
                format!("{g} conditional expectation (middle cap)"),
                A,
                agree(&library::alpha(n, g), g, &|x| ops.cond_exp_down(x)),
            ));
            let mut r: f64 = 0.0;
            for j in 1..=2 * n + 1 {
                r = r.max(agree(&library::beta(j, g), g, &|x| ops.beta(j, x)));
            }
            r = r.max(agree(&library::beta_wrap(g), g, &|x| ops.beta(2 * n + 2, x)));
            out.push(check("tl", format!("{g} cupping beta_j"), A, r));
            let (name, f): (&str, Op) = match sign {
                Sign::Plus => ("gamma+ (left expectation)", &|x| ops.gamma_plus(x)),
                Sign::Minus => ("gamma-", &|x| ops.gamma_minus(x)),
            };
            out.push(check("tl", format!("{g} {name}"), A, agree(&library::strip_ends(g), g, f)));
            let rot = agree(&library::rotate_two_back(g), g, &|x| ops.rotation(x));
            let rho = if sign == Sign::Plus { "rho" } else { "sigma" };
            out.push(check("tl", format!("{g} rotation {rho}"), A, rot));
        }
        for n in 0..=n_max {
            let g = Grade::new(n, sign);
            let (name, f): (&str, Op) = match sign {
                Sign::Plus => ("i+", &|x| ops.i_plus(x)),
                Sign::Minus => ("i-", &|x| ops.i_minus(x)),
            };
            out.push(check("tl", format!("{g} {name}"), A, agree(&library::wrap_left(g), g, f)));
            let r = agree(&library::beta(n + 1, g), g, &|x| Ok(crate::loopspace::include_up(graph, x)));
            out.push(check("tl", format!("{g} inclusion"), A, r));
        }
    }
    out
}

fn rand_elem(basis: Vec<crate::loopspace::Loop>, g: Grade, rng: &mut ChaCha8Rng) -> Element {
    Element::from_terms(g, basis.into_iter().map(|l| (l, rng.gen_range(-1.0..1.0))))
}

/// The tower against its block-matrix model, plus the basic construction,
/// conditional expectations and multistep projections.
pub fn tower_checks(graph: &BipartiteGraph, perron: &PerronData, cfg: &Config) -> Vec<Check> {
    let aug = augment(graph);
    let t = Tower::new(&aug, perron);
    let d = perron.d;
    let mut out = Vec::new();
    let top = 3.min(cfg.cap_n.saturating_sub(1));
    for n in 0..=top {
        let r = t.matrix_oracle(n);
        let dims = if r.dim_loops == r.dim_blocks { 0.0 } else { f64::INFINITY };
        out.push(check(
            "tower",
            format!("A_{n} matrix units (dim {})", r.dim_loops),
            "loop tower as a path algebra",
            r.max_residual().max(dims),
        ));
    }
    let elems = |n: usize| -> Vec<Element> { t.basis(n).into_iter().map(|l| Element::from_loop(grade(n), l)).collect() };
    for n in 1..=2.min(top) {
        let f = t.jones_f(n).unwrap();
        let (mut fxf, mut tr, mut ce): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for x in elems(n) {
            let lhs = t.mul(&t.mul(&f, &x), &f);
            let rhs = t.mul(&t.cond_exp(&x).unwrap(), &f).scaled(d);
            fxf = fxf.max(lhs.distance(&rhs));
            tr = tr.max((t.trace(&t.mul(&x, &f)) - t.trace(&x) / d).abs());
            for y in elems(n - 1) {
                let l = t.trace(&t.mul(&x, &y));
                let r = t.trace(&t.mul(&t.cond_exp(&x).unwrap(), &y));
                ce = ce.max((l - r).abs());
            }
        }
        let fsq = t.mul(&f, &f).distance(&f.scaled(d));
        const A: &str = "basic construction";
        out.push(check("tower", format!("n={n} F_n^2 = d F_n"), A, fsq));
        out.push(check("tower", format!("n={n} F_n x F_n = d E(x) F_n"), A, fxf));
        out.push(check("tower", format!("n={n} tr(x F_n) = tr(x)/d"), A, tr));
        out.push(check("tower", format!("n={n} E is trace-preserving"), "conditional expectation", ce));
    }
    for (n, k) in [(1, 1), (2, 1), (2, 2)] {
        if n + k > top + 1 {
            continue;
        }
        let f = t.multistep_projection(n, k).unwrap();
        let mut r = t.mul(&f, &f).distance(&f);
        let e = t.cond_exp_to(&f, n).unwrap();
        r = r.max(e.distance(&t.identity(n).scaled(d.powi(-2 * k as i32))));
        for x in elems(n) {
            let lhs = t.mul(&t.mul(&f, &x), &f);
            let rhs = t.mul(&t.cond_exp_to(&x, n - k).unwrap(), &f);
            r = r.max(lhs.distance(&rhs));
        }
        out.push(check("tower", format!("multistep projection n={n} k={k}"), "multistep basic construction", r));
    }
    out
}

/// Pimsner-Popa basis of A₁ over A₀ (both families) and the commutant
/// expectation against the left-capping closed form.
pub fn ppbasis_checks(graph: &BipartiteGraph, perron: &PerronData) -> Vec<Check> {
    let aug = augment(graph);
    let t = Tower::new(&aug, perron);
    let ops = t.gpa();
    let d = perron.d;
    let mut out = Vec::new();
    for alt in [false, true] {
        let label = if alt { "alternative" } else { "distinguished" };
        let b = t.pp_basis(alt);
        let mut sum = Element::zero(grade(1));
        for bi in &b {
            sum = &sum + &t.mul(bi, &star(bi));
        }
        let rs = sum.distance(&t.identity(1).scaled(d * d));
        let mut rx: f64 = 0.0;
        for l in t.basis(1) {
            let x = Element::from_loop(grade(1), l);
            let mut y = Element::zero(grade(1));
            for bi in &b {
                y = &y + &t.mul(bi, &t.cond_exp(&t.mul(&star(bi), &x)).unwrap());
            }
            rx = rx.max(y.distance(&x));
        }
        const A: &str = "Pimsner-Popa basis";
        out.push(check("ppbasis", format!("{label}: sum b E(b* x) = x on A_1"), A, rx));
        out.push(check("ppbasis", format!("{label}: sum b b* = d^2"), A, rs));
        for n in 1..=2 {
            let mut r: f64 = 0.0;
            for g in basis_elems(graph, Grade::plus(n)) {
                let closed = t.phi(&ops.cond_exp_left(&g).unwrap()).scaled(1.0 / d);
                r = r.max(t.cond_exp_commutant(&t.phi(&g), alt).distance(&closed));
            }
            out.push(check(
                "ppbasis",
                format!("{label}: A_0' cap A_{n} expectation = d^-1 gamma+"),
                "commutant conditional expectation",
                r,
            ));
        }
    }
    out
}

/// ρⁿ = id and σⁿ = id on central bases, and both adjoint identities on
/// random central vectors.
pub fn rotation_checks(graph: &BipartiteGraph, perron: &PerronData, cfg: &Config) -> Vec<Check> {
    let aug = augment(graph);
    let t = Tower::new(&aug, perron);
    let mut out = Vec::new();
    let top = 3.min(cfg.cap_n.saturating_sub(1));
    for sign in [Sign::Plus, Sign::Minus] {
        let name = if sign == Sign::Plus { "rho" } else { "sigma" };
        for n in 1..=top {
            let mut r: f64 = 0.0;
            for x in t.commutant_basis(n, sign) {
                let mut y = x.clone();
                for _ in 0..n {
                    y = t.rotate_central(&y, sign, false, 0.0).unwrap();
                }
                r = r.max(y.distance(&x));
            }
            out.push(check("rotation", format!("{name}^{n} = id"), "rotation period", r));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ones = |k: usize, rng: &mut ChaCha8Rng| -> Vec<Element> {
        (0..k).map(|_| rand_elem(t.basis(1), grade(1), rng)).collect()
    };
    let (mut rp, mut rm): (f64, f64) = (0.0, 0.0);
    let pairs = 100;
    for i in 0..pairs {
        let n = 1 + i % top.max(1);
        let x = t.phi(&rand_elem(loop_basis(graph, Grade::plus(n)), Grade::plus(n), &mut rng));
        let rx = t.rotate_central(&x, Sign::Plus, false, 0.0).unwrap();
        let ys = ones(n, &mut rng);
        let mut shifted = ys[1..].to_vec();
        shifted.push(ys[0].clone());
        let lhs = t.inner(&rx, &t.theta(&ys).unwrap());
        let rhs = t.inner(&x, &t.theta(&shifted).unwrap());
        rp = rp.max((lhs - rhs).abs());

        let m = 1 + i % top.saturating_sub(1).max(1);
        let x = t.phi(&rand_elem(loop_basis(graph, Grade::minus(m)), Grade::minus(m), &mut rng));
        let sx = t.rotate_central(&x, Sign::Minus, false, 0.0).unwrap();
        let ys = ones(m + 1, &mut rng);
        let mut shifted = ys[1..m].to_vec();
        shifted.push(t.mul(&ys[m], &ys[0]));
        shifted.push(t.identity(1));
        let lhs = t.inner(&sx, &t.theta(&ys).unwrap());
        let rhs = t.inner(&x, &t.theta(&shifted).unwrap());
        rm = rm.max((lhs - rhs).abs());
    }
    out.push(check("rotation", format!("rho adjoint on {pairs} random pairs"), "rotation adjoint", rp));
    out.push(check("rotation", format!("sigma adjoint on {pairs} random pairs"), "rotation adjoint", rm));
    out
}

/// Φ with s = 2 strings on the TL image, for every n ≤ 3 at which the TL
/// image keeps its full Catalan dimension in this graph.
pub fn embed_checks(graph: &BipartiteGraph, perron: &PerronData, cfg: &Config) -> Vec<Check> {
    const A: &str = "string-adding embedding";
    let s = 2;
    let mut n_max = 0;
    for n in 1..=3 {
        if n + s + 1 > cfg.cap_n {
            break;
        }
        let imgs = embed::tl_image(graph, perron, n, Sign::Plus);
        if embed::rank(&embed::gram(graph, perron, &imgs), cfg.cutoff) < TlDiagram::all(n).len() {
            break;
        }
        n_max = n;
    }
    let mut out = vec![check("embed", format!("shift s={s}, levels 1..={n_max}"), A, 0.0)];
    match embed::verify_embedding(graph, perron, s, n_max, cfg.cutoff) {
        Ok(v) => out.extend(v.into_iter().map(|c| check("embed", c.name, A, c.residual))),
        Err(e) => out.push(check("embed", format!("embedding failed: {e}"), A, f64::INFINITY)),
    }
    out
}
