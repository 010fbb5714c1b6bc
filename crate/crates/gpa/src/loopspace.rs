//! Loop spaces G_{n,±}, sparse elements and the loop product.
//!
//! A loop is stored as its edge sequence. Directions are implied: a step
//! leaving an even vertex runs forward along its edge, a step leaving an odd
//! vertex runs backward. For n = 0 the key holds the bare vertex.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::graphs::{BipartiteGraph, PerronData};

/// Coefficients below this are dropped.
pub const DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    /// Does a region of this sign sit on an even vertex?
    pub fn starts_even(self) -> bool {
        self == Sign::Plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Grade {
    pub n: usize,
    pub sign: Sign,
}

impl Grade {
    pub fn new(n: usize, sign: Sign) -> Self {
        Grade { n, sign }
    }

    pub fn plus(n: usize) -> Self {
        Grade::new(n, Sign::Plus)
    }

    pub fn minus(n: usize) -> Self {
        Grade::new(n, Sign::Minus)
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.n, self.sign.symbol())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("grade mismatch: {0} vs {1}")]
    GradeMismatch(Grade, Grade),
    #[error("operation needs n >= {0}, got {1}")]
    LevelTooLow(usize, usize),
    #[error("index {0} out of range 1..={1}")]
    IndexOutOfRange(usize, usize),
    #[error("element is not central")]
    NotCentral,
    #[error("cannot parse element: {0}")]
    Parse(String),
}

pub type Loop = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub grade: Grade,
    terms: BTreeMap<Loop, f64>,
}

impl Element {
    pub fn zero(grade: Grade) -> Self {
        Element {
            grade,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_loop(grade: Grade, ell: Loop) -> Self {
        let mut x = Element::zero(grade);
        x.add_term(ell, 1.0);
        x
    }

    pub fn from_terms(grade: Grade, terms: impl IntoIterator<Item = (Loop, f64)>) -> Self {
        let mut x = Element::zero(grade);
        for (k, c) in terms {
            x.add_term(k, c);
        }
        x
    }

    pub fn add_term(&mut self, ell: Loop, c: f64) {
        match self.terms.entry(ell) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().abs() < DROP_TOL {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c.abs() >= DROP_TOL {
                    v.insert(c);
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Loop, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn coeff(&self, ell: &[usize]) -> f64 {
        self.terms.get(ell).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Element {
        Element::from_terms(self.grade, self.terms.iter().map(|(k, v)| (k.clone(), v * c)))
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Max coefficient of the difference; grades must agree.
    pub fn distance(&self, other: &Element) -> f64 {
        if self.grade != other.grade {
            return f64::INFINITY;
        }
        let mut m: f64 = 0.0;
        for (k, v) in &self.terms {
            m = m.max((v - other.coeff(k)).abs());
        }
        for (k, v) in &other.terms {
            if !self.terms.contains_key(k) {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn try_add(&self, other: &Element) -> Result<Element, AlgebraError> {
        if self.grade != other.grade {
            return Err(AlgebraError::GradeMismatch(self.grade, other.grade));
        }
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), *v);
        }
        Ok(out)
    }

    /// Line-oriented text form, one `coefficient * [edge±,...]` term per line.
    pub fn to_text(&self, graph: &BipartiteGraph) -> String {
        let mut out = String::new();
        for (k, c) in &self.terms {
            out.push_str(&format!("{} * {}\n", c, loop_text(graph, self.grade, k)));
        }
        out
    }
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        self.try_add(rhs).expect("grade mismatch in addition")
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        self.try_add(&rhs.scaled(-1.0))
            .expect("grade mismatch in subtraction")
    }
}

impl Neg for &Element {
    type Output = Element;
    fn neg(self) -> Element {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &Element {
    type Output = Element;
    fn mul(self, rhs: f64) -> Element {
        self.scaled(rhs)
    }
}

/// Loop product; panics on a grade mismatch (see [`multiply`]).
impl Mul for &Element {
    type Output = Element;
    fn mul(self, rhs: &Element) -> Element {
        multiply(self, rhs).expect("grade mismatch in product")
    }
}

/// Start vertex of a loop of the given grade.
pub fn start_vertex(graph: &BipartiteGraph, grade: Grade, ell: &[usize]) -> usize {
    if grade.n == 0 {
        return ell[0];
    }
    let e = graph.edge(ell[0]);
    if grade.sign.starts_even() {
        e.source
    } else {
        e.target
    }
}

/// The 2n+1 vertices visited by a loop (first and last coincide).
pub fn vertices(graph: &BipartiteGraph, grade: Grade, ell: &[usize]) -> Vec<usize> {
    let mut v = start_vertex(graph, grade, ell);
    let mut out = vec![v];
    if grade.n == 0 {
        return out;
    }
    for &e in ell {
        v = graph.other_end(e, v);
        out.push(v);
    }
    out
}

/// Check that `ell` is a closed alternating walk of the given grade.
pub fn is_valid_loop(graph: &BipartiteGraph, grade: Grade, ell: &[usize]) -> bool {
    if grade.n == 0 {
        return ell.len() == 1
            && ell[0] < graph.n_vertices()
            && graph.is_even(ell[0]) == grade.sign.starts_even();
    }
    if ell.len() != 2 * grade.n || ell.iter().any(|&e| e >= graph.edges().len()) {
        return false;
    }
    let start = start_vertex(graph, grade, ell);
    let mut v = start;
    for &e in ell {
        let edge = graph.edge(e);
        if edge.source == v {
            v = edge.target;
        } else if edge.target == v {
            v = edge.source;
        } else {
            return false;
        }
    }
    v == start
}

pub fn loop_text(graph: &BipartiteGraph, grade: Grade, ell: &[usize]) -> String {
    if grade.n == 0 {
        return format!("[{}]", graph.vertex_name(ell[0]));
    }
    let vs = vertices(graph, grade, ell);
    let parts: Vec<String> = ell
        .iter()
        .zip(&vs)
        .map(|(&e, &v)| {
            let dir = if graph.is_even(v) { '+' } else { '-' };
            format!("{}{}", graph.edge(e).id, dir)
        })
        .collect();
    format!("[{}]", parts.join(","))
}

/// Parse the text form produced by [`Element::to_text`]; terms are separated by
/// newlines or `;`.
pub fn parse_element(graph: &BipartiteGraph, grade: Grade, text: &str) -> Result<Element, AlgebraError> {
    let mut x = Element::zero(grade);
    for raw in text.split(['\n', ';']) {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (coef, body) = match line.split_once('*') {
            Some((c, b)) if b.trim_start().starts_with('[') => (c.trim(), b.trim()),
            _ => ("1", line),
        };
        let c: f64 = coef
            .parse()
            .map_err(|_| AlgebraError::Parse(format!("bad coefficient `{coef}`")))?;
        let inner = body
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .ok_or_else(|| AlgebraError::Parse(format!("expected [..] in `{line}`")))?;
        let ell: Loop = if grade.n == 0 {
            let v = graph
                .vertex_index(inner.trim())
                .ok_or_else(|| AlgebraError::Parse(format!("unknown vertex `{inner}`")))?;
            vec![v]
        } else {
            inner
                .split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    let id = tok.trim_end_matches(['+', '-']);
                    graph
                        .edge_index(id)
                        .ok_or_else(|| AlgebraError::Parse(format!("unknown edge `{id}`")))
                })
                .collect::<Result<_, _>>()?
        };
        if !is_valid_loop(graph, grade, &ell) {
            return Err(AlgebraError::Parse(format!("`{line}` is not a loop of grade {grade}")));
        }
        if grade.n > 0 {
            let vs = vertices(graph, grade, &ell);
            for (tok, &v) in inner.split(',').zip(&vs) {
                let tok = tok.trim();
                let want = if graph.is_even(v) { '+' } else { '-' };
                if (tok.ends_with('+') || tok.ends_with('-')) && !tok.ends_with(want) {
                    return Err(AlgebraError::Parse(format!("direction mismatch at `{tok}`")));
                }
            }
        }
        x.add_term(ell, c);
    }
    Ok(x)
}

/// All walks of length `len` from `start`, lexicographic in edge index.
pub fn walks_from(graph: &BipartiteGraph, start: usize, len: usize) -> Vec<(Loop, usize)> {
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(len);
    fn rec(
        graph: &BipartiteGraph,
        v: usize,
        len: usize,
        path: &mut Vec<usize>,
        out: &mut Vec<(Loop, usize)>,
    ) {
        if path.len() == len {
            out.push((path.clone(), v));
            return;
        }
        for &e in graph.incident(v) {
            path.push(e);
            rec(graph, graph.other_end(e, v), len, path, out);
            path.pop();
        }
    }
    rec(graph, start, len, &mut path, &mut out);
    out
}

pub fn start_vertices(graph: &BipartiteGraph, sign: Sign) -> std::ops::Range<usize> {
    if sign.starts_even() {
        graph.even_vertices()
    } else {
        graph.odd_vertices()
    }
}

/// Basis loops of G_{n,±} in lexicographic order.
pub fn loop_basis(graph: &BipartiteGraph, grade: Grade) -> Vec<Loop> {
    if grade.n == 0 {
        return start_vertices(graph, grade.sign).map(|v| vec![v]).collect();
    }
    let mut out: Vec<Loop> = Vec::new();
    for v in start_vertices(graph, grade.sign) {
        for (w, end) in walks_from(graph, v, 2 * grade.n) {
            if end == v {
                out.push(w);
            }
        }
    }
    out.sort();
    out
}

/// Σ [p p*] over half-walks p from vertices of the right parity.
pub fn identity(graph: &BipartiteGraph, grade: Grade) -> Element {
    let mut x = Element::zero(grade);
    for v in start_vertices(graph, grade.sign) {
        if grade.n == 0 {
            x.add_term(vec![v], 1.0);
            continue;
        }
        for (p, _) in walks_from(graph, v, grade.n) {
            let mut ell = p.clone();
            ell.extend(p.iter().rev());
            x.add_term(ell, 1.0);
        }
    }
    x
}

pub fn multiply(x: &Element, y: &Element) -> Result<Element, AlgebraError> {
    if x.grade != y.grade {
        return Err(AlgebraError::GradeMismatch(x.grade, y.grade));
    }
    let n = x.grade.n;
    let mut out = Element::zero(x.grade);
    if n == 0 {
        for (k, c) in &x.terms {
            let c2 = y.coeff(k);
            if c2 != 0.0 {
                out.add_term(k.clone(), c * c2);
            }
        }
        return Ok(out);
    }
    let mut by_head: HashMap<&[usize], Vec<(&Loop, f64)>> = HashMap::new();
    for (k, c) in &y.terms {
        by_head.entry(&k[..n]).or_default().push((k, *c));
    }
    let mut want = vec![0usize; n];
    for (k, c) in &x.terms {
        for (i, slot) in want.iter_mut().enumerate() {
            *slot = k[2 * n - 1 - i];
        }
        if let Some(list) = by_head.get(want.as_slice()) {
            for (k2, c2) in list {
                let mut ell = k[..n].to_vec();
                ell.extend_from_slice(&k2[n..]);
                out.add_term(ell, c * c2);
            }
        }
    }
    Ok(out)
}

pub fn star(x: &Element) -> Element {
    Element::from_terms(
        x.grade,
        x.terms.iter().map(|(k, c)| {
            let mut r = k.clone();
            r.reverse();
            (r, *c)
        }),
    )
}

/// Commutator xy − yx.
pub fn commutator(x: &Element, y: &Element) -> Result<Element, AlgebraError> {
    Ok(&multiply(x, y)? - &multiply(y, x)?)
}

/// G_{n,±} → G_{n+1,±}: insert an out-and-back pair at the middle vertex.
pub fn include_up(graph: &BipartiteGraph, x: &Element) -> Element {
    let n = x.grade.n;
    let mut out = Element::zero(Grade::new(n + 1, x.grade.sign));
    for (k, c) in &x.terms {
        let mid = vertices(graph, x.grade, k)[n];
        for &e in graph.incident(mid) {
            let mut ell = Vec::with_capacity(2 * n + 2);
            if n > 0 {
                ell.extend_from_slice(&k[..n]);
            }
            ell.push(e);
            ell.push(e);
            if n > 0 {
                ell.extend_from_slice(&k[n..]);
            }
            out.add_term(ell, *c);
        }
    }
    out
}

/// Repeated [`include_up`] until grade `n` is reached.
pub fn include_to(graph: &BipartiteGraph, x: &Element, n: usize) -> Element {
    let mut y = x.clone();
    while y.grade.n < n {
        y = include_up(graph, &y);
    }
    y
}

/// G_{n,−} → G_{n+1,+}: ℓ ↦ Σ [ε ℓ ε*] over edges ε at the start vertex.
pub fn include_minus_to_plus(graph: &BipartiteGraph, x: &Element) -> Result<Element, AlgebraError> {
    if x.grade.sign != Sign::Minus {
        return Err(AlgebraError::GradeMismatch(x.grade, Grade::minus(x.grade.n)));
    }
    let mut out = Element::zero(Grade::plus(x.grade.n + 1));
    for (k, c) in &x.terms {
        let w = start_vertex(graph, x.grade, k);
        for &e in graph.incident(w) {
            let mut ell = vec![e];
            if x.grade.n > 0 {
                ell.extend_from_slice(k);
            }
            ell.push(e);
            out.add_term(ell, *c);
        }
    }
    Ok(out)
}

/// Trace on G_{n,±}, equal to the Markov trace of the central image in the tower.
pub fn trace_gpa(graph: &BipartiteGraph, perron: &PerronData, x: &Element) -> f64 {
    let n = x.grade.n;
    let mut total = 0.0;
    for (k, c) in &x.terms {
        if !is_palindrome(k) {
            continue;
        }
        let vs = vertices(graph, x.grade, k);
        let mid = perron.lambda(vs[n]);
        let v0 = vs[0];
        let w = match x.grade.sign {
            Sign::Plus => graph.dim(v0) as f64 * perron.d.powi(-(n as i32)),
            Sign::Minus => graph.dim_odd(v0) as f64 * perron.d.powi(-(n as i32) - 1),
        };
        total += c * w * mid;
    }
    total
}

fn is_palindrome(k: &[usize]) -> bool {
    k.iter().eq(k.iter().rev())
}

/// ⟨x, y⟩ = trace(y* x).
pub fn inner_product(
    graph: &BipartiteGraph,
    perron: &PerronData,
    x: &Element,
    y: &Element,
) -> Result<f64, AlgebraError> {
    Ok(trace_gpa(graph, perron, &multiply(&star(y), x)?))
}
