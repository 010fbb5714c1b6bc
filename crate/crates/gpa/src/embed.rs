//! Temperley-Lieb diagrams, their image in a graph planar algebra, and the
//! string-adding map Φ.
//!
//! A diagram on n strands has 2n points. Point i < n is the i-th string of the
//! first half of a loop; point n + i is the string facing it, at position
//! 2n − 1 − i of the loop. Products glue the second half of the left factor to
//! the first half of the right factor, as for loops.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::gpa_ops::Gpa;
use crate::graphs::{BipartiteGraph, PerronData};
use crate::loopspace::{
    include_to, inner_product, multiply, star, start_vertex, walks_from, Element, Grade, Loop, Sign,
};
use crate::tangles::{evaluate, library};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("strand counts differ: {0} vs {1}")]
    StrandMismatch(usize, usize),
    #[error("the shift s = {0} must be even")]
    OddShift(usize),
    #[error("level {0} exceeds the cap {1}")]
    CapExceeded(usize, usize),
    #[error("Jones projection E_{0} needs 1 ≤ i < {1}")]
    BadGenerator(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TlDiagram {
    n: usize,
    partner: Vec<usize>,
}

fn position(n: usize, p: usize) -> usize {
    if p < n {
        p
    } else {
        3 * n - 1 - p
    }
}

fn point(n: usize, pos: usize) -> usize {
    position(n, pos)
}

impl TlDiagram {
    /// From pairs of loop positions 0..2n; panics on a crossing or non-perfect matching.
    pub fn from_positions(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut partner = vec![usize::MAX; 2 * n];
        for &(a, b) in pairs {
            let (a, b) = (point(n, a), point(n, b));
            assert!(partner[a] == usize::MAX && partner[b] == usize::MAX && a != b);
            partner[a] = b;
            partner[b] = a;
        }
        assert!(partner.iter().all(|&q| q != usize::MAX), "not a perfect matching");
        let d = TlDiagram { n, partner };
        assert!(d.is_noncrossing(), "crossing matching");
        d
    }

    pub fn identity(n: usize) -> Self {
        let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, 2 * n - 1 - i)).collect();
        Self::from_positions(n, &pairs)
    }

    /// E_i (1 ≤ i < n): strings i, i+1 capped on both sides.
    pub fn jones(n: usize, i: usize) -> Result<Self, EmbedError> {
        if i == 0 || i >= n {
            return Err(EmbedError::BadGenerator(i, n));
        }
        let mut partner: Vec<usize> = (0..2 * n).map(|p| if p < n { p + n } else { p - n }).collect();
        let (a, b) = (i - 1, i);
        partner[a] = b;
        partner[b] = a;
        partner[n + a] = n + b;
        partner[n + b] = n + a;
        Ok(TlDiagram { n, partner })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Pairs of loop positions, each as (smaller, larger), sorted.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..2 * self.n)
            .filter_map(|p| {
                let (a, b) = (position(self.n, p), position(self.n, self.partner[p]));
                (a < b).then_some((a, b))
            })
            .collect();
        out.sort();
        out
    }

    fn is_noncrossing(&self) -> bool {
        let ps = self.positions();
        ps.iter().all(|&(a, b)| ps.iter().all(|&(c, e)| !(a < c && c < b && b < e)))
    }

    /// Mirror swapping the two halves.
    pub fn star(&self) -> Self {
        let n = self.n;
        let swap = |p: usize| if p < n { p + n } else { p - n };
        let mut partner = vec![0; 2 * n];
        for p in 0..2 * n {
            partner[swap(p)] = swap(self.partner[p]);
        }
        TlDiagram { n, partner }
    }

    /// All Catalan(n) diagrams, ordered.
    pub fn all(n: usize) -> Vec<Self> {
        fn rec(lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
            if lo >= hi {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for m in (lo + 1..hi).step_by(2) {
                for inner in rec(lo + 1, m) {
                    for outer in rec(m + 1, hi) {
                        let mut v = vec![(lo, m)];
                        v.extend(inner.iter().copied());
                        v.extend(outer.iter().copied());
                        out.push(v);
                    }
                }
            }
            out
        }
        let mut out: Vec<Self> = rec(0, 2 * n).iter().map(|p| Self::from_positions(n, p)).collect();
        out.sort();
        out
    }

    /// Stack self on the left of other; returns the diagram and the closed loops removed.
    pub fn compose(&self, other: &Self) -> Result<(Self, usize), EmbedError> {
        let n = self.n;
        if other.n != n {
            return Err(EmbedError::StrandMismatch(n, other.n));
        }
        // points 0..2n are self, 2n..4n are other; self's second half meets other's first
        let partner = |p: usize| {
            if p < 2 * n {
                self.partner[p]
            } else {
                2 * n + other.partner[p - 2 * n]
            }
        };
        let glued = |p: usize| -> Option<usize> {
            if (n..2 * n).contains(&p) {
                Some(p + n)
            } else if (2 * n..3 * n).contains(&p) {
                Some(p - n)
            } else {
                None
            }
        };
        let outer = |p: usize| if p < n { p } else { p - 2 * n };
        let mut seen = vec![false; 4 * n];
        let mut result = vec![0; 2 * n];
        for start in (0..n).chain(3 * n..4 * n) {
            let mut q = partner(start);
            while let Some(g) = glued(q) {
                seen[q] = true;
                seen[g] = true;
                q = partner(g);
            }
            result[outer(start)] = outer(q);
        }
        let mut loops = 0;
        for p in n..3 * n {
            if seen[p] {
                continue;
            }
            loops += 1;
            let mut q = p;
            loop {
                seen[q] = true;
                let g = glued(q).unwrap();
                seen[g] = true;
                q = partner(g);
                if q == p {
                    break;
                }
            }
        }
        Ok((TlDiagram { n, partner: result }, loops))
    }

    /// Number of loops after joining point i to point n + i.
    pub fn closure_loops(&self) -> usize {
        let n = self.n;
        let mut seen = vec![false; 2 * n];
        let mut loops = 0;
        for p in 0..2 * n {
            if seen[p] {
                continue;
            }
            loops += 1;
            let mut q = p;
            loop {
                seen[q] = true;
                let r = self.partner[q];
                seen[r] = true;
                q = if r < n { r + n } else { r - n };
                if q == p {
                    break;
                }
            }
        }
        loops
    }
}

/// A formal combination of diagrams on n strands.
#[derive(Debug, Clone, PartialEq)]
pub struct TlElement {
    pub n: usize,
    pub terms: BTreeMap<TlDiagram, f64>,
}

impl TlElement {
    pub fn zero(n: usize) -> Self {
        TlElement {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn diagram(d: TlDiagram) -> Self {
        TlElement {
            n: d.n,
            terms: BTreeMap::from([(d, 1.0)]),
        }
    }

    pub fn add_term(&mut self, d: TlDiagram, c: f64) {
        *self.terms.entry(d).or_insert(0.0) += c;
        self.terms.retain(|_, c| c.abs() > 1e-12);
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = TlElement::zero(self.n);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), *v);
        }
        out
    }

    pub fn star(&self) -> Self {
        TlElement {
            n: self.n,
            terms: self.terms.iter().map(|(k, v)| (k.star(), *v)).collect(),
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let keys: BTreeSet<&TlDiagram> = self.terms.keys().chain(other.terms.keys()).collect();
        keys.into_iter()
            .map(|k| (self.terms.get(k).unwrap_or(&0.0) - other.terms.get(k).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn tl_multiply(x: &TlElement, y: &TlElement, d: f64) -> Result<TlElement, EmbedError> {
    if x.n != y.n {
        return Err(EmbedError::StrandMismatch(x.n, y.n));
    }
    let mut out = TlElement::zero(x.n);
    for (a, ca) in &x.terms {
        for (b, cb) in &y.terms {
            let (c, loops) = a.compose(b)?;
            out.add_term(c, ca * cb * d.powi(loops as i32));
        }
    }
    Ok(out)
}

/// Markov trace d^{loops − n} of the closure.
pub fn tl_trace(x: &TlElement, d: f64) -> f64 {
    x.terms
        .iter()
        .map(|(k, c)| c * d.powi(k.closure_loops() as i32 - x.n as i32))
        .sum()
}

/// E_{i₁}E_{i₂}⋯ as a single diagram with its power of d.
pub fn tl_word(n: usize, word: &[usize], d: f64) -> Result<TlElement, EmbedError> {
    let mut x = TlElement::diagram(TlDiagram::identity(n));
    for &i in word {
        x = tl_multiply(&x, &TlElement::diagram(TlDiagram::jones(n, i)?), d)?;
    }
    Ok(x)
}

/// All words of length 1..=max_len in the generators E_1..E_{n−1}.
pub fn tl_words(n: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for i in 1..n {
                let mut v = w.clone();
                v.push(i);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Each diagram becomes the state sum of its cup tangle.
pub fn tl_to_gpa(
    x: &TlElement,
    graph: &BipartiteGraph,
    perron: &PerronData,
    sign: Sign,
) -> Element {
    let g = Grade::new(x.n, sign);
    let mut out = Element::zero(g);
    for (k, c) in &x.terms {
        let t = library::matching(g, &k.positions());
        let v = evaluate(&t, &[], graph, perron).expect("matching tangles have no inputs");
        out = &out + &v.scaled(*c);
    }
    out
}

/// Φ: s strings on the left for the plus side, s + 1 for the minus side.
pub fn embedding_shift(
    x: &Element,
    s: usize,
    graph: &BipartiteGraph,
    perron: &PerronData,
    cap: usize,
) -> Result<Element, EmbedError> {
    if s % 2 == 1 {
        return Err(EmbedError::OddShift(s));
    }
    let add = if x.grade.sign == Sign::Plus { s } else { s + 1 };
    if x.grade.n + add > cap {
        return Err(EmbedError::CapExceeded(x.grade.n + add, cap));
    }
    if add == 0 {
        return Ok(x.clone());
    }
    let t = library::add_strings(add, x.grade);
    Ok(evaluate(&t, std::slice::from_ref(x), graph, perron).expect("grades agree"))
}

/// Gram matrix of the trace inner product.
pub fn gram(graph: &BipartiteGraph, perron: &PerronData, xs: &[Element]) -> DMatrix<f64> {
    let m = xs.len();
    DMatrix::from_fn(m, m, |i, j| inner_product(graph, perron, &xs[i], &xs[j]).unwrap())
}

/// Numerical rank: eigenvalues above `cutoff` times the largest.
pub fn rank(gram: &DMatrix<f64>, cutoff: f64) -> usize {
    if gram.nrows() == 0 {
        return 0;
    }
    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let top = eig.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return 0;
    }
    eig.iter().filter(|&&v| v > cutoff * top).count()
}

/// Image of TL_m with the given shading.
pub fn tl_image(graph: &BipartiteGraph, perron: &PerronData, m: usize, sign: Sign) -> Vec<Element> {
    TlDiagram::all(m)
        .into_iter()
        .map(|k| tl_to_gpa(&TlElement::diagram(k), graph, perron, sign))
        .collect()
}

/// Half paths of length k from even vertices; loops of G_{k,+} are pairs of them
/// with equal ends, and multiply as matrix units.
fn half_paths(graph: &BipartiteGraph, k: usize) -> Vec<(usize, Loop)> {
    let mut out = Vec::new();
    for v in graph.even_vertices() {
        for (p, _) in walks_from(graph, v, k) {
            out.push((v, p));
        }
    }
    out
}

fn to_matrix(graph: &BipartiteGraph, hs: &[(usize, Loop)], x: &Element) -> DMatrix<f64> {
    let k = x.grade.n;
    let index: BTreeMap<(usize, &[usize]), usize> =
        hs.iter().enumerate().map(|(i, (v, p))| ((*v, p.as_slice()), i)).collect();
    let mut m = DMatrix::zeros(hs.len(), hs.len());
    for (l, c) in x.terms() {
        let v = start_vertex(graph, x.grade, l);
        if k == 0 {
            let i = index[&(v, &[][..])];
            m[(i, i)] += c;
            continue;
        }
        let tail: Vec<usize> = l[k..].iter().rev().copied().collect();
        m[(index[&(v, &l[..k])], index[&(v, tail.as_slice())])] += c;
    }
    m
}

fn from_matrix(hs: &[(usize, Loop)], grade: Grade, m: &DMatrix<f64>) -> Element {
    let mut out = Element::zero(grade);
    for (i, (v, a)) in hs.iter().enumerate() {
        for (j, (w, b)) in hs.iter().enumerate() {
            if v != w || m[(i, j)].abs() < 1e-13 {
                continue;
            }
            if grade.n == 0 {
                out.add_term(vec![*v], m[(i, j)]);
            } else {
                let mut l = a.clone();
                l.extend(b.iter().rev());
                out.add_term(l, m[(i, j)]);
            }
        }
    }
    out
}

/// h^{-1/2} on the support of a positive element h of G_{k,+}.
fn inverse_sqrt(graph: &BipartiteGraph, h: &Element) -> Element {
    let hs = half_paths(graph, h.grade.n);
    let m = to_matrix(graph, &hs, h);
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let f = eig.eigenvalues.map(|v| if v > 1e-10 * top.max(1e-300) { v.powf(-0.5) } else { 0.0 });
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&f) * eig.eigenvectors.transpose();
    from_matrix(&hs, h.grade, &r)
}

/// Pimsner-Popa basis of span(upper) over span(lower) in the GPA, where lower
/// sits in grade k and upper in grade k+1, by Gram-Schmidt against E = (1/d)·capping.
pub fn pimsner_popa_basis(graph: &BipartiteGraph, perron: &PerronData, upper: &[Element]) -> Vec<Element> {
    let ops = Gpa::new(graph, perron);
    let d = perron.d;
    let e = |y: &Element| ops.cond_exp_down(y).unwrap().scaled(1.0 / d);
    let up = |y: &Element| crate::loopspace::include_up(graph, y);
    let mut basis: Vec<Element> = Vec::new();
    for x in upper {
        let mut r = x.clone();
        for b in &basis {
            r = &r - &multiply(b, &up(&e(&multiply(&star(b), x).unwrap()))).unwrap();
        }
        let h = e(&multiply(&star(&r), &r).unwrap());
        if h.max_abs() < 1e-10 {
            continue;
        }
        basis.push(multiply(&r, &up(&inverse_sqrt(graph, &h))).unwrap());
    }
    basis
}

/// Residuals of the standardness conditions for Q_s ⊂ Q_{s+1} ⊂ (Q_{s+2}, e_{s+1})
/// with Q = the TL image.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardness {
    pub s: usize,
    /// max over x ∈ Q_{s+1} of ‖e x e − E_{Q_s}(x) e‖
    pub compression: f64,
    /// rank of z ↦ z e on Q_s against dim Q_s
    pub injective: bool,
    /// ‖E_{Q_{s+1}}(e) − d⁻²‖
    pub expectation: f64,
    /// dim span(Q_{s+1} e Q_{s+1}) against dim Q_{s+2}
    pub span_rank: usize,
    pub dim_top: usize,
}

impl Standardness {
    pub fn holds(&self, tol: f64) -> bool {
        self.compression <= tol && self.injective && self.expectation <= tol && self.span_rank == self.dim_top
    }
}

pub fn standardness(graph: &BipartiteGraph, perron: &PerronData, s: usize, cutoff: f64) -> Standardness {
    let ops = Gpa::new(graph, perron);
    let d = perron.d;
    let up = |x: &Element| crate::loopspace::include_up(graph, x);
    let e = ops.jones_projection(s + 1, Sign::Plus).unwrap().scaled(1.0 / d);
    let mid = tl_image(graph, perron, s + 1, Sign::Plus);
    let low = tl_image(graph, perron, s, Sign::Plus);
    let mut compression: f64 = 0.0;
    for x in &mid {
        let lhs = multiply(&multiply(&e, &up(x)).unwrap(), &e).unwrap();
        // the capping map is d times the trace-preserving expectation
        let ex = ops.cond_exp_down(x).unwrap().scaled(1.0 / d);
        let rhs = multiply(&crate::loopspace::include_to(graph, &ex, s + 2), &e).unwrap();
        compression = compression.max(lhs.distance(&rhs));
    }
    let imgs: Vec<Element> = low
        .iter()
        .map(|z| multiply(&crate::loopspace::include_to(graph, z, s + 2), &e).unwrap())
        .collect();
    let injective = rank(&gram(graph, perron, &imgs), cutoff) == rank(&gram(graph, perron, &low), cutoff);
    let ee = ops.cond_exp_down(&e).unwrap().scaled(1.0 / d);
    let expectation = ee.distance(&crate::loopspace::identity(graph, Grade::plus(s + 1)).scaled(d.powi(-2)));
    let mut prods = Vec::new();
    for x in &mid {
        for y in &mid {
            prods.push(multiply(&multiply(&up(x), &e).unwrap(), &up(y)).unwrap());
        }
    }
    let top = tl_image(graph, perron, s + 2, Sign::Plus);
    Standardness {
        s,
        compression,
        injective,
        expectation,
        span_rank: rank(&gram(graph, perron, &prods), cutoff),
        dim_top: rank(&gram(graph, perron, &top), cutoff),
    }
}

/// Smallest r with Q_{2r} ⊂ Q_{2r+1} ⊂ (Q_{2r+2}, e_{2r+1}) standard.
pub fn minimal_r(graph: &BipartiteGraph, perron: &PerronData, r_max: usize, tol: f64, cutoff: f64) -> Option<usize> {
    (0..=r_max).find(|&r| standardness(graph, perron, 2 * r, cutoff).holds(tol))
}

/// One named residual of [`verify_embedding`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedCheck {
    pub name: String,
    pub residual: f64,
}

/// Every identity used to show Φ is an inclusion, on the TL image, for n ≤ n_max.
pub fn verify_embedding(
    graph: &BipartiteGraph,
    perron: &PerronData,
    s: usize,
    n_max: usize,
    cutoff: f64,
) -> Result<Vec<EmbedCheck>, EmbedError> {
    let ops = Gpa::new(graph, perron);
    let d = perron.d;
    let cap = usize::MAX;
    let phi = |x: &Element| embedding_shift(x, s, graph, perron, cap);
    let mut out = Vec::new();
    // the left expectation of P needs a basis of Q_{s+1} over Q_s, and only
    // matches Φ when that inclusion is standard
    let pp = (s > 0 && standardness(graph, perron, s, cutoff).holds(1e-9))
        .then(|| pimsner_popa_basis(graph, perron, &tl_image(graph, perron, s + 1, Sign::Plus)));
    let mut push = |name: String, r: f64| out.push(EmbedCheck { name, residual: r });

    for n in 1..=n_max {
        let diagrams = TlDiagram::all(n);
        let imgs = tl_image(graph, perron, n, Sign::Plus);
        let phis: Vec<Element> = imgs.iter().map(phi).collect::<Result<_, _>>()?;

        // Φ(E_j) = E_{s+j}
        let mut r: f64 = 0.0;
        for j in 1..n {
            let ej = ops.jones_in(j, n, Sign::Plus).unwrap();
            let rhs = ops.jones_in(s + j, s + n, Sign::Plus).unwrap();
            r = r.max(phi(&ej)?.distance(&rhs));
        }
        push(format!("n={n} shifted Jones projections"), r);

        // multiplicative and *-preserving on words
        let words: Vec<Element> = std::iter::once(vec![])
            .chain(tl_words(n, 3))
            .map(|w| tl_word(n, &w, d).map(|t| tl_to_gpa(&t, graph, perron, Sign::Plus)))
            .collect::<Result<_, _>>()?;
        let wphis: Vec<Element> = words.iter().map(phi).collect::<Result<_, _>>()?;
        let (mut rm, mut rs): (f64, f64) = (0.0, 0.0);
        for (x, px) in words.iter().zip(&wphis) {
            rs = rs.max(phi(&star(x))?.distance(&star(px)));
            for (y, py) in words.iter().zip(&wphis) {
                let lhs = phi(&multiply(x, y).unwrap())?;
                rm = rm.max(lhs.distance(&multiply(px, py).unwrap()));
            }
        }
        push(format!("n={n} multiplicative on words"), rm);
        push(format!("n={n} star-preserving on words"), rs);

        // the image commutes with Q_s on the first s strings
        let mut rc: f64 = 0.0;
        for j in 1..s {
            let ej = ops.jones_in(j, s + n, Sign::Plus).unwrap();
            for p in &phis {
                rc = rc.max((&multiply(&ej, p).unwrap() - &multiply(p, &ej).unwrap()).max_abs());
            }
        }
        push(format!("n={n} image commutes with Q_s"), rc);

        // conditional expectation, right inclusion, left expectation
        let (mut re, mut ri, mut rg): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for (x, px) in imgs.iter().zip(&phis) {
            if n >= 2 {
                let lhs = phi(&ops.cond_exp_down(x).unwrap())?;
                re = re.max(lhs.distance(&ops.cond_exp_down(px).unwrap()));
            }
            let lhs = phi(&crate::loopspace::include_up(graph, x))?;
            ri = ri.max(lhs.distance(&crate::loopspace::include_up(graph, px)));
            if let Some(pp) = &pp {
                let mut rhs = Element::zero(px.grade);
                for b in pp {
                    let b = include_to(graph, b, s + n);
                    rhs = &rhs + &multiply(&multiply(&b, px).unwrap(), &star(&b)).unwrap();
                }
                let lhs = phi(&ops.gamma_plus(x).unwrap())?;
                rg = rg.max(lhs.distance(&rhs.scaled(1.0 / d)));
            }
        }
        if n >= 2 {
            push(format!("n={n} commutes with conditional expectation"), re);
        }
        push(format!("n={n} commutes with right inclusion"), ri);
        if pp.is_some() {
            push(format!("n={n} left expectation"), rg);
        }

        // i⁻ on the minus side
        let mut rl: f64 = 0.0;
        for x in tl_image(graph, perron, n, Sign::Minus) {
            let lhs = phi(&ops.i_minus(&x).unwrap())?;
            rl = rl.max(lhs.distance(&phi(&x)?));
        }
        push(format!("n={n} commutes with i-"), rl);

        // injectivity: rank of Φ on the diagram images
        let rk = rank(&gram(graph, perron, &phis), cutoff);
        push(
            format!("n={n} injective (rank {rk} of {})", diagrams.len()),
            (diagrams.len() as f64 - rk as f64).abs(),
        );

        // isometry constant
        let mut ri: f64 = 0.0;
        for (x, px) in imgs.iter().zip(&phis) {
            for (y, py) in imgs.iter().zip(&phis) {
                let a = inner_product(graph, perron, x, y).unwrap();
                let b = inner_product(graph, perron, px, py).unwrap();
                ri = ri.max((a - b).abs());
            }
        }
        push(format!("n={n} isometric"), ri);
    }
    Ok(out)
}
