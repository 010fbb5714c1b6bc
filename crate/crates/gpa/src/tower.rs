//! The tower A₀ ⊂ A₁ ⊂ ⋯ of loops on the augmented graph Γ̃ based at ⋆.
//!
//! An element of A_n is stored as an [`Element`] of grade (n+1, −) over
//! `aug.full()`: a loop [η ε₁ … ε₂ₙ η′] that leaves ⋆ once and returns once.

use nalgebra::DMatrix;

use crate::gpa_ops::Gpa;
use crate::graphs::{AugmentedGraph, PerronData};
use crate::loopspace::{
    multiply, star, vertices, walks_from, AlgebraError, Element, Grade, Loop, Sign,
};

#[derive(Clone, Copy)]
pub struct Tower<'a> {
    pub aug: &'a AugmentedGraph,
    pub perron: &'a PerronData,
}

/// Result of comparing loop arithmetic with the block-matrix model.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub level: usize,
    pub dim_loops: usize,
    pub dim_blocks: usize,
    pub mult_residual: f64,
    pub star_residual: f64,
    pub trace_residual: f64,
}

impl OracleReport {
    pub fn max_residual(&self) -> f64 {
        self.mult_residual.max(self.star_residual).max(self.trace_residual)
    }
}

pub fn grade(n: usize) -> Grade {
    Grade::minus(n + 1)
}

pub fn level(x: &Element) -> usize {
    x.grade.n - 1
}

impl<'a> Tower<'a> {
    pub fn new(aug: &'a AugmentedGraph, perron: &'a PerronData) -> Self {
        Tower { aug, perron }
    }

    pub fn gpa(&self) -> Gpa<'a> {
        Gpa::new(self.aug.base(), self.perron)
    }

    fn d(&self) -> f64 {
        self.perron.d
    }

    fn lam(&self, v: usize) -> f64 {
        self.perron.lambda(v)
    }

    /// Paths of length n+1 from ⋆: a star edge followed by n base edges, with their end vertex.
    pub fn half_paths(&self, n: usize) -> Vec<(Loop, usize)> {
        let base = self.aug.base();
        let mut out = Vec::new();
        for &eta in self.aug.star_edges() {
            let v = self.aug.full().edge(eta).source;
            for (p, end) in walks_from(base, v, n) {
                let mut h = vec![eta];
                h.extend(p);
                out.push((h, end));
            }
        }
        out
    }

    pub fn basis(&self, n: usize) -> Vec<Loop> {
        let hs = self.half_paths(n);
        let mut out = Vec::new();
        for (h1, e1) in &hs {
            for (h2, e2) in &hs {
                if e1 == e2 {
                    let mut l = h1.clone();
                    l.extend(h2.iter().rev());
                    out.push(l);
                }
            }
        }
        out.sort();
        out
    }

    pub fn identity(&self, n: usize) -> Element {
        let mut x = Element::zero(grade(n));
        for (h, _) in self.half_paths(n) {
            let mut l = h.clone();
            l.extend(h.iter().rev());
            x.add_term(l, 1.0);
        }
        x
    }

    /// A_n → A_{n+1}: insert an out-and-back base edge at the middle vertex.
    pub fn include_up(&self, x: &Element) -> Element {
        let n = level(x);
        let base = self.aug.base();
        let mut out = Element::zero(grade(n + 1));
        for (k, c) in x.terms() {
            let mid = vertices(self.aug.full(), x.grade, k)[n + 1];
            for &e in base.incident(mid) {
                let mut l = k[..n + 1].to_vec();
                l.extend([e, e]);
                l.extend_from_slice(&k[n + 1..]);
                out.add_term(l, c);
            }
        }
        out
    }

    pub fn include_to(&self, x: &Element, n: usize) -> Element {
        let mut y = x.clone();
        while level(&y) < n {
            y = self.include_up(&y);
        }
        y
    }

    /// Product of elements at possibly different levels, taken in the larger one.
    pub fn mul(&self, x: &Element, y: &Element) -> Element {
        let n = level(x).max(level(y));
        multiply(&self.include_to(x, n), &self.include_to(y, n)).expect("same level")
    }

    /// tr_n: d^{-n} λ(middle vertex) on self-adjoint loops.
    pub fn trace(&self, x: &Element) -> f64 {
        let n = level(x);
        let scale = self.d().powi(-(n as i32));
        x.terms()
            .filter(|(k, _)| k.iter().eq(k.iter().rev()))
            .map(|(k, c)| {
                let mid = vertices(self.aug.full(), x.grade, k)[n + 1];
                c * scale * self.lam(mid)
            })
            .sum()
    }

    /// ⟨x, y⟩ = tr(y* x).
    pub fn inner(&self, x: &Element, y: &Element) -> f64 {
        self.trace(&self.mul(&star(y), x))
    }

    /// Trace-preserving conditional expectation A_n → A_{n−1}.
    pub fn cond_exp(&self, x: &Element) -> Result<Element, AlgebraError> {
        let n = level(x);
        if n == 0 {
            return Err(AlgebraError::LevelTooLow(1, 0));
        }
        let mut out = Element::zero(grade(n - 1));
        for (k, c) in x.terms() {
            if k[n] != k[n + 1] {
                continue;
            }
            let vs = vertices(self.aug.full(), x.grade, k);
            let f = self.lam(vs[n + 1]) / (self.d() * self.lam(vs[n]));
            let mut l = k[..n].to_vec();
            l.extend_from_slice(&k[n + 2..]);
            out.add_term(l, c * f);
        }
        Ok(out)
    }

    /// Repeated [`Tower::cond_exp`] down to level m.
    pub fn cond_exp_to(&self, x: &Element, m: usize) -> Result<Element, AlgebraError> {
        let mut y = x.clone();
        while level(&y) > m {
            y = self.cond_exp(&y)?;
        }
        Ok(y)
    }

    /// The Jones projection F_n ∈ A_{n+1}, with F_n² = d F_n.
    pub fn jones_f(&self, n: usize) -> Result<Element, AlgebraError> {
        if n == 0 {
            return Err(AlgebraError::LevelTooLow(1, 0));
        }
        let base = self.aug.base();
        let mut out = Element::zero(grade(n + 1));
        for (h, p) in self.half_paths(n - 1) {
            for &a in base.incident(p) {
                for &b in base.incident(p) {
                    let ma = base.other_end(a, p);
                    let mb = base.other_end(b, p);
                    let c = (self.lam(ma) * self.lam(mb)).sqrt() / self.lam(p);
                    let mut l = h.clone();
                    l.extend([a, a, b, b]);
                    l.extend(h.iter().rev());
                    out.add_term(l, c);
                }
            }
        }
        Ok(out)
    }

    /// F_k ∈ A_n for n ≥ k+1.
    pub fn jones_in(&self, k: usize, n: usize) -> Result<Element, AlgebraError> {
        Ok(self.include_to(&self.jones_f(k)?, n))
    }

    /// f^n_{n−k} = d^{k(k−1)} Π_{i<k} (e_{n+i} e_{n+i−1} ⋯ e_{n−k+1+i}) in A_{n+k}, e_j = F_j/d.
    pub fn multistep_projection(&self, n: usize, k: usize) -> Result<Element, AlgebraError> {
        if k > n {
            return Err(AlgebraError::IndexOutOfRange(k, n));
        }
        let top = n + k;
        let mut f = self.identity(top);
        for i in 0..k {
            for j in ((n + 1 + i - k)..=(n + i)).rev() {
                let e = self.jones_in(j, top)?.scaled(1.0 / self.d());
                f = multiply(&f, &e)?;
            }
        }
        Ok(f.scaled(self.d().powi((k * k.saturating_sub(1)) as i32)))
    }

    /// Pimsner-Popa basis of A₁ over A₀. With `alternative`, the second family
    /// runs over all pairs of star edges with a 1/m₊ weight instead of fixing
    /// the distinguished edge.
    pub fn pp_basis(&self, alternative: bool) -> Vec<Element> {
        let base = self.aug.base();
        let full = self.aug.full();
        let d = self.d();
        let stars_at = |v: usize| -> Vec<usize> {
            full.incident(v)
                .iter()
                .copied()
                .filter(|&e| self.aug.is_star_edge(e))
                .collect()
        };
        let mut out = Vec::new();
        for w in base.odd_vertices() {
            for &e1 in base.incident(w) {
                for &e2 in base.incident(w) {
                    let s1 = base.edge(e1).source;
                    let s2 = base.edge(e2).source;
                    let coef = (d * self.lam(s2) / self.lam(w)).sqrt();
                    if s1 == s2 {
                        let mut b = Element::zero(grade(1));
                        for eta in stars_at(s1) {
                            b.add_term(vec![eta, e1, e2, eta], coef);
                        }
                        out.push(b);
                    } else if alternative {
                        let m = base.dim(s2) as f64;
                        for eta1 in stars_at(s1) {
                            for eta2 in stars_at(s2) {
                                out.push(Element::from_terms(
                                    grade(1),
                                    [(vec![eta1, e1, e2, eta2], coef / m.sqrt())],
                                ));
                            }
                        }
                    } else {
                        let eta2 = self.aug.distinguished(s2);
                        for eta1 in stars_at(s1) {
                            out.push(Element::from_terms(
                                grade(1),
                                [(vec![eta1, e1, e2, eta2], coef)],
                            ));
                        }
                    }
                }
            }
        }
        out
    }

    /// φ_{n,±}: G_{n,±} over the base graph → A₀′∩A_n, resp. A₁′∩A_{n+1}.
    pub fn phi(&self, x: &Element) -> Element {
        let base = self.aug.base();
        let full = self.aug.full();
        let n = x.grade.n;
        let stars_at = |v: usize| {
            full.incident(v)
                .iter()
                .copied()
                .filter(|&e| self.aug.is_star_edge(e))
                .collect::<Vec<_>>()
        };
        let body = |k: &Loop| -> Vec<usize> {
            if n == 0 {
                vec![]
            } else {
                k.clone()
            }
        };
        match x.grade.sign {
            Sign::Plus => {
                let mut out = Element::zero(grade(n));
                for (k, c) in x.terms() {
                    let v = crate::loopspace::start_vertex(base, x.grade, k);
                    for eta in stars_at(v) {
                        let mut l = vec![eta];
                        l.extend(body(k));
                        l.push(eta);
                        out.add_term(l, c);
                    }
                }
                out
            }
            Sign::Minus => {
                let mut out = Element::zero(grade(n + 1));
                for (k, c) in x.terms() {
                    let w = crate::loopspace::start_vertex(base, x.grade, k);
                    for &e in base.incident(w) {
                        let v = base.other_end(e, w);
                        for eta in stars_at(v) {
                            let mut l = vec![eta, e];
                            l.extend(body(k));
                            l.extend([e, eta]);
                            out.add_term(l, c);
                        }
                    }
                }
                out
            }
        }
    }

    /// Inverse of φ on its image; `NotCentral` when x is not in the image.
    /// With an infinite tolerance this reads off the coefficients of the
    /// diagonal loops and ignores the rest.
    pub fn phi_inv(&self, x: &Element, sign: Sign, tol: f64) -> Result<Element, AlgebraError> {
        let n = match sign {
            Sign::Plus => level(x),
            Sign::Minus => level(x)
                .checked_sub(1)
                .ok_or(AlgebraError::LevelTooLow(1, 0))?,
        };
        let g = Grade::new(n, sign);
        let base = self.aug.base();
        let mut y = Element::zero(g);
        for (k, c) in x.terms() {
            let len = k.len();
            let diagonal = match sign {
                Sign::Plus => k[0] == k[len - 1],
                Sign::Minus => k[0] == k[len - 1] && k[1] == k[len - 2],
            };
            if !diagonal {
                continue;
            }
            let inner: &[usize] = match sign {
                Sign::Plus => &k[1..k.len() - 1],
                Sign::Minus => &k[2..k.len() - 2],
            };
            let key = if n == 0 {
                let v = match sign {
                    Sign::Plus => self.aug.full().edge(k[0]).source,
                    Sign::Minus => base.other_end(k[1], self.aug.full().edge(k[0]).source),
                };
                vec![v]
            } else {
                inner.to_vec()
            };
            if y.coeff(&key) == 0.0 {
                y.add_term(key, c);
            }
        }
        if self.phi(&y).distance(x) > tol {
            return Err(AlgebraError::NotCentral);
        }
        Ok(y)
    }

    /// Commutes with every basis loop of A_m (m = 0 or 1)?
    pub fn is_central(&self, x: &Element, m: usize, tol: f64) -> bool {
        self.basis(m).into_iter().all(|l| {
            let a = Element::from_loop(grade(m), l);
            let lhs = self.mul(&a, x);
            let rhs = self.mul(x, &a);
            lhs.distance(&rhs) <= tol
        })
    }

    /// Basis S_{0,n} (plus) or S_{1,n+1} (minus) of central vectors.
    pub fn commutant_basis(&self, n: usize, sign: Sign) -> Vec<Element> {
        crate::loopspace::loop_basis(self.aug.base(), Grade::new(n, sign))
            .into_iter()
            .map(|l| self.phi(&Element::from_loop(Grade::new(n, sign), l)))
            .collect()
    }

    /// (1/d²) Σ_b b x b* over the Pimsner-Popa basis.
    pub fn cond_exp_commutant(&self, x: &Element, alternative: bool) -> Element {
        let n = level(x).max(1);
        let x = self.include_to(x, n);
        let mut out = Element::zero(grade(n));
        for b in self.pp_basis(alternative) {
            let b = self.include_to(&b, n);
            let t = multiply(&multiply(&b, &x).unwrap(), &star(&b)).unwrap();
            out = &out + &t;
        }
        out.scaled(1.0 / (self.d() * self.d()))
    }

    /// θ_n(y₁⊗⋯⊗y_n) = y₁ v₁ y₂ v₂ ⋯ v_{n−1} y_n with v_k = F_k F_{k−1} ⋯ F₁.
    pub fn theta(&self, ys: &[Element]) -> Result<Element, AlgebraError> {
        let n = ys.len();
        if n == 0 {
            return Err(AlgebraError::LevelTooLow(1, 0));
        }
        let mut acc = self.include_to(&ys[0], n);
        for (k, y) in ys.iter().enumerate().skip(1) {
            for j in (1..=k).rev() {
                acc = multiply(&acc, &self.jones_in(j, n)?)?;
            }
            acc = multiply(&acc, &self.include_to(y, n))?;
        }
        Ok(acc)
    }

    /// Rotation of a central vector through φ: ρ on A₀′∩A_n, σ on A₁′∩A_{n+1}.
    pub fn rotate_central(
        &self,
        x: &Element,
        sign: Sign,
        check: bool,
        tol: f64,
    ) -> Result<Element, AlgebraError> {
        let m = if sign == Sign::Plus { 0 } else { 1 };
        if check && !self.is_central(x, m, tol) {
            return Err(AlgebraError::NotCentral);
        }
        let g = self.phi_inv(x, sign, if check { tol } else { f64::INFINITY })?;
        Ok(self.phi(&self.gpa().rotation(&g)?))
    }

    /// Block-matrix model of A_n: one full matrix algebra per end vertex of
    /// the half paths, matrix units indexed by pairs of half paths.
    pub fn matrix_oracle(&self, n: usize) -> OracleReport {
        let hs = self.half_paths(n);
        let m = hs.len();
        let index = |h: &[usize]| hs.iter().position(|(p, _)| p.as_slice() == h).unwrap();
        let to_matrix = |x: &Element| {
            let mut a = DMatrix::<f64>::zeros(m, m);
            for (k, c) in x.terms() {
                let i = index(&k[..n + 1]);
                let tail: Vec<usize> = k[n + 1..].iter().rev().copied().collect();
                a[(i, index(&tail))] += c;
            }
            a
        };
        let weights: Vec<f64> = hs
            .iter()
            .map(|(_, v)| self.d().powi(-(n as i32)) * self.lam(*v))
            .collect();
        let wtrace = |a: &DMatrix<f64>| (0..m).map(|i| weights[i] * a[(i, i)]).sum::<f64>();
        let mut ends: Vec<usize> = hs.iter().map(|(_, v)| *v).collect();
        ends.sort();
        ends.dedup();
        let dim_blocks = ends
            .iter()
            .map(|v| hs.iter().filter(|(_, w)| w == v).count().pow(2))
            .sum();
        let basis: Vec<Element> = self
            .basis(n)
            .into_iter()
            .map(|l| Element::from_loop(grade(n), l))
            .collect();
        let mats: Vec<DMatrix<f64>> = basis.iter().map(to_matrix).collect();
        let (mut mr, mut sr, mut tr) = (0.0f64, 0.0f64, 0.0f64);
        for (x, a) in basis.iter().zip(&mats) {
            sr = sr.max((to_matrix(&star(x)) - a.transpose()).amax());
            tr = tr.max((self.trace(x) - wtrace(a)).abs());
            for (y, b) in basis.iter().zip(&mats) {
                let p = multiply(x, y).unwrap();
                mr = mr.max((to_matrix(&p) - a * b).amax());
            }
        }
        OracleReport {
            level: n,
            dim_loops: basis.len(),
            dim_blocks,
            mult_residual: mr,
            star_residual: sr,
            trace_residual: tr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{augment, build_graph, path_graph, perron_data, star_graph, GraphSpec, Normalization};
    use crate::loopspace::loop_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(g: crate::graphs::BipartiteGraph) -> (AugmentedGraph, PerronData) {
        let p = perron_data(&g, Normalization::Markov).unwrap();
        (augment(&g), p)
    }

    /// Two even vertices, one of them doubled, with a double edge between a and x.
    fn parallel() -> (AugmentedGraph, PerronData) {
        let spec = GraphSpec::new(&["a", "b"], &["x", "y"], &[("a", "x"), ("a", "x"), ("b", "x"), ("b", "y")])
            .with_dim(&[("a", 2)]);
        setup(build_graph(&spec).unwrap())
    }

    fn all() -> Vec<(AugmentedGraph, PerronData)> {
        vec![setup(path_graph(3)), setup(path_graph(4)), setup(star_graph(3)), parallel()]
    }

    fn elems(t: &Tower, n: usize) -> Vec<Element> {
        t.basis(n).into_iter().map(|l| Element::from_loop(grade(n), l)).collect()
    }

    fn random(t: &Tower, n: usize, rng: &mut ChaCha8Rng) -> Element {
        Element::from_terms(grade(n), t.basis(n).into_iter().map(|l| (l, rng.gen_range(-1.0..1.0))))
    }

    fn random_g(t: &Tower, g: Grade, rng: &mut ChaCha8Rng) -> Element {
        Element::from_terms(g, loop_basis(t.aug.base(), g).into_iter().map(|l| (l, rng.gen_range(-1.0..1.0))))
    }

    /// A level-1 loop between two different star edges.
    fn off_diagonal(t: &Tower) -> Option<Element> {
        let l = t.basis(1).into_iter().find(|l| l[0] != l[3])?;
        Some(Element::from_loop(grade(1), l))
    }

    #[test]
    fn small_dimensions() {
        let (a, p) = setup(path_graph(2));
        assert_eq!(Tower::new(&a, &p).basis(0).len(), 1);
        let (a, p) = setup(path_graph(3));
        let t = Tower::new(&a, &p);
        assert_eq!(t.basis(0).len(), 2);
        assert_eq!(t.basis(1).len(), 4);
        assert!((t.trace(&Element::from_loop(grade(0), t.basis(0)[0].clone())) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matrix_oracle_agrees() {
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            for n in 0..=2 {
                let r = t.matrix_oracle(n);
                assert_eq!(r.dim_loops, r.dim_blocks);
                assert!(r.max_residual() <= 1e-12, "{r:?}");
            }
        }
    }

    #[test]
    fn trace_is_unital_and_tracial() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            for n in 0..=2 {
                assert!((t.trace(&t.identity(n)) - 1.0).abs() < 1e-12);
                let x = random(&t, n, &mut rng);
                let y = random(&t, n, &mut rng);
                assert!((t.trace(&t.mul(&x, &y)) - t.trace(&t.mul(&y, &x))).abs() < 1e-12);
                assert!((t.trace(&t.include_up(&x)) - t.trace(&x)).abs() < 1e-12);
            }
            for (i, x) in elems(&t, 1).iter().enumerate() {
                for (j, y) in elems(&t, 1).iter().enumerate() {
                    let ip = t.inner(x, y);
                    assert!(if i == j { ip > 0.0 } else { ip.abs() < 1e-14 });
                }
            }
        }
    }

    #[test]
    fn include_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            assert_eq!(t.include_up(&t.identity(1)), t.identity(2));
            let x = random(&t, 1, &mut rng);
            let y = random(&t, 1, &mut rng);
            let lhs = t.include_up(&t.mul(&x, &y));
            let rhs = t.mul(&t.include_up(&x), &t.include_up(&y));
            assert!(lhs.distance(&rhs) < 1e-12);
        }
    }

    #[test]
    fn conditional_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            assert!(t.cond_exp(&t.identity(0)).is_err());
            for n in 1..=2 {
                assert!(t.cond_exp(&t.identity(n)).unwrap().distance(&t.identity(n - 1)) < 1e-12);
                let x = random(&t, n, &mut rng);
                let a1 = random(&t, n - 1, &mut rng);
                let b1 = random(&t, n - 1, &mut rng);
                let lhs = t.cond_exp(&t.mul(&t.mul(&a1, &x), &b1)).unwrap();
                let rhs = t.mul(&t.mul(&a1, &t.cond_exp(&x).unwrap()), &b1);
                assert!(lhs.distance(&rhs) < 1e-12);
                for x in elems(&t, n) {
                    for y in elems(&t, n - 1) {
                        let l = t.trace(&t.mul(&x, &y));
                        let r = t.trace(&t.mul(&t.cond_exp(&x).unwrap(), &y));
                        assert!((l - r).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn basic_construction() {
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            let d = p.d;
            for n in 1..=2 {
                let f = t.jones_f(n).unwrap();
                assert!(star(&f).distance(&f) < 1e-12);
                assert!(t.mul(&f, &f).distance(&f.scaled(d)) < 1e-12);
                let e = t.cond_exp(&f.scaled(1.0 / d)).unwrap();
                assert!(e.distance(&t.identity(n).scaled(d.powi(-2))) < 1e-12);
                for x in elems(&t, n) {
                    let lhs = t.mul(&t.mul(&f, &x), &f);
                    let rhs = t.mul(&t.cond_exp(&x).unwrap(), &f).scaled(d);
                    assert!(lhs.distance(&rhs) < 1e-12);
                    assert!((t.trace(&t.mul(&x, &f)) - t.trace(&x) / d).abs() < 1e-12);
                }
                // y ↦ yF_n is injective on A_{n−1}: images of distinct loops stay orthogonal and nonzero
                let imgs: Vec<Element> = elems(&t, n - 1).iter().map(|y| t.mul(y, &f)).collect();
                for (i, u) in imgs.iter().enumerate() {
                    for (j, v) in imgs.iter().enumerate() {
                        let ip = t.inner(u, v);
                        assert!(if i == j { ip > 1e-9 } else { ip.abs() < 1e-12 });
                    }
                }
            }
        }
    }

    #[test]
    fn jones_projections_satisfy_tl() {
        let (a, p) = setup(path_graph(3));
        let t = Tower::new(&a, &p);
        let d = p.d;
        let top = 4;
        let f: Vec<Element> = (1..top).map(|k| t.jones_in(k, top).unwrap()).collect();
        for i in 0..f.len() {
            for j in 0..f.len() {
                let fij = t.mul(&f[i], &f[j]);
                if i.abs_diff(j) > 1 {
                    assert!(fij.distance(&t.mul(&f[j], &f[i])) < 1e-12);
                } else if i.abs_diff(j) == 1 {
                    assert!(t.mul(&fij, &f[i]).distance(&f[i]) < 1e-12);
                } else {
                    assert!(fij.distance(&f[i].scaled(d)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn multistep() {
        for (a, p) in [setup(path_graph(3)), setup(path_graph(4)), parallel()] {
            let t = Tower::new(&a, &p);
            let d = p.d;
            assert_eq!(t.multistep_projection(2, 0).unwrap(), t.identity(2));
            assert!(t
                .multistep_projection(2, 1)
                .unwrap()
                .distance(&t.jones_f(2).unwrap().scaled(1.0 / d))
                < 1e-12);
            assert!(t.multistep_projection(1, 2).is_err());
            for (n, k) in [(1, 1), (2, 1), (2, 2)] {
                let f = t.multistep_projection(n, k).unwrap();
                assert!(t.mul(&f, &f).distance(&f) < 1e-12);
                let e = t.cond_exp_to(&f, n).unwrap();
                assert!(e.distance(&t.identity(n).scaled(d.powi(-2 * k as i32))) < 1e-12);
                for x in elems(&t, n) {
                    let lhs = t.mul(&t.mul(&f, &x), &f);
                    let rhs = t.mul(&t.cond_exp_to(&x, n - k).unwrap(), &f);
                    assert!(lhs.distance(&rhs) < 1e-12, "n={n} k={k}");
                }
            }
        }
    }

    fn pp_check(t: &Tower, alternative: bool) -> f64 {
        let b = t.pp_basis(alternative);
        let d = t.perron.d;
        let mut r: f64 = 0.0;
        let mut sum = Element::zero(grade(1));
        for bi in &b {
            sum = &sum + &t.mul(bi, &star(bi));
        }
        r = r.max(sum.distance(&t.identity(1).scaled(d * d)));
        for x in elems(t, 1) {
            let mut y = Element::zero(grade(1));
            for bi in &b {
                let e = t.cond_exp(&t.mul(&star(bi), &x)).unwrap();
                y = &y + &t.mul(bi, &e);
            }
            r = r.max(y.distance(&x));
        }
        r
    }

    #[test]
    fn pimsner_popa_basis() {
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            assert!(pp_check(&t, false) < 1e-12);
            assert!(pp_check(&t, true) < 1e-12);
        }
        let (a, p) = setup(path_graph(2));
        assert_eq!(Tower::new(&a, &p).pp_basis(false).len(), 1);
    }

    #[test]
    fn central_vectors() {
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            let base = a.base();
            for n in 0..=2 {
                let plus = t.commutant_basis(n, Sign::Plus);
                assert_eq!(plus.len(), loop_basis(base, Grade::plus(n)).len());
                assert!(plus.iter().all(|x| t.is_central(x, 0, 1e-12)));
                let minus = t.commutant_basis(n, Sign::Minus);
                assert!(minus.iter().all(|x| t.is_central(x, 1, 1e-12)));
            }
            assert_eq!(t.phi(&crate::loopspace::identity(base, Grade::plus(2))), t.identity(2));
            assert_eq!(t.phi(&crate::loopspace::identity(base, Grade::minus(1))), t.identity(2));
            if let Some(x) = off_diagonal(&t) {
                assert!(!t.is_central(&x, 0, 1e-9));
            }
        }
    }

    #[test]
    fn phi_is_a_star_isomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            let ops = t.gpa();
            for g in [Grade::plus(1), Grade::plus(2), Grade::minus(1), Grade::minus(2)] {
                let x = random_g(&t, g, &mut rng);
                let y = random_g(&t, g, &mut rng);
                let xy = multiply(&x, &y).unwrap();
                assert!(t.phi(&xy).distance(&t.mul(&t.phi(&x), &t.phi(&y))) < 1e-12);
                assert!(t.phi(&star(&x)).distance(&star(&t.phi(&x))) < 1e-12);
                let tg = crate::loopspace::trace_gpa(ops.graph, ops.perron, &x);
                assert!((t.trace(&t.phi(&x)) - tg).abs() < 1e-12, "{g}");
                let back = t.phi_inv(&t.phi(&x), g.sign, 1e-12).unwrap();
                assert!(back.distance(&x) < 1e-12);
            }
            if let Some(x) = off_diagonal(&t) {
                assert_eq!(t.phi_inv(&x, Sign::Plus, 1e-9), Err(AlgebraError::NotCentral));
            }
        }
    }

    #[test]
    fn minus_to_plus_inclusion_commutes_with_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            for n in 0..=1 {
                let x = random_g(&t, Grade::minus(n), &mut rng);
                let lhs = t.phi(&crate::loopspace::include_minus_to_plus(a.base(), &x).unwrap());
                assert!(lhs.distance(&t.phi(&x)) < 1e-12);
            }
        }
    }

    #[test]
    fn commutant_expectation_matches_closed_form() {
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            let ops = t.gpa();
            for n in 1..=2 {
                for g in loop_basis(a.base(), Grade::plus(n)) {
                    let g = Element::from_loop(Grade::plus(n), g);
                    let closed = t.phi(&ops.cond_exp_left(&g).unwrap()).scaled(1.0 / p.d);
                    for alt in [false, true] {
                        let sum = t.cond_exp_commutant(&t.phi(&g), alt);
                        assert!(sum.distance(&closed) < 1e-12, "n={n} alt={alt}");
                    }
                }
            }
        }
    }

    fn theta_rand(t: &Tower, k: usize, rng: &mut ChaCha8Rng) -> Vec<Element> {
        (0..k).map(|_| random(t, 1, rng)).collect()
    }

    #[test]
    fn rotation_adjoint_plus() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            for n in 1..=3 {
                let g = random_g(&t, Grade::plus(n), &mut rng);
                let x = t.phi(&g);
                let rx = t.rotate_central(&x, Sign::Plus, true, 1e-9).unwrap();
                let ys = theta_rand(&t, n, &mut rng);
                let mut shifted = ys[1..].to_vec();
                shifted.push(ys[0].clone());
                let lhs = t.inner(&rx, &t.theta(&ys).unwrap());
                let rhs = t.inner(&x, &t.theta(&shifted).unwrap());
                assert!((lhs - rhs).abs() < 1e-10, "n={n}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn rotation_adjoint_minus() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (a, p) in all() {
            let t = Tower::new(&a, &p);
            for n in 1..=2 {
                let g = random_g(&t, Grade::minus(n), &mut rng);
                let x = t.phi(&g);
                let sx = t.rotate_central(&x, Sign::Minus, true, 1e-9).unwrap();
                let ys = theta_rand(&t, n + 1, &mut rng);
                let mut shifted = ys[1..n].to_vec();
                shifted.push(t.mul(&ys[n], &ys[0]));
                shifted.push(t.identity(1));
                let lhs = t.inner(&sx, &t.theta(&ys).unwrap());
                let rhs = t.inner(&x, &t.theta(&shifted).unwrap());
                assert!((lhs - rhs).abs() < 1e-10, "n={n}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn rotation_rejects_non_central() {
        let (a, p) = setup(path_graph(3));
        let t = Tower::new(&a, &p);
        let x = off_diagonal(&t).unwrap();
        assert_eq!(t.rotate_central(&x, Sign::Plus, true, 1e-9), Err(AlgebraError::NotCentral));
        assert!(t.rotate_central(&x, Sign::Plus, false, 1e-9).is_ok());
    }
}
