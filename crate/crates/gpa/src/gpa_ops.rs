//! Closed forms of the named operations on loop spaces: Jones projections,
//! the capping and cupping maps, the shading-changing maps, and rotations.
//!
//! Every map here is the action of a fixed tangle from [`crate::tangles::library`];
//! the tests compare the two.

use crate::graphs::{BipartiteGraph, PerronData};
use crate::loopspace::{
    include_up, multiply, start_vertex, start_vertices, vertices, walks_from, AlgebraError, Element, Grade, Loop,
    Sign,
};

/// A graph together with its spin vector.
#[derive(Clone, Copy)]
pub struct Gpa<'a> {
    pub graph: &'a BipartiteGraph,
    pub perron: &'a PerronData,
}

fn key(n: usize, ell: Vec<usize>, start: usize) -> Loop {
    if n == 0 {
        vec![start]
    } else {
        ell
    }
}

impl<'a> Gpa<'a> {
    pub fn new(graph: &'a BipartiteGraph, perron: &'a PerronData) -> Self {
        Gpa { graph, perron }
    }

    fn lam(&self, v: usize) -> f64 {
        self.perron.lambda(v)
    }

    fn verts(&self, grade: Grade, ell: &[usize]) -> Vec<usize> {
        vertices(self.graph, grade, ell)
    }

    fn need(x: &Element, n: usize) -> Result<(), AlgebraError> {
        if x.grade.n < n {
            Err(AlgebraError::LevelTooLow(n, x.grade.n))
        } else {
            Ok(())
        }
    }

    /// E_n ∈ G_{n+1,±}: the cup-cup element at positions n and n+1.
    pub fn jones_projection(&self, n: usize, sign: Sign) -> Result<Element, AlgebraError> {
        if n == 0 {
            return Err(AlgebraError::LevelTooLow(1, 0));
        }
        let g = self.graph;
        let mut out = Element::zero(Grade::new(n + 1, sign));
        for v in start_vertices(g, sign) {
            for (q, p) in walks_from(g, v, n - 1) {
                for &a in g.incident(p) {
                    for &b in g.incident(p) {
                        let ma = g.other_end(a, p);
                        let mb = g.other_end(b, p);
                        let c = (self.lam(ma) * self.lam(mb)).sqrt() / self.lam(p);
                        let mut ell = q.clone();
                        ell.extend([a, a, b, b]);
                        ell.extend(q.iter().rev());
                        out.add_term(ell, c);
                    }
                }
            }
        }
        Ok(out)
    }

    /// E_i included into G_{k,±}, k ≥ i+1.
    pub fn jones_in(&self, i: usize, k: usize, sign: Sign) -> Result<Element, AlgebraError> {
        if k < i + 1 {
            return Err(AlgebraError::IndexOutOfRange(i, k.saturating_sub(1)));
        }
        let mut e = self.jones_projection(i, sign)?;
        while e.grade.n < k {
            e = include_up(self.graph, &e);
        }
        Ok(e)
    }

    /// α_j: cap internal points j and j+1 (j = 2n closes around the left).
    pub fn alpha(&self, j: usize, x: &Element) -> Result<Element, AlgebraError> {
        Self::need(x, 1)?;
        let n = x.grade.n;
        if j == 0 || j > 2 * n {
            return Err(AlgebraError::IndexOutOfRange(j, 2 * n));
        }
        if j == 2 * n {
            return Ok(self.alpha_wrap(x));
        }
        let out_g = Grade::new(n - 1, x.grade.sign);
        let mut out = Element::zero(out_g);
        for (ell, c) in x.terms() {
            if ell[j - 1] != ell[j] {
                continue;
            }
            let v = self.verts(x.grade, ell);
            let mid = if j < n { v[n + 1] } else { v[n - 1] };
            let f = (self.lam(v[n]) * self.lam(v[j]) / (self.lam(v[j - 1]) * self.lam(mid))).sqrt();
            let mut rest = ell.clone();
            rest.drain(j - 1..j + 1);
            out.add_term(key(n - 1, rest, v[0]), c * f);
        }
        Ok(out)
    }

    fn alpha_wrap(&self, x: &Element) -> Element {
        let n = x.grade.n;
        let g = self.graph;
        let mut out = Element::zero(Grade::new(n - 1, x.grade.sign));
        for (ell, c) in x.terms() {
            if ell[0] != ell[2 * n - 1] {
                continue;
            }
            let v = self.verts(x.grade, ell);
            if n == 1 {
                for &a in g.incident(v[1]) {
                    let o = g.other_end(a, v[1]);
                    out.add_term(vec![o], c * self.lam(v[0]) / self.lam(o));
                }
                continue;
            }
            let f = (self.lam(v[0]).powi(2) * self.lam(v[n])
                / (self.lam(v[1]) * self.lam(v[2 * n - 2]) * self.lam(v[n - 1])))
            .sqrt();
            let mut ell2 = vec![ell[2 * n - 2]];
            ell2.extend_from_slice(&ell[1..2 * n - 2]);
            out.add_term(ell2, c * f);
        }
        out
    }

    /// The middle cap α_n, which is d times the trace-preserving conditional expectation.
    pub fn cond_exp_down(&self, x: &Element) -> Result<Element, AlgebraError> {
        Self::need(x, 1)?;
        self.alpha(x.grade.n, x)
    }

    /// β_j: cup at output points j and j+1 (j = 2n+2 wraps around the left).
    pub fn beta(&self, j: usize, x: &Element) -> Result<Element, AlgebraError> {
        let m = x.grade.n;
        let top = if m == 0 { 1 } else { 2 * m + 2 };
        if j == 0 || j > top {
            return Err(AlgebraError::IndexOutOfRange(j, top));
        }
        let g = self.graph;
        let mut out = Element::zero(Grade::new(m + 1, x.grade.sign));
        for (ell, c) in x.terms() {
            let v = self.verts(x.grade, ell);
            let body: &[usize] = if m == 0 { &[] } else { ell };
            if j == 2 * m + 2 {
                let f = (self.lam(v[0]) * self.lam(v[m]) / (self.lam(v[1]) * self.lam(v[m + 1]))).sqrt();
                for &a in g.incident(v[1]) {
                    let mut ell2 = vec![a];
                    ell2.extend_from_slice(&body[1..]);
                    ell2.push(body[0]);
                    ell2.push(a);
                    out.add_term(ell2, c * f);
                }
                continue;
            }
            let r = v[j - 1];
            for &a in g.incident(r) {
                let w = g.other_end(a, r);
                let u = if m + 1 < j {
                    v[m + 1]
                } else if m + 1 == j {
                    w
                } else {
                    v[m - 1]
                };
                let f = (self.lam(v[m]) * self.lam(w) / (self.lam(r) * self.lam(u))).sqrt();
                let mut ell2 = body.to_vec();
                ell2.splice(j - 1..j - 1, [a, a]);
                out.add_term(ell2, c * f);
            }
        }
        Ok(out)
    }

    /// Strip the first and last edge, flipping the shading: γ⁺ on plus grades,
    /// γ⁻ on minus grades.
    pub fn strip_ends(&self, x: &Element) -> Result<Element, AlgebraError> {
        Self::need(x, 1)?;
        let n = x.grade.n;
        let mut out = Element::zero(Grade::new(n - 1, x.grade.sign.flip()));
        for (ell, c) in x.terms() {
            if ell[0] != ell[2 * n - 1] {
                continue;
            }
            let v = self.verts(x.grade, ell);
            let rest = ell[1..2 * n - 1].to_vec();
            out.add_term(key(n - 1, rest, v[1]), c * self.lam(v[0]) / self.lam(v[1]));
        }
        Ok(out)
    }

    pub fn gamma_plus(&self, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Plus)?;
        self.strip_ends(x)
    }

    pub fn gamma_minus(&self, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Minus)?;
        self.strip_ends(x)
    }

    pub fn cond_exp_left(&self, x: &Element) -> Result<Element, AlgebraError> {
        self.gamma_plus(x)
    }

    /// Wrap a new string around the left: ℓ ↦ Σ_e [e ℓ e], flipping the shading.
    pub fn wrap_left(&self, x: &Element) -> Element {
        let g = self.graph;
        let mut out = Element::zero(Grade::new(x.grade.n + 1, x.grade.sign.flip()));
        for (ell, c) in x.terms() {
            let s = start_vertex(g, x.grade, ell);
            for &e in g.incident(s) {
                let mut ell2 = vec![e];
                if x.grade.n > 0 {
                    ell2.extend_from_slice(ell);
                }
                ell2.push(e);
                out.add_term(ell2, c);
            }
        }
        out
    }

    pub fn i_minus(&self, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Minus)?;
        Ok(self.wrap_left(x))
    }

    pub fn i_plus(&self, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Plus)?;
        Ok(self.wrap_left(x))
    }

    /// One click: [e₁…e₂ₙ] ↦ [e₂ₙ e₁…e₂ₙ₋₁], flipping the shading.
    pub fn click_back(&self, x: &Element) -> Result<Element, AlgebraError> {
        Self::need(x, 1)?;
        let n = x.grade.n;
        let mut out = Element::zero(Grade::new(n, x.grade.sign.flip()));
        for (ell, c) in x.terms() {
            let v = self.verts(x.grade, ell);
            let f = (self.lam(v[0]) * self.lam(v[n])
                / (self.lam(v[2 * n - 1]) * self.lam(v[n - 1])))
            .sqrt();
            let mut r = ell.clone();
            r.rotate_right(1);
            out.add_term(r, c * f);
        }
        Ok(out)
    }

    /// One click: [e₁…e₂ₙ] ↦ [e₂…e₂ₙ e₁], flipping the shading.
    pub fn click_forward(&self, x: &Element) -> Result<Element, AlgebraError> {
        Self::need(x, 1)?;
        let n = x.grade.n;
        let mut out = Element::zero(Grade::new(n, x.grade.sign.flip()));
        for (ell, c) in x.terms() {
            let v = self.verts(x.grade, ell);
            let f = (self.lam(v[0]) * self.lam(v[n]) / (self.lam(v[1]) * self.lam(v[n + 1]))).sqrt();
            let mut r = ell.clone();
            r.rotate_left(1);
            out.add_term(r, c * f);
        }
        Ok(out)
    }

    /// Two clicks moving the first two strings to the back.
    pub fn rotate_forward(&self, x: &Element) -> Result<Element, AlgebraError> {
        self.click_forward(&self.click_forward(x)?)
    }

    /// Two clicks moving the last two strings to the front.
    pub fn rotate_back(&self, x: &Element) -> Result<Element, AlgebraError> {
        self.click_back(&self.click_back(x)?)
    }

    /// ρ on G_{n,+}.
    pub fn rotation_plus(&self, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Plus)?;
        self.rotation(x)
    }

    /// σ on G_{n,−}.
    pub fn rotation_minus(&self, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Minus)?;
        self.rotation(x)
    }

    /// ρ or σ according to the shading of x; the identity in grade 0.
    pub fn rotation(&self, x: &Element) -> Result<Element, AlgebraError> {
        if x.grade.n == 0 {
            return Ok(x.clone());
        }
        self.rotate_back(x)
    }

    /// Left multiplication by E_{i} inside the grade of x.
    pub fn e_mul(&self, i: usize, x: &Element) -> Result<Element, AlgebraError> {
        let e = self.jones_in(i, x.grade.n, x.grade.sign)?;
        multiply(&e, x)
    }

    /// Right multiplication by E_{i} inside the grade of x.
    pub fn mul_e(&self, x: &Element, i: usize) -> Result<Element, AlgebraError> {
        let e = self.jones_in(i, x.grade.n, x.grade.sign)?;
        multiply(x, &e)
    }
}

/// The same maps written as composites of E-multiplications, middle caps and
/// cups, γ⁺ and i⁻ only. Used to cross-check the closed forms.
pub mod composites {
    use super::*;
    use crate::loopspace::identity;

    fn e_word(ops: &Gpa, idx: impl IntoIterator<Item = usize>, k: usize, s: Sign) -> Element {
        let mut acc = identity(ops.graph, Grade::new(k, s));
        for i in idx {
            acc = &acc * &ops.jones_in(i, k, s).expect("index below level");
        }
        acc
    }

    fn sandwich(l: &Element, x: &Element, r: &Element) -> Element {
        &(l * x) * r
    }

    /// α_j for j < n: (1/d) α_n α_{n+1}((E_n⋯E_j) β_{n+1}(x) E_n).
    pub fn alpha(ops: &Gpa, j: usize, x: &Element) -> Result<Element, AlgebraError> {
        let (n, s) = (x.grade.n, x.grade.sign);
        if j == 0 || j >= n {
            return Err(AlgebraError::IndexOutOfRange(j, n.saturating_sub(1)));
        }
        let b = ops.beta(n + 1, x)?;
        let y = sandwich(&e_word(ops, (j..=n).rev(), n + 1, s), &b, &e_word(ops, [n], n + 1, s));
        Ok(ops.alpha(n, &ops.alpha(n + 1, &y)?)?.scaled(1.0 / ops.perron.d))
    }

    /// α_2n = α_{2n−1} i⁻ γ⁺.
    pub fn alpha_wrap(ops: &Gpa, x: &Element) -> Result<Element, AlgebraError> {
        let n = x.grade.n;
        ops.alpha(2 * n - 1, &ops.wrap_left(&ops.strip_ends(x)?))
    }

    /// β_j for j ≤ n: (E_j E_{j+1}⋯E_n) β_{n+1}(x).
    pub fn beta(ops: &Gpa, j: usize, x: &Element) -> Result<Element, AlgebraError> {
        let (n, s) = (x.grade.n, x.grade.sign);
        if j == 0 || j > n {
            return Err(AlgebraError::IndexOutOfRange(j, n));
        }
        Ok(&e_word(ops, j..=n, n + 1, s) * &ops.beta(n + 1, x)?)
    }

    /// β_{2n+2} = α₂ i⁻ i⁺.
    pub fn beta_wrap(ops: &Gpa, x: &Element) -> Result<Element, AlgebraError> {
        ops.alpha(2, &ops.wrap_left(&ops.wrap_left(x)))
    }

    /// i⁺_n = γ⁺_{n+2}((E_1⋯E_n) β_{n+2}β_{n+1}(x) (E_{n+1}⋯E_1)).
    pub fn i_plus(ops: &Gpa, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Plus)?;
        let n = x.grade.n;
        let b = ops.beta(n + 2, &ops.beta(n + 1, x)?)?;
        let y = sandwich(
            &e_word(ops, 1..=n, n + 2, Sign::Plus),
            &b,
            &e_word(ops, (1..=n + 1).rev(), n + 2, Sign::Plus),
        );
        ops.gamma_plus(&y)
    }

    /// γ⁻_n = (1/d) α_{n+1} α_{n+1} α_{n+2}((E_n⋯E_1) β_{n+2}(i⁻x) (E_1⋯E_n)), n ≥ 2.
    pub fn gamma_minus(ops: &Gpa, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Minus)?;
        let n = x.grade.n;
        if n < 2 {
            return Err(AlgebraError::LevelTooLow(2, n));
        }
        let b = ops.beta(n + 2, &ops.i_minus(x)?)?;
        let y = sandwich(
            &e_word(ops, (1..=n).rev(), n + 2, Sign::Plus),
            &b,
            &e_word(ops, 1..=n, n + 2, Sign::Plus),
        );
        let y = ops.alpha(n + 2, &y)?;
        let y = ops.alpha(n + 1, &y)?;
        Ok(ops.alpha(n + 1, &y)?.scaled(1.0 / ops.perron.d))
    }

    /// One click on a plus grade: (1/d) γ⁺ α_{2n+2} i⁻ i⁺ α_n β_{n+1}.
    pub fn click_plus(ops: &Gpa, x: &Element) -> Result<Element, AlgebraError> {
        expect_sign(x, Sign::Plus)?;
        let n = x.grade.n;
        let y = ops.alpha(n, &ops.beta(n + 1, x)?)?;
        let y = ops.i_minus(&ops.i_plus(&y)?)?;
        let y = ops.alpha(2 * n + 2, &y)?;
        Ok(ops.gamma_plus(&y)?.scaled(1.0 / ops.perron.d))
    }

    /// One click on a minus grade: α_{n+1} β_{n+2} α_{2n+1} i⁻.
    pub fn click_minus(ops: &Gpa, x: &Element) -> Result<Element, AlgebraError> {
        let n = x.grade.n;
        let y = ops.alpha(2 * n + 1, &ops.i_minus(x)?)?;
        ops.alpha(n + 1, &ops.beta(n + 2, &y)?)
    }
}

fn expect_sign(x: &Element, sign: Sign) -> Result<(), AlgebraError> {
    if x.grade.sign != sign {
        Err(AlgebraError::GradeMismatch(x.grade, Grade::new(x.grade.n, sign)))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{path_graph, perron_data, star_graph, Normalization};
    use crate::loopspace::{identity, inner_product, loop_basis, trace_gpa};
    use crate::tangles::{evaluate, library, Tangle};

    fn graphs() -> Vec<(BipartiteGraph, PerronData)> {
        [path_graph(3), path_graph(4), star_graph(3)]
            .into_iter()
            .map(|g| {
                let p = perron_data(&g, Normalization::Markov).unwrap();
                (g, p)
            })
            .collect()
    }

    fn basis_elems(g: &BipartiteGraph, gr: Grade) -> Vec<Element> {
        loop_basis(g, gr)
            .into_iter()
            .map(|l| Element::from_loop(gr, l))
            .collect()
    }

    fn agree(
        ops: &Gpa,
        gr: Grade,
        t: &Tangle,
        f: impl Fn(&Element) -> Result<Element, AlgebraError>,
    ) {
        for x in basis_elems(ops.graph, gr) {
            let a = f(&x).unwrap();
            let b = evaluate(t, std::slice::from_ref(&x), ops.graph, ops.perron).unwrap();
            assert!(a.distance(&b) < 1e-10, "{t}: {x:?}\n{a:?}\n{b:?}");
        }
    }

    #[test]
    fn jones_projection_matches_tangle() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for sign in [Sign::Plus, Sign::Minus] {
                for n in 1..=3 {
                    let a = ops.jones_projection(n, sign).unwrap();
                    let b = evaluate(&library::jones(n, sign), &[], &g, &p).unwrap();
                    assert!(a.distance(&b) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn annular_maps_match_tangles() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for sign in [Sign::Plus, Sign::Minus] {
                for n in 1..=3 {
                    let gr = Grade::new(n, sign);
                    for j in 1..2 * n {
                        agree(&ops, gr, &library::alpha(j, gr), |x| ops.alpha(j, x));
                    }
                    agree(&ops, gr, &library::alpha_wrap(gr), |x| ops.alpha(2 * n, x));
                    for j in 1..=2 * n + 1 {
                        agree(&ops, gr, &library::beta(j, gr), |x| ops.beta(j, x));
                    }
                    agree(&ops, gr, &library::beta_wrap(gr), |x| ops.beta(2 * n + 2, x));
                    agree(&ops, gr, &library::strip_ends(gr), |x| ops.strip_ends(x));
                    agree(&ops, gr, &library::click_back(gr), |x| ops.click_back(x));
                    agree(&ops, gr, &library::click_forward(gr), |x| ops.click_forward(x));
                    agree(&ops, gr, &library::rotate_two(gr), |x| ops.rotate_forward(x));
                    agree(&ops, gr, &library::rotate_two_back(gr), |x| ops.rotate_back(x));
                }
                for n in 0..=3 {
                    let gr = Grade::new(n, sign);
                    agree(&ops, gr, &library::wrap_left(gr), |x| Ok(ops.wrap_left(x)));
                }
                let gr = Grade::new(0, sign);
                agree(&ops, gr, &library::beta(1, gr), |x| ops.beta(1, x));
            }
        }
    }

    #[test]
    fn temperley_lieb_relations() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            let d = p.d;
            for k in 2..=4 {
                let e: Vec<Element> = (1..k)
                    .map(|i| ops.jones_in(i, k, Sign::Plus).unwrap())
                    .collect();
                for i in 0..e.len() {
                    assert!(e[i].distance(&crate::loopspace::star(&e[i])) < 1e-12);
                    assert!((&e[i] * &e[i]).distance(&e[i].scaled(d)) < 1e-9);
                    for j in 0..e.len() {
                        if i.abs_diff(j) > 1 {
                            assert!((&e[i] * &e[j]).distance(&(&e[j] * &e[i])) < 1e-9);
                        }
                        if i.abs_diff(j) == 1 {
                            assert!((&(&e[i] * &e[j]) * &e[i]).distance(&e[i]) < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn a2_jones_projection_is_single_loop() {
        let g = path_graph(2);
        let p = perron_data(&g, Normalization::Markov).unwrap();
        let e = Gpa::new(&g, &p).jones_projection(1, Sign::Plus).unwrap();
        assert_eq!(e, Element::from_loop(Grade::plus(2), vec![0, 0, 0, 0]));
    }

    #[test]
    fn markov_property() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for n in 1..=2 {
                let e = ops.jones_projection(n, Sign::Plus).unwrap();
                for x in basis_elems(&g, Grade::plus(n)) {
                    let lhs = trace_gpa(&g, &p, &(&include_up(&g, &x) * &e));
                    let rhs = trace_gpa(&g, &p, &x) / p.d;
                    assert!((lhs - rhs).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cond_exp_down_examples() {
        let (g, p) = &graphs()[0];
        let ops = Gpa::new(g, p);
        for n in 1..=3 {
            let one = identity(g, Grade::plus(n));
            let lhs = ops.cond_exp_down(&one).unwrap();
            assert!(lhs.distance(&identity(g, Grade::plus(n - 1)).scaled(p.d)) < 1e-12);
        }
        let g = &path_graph(4);
        let p = &perron_data(g, Normalization::Markov).unwrap();
        let ops = Gpa::new(g, p);
        let ell = loop_basis(g, Grade::plus(2))
            .into_iter()
            .find(|l| l[1] != l[2])
            .unwrap();
        let x = Element::from_loop(Grade::plus(2), ell);
        assert!(ops.cond_exp_down(&x).unwrap().is_empty());
    }

    #[test]
    fn cond_exp_is_trace_compatible() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for n in 1..=2 {
                let gr = Grade::plus(n);
                let lower = basis_elems(&g, Grade::plus(n - 1));
                for x in basis_elems(&g, gr) {
                    let ex = ops.cond_exp_down(&x).unwrap().scaled(1.0 / p.d);
                    for y in &lower {
                        let lhs = trace_gpa(&g, &p, &(&ex * y));
                        let rhs = trace_gpa(&g, &p, &(&x * &include_up(&g, y)));
                        assert!((lhs - rhs).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn cap_after_cup_is_d() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for n in 1..=2 {
                let gr = Grade::plus(n);
                for x in basis_elems(&g, gr) {
                    for j in 1..=2 * n + 1 {
                        let y = ops.alpha(j, &ops.beta(j, &x).unwrap()).unwrap();
                        assert!(y.distance(&x.scaled(p.d)) < 1e-10, "j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn include_up_is_middle_beta() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for n in 0..=2 {
                for x in basis_elems(&g, Grade::minus(n)) {
                    assert_eq!(ops.beta(n + 1, &x).unwrap(), include_up(&g, &x));
                }
            }
        }
    }

    #[test]
    fn clicks_are_inverse_and_rotations_periodic() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for n in 1..=3 {
                for x in basis_elems(&g, Grade::plus(n)) {
                    let y = ops.click_back(&ops.click_forward(&x).unwrap()).unwrap();
                    assert!(y.distance(&x) < 1e-12);
                    let mut z = x.clone();
                    for _ in 0..n {
                        z = ops.rotate_forward(&z).unwrap();
                    }
                    assert!(z.distance(&x) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rotations_have_period_n_and_match_tangles() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for sign in [Sign::Plus, Sign::Minus] {
                for n in 1..=3 {
                    let gr = Grade::new(n, sign);
                    agree(&ops, gr, &library::rotate_two_back(gr), |x| ops.rotation(x));
                    for x in basis_elems(&g, gr) {
                        let mut z = x.clone();
                        for _ in 0..n {
                            z = ops.rotation(&z).unwrap();
                        }
                        assert!(z.distance(&x) < 1e-10);
                    }
                }
            }
            assert!(ops.rotation_plus(&identity(&g, Grade::minus(1))).is_err());
            assert!(ops.rotation_minus(&identity(&g, Grade::plus(1))).is_err());
        }
    }

    #[test]
    fn rotation_is_isometric_when_lambda_is_flat() {
        let g = path_graph(3);
        let p = perron_data(&g, Normalization::Markov).unwrap();
        let ops = Gpa::new(&g, &p);
        for sign in [Sign::Plus, Sign::Minus] {
            for n in 1..=3 {
                let gr = Grade::new(n, sign);
                for x in basis_elems(&g, gr) {
                    let rx = ops.rotation(&x).unwrap();
                    let t0 = trace_gpa(&g, &p, &x);
                    assert!((t0 - trace_gpa(&g, &p, &rx)).abs() < 1e-12 || n == 3);
                    for y in basis_elems(&g, gr) {
                        let ry = ops.rotation(&y).unwrap();
                        let a = inner_product(&g, &p, &x, &y).unwrap();
                        let b = inner_product(&g, &p, &rx, &ry).unwrap();
                        assert!((a - b).abs() < 1e-12, "{gr}");
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_rescales_norms_by_lambda_ratio() {
        let g = path_graph(4);
        let p = perron_data(&g, Normalization::Markov).unwrap();
        let ops = Gpa::new(&g, &p);
        let x = Element::from_loop(Grade::plus(2), vec![0, 1, 1, 0]);
        let rx = ops.rotation(&x).unwrap();
        let a = inner_product(&g, &p, &x, &x).unwrap();
        let b = inner_product(&g, &p, &rx, &rx).unwrap();
        assert!((b / a - p.lambda(0) / p.lambda(2)).abs() < 1e-12);
    }

    #[test]
    fn rotation_fixes_unit_up_to_two_strings_per_side() {
        let g = path_graph(3);
        let p = perron_data(&g, Normalization::Markov).unwrap();
        let ops = Gpa::new(&g, &p);
        for sign in [Sign::Plus, Sign::Minus] {
            for n in 0..=2 {
                let one = identity(&g, Grade::new(n, sign));
                assert!(ops.rotation(&one).unwrap().distance(&one) < 1e-12);
            }
            let one = identity(&g, Grade::new(3, sign));
            assert!(ops.rotation(&one).unwrap().distance(&one) > 0.5);
        }
    }

    #[test]
    fn a2_left_expectation() {
        let g = path_graph(2);
        let p = perron_data(&g, Normalization::Markov).unwrap();
        let ops = Gpa::new(&g, &p);
        let x = Element::from_loop(Grade::plus(1), vec![0, 0]);
        assert_eq!(ops.cond_exp_left(&x).unwrap(), Element::from_loop(Grade::minus(0), vec![1]));
    }

    #[test]
    fn composites_agree_with_closed_forms() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for n in 1..=3 {
                for x in basis_elems(&g, Grade::plus(n)) {
                    for j in 1..n {
                        let a = composites::alpha(&ops, j, &x).unwrap();
                        assert!(a.distance(&ops.alpha(j, &x).unwrap()) < 1e-10);
                    }
                    for j in 1..=n {
                        let a = composites::beta(&ops, j, &x).unwrap();
                        assert!(a.distance(&ops.beta(j, &x).unwrap()) < 1e-10);
                    }
                    let a = composites::alpha_wrap(&ops, &x).unwrap();
                    assert!(a.distance(&ops.alpha(2 * n, &x).unwrap()) < 1e-10);
                    let a = composites::beta_wrap(&ops, &x).unwrap();
                    assert!(a.distance(&ops.beta(2 * n + 2, &x).unwrap()) < 1e-10);
                    let a = composites::i_plus(&ops, &x).unwrap();
                    assert!(a.distance(&ops.i_plus(&x).unwrap()) < 1e-10);
                    let a = composites::click_plus(&ops, &x).unwrap();
                    assert!(a.distance(&ops.click_back(&x).unwrap()) < 1e-10);
                }
                for x in basis_elems(&g, Grade::minus(n)) {
                    let a = composites::gamma_minus(&ops, &x).unwrap_or_else(|_| x.clone());
                    if n >= 2 {
                        assert!(a.distance(&ops.gamma_minus(&x).unwrap()) < 1e-10);
                    }
                    let a = composites::click_minus(&ops, &x).unwrap();
                    assert!(a.distance(&ops.click_back(&x).unwrap()) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn unit_maps() {
        for (g, p) in graphs() {
            let ops = Gpa::new(&g, &p);
            for n in 0..=3 {
                let one = identity(&g, Grade::plus(n));
                assert_eq!(ops.i_plus(&one).unwrap(), identity(&g, Grade::minus(n + 1)));
                let onem = identity(&g, Grade::minus(n));
                assert_eq!(ops.i_minus(&onem).unwrap(), identity(&g, Grade::plus(n + 1)));
                if n > 0 {
                    // γ⁻ ∘ i⁻ on the unit is d times the unit
                    let y = ops.gamma_plus(&ops.i_minus(&onem).unwrap()).unwrap();
                    assert!(y.distance(&onem.scaled(p.d)).abs() < 1e-10 || n == 0);
                }
            }
        }
    }

    #[test]
    fn errors() {
        let (g, p) = &graphs()[0];
        let ops = Gpa::new(g, p);
        let x = identity(g, Grade::plus(1));
        assert!(matches!(ops.alpha(3, &x), Err(AlgebraError::IndexOutOfRange(3, 2))));
        assert!(matches!(ops.beta(5, &x), Err(AlgebraError::IndexOutOfRange(5, 4))));
        let z = identity(g, Grade::plus(0));
        assert!(matches!(ops.cond_exp_down(&z), Err(AlgebraError::LevelTooLow(1, 0))));
        assert!(ops.gamma_minus(&x).is_err());
        assert!(ops.jones_projection(0, Sign::Plus).is_err());
    }
}
