use std::collections::BTreeMap;

use super::{Row, Tangle, TangleError};
use crate::graphs::{BipartiteGraph, PerronData};
use crate::loopspace::{start_vertex, vertices, Element};

/// Result of a state sum together with the number of compatible states that
/// contributed.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: Element,
    pub states: u64,
}

/// Partial labeling at one height: the outer region and the edges on the
/// strings crossing the sweep line, left to right.
type Cut = (usize, Vec<usize>);

fn region(graph: &BipartiteGraph, cut: &Cut, p: usize) -> usize {
    let mut v = cut.0;
    for &e in &cut.1[..p] {
        v = graph.other_end(e, v);
    }
    v
}

fn push(map: &mut BTreeMap<Cut, (f64, u64)>, cut: Cut, c: f64, k: u64) {
    let slot = map.entry(cut).or_insert((0.0, 0));
    slot.0 += c;
    slot.1 += k;
}

pub fn evaluate(
    tangle: &Tangle,
    inputs: &[Element],
    graph: &BipartiteGraph,
    perron: &PerronData,
) -> Result<Element, TangleError> {
    evaluate_counted(tangle, inputs, graph, perron).map(|e| e.value)
}

/// Sweep the tangle bottom to top, carrying every labeling of the current cut.
/// Labelings that agree on a cut are merged, which prunes contradictions as
/// soon as a cap sees two different edges.
pub fn evaluate_counted(
    tangle: &Tangle,
    inputs: &[Element],
    graph: &BipartiteGraph,
    perron: &PerronData,
) -> Result<Evaluation, TangleError> {
    if inputs.len() != tangle.inputs().len() {
        return Err(TangleError::Signature(
            inputs.len().min(tangle.inputs().len()),
            format!("expected {} inputs, got {}", tangle.inputs().len(), inputs.len()),
        ));
    }
    for (i, (x, g)) in inputs.iter().zip(tangle.inputs()).enumerate() {
        if x.grade != *g {
            return Err(TangleError::Signature(
                i,
                format!("box expects grade {g}, element has grade {}", x.grade),
            ));
        }
    }
    let lam = |v: usize| perron.lambda(v);
    let outer_even = tangle.boundary().sign.starts_even();
    let mut cuts: BTreeMap<Cut, (f64, u64)> = BTreeMap::new();
    for v in 0..graph.n_vertices() {
        if graph.is_even(v) == outer_even {
            cuts.insert((v, vec![]), (1.0, 1));
        }
    }
    for row in tangle.rows() {
        let mut next = BTreeMap::new();
        for (cut, (c, k)) in cuts {
            match *row {
                Row::Cup(p) => {
                    let r = region(graph, &cut, p);
                    for &e in graph.incident(r) {
                        let w = graph.other_end(e, r);
                        let mut edges = cut.1.clone();
                        edges.splice(p..p, [e, e]);
                        push(&mut next, (cut.0, edges), c * (lam(w) / lam(r)).sqrt(), k);
                    }
                }
                Row::Cap(p) => {
                    if cut.1[p] != cut.1[p + 1] {
                        continue;
                    }
                    let r = region(graph, &cut, p);
                    let w = region(graph, &cut, p + 1);
                    let mut edges = cut.1;
                    edges.drain(p..p + 2);
                    push(&mut next, (cut.0, edges), c * (lam(w) / lam(r)).sqrt(), k);
                }
                Row::Box { input, at } => {
                    let x = &inputs[input];
                    let r = region(graph, &cut, at);
                    for (ell, a) in x.terms() {
                        if start_vertex(graph, x.grade, ell) != r {
                            continue;
                        }
                        let mid = vertices(graph, x.grade, ell)[x.grade.n];
                        let mut edges = cut.1.clone();
                        if x.grade.n > 0 {
                            edges.splice(at..at, ell.iter().copied());
                        }
                        let f = c * a * (lam(mid) / lam(r)).sqrt();
                        push(&mut next, (cut.0, edges), f, k);
                    }
                }
            }
        }
        cuts = next;
    }
    let g = tangle.boundary();
    let mut value = Element::zero(g);
    let mut states = 0;
    for ((outer, edges), (c, k)) in cuts {
        let (ell, mid) = if g.n == 0 {
            (vec![outer], outer)
        } else {
            let mid = region(graph, &(outer, edges.clone()), g.n);
            (edges, mid)
        };
        value.add_term(ell, c * (lam(outer) / lam(mid)).sqrt());
        states += k;
    }
    Ok(Evaluation { value, states })
}
