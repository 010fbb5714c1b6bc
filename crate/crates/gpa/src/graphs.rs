//! Bipartite multigraphs, the star augmentation, and Perron-Frobenius data.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved name of the augmentation vertex.
pub const STAR: &str = "*";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no even vertices")]
    NoEvenVertices,
    #[error("graph has no odd vertices")]
    NoOddVertices,
    #[error("graph has no edges")]
    NoEdges,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("vertex id `{0}` is reserved")]
    ReservedVertex(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("edge {0}-{1} does not run from an even to an odd vertex")]
    NotBipartite(String, String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("dimension entry for `{0}` must name an even vertex with a positive value")]
    BadDimension(String),
    #[error("power iteration did not converge after {0} iterations")]
    NonConvergence(usize),
}

/// On-disk graph description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphSpec {
    pub even: Vec<String>,
    pub odd: Vec<String>,
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<BTreeMap<String, u32>>,
}

impl GraphSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn new(even: &[&str], odd: &[&str], edges: &[(&str, &str)]) -> Self {
        GraphSpec {
            even: even.iter().map(|s| s.to_string()).collect(),
            odd: odd.iter().map(|s| s.to_string()).collect(),
            edges: edges
                .iter()
                .map(|(s, t)| (s.to_string(), t.to_string()))
                .collect(),
            dim: None,
        }
    }

    pub fn with_dim(mut self, dim: &[(&str, u32)]) -> Self {
        self.dim = Some(dim.iter().map(|(v, m)| (v.to_string(), *m)).collect());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: String,
    /// Global index of the even endpoint.
    pub source: usize,
    /// Global index of the odd endpoint.
    pub target: usize,
}

/// Vertices are indexed globally: even vertices first, then odd ones,
/// each block sorted by id. Edges are sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    names: Vec<String>,
    n_even: usize,
    edges: Vec<Edge>,
    dim: Vec<u32>,
    incident: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn n_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn n_even(&self) -> usize {
        self.n_even
    }

    pub fn n_odd(&self) -> usize {
        self.names.len() - self.n_even
    }

    pub fn is_even(&self, v: usize) -> bool {
        v < self.n_even
    }

    pub fn even_vertices(&self) -> std::ops::Range<usize> {
        0..self.n_even
    }

    pub fn odd_vertices(&self) -> std::ops::Range<usize> {
        self.n_even..self.names.len()
    }

    pub fn vertex_name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    /// Edges touching `v`, in increasing index order.
    pub fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    /// Endpoint of `e` opposite to `v`.
    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let edge = &self.edges[e];
        if edge.source == v {
            edge.target
        } else {
            debug_assert_eq!(edge.target, v);
            edge.source
        }
    }

    /// m₊ at an even vertex.
    pub fn dim(&self, v: usize) -> u32 {
        self.dim[v]
    }

    /// m₋(w) = Σ_{t(ε)=w} m₊(s(ε)).
    pub fn dim_odd(&self, w: usize) -> u32 {
        self.incident[w]
            .iter()
            .map(|&e| self.dim[self.edges[e].source])
            .sum()
    }

    /// The even × odd adjacency matrix Λ.
    pub fn lambda_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_odd()]; self.n_even];
        for e in &self.edges {
            m[e.source][e.target - self.n_even] += 1.0;
        }
        m
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            even: self.names[..self.n_even].to_vec(),
            odd: self.names[self.n_even..].to_vec(),
            edges: self
                .edges
                .iter()
                .map(|e| (self.names[e.source].clone(), self.names[e.target].clone()))
                .collect(),
            dim: Some(
                self.even_vertices()
                    .map(|v| (self.names[v].clone(), self.dim[v]))
                    .collect(),
            ),
        }
    }

    fn from_parts(names: Vec<String>, n_even: usize, edges: Vec<Edge>, dim: Vec<u32>) -> Self {
        let mut incident = vec![Vec::new(); names.len()];
        for (i, e) in edges.iter().enumerate() {
            incident[e.source].push(i);
            incident[e.target].push(i);
        }
        BipartiteGraph {
            names,
            n_even,
            edges,
            dim,
            incident,
        }
    }
}

fn edge_ids(pairs: &[(String, String)]) -> Vec<String> {
    let mut seen: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    pairs
        .iter()
        .map(|(s, t)| {
            let k = seen.entry((s, t)).or_insert(0);
            let id = if *k == 0 {
                format!("{s}-{t}")
            } else {
                format!("{s}-{t}.{k}")
            };
            *k += 1;
            id
        })
        .collect()
}

/// Validate a description and fix the internal ordering.
pub fn build_graph(spec: &GraphSpec) -> Result<BipartiteGraph, GraphError> {
    if spec.even.is_empty() {
        return Err(GraphError::NoEvenVertices);
    }
    if spec.odd.is_empty() {
        return Err(GraphError::NoOddVertices);
    }
    let mut seen = BTreeSet::new();
    for v in spec.even.iter().chain(&spec.odd) {
        if v == STAR {
            return Err(GraphError::ReservedVertex(v.clone()));
        }
        if !seen.insert(v.as_str()) {
            return Err(GraphError::DuplicateVertex(v.clone()));
        }
    }
    let mut even = spec.even.clone();
    let mut odd = spec.odd.clone();
    even.sort();
    odd.sort();
    let n_even = even.len();
    let names: Vec<String> = even.into_iter().chain(odd).collect();
    let index: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    if spec.edges.is_empty() {
        return Err(GraphError::NoEdges);
    }
    let mut pairs = Vec::with_capacity(spec.edges.len());
    for (s, t) in &spec.edges {
        let si = *index
            .get(s.as_str())
            .ok_or_else(|| GraphError::UnknownVertex(s.clone()))?;
        let ti = *index
            .get(t.as_str())
            .ok_or_else(|| GraphError::UnknownVertex(t.clone()))?;
        if si >= n_even || ti < n_even {
            return Err(GraphError::NotBipartite(s.clone(), t.clone()));
        }
        pairs.push((s.clone(), t.clone()));
    }
    pairs.sort();
    let ids = edge_ids(&pairs);
    let edges: Vec<Edge> = pairs
        .iter()
        .zip(ids)
        .map(|((s, t), id)| Edge {
            id,
            source: index[s.as_str()],
            target: index[t.as_str()],
        })
        .collect();

    let mut dim = vec![1u32; n_even];
    if let Some(d) = &spec.dim {
        for (v, m) in d {
            match index.get(v.as_str()) {
                Some(&i) if i < n_even && *m > 0 => dim[i] = *m,
                _ => return Err(GraphError::BadDimension(v.clone())),
            }
        }
    }

    let g = BipartiteGraph::from_parts(names, n_even, edges, dim);
    if !is_connected(&g) {
        return Err(GraphError::Disconnected);
    }
    Ok(g)
}

fn is_connected(g: &BipartiteGraph) -> bool {
    let mut seen = vec![false; g.n_vertices()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &e in g.incident(v) {
            let w = g.other_end(e, v);
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Γ̃: the base graph plus a star vertex joined to each even vertex v by m₊(v) edges.
///
/// The star vertex is treated as odd, so the star edges run v → ⋆. Base vertex and
/// edge indices are unchanged inside `full`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    base: BipartiteGraph,
    full: BipartiteGraph,
    star_edges: Vec<usize>,
}

impl AugmentedGraph {
    pub fn base(&self) -> &BipartiteGraph {
        &self.base
    }

    pub fn full(&self) -> &BipartiteGraph {
        &self.full
    }

    pub fn star(&self) -> usize {
        self.base.n_vertices()
    }

    /// Star-edge indices in `full`, sorted.
    pub fn star_edges(&self) -> &[usize] {
        &self.star_edges
    }

    pub fn is_star_edge(&self, e: usize) -> bool {
        e >= self.base.edges.len()
    }

    /// Smallest star edge into `v` (the distinguished η_v).
    pub fn distinguished(&self, v: usize) -> usize {
        *self
            .full
            .incident(v)
            .iter()
            .find(|&&e| self.is_star_edge(e))
            .expect("every even vertex carries a star edge")
    }

    /// Drop the star vertex again.
    pub fn strip(&self) -> BipartiteGraph {
        self.base.clone()
    }
}

pub fn augment(graph: &BipartiteGraph) -> AugmentedGraph {
    let mut names = graph.names.clone();
    names.push(STAR.to_string());
    let star = graph.n_vertices();
    let mut edges = graph.edges.clone();
    let mut star_edges = Vec::new();
    for v in graph.even_vertices() {
        for k in 0..graph.dim[v] {
            let id = if k == 0 {
                format!("{}-{}", STAR, graph.names[v])
            } else {
                format!("{}-{}.{}", STAR, graph.names[v], k)
            };
            star_edges.push(edges.len());
            edges.push(Edge {
                id,
                source: v,
                target: star,
            });
        }
    }
    let full = BipartiteGraph::from_parts(names, graph.n_even, edges, graph.dim.clone());
    AugmentedGraph {
        base: graph.clone(),
        full,
        star_edges,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// Σ m₊(v)λ(v) = 1 over even vertices.
    Markov,
    /// λ(first even vertex) = 1.
    Base,
}

#[derive(Debug, Clone, Copy)]
pub struct PowerConfig {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            rel_tol: 1e-13,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub d: f64,
    /// Indexed by global vertex; odd entries carry the factor d (λ|odd = d·λ₁).
    pub lambda: Vec<f64>,
    pub normalization: Normalization,
}

impl PerronData {
    pub fn lambda(&self, v: usize) -> f64 {
        self.lambda[v]
    }

    pub fn index(&self) -> f64 {
        self.d * self.d
    }

    /// Largest violation of the two eigen-equations.
    pub fn residual(&self, graph: &BipartiteGraph) -> f64 {
        (0..graph.n_vertices())
            .map(|v| {
                let s: f64 = graph
                    .incident(v)
                    .iter()
                    .map(|&e| self.lambda[graph.other_end(e, v)])
                    .sum();
                (s - self.d * self.lambda[v]).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub fn perron_data(
    graph: &BipartiteGraph,
    normalization: Normalization,
) -> Result<PerronData, GraphError> {
    perron_data_with(graph, normalization, PowerConfig::default())
}

pub fn perron_data_with(
    graph: &BipartiteGraph,
    normalization: Normalization,
    cfg: PowerConfig,
) -> Result<PerronData, GraphError> {
    let lam = graph.lambda_matrix();
    let ne = graph.n_even();
    let no = graph.n_odd();
    // ΛΛᵀ
    let mut m = vec![vec![0.0; ne]; ne];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = (0..no).map(|k| lam[i][k] * lam[j][k]).sum();
        }
    }
    let mut x = vec![1.0; ne];
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let mut y: Vec<f64> = m
            .iter()
            .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        let top = y.iter().cloned().fold(0.0, f64::max);
        y.iter_mut().for_each(|v| *v /= top);
        let change = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = y;
        if change <= cfg.rel_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GraphError::NonConvergence(cfg.max_iter));
    }
    let mx: Vec<f64> = m
        .iter()
        .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
        .collect();
    let d2 = mx.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
        / x.iter().map(|v| v * v).sum::<f64>();
    let d = d2.sqrt();

    let mut lambda = x.clone();
    for k in 0..no {
        let s: f64 = (0..ne).map(|i| lam[i][k] * x[i]).sum();
        lambda.push(s / d);
    }
    let scale = match normalization {
        Normalization::Markov => graph
            .even_vertices()
            .map(|v| graph.dim(v) as f64 * lambda[v])
            .sum::<f64>(),
        Normalization::Base => lambda[0],
    };
    lambda.iter_mut().for_each(|v| *v /= scale);
    Ok(PerronData {
        d,
        lambda,
        normalization,
    })
}

/// d² = ‖ΛᵀΛ‖.
pub fn index(graph: &BipartiteGraph) -> Result<f64, GraphError> {
    Ok(perron_data(graph, Normalization::Base)?.index())
}

/// Path graph A_k on vertices v0 … v{k-1}; even vertices are those at even positions.
pub fn path_graph(k: usize) -> BipartiteGraph {
    assert!(k >= 2);
    let name = |i: usize| format!("v{i}");
    let even: Vec<String> = (0..k).step_by(2).map(name).collect();
    let odd: Vec<String> = (1..k).step_by(2).map(name).collect();
    let edges = (0..k - 1)
        .map(|i| {
            if i % 2 == 0 {
                (name(i), name(i + 1))
            } else {
                (name(i + 1), name(i))
            }
        })
        .collect();
    build_graph(&GraphSpec {
        even,
        odd,
        edges,
        dim: None,
    })
    .expect("path graphs are valid")
}

/// One even centre joined to `k` odd leaves.
pub fn star_graph(k: usize) -> BipartiteGraph {
    let odd: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    let edges = odd.iter().map(|w| ("o".to_string(), w.clone())).collect();
    build_graph(&GraphSpec {
        even: vec!["o".to_string()],
        odd,
        edges,
        dim: None,
    })
    .expect("star graphs are valid")
}
