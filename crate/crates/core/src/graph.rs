//! Undirected multigraphs with a fixed total vertex order, walks, circuits and
//! cycle-space machinery.
//!
//! The vertex order is the position in the vertex list. Every edge is stored
//! in canonical orientation (`tail < head`), and parallel edges between the
//! same pair are told apart by a 0-based `parallel_index` assigned in input
//! order. A walk step that moves up the vertex order has sign `+1`, a step
//! down has sign `-1`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Default cap on the number of items produced by the exhaustive enumerators.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub tail: VertexId,
    pub head: VertexId,
    pub parallel_index: usize,
}

impl Edge {
    /// The endpoint opposite `v`, or `None` if `v` is not an endpoint.
    pub fn other(&self, v: VertexId) -> Option<VertexId> {
        if v == self.tail {
            Some(self.head)
        } else if v == self.head {
            Some(self.tail)
        } else {
            None
        }
    }

    fn joins(&self, u: VertexId, v: VertexId) -> bool {
        (self.tail == u && self.head == v) || (self.tail == v && self.head == u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    names: Vec<String>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
}

impl Multigraph {
    /// Builds a multigraph from named vertices and named endpoint pairs.
    pub fn new<V, A, B>(vertex_names: &[V], edge_specs: &[(A, B)]) -> Result<Self>
    where
        V: AsRef<str>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        if vertex_names.len() < 2 {
            return Err(Error::TooFewVertices(vertex_names.len()));
        }
        let mut index = HashMap::with_capacity(vertex_names.len());
        for (i, name) in vertex_names.iter().enumerate() {
            if index.insert(name.as_ref().to_string(), i).is_some() {
                return Err(Error::DuplicateVertexName(name.as_ref().to_string()));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownEndpoint(name.to_string()))
        };
        let mut pairs = Vec::with_capacity(edge_specs.len());
        for (u, v) in edge_specs {
            pairs.push((lookup(u.as_ref())?, lookup(v.as_ref())?));
        }
        let names = vertex_names.iter().map(|n| n.as_ref().to_string()).collect();
        Self::assemble(names, &pairs)
    }

    /// Builds a multigraph on vertices `v0, v1, ...` from index pairs.
    pub fn from_indices(vertex_count: usize, pairs: &[(VertexId, VertexId)]) -> Result<Self> {
        if vertex_count < 2 {
            return Err(Error::TooFewVertices(vertex_count));
        }
        for &(u, v) in pairs {
            for w in [u, v] {
                if w >= vertex_count {
                    return Err(Error::UnknownEndpoint(format!("v{w}")));
                }
            }
        }
        let names = (0..vertex_count).map(|i| format!("v{i}")).collect();
        Self::assemble(names, pairs)
    }

    fn assemble(names: Vec<String>, pairs: &[(VertexId, VertexId)]) -> Result<Self> {
        let n = names.len();
        let mut multiplicity: HashMap<(VertexId, VertexId), usize> = HashMap::new();
        let mut edges = Vec::with_capacity(pairs.len());
        let mut incident = vec![Vec::new(); n];
        for (id, &(u, v)) in pairs.iter().enumerate() {
            if u == v {
                return Err(Error::SelfLoop(names[u].clone()));
            }
            let (tail, head) = if u < v { (u, v) } else { (v, u) };
            let slot = multiplicity.entry((tail, head)).or_insert(0);
            edges.push(Edge { tail, head, parallel_index: *slot });
            *slot += 1;
            incident[tail].push(id);
            incident[head].push(id);
        }
        let g = Multigraph { names, edges, incident };
        let order = g.bfs_order();
        if order.len() < n {
            let seen: HashSet<_> = order.into_iter().collect();
            let missing = (0..n).find(|v| !seen.contains(v)).expect("some vertex unreached");
            return Err(Error::Disconnected(g.names[missing].clone()));
        }
        Ok(g)
    }

    fn bfs_order(&self) -> Vec<VertexId> {
        let mut seen = vec![false; self.vertex_count()];
        let mut order = vec![0];
        seen[0] = true;
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            i += 1;
            for &e in &self.incident[u] {
                let w = self.edges[e].other(u).expect("incident edge");
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                }
            }
        }
        order
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Result<&Edge> {
        self.edges.get(id).ok_or(Error::EdgeNotInGraph(id))
    }

    pub fn vertex_names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.names[v]
    }

    pub fn vertex_index(&self, name: &str) -> Option<VertexId> {
        self.names.iter().position(|n| n == name)
    }

    /// Edge ids incident to `v`, in increasing id order.
    pub fn incident_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v]
    }

    /// Dimension of the cycle space, `|E| - |V| + 1`.
    pub fn cycle_rank(&self) -> usize {
        self.edge_count() + 1 - self.vertex_count()
    }

    pub(crate) fn check_vertex(&self, v: VertexId) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    /// Signed vertex-edge incidence matrix: `+1` at the tail, `-1` at the head,
    /// so row `v` applied to a flow is the net current leaving `v`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.vertex_count(), self.edge_count());
        for (id, e) in self.edges.iter().enumerate() {
            m[(e.tail, id)] = 1.0;
            m[(e.head, id)] = -1.0;
        }
        m
    }

    /// Matches the edges of `other` to those of `self` by
    /// `(tail, head, parallel_index)`. Entry `i` of the result is the id in
    /// `other` of edge `i` of `self`.
    pub fn align_edges(&self, other: &Multigraph) -> Result<Vec<EdgeId>> {
        if self.names != other.names {
            return Err(Error::TopologyMismatch(format!(
                "vertex lists differ: {:?} vs {:?}",
                self.names, other.names
            )));
        }
        if self.edge_count() != other.edge_count() {
            return Err(Error::TopologyMismatch(format!(
                "edge counts differ: {} vs {}",
                self.edge_count(),
                other.edge_count()
            )));
        }
        let by_key: HashMap<Edge, EdgeId> =
            other.edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        self.edges
            .iter()
            .map(|e| {
                by_key.get(e).copied().ok_or_else(|| {
                    Error::TopologyMismatch(format!(
                        "edge {}-{} #{} has no counterpart",
                        self.names[e.tail], self.names[e.head], e.parallel_index
                    ))
                })
            })
            .collect()
    }
}

/// A walk `v_0, e_0, v_1, ..., e_{n-1}, v_n` with its step signs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    vertices: Vec<VertexId>,
    edges: Vec<EdgeId>,
    signs: Vec<i8>,
}

impl Walk {
    pub fn new(g: &Multigraph, vertices: Vec<VertexId>, edges: Vec<EdgeId>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidWalk("a walk needs at least one edge".into()));
        }
        if vertices.len() != edges.len() + 1 {
            return Err(Error::InvalidWalk(format!(
                "{} vertices for {} edges",
                vertices.len(),
                edges.len()
            )));
        }
        for &v in &vertices {
            g.check_vertex(v)?;
        }
        let mut signs = Vec::with_capacity(edges.len());
        for (k, &e) in edges.iter().enumerate() {
            let (from, to) = (vertices[k], vertices[k + 1]);
            if !g.edge(e)?.joins(from, to) {
                return Err(Error::InvalidWalk(format!(
                    "edge {e} does not join vertices {from} and {to}"
                )));
            }
            signs.push(if to > from { 1 } else { -1 });
        }
        Ok(Walk { vertices, edges, signs })
    }

    /// Number of steps `n(w)`.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn start(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn end(&self) -> VertexId {
        *self.vertices.last().expect("nonempty walk")
    }

    pub fn reversed(&self) -> Walk {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        let mut edges = self.edges.clone();
        edges.reverse();
        let signs = self.signs.iter().rev().map(|s| -s).collect();
        Walk { vertices, edges, signs }
    }

    /// Vector over `E` whose entry for `e` is the sum of the signs of the
    /// steps that traverse `e`.
    pub fn sign_vector(&self, g: &Multigraph) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(g.edge_count());
        for (k, &e) in self.edges.iter().enumerate() {
            let edge = g.edge(e)?;
            if !edge.joins(self.vertices[k], self.vertices[k + 1]) {
                return Err(Error::EdgeNotInGraph(e));
            }
            out[e] += f64::from(self.signs[k]);
        }
        Ok(out)
    }
}

/// A simple closed walk with at least two steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit(Walk);

impl Circuit {
    pub fn new(g: &Multigraph, vertices: Vec<VertexId>, edges: Vec<EdgeId>) -> Result<Self> {
        Self::from_walk(Walk::new(g, vertices, edges)?)
    }

    pub fn from_walk(w: Walk) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::InvalidWalk("a circuit needs at least two steps".into()));
        }
        if w.start() != w.end() {
            return Err(Error::InvalidWalk("a circuit must be closed".into()));
        }
        let interior = &w.vertices[..w.len()];
        if interior.iter().collect::<HashSet<_>>().len() != interior.len() {
            return Err(Error::InvalidWalk("a circuit repeats a vertex".into()));
        }
        if w.edges.iter().collect::<HashSet<_>>().len() != w.edges.len() {
            return Err(Error::InvalidWalk("a circuit repeats an edge".into()));
        }
        Ok(Circuit(w))
    }

    pub fn as_walk(&self) -> &Walk {
        &self.0
    }

    pub fn reversed(&self) -> Circuit {
        Circuit(self.0.reversed())
    }

    /// Smallest edge-id sequence over all rotations and reflections.
    pub fn canonical_key(&self) -> Vec<EdgeId> {
        let edges = &self.0.edges;
        let n = edges.len();
        let mut best: Option<Vec<EdgeId>> = None;
        for forward in [true, false] {
            for start in 0..n {
                let key: Vec<EdgeId> = (0..n)
                    .map(|k| {
                        if forward {
                            edges[(start + k) % n]
                        } else {
                            edges[(start + n - k) % n]
                        }
                    })
                    .collect();
                if best.as_ref().is_none_or(|b| key < *b) {
                    best = Some(key);
                }
            }
        }
        best.expect("nonempty circuit")
    }
}

impl std::ops::Deref for Circuit {
    type Target = Walk;

    fn deref(&self) -> &Walk {
        &self.0
    }
}

/// Sign vector of circuit `c` over the edges of `g`; entries are in `{-1, 0, 1}`.
pub fn circuit_sign_vector(g: &Multigraph, c: &Circuit) -> Result<DVector<f64>> {
    c.sign_vector(g)
}

/// Breadth-first spanning tree from vertex 0; each vertex is discovered
/// through its smallest-id edge from the earliest-dequeued neighbour.
pub fn spanning_tree(g: &Multigraph) -> BTreeSet<EdgeId> {
    let mut seen = vec![false; g.vertex_count()];
    let mut tree = BTreeSet::new();
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &e in g.incident_edges(u) {
            let w = g.edges[e].other(u).expect("incident edge");
            if !seen[w] {
                seen[w] = true;
                tree.insert(e);
                queue.push_back(w);
            }
        }
    }
    tree
}

/// A spanning tree rooted at vertex 0 with parent links, for tree paths.
#[derive(Debug, Clone)]
pub(crate) struct RootedTree {
    parent: Vec<Option<(VertexId, EdgeId)>>,
    depth: Vec<usize>,
}

impl RootedTree {
    pub(crate) fn new(g: &Multigraph, tree: &BTreeSet<EdgeId>) -> Result<Self> {
        let n = g.vertex_count();
        if tree.len() != n - 1 {
            return Err(Error::NotASpanningTree(format!(
                "{} edges given, {} needed",
                tree.len(),
                n - 1
            )));
        }
        if let Some(&bad) = tree.iter().find(|&&e| e >= g.edge_count()) {
            return Err(Error::NotASpanningTree(format!("edge {bad} is not in the graph")));
        }
        let mut parent = vec![None; n];
        let mut depth = vec![0; n];
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for &e in g.incident_edges(u) {
                if !tree.contains(&e) {
                    continue;
                }
                let w = g.edges[e].other(u).expect("incident edge");
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((u, e));
                    depth[w] = depth[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::NotASpanningTree("edges do not reach every vertex".into()));
        }
        Ok(RootedTree { parent, depth })
    }

    /// Vertex and edge sequences of the unique tree path `from -> to`.
    pub(crate) fn path(&self, from: VertexId, to: VertexId) -> (Vec<VertexId>, Vec<EdgeId>) {
        let (mut u, mut v) = (from, to);
        let mut up_vertices = vec![u];
        let mut up_edges = Vec::new();
        let mut down_vertices = vec![v];
        let mut down_edges = Vec::new();
        while u != v {
            if self.depth[u] >= self.depth[v] {
                let (p, e) = self.parent[u].expect("non-root has a parent");
                up_edges.push(e);
                up_vertices.push(p);
                u = p;
            } else {
                let (p, e) = self.parent[v].expect("non-root has a parent");
                down_edges.push(e);
                down_vertices.push(p);
                v = p;
            }
        }
        down_vertices.pop();
        up_vertices.extend(down_vertices.into_iter().rev());
        up_edges.extend(down_edges.into_iter().rev());
        (up_vertices, up_edges)
    }
}

/// One circuit per non-tree edge: the edge from tail to head, then the tree
/// path from head back to tail. Ordered by non-tree edge id.
pub fn fundamental_circuits(g: &Multigraph, tree: &BTreeSet<EdgeId>) -> Result<Vec<Circuit>> {
    let rooted = RootedTree::new(g, tree)?;
    let mut out = Vec::with_capacity(g.cycle_rank());
    for (id, e) in g.edges.iter().enumerate() {
        if tree.contains(&id) {
            continue;
        }
        let (path_vertices, path_edges) = rooted.path(e.head, e.tail);
        let mut vertices = vec![e.tail];
        vertices.extend(path_vertices);
        let mut edges = vec![id];
        edges.extend(path_edges);
        out.push(Circuit::new(g, vertices, edges)?);
    }
    Ok(out)
}

/// The tree path from `a` to `b` in [`spanning_tree`].
pub fn walk_between(g: &Multigraph, a: VertexId, b: VertexId) -> Result<Walk> {
    g.check_vertex(a)?;
    g.check_vertex(b)?;
    if a == b {
        return Err(Error::SameVertex(a));
    }
    let rooted = RootedTree::new(g, &spanning_tree(g))?;
    let (vertices, edges) = rooted.path(a, b);
    Walk::new(g, vertices, edges)
}

pub fn enumerate_circuits(g: &Multigraph) -> Result<Vec<Circuit>> {
    enumerate_circuits_with_limit(g, DEFAULT_ENUMERATION_LIMIT)
}

/// Every circuit of `g` once, up to rotation and reflection, ordered by
/// [`Circuit::canonical_key`]. Each circuit is reported starting from its
/// smallest vertex.
pub fn enumerate_circuits_with_limit(g: &Multigraph, limit: usize) -> Result<Vec<Circuit>> {
    struct Search<'a> {
        g: &'a Multigraph,
        start: VertexId,
        on_path: Vec<bool>,
        vertices: Vec<VertexId>,
        edges: Vec<EdgeId>,
        found: BTreeMap<Vec<EdgeId>, Circuit>,
        limit: usize,
    }

    impl Search<'_> {
        fn extend(&mut self, u: VertexId) -> Result<()> {
            for &e in self.g.incident_edges(u) {
                let w = self.g.edges[e].other(u).expect("incident edge");
                if w == self.start {
                    let closes = match self.edges.as_slice() {
                        [] => false,
                        [only] => *only != e,
                        _ => true,
                    };
                    if closes {
                        let mut vertices = self.vertices.clone();
                        vertices.push(self.start);
                        let mut edges = self.edges.clone();
                        edges.push(e);
                        let c = Circuit::new(self.g, vertices, edges)?;
                        let key = c.canonical_key();
                        if !self.found.contains_key(&key) {
                            if self.found.len() >= self.limit {
                                return Err(Error::SizeLimitExceeded(self.limit));
                            }
                            self.found.insert(key, c);
                        }
                    }
                } else if w > self.start && !self.on_path[w] {
                    self.on_path[w] = true;
                    self.vertices.push(w);
                    self.edges.push(e);
                    self.extend(w)?;
                    self.edges.pop();
                    self.vertices.pop();
                    self.on_path[w] = false;
                }
            }
            Ok(())
        }
    }

    let mut search = Search {
        g,
        start: 0,
        on_path: vec![false; g.vertex_count()],
        vertices: Vec::new(),
        edges: Vec::new(),
        found: BTreeMap::new(),
        limit,
    };
    for s in 0..g.vertex_count() {
        search.start = s;
        search.vertices = vec![s];
        search.on_path[s] = true;
        search.extend(s)?;
        search.on_path[s] = false;
    }
    Ok(search.found.into_values().collect())
}

/// All walks from `a` to `b` that never revisit a vertex, in depth-first
/// order over increasing edge ids.
pub fn simple_walks(g: &Multigraph, a: VertexId, b: VertexId, limit: usize) -> Result<Vec<Walk>> {
    g.check_vertex(a)?;
    g.check_vertex(b)?;
    if a == b {
        return Err(Error::SameVertex(a));
    }

    fn extend(
        g: &Multigraph,
        target: VertexId,
        on_path: &mut [bool],
        vertices: &mut Vec<VertexId>,
        edges: &mut Vec<EdgeId>,
        out: &mut Vec<Walk>,
        limit: usize,
    ) -> Result<()> {
        let u = *vertices.last().expect("path starts at a");
        for &e in g.incident_edges(u) {
            let w = g.edges[e].other(u).expect("incident edge");
            if on_path[w] {
                continue;
            }
            vertices.push(w);
            edges.push(e);
            if w == target {
                if out.len() >= limit {
                    return Err(Error::SizeLimitExceeded(limit));
                }
                out.push(Walk::new(g, vertices.clone(), edges.clone())?);
            } else {
                on_path[w] = true;
                extend(g, target, on_path, vertices, edges, out, limit)?;
                on_path[w] = false;
            }
            edges.pop();
            vertices.pop();
        }
        Ok(())
    }

    let mut on_path = vec![false; g.vertex_count()];
    on_path[a] = true;
    let mut out = Vec::new();
    extend(g, b, &mut on_path, &mut vec![a], &mut Vec::new(), &mut out, limit)?;
    Ok(out)
}

/// Stacks sign vectors as the rows of a matrix with `edge_count` columns.
pub fn sign_matrix(edge_count: usize, rows: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), edge_count);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    m
}
