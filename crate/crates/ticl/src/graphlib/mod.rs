//! Mixed-graph algebra: skeletons, unshielded triples, v-structures, Meek
//! closure, CPDAG and interventional CPDAG construction, and consistent DAG
//! extensions of partially directed graphs.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesnet::InterventionFamily;
use crate::jci;

mod dsep;
pub use dsep::{d_separated, DSeparationOracle};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("directed cycle detected")]
    DirectedCycle,
    #[error("graph admits no consistent extension")]
    NoExtension,
    #[error("node index {index} out of range for graph with {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },
    #[error("node counts differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("bad edge list: {0}")]
    EdgeListFormat(String),
}

/// A directed acyclic graph stored as per-node parent sets.
///
/// Acyclicity is not enforced on every mutation; callers that build graphs
/// incrementally check with [`Dag::is_acyclic`] or guard moves with
/// [`Dag::creates_cycle`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dag {
    parents: Vec<BTreeSet<usize>>,
}

impl Dag {
    pub fn new(n: usize) -> Self {
        Dag {
            parents: vec![BTreeSet::new(); n],
        }
    }

    /// Builds from an edge list, panicking on out-of-range indices.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut dag = Dag::new(n);
        for &(a, b) in edges {
            dag.add_edge(a, b);
        }
        dag
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn parents_of(&self, node: usize) -> &BTreeSet<usize> {
        &self.parents[node]
    }

    pub fn children_of(&self, node: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&c| self.parents[c].contains(&node))
            .collect()
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        assert!(from < self.n() && to < self.n() && from != to);
        self.parents[to].insert(from);
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) {
        self.parents[to].remove(&from);
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (to, ps) in self.parents.iter().enumerate() {
            for &from in ps {
                out.push((from, to));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|p| p.len()).sum()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.parents[node].len()
    }

    /// Kahn's algorithm with lowest-index-first tie-break.
    pub fn topo_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.n();
        let mut remaining: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            order.push(next);
            for c in 0..n {
                if self.parents[c].contains(&next) {
                    remaining[c] -= 1;
                    if remaining[c] == 0 {
                        ready.insert(c);
                    }
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err(GraphError::DirectedCycle)
        }
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().is_ok()
    }

    /// True when adding `from -> to` would close a directed cycle,
    /// i.e. `from` is reachable from `to`.
    pub fn creates_cycle(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut stack = vec![to];
        let mut seen = vec![false; self.n()];
        seen[to] = true;
        while let Some(v) = stack.pop() {
            if v == from {
                return true;
            }
            for c in self.children_of(v) {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    pub fn descendants_of(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            for c in self.children_of(v) {
                if out.insert(c) {
                    stack.push(c);
                }
            }
        }
        out
    }

    pub fn ancestors_of(&self, node: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if out.insert(p) {
                    stack.push(p);
                }
            }
        }
        out
    }
}

/// Edge mark codes shared with the adjacency-matrix CSV export.
const MARK_NONE: u8 = 0;
const MARK_TAIL_HEAD: u8 = 1;
const MARK_UNDIRECTED: u8 = 2;

/// A partially directed graph over `n` nodes. Cell `(i, j)` holds 1 when the
/// edge `i -> j` is directed, and both `(i, j)` and `(j, i)` hold 2 when the
/// pair is joined by an undirected edge.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pdag {
    n: usize,
    marks: Vec<u8>,
}

/// An unshielded triple `a - c - b` with `a < b` canonicalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnshieldedTriple {
    pub a: usize,
    pub c: usize,
    pub b: usize,
}

impl UnshieldedTriple {
    pub fn new(a: usize, c: usize, b: usize) -> Self {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        UnshieldedTriple { a, c, b }
    }
}

impl fmt::Debug for Pdag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pdag(n={})", self.n)?;
        for (a, b) in self.directed_edges() {
            write!(f, " {a}->{b}")?;
        }
        for (a, b) in self.undirected_edges() {
            write!(f, " {a}--{b}")?;
        }
        Ok(())
    }
}

impl Pdag {
    pub fn new(n: usize) -> Self {
        Pdag {
            n,
            marks: vec![MARK_NONE; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> u8 {
        self.marks[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: u8) {
        self.marks[i * self.n + j] = v;
    }

    pub fn add_directed(&mut self, from: usize, to: usize) {
        assert!(from != to && from < self.n && to < self.n);
        self.set(from, to, MARK_TAIL_HEAD);
        self.set(to, from, MARK_NONE);
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) {
        assert!(a != b && a < self.n && b < self.n);
        self.set(a, b, MARK_UNDIRECTED);
        self.set(b, a, MARK_UNDIRECTED);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set(a, b, MARK_NONE);
        self.set(b, a, MARK_NONE);
    }

    pub fn has_directed(&self, from: usize, to: usize) -> bool {
        self.at(from, to) == MARK_TAIL_HEAD
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.at(a, b) == MARK_UNDIRECTED
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.at(a, b) != MARK_NONE || self.at(b, a) != MARK_NONE
    }

    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&o| o != node && self.adjacent(node, o))
            .collect()
    }

    pub fn undirected_neighbors(&self, node: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&o| o != node && self.has_undirected(node, o))
            .collect()
    }

    pub fn parents(&self, node: usize) -> Vec<usize> {
        (0..self.n).filter(|&p| self.has_directed(p, node)).collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        (0..self.n).filter(|&c| self.has_directed(node, c)).collect()
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.has_directed(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.has_undirected(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.directed_edges().len() + self.undirected_edges().len()
    }

    /// Count of edges adjacent to `node`, regardless of mark.
    pub fn degree(&self, node: usize) -> usize {
        self.neighbors(node).len()
    }

    /// Cycle check restricted to the directed part.
    pub fn directed_part_is_acyclic(&self) -> bool {
        self.directed_part().is_acyclic()
    }

    fn directed_part(&self) -> Dag {
        let mut dag = Dag::new(self.n);
        for (a, b) in self.directed_edges() {
            dag.add_edge(a, b);
        }
        dag
    }

    /// All unshielded triples `a - c - b` of the underlying skeleton.
    pub fn unshielded_triples(&self) -> Vec<UnshieldedTriple> {
        let mut out = Vec::new();
        for c in 0..self.n {
            let nbrs = self.neighbors(c);
            for (ia, &a) in nbrs.iter().enumerate() {
                for &b in nbrs.iter().skip(ia + 1) {
                    if !self.adjacent(a, b) {
                        out.push(UnshieldedTriple::new(a, c, b));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Restriction to the first `k` nodes.
    pub fn restrict(&self, k: usize) -> Pdag {
        assert!(k <= self.n);
        let mut out = Pdag::new(k);
        for i in 0..k {
            for j in 0..k {
                out.set(i, j, self.at(i, j));
            }
        }
        out
    }

    /// Edge-list text: a `nodes N` header, then one `a -> b` or `a -- b` line
    /// per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("nodes {}\n", self.n);
        for (a, b) in self.directed_edges() {
            s.push_str(&format!("{a} -> {b}\n"));
        }
        for (a, b) in self.undirected_edges() {
            s.push_str(&format!("{a} -- {b}\n"));
        }
        s
    }

    pub fn from_edge_list(text: &str) -> Result<Pdag, GraphError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| GraphError::EdgeListFormat("empty input".into()))?;
        let n: usize = header
            .trim()
            .strip_prefix("nodes")
            .and_then(|rest| rest.trim().parse().ok())
            .ok_or_else(|| GraphError::EdgeListFormat(format!("bad header: {header:?}")))?;
        let mut g = Pdag::new(n);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(GraphError::EdgeListFormat(format!("bad line: {line:?}")));
            }
            let a: usize = parts[0]
                .parse()
                .map_err(|_| GraphError::EdgeListFormat(format!("bad node: {line:?}")))?;
            let b: usize = parts[2]
                .parse()
                .map_err(|_| GraphError::EdgeListFormat(format!("bad node: {line:?}")))?;
            if a >= n || b >= n {
                return Err(GraphError::NodeOutOfRange {
                    index: a.max(b),
                    nodes: n,
                });
            }
            match parts[1] {
                "->" => g.add_directed(a, b),
                "--" => g.add_undirected(a, b),
                other => {
                    return Err(GraphError::EdgeListFormat(format!("bad mark: {other:?}")));
                }
            }
        }
        Ok(g)
    }

    /// Adjacency-matrix CSV with the `{0, 1, 2}` mark codes, one row per node.
    pub fn to_adjacency_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.at(i, j).to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Undirected copy of a DAG.
pub fn skeleton_of(dag: &Dag) -> Pdag {
    let mut g = Pdag::new(dag.n());
    for (a, b) in dag.edges() {
        g.add_undirected(a, b);
    }
    g
}

/// All colliders `a -> c <- b` with non-adjacent `a`, `b`.
pub fn v_structures_of(dag: &Dag) -> BTreeSet<UnshieldedTriple> {
    let mut out = BTreeSet::new();
    for c in 0..dag.n() {
        let ps: Vec<usize> = dag.parents_of(c).iter().copied().collect();
        for (ia, &a) in ps.iter().enumerate() {
            for &b in ps.iter().skip(ia + 1) {
                if !dag.adjacent(a, b) {
                    out.insert(UnshieldedTriple::new(a, c, b));
                }
            }
        }
    }
    out
}

/// Fixed point of the orientation rules R1, R2, R3. Existing directed edges
/// are never reversed or removed.
///
/// R1: `a -> b - c` with `a`, `c` non-adjacent orients `b -> c`.
/// R2: `a -> b -> c` with `a - c` orients `a -> c`.
/// R3: `a - b`, `a - c1 -> b`, `a - c2 -> b` with `c1`, `c2` non-adjacent
///     orients `a -> b`.
pub fn meek_closure(g: &Pdag) -> Result<Pdag, GraphError> {
    if !g.directed_part_is_acyclic() {
        return Err(GraphError::DirectedCycle);
    }
    let mut g = g.clone();
    let n = g.n();
    loop {
        let mut changed = false;
        // R1
        for b in 0..n {
            for c in g.undirected_neighbors(b) {
                let fires = g
                    .parents(b)
                    .into_iter()
                    .any(|a| a != c && !g.adjacent(a, c));
                if fires {
                    g.add_directed(b, c);
                    changed = true;
                }
            }
        }
        // R2
        for a in 0..n {
            for c in g.undirected_neighbors(a) {
                let fires = g
                    .children(a)
                    .into_iter()
                    .any(|b| g.has_directed(b, c));
                if fires {
                    g.add_directed(a, c);
                    changed = true;
                }
            }
        }
        // R3
        for a in 0..n {
            for b in g.undirected_neighbors(a) {
                let mids: Vec<usize> = g
                    .undirected_neighbors(a)
                    .into_iter()
                    .filter(|&c| c != b && g.has_directed(c, b))
                    .collect();
                let mut fires = false;
                'outer: for (i1, &c1) in mids.iter().enumerate() {
                    for &c2 in mids.iter().skip(i1 + 1) {
                        if !g.adjacent(c1, c2) {
                            fires = true;
                            break 'outer;
                        }
                    }
                }
                if fires {
                    g.add_directed(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(g)
}

/// Canonical CPDAG: skeleton, v-structure orientations, Meek closure.
pub fn cpdag_of(dag: &Dag) -> Pdag {
    let mut g = skeleton_of(dag);
    for t in v_structures_of(dag) {
        g.add_directed(t.a, t.c);
        g.add_directed(t.b, t.c);
    }
    meek_closure(&g).expect("v-structure orientations of a DAG cannot form a cycle")
}

/// Which node set [`icpdag_of`] reports over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcpdagView {
    /// System nodes followed by one environment node per interventional regime.
    Augmented,
    /// System nodes only.
    SystemOnly,
}

/// Ground-truth interventional CPDAG.
///
/// Built on the augmented graph: environment nodes are attached to their
/// regime's targets, the CPDAG of the augmented DAG is formed, every surviving
/// environment edge is forced to point into the system, and the Meek rules are
/// re-run to propagate those orientations.
pub fn icpdag_of(
    dag: &Dag,
    fam: &InterventionFamily,
    view: IcpdagView,
) -> Result<Pdag, GraphError> {
    let d = dag.n();
    let aug = jci::augment_graph(dag, fam).map_err(|_| GraphError::NodeOutOfRange {
        index: fam
            .regimes
            .iter()
            .flat_map(|r| r.targets.iter().copied())
            .max()
            .unwrap_or(0),
        nodes: d,
    })?;
    let mut g = cpdag_of(&aug);
    for env in d..aug.n() {
        for t in g.undirected_neighbors(env) {
            g.add_directed(env, t);
        }
    }
    let closed = meek_closure(&g)?;
    Ok(match view {
        IcpdagView::Augmented => closed,
        IcpdagView::SystemOnly => closed.restrict(d),
    })
}

/// A DAG with the same skeleton and v-structures as `g`, following the
/// peeling scheme of Dor and Tarsi. Ties break toward the lowest node index.
pub fn consistent_extension(g: &Pdag) -> Result<Dag, GraphError> {
    let n = g.n();
    let mut work = g.clone();
    let mut out = Dag::new(n);
    for (a, b) in g.directed_edges() {
        out.add_edge(a, b);
    }
    let mut active: BTreeSet<usize> = (0..n).collect();
    while !active.is_empty() {
        let mut sink = None;
        'search: for &x in &active {
            if !work.children(x).is_empty() {
                continue;
            }
            let und = work.undirected_neighbors(x);
            let all = work.neighbors(x);
            for &y in &und {
                for &z in &all {
                    if z != y && !work.adjacent(y, z) {
                        continue 'search;
                    }
                }
            }
            sink = Some(x);
            break;
        }
        let x = sink.ok_or(GraphError::NoExtension)?;
        for y in work.undirected_neighbors(x) {
            out.add_edge(y, x);
        }
        for y in work.neighbors(x) {
            work.remove_edge(x, y);
        }
        active.remove(&x);
    }
    if !out.is_acyclic() {
        return Err(GraphError::NoExtension);
    }
    Ok(out)
}
