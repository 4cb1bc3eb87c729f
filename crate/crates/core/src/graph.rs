//! Undirected edges over the node set `{0} ∪ {1..n}` and edge-valued vectors.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

/// An undirected edge `{i, j}` stored with `i < j`. Node 0 is the depot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(usize, usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "self loops are not edges");
        if a < b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }

    #[inline]
    pub fn lo(self) -> usize {
        self.0
    }

    #[inline]
    pub fn hi(self) -> usize {
        self.1
    }

    #[inline]
    pub fn touches_depot(self) -> bool {
        self.0 == 0
    }

    pub fn other(self, v: usize) -> usize {
        if v == self.0 {
            self.1
        } else {
            debug_assert_eq!(v, self.1);
            self.0
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{},{}}}", self.0, self.1)
    }
}

pub type EdgeSet = BTreeSet<Edge>;

/// All edges with both endpoints in `set` (customers only).
pub fn edges_within(set: &[usize]) -> Vec<Edge> {
    let mut out = Vec::with_capacity(set.len() * set.len().saturating_sub(1) / 2);
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            out.push(Edge::new(i, j));
        }
    }
    out.sort();
    out
}

/// Consecutive edges of a customer sequence, depot excluded.
pub fn path_edges(path: &[usize]) -> Vec<Edge> {
    path.windows(2).map(|w| Edge::new(w[0], w[1])).collect()
}

/// Symmetric edge values over nodes `0..=n` (LP relaxation values of `x_e`).
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeValues {
    n: usize,
    values: Vec<f64>,
}

impl EdgeValues {
    pub fn zeros(n: usize) -> Self {
        EdgeValues {
            n,
            values: vec![0.0; (n + 1) * (n + 1)],
        }
    }

    /// Customer count (nodes are `0..=n`).
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.n + 1) + j]
    }

    #[inline]
    pub fn edge(&self, e: Edge) -> f64 {
        self.get(e.lo(), e.hi())
    }

    pub fn set(&mut self, e: Edge, v: f64) {
        let (i, j) = (e.lo(), e.hi());
        self.values[i * (self.n + 1) + j] = v;
        self.values[j * (self.n + 1) + i] = v;
    }

    pub fn add(&mut self, e: Edge, v: f64) {
        let cur = self.edge(e);
        self.set(e, cur + v);
    }

    /// Sum of values on edges incident to node `h`.
    pub fn degree(&self, h: usize) -> f64 {
        (0..=self.n).filter(|&k| k != h).map(|k| self.get(h, k)).sum()
    }

    /// Sum of values over `E(S)`.
    pub fn inner_flow(&self, set: &[usize]) -> f64 {
        let mut total = 0.0;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                total += self.get(i, j);
            }
        }
        total
    }

    /// Edges with value above `tol`.
    pub fn support(&self, tol: f64) -> Vec<(Edge, f64)> {
        let mut out = Vec::new();
        for i in 0..=self.n {
            for j in i + 1..=self.n {
                let v = self.get(i, j);
                if v > tol {
                    out.push((Edge::new(i, j), v));
                }
            }
        }
        out
    }

    pub fn is_integral(&self, tol: f64) -> bool {
        self.values.iter().all(|v| (v - v.round()).abs() <= tol)
    }

    /// Builds the edge vector of a set of depot-anchored routes.
    pub fn from_routes(n: usize, routes: &[Vec<usize>]) -> Self {
        let mut x = EdgeValues::zeros(n);
        for route in routes {
            if route.is_empty() {
                continue;
            }
            x.add(Edge::new(0, route[0]), 1.0);
            x.add(Edge::new(0, *route.last().unwrap()), 1.0);
            for w in route.windows(2) {
                x.add(Edge::new(w[0], w[1]), 1.0);
            }
        }
        x
    }
}

/// Connected components of the customer subgraph induced by edges with value
/// above `tol`. Depot edges are ignored. Each component is sorted.
pub fn customer_components(x: &EdgeValues, tol: f64) -> Vec<Vec<usize>> {
    let n = x.n();
    let mut seen = vec![false; n + 1];
    let mut out = Vec::new();
    for start in 1..=n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for w in 1..=n {
                if !seen[w] && w != v && x.get(v, w) > tol {
                    seen[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Splits an integral edge vector into depot routes and depot-free cycles.
///
/// Routes are customer sequences starting next to the depot. Cycles that do
/// not touch the depot are reported separately (they violate a capacity cut).
pub fn decompose_integral(x: &EdgeValues) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let n = x.n();
    let mut used = vec![false; n + 1];
    let mut routes = Vec::new();
    for start in 1..=n {
        if used[start] {
            continue;
        }
        let v = x.get(0, start).round() as usize;
        if v == 0 {
            continue;
        }
        if v == 2 {
            used[start] = true;
            routes.push(vec![start]);
            continue;
        }
        let mut route = vec![start];
        used[start] = true;
        let mut prev = 0;
        let mut cur = start;
        loop {
            let next = (1..=n).find(|&w| w != cur && w != prev && !used[w] && x.get(cur, w) > 0.5);
            match next {
                Some(w) => {
                    used[w] = true;
                    route.push(w);
                    prev = cur;
                    cur = w;
                }
                None => break,
            }
        }
        routes.push(route);
    }
    let mut cycles = Vec::new();
    for start in 1..=n {
        if used[start] {
            continue;
        }
        let mut cycle = vec![start];
        used[start] = true;
        let mut cur = start;
        while let Some(w) = (1..=n).find(|&w| !used[w] && x.get(cur, w) > 0.5) {
            used[w] = true;
            cycle.push(w);
            cur = w;
        }
        cycles.push(cycle);
    }
    (routes, cycles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_is_normalized() {
        assert_eq!(Edge::new(3, 1), Edge::new(1, 3));
        assert_eq!(Edge::new(3, 1).lo(), 1);
        assert!(Edge::new(2, 0).touches_depot());
    }

    #[test]
    fn routes_roundtrip_through_edge_values() {
        let routes = vec![vec![1, 2, 3], vec![4]];
        let x = EdgeValues::from_routes(4, &routes);
        assert_eq!(x.get(0, 4), 2.0);
        assert_eq!(x.degree(0), 4.0);
        for i in 1..=4 {
            assert_eq!(x.degree(i), 2.0);
        }
        let (r, c) = decompose_integral(&x);
        assert!(c.is_empty());
        assert_eq!(r, routes);
    }

    #[test]
    fn subtours_are_reported_as_cycles() {
        let mut x = EdgeValues::from_routes(5, &[vec![1, 2]]);
        x.set(Edge::new(3, 4), 1.0);
        x.set(Edge::new(4, 5), 1.0);
        x.set(Edge::new(3, 5), 1.0);
        let (r, c) = decompose_integral(&x);
        assert_eq!(r, vec![vec![1, 2]]);
        assert_eq!(c.len(), 1);
        let mut cyc = c[0].clone();
        cyc.sort();
        assert_eq!(cyc, vec![3, 4, 5]);
        let comps = customer_components(&x, 1e-6);
        assert_eq!(comps, vec![vec![1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn inner_flow_counts_set_edges_only() {
        let x = EdgeValues::from_routes(3, &[vec![1, 2, 3]]);
        assert_eq!(x.inner_flow(&[1, 2, 3]), 2.0);
        assert_eq!(x.inner_flow(&[1, 3]), 0.0);
        assert_eq!(edges_within(&[3, 1, 2]).len(), 3);
    }
}
