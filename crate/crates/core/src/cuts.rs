//! Valid inequalities of the master problem and their separation.
//!
//! Optimality cuts bound the per-customer recourse variables `θ_i`:
//!
//! * path cut of `p`:      `Σ_{N(p)} θ ≥ Q_p (Σ_{edges of p} x − |N(p)| + 2)`
//! * set cut of `S`:       `Σ_S θ ≥ L (Σ_{E(S)} x − |S| + m + 1)`
//! * edge-set cut `(S, F)`: the set cut restricted to the edges `F ⊆ E(S)`,
//!   whose coefficient only has to bound partitions of `S` into paths that
//!   use edges of `F`.
//!
//! Rounded capacity inequalities `Σ_{E(S)} x ≤ |S| − ⌈Σ_S μ / fQ⌉` enforce
//! feasibility, and the classic single-variable cut is kept as a baseline.

use crate::bounds::{vehicles_for, BoundsEngine};
use crate::graph::{customer_components, edges_within, path_edges, Edge, EdgeSet, EdgeValues};
use crate::instance::{ceil_tol, Instance, Path};
use crate::oracle::for_each_permutation;
use crate::recourse::{Policy, RecourseCache};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Mutex;

pub const VIOLATION_TOL: f64 = 1e-6;
pub const SUPPORT_TOL: f64 = 1e-6;
const TRIVIAL_COEFFICIENT: f64 = 1e-9;
/// Cuts of each kind kept per round at integer points.
pub const PER_KIND_AT_INTEGER: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CutKind {
    #[serde(rename = "rci")]
    Rci,
    #[serde(rename = "p")]
    Path,
    #[serde(rename = "s")]
    Set,
    #[serde(rename = "e")]
    EdgeSet,
    #[serde(rename = "classic")]
    Classic,
}

impl CutKind {
    pub fn name(self) -> &'static str {
        match self {
            CutKind::Rci => "rci",
            CutKind::Path => "p",
            CutKind::Set => "s",
            CutKind::EdgeSet => "e",
            CutKind::Classic => "classic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

/// `Σ_{i∈theta} θ_i + Σ a_e x_e (sense) rhs`. Index 0 of `theta` stands for
/// the single aggregated recourse variable of the classic model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cut {
    pub kind: CutKind,
    pub set: Vec<usize>,
    pub edges: Vec<Edge>,
    pub coefficient: f64,
    pub vehicles: usize,
    pub theta: Vec<usize>,
    pub x_terms: Vec<(Edge, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Cut {
    /// Positive when the point violates the cut.
    pub fn violation(&self, x: &EdgeValues, theta: &[f64]) -> f64 {
        let lhs: f64 = self.theta.iter().map(|&i| theta[i]).sum::<f64>()
            + self.x_terms.iter().map(|&(e, a)| a * x.edge(e)).sum::<f64>();
        match self.sense {
            Sense::Ge => self.rhs - lhs,
            Sense::Le => lhs - self.rhs,
        }
    }

    pub fn key(&self) -> CutKey {
        (self.kind, self.set.clone(), self.edges.clone())
    }

    pub fn is_trivial(&self) -> bool {
        self.kind != CutKind::Rci && self.coefficient <= TRIVIAL_COEFFICIENT
    }
}

pub type CutKey = (CutKind, Vec<usize>, Vec<Edge>);

fn sorted(set: &[usize]) -> Vec<usize> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s
}

/// `Σ θ ≥ L (Σ_{edges} x − |S| + m + 1)` in row form.
fn theta_form(kind: CutKind, set: &[usize], edges: Vec<Edge>, coefficient: f64, vehicles: usize) -> Cut {
    let set = sorted(set);
    let x_terms = edges.iter().map(|&e| (e, -coefficient)).collect();
    let rhs = coefficient * (vehicles as f64 + 1.0 - set.len() as f64);
    Cut {
        kind,
        theta: set.clone(),
        set,
        edges,
        coefficient,
        vehicles,
        x_terms,
        sense: Sense::Ge,
        rhs,
    }
}

/// Path cut with coefficient `q_p = Q_p`. A path is its own single-vehicle
/// edge set, hence `m = 1`.
pub fn build_p_cut(path: &Path, q_p: f64) -> Cut {
    let mut c = theta_form(CutKind::Path, path.customers(), path.edges(), q_p, 1);
    // keep the visiting order for the audit log
    c.set = path.customers().to_vec();
    c.edges = path_edges(path.customers());
    c
}

pub fn build_s_cut(set: &[usize], vehicles: usize, coefficient: f64) -> Cut {
    theta_form(CutKind::Set, set, edges_within(&sorted(set)), coefficient, vehicles)
}

pub fn build_e_cut(set: &[usize], edge_set: &[Edge], vehicles: usize, coefficient: f64) -> Cut {
    let mut edges = edge_set.to_vec();
    edges.sort();
    theta_form(CutKind::EdgeSet, set, edges, coefficient, vehicles)
}

pub fn build_rci(inst: &Instance, set: &[usize]) -> Cut {
    let set = sorted(set);
    let k = ceil_tol(set.iter().map(|&i| inst.mean(i)).sum::<f64>() / inst.route_limit()).max(1);
    let edges = edges_within(&set);
    Cut {
        kind: CutKind::Rci,
        x_terms: edges.iter().map(|&e| (e, 1.0)).collect(),
        rhs: set.len() as f64 - k as f64,
        set,
        edges,
        coefficient: 0.0,
        vehicles: k,
        theta: Vec::new(),
        sense: Sense::Le,
    }
}

/// `Θ ≥ L + (Q(x^ν) − L)(Σ_{e∈A} x_e − |A| + 1)` where `A` are the customer
/// edges used by the integer point `x^ν`.
pub fn build_classic_cut(x_nu: &EdgeValues, q_nu: f64, lower: f64) -> Cut {
    let active: Vec<Edge> = x_nu
        .support(0.5)
        .into_iter()
        .filter(|(e, _)| !e.touches_depot())
        .map(|(e, _)| e)
        .collect();
    let slope = q_nu - lower;
    Cut {
        kind: CutKind::Classic,
        set: Vec::new(),
        x_terms: active.iter().map(|&e| (e, -slope)).collect(),
        rhs: lower + slope * (1.0 - active.len() as f64),
        edges: active,
        coefficient: q_nu,
        vehicles: 0,
        theta: vec![0],
        sense: Sense::Ge,
    }
}

/// Customer sets whose rounded capacity inequality is violated: connected
/// components of the support graph, each shrunk greedily by dropping the
/// customer with the largest depot flow. Exact at integer points, where
/// every component is a route or a depot-free cycle.
pub fn separate_rci(inst: &Instance, x: &EdgeValues) -> Vec<(Vec<usize>, f64)> {
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut seen = HashSet::new();
    for comp in customer_components(x, SUPPORT_TOL) {
        let mut s = comp;
        while !s.is_empty() {
            if seen.insert(s.clone()) {
                let k = ceil_tol(s.iter().map(|&i| inst.mean(i)).sum::<f64>() / inst.route_limit()).max(1);
                let viol = x.inner_flow(&s) - (s.len() as f64 - k as f64);
                if viol > VIOLATION_TOL {
                    out.push((s.clone(), viol));
                }
            }
            let drop = s
                .iter()
                .enumerate()
                .max_by(|a, b| x.get(0, *a.1).total_cmp(&x.get(0, *b.1)).then(b.1.cmp(a.1)))
                .map(|(k, _)| k)
                .unwrap();
            s.remove(drop);
        }
    }
    out
}

/// Edge set `{e ∈ E(S) : c^P_e ≥ c^P_{e*}}` where `e*` is the active edge of
/// `E(S)` with the cheapest preventive restock (ties: smallest edge).
pub fn select_edge_set(inst: &Instance, x: &EdgeValues, set: &[usize]) -> Option<Vec<Edge>> {
    let edges = edges_within(&sorted(set));
    let pcost = |e: Edge| inst.preventive_cost(e.lo(), e.hi());
    let pivot = edges
        .iter()
        .copied()
        .filter(|&e| x.edge(e) > SUPPORT_TOL)
        .min_by(|&a, &b| pcost(a).total_cmp(&pcost(b)).then(a.cmp(&b)))?;
    let threshold = pcost(pivot);
    Some(edges.into_iter().filter(|&e| pcost(e) >= threshold - 1e-12).collect())
}

type CoefficientMemo = Mutex<HashMap<(Vec<usize>, Vec<Edge>), Option<(f64, usize)>>>;

/// Coefficients of set and edge-set cuts. Small sets are enumerated exactly
/// (partitions into the fewest feasible paths); larger ones fall back to the
/// dynamic-programming bounds.
pub struct CoefficientOracle<'a> {
    inst: &'a Instance,
    policy: Policy,
    cache: &'a RecourseCache,
    bounds: BoundsEngine,
    pub enumeration_limit: usize,
    memo: CoefficientMemo,
}

impl<'a> CoefficientOracle<'a> {
    pub fn new(inst: &'a Instance, policy: Policy, cache: &'a RecourseCache) -> Self {
        CoefficientOracle {
            inst,
            policy,
            cache,
            bounds: BoundsEngine::new(),
            enumeration_limit: 6,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn path_recourse(&self, path: &Path) -> f64 {
        self.cache.best(self.inst, path, self.policy)
    }

    /// `(L, m)` valid for the cut of `set` restricted to edges outside
    /// `forbidden`, or `None` when no bound is available.
    pub fn coefficient(&self, set: &[usize], forbidden: &EdgeSet) -> Option<(f64, usize)> {
        let set = sorted(set);
        let key = (set.clone(), forbidden.iter().copied().collect::<Vec<_>>());
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return *v;
        }
        let v = if set.len() <= self.enumeration_limit {
            self.enumerate(&set, forbidden)
        } else {
            let m = vehicles_for(self.inst, &set);
            if m > set.len() {
                None
            } else {
                self.bounds
                    .best_bound(self.inst, &set, m, forbidden)
                    .filter(|l| l.is_finite())
                    .map(|l| (l.max(0.0), m))
            }
        };
        self.memo.lock().unwrap().insert(key, v);
        v
    }

    /// Smallest partition recourse of `set` into the fewest feasible paths
    /// avoiding `forbidden`, with that number of paths.
    fn enumerate(&self, set: &[usize], forbidden: &EdgeSet) -> Option<(f64, usize)> {
        let k = set.len();
        let full = (1usize << k) - 1;
        let mut block = vec![f64::INFINITY; full + 1];
        for (mask, slot) in block.iter_mut().enumerate().skip(1) {
            let members: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| set[b]).collect();
            if !self.inst.fits(&members) {
                continue;
            }
            for_each_permutation(&members, |o| {
                if o.len() > 1 && o[0] > o[o.len() - 1] {
                    return;
                }
                if o.windows(2).any(|w| forbidden.contains(&Edge::new(w[0], w[1]))) {
                    return;
                }
                let v = self.cache.best(self.inst, &Path::from_vec_unchecked(o.to_vec()), self.policy);
                if v < *slot {
                    *slot = v;
                }
            });
        }
        let mut prev = vec![f64::INFINITY; full + 1];
        prev[0] = 0.0;
        for j in 1..=k {
            let mut cur = vec![f64::INFINITY; full + 1];
            for mask in 1..=full {
                let low = mask & mask.wrapping_neg();
                let rest = mask ^ low;
                let mut sub = rest;
                loop {
                    let b = sub | low;
                    let v = block[b] + prev[mask ^ b];
                    if v < cur[mask] {
                        cur[mask] = v;
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & rest;
                }
            }
            if cur[full].is_finite() {
                return Some((cur[full], j));
            }
            prev = cur;
        }
        None
    }
}

/// Which optimality cut families separation may produce.
#[derive(Clone, Copy, Debug)]
pub struct SeparationConfig {
    pub set_cuts: bool,
    pub edge_set_cuts: bool,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            set_cuts: true,
            edge_set_cuts: true,
        }
    }
}

fn candidate(cut: Cut, x: &EdgeValues, theta: &[f64]) -> Option<(Cut, f64)> {
    if cut.is_trivial() {
        return None;
    }
    let v = cut.violation(x, theta);
    (v > VIOLATION_TOL).then_some((cut, v))
}

fn set_and_edge_cuts(
    oracle: &CoefficientOracle,
    config: SeparationConfig,
    set: &[usize],
    x: &EdgeValues,
    theta: &[f64],
    out: &mut Vec<(Cut, f64)>,
) {
    if config.set_cuts {
        if let Some((l, m)) = oracle.coefficient(set, &EdgeSet::new()) {
            out.extend(candidate(build_s_cut(set, m, l), x, theta));
        }
    }
    if config.edge_set_cuts && set.len() >= 2 {
        if let Some(es) = select_edge_set(oracle.inst, x, set) {
            let all = edges_within(&sorted(set));
            if es.len() < all.len() {
                let kept: EdgeSet = es.iter().copied().collect();
                let forbidden: EdgeSet = all.into_iter().filter(|e| !kept.contains(e)).collect();
                if let Some((l, m)) = oracle.coefficient(set, &forbidden) {
                    out.extend(candidate(build_e_cut(set, &es, m, l), x, theta));
                }
            }
        }
    }
}

/// The ordering of a component's active edges if they form a simple path.
fn active_path(x: &EdgeValues, set: &[usize]) -> Option<Vec<usize>> {
    if set.len() == 1 {
        return Some(set.to_vec());
    }
    let active: Vec<Edge> = edges_within(set).into_iter().filter(|&e| x.edge(e) > SUPPORT_TOL).collect();
    if active.len() != set.len() - 1 {
        return None;
    }
    let mut adj: BTreeMap<usize, Vec<usize>> = set.iter().map(|&i| (i, Vec::new())).collect();
    for e in &active {
        adj.get_mut(&e.lo()).unwrap().push(e.hi());
        adj.get_mut(&e.hi()).unwrap().push(e.lo());
    }
    if adj.values().any(|v| v.len() > 2) {
        return None;
    }
    let start = *adj.iter().find(|(_, v)| v.len() == 1)?.0;
    let mut order = vec![start];
    let mut prev = 0;
    let mut cur = start;
    while let Some(&next) = adj[&cur].iter().find(|&&w| w != prev) {
        order.push(next);
        prev = cur;
        cur = next;
    }
    (order.len() == set.len()).then_some(order)
}

/// One separation round at a relaxation point `(x, θ)`.
///
/// 1. violated capacity inequalities, plus the set and edge-set cuts of
///    each violating set;
/// 2. at fractional points, the set and edge-set cuts of every connected
///    component and the path cut of components whose active edges form a
///    path;
/// 3. at integer points without capacity violations, path, set and edge-set
///    cuts of every subpath of every route, keeping the most violated few of
///    each kind.
pub fn callback_separate(
    oracle: &CoefficientOracle,
    config: SeparationConfig,
    x: &EdgeValues,
    theta: &[f64],
    is_integer: bool,
) -> Vec<Cut> {
    let inst = oracle.inst;
    let mut found: Vec<(Cut, f64)> = Vec::new();
    let rci = separate_rci(inst, x);
    for (set, viol) in &rci {
        found.push((build_rci(inst, set), *viol));
        set_and_edge_cuts(oracle, config, set, x, theta, &mut found);
    }
    if !is_integer {
        for comp in customer_components(x, SUPPORT_TOL) {
            set_and_edge_cuts(oracle, config, &comp, x, theta, &mut found);
            if let Some(order) = active_path(x, &comp) {
                if inst.fits(&order) {
                    let p = Path::from_vec_unchecked(order);
                    let q = oracle.path_recourse(&p);
                    found.extend(candidate(build_p_cut(&p, q), x, theta));
                }
            }
        }
    } else if rci.is_empty() {
        let (routes, _) = crate::graph::decompose_integral(x);
        let mut per_kind: BTreeMap<CutKind, Vec<(Cut, f64)>> = BTreeMap::new();
        for r in &routes {
            for a in 0..r.len() {
                for b in a..r.len() {
                    let sub = &r[a..=b];
                    let p = Path::from_vec_unchecked(sub.to_vec());
                    let q = oracle.path_recourse(&p);
                    let mut local = Vec::new();
                    local.extend(candidate(build_p_cut(&p, q), x, theta));
                    set_and_edge_cuts(oracle, config, sub, x, theta, &mut local);
                    for (c, v) in local {
                        per_kind.entry(c.kind).or_default().push((c, v));
                    }
                }
            }
        }
        for (_, mut list) in per_kind {
            list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.key().cmp(&b.0.key())));
            let mut keys = HashSet::new();
            list.retain(|(c, _)| keys.insert(c.key()));
            found.extend(list.into_iter().take(PER_KIND_AT_INTEGER));
        }
    }
    let mut keys = HashSet::new();
    found.retain(|(c, _)| keys.insert(c.key()));
    found.into_iter().map(|(c, _)| c).collect()
}

/// Nontrivial set cuts `Σ_S θ ≥ L(S,1)(Σ_{E(S)} x − |S| + 2)` for every set of
/// 2–4 customers (2–3 when `n > 32`) that fits one vehicle.
pub fn build_initial_pool(oracle: &CoefficientOracle) -> Vec<Cut> {
    let inst = oracle.inst;
    let n = inst.n();
    let max_size = if n <= 32 { 4 } else { 3 };
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(
        oracle: &CoefficientOracle,
        start: usize,
        n: usize,
        max_size: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Cut>,
    ) {
        if cur.len() >= 2 {
            if !oracle.inst.fits(cur) {
                return;
            }
            if let Some((l, 1)) = oracle.coefficient(cur, &EdgeSet::new()) {
                let c = build_s_cut(cur, 1, l);
                if !c.is_trivial() {
                    out.push(c);
                }
            }
        }
        if cur.len() == max_size {
            return;
        }
        for i in start..=n {
            cur.push(i);
            rec(oracle, i + 1, n, max_size, cur, out);
            cur.pop();
        }
    }
    rec(oracle, 1, n, max_size, &mut cur, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn square_cycle() -> EdgeValues {
        EdgeValues::from_routes(4, &[vec![1, 2, 3, 4]])
    }

    #[test]
    fn square_edge_set_drops_diagonals() {
        let fig2 = builtin::fig2();
        let es = select_edge_set(&fig2, &square_cycle(), &[1, 2, 3, 4]).unwrap();
        assert_eq!(es, vec![Edge::new(1, 2), Edge::new(1, 4), Edge::new(2, 3), Edge::new(3, 4)]);
    }

    #[test]
    fn square_edge_set_cut_coefficients() {
        let fig2 = builtin::fig2();
        let cache = RecourseCache::new();
        let oracle = CoefficientOracle::new(&fig2, Policy::Or, &cache);
        let forbidden: EdgeSet = [Edge::new(1, 3), Edge::new(2, 4)].into_iter().collect();
        let (l, m) = oracle.coefficient(&[1, 2, 3, 4], &forbidden).unwrap();
        assert!((l - 0.125).abs() < 1e-12);
        assert_eq!(m, 1);
        let cut = build_e_cut(&[1, 2, 3, 4], &select_edge_set(&fig2, &square_cycle(), &[1, 2, 3, 4]).unwrap(), m, l);
        assert!((cut.rhs + 0.25).abs() < 1e-12);
        assert!(cut.x_terms.iter().all(|&(_, a)| (a + 0.125).abs() < 1e-12));
        assert_eq!(oracle.coefficient(&[1, 2, 3, 4], &EdgeSet::new()).unwrap().0, 0.0);
        assert!(build_initial_pool(&oracle).is_empty());
    }

    #[test]
    fn integer_route_yields_path_cut() {
        let fig2 = builtin::fig2();
        let cache = RecourseCache::new();
        let oracle = CoefficientOracle::new(&fig2, Policy::Or, &cache);
        let theta = vec![0.0; 5];
        let cuts = callback_separate(&oracle, SeparationConfig::default(), &square_cycle(), &theta, true);
        let p = cuts.iter().find(|c| c.kind == CutKind::Path && c.set.len() == 4).unwrap();
        assert!((p.coefficient - 0.125).abs() < 1e-12);
        assert!(cuts.iter().any(|c| c.kind == CutKind::EdgeSet));
        // once θ carries the recourse nothing is violated
        let theta = vec![0.0, 0.125, 0.0, 0.0, 0.0];
        assert!(callback_separate(&oracle, SeparationConfig::default(), &square_cycle(), &theta, true).is_empty());
    }

    #[test]
    fn rci_examples() {
        let fig2 = builtin::fig2();
        let mut x = EdgeValues::zeros(4);
        for (i, j) in [(1, 2), (2, 3), (1, 3)] {
            x.set(Edge::new(i, j), 1.0);
        }
        x.set(Edge::new(0, 4), 2.0);
        let v = separate_rci(&fig2, &x);
        assert!(v.iter().any(|(s, viol)| s == &vec![1, 2, 3] && *viol >= 1.0));
        // a route whose expected load equals fQ is fine
        assert!(separate_rci(&fig2, &square_cycle()).is_empty());
    }

    #[test]
    fn classic_cut_is_tight_only_at_its_point() {
        let x = square_cycle();
        let cut = build_classic_cut(&x, 0.125, 0.0);
        assert!((cut.violation(&x, &[0.0]) - 0.125).abs() < 1e-12);
        let other = EdgeValues::from_routes(4, &[vec![1, 3, 2, 4]]);
        assert!(cut.violation(&other, &[0.0]) <= 0.0);
    }

    #[test]
    fn edge_set_cut_generalizes_set_and_path_cuts() {
        let s = build_s_cut(&[1, 2, 3], 1, 0.5);
        let e = build_e_cut(&[1, 2, 3], &edges_within(&[1, 2, 3]), 1, 0.5);
        assert_eq!((s.x_terms.clone(), s.rhs, s.theta.clone()), (e.x_terms.clone(), e.rhs, e.theta.clone()));
        let p = build_p_cut(&Path::from_vec_unchecked(vec![2, 1, 3]), 0.7);
        let pe = build_e_cut(&[1, 2, 3], &[Edge::new(1, 2), Edge::new(1, 3)], 1, 0.7);
        let mut pt = p.x_terms.clone();
        pt.sort_by_key(|a| a.0);
        assert_eq!((pt, p.rhs, p.theta.clone()), (pe.x_terms, pe.rhs, pe.theta));
    }
}
