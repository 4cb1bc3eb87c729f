//! Branch-and-cut over the master problem with lazily separated optimality
//! and capacity cuts.
//!
//! Nodes are explored best-bound first. At every node the relaxation is
//! re-solved while separation finds violated cuts; cut-clean integer points
//! become incumbents whose objective is recomputed from the routes.

mod heuristic;
mod master;

use crate::cuts::{
    build_classic_cut, build_initial_pool, callback_separate, separate_rci, build_rci, CoefficientOracle, Cut, CutKind,
    SeparationConfig, VIOLATION_TOL,
};
use crate::error::{Error, Result};
use crate::graph::{decompose_integral, Edge, EdgeValues};
use crate::instance::{Instance, Path, VariantConfig};
use crate::lp::{BasisSnapshot, LpStatus};
use crate::oracle::route_cost;
use crate::recourse::{recourse, Policy, RecourseCache};
use master::Master;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::rc::Rc;
use std::time::Instant;

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const PRUNE_TOL: f64 = 1e-7;
pub const MAX_ROUNDS_FRACTIONAL: usize = 50;

#[derive(Clone, Debug, Serialize)]
pub struct SolveOptions {
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<usize>,
    pub set_cuts: bool,
    pub edge_set_cuts: bool,
    /// Single aggregated recourse variable with classic optimality cuts.
    pub classic: bool,
    /// Verify superadditivity over concatenations up to this length first.
    pub check_superadditivity: Option<usize>,
    /// Solve even if that check fails.
    pub allow_non_superadditive: bool,
    pub initial_pool: bool,
    pub warm_start: bool,
    /// Keep every added cut in [`Solution::cut_log`].
    pub record_cuts: bool,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit_s: None,
            node_limit: None,
            set_cuts: true,
            edge_set_cuts: true,
            classic: false,
            check_superadditivity: None,
            allow_non_superadditive: false,
            initial_pool: true,
            warm_start: true,
            record_cuts: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Limit,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub max_depth: usize,
    pub cut_rounds: usize,
    pub cuts: BTreeMap<String, usize>,
    pub pool_size: usize,
    pub lp_iterations: usize,
    pub incumbent_updates: usize,
    pub recourse_evaluations: usize,
    pub lp_time_s: f64,
    pub separation_time_s: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RouteReport {
    /// Customers in the executed (cheaper-recourse) orientation.
    pub customers: Vec<usize>,
    pub first_stage: f64,
    pub recourse: f64,
    /// Recourse of the opposite orientation.
    pub recourse_reverse: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CutLogEntry {
    pub node: usize,
    pub round: usize,
    pub violation: f64,
    pub cut: Cut,
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub instance: String,
    pub policy: Policy,
    pub status: SolveStatus,
    pub routes: Vec<RouteReport>,
    pub fleet_size: usize,
    pub first_stage_cost: f64,
    pub recourse_cost: f64,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub stats: SolveStats,
    #[serde(skip)]
    pub cut_log: Vec<CutLogEntry>,
}

impl Solution {
    /// Evaluates `routes` from scratch: first-stage distances plus the
    /// better-orientation recourse of each route.
    pub fn from_routes(inst: &Instance, policy: Policy, routes: Vec<Vec<usize>>, status: SolveStatus, stats: SolveStats) -> Solution {
        let reports: Vec<RouteReport> = routes
            .into_iter()
            .map(|r| {
                let v = recourse(inst, &Path::from_vec_unchecked(r.clone()), policy);
                let customers = if v.reversed { r.iter().rev().copied().collect() } else { r };
                RouteReport {
                    first_stage: route_cost(inst, &customers),
                    recourse: v.best,
                    recourse_reverse: v.forward.max(v.backward),
                    customers,
                }
            })
            .collect();
        let first_stage_cost = reports.iter().map(|r| r.first_stage).sum::<f64>();
        let recourse_cost = reports.iter().map(|r| r.recourse).sum::<f64>();
        let objective = first_stage_cost + recourse_cost;
        Solution {
            instance: inst.name().to_string(),
            policy,
            status,
            fleet_size: reports.len(),
            routes: reports,
            first_stage_cost,
            recourse_cost,
            objective,
            lower_bound: objective,
            gap: 0.0,
            stats,
            cut_log: Vec::new(),
        }
    }

    pub fn route_sets(&self) -> Vec<Vec<usize>> {
        self.routes.iter().map(|r| r.customers.clone()).collect()
    }

    /// Checks partition, capacity and objective consistency.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        let mut seen = vec![false; inst.n() + 1];
        for r in &self.routes {
            if r.customers.is_empty() || !inst.fits(&r.customers) {
                return Err(Error::Precondition(format!("route {:?} is empty or over capacity", r.customers)));
            }
            for &c in &r.customers {
                if c == 0 || c > inst.n() || std::mem::replace(&mut seen[c], true) {
                    return Err(Error::Precondition(format!("customer {c} is invalid or visited twice")));
                }
            }
        }
        if seen.iter().skip(1).any(|s| !s) {
            return Err(Error::Precondition("not every customer is visited".into()));
        }
        if !inst.fleet().contains(&self.routes.len()) {
            return Err(Error::Precondition(format!("fleet size {} not allowed", self.routes.len())));
        }
        let total = self.routes.iter().map(|r| r.first_stage + r.recourse).sum::<f64>();
        if (total - self.objective).abs() > 1e-6 {
            return Err(Error::Precondition("objective does not match its routes".into()));
        }
        Ok(())
    }
}

/// Feasible starting solution from the warm-start heuristic.
pub fn warm_start(inst: &Instance, policy: Policy) -> Result<Solution> {
    let start = Instant::now();
    let cache = RecourseCache::new();
    let routes = heuristic::heuristic_routes(inst, policy, &cache)?;
    let stats = SolveStats {
        recourse_evaluations: cache.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(Solution::from_routes(inst, policy, routes, SolveStatus::Optimal, stats))
}

pub fn solve_variant(base: &Instance, variant: VariantConfig, policy: Policy, options: &SolveOptions) -> Result<Solution> {
    solve(&variant.apply(base)?, policy, options)
}

/// The textbook integer L-shaped method: one recourse variable, one
/// optimality cut per integer point. Requires a single fleet size.
pub fn solve_classic_baseline(inst: &Instance, policy: Policy, options: &SolveOptions) -> Result<Solution> {
    let options = SolveOptions {
        classic: true,
        ..options.clone()
    };
    solve(inst, policy, &options)
}

#[derive(Clone, Debug)]
struct Node {
    id: usize,
    bound: f64,
    depth: usize,
    fixings: Vec<(usize, f64, f64)>,
    /// Final basis of the parent, shared by both children.
    basis: Option<Rc<BasisSnapshot>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then deepest, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

/// What to branch on at a node.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Branch {
    Var { var: usize, value: f64 },
}

fn fractionality(v: f64) -> f64 {
    (v - v.floor()).min(v.ceil() - v)
}

/// Most fractional edge (ties: larger cost, then smaller edge), else the most
/// fractional fleet selector.
fn choose_branch(inst: &Instance, master: &Master, x: &EdgeValues, z: &[f64]) -> Option<Branch> {
    let mut best: Option<(f64, f64, Edge)> = None;
    for k in 0..master.num_edges() {
        let e = master.edge_of(k).unwrap();
        let f = fractionality(x.edge(e));
        if f <= INTEGRALITY_TOL {
            continue;
        }
        let c = inst.edge_cost(e);
        let better = match best {
            None => true,
            Some((bf, bc, be)) => {
                f > bf + 1e-12 || ((f - bf).abs() <= 1e-12 && (c > bc + 1e-12 || ((c - bc).abs() <= 1e-12 && e < be)))
            }
        };
        if better {
            best = Some((f, c, e));
        }
    }
    if let Some((_, _, e)) = best {
        return Some(Branch::Var {
            var: master.edge_var(e),
            value: x.edge(e),
        });
    }
    let (k, f) = z
        .iter()
        .enumerate()
        .map(|(k, &v)| (k, fractionality(v)))
        .fold((0, 0.0), |acc, (k, f)| if f > acc.1 + 1e-12 { (k, f) } else { acc });
    (f > INTEGRALITY_TOL).then(|| Branch::Var {
        var: master.fleet_var(k),
        value: z[k],
    })
}

/// Children `v ≤ ⌊value⌋` and `v ≥ ⌈value⌉` of a node.
fn branch(node: &Node, bound: f64, b: Branch, basis: Option<Rc<BasisSnapshot>>, next_id: &mut usize) -> [Node; 2] {
    let Branch::Var { var, value } = b;
    let child = |lo: f64, hi: f64, id: usize| {
        let mut fixings = node.fixings.clone();
        fixings.push((var, lo, hi));
        Node {
            id,
            bound,
            depth: node.depth + 1,
            fixings,
            basis: basis.clone(),
        }
    };
    let down = child(f64::NEG_INFINITY, value.floor(), *next_id);
    let up = child(value.ceil(), f64::INFINITY, *next_id + 1);
    *next_id += 2;
    [down, up]
}

struct Incumbent {
    objective: f64,
    routes: Vec<Vec<usize>>,
}

/// Routes of an integral, capacity-feasible point, if it is one.
fn routes_of(inst: &Instance, x: &EdgeValues) -> Option<Vec<Vec<usize>>> {
    let (mut routes, cycles) = decompose_integral(x);
    if !cycles.is_empty() || !routes.iter().all(|r| inst.fits(r)) || !inst.fleet().contains(&routes.len()) {
        return None;
    }
    if routes.iter().map(Vec::len).sum::<usize>() != inst.n() {
        return None;
    }
    routes.sort();
    Some(routes)
}

fn evaluate_routes(inst: &Instance, policy: Policy, cache: &RecourseCache, routes: &[Vec<usize>]) -> f64 {
    routes
        .iter()
        .map(|r| route_cost(inst, r) + cache.best(inst, &Path::from_vec_unchecked(r.clone()), policy))
        .sum()
}

/// Solves the instance to optimality (or until a limit) under `policy`.
pub fn solve(inst: &Instance, policy: Policy, options: &SolveOptions) -> Result<Solution> {
    let start = Instant::now();
    if options.classic && inst.fleet().len() != 1 {
        return Err(Error::Precondition(format!(
            "the aggregated optimality cut needs a single fleet size, got {:?}",
            inst.fleet()
        )));
    }
    if let Some(depth) = options.check_superadditivity {
        let report = crate::oracle::check_superadditivity(inst, policy, depth)?;
        if !report.holds && !options.classic && !options.allow_non_superadditive {
            let v = report.violation.as_ref().unwrap();
            return Err(Error::NotSuperadditive(format!(
                "{:?} + {:?}: {} < {} + {}",
                v.first, v.second, v.joined, v.parts.0, v.parts.1
            )));
        }
    }
    let cache = RecourseCache::new();
    let oracle = CoefficientOracle::new(inst, policy, &cache);
    let config = SeparationConfig {
        set_cuts: options.set_cuts,
        edge_set_cuts: options.edge_set_cuts,
    };
    let mut stats = SolveStats::default();
    let mut cut_log = Vec::new();
    let mut incumbent: Option<Incumbent> = None;
    if options.warm_start {
        if let Ok(routes) = heuristic::heuristic_routes(inst, policy, &cache) {
            let objective = evaluate_routes(inst, policy, &cache, &routes);
            incumbent = Some(Incumbent { objective, routes });
        }
    }
    let mut pool: Vec<Cut> = if !options.classic && options.set_cuts && options.initial_pool {
        build_initial_pool(&oracle)
    } else {
        Vec::new()
    };
    stats.pool_size = pool.len();

    let mut master = Master::new(inst, options.classic)?;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        depth: 0,
        fixings: Vec::new(),
        basis: None,
    });
    let mut next_id = 1;
    let mut hit_limit = false;
    let mut limit_bound = f64::INFINITY;
    let out_of_time = |start: &Instant| options.time_limit_s.is_some_and(|t| start.elapsed().as_secs_f64() >= t);

    'nodes: while let Some(node) = heap.pop() {
        let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective);
        if node.bound >= cutoff - PRUNE_TOL {
            continue;
        }
        if out_of_time(&start) || options.node_limit.is_some_and(|l| stats.nodes >= l) {
            hit_limit = true;
            limit_bound = node.bound;
            heap.push(node);
            break;
        }
        stats.nodes += 1;
        stats.max_depth = stats.max_depth.max(node.depth);
        master.apply_bounds(&node.fixings);
        if let Some(b) = &node.basis {
            master.lp.restore_basis(b);
        }
        let mut bound = node.bound;
        let mut rounds = 0;
        let (x, z, clean) = loop {
            let t = Instant::now();
            let status = master.solve()?;
            stats.lp_time_s += t.elapsed().as_secs_f64();
            if status == LpStatus::Infeasible {
                continue 'nodes;
            }
            bound = bound.max(master.lp_objective());
            let cutoff = incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective);
            if bound >= cutoff - PRUNE_TOL {
                continue 'nodes;
            }
            let (x, z, theta) = master.point();
            let integer = x.is_integral(INTEGRALITY_TOL);
            let t = Instant::now();
            let mut found: Vec<(Cut, f64)> = Vec::new();
            if options.classic {
                for (set, viol) in separate_rci(inst, &x) {
                    found.push((build_rci(inst, &set), viol));
                }
                if integer && found.is_empty() {
                    if let Some(routes) = routes_of(inst, &x) {
                        let q: f64 = routes
                            .iter()
                            .map(|r| cache.best(inst, &Path::from_vec_unchecked(r.clone()), policy))
                            .sum();
                        let cut = build_classic_cut(&x, q, 0.0);
                        let v = cut.violation(&x, &theta);
                        if v > VIOLATION_TOL {
                            found.push((cut, v));
                        }
                    }
                }
            } else {
                for cut in callback_separate(&oracle, config, &x, &theta, integer) {
                    let v = cut.violation(&x, &theta);
                    found.push((cut, v));
                }
                let mut k = 0;
                while k < pool.len() {
                    let v = pool[k].violation(&x, &theta);
                    if v > VIOLATION_TOL {
                        found.push((pool.swap_remove(k), v));
                    } else {
                        k += 1;
                    }
                }
            }
            stats.separation_time_s += t.elapsed().as_secs_f64();
            if found.is_empty() {
                break (x, z, true);
            }
            for (cut, v) in found {
                *stats.cuts.entry(cut.kind.name().to_string()).or_default() += 1;
                master.add_cut(&cut);
                if options.record_cuts {
                    cut_log.push(CutLogEntry {
                        node: node.id,
                        round: rounds,
                        violation: v,
                        cut,
                    });
                }
            }
            rounds += 1;
            stats.cut_rounds += 1;
            if !integer && rounds >= MAX_ROUNDS_FRACTIONAL {
                break (x, z, false);
            }
            if out_of_time(&start) {
                hit_limit = true;
                limit_bound = bound;
                break 'nodes;
            }
        };
        let choice = choose_branch(inst, &master, &x, &z);
        match choice {
            Some(b) => {
                let snap = Rc::new(master.lp.basis_snapshot());
                for child in branch(&node, bound, b, Some(snap), &mut next_id) {
                    heap.push(child);
                }
            }
            None if clean => {
                if let Some(routes) = routes_of(inst, &x) {
                    let objective = evaluate_routes(inst, policy, &cache, &routes);
                    if incumbent.as_ref().is_none_or(|i| objective < i.objective - 1e-12) {
                        incumbent = Some(Incumbent { objective, routes });
                        stats.incumbent_updates += 1;
                    }
                }
            }
            None => {}
        }
    }

    stats.lp_iterations = master.lp_iterations();
    stats.recourse_evaluations = cache.len();
    stats.wall_time_s = start.elapsed().as_secs_f64();
    let inc = match incumbent {
        Some(i) => i,
        None if hit_limit => return Err(Error::Limit("no incumbent when the search stopped".into())),
        None => return Err(Error::Infeasible("no fleet size admits a feasible partition".into())),
    };
    let status = if hit_limit { SolveStatus::Limit } else { SolveStatus::Optimal };
    let mut sol = Solution::from_routes(inst, policy, inc.routes, status, stats);
    if hit_limit {
        let open = heap.iter().map(|n| n.bound).fold(limit_bound, f64::min);
        sol.lower_bound = open.min(sol.objective);
        sol.gap = if sol.objective.abs() > 1e-12 {
            ((sol.objective - sol.lower_bound) / sol.objective.abs()).max(0.0)
        } else {
            0.0
        };
    }
    sol.cut_log = cut_log;
    Ok(sol)
}

/// Counts the added cuts of one kind.
pub fn cut_count(sol: &Solution, kind: CutKind) -> usize {
    sol.stats.cuts.get(kind.name()).copied().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    #[test]
    fn square_optimum_with_edge_set_cut() {
        let fig2 = builtin::fig2();
        let opts = SolveOptions {
            record_cuts: true,
            ..Default::default()
        };
        let sol = solve(&fig2, Policy::Or, &opts).unwrap();
        assert!((sol.objective - 5.125).abs() < 1e-9, "{}", sol.objective);
        sol.validate(&fig2).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn classic_agrees_on_square() {
        let fig2 = builtin::fig2();
        let sol = solve_classic_baseline(&fig2, Policy::Or, &SolveOptions::default()).unwrap();
        assert!((sol.objective - 5.125).abs() < 1e-9);
    }

    #[test]
    fn warm_start_is_feasible() {
        let fig2 = builtin::fig2();
        let ws = warm_start(&fig2, Policy::Or).unwrap();
        ws.validate(&fig2).unwrap();
        assert!(ws.objective >= 5.125 - 1e-9);
    }

    #[test]
    fn branching_rule() {
        let node = Node {
            id: 0,
            bound: 1.0,
            depth: 0,
            fixings: vec![],
            basis: None,
        };
        let mut id = 1;
        let [down, up] = branch(&node, 2.0, Branch::Var { var: 3, value: 1.5 }, None, &mut id);
        assert_eq!(down.fixings, vec![(3, f64::NEG_INFINITY, 1.0)]);
        assert_eq!(up.fixings, vec![(3, 2.0, f64::INFINITY)]);
        assert_eq!((down.depth, up.bound, id), (1, 2.0, 3));
    }
}
