//! Brute-force ground truth: exhaustive solver, partition recourse, and
//! checkers for the structural properties the cuts rely on.

use crate::demand::DemandDistribution;
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeSet};
use crate::instance::{Instance, Path, VariantConfig};
use crate::recourse::{oriented_value, Policy, RecourseCache};
use crate::solver::{Solution, SolveStats, SolveStatus};
use serde::Serialize;

/// Calls `visit` with every permutation of `items`.
pub fn for_each_permutation(items: &[usize], mut visit: impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
        if k == buf.len() {
            visit(buf);
            return;
        }
        for i in k..buf.len() {
            buf.swap(k, i);
            rec(buf, k + 1, visit);
            buf.swap(k, i);
        }
    }
    let mut buf = items.to_vec();
    rec(&mut buf, 0, &mut visit);
}

fn mask_members(set: &[usize], mask: usize) -> Vec<usize> {
    set.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &c)| c).collect()
}

fn uses_forbidden(order: &[usize], forbidden: &EdgeSet) -> bool {
    !forbidden.is_empty() && order.windows(2).any(|w| forbidden.contains(&Edge::new(w[0], w[1])))
}

/// Smallest recourse over all orderings of `customers` avoiding `forbidden`
/// edges, with the ordering that attains it.
pub fn best_ordering(inst: &Instance, customers: &[usize], forbidden: &EdgeSet, policy: Policy) -> Option<(f64, Vec<usize>)> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_permutation(customers, |order| {
        if uses_forbidden(order, forbidden) {
            return;
        }
        let v = oriented_value(inst, &Path::from_vec_unchecked(order.to_vec()), policy);
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, order.to_vec()));
        }
    });
    best
}

/// Exact partition recourse of a customer set.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionEnumeration {
    pub set: Vec<usize>,
    pub m: usize,
    /// `L(S, m)`, infinite when no partition into `m` feasible paths exists.
    pub value: f64,
    /// Fewest feasible paths covering the set (restricted to allowed edges).
    pub min_vehicles: Option<usize>,
    /// Number of set partitions into `m` feasible blocks.
    pub partitions: usize,
    /// Best partition, one ordered path per block.
    pub best: Vec<Vec<usize>>,
}

/// `L(S, m)`, or its restriction to paths that avoid `forbidden`.
pub fn enumerate_l(inst: &Instance, set: &[usize], m: usize, forbidden: &EdgeSet, policy: Policy) -> Result<PartitionEnumeration> {
    if set.len() > 7 {
        return Err(Error::TooLarge(format!("partition enumeration needs |S| ≤ 7, got {}", set.len())));
    }
    if set.is_empty() || m == 0 {
        return Err(Error::Precondition("need a non-empty set and m ≥ 1".into()));
    }
    let k = set.len();
    let full = (1usize << k) - 1;
    // best path per block
    let mut block: Vec<Option<(f64, Vec<usize>)>> = vec![None; full + 1];
    for (mask, slot) in block.iter_mut().enumerate().skip(1) {
        let members = mask_members(set, mask);
        if inst.fits(&members) {
            *slot = best_ordering(inst, &members, forbidden, policy);
        }
    }
    // dp[j][mask]: best sum over partitions of `mask` into j blocks
    let mut dp = vec![vec![f64::INFINITY; full + 1]; k + 1];
    let mut count = vec![vec![0usize; full + 1]; k + 1];
    let mut choice = vec![vec![0usize; full + 1]; k + 1];
    dp[0][0] = 0.0;
    count[0][0] = 1;
    for j in 1..=k {
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            // blocks containing the lowest member
            let mut sub = rest;
            loop {
                let b = sub | low;
                if let Some((v, _)) = &block[b] {
                    let other = mask ^ b;
                    if count[j - 1][other] > 0 {
                        count[j][mask] += count[j - 1][other];
                        let total = v + dp[j - 1][other];
                        if total < dp[j][mask] {
                            dp[j][mask] = total;
                            choice[j][mask] = b;
                        }
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
    }
    let min_vehicles = (1..=k).find(|&j| count[j][full] > 0);
    let mut best = Vec::new();
    if m <= k && count[m][full] > 0 {
        let (mut j, mut mask) = (m, full);
        while j > 0 {
            let b = choice[j][mask];
            best.push(block[b].as_ref().unwrap().1.clone());
            mask ^= b;
            j -= 1;
        }
    }
    Ok(PartitionEnumeration {
        set: set.to_vec(),
        m,
        value: if m <= k { dp[m][full] } else { f64::INFINITY },
        min_vehicles,
        partitions: if m <= k { count[m][full] } else { 0 },
        best,
    })
}

/// Exhaustive optimum over every allowed fleet size and every partition of
/// the customers into ordered feasible routes.
pub fn brute_force_solve(inst: &Instance, policy: Policy) -> Result<Solution> {
    let n = inst.n();
    if n > 9 {
        return Err(Error::TooLarge(format!("brute force needs n ≤ 9, got {n}")));
    }
    let start = std::time::Instant::now();
    let customers: Vec<usize> = inst.customers().collect();
    let full = (1usize << n) - 1;
    let mut route: Vec<Option<(f64, Vec<usize>)>> = vec![None; full + 1];
    for (mask, slot) in route.iter_mut().enumerate().skip(1) {
        let members = mask_members(&customers, mask);
        if !inst.fits(&members) {
            continue;
        }
        // first-stage costs of every ordering (one orientation each), cheapest
        // first; recourse is only evaluated while it can still win
        let mut orders: Vec<(f64, Vec<usize>)> = Vec::new();
        for_each_permutation(&members, |o| {
            if o.len() > 1 && o[0] > o[o.len() - 1] {
                return;
            }
            orders.push((route_cost(inst, o), o.to_vec()));
        });
        orders.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Option<(f64, Vec<usize>)> = None;
        for (c, o) in orders {
            if let Some((b, _)) = &best {
                if c >= *b {
                    break;
                }
            }
            let p = Path::from_vec_unchecked(o.clone());
            let v = crate::recourse::recourse(inst, &p, policy);
            let total = c + v.best;
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                let oriented = if v.reversed { p.reversed().customers().to_vec() } else { o };
                best = Some((total, oriented));
            }
        }
        *slot = best;
    }
    let mut dp = vec![vec![f64::INFINITY; full + 1]; n + 1];
    let mut choice = vec![vec![0usize; full + 1]; n + 1];
    dp[0][0] = 0.0;
    let max_m = *inst.fleet().last().unwrap();
    for j in 1..=max_m {
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut sub = rest;
            loop {
                let b = sub | low;
                if let Some((v, _)) = &route[b] {
                    let t = v + dp[j - 1][mask ^ b];
                    if t < dp[j][mask] {
                        dp[j][mask] = t;
                        choice[j][mask] = b;
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
    }
    let best_m = inst
        .fleet()
        .iter()
        .copied()
        .filter(|&m| dp[m][full].is_finite())
        .min_by(|&a, &b| dp[a][full].total_cmp(&dp[b][full]))
        .ok_or_else(|| Error::Infeasible("no allowed fleet size admits a feasible partition".into()))?;
    let mut routes = Vec::new();
    let (mut j, mut mask) = (best_m, full);
    while j > 0 {
        let b = choice[j][mask];
        routes.push(route[b].as_ref().unwrap().1.clone());
        mask ^= b;
        j -= 1;
    }
    routes.sort();
    let stats = SolveStats {
        wall_time_s: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(Solution::from_routes(inst, policy, routes, SolveStatus::Optimal, stats))
}

/// Applies a variant to the base data and solves it exhaustively.
pub fn brute_force_variant(base: &Instance, variant: VariantConfig, policy: Policy) -> Result<Solution> {
    brute_force_solve(&variant.apply(base)?, policy)
}

/// `c_{0,i_1} + Σ c_{i_j,i_{j+1}} + c_{i_t,0}`.
pub fn route_cost(inst: &Instance, order: &[usize]) -> f64 {
    if order.is_empty() {
        return 0.0;
    }
    let inner: f64 = order.windows(2).map(|w| inst.distance(w[0], w[1])).sum();
    inst.distance(0, order[0]) + inner + inst.distance(*order.last().unwrap(), 0)
}

/// Every feasible path (both orientations) with 1..=max_len customers.
pub fn feasible_paths(inst: &Instance, max_len: usize, mut visit: impl FnMut(&[usize])) {
    fn rec(inst: &Instance, cur: &mut Vec<usize>, used: &mut Vec<bool>, load: f64, max_len: usize, visit: &mut dyn FnMut(&[usize])) {
        if !cur.is_empty() {
            visit(cur);
        }
        if cur.len() == max_len {
            return;
        }
        for c in inst.customers() {
            if used[c] || load + inst.mean(c) > inst.route_limit() + 1e-9 {
                continue;
            }
            used[c] = true;
            cur.push(c);
            rec(inst, cur, used, load + inst.mean(c), max_len, visit);
            cur.pop();
            used[c] = false;
        }
    }
    let mut used = vec![false; inst.n() + 1];
    rec(inst, &mut Vec::new(), &mut used, 0.0, max_len, &mut visit);
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperadditivityViolation {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub joined: f64,
    pub parts: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperadditivityReport {
    pub policy: Policy,
    pub max_len: usize,
    pub holds: bool,
    pub checked: usize,
    pub violation: Option<SuperadditivityViolation>,
}

/// Tests `Q_(p1,p2) ≥ Q_p1 + Q_p2` for every feasible concatenation with
/// `|p1| + |p2| ≤ max_len`; stops at the first violation.
pub fn check_superadditivity(inst: &Instance, policy: Policy, max_len: usize) -> Result<SuperadditivityReport> {
    if max_len > 8 {
        return Err(Error::TooLarge(format!("superadditivity check needs max_len ≤ 8, got {max_len}")));
    }
    let cache = RecourseCache::new();
    let mut checked = 0;
    let mut violation = None;
    feasible_paths(inst, max_len, |p| {
        if violation.is_some() || p.len() < 2 {
            return;
        }
        let joined = cache.best(inst, &Path::from_vec_unchecked(p.to_vec()), policy);
        for s in 1..p.len() {
            let a = cache.best(inst, &Path::from_vec_unchecked(p[..s].to_vec()), policy);
            let b = cache.best(inst, &Path::from_vec_unchecked(p[s..].to_vec()), policy);
            checked += 1;
            if joined < a + b - 1e-9 {
                violation = Some(SuperadditivityViolation {
                    first: p[..s].to_vec(),
                    second: p[s..].to_vec(),
                    joined,
                    parts: (a, b),
                });
                return;
            }
        }
    });
    Ok(SuperadditivityReport {
        policy,
        max_len,
        holds: violation.is_none(),
        checked,
        violation,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityViolation {
    pub base: Vec<usize>,
    pub a: usize,
    pub b: usize,
    pub l: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub max_set: usize,
    pub holds: bool,
    pub checked: usize,
    pub violation: Option<MonotonicityViolation>,
}

/// `P[Y ≤ lQ < Y + ξ]` for independent `Y` and `ξ`.
fn crossing_probability(y: &DemandDistribution, xi: &DemandDistribution, level: usize) -> f64 {
    let mut p = 0.0;
    for (v, py) in y.support() {
        if v > level {
            break;
        }
        p += py * xi.exceed_probability(level - v);
    }
    p
}

/// Failure-probability dominance: for every set `T = S̃ ∪ {a, b}` with
/// `|T| ≤ max_set` and `Σ_T μ ≤ fQ`, adding `a` before `b` must not make a
/// crossing of level `lQ` at `b` less likely, for every `l ≥ 1`.
pub fn check_monotonicity(inst: &Instance, max_set: usize) -> Result<MonotonicityReport> {
    if max_set > 6 {
        return Err(Error::TooLarge(format!("monotonicity check needs max_set ≤ 6, got {max_set}")));
    }
    let n = inst.n();
    let cap = inst.capacity();
    let mut checked = 0;
    for mask in 1usize..(1 << n) {
        let members: Vec<usize> = (1..=n).filter(|&c| mask >> (c - 1) & 1 == 1).collect();
        if members.len() < 2 || members.len() > max_set || !inst.fits(&members) {
            continue;
        }
        for &a in &members {
            for &b in &members {
                if a == b {
                    continue;
                }
                let base: Vec<usize> = members.iter().copied().filter(|&c| c != a && c != b).collect();
                let y = base
                    .iter()
                    .fold(DemandDistribution::point(0), |acc, &c| acc.convolve(inst.demand(c), 0.0));
                let ya = y.convolve(inst.demand(a), 0.0);
                let horizon = ya.max_support() + inst.demand(b).max_support();
                let mut l = 1;
                while l * cap < horizon {
                    let lhs = crossing_probability(&ya, inst.demand(b), l * cap);
                    let rhs = crossing_probability(&y, inst.demand(b), l * cap);
                    checked += 1;
                    if lhs < rhs - 1e-12 {
                        return Ok(MonotonicityReport {
                            max_set,
                            holds: false,
                            checked,
                            violation: Some(MonotonicityViolation { base, a, b, l, lhs, rhs }),
                        });
                    }
                    l += 1;
                }
            }
        }
    }
    Ok(MonotonicityReport {
        max_set,
        holds: true,
        checked,
        violation: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsequenceViolation {
    pub path: Vec<usize>,
    pub subsequence: Vec<usize>,
    pub path_value: f64,
    pub subsequence_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubsequenceReport {
    pub policy: Policy,
    pub holds: bool,
    pub checked: usize,
    pub violation: Option<SubsequenceViolation>,
}

/// `Q_{p'} ≤ Q_p` for every subsequence `p'` of every feasible path with at
/// most `max_len` customers. Removing one customer at a time over all paths
/// covers every subsequence by transitivity.
pub fn check_subsequence_monotonicity(inst: &Instance, policy: Policy, max_len: usize) -> Result<SubsequenceReport> {
    if max_len > 7 {
        return Err(Error::TooLarge(format!("subsequence check needs max_len ≤ 7, got {max_len}")));
    }
    let cache = RecourseCache::new();
    let mut checked = 0;
    let mut violation = None;
    feasible_paths(inst, max_len, |p| {
        if violation.is_some() || p.len() < 2 {
            return;
        }
        let full = cache.best(inst, &Path::from_vec_unchecked(p.to_vec()), policy);
        for drop in 0..p.len() {
            let sub: Vec<usize> = p.iter().enumerate().filter(|&(k, _)| k != drop).map(|(_, &c)| c).collect();
            let v = cache.best(inst, &Path::from_vec_unchecked(sub.clone()), policy);
            checked += 1;
            if v > full + 1e-9 {
                violation = Some(SubsequenceViolation {
                    path: p.to_vec(),
                    subsequence: sub,
                    path_value: full,
                    subsequence_value: v,
                });
                return;
            }
        }
    });
    Ok(SubsequenceReport {
        policy,
        holds: violation.is_none(),
        checked,
        violation,
    })
}

/// Compares `path` against every one of its proper subsequences.
pub fn check_path_subsequences(inst: &Instance, path: &Path, policy: Policy) -> SubsequenceReport {
    let p = path.customers();
    let full = crate::recourse::recourse(inst, path, policy).best;
    let mut checked = 0;
    let mut violation = None;
    for mask in 1usize..(1 << p.len()) - 1 {
        let sub: Vec<usize> = p.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &c)| c).collect();
        let v = crate::recourse::recourse(inst, &Path::from_vec_unchecked(sub.clone()), policy).best;
        checked += 1;
        if v > full + 1e-9 && violation.is_none() {
            violation = Some(SubsequenceViolation {
                path: p.to_vec(),
                subsequence: sub,
                path_value: full,
                subsequence_value: v,
            });
        }
    }
    SubsequenceReport {
        policy,
        holds: violation.is_none(),
        checked,
        violation,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TelescopingReport {
    pub policy: Policy,
    pub holds: bool,
    /// `θ_i` per customer (index 0 unused).
    pub theta: Vec<f64>,
    pub min_increment: f64,
    /// Largest `|Σ_{i∈p} θ_i − Q_p|` over routes.
    pub route_sum_error: f64,
    /// First contiguous subpath whose P-cut fails at `(x, θ)`.
    pub violated_subpath: Option<(Vec<usize>, f64, f64)>,
}

/// Sets `θ` to the prefix increments `Q(i_1..i_k) − Q(i_1..i_{k-1})` of each
/// route and checks every subpath P-cut at the resulting point.
pub fn verify_telescoping_assignment(inst: &Instance, policy: Policy, routes: &[Vec<usize>]) -> TelescopingReport {
    let cache = RecourseCache::new();
    let q = |c: &[usize]| {
        if c.is_empty() {
            0.0
        } else {
            cache.best(inst, &Path::from_vec_unchecked(c.to_vec()), policy)
        }
    };
    let mut theta = vec![0.0; inst.n() + 1];
    let mut min_inc = f64::INFINITY;
    let mut sum_err: f64 = 0.0;
    for r in routes {
        for k in 0..r.len() {
            let inc = q(&r[..=k]) - q(&r[..k]);
            theta[r[k]] = inc;
            min_inc = min_inc.min(inc);
        }
        let s: f64 = r.iter().map(|&c| theta[c]).sum();
        sum_err = sum_err.max((s - q(r)).abs());
    }
    let mut violated = None;
    'outer: for r in routes {
        for a in 0..r.len() {
            for b in a..r.len() {
                let sub = &r[a..=b];
                let lhs: f64 = sub.iter().map(|&c| theta[c]).sum();
                let rhs = q(sub);
                if lhs < rhs - 1e-9 {
                    violated = Some((sub.to_vec(), lhs, rhs));
                    break 'outer;
                }
            }
        }
    }
    TelescopingReport {
        policy,
        holds: violated.is_none() && min_inc >= -1e-9 && sum_err <= 1e-9,
        theta,
        min_increment: if min_inc.is_finite() { min_inc } else { 0.0 },
        route_sum_error: sum_err,
        violated_subpath: violated,
    }
}
