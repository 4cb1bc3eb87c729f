//! Warm-start heuristic: nearest-neighbour construction followed by
//! recourse-aware 2-opt within routes and relocation between routes.

use crate::error::{Error, Result};
use crate::instance::{Instance, Path};
use crate::oracle::route_cost;
use crate::recourse::{Policy, RecourseCache};

const IMPROVEMENT_TOL: f64 = 1e-9;
const MAX_PASSES: usize = 500;

fn nearest_neighbour(inst: &Instance) -> Vec<Vec<usize>> {
    let n = inst.n();
    let mut visited = vec![false; n + 1];
    let mut routes = Vec::new();
    let mut left = n;
    while left > 0 {
        let mut route: Vec<usize> = Vec::new();
        let mut load = 0.0;
        let mut cur = 0;
        loop {
            let next = (1..=n)
                .filter(|&j| !visited[j] && load + inst.mean(j) <= inst.route_limit() + crate::DEMAND_EPS)
                .min_by(|&a, &b| inst.distance(cur, a).total_cmp(&inst.distance(cur, b)).then(a.cmp(&b)));
            match next {
                Some(j) => {
                    visited[j] = true;
                    load += inst.mean(j);
                    route.push(j);
                    cur = j;
                    left -= 1;
                }
                None => break,
            }
        }
        routes.push(route);
    }
    routes
}

fn order_by_nearest(inst: &Instance, members: &[usize]) -> Vec<usize> {
    let mut rest = members.to_vec();
    let mut out = Vec::new();
    let mut cur = 0;
    while !rest.is_empty() {
        let k = (0..rest.len())
            .min_by(|&a, &b| inst.distance(cur, rest[a]).total_cmp(&inst.distance(cur, rest[b])))
            .unwrap();
        cur = rest.remove(k);
        out.push(cur);
    }
    out
}

/// First-fit decreasing into exactly `m` routes.
fn pack(inst: &Instance, m: usize) -> Option<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = inst.customers().collect();
    order.sort_by(|&a, &b| inst.mean(b).total_cmp(&inst.mean(a)).then(a.cmp(&b)));
    let mut bins: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new()); m];
    for i in order {
        let slot = bins
            .iter()
            .position(|(load, _)| load + inst.mean(i) <= inst.route_limit() + crate::DEMAND_EPS)?;
        bins[slot].0 += inst.mean(i);
        bins[slot].1.push(i);
    }
    let mut routes: Vec<Vec<usize>> = bins.into_iter().map(|(_, b)| b).collect();
    while let Some(empty) = routes.iter().position(|r| r.is_empty()) {
        let donor = (0..routes.len()).max_by_key(|&k| routes[k].len())?;
        if routes[donor].len() < 2 {
            return None;
        }
        let c = routes[donor].pop().unwrap();
        routes[empty].push(c);
    }
    Some(routes.iter().map(|r| order_by_nearest(inst, r)).collect())
}

/// A feasible set of routes whose count is an allowed fleet size.
pub(crate) fn construct(inst: &Instance) -> Option<Vec<Vec<usize>>> {
    let mut routes = nearest_neighbour(inst);
    let fleet = inst.fleet();
    if let Some(&target) = fleet.iter().find(|&&m| m >= routes.len()) {
        while routes.len() < target {
            let k = (0..routes.len()).max_by_key(|&k| (routes[k].len(), usize::MAX - k)).unwrap();
            let half = routes[k].len() / 2;
            let tail = routes[k].split_off(half);
            routes.push(tail);
        }
        return Some(routes);
    }
    fleet.iter().find_map(|&m| pack(inst, m))
}

struct Evaluator<'a> {
    inst: &'a Instance,
    policy: Policy,
    cache: &'a RecourseCache,
}

impl Evaluator<'_> {
    fn route(&self, r: &[usize]) -> f64 {
        if r.is_empty() {
            return 0.0;
        }
        route_cost(self.inst, r) + self.cache.best(self.inst, &Path::from_vec_unchecked(r.to_vec()), self.policy)
    }
}

fn improve(ev: &Evaluator, routes: &mut Vec<Vec<usize>>) {
    let inst = ev.inst;
    let mut values: Vec<f64> = routes.iter().map(|r| ev.route(r)).collect();
    for _ in 0..MAX_PASSES {
        // (gain, move) with move = 2-opt (route, a, b) or relocate (from, pos, to, at)
        let mut best: Option<(f64, Move)> = None;
        let mut consider = |gain: f64, mv: Move| {
            if gain > IMPROVEMENT_TOL && best.as_ref().is_none_or(|(g, _)| gain > *g + 1e-12) {
                best = Some((gain, mv));
            }
        };
        for (k, r) in routes.iter().enumerate() {
            for a in 0..r.len() {
                for b in a + 1..r.len() {
                    let mut t = r.clone();
                    t[a..=b].reverse();
                    consider(values[k] - ev.route(&t), Move::TwoOpt(k, a, b));
                }
            }
        }
        let count = routes.len();
        for from in 0..count {
            let shrinks = routes[from].len() == 1;
            if shrinks && !inst.fleet().contains(&(count - 1)) {
                continue;
            }
            for pos in 0..routes[from].len() {
                let c = routes[from][pos];
                let mut src = routes[from].clone();
                src.remove(pos);
                let src_val = ev.route(&src);
                for to in 0..count {
                    if to == from {
                        continue;
                    }
                    let mut members = routes[to].clone();
                    members.push(c);
                    if !inst.fits(&members) {
                        continue;
                    }
                    for at in 0..=routes[to].len() {
                        let mut dst = routes[to].clone();
                        dst.insert(at, c);
                        let gain = values[from] + values[to] - src_val - ev.route(&dst);
                        consider(gain, Move::Relocate(from, pos, to, at));
                    }
                }
            }
        }
        match best {
            None => break,
            Some((_, Move::TwoOpt(k, a, b))) => {
                routes[k][a..=b].reverse();
                values[k] = ev.route(&routes[k]);
            }
            Some((_, Move::Relocate(from, pos, to, at))) => {
                let c = routes[from].remove(pos);
                routes[to].insert(at, c);
                values[from] = ev.route(&routes[from]);
                values[to] = ev.route(&routes[to]);
                if routes[from].is_empty() {
                    routes.remove(from);
                    values.remove(from);
                }
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Move {
    TwoOpt(usize, usize, usize),
    Relocate(usize, usize, usize, usize),
}

/// Feasible, locally optimal routes; `Error::Infeasible` when construction
/// finds no partition whose route count is an allowed fleet size.
pub(crate) fn heuristic_routes(inst: &Instance, policy: Policy, cache: &RecourseCache) -> Result<Vec<Vec<usize>>> {
    let mut routes =
        construct(inst).ok_or_else(|| Error::Infeasible("no feasible partition found for any allowed fleet size".into()))?;
    improve(&Evaluator { inst, policy, cache }, &mut routes);
    routes.sort();
    Ok(routes)
}
