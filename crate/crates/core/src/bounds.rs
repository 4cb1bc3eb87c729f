//! Lower bounds on the best partition recourse `L(S, m)` of a customer set.
//!
//! Both bounds spread the set's expected demand over `m` vehicles in units of
//! `μ̄ = gcd(μ_i)` and charge each vehicle a floor on its recourse given only
//! its load. [`lower_bound_l1`] uses the probability that a vehicle needs any
//! recourse action times its cheapest action (identically distributed
//! demands). [`lower_bound_l2`] splits Poisson demands into Poisson(μ̄)
//! subcustomers and runs the restocking recursion with floored costs.

use crate::demand::DemandDistribution;
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeSet};
use crate::instance::Instance;
use crate::recourse::trips;
use crate::DEFAULT_TAIL_EPS;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Cheapest recourse costs reachable by each vehicle `k = 1..=m`.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleCostFloor {
    pub failure: Vec<f64>,
    pub preventive: Vec<f64>,
    pub recourse: Vec<f64>,
    /// Customers `i_1, …, i_{m-1}` fixed by the greedy ordering.
    pub order: Vec<usize>,
}

fn floors(inst: &Instance, pool: &[usize], forbidden: &EdgeSet) -> (f64, f64) {
    let cf = pool.iter().map(|&i| inst.failure_cost(i)).fold(f64::INFINITY, f64::min);
    let mut cp = f64::INFINITY;
    for (a, &i) in pool.iter().enumerate() {
        for &j in &pool[a + 1..] {
            if !forbidden.contains(&Edge::new(i, j)) {
                cp = cp.min(inst.preventive_cost(i, j));
            }
        }
    }
    (cf, cp)
}

/// Greedy vehicle ordering: vehicle `k` may only serve customers
/// `i_k, i_{k+1}, …`, and each `i_k` is chosen to make the next vehicle's
/// cheapest recourse action as expensive as possible (ties: smallest failure
/// cost, then smallest index). Forbidden edges offer no preventive restock.
///
/// Any ordering yields a valid floor, so the ordering is chosen on the
/// unrestricted costs and only the floors see `forbidden`; forbidding more
/// edges then never lowers a floor.
pub fn greedy_vehicle_order(inst: &Instance, set: &[usize], m: usize, forbidden: &EdgeSet) -> Result<VehicleCostFloor> {
    if m == 0 || m > set.len() {
        return Err(Error::Precondition(format!("need 1 ≤ m ≤ |S|, got m = {m}, |S| = {}", set.len())));
    }
    let mut pool: Vec<usize> = set.to_vec();
    pool.sort_unstable();
    let mut out = VehicleCostFloor {
        failure: Vec::with_capacity(m),
        preventive: Vec::with_capacity(m),
        recourse: Vec::with_capacity(m),
        order: Vec::with_capacity(m.saturating_sub(1)),
    };
    for k in 0..m {
        let (cf, cp) = floors(inst, &pool, forbidden);
        out.failure.push(cf);
        out.preventive.push(cp);
        out.recourse.push(cf.min(cp));
        if k + 1 == m {
            break;
        }
        let mut best: Option<(f64, f64, usize)> = None;
        for (idx, &cand) in pool.iter().enumerate() {
            let rest: Vec<usize> = pool.iter().enumerate().filter(|&(k2, _)| k2 != idx).map(|(_, &c)| c).collect();
            let (f2, p2) = floors(inst, &rest, &EdgeSet::new());
            let next = f2.min(p2);
            let fc = inst.failure_cost(cand);
            let better = match best {
                None => true,
                Some((bv, bf, _)) => next > bv || (next == bv && fc < bf),
            };
            if better {
                best = Some((next, fc, idx));
            }
        }
        let (_, _, idx) = best.unwrap();
        out.order.push(pool.remove(idx));
    }
    Ok(out)
}

/// Expected demand expressed on a common grid of `μ̄` units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemandGrid {
    pub unit: f64,
    pub total: f64,
    /// `D̄ = D / μ̄`.
    pub groups: usize,
    /// `n̄ = ⌊fQ / μ̄⌋`.
    pub per_vehicle: usize,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl DemandGrid {
    /// `None` when the means have no common grid at scale ≤ 10^3.
    pub fn new(inst: &Instance, set: &[usize]) -> Option<DemandGrid> {
        let means: Vec<f64> = set.iter().map(|&i| inst.mean(i)).collect();
        let mut scale = 1.0;
        let mut ints = None;
        while scale <= 1000.0 {
            let scaled: Vec<f64> = means.iter().map(|m| m * scale).collect();
            if scaled.iter().all(|v| (v - v.round()).abs() <= 1e-9 * (1.0 + v.abs())) {
                ints = Some(scaled.iter().map(|v| v.round() as u64).collect::<Vec<_>>());
                break;
            }
            scale *= 10.0;
        }
        let ints = ints?;
        let g = ints.iter().copied().fold(0, gcd);
        if g == 0 {
            return None;
        }
        let unit = g as f64 / scale;
        let groups = ints.iter().sum::<u64>() / g;
        let per_vehicle = ((inst.route_limit() + 1e-9) / unit).floor() as usize;
        Some(DemandGrid {
            unit,
            total: means.iter().sum(),
            groups: groups as usize,
            per_vehicle,
        })
    }

    /// Vehicle count used in the set cuts: `⌈D / (n̄ μ̄)⌉`.
    pub fn vehicles(&self) -> usize {
        if self.per_vehicle == 0 {
            return usize::MAX;
        }
        self.groups.div_ceil(self.per_vehicle).max(1)
    }
}

/// Vehicle count for the set cuts of `set`, with `⌈Σμ/(fQ)⌉` when the means
/// have no usable grid.
pub fn vehicles_for(inst: &Instance, set: &[usize]) -> usize {
    match DemandGrid::new(inst, set) {
        Some(g) => g.vehicles(),
        None => crate::instance::ceil_tol(set.iter().map(|&i| inst.mean(i)).sum::<f64>() / inst.route_limit()).max(1),
    }
}

/// `P[ξ_1 + … + ξ_t > Q]` for i.i.d. demands distributed like `common`,
/// for `t = 0..=t_max`.
pub fn recourse_need_probability(common: &DemandDistribution, capacity: usize, t_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t_max + 1);
    let mut sum = DemandDistribution::point(0);
    out.push(0.0);
    for _ in 0..t_max {
        sum = sum.convolve(common, 0.0);
        out.push(sum.exceed_probability(capacity));
    }
    out
}

/// Minimum over splits of `groups` units among vehicles `1..=m` of
/// `Σ_k g(k, y_k)` with `y_k ≤ cap` (the partition DP).
fn partition_dp(m: usize, groups: usize, cap: usize, g: impl Fn(usize, usize) -> f64) -> f64 {
    let mut prev: Vec<f64> = (0..=groups).map(|d| if d <= cap { g(0, d) } else { f64::INFINITY }).collect();
    for k in 1..m {
        let mut cur = vec![f64::INFINITY; groups + 1];
        for d in 0..=groups {
            for y in 0..=d.min(cap) {
                let v = g(k, y) + prev[d - y];
                if v < cur[d] {
                    cur[d] = v;
                }
            }
        }
        prev = cur;
    }
    prev[groups]
}

pub fn lower_bound_l1(inst: &Instance, set: &[usize], m: usize, forbidden: &EdgeSet) -> Result<f64> {
    if !inst.identically_distributed(set) {
        return Err(Error::Precondition("the probability bound needs identically distributed demands".into()));
    }
    let grid = DemandGrid::new(inst, set)
        .ok_or_else(|| Error::Precondition("expected demands have no common grid".into()))?;
    if grid.groups > m * grid.per_vehicle {
        return Ok(f64::INFINITY);
    }
    let floor = greedy_vehicle_order(inst, set, m, forbidden)?;
    let common = inst.demand(set[0]);
    // identical means: the unit is one customer
    let rho = recourse_need_probability(common, inst.capacity(), grid.per_vehicle.min(grid.groups));
    Ok(partition_dp(m, grid.groups, grid.per_vehicle, |k, y| {
        if y == 0 {
            0.0
        } else {
            rho[y] * floor.recourse[k]
        }
    }))
}

/// Restocking recursion over `d̄ = 0..=max_groups` Poisson(μ̄) subcustomers
/// with floored costs; entry `d̄` is `F̃_{d̄}(Q)`.
fn subcustomer_values(unit: f64, capacity: usize, cf: f64, cp: f64, max_groups: usize) -> Vec<f64> {
    let sub = DemandDistribution::poisson(unit, DEFAULT_TAIL_EPS).expect("positive unit");
    let support: Vec<(usize, f64)> = sub.support().collect();
    let mut prev = vec![0.0; capacity + 1];
    let mut out = vec![0.0];
    for _ in 0..max_groups {
        let mut h = vec![0.0; capacity + 1];
        for (q, hq) in h.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(s, p) in &support {
                let k = trips(s, q, capacity);
                let term = if k == 0 { 0.0 } else { cf * k as f64 };
                acc += p * (term + prev[k * capacity + q - s]);
            }
            *hq = acc;
        }
        let full = h[capacity] + cp;
        let cur: Vec<f64> = h.iter().map(|&v| v.min(full)).collect();
        out.push(cur[capacity]);
        prev = cur;
    }
    out
}

type SubKey = (u64, u64, u64, usize, usize);

/// Memo for the subcustomer recursion, shared across separation rounds.
#[derive(Debug, Default)]
pub struct BoundsEngine {
    memo: Mutex<HashMap<SubKey, Arc<Vec<f64>>>>,
}

impl BoundsEngine {
    pub fn new() -> Self {
        Self::default()
    }

    fn subcustomers(&self, unit: f64, capacity: usize, cf: f64, cp: f64, max_groups: usize) -> Arc<Vec<f64>> {
        let key = (unit.to_bits(), cf.to_bits(), cp.to_bits(), capacity, max_groups);
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return v.clone();
        }
        let v = Arc::new(subcustomer_values(unit, capacity, cf, cp, max_groups));
        self.memo.lock().unwrap().insert(key, v.clone());
        v
    }

    pub fn lower_bound_l2(&self, inst: &Instance, set: &[usize], m: usize, forbidden: &EdgeSet) -> Result<f64> {
        if !set.iter().all(|&i| inst.demand(i).is_poisson()) {
            return Err(Error::Precondition("the subcustomer bound needs Poisson demands".into()));
        }
        let grid = DemandGrid::new(inst, set)
            .ok_or_else(|| Error::Precondition("expected demands have no common grid".into()))?;
        if grid.groups > m * grid.per_vehicle {
            return Ok(f64::INFINITY);
        }
        let floor = greedy_vehicle_order(inst, set, m, forbidden)?;
        let cap = grid.per_vehicle.min(grid.groups);
        let tables: Vec<Arc<Vec<f64>>> = (0..m)
            .map(|k| self.subcustomers(grid.unit, inst.capacity(), floor.failure[k], floor.preventive[k], cap))
            .collect();
        Ok(partition_dp(m, grid.groups, grid.per_vehicle, |k, y| tables[k][y]))
    }

    /// Best applicable DP bound, `None` if neither applies.
    pub fn best_bound(&self, inst: &Instance, set: &[usize], m: usize, forbidden: &EdgeSet) -> Option<f64> {
        let a = lower_bound_l1(inst, set, m, forbidden).ok();
        let b = self.lower_bound_l2(inst, set, m, forbidden).ok();
        match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, y) => x.or(y),
        }
    }
}

pub fn lower_bound_l2(inst: &Instance, set: &[usize], m: usize, forbidden: &EdgeSet) -> Result<f64> {
    BoundsEngine::new().lower_bound_l2(inst, set, m, forbidden)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn diagonals() -> EdgeSet {
        [Edge::new(1, 3), Edge::new(2, 4)].into_iter().collect()
    }

    #[test]
    fn square_floors() {
        let fig2 = builtin::fig2();
        let all = [1, 2, 3, 4];
        let open = greedy_vehicle_order(&fig2, &all, 1, &EdgeSet::new()).unwrap();
        assert_eq!(open.preventive[0], 0.0);
        assert_eq!(open.failure[0], 2.0);
        let closed = greedy_vehicle_order(&fig2, &all, 1, &diagonals()).unwrap();
        assert_eq!(closed.preventive[0], 1.0);
        assert_eq!(closed.recourse[0], 1.0);
        assert!(greedy_vehicle_order(&fig2, &all, 5, &EdgeSet::new()).is_err());
    }

    #[test]
    fn square_probability_bound() {
        let fig2 = builtin::fig2();
        let all = [1, 2, 3, 4];
        assert_eq!(lower_bound_l1(&fig2, &all, 1, &EdgeSet::new()).unwrap(), 0.0);
        let l = lower_bound_l1(&fig2, &all, 1, &diagonals()).unwrap();
        assert!((l - 1.0 / 16.0).abs() < 1e-15);
        let rho = recourse_need_probability(fig2.demand(1), 3, 4);
        assert_eq!(rho[0], 0.0);
        assert_eq!(rho[4], 1.0 / 16.0);
    }

    #[test]
    fn grid_from_decimal_means() {
        let fig2 = builtin::fig2();
        let g = DemandGrid::new(&fig2, &[1, 2, 3, 4]).unwrap();
        assert_eq!(g.unit, 0.5);
        assert_eq!(g.groups, 4);
        assert_eq!(g.per_vehicle, 6);
        assert_eq!(g.vehicles(), 1);
    }

    #[test]
    fn infeasible_partition_is_infinite() {
        let fig2 = builtin::fig2();
        // 4 customers of mean 0.5 with fQ = 3 fit; shrink the limit instead
        let tight = fig2.with_fleet_and_load(vec![1], 0.5).unwrap();
        assert_eq!(lower_bound_l1(&tight, &[1, 2, 3, 4], 1, &EdgeSet::new()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn poisson_bound_requires_poisson() {
        let fig2 = builtin::fig2();
        assert!(lower_bound_l2(&fig2, &[1, 2], 1, &EdgeSet::new()).is_err());
    }
}
