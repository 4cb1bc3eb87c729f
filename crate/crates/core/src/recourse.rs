//! Expected recourse cost of an a priori route.
//!
//! Two policies are supported. Under detour-to-depot (DTD) the vehicle only
//! returns to the depot when it runs out of stock. Under optimal restocking
//! (OR) it may also restock preventively between two customers; the best
//! threshold rule comes from a backward Bellman recursion over the residual
//! capacity.

use crate::demand::PartialSumTable;
use crate::error::{Error, Result};
use crate::instance::{Instance, Path};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Or,
    Dtd,
}

impl Policy {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Policy::Or),
            "dtd" => Ok(Policy::Dtd),
            other => Err(Error::Malformed(format!("unknown policy '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::Or => "or",
            Policy::Dtd => "dtd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Proceed,
    Preventive,
}

/// Number of depot round trips needed when demand `s` meets residual `q`.
#[inline]
pub fn trips(s: usize, q: usize, cap: usize) -> usize {
    if s <= q {
        0
    } else {
        (s - q).div_ceil(cap)
    }
}

/// Bellman tables of one orientation of a route.
///
/// Row `j` describes the state right before customer `path[j]` is served:
/// `proceed[j][q]` is the expected cost of serving the rest of the route
/// without restocking first, `cost_to_go[j][q]` the optimal cost (restocking
/// allowed for `j ≥ 1`) and `restock[j][q]` the decision taken.
#[derive(Clone, Debug, Serialize)]
pub struct OrProfile {
    pub path: Path,
    pub capacity: usize,
    pub proceed: Vec<Vec<f64>>,
    pub cost_to_go: Vec<Vec<f64>>,
    pub restock: Vec<Vec<Decision>>,
}

impl OrProfile {
    /// Expected recourse of the route, starting full at the depot.
    pub fn value(&self) -> f64 {
        self.cost_to_go[0][self.capacity]
    }

    /// Whether every row is non-increasing in the residual capacity.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.cost_to_go
            .iter()
            .chain(&self.proceed)
            .all(|row| row.windows(2).all(|w| w[0] + tol >= w[1]))
    }

    /// Smallest residual at which the vehicle proceeds without restocking,
    /// per customer (the threshold form of the optimal rule).
    pub fn thresholds(&self) -> Vec<usize> {
        self.restock
            .iter()
            .map(|row| row.iter().position(|d| *d == Decision::Proceed).unwrap_or(self.capacity))
            .collect()
    }
}

pub fn or_cost_to_go(inst: &Instance, path: &Path) -> OrProfile {
    let cap = inst.capacity();
    let cust = path.customers();
    let t = cust.len();
    let mut proceed = vec![vec![0.0; cap + 1]; t];
    let mut cost = vec![vec![0.0; cap + 1]; t + 1];
    let mut restock = vec![vec![Decision::Proceed; cap + 1]; t];
    for j in (0..t).rev() {
        let i = cust[j];
        let cf = inst.failure_cost(i);
        let demand = inst.demand(i);
        let next = &cost[j + 1];
        for q in 0..=cap {
            let mut h = 0.0;
            for (s, p) in demand.support() {
                let k = trips(s, q, cap);
                h += p * (cf * k as f64 + next[k * cap + q - s]);
            }
            proceed[j][q] = h;
        }
        let full = proceed[j][cap];
        for q in 0..=cap {
            let h = proceed[j][q];
            let mut best = h;
            if j > 0 {
                let pv = inst.preventive_cost(cust[j - 1], i) + full;
                // ties go to proceeding
                if pv < h - 1e-12 * (1.0 + h.abs()) {
                    best = pv;
                    restock[j][q] = Decision::Preventive;
                }
            }
            cost[j][q] = best;
        }
    }
    cost.pop();
    let profile = OrProfile {
        path: path.clone(),
        capacity: cap,
        proceed,
        cost_to_go: cost,
        restock,
    };
    debug_assert!(profile.is_monotone(1e-9), "cost-to-go not monotone on {}", path);
    profile
}

/// Recourse of both orientations and the better of the two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecourseValue {
    pub forward: f64,
    pub backward: f64,
    pub best: f64,
    /// `true` when the reversed orientation is strictly better.
    pub reversed: bool,
}

impl RecourseValue {
    fn from_pair(forward: f64, backward: f64) -> Self {
        let reversed = backward < forward;
        RecourseValue {
            forward,
            backward,
            best: forward.min(backward),
            reversed,
        }
    }

    fn flipped(self) -> Self {
        RecourseValue {
            forward: self.backward,
            backward: self.forward,
            best: self.best,
            reversed: self.forward < self.backward,
        }
    }
}

pub fn or_recourse(inst: &Instance, path: &Path) -> RecourseValue {
    let f = or_cost_to_go(inst, path).value();
    let b = if path.len() == 1 {
        f
    } else {
        or_cost_to_go(inst, &path.reversed()).value()
    };
    RecourseValue::from_pair(f, b)
}

/// Expected DTD failure cost of one orientation.
pub fn dtd_value(inst: &Instance, path: &Path) -> f64 {
    let cap = inst.capacity();
    let cust = path.customers();
    let table = PartialSumTable::new(cust.iter().map(|&i| inst.demand(i)), crate::DEFAULT_TAIL_EPS);
    let mut total = 0.0;
    for (j, &i) in cust.iter().enumerate() {
        let before = table.row(j);
        let after = table.row(j + 1);
        // P[S_{j-1} ≤ lQ < S_j] = P[S_j > lQ] − P[S_{j-1} > lQ]
        let mut failures = 0.0;
        let mut l = 1;
        while l * cap < after.max_support() {
            failures += after.exceed_probability(l * cap) - before.exceed_probability(l * cap);
            l += 1;
        }
        total += failures.max(0.0) * inst.failure_cost(i);
    }
    total
}

pub fn dtd_recourse(inst: &Instance, path: &Path) -> RecourseValue {
    let f = dtd_value(inst, path);
    let b = if path.len() == 1 {
        f
    } else {
        dtd_value(inst, &path.reversed())
    };
    RecourseValue::from_pair(f, b)
}

pub fn recourse(inst: &Instance, path: &Path, policy: Policy) -> RecourseValue {
    match policy {
        Policy::Or => or_recourse(inst, path),
        Policy::Dtd => dtd_recourse(inst, path),
    }
}

/// Value of one fixed orientation.
pub fn oriented_value(inst: &Instance, path: &Path, policy: Policy) -> f64 {
    match policy {
        Policy::Or => or_cost_to_go(inst, path).value(),
        Policy::Dtd => dtd_value(inst, path),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SimulationEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Executes the route `samples` times following the profile's decisions.
pub fn simulate_or(inst: &Instance, profile: &OrProfile, samples: usize, seed: u64) -> SimulationEstimate {
    assert!(samples >= 1, "at least one sample");
    let cap = inst.capacity();
    let cust = profile.path.customers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let mut q = cap;
        let mut cost = 0.0;
        for (j, &i) in cust.iter().enumerate() {
            if profile.restock[j][q] == Decision::Preventive {
                cost += inst.preventive_cost(cust[j - 1], i);
                q = cap;
            }
            let s = inst.demand(i).quantile(rng.gen::<f64>());
            let k = trips(s, q, cap);
            cost += k as f64 * inst.failure_cost(i);
            q = k * cap + q - s;
        }
        sum += cost;
        sum_sq += cost * cost;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    SimulationEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples,
    }
}

const EXHAUSTIVE_LIMIT: f64 = 1e7;

/// Optimal restocking value found by searching the full decision tree over
/// demand histories: at every customer both actions are tried and every
/// demand outcome is expanded, with stockouts resolved trip by trip. No
/// state aggregation is used, so it independently checks the Bellman tables.
pub fn or_policy_exhaustive(inst: &Instance, path: &Path) -> Result<f64> {
    let cust = path.customers();
    if cust.len() > 6 {
        return Err(Error::TooLarge(format!("exhaustive policy search needs |p| ≤ 6, got {}", cust.len())));
    }
    let mut nodes = 1.0f64;
    for &i in cust {
        nodes *= 2.0 * inst.demand(i).support().count() as f64;
    }
    if nodes > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(format!("decision tree has ~{nodes:.0} leaves")));
    }
    Ok(expand(inst, cust, 0, inst.capacity(), None))
}

fn expand(inst: &Instance, cust: &[usize], j: usize, load: usize, prev: Option<usize>) -> f64 {
    if j == cust.len() {
        return 0.0;
    }
    let cap = inst.capacity();
    let i = cust[j];
    let serve = |start: usize| -> f64 {
        let mut acc = 0.0;
        for (s, p) in inst.demand(i).support() {
            let mut on_board = start;
            let mut left = s;
            let mut cost = 0.0;
            // hand over what we carry, go back and refill until satisfied
            while left > on_board {
                left -= on_board;
                on_board = cap;
                cost += inst.failure_cost(i);
            }
            on_board -= left;
            acc += p * (cost + expand(inst, cust, j + 1, on_board, Some(i)));
        }
        acc
    };
    let go_on = serve(load);
    match prev {
        Some(h) if load < cap => go_on.min(inst.preventive_cost(h, i) + serve(cap)),
        _ => go_on,
    }
}

/// Thread-safe memo of best-orientation recourse values, keyed by the
/// canonical orientation of each route.
#[derive(Debug, Default)]
pub struct RecourseCache {
    map: Mutex<HashMap<(Policy, Vec<usize>), RecourseValue>>,
}

impl RecourseCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, inst: &Instance, path: &Path, policy: Policy) -> RecourseValue {
        let canon = path.canonical();
        let flipped = canon.customers() != path.customers();
        let key = (policy, canon.customers().to_vec());
        if let Some(v) = self.map.lock().unwrap().get(&key) {
            return if flipped { v.flipped() } else { *v };
        }
        let v = recourse(inst, &canon, policy);
        self.map.lock().unwrap().insert(key, v);
        if flipped {
            v.flipped()
        } else {
            v
        }
    }

    pub fn best(&self, inst: &Instance, path: &Path, policy: Policy) -> f64 {
        self.value(inst, path, policy).best
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::demand::DemandDistribution;
    use crate::instance::InstanceData;

    fn p(v: &[usize]) -> Path {
        Path::from_vec_unchecked(v.to_vec())
    }

    #[test]
    fn single_customer_within_capacity_is_free() {
        let fig1 = builtin::fig1();
        // customer 2 has Poisson(1) truncated at Q
        assert_eq!(or_recourse(&fig1, &p(&[2])).best, 0.0);
        let prof = or_cost_to_go(&fig1, &p(&[2]));
        assert!(prof.is_monotone(0.0));
    }

    #[test]
    fn square_rotations_cost_one_eighth() {
        let fig2 = builtin::fig2();
        for r in [[1, 2, 3, 4], [2, 3, 4, 1], [3, 4, 1, 2], [4, 1, 2, 3]] {
            let v = or_recourse(&fig2, &p(&r));
            assert!((v.forward - 0.125).abs() < 1e-12);
            assert!((v.backward - 0.125).abs() < 1e-12);
            assert!((dtd_recourse(&fig2, &p(&r)).best - 0.125).abs() < 1e-12);
        }
        assert_eq!(or_recourse(&fig2, &p(&[1, 3, 2, 4])).best, 0.0);
    }

    #[test]
    fn exhaustive_search_matches_bellman() {
        let fig2 = builtin::fig2();
        let v = or_policy_exhaustive(&fig2, &p(&[1, 2, 3, 4])).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
        let fig1 = builtin::fig1();
        for route in [&[1, 2, 3][..], &[1, 3], &[3, 1, 2]] {
            let ex = or_policy_exhaustive(&fig1, &p(route)).unwrap();
            let dp = or_cost_to_go(&fig1, &p(route)).value();
            assert!((ex - dp).abs() < 1e-9, "{ex} vs {dp}");
        }
    }

    #[test]
    fn deterministic_demands_fitting_capacity_have_no_recourse() {
        let inst = Instance::new(InstanceData {
            name: "det".into(),
            distance: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
            demands: vec![DemandDistribution::point(2), DemandDistribution::point(3)],
            capacity: 5,
            load_factor: 1.0,
            fleet: vec![1],
            b_failure: 0.0,
            b_preventive: 0.0,
        })
        .unwrap();
        assert_eq!(dtd_recourse(&inst, &p(&[1, 2])).best, 0.0);
        assert_eq!(or_recourse(&inst, &p(&[1, 2])).best, 0.0);
        let prof = or_cost_to_go(&inst, &p(&[1, 2]));
        let est = simulate_or(&inst, &prof, 1000, 7);
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn full_capacity_always_proceeds() {
        let fig1 = builtin::fig1();
        let prof = or_cost_to_go(&fig1, &p(&[1, 2, 3]));
        for j in 0..3 {
            assert_eq!(prof.restock[j][20], Decision::Proceed);
            assert_eq!(prof.cost_to_go[j][20], prof.proceed[j][20]);
        }
    }

    #[test]
    fn cache_is_orientation_aware() {
        let fig1 = builtin::fig1();
        let cache = RecourseCache::new();
        let a = cache.value(&fig1, &p(&[3, 2, 1]), Policy::Or);
        let b = cache.value(&fig1, &p(&[1, 2, 3]), Policy::Or);
        assert_eq!(cache.len(), 1);
        assert_eq!(a.forward, b.backward);
        assert_eq!(a.best, b.best);
    }
}
