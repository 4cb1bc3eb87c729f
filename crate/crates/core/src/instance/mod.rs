//! Problem data: distances, demand distributions, capacity and fleet settings.

mod cvrplib;
pub mod generate;
mod json;

pub use cvrplib::{parse_cvrplib, CvrplibOptions, Sidecar};
pub use json::{parse_json, to_json, InstanceDoc};

use crate::demand::DemandDistribution;
use crate::error::{Error, Result};
use crate::graph::Edge;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path as FsPath;

#[derive(Clone, Debug)]
pub struct Instance {
    name: String,
    n: usize,
    distance: Vec<f64>,
    demands: Vec<DemandDistribution>,
    capacity: usize,
    load_factor: f64,
    fleet: Vec<usize>,
    b_failure: f64,
    b_preventive: f64,
}

/// Raw fields handed to [`Instance::new`].
#[derive(Clone, Debug)]
pub struct InstanceData {
    pub name: String,
    /// Row-major `(n+1)×(n+1)` matrix, node 0 is the depot.
    pub distance: Vec<Vec<f64>>,
    /// One entry per customer `1..=n`.
    pub demands: Vec<DemandDistribution>,
    pub capacity: usize,
    pub load_factor: f64,
    pub fleet: Vec<usize>,
    pub b_failure: f64,
    pub b_preventive: f64,
}

impl Instance {
    pub fn new(data: InstanceData) -> Result<Self> {
        let n = data.demands.len();
        if n == 0 {
            return Err(Error::Malformed("instance has no customers".into()));
        }
        if data.distance.len() != n + 1 || data.distance.iter().any(|r| r.len() != n + 1) {
            return Err(Error::Malformed(format!(
                "distance matrix must be {0}x{0} for {n} customers",
                n + 1
            )));
        }
        let mut distance = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..=n {
            for j in 0..=n {
                let c = data.distance[i][j];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::Malformed(format!("distance[{i}][{j}] = {c} is negative or not finite")));
                }
                if i == j && c != 0.0 {
                    return Err(Error::Malformed(format!("distance[{i}][{i}] must be zero")));
                }
                if (c - data.distance[j][i]).abs() > 1e-9 * (1.0 + c.abs()) {
                    return Err(Error::Malformed(format!("distance is not symmetric at ({i},{j})")));
                }
                distance[i * (n + 1) + j] = c;
            }
        }
        if data.capacity == 0 {
            return Err(Error::Malformed("capacity must be positive".into()));
        }
        if !(data.load_factor > 0.0) || !data.load_factor.is_finite() {
            return Err(Error::Malformed(format!("load factor must be positive, got {}", data.load_factor)));
        }
        if !(data.b_failure >= 0.0 && data.b_preventive >= 0.0) {
            return Err(Error::Malformed("penalties must be non-negative".into()));
        }
        if data.b_preventive > data.b_failure {
            return Err(Error::Malformed(format!(
                "preventive penalty {} exceeds failure penalty {}",
                data.b_preventive, data.b_failure
            )));
        }
        let mut fleet = data.fleet;
        fleet.sort_unstable();
        fleet.dedup();
        if fleet.is_empty() || fleet[0] == 0 || *fleet.last().unwrap() > n {
            return Err(Error::Malformed(format!("fleet sizes must be a non-empty subset of 1..={n}")));
        }
        let limit = data.load_factor * data.capacity as f64;
        for (k, d) in data.demands.iter().enumerate() {
            if d.mean() > limit + 1e-9 {
                return Err(Error::Infeasible(format!(
                    "customer {} has mean demand {} above fQ = {limit}",
                    k + 1,
                    d.mean()
                )));
            }
        }
        Ok(Instance {
            name: data.name,
            n,
            distance,
            demands: data.demands,
            capacity: data.capacity,
            load_factor: data.load_factor,
            fleet,
            b_failure: data.b_failure,
            b_preventive: data.b_preventive,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of customers.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn customers(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance[i * (self.n + 1) + j]
    }

    #[inline]
    pub fn edge_cost(&self, e: Edge) -> f64 {
        self.distance(e.lo(), e.hi())
    }

    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        (0..=self.n)
            .map(|i| (0..=self.n).map(|j| self.distance(i, j)).collect())
            .collect()
    }

    /// Demand distribution of customer `i` (1-based).
    #[inline]
    pub fn demand(&self, i: usize) -> &DemandDistribution {
        &self.demands[i - 1]
    }

    pub fn demands(&self) -> &[DemandDistribution] {
        &self.demands
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.demands[i - 1].mean()
    }

    pub fn total_mean(&self) -> f64 {
        self.demands.iter().map(|d| d.mean()).sum()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn load_factor(&self) -> f64 {
        self.load_factor
    }

    /// `fQ`, the bound on the expected load of a route.
    pub fn route_limit(&self) -> f64 {
        self.load_factor * self.capacity as f64
    }

    pub fn fleet(&self) -> &[usize] {
        &self.fleet
    }

    pub fn b_failure(&self) -> f64 {
        self.b_failure
    }

    pub fn b_preventive(&self) -> f64 {
        self.b_preventive
    }

    /// Whether the expected load of `customers` fits one route.
    pub fn fits(&self, customers: &[usize]) -> bool {
        customers.iter().map(|&i| self.mean(i)).sum::<f64>() <= self.route_limit() + 1e-9
    }

    /// `b^P + c_{0i} + c_{0j} − c_{ij}`: extra cost of restocking between `i` and `j`.
    #[inline]
    pub fn preventive_cost(&self, i: usize, j: usize) -> f64 {
        self.b_preventive + self.distance(0, i) + self.distance(0, j) - self.distance(i, j)
    }

    pub fn try_preventive_cost(&self, i: usize, j: usize) -> Result<f64> {
        if i == j || i == 0 || j == 0 || i > self.n || j > self.n {
            return Err(Error::Precondition(format!(
                "preventive cost needs two distinct customers, got ({i},{j})"
            )));
        }
        Ok(self.preventive_cost(i, j))
    }

    /// `b^F + 2 c_{0i}`: cost of a failure at customer `i`.
    #[inline]
    pub fn failure_cost(&self, i: usize) -> f64 {
        self.b_failure + 2.0 * self.distance(0, i)
    }

    /// Replaces distances by shortest-path distances (Floyd–Warshall).
    pub fn normalize_metric(&self) -> Instance {
        let m = self.n + 1;
        let mut d = self.distance.clone();
        for k in 0..m {
            for i in 0..m {
                let dik = d[i * m + k];
                for j in 0..m {
                    let via = dik + d[k * m + j];
                    if via < d[i * m + j] {
                        d[i * m + j] = via;
                    }
                }
            }
        }
        Instance {
            distance: d,
            ..self.clone()
        }
    }

    /// Largest violation of the triangle inequality (0 for a metric).
    pub fn triangle_violation(&self) -> f64 {
        let m = self.n + 1;
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    worst = worst.max(self.distance(i, j) - self.distance(i, k) - self.distance(k, j));
                }
            }
        }
        worst
    }

    pub fn with_fleet_and_load(&self, fleet: Vec<usize>, load_factor: f64) -> Result<Instance> {
        Instance::new(InstanceData {
            name: self.name.clone(),
            distance: self.distance_matrix(),
            demands: self.demands.clone(),
            capacity: self.capacity,
            load_factor,
            fleet,
            b_failure: self.b_failure,
            b_preventive: self.b_preventive,
        })
    }

    /// Conditions every demand on not exceeding the capacity.
    pub fn truncated_at_capacity(&self) -> Result<Instance> {
        let demands = self
            .demands
            .iter()
            .map(|d| d.truncate_at(self.capacity))
            .collect::<Result<Vec<_>>>()?;
        Ok(Instance {
            demands,
            ..self.clone()
        })
    }

    /// Whether every customer in `set` has the same demand distribution.
    pub fn identically_distributed(&self, set: &[usize]) -> bool {
        match set.first() {
            None => true,
            Some(&first) => set.iter().all(|&i| self.demand(i).same_distribution(self.demand(first))),
        }
    }
}

/// `⌈x⌉` with a small slack against floating-point noise.
pub(crate) fn ceil_tol(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Input formats accepted by [`load_instance`].
#[derive(Clone, Debug)]
pub enum InstanceFormat {
    Json,
    Cvrplib { sidecar: Option<std::path::PathBuf>, options: CvrplibOptions },
}

pub fn load_instance(path: &FsPath, format: &InstanceFormat) -> Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        InstanceFormat::Json => parse_json(&text),
        InstanceFormat::Cvrplib { sidecar, options } => {
            let side = match sidecar {
                Some(p) => {
                    let s = std::fs::read_to_string(p).map_err(|source| Error::Io {
                        path: p.display().to_string(),
                        source,
                    })?;
                    serde_json::from_str(&s).map_err(|e| Error::Malformed(format!("sidecar: {e}")))?
                }
                None => Sidecar::default(),
            };
            parse_cvrplib(&text, &side, options)
        }
    }
}

/// A route: distinct customers in visiting order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(Vec<usize>);

impl Path {
    pub fn new(customers: Vec<usize>, n: usize) -> Result<Self> {
        if customers.is_empty() {
            return Err(Error::InvalidPath("path is empty".into()));
        }
        let mut seen = vec![false; n + 1];
        for &c in &customers {
            if c == 0 || c > n {
                return Err(Error::InvalidPath(format!("customer {c} outside 1..={n}")));
            }
            if seen[c] {
                return Err(Error::InvalidPath(format!("customer {c} repeated")));
            }
            seen[c] = true;
        }
        Ok(Path(customers))
    }

    /// Skips validation; callers guarantee distinct customers.
    pub(crate) fn from_vec_unchecked(customers: Vec<usize>) -> Self {
        Path(customers)
    }

    pub fn customers(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reversed(&self) -> Path {
        Path(self.0.iter().rev().copied().collect())
    }

    /// The lexicographically smaller of the two orientations.
    pub fn canonical(&self) -> Path {
        let r = self.reversed();
        if r.0 < self.0 {
            r
        } else {
            self.clone()
        }
    }

    /// Consecutive customer edges (depot edges excluded).
    pub fn edges(&self) -> Vec<Edge> {
        crate::graph::path_edges(&self.0)
    }

    pub fn sorted_customers(&self) -> Vec<usize> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Which of the fixed-route (one fleet size) and expected-capacity (`f = 1`)
/// constraints are imposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub frc: bool,
    pub ecc: bool,
}

impl VariantConfig {
    pub const VRPSD: VariantConfig = VariantConfig { frc: true, ecc: true };
    pub const ECC: VariantConfig = VariantConfig { frc: false, ecc: true };
    pub const FRC: VariantConfig = VariantConfig { frc: true, ecc: false };
    pub const BASIC: VariantConfig = VariantConfig { frc: false, ecc: false };

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "vrpsd" => Ok(Self::VRPSD),
            "ecc" => Ok(Self::ECC),
            "frc" => Ok(Self::FRC),
            "basic" => Ok(Self::BASIC),
            other => Err(Error::Malformed(format!("unknown variant '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match (self.frc, self.ecc) {
            (true, true) => "vrpsd",
            (false, true) => "ecc",
            (true, false) => "frc",
            (false, false) => "basic",
        }
    }

    /// Derives `(M, f)` from the base data. With expected-capacity constraints
    /// `f = 1`, otherwise `f = Σμ/Q`. The smallest fleet is `⌈Σμ/Q⌉`; the
    /// fixed-route constraint keeps only it, otherwise every size up to `n`
    /// is allowed (`⌈Σμ/(fQ)⌉` of them at least).
    pub fn derive(self, base: &Instance) -> (Vec<usize>, f64) {
        let total = base.total_mean();
        let q = base.capacity() as f64;
        let f = if self.ecc { 1.0 } else { total / q };
        let m_min = ceil_tol(total / q).clamp(1, base.n());
        let fleet = if self.frc {
            vec![m_min]
        } else {
            (ceil_tol(total / (f * q)).max(1)..=base.n()).collect()
        };
        (fleet, f)
    }

    pub fn apply(self, base: &Instance) -> Result<Instance> {
        let (fleet, f) = self.derive(base);
        base.with_fleet_and_load(fleet, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny(dist: Vec<Vec<f64>>, demands: Vec<DemandDistribution>, q: usize) -> Instance {
        let n = demands.len();
        Instance::new(InstanceData {
            name: "t".into(),
            distance: dist,
            demands,
            capacity: q,
            load_factor: 1.0,
            fleet: vec![n.min(1)],
            b_failure: 0.0,
            b_preventive: 0.0,
        })
        .unwrap()
    }

    #[test]
    fn floyd_warshall_shortens_and_is_idempotent() {
        let d = vec![vec![0.0, 10.0, 1.0], vec![10.0, 0.0, 20.0], vec![1.0, 20.0, 0.0]];
        let inst = tiny(d, vec![DemandDistribution::point(1); 2], 5);
        let norm = inst.normalize_metric();
        assert_eq!(norm.distance(1, 2), 11.0);
        assert_eq!(norm.distance(2, 1), 11.0);
        let again = norm.normalize_metric();
        assert_eq!(again.distance_matrix(), norm.distance_matrix());
        assert!(norm.triangle_violation() <= 1e-12);
    }

    #[test]
    fn minimal_instance_is_valid() {
        let inst = tiny(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![DemandDistribution::point(1)], 1);
        assert_eq!(inst.n(), 1);
        assert_eq!(inst.failure_cost(1), 2.0);
    }

    #[test]
    fn preventive_cost_requires_distinct_customers() {
        let inst = tiny(
            vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 2.0], vec![1.0, 2.0, 0.0]],
            vec![DemandDistribution::point(1); 2],
            5,
        );
        assert_eq!(inst.try_preventive_cost(1, 2).unwrap(), 0.0);
        assert!(inst.try_preventive_cost(1, 1).is_err());
    }

    #[test]
    fn rejects_invalid_data() {
        let base = InstanceData {
            name: "bad".into(),
            distance: vec![vec![0.0, -1.0], vec![-1.0, 0.0]],
            demands: vec![DemandDistribution::point(1)],
            capacity: 1,
            load_factor: 1.0,
            fleet: vec![1],
            b_failure: 0.0,
            b_preventive: 0.0,
        };
        assert!(Instance::new(base.clone()).is_err());
        let mut too_heavy = base.clone();
        too_heavy.distance = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        too_heavy.demands = vec![DemandDistribution::point(3)];
        assert!(matches!(Instance::new(too_heavy), Err(Error::Infeasible(_))));
        let mut bad_fleet = base;
        bad_fleet.distance = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        bad_fleet.fleet = vec![2];
        assert!(Instance::new(bad_fleet).is_err());
    }

    #[test]
    fn path_validation_and_orientation() {
        assert!(Path::new(vec![], 3).is_err());
        assert!(Path::new(vec![1, 1], 3).is_err());
        assert!(Path::new(vec![4], 3).is_err());
        let p = Path::new(vec![3, 1, 2], 3).unwrap();
        assert_eq!(p.reversed().customers(), &[2, 1, 3]);
        assert_eq!(p.canonical().customers(), &[2, 1, 3]);
        assert_eq!(p.edges(), vec![Edge::new(1, 3), Edge::new(1, 2)]);
    }

    #[test]
    fn variants_derive_fleet_and_load_factor() {
        let d: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let demands = vec![DemandDistribution::poisson(3.0, 1e-12).unwrap(); 4];
        let base = tiny(d, demands, 5);
        let (m, f) = VariantConfig::VRPSD.derive(&base);
        assert_eq!((m, f), (vec![3], 1.0));
        let (m, f) = VariantConfig::ECC.derive(&base);
        assert_eq!((m, f), (vec![3, 4], 1.0));
        let (m, f) = VariantConfig::FRC.derive(&base);
        assert_eq!(m, vec![3]);
        assert!((f - 12.0 / 5.0).abs() < 1e-12);
        let (m, f) = VariantConfig::BASIC.derive(&base);
        assert_eq!(m, vec![1, 2, 3, 4]);
        assert!((f - 2.4).abs() < 1e-12);
    }
}
