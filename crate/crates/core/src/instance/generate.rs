//! Seeded random instances for tests and benchmarks.

use super::{Instance, InstanceData};
use crate::demand::DemandDistribution;
use crate::error::Result;
use crate::DEFAULT_TAIL_EPS;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemandKind {
    Poisson,
    Bernoulli,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Uniform points in a 100×100 square, depot at a random point.
    Scatter,
    /// Customers at random angles on a circle around the depot, numbered
    /// around the circle. Every depot edge has the same length, so the
    /// preventive-restock cost of an edge only shrinks as the edge grows.
    Ring,
}

#[derive(Clone, Copy, Debug)]
pub struct GeneratorConfig {
    pub n: usize,
    pub demand: DemandKind,
    /// Same distribution for every customer.
    pub iid: bool,
    pub layout: Layout,
    /// Approximate number of routes when every expected demand is packed.
    pub target_routes: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n: usize, demand: DemandKind, seed: u64) -> Self {
        GeneratorConfig {
            n,
            demand,
            iid: false,
            layout: Layout::Scatter,
            target_routes: 2.0,
            seed,
        }
    }
}

/// Random instance with integer-rounded Euclidean distances (kept metric by
/// a shortest-path closure), `f = 1` and every fleet size from `⌈Σμ/Q⌉` to
/// `n`.
pub fn random_instance(cfg: &GeneratorConfig) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let points: Vec<(f64, f64)> = match cfg.layout {
        Layout::Scatter => (0..=n).map(|_| (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0))).collect(),
        Layout::Ring => {
            let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(f64::total_cmp);
            std::iter::once((0.0, 0.0))
                .chain(angles.iter().map(|a| (50.0 * a.cos(), 50.0 * a.sin())))
                .collect()
        }
    };
    let distance: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| ((a.0 - b.0).hypot(a.1 - b.1)).round()).collect())
        .collect();
    let shared = draw_demand(&mut rng, cfg.demand)?;
    let demands: Vec<DemandDistribution> = (0..n)
        .map(|_| if cfg.iid { Ok(shared.clone()) } else { draw_demand(&mut rng, cfg.demand) })
        .collect::<Result<_>>()?;
    let total: f64 = demands.iter().map(|d| d.mean()).sum();
    let max_mean = demands.iter().map(|d| d.mean()).fold(0.0, f64::max);
    let capacity = ((total / cfg.target_routes).ceil() as usize)
        .max(max_mean.ceil() as usize)
        .max(1);
    let m_min = super::ceil_tol(total / capacity as f64).clamp(1, n);
    let inst = Instance::new(InstanceData {
        name: format!("random-n{}-s{}", n, cfg.seed),
        distance,
        demands,
        capacity,
        load_factor: 1.0,
        fleet: (m_min..=n).collect(),
        b_failure: 0.0,
        b_preventive: 0.0,
    })?;
    Ok(inst.normalize_metric())
}

fn draw_demand(rng: &mut ChaCha8Rng, kind: DemandKind) -> Result<DemandDistribution> {
    match kind {
        DemandKind::Poisson => DemandDistribution::poisson(rng.gen_range(1..=6) as f64, DEFAULT_TAIL_EPS),
        DemandKind::Bernoulli => DemandDistribution::bernoulli([0.3, 0.5, 0.7, 0.9][rng.gen_range(0..4)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_metric() {
        let cfg = GeneratorConfig::new(7, DemandKind::Poisson, 3);
        let a = random_instance(&cfg).unwrap();
        let b = random_instance(&cfg).unwrap();
        assert_eq!(a.distance_matrix(), b.distance_matrix());
        assert!(a.triangle_violation() <= 1e-9);
        assert!(a.customers().all(|i| a.mean(i) <= a.route_limit()));
    }

    #[test]
    fn ring_has_uniform_depot_distances() {
        let cfg = GeneratorConfig {
            layout: Layout::Ring,
            ..GeneratorConfig::new(10, DemandKind::Bernoulli, 1)
        };
        let inst = random_instance(&cfg).unwrap();
        assert!(inst.customers().all(|i| inst.distance(0, i) == 50.0));
    }
}
