//! Small embedded instances with known recourse values.

use crate::demand::DemandDistribution;
use crate::instance::{Instance, InstanceData};
use crate::DEFAULT_TAIL_EPS;

pub const NAMES: [&str; 3] = ["fig1", "fig2", "thm4"];

pub fn by_name(name: &str) -> Option<Instance> {
    match name {
        "fig1" => Some(fig1()),
        "fig2" => Some(fig2()),
        "thm4" => Some(thm4()),
        _ => None,
    }
}

/// Three customers, Q = 20, Poisson means (9, 1, 9). Visiting the light
/// customer 2 between the heavy ones makes a cheap preventive restock
/// available, so dropping it from the route *raises* the OR recourse
/// (≈3.25 with it, ≈6.08 without). Demands are conditioned on `ξ ≤ Q`.
pub fn fig1() -> Instance {
    let d = vec![
        vec![0.0, 12.0, 2.0, 12.0],
        vec![12.0, 0.0, 10.0, 8.0],
        vec![2.0, 10.0, 0.0, 10.0],
        vec![12.0, 8.0, 10.0, 0.0],
    ];
    let demands = [9.0, 1.0, 9.0]
        .iter()
        .map(|&l| DemandDistribution::poisson(l, DEFAULT_TAIL_EPS).unwrap())
        .collect();
    Instance::new(InstanceData {
        name: "fig1".into(),
        distance: d,
        demands,
        capacity: 20,
        load_factor: 1.0,
        fleet: vec![1],
        b_failure: 0.0,
        b_preventive: 0.0,
    })
    .and_then(|i| i.truncated_at_capacity())
    .expect("embedded instance is valid")
}

/// Unit square with the depot at its center: customers 1-2-3-4 around the
/// square, unit depot distances, diagonals of length 2. Bernoulli(1/2)
/// demands, Q = 3. Every tour around the square has OR recourse 1/8, while
/// any route using a diagonal restocks for free.
pub fn fig2() -> Instance {
    let mut d = vec![vec![0.0; 5]; 5];
    let set = |d: &mut Vec<Vec<f64>>, i: usize, j: usize, v: f64| {
        d[i][j] = v;
        d[j][i] = v;
    };
    for i in 1..=4 {
        set(&mut d, 0, i, 1.0);
    }
    for (i, j) in [(1, 2), (2, 3), (3, 4), (1, 4)] {
        set(&mut d, i, j, 1.0);
    }
    set(&mut d, 1, 3, 2.0);
    set(&mut d, 2, 4, 2.0);
    Instance::new(InstanceData {
        name: "fig2".into(),
        distance: d,
        demands: vec![DemandDistribution::bernoulli(0.5).unwrap(); 4],
        capacity: 3,
        load_factor: 1.0,
        fleet: vec![1],
        b_failure: 0.0,
        b_preventive: 0.0,
    })
    .expect("embedded instance is valid")
}

/// Eight Bernoulli(0.9) customers, Q = 3, on a star metric where customers
/// 1, 4, 5, 8 sit at distance 1 from the depot and the others on it. The
/// single DTD route (1..8) is cheaper than the split (1,2,3,4)+(5,6,7,8), so
/// DTD recourse is not superadditive here.
pub fn thm4() -> Instance {
    let far = |i: usize| if matches!(i, 1 | 4 | 5 | 8) { 1.0 } else { 0.0 };
    let d: Vec<Vec<f64>> = (0..=8)
        .map(|i| {
            (0..=8)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let a = if i == 0 { 0.0 } else { far(i) };
                        let b = if j == 0 { 0.0 } else { far(j) };
                        a + b
                    }
                })
                .collect()
        })
        .collect();
    Instance::new(InstanceData {
        name: "thm4".into(),
        distance: d,
        demands: vec![DemandDistribution::bernoulli(0.9).unwrap(); 8],
        capacity: 3,
        load_factor: 2.5,
        fleet: vec![1],
        b_failure: 0.0,
        b_preventive: 0.0,
    })
    .expect("embedded instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_instances_are_metric() {
        for name in NAMES {
            let inst = by_name(name).unwrap();
            assert!(inst.triangle_violation() <= 1e-12, "{name}");
            assert_eq!(inst.normalize_metric().distance_matrix(), inst.distance_matrix());
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn documented_costs() {
        let f2 = fig2();
        assert_eq!(f2.preventive_cost(1, 3), 0.0);
        assert_eq!(f2.preventive_cost(1, 2), 1.0);
        assert_eq!(fig1().failure_cost(2), 4.0);
        assert_eq!(thm4().failure_cost(1), 2.0);
        assert_eq!(thm4().failure_cost(2), 0.0);
    }
}
