use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrpsd_core::bounds::{greedy_vehicle_order, lower_bound_l1, lower_bound_l2, vehicles_for, DemandGrid};
use vrpsd_core::cuts::{build_e_cut, build_p_cut, build_s_cut};
use vrpsd_core::graph::edges_within;
use vrpsd_core::instance::generate::{random_instance, DemandKind, GeneratorConfig};
use vrpsd_core::instance::InstanceData;
use vrpsd_core::oracle::enumerate_l;
use vrpsd_core::recourse::{dtd_recourse, or_cost_to_go, or_policy_exhaustive, or_recourse, recourse};
use vrpsd_core::{DemandDistribution, EdgeSet, Instance, Path, Policy, VariantConfig, DEFAULT_TAIL_EPS};

fn kind(bernoulli: bool) -> DemandKind {
    if bernoulli {
        DemandKind::Bernoulli
    } else {
        DemandKind::Poisson
    }
}

fn instance(n: usize, bernoulli: bool, seed: u64) -> Instance {
    random_instance(&GeneratorConfig::new(n, kind(bernoulli), seed)).unwrap()
}

fn iid_poisson(n: usize, seed: u64) -> Instance {
    random_instance(&GeneratorConfig {
        iid: true,
        ..GeneratorConfig::new(n, DemandKind::Poisson, seed)
    })
    .unwrap()
}

/// A random ordering of a random subset of `len` customers.
fn random_path(inst: &Instance, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut c: Vec<usize> = inst.customers().collect();
    c.shuffle(rng);
    c.truncate(len.clamp(1, inst.n()));
    c
}

fn path(inst: &Instance, c: &[usize]) -> Path {
    Path::new(c.to_vec(), inst.n()).unwrap()
}

fn pmf_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..8).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    })
}

fn discrete(pmf: &[f64]) -> DemandDistribution {
    let support: Vec<usize> = (0..pmf.len()).collect();
    DemandDistribution::discrete(&support, pmf).unwrap()
}

fn assert_same_pmf(a: &DemandDistribution, b: &DemandDistribution, tol: f64) -> Result<(), TestCaseError> {
    let len = a.pmf().len().max(b.pmf().len());
    for s in 0..len {
        prop_assert!((a.prob(s) - b.prob(s)).abs() <= tol, "point {s}: {} vs {}", a.prob(s), b.prob(s));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn normalize_metric_is_idempotent_and_metric(
        n in 2usize..7,
        raw in prop::collection::vec(1.0f64..100.0, 64),
        seed in any::<u64>(),
    ) {
        let mut distance = vec![vec![0.0; n + 1]; n + 1];
        let mut k = 0;
        for i in 0..=n {
            for j in i + 1..=n {
                distance[i][j] = raw[k % raw.len()].round();
                distance[j][i] = distance[i][j];
                k += 1;
            }
        }
        let base = instance(n, seed % 2 == 0, seed);
        let inst = Instance::new(InstanceData {
            name: "p".into(),
            distance,
            demands: base.demands().to_vec(),
            capacity: base.capacity(),
            load_factor: 1.0,
            fleet: base.fleet().to_vec(),
            b_failure: 1.5,
            b_preventive: 0.5,
        }).unwrap();
        let once = inst.normalize_metric();
        let twice = once.normalize_metric();
        prop_assert_eq!(once.distance_matrix(), twice.distance_matrix());
        prop_assert!(once.triangle_violation() <= 1e-9);
        for i in once.customers() {
            prop_assert!(once.failure_cost(i) >= once.b_failure());
            for j in once.customers().filter(|&j| j != i) {
                prop_assert!(once.preventive_cost(i, j) >= once.b_preventive());
                prop_assert!(once.preventive_cost(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn variants_derive_fleet_and_load_factor(n in 3usize..9, bernoulli in any::<bool>(), seed in any::<u64>()) {
        let base = instance(n, bernoulli, seed);
        let basic = VariantConfig::BASIC.apply(&base).unwrap();
        let f = base.total_mean() / base.capacity() as f64;
        prop_assert!((basic.load_factor() - f).abs() <= 1e-12);
        prop_assert_eq!(basic.fleet().to_vec(), (1..=n).collect::<Vec<_>>());
        let full = VariantConfig::VRPSD.apply(&base).unwrap();
        prop_assert_eq!(full.load_factor(), 1.0);
        prop_assert_eq!(full.fleet().len(), 1);
        prop_assert_eq!(VariantConfig::ECC.apply(&base).unwrap().load_factor(), 1.0);
        prop_assert_eq!(VariantConfig::FRC.apply(&base).unwrap().fleet().len(), 1);
    }

    #[test]
    fn convolution_commutes_and_associates(a in pmf_strategy(), b in pmf_strategy(), c in pmf_strategy()) {
        let (a, b, c) = (discrete(&a), discrete(&b), discrete(&c));
        assert_same_pmf(&a.convolve(&b, 0.0), &b.convolve(&a, 0.0), 1e-9)?;
        assert_same_pmf(&a.convolve(&b, 0.0).convolve(&c, 0.0), &a.convolve(&b.convolve(&c, 0.0), 0.0), 1e-9)?;
        let sum: f64 = a.convolve(&b, 0.0).pmf().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn adding_demand_never_lowers_exceedance(a in pmf_strategy(), b in pmf_strategy(), t in 0usize..16) {
        let (a, b) = (discrete(&a), discrete(&b));
        prop_assert!(a.convolve(&b, 0.0).exceed_probability(t) + 1e-12 >= a.exceed_probability(t));
    }

    #[test]
    fn poisson_convolution_power(lambda in 0.2f64..4.0, k in 1usize..6) {
        let single = DemandDistribution::poisson(lambda, DEFAULT_TAIL_EPS).unwrap();
        let mut sum = single.clone();
        for _ in 1..k {
            sum = sum.convolve(&single, DEFAULT_TAIL_EPS);
        }
        let direct = DemandDistribution::poisson(lambda * k as f64, DEFAULT_TAIL_EPS).unwrap();
        assert_same_pmf(&sum, &direct, 1e-8)?;
    }

    #[test]
    fn restocking_never_costs_more_than_detours(n in 2usize..8, bernoulli in any::<bool>(), seed in any::<u64>(), len in 1usize..8) {
        let inst = instance(n, bernoulli, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = path(&inst, &random_path(&inst, len, &mut rng));
        let or = or_recourse(&inst, &p);
        let dtd = dtd_recourse(&inst, &p);
        prop_assert!(or.forward <= dtd.forward + 1e-9);
        prop_assert!(or.backward <= dtd.backward + 1e-9);
        for v in [or, dtd] {
            prop_assert!(v.best >= 0.0);
            prop_assert!(v.best <= v.forward.min(v.backward) + 1e-15);
        }
        prop_assert!(or_cost_to_go(&inst, &p).is_monotone(1e-9));
    }

    #[test]
    fn restocking_is_superadditive(n in 2usize..8, bernoulli in any::<bool>(), seed in any::<u64>(), len in 2usize..8, cut in 1usize..7) {
        let inst = instance(n, bernoulli, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let c = random_path(&inst, len, &mut rng);
        prop_assume!(c.len() >= 2);
        let s = cut.min(c.len() - 1);
        let q = |p: &[usize]| recourse(&inst, &path(&inst, p), Policy::Or).best;
        prop_assert!(q(&c) + 1e-9 >= q(&c[..s]) + q(&c[s..]));
    }

    #[test]
    fn detour_recourse_grows_with_the_prefix(n in 2usize..8, bernoulli in any::<bool>(), seed in any::<u64>(), len in 2usize..8) {
        let inst = instance(n, bernoulli, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let c = random_path(&inst, len, &mut rng);
        let full = dtd_recourse(&inst, &path(&inst, &c)).forward;
        for k in 1..c.len() {
            prop_assert!(dtd_recourse(&inst, &path(&inst, &c[..k])).forward <= full + 1e-12);
        }
    }

    #[test]
    fn bellman_tables_match_decision_tree_search(seed in any::<u64>(), len in 1usize..5) {
        let inst = instance(5, true, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let p = path(&inst, &random_path(&inst, len, &mut rng));
        let exhaustive = or_policy_exhaustive(&inst, &p).unwrap();
        prop_assert!((exhaustive - or_recourse(&inst, &p).forward).abs() <= 1e-9);
    }

    #[test]
    fn cost_floors_are_ordered_and_non_negative(n in 3usize..8, seed in any::<u64>(), m in 1usize..4) {
        let inst = iid_poisson(n, seed);
        let set: Vec<usize> = inst.customers().collect();
        let floor = greedy_vehicle_order(&inst, &set, m.min(n), &EdgeSet::new()).unwrap();
        prop_assert!(floor.recourse.iter().all(|&c| c >= 0.0));
        prop_assert!(floor.recourse.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    }

    #[test]
    fn bounds_stay_below_enumeration_and_rise_with_forbidding(n in 3usize..7, seed in any::<u64>(), size in 2usize..6) {
        let inst = iid_poisson(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let mut set = random_path(&inst, size, &mut rng);
        set.sort_unstable();
        let m = vehicles_for(&inst, &set);
        prop_assume!(m <= set.len());
        let mut inner = edges_within(&set);
        inner.shuffle(&mut rng);
        let mut forbidden = EdgeSet::new();
        let mut last = (0.0, 0.0, 0.0);
        for e in inner.iter().take(3) {
            let l = enumerate_l(&inst, &set, m, &forbidden, Policy::Or).unwrap().value;
            let l1 = lower_bound_l1(&inst, &set, m, &forbidden).unwrap();
            let l2 = lower_bound_l2(&inst, &set, m, &forbidden).unwrap();
            prop_assert!(l1 <= l + 1e-9 && l2 <= l + 1e-9, "L1 {l1} L2 {l2} L {l}");
            prop_assert!(l + 1e-12 >= last.0 && l1 + 1e-12 >= last.1 && l2 + 1e-12 >= last.2);
            last = (l, l1, l2);
            forbidden.insert(*e);
        }
    }

    #[test]
    fn demand_grid_is_scale_free(means in prop::collection::vec(1usize..6, 2..6), q in 6usize..15, k in 2usize..5) {
        let build = |scale: usize| {
            let n = means.len();
            Instance::new(InstanceData {
                name: "g".into(),
                distance: vec![vec![1.0; n + 1]; n + 1].into_iter().enumerate()
                    .map(|(i, mut r)| { r[i] = 0.0; r }).collect(),
                demands: means.iter().map(|&m| DemandDistribution::point(m * scale)).collect(),
                capacity: q.max(5) * scale,
                load_factor: 1.0,
                fleet: vec![n],
                b_failure: 0.0,
                b_preventive: 0.0,
            }).unwrap()
        };
        let set: Vec<usize> = (1..=means.len()).collect();
        let a = DemandGrid::new(&build(1), &set).unwrap();
        let b = DemandGrid::new(&build(k), &set).unwrap();
        prop_assert_eq!((a.groups, a.per_vehicle), (b.groups, b.per_vehicle));
        prop_assert!((b.unit - a.unit * k as f64).abs() <= 1e-9);
        prop_assert!(a.per_vehicle as f64 * a.unit <= 1.0 * q.max(5) as f64 + 1e-9);
        prop_assert!((a.groups as f64 * a.unit - a.total).abs() <= 1e-9);
    }

    #[test]
    fn enumeration_rises_with_forbidden_edges(n in 3usize..7, bernoulli in any::<bool>(), seed in any::<u64>(), m in 1usize..3) {
        let inst = instance(n, bernoulli, seed);
        let set: Vec<usize> = inst.customers().take(5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        let mut inner = edges_within(&set);
        inner.shuffle(&mut rng);
        let mut forbidden = EdgeSet::new();
        let mut last = enumerate_l(&inst, &set, m, &forbidden, Policy::Or).unwrap().value;
        for e in inner.iter().take(4) {
            forbidden.insert(*e);
            let l = enumerate_l(&inst, &set, m, &forbidden, Policy::Or).unwrap().value;
            prop_assert!(l + 1e-12 >= last);
            last = l;
        }
    }

    #[test]
    fn edge_set_cuts_specialize_to_set_and_path_cuts(len in 2usize..7, seed in any::<u64>(), coef in 0.0f64..5.0, m in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (1..=8).collect();
        order.shuffle(&mut rng);
        order.truncate(len);
        let mut set = order.clone();
        set.sort_unstable();
        let s = build_s_cut(&set, m, coef);
        let e = build_e_cut(&set, &edges_within(&set), m, coef);
        prop_assert_eq!(&s.x_terms, &e.x_terms);
        prop_assert_eq!(&s.theta, &e.theta);
        prop_assert!((s.rhs - e.rhs).abs() <= 1e-12);
        let p = build_p_cut(&Path::new(order.clone(), 8).unwrap(), coef);
        let mut edges = vrpsd_core::graph::path_edges(&order);
        edges.sort_unstable();
        let pe = build_e_cut(&set, &edges, 1, coef);
        let mut pt = p.x_terms.clone();
        pt.sort_by_key(|a| a.0);
        prop_assert_eq!(pt, pe.x_terms);
        prop_assert_eq!(&p.theta, &pe.theta);
        prop_assert!((p.rhs - pe.rhs).abs() <= 1e-12);
    }
}
