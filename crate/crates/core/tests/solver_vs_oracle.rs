use vrpsd_core::instance::generate::{random_instance, DemandKind, GeneratorConfig};
use vrpsd_core::oracle::{brute_force_solve, check_superadditivity};
use vrpsd_core::solver::{solve, solve_classic_baseline, warm_start, SolveOptions};
use vrpsd_core::{Policy, VariantConfig};

const VARIANTS: [VariantConfig; 4] = [VariantConfig::VRPSD, VariantConfig::ECC, VariantConfig::FRC, VariantConfig::BASIC];

fn case(k: u64) -> (vrpsd_core::Instance, VariantConfig) {
    let kind = if k.is_multiple_of(2) { DemandKind::Poisson } else { DemandKind::Bernoulli };
    let n = 5 + (k as usize % 3);
    let base = random_instance(&GeneratorConfig::new(n, kind, 100 + k)).unwrap();
    let variant = VARIANTS[(k / 2) as usize % 4];
    (variant.apply(&base).unwrap(), variant)
}

#[test]
fn branch_and_cut_matches_brute_force() {
    for k in 0..16 {
        let (inst, variant) = case(k);
        let exact = brute_force_solve(&inst, Policy::Or).unwrap();
        let sol = solve(&inst, Policy::Or, &SolveOptions::default()).unwrap();
        sol.validate(&inst).unwrap();
        assert!(
            (sol.objective - exact.objective).abs() < 1e-6,
            "case {k} ({}): solver {} vs brute force {}",
            variant.name(),
            sol.objective,
            exact.objective
        );
        let cold = solve(&inst, Policy::Or, &SolveOptions { warm_start: false, ..Default::default() }).unwrap();
        assert!((cold.objective - exact.objective).abs() < 1e-6, "case {k} without warm start");
        let ws = warm_start(&inst, Policy::Or).unwrap();
        assert!(ws.objective >= exact.objective - 1e-9);
    }
}

#[test]
fn detour_policy_matches_brute_force_when_superadditive() {
    let mut compared = 0;
    for k in 0..12 {
        let (inst, variant) = case(k);
        if !check_superadditivity(&inst, Policy::Dtd, 7).unwrap().holds {
            continue;
        }
        compared += 1;
        let exact = brute_force_solve(&inst, Policy::Dtd).unwrap();
        let sol = solve(&inst, Policy::Dtd, &SolveOptions::default()).unwrap();
        assert!(
            (sol.objective - exact.objective).abs() < 1e-6,
            "case {k} ({}): solver {} vs brute force {}",
            variant.name(),
            sol.objective,
            exact.objective
        );
    }
    assert!(compared >= 6, "only {compared} superadditive cases");
}

#[test]
fn classic_baseline_agrees_on_single_fleet_size() {
    for k in 0..6 {
        let base = random_instance(&GeneratorConfig::new(5 + k as usize % 2, DemandKind::Poisson, 300 + k)).unwrap();
        let inst = VariantConfig::FRC.apply(&base).unwrap();
        let Ok(exact) = brute_force_solve(&inst, Policy::Or) else { continue };
        let classic = solve_classic_baseline(&inst, Policy::Or, &SolveOptions::default()).unwrap();
        let dl = solve(&inst, Policy::Or, &SolveOptions::default()).unwrap();
        assert!((classic.objective - exact.objective).abs() < 1e-6, "case {k}");
        assert!((dl.objective - classic.objective).abs() < 1e-6, "case {k}");
    }
}
