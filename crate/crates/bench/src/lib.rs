//! Instance families shared by the benchmarks.

use vrpsd_core::instance::generate::{random_instance, DemandKind, GeneratorConfig, Layout};
use vrpsd_core::{Instance, Path, VariantConfig};

/// Customers at random angles on a circle around the depot, i.i.d. demands
/// and a single fleet size. Every depot edge has the same length, so the
/// preventive-restock cost only depends on how far apart two customers are.
pub fn ring_instance(n: usize, demand: DemandKind, seed: u64) -> Instance {
    let cfg = GeneratorConfig {
        layout: Layout::Ring,
        iid: true,
        target_routes: 2.0,
        ..GeneratorConfig::new(n, demand, seed)
    };
    let base = random_instance(&cfg).expect("generator yields valid instances");
    VariantConfig::FRC.apply(&base).expect("variant keeps the instance valid")
}

/// Scattered customers with mixed demand parameters.
pub fn scatter_instance(n: usize, demand: DemandKind, variant: VariantConfig, seed: u64) -> Instance {
    let base = random_instance(&GeneratorConfig::new(n, demand, seed)).expect("generator yields valid instances");
    variant.apply(&base).expect("variant keeps the instance valid")
}

/// The first `len` customers in index order.
pub fn prefix_path(inst: &Instance, len: usize) -> Path {
    Path::new((1..=len.min(inst.n())).collect(), inst.n()).expect("prefix is a valid path")
}
