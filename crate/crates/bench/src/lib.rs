//! Benchmark fixtures.

use bcsreach::generators::{preset, random_cnf, random_instance_over, sat_to_c4, Preset, RandomLimits};
use bcsreach::instance::Instance;

/// Random instances over a single stack with `symbols` stack letters.
pub fn pushdown_family(symbols: usize, count: u64) -> Vec<Instance> {
    let g = preset(&Preset::Pushdown(symbols)).expect("positive size");
    let limits = RandomLimits { max_states: 5, max_transitions: 10, ..RandomLimits::default() };
    (0..count).map(|s| random_instance_over(s, g.clone(), &limits)).collect()
}

/// Random instances over two-by-two multi-pushdown storage (the C4 graph).
pub fn c4_family(count: u64) -> Vec<Instance> {
    let g = preset(&Preset::Multipushdown(vec![2, 2])).expect("positive sizes");
    let limits = RandomLimits { max_states: 4, max_transitions: 8, ..RandomLimits::default() };
    (0..count).map(|s| random_instance_over(s, g.clone(), &limits)).collect()
}

/// The hardness reduction applied to a random 3-CNF.
pub fn sat_instance(seed: u64, vars: usize, clauses: usize) -> Instance {
    sat_to_c4(&random_cnf(seed, vars, clauses))
}
