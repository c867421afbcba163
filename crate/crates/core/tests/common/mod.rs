#![allow(dead_code)]

use camuv::simulate::{CausalFunction, Scm};
use camuv::{discover, CausalGraph, Dataset, DiscoveryConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    /// X1 -> X2.
    Chain,
    /// X1 <- U -> X2.
    Confounded,
    /// X1 -> U -> X2.
    Intermediate,
    /// No relation.
    Independent,
}

pub fn fixture(kind: Fixture, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scm = Scm::new(2);
    match kind {
        Fixture::Chain => scm.add_edge(0, 1, CausalFunction::sample(&mut rng)),
        Fixture::Confounded => {
            let u = scm.add_latent();
            scm.add_edge(u, 0, CausalFunction::sample(&mut rng));
            scm.add_edge(u, 1, CausalFunction::sample(&mut rng));
        }
        Fixture::Intermediate => {
            let u = scm.add_latent();
            scm.add_edge(0, u, CausalFunction::sample(&mut rng));
            scm.add_edge(u, 1, CausalFunction::sample(&mut rng));
        }
        Fixture::Independent => {}
    }
    scm.sample(n, 1.0, &mut rng).unwrap()
}

pub fn run_fixture(kind: Fixture, seed: u64) -> CausalGraph {
    discover(&fixture(kind, 1000, seed), &DiscoveryConfig::default()).unwrap()
}

/// Fraction of `seeds` for which `pred` holds.
pub fn rate(seeds: std::ops::Range<u64>, mut pred: impl FnMut(u64) -> bool) -> f64 {
    let total = seeds.end - seeds.start;
    seeds.filter(|&s| pred(s)).count() as f64 / total as f64
}
