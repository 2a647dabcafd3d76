//! Seeded inputs shared by the benchmarks.

use mvqa_core::compliance::induced_distribution;
use mvqa_core::flow::{matchings_instance, random_cubic_bipartite};
use mvqa_core::random::{random_instance, InstanceShape};
use mvqa_core::worlds::{support_of, Support};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub support: Support,
    pub induced: Vec<f64>,
}

/// `count` random single-relation instances from one seed.
pub fn random_fixtures(count: usize, seed: u64, shape: InstanceShape) -> Vec<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let inst = random_instance(&mut rng, shape);
            let support = support_of(&inst.bid);
            let induced = induced_distribution(&inst.mg, &inst.bid.attributes, &support).expect("induced");
            Fixture { support, induced }
        })
        .collect()
}

/// The matchings instance of a random 3-regular bipartite graph.
pub fn matchings_fixture(side: usize, seed: u64) -> Fixture {
    let g = random_cubic_bipartite(side, &mut ChaCha8Rng::seed_from_u64(seed));
    let (rel, induced) = matchings_instance(&g).expect("cubic bipartite");
    Fixture { support: support_of(&rel), induced }
}
