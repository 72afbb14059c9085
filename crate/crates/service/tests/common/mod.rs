#![allow(dead_code)]

use metadrift::active::{ActiveConfig, ActiveDetector, ServiceOracle};
use metadrift::evalharness::{train_on_corpus, MetaTraining};
use metadrift::metafeat::WindowSpec;
use metadrift::protonet::{Architecture, MetaDetector};
use rand::{Rng, SeedableRng};

pub fn detector() -> MetaDetector {
    let training = MetaTraining {
        train_per_class: 40,
        episodes: 50,
        ..MetaTraining::default()
    };
    train_on_corpus(WindowSpec::new(5, 10).unwrap(), &training, Architecture::Fcn, 3).unwrap()
}

/// A detection loop whose queries wait for HTTP answers.
pub fn live(cfg: ActiveConfig) -> ActiveDetector {
    ActiveDetector::new(detector(), cfg, Some(Box::new(ServiceOracle))).unwrap()
}

/// Feeds Bernoulli(0.2) errors until `emissions` more windows were emitted.
pub fn run_emissions(det: &mut ActiveDetector, emissions: usize, seed: u64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let target = det.queue().status().emissions + emissions;
    while det.queue().status().emissions < target {
        det.observe(u8::from(rng.random::<f64>() < 0.2)).unwrap();
    }
}
