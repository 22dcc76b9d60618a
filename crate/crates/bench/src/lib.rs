//! Benchmark fixtures shared by the criterion targets.

use cortexsom::{init_map, FeatureMap, MapId, NetworkSpec, StimulusSet};

/// A reference-size untrained primary map with its stimuli.
pub fn primary_fixture(seed: u64) -> (FeatureMap, StimulusSet) {
    let stimuli = cortexsom::gen_primary_inputs(seed);
    let map = init_map(20, 20, 2, stimuli.bounds(), seed).expect("reference map dimensions are valid");
    (map, stimuli)
}

/// Default network with every map trained for `steps` steps.
pub fn short_network(steps: usize) -> NetworkSpec {
    let mut spec = NetworkSpec::default();
    for id in MapId::ALL {
        spec.settings_mut(id).training.steps = steps;
    }
    spec
}
