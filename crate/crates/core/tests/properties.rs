use cortexsom::analysis::{detect_encoders, extract_clusters};
use cortexsom::som::DimGroup;
use cortexsom::{
    analyze_map, classify_state, find_winner, gen_primary_inputs, init_map, neighborhood_weight, symptom_of, train,
    update_step, AnalysisConfig, EncoderField, FeatureMap, GridPos, MapReport, PathologySpec, StateTag,
    TrainingConfig,
};
use proptest::prelude::*;

const CASES: u32 = 1000;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        ..ProptestConfig::default()
    }
}

prop_compose! {
    fn any_map(max_side: usize, dim: usize)(w in 1..=max_side, h in 1..=max_side)
        (weights in prop::collection::vec(-20.0..20.0f64, w * h * dim), w in Just(w), h in Just(h)) -> FeatureMap {
        FeatureMap::from_weights(w, h, dim, weights, vec![DimGroup::new("all", (0..dim).collect::<Vec<_>>())]).unwrap()
    }
}

prop_compose! {
    fn any_field()(w in 1..=14usize, h in 1..=14usize)
        (masks in prop::collection::vec(prop_oneof![3 => Just(0u32), 2 => 1..16u32], w * h), w in Just(w), h in Just(h)) -> EncoderField {
        EncoderField::from_masks(w, h, 4, masks).unwrap()
    }
}

fn any_pathology() -> impl Strategy<Value = PathologySpec> {
    prop_oneof![
        Just(PathologySpec::none()),
        (1.01..8.0f64, any::<bool>()).prop_map(|(o, w)| {
            let mut p = PathologySpec::over_strengthen(o);
            p.omega_includes_winner = w;
            p
        }),
        (1.01..3.0f64).prop_map(PathologySpec::increase_factor),
    ]
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn winner_is_never_beaten(map in any_map(20, 2), x in prop::array::uniform2(-20.0..20.0f64)) {
        let win = find_winner(&map, &x).unwrap();
        let best = sq(map.weight(map.index_of(win)), &x);
        for i in 0..map.len() {
            prop_assert!(sq(map.weight(i), &x) >= best);
        }
    }

    #[test]
    fn neighborhood_is_symmetric(ax in 0..40usize, ay in 0..40usize, bx in 0..40usize, by in 0..40usize, s in 0.05..20.0f64) {
        let (a, b) = (GridPos::new(ax, ay), GridPos::new(bx, by));
        prop_assert_eq!(neighborhood_weight(a, b, s).to_bits(), neighborhood_weight(b, a, s).to_bits());
        prop_assert!(neighborhood_weight(a, b, s) <= 1.0);
    }

    #[test]
    fn stimulus_everywhere_is_a_fixed_point(
        w in 1..=8usize, h in 1..=8usize, x in prop::collection::vec(-20.0..20.0f64, 1..=4),
        p in any_pathology(), rate in 0.01..1.0f64, sigma in 0.2..5.0f64,
    ) {
        let dim = x.len();
        let weights: Vec<f64> = (0..w * h).flat_map(|_| x.clone()).collect();
        let mut map = FeatureMap::from_weights(w, h, dim, weights, vec![DimGroup::new("all", (0..dim).collect::<Vec<_>>())]).unwrap();
        let before = map.clone();
        let cfg = TrainingConfig { learning_rates: vec![rate], sigma, ..TrainingConfig::default() };
        update_step(&mut map, &x, &cfg, &p).unwrap();
        prop_assert_eq!(map, before);
    }

    #[test]
    fn plain_update_contracts(map in any_map(8, 3), x in prop::array::uniform3(-20.0..20.0f64), rate in 0.0001..=1.0f64, sigma in 0.2..5.0f64) {
        let mut next = map.clone();
        let cfg = TrainingConfig { learning_rates: vec![rate], sigma, ..TrainingConfig::default() };
        update_step(&mut next, &x, &cfg, &PathologySpec::none()).unwrap();
        for i in 0..map.len() {
            for d in 0..3 {
                prop_assert!((next.weight(i)[d] - x[d]).abs() <= (map.weight(i)[d] - x[d]).abs() + 1e-12);
            }
        }
    }

    #[test]
    fn training_is_bit_reproducible(seed in any::<u64>(), side in 2..=6usize, steps in 0..60usize, p in any_pathology()) {
        let stimuli = gen_primary_inputs(seed);
        let map = init_map(side, side, 2, stimuli.bounds(), seed ^ 1).unwrap();
        let cfg = TrainingConfig { steps, snapshot_interval: 7, rng_seed: seed, ..TrainingConfig::default() };
        let a = train(map.clone(), &stimuli, &cfg, &p);
        let b = train(map, &stimuli, &cfg, &p);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                let bits = |m: &FeatureMap| m.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(&a.0), bits(&b.0));
                prop_assert_eq!(a.1, b.1);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "one run failed, the other did not"),
        }
    }

    #[test]
    fn maps_round_trip_through_json(map in any_map(10, 4)) {
        let text = serde_json::to_string(&map).unwrap();
        let back: FeatureMap = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, map);
    }

    #[test]
    fn primary_stimuli_are_quadrant_pure(seed in any::<u64>()) {
        let s = gen_primary_inputs(seed);
        prop_assert_eq!(s.dim(), 2);
        prop_assert_eq!(&s, &gen_primary_inputs(seed));
        for p in s.patterns() {
            let (qx, qy) = ((p.class_id / 2) as f64 * 10.0, (p.class_id % 2) as f64 * 10.0);
            prop_assert!(qx <= p.values[0] && p.values[0] < qx + 10.0);
            prop_assert!(qy <= p.values[1] && p.values[1] < qy + 10.0);
        }
    }

    #[test]
    fn raising_theta_never_adds_encoders(
        seed in any::<u64>(), side in 2..=20usize, t1 in 0.3..1.0f64, t2 in 0.3..1.0f64, s in 0.05..20.0f64,
    ) {
        let stimuli = gen_primary_inputs(seed);
        let map = init_map(side, side, 2, stimuli.bounds(), seed.wrapping_add(9)).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let loose = detect_encoders(&map, &stimuli, lo, s).unwrap();
        let strict = detect_encoders(&map, &stimuli, hi, s).unwrap();
        for (a, b) in strict.masks().iter().zip(loose.masks()) {
            prop_assert_eq!(a & !b, 0);
        }
    }

    #[test]
    fn winner_encodes_its_class(seed in any::<u64>(), side in 1..=20usize, theta in 0.3..=1.0f64, s in 0.01..20.0f64) {
        let stimuli = gen_primary_inputs(seed);
        let map = init_map(side, side, 2, stimuli.bounds(), seed.wrapping_mul(3)).unwrap();
        let field = detect_encoders(&map, &stimuli, theta, s).unwrap();
        for p in stimuli.patterns() {
            let win = find_winner(&map, &p.values).unwrap();
            prop_assert!(field.mask_at(win) & (1 << p.class_id) != 0);
        }
    }

    #[test]
    fn clusters_partition_the_encoders(field in any_field(), min in 1..=8usize) {
        let (clusters, fragments) = extract_clusters(&field, min);
        let mut seen = vec![false; field.width() * field.height()];
        for c in clusters.iter().chain(&fragments) {
            for p in &c.members {
                let i = p.y * field.width() + p.x;
                prop_assert!(!seen[i], "neuron in two components");
                prop_assert!(field.mask_at(*p) != 0);
                seen[i] = true;
            }
        }
        prop_assert_eq!(seen.iter().filter(|s| **s).count(), field.encoder_count());
        prop_assert!(clusters.iter().all(|c| c.size() >= min));
        prop_assert!(fragments.iter().all(|c| c.size() < min));
    }

    #[test]
    fn every_field_gets_a_consistent_category(field in any_field(), min in 1..=6usize) {
        let cfg = AnalysisConfig { min_cluster_size: min, ..AnalysisConfig::default() };
        let (clusters, fragments) = extract_clusters(&field, min);
        let cat = classify_state(&field, &clusters, &fragments, &cfg);
        prop_assert_eq!(cat.detail.encoders, field.encoder_count());
        prop_assert_eq!(cat.detail.clusters, clusters.len());
        match cat.tag {
            StateTag::Patternless => prop_assert_eq!(field.encoder_count(), 0),
            StateTag::SingleEncoder => prop_assert_eq!(field.encoder_count(), 1),
            StateTag::WellOrganized4 => prop_assert_eq!(clusters.len(), 4),
            StateTag::Clusters { n, .. } | StateTag::ClustersWithIsolated { n } => prop_assert_eq!(n, clusters.len()),
            StateTag::FewEncoders { k, .. } => {
                prop_assert!(clusters.is_empty());
                prop_assert_eq!(k, field.encoder_count());
            }
            StateTag::AbsenceOfClusters | StateTag::TendencyTo { .. } => prop_assert!(clusters.is_empty()),
            StateTag::SingleClusterOverlapping => prop_assert_eq!(clusters.len(), 1),
        }
        let again = classify_state(&field, &clusters, &fragments, &cfg);
        prop_assert_eq!(symptom_of(&cat, 0.25), symptom_of(&again, 0.25));
    }

    #[test]
    fn reports_round_trip_through_json(seed in any::<u64>(), side in 2..=12usize, s in 0.1..10.0f64) {
        let stimuli = gen_primary_inputs(seed);
        let map = init_map(side, side, 2, stimuli.bounds(), seed).unwrap();
        let cfg = AnalysisConfig { sigma_act: s, ..AnalysisConfig::default() };
        let report = analyze_map(&map, &stimuli, None, &cfg).unwrap();
        let back: MapReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        prop_assert_eq!(back, report);
    }
}
