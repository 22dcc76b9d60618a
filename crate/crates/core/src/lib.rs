//! Three-level self-organizing map model of cortical map development.
//!
//! Two primary maps learn quadrant stimuli, an association map learns
//! concatenated encoder coordinates of both, and a frontal map learns
//! encoder coordinates of the association map. Local excitatory imbalance
//! (over-strengthened or enlarged neighborhood updates) and long-range
//! disruption (weakened projection learning rates) can be injected per map
//! and per projection, and every developed map is read out as a
//! categorical final state.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod network;
pub mod render;
pub mod report;
pub mod seed;
pub mod som;
pub mod stimuli;

pub use analysis::{
    analyze_map, calibrate_activation, calibrate_on_maps, classify_state, detect_encoders, extract_clusters, symptom_of, AnalysisConfig,
    Calibration, Cluster, EncoderField, MapReport, MapStateCategory, PutativeSymptom, StateTag,
};
pub use error::{Result, SomError};
pub use experiment::{
    run_case_matrix, run_experiment, ExperimentKind, ExperimentParams, ExperimentResult, ExperimentSpec,
};
pub use network::{
    apply_case, develop_network, develop_single_map, Case, MapId, NetworkResult, NetworkSpec, ProjectionId, SingleMapSpec,
    COMBOS,
};
pub use render::{render_map, RenderFormat};
pub use report::{emit_report, read_report};
pub use som::{
    find_winner, init_map, neighborhood_weight, stability_verdict, train, update_step, FeatureMap, GridPos,
    PathologyMode, PathologySpec, StabilityVerdict, TrainingConfig, TrainingTrace,
};
pub use stimuli::{gen_assoc_inputs, gen_front_inputs, gen_primary_inputs, PairingMode, Stimulus, StimulusSet};
