//! Staged development of the four-map network: two primary maps feed an
//! association map through projections `A` (Prim1) and `P2` (Prim2); the
//! association map feeds the frontal map through projection `B`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_map, symptom_of, AnalysisConfig, MapReport};
use crate::error::{Result, SomError};
use crate::seed::derive_seed;
use crate::som::{init_map, train, DimGroup, FeatureMap, PathologySpec, TrainingConfig, TrainingTrace};
use crate::stimuli::{gen_assoc_inputs, gen_front_inputs, gen_primary_inputs, PairingMode, StimulusSet};

/// Default side length of every map.
pub const MAP_SIDE: usize = 20;
/// Learning rate of a disrupted long-range projection.
pub const DISRUPTED_RATE: f64 = 0.02;
/// Over-strengthening factor used by the combined-pathology cases.
pub const CASE_OMEGA: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MapId {
    Prim1,
    Prim2,
    Assoc,
    Front,
}

impl MapId {
    pub const ALL: [MapId; 4] = [MapId::Prim1, MapId::Prim2, MapId::Assoc, MapId::Front];

    pub fn name(self) -> &'static str {
        match self {
            MapId::Prim1 => "Prim1",
            MapId::Prim2 => "Prim2",
            MapId::Assoc => "Assoc",
            MapId::Front => "Front",
        }
    }

    fn stage(self) -> &'static str {
        match self {
            MapId::Prim1 => "prim1",
            MapId::Prim2 => "prim2",
            MapId::Assoc => "assoc",
            MapId::Front => "front",
        }
    }
}

impl fmt::Display for MapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MapId {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prim1" => Ok(MapId::Prim1),
            "prim2" => Ok(MapId::Prim2),
            "assoc" => Ok(MapId::Assoc),
            "front" => Ok(MapId::Front),
            _ => Err(SomError::Config(format!("unknown map {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectionId {
    /// Prim1 → Assoc.
    A,
    /// Prim2 → Assoc.
    P2,
    /// Assoc → Front.
    B,
}

impl std::str::FromStr for ProjectionId {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(ProjectionId::A),
            "P2" => Ok(ProjectionId::P2),
            "B" => Ok(ProjectionId::B),
            _ => Err(SomError::Config(format!("unknown projection {s:?} (expected A, P2 or B)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub id: ProjectionId,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projections {
    pub a: ProjectionSpec,
    pub p2: ProjectionSpec,
    pub b: ProjectionSpec,
}

impl Default for Projections {
    fn default() -> Self {
        Projections {
            a: ProjectionSpec {
                id: ProjectionId::A,
                learning_rate: 0.5,
            },
            p2: ProjectionSpec {
                id: ProjectionId::P2,
                learning_rate: 0.5,
            },
            b: ProjectionSpec {
                id: ProjectionId::B,
                learning_rate: 0.5,
            },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MapSettings {
    /// `rng_seed` is ignored; each stage derives its own from the master seed.
    pub training: TrainingConfig,
    pub pathology: PathologySpec,
}

/// Whether the frontal level is developed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Levels {
    #[default]
    Three,
    /// Prim1, Prim2 and Assoc only.
    Two,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub prim1: MapSettings,
    pub prim2: MapSettings,
    pub assoc: MapSettings,
    pub front: MapSettings,
    pub projections: Projections,
    pub pairing: PairingMode,
    pub levels: Levels,
    pub map_side: usize,
    pub analysis: AnalysisConfig,
    pub master_seed: u64,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        let mut spec = NetworkSpec {
            prim1: MapSettings::default(),
            prim2: MapSettings::default(),
            assoc: MapSettings::default(),
            front: MapSettings::default(),
            projections: Projections::default(),
            pairing: PairingMode::default(),
            levels: Levels::default(),
            map_side: MAP_SIDE,
            analysis: AnalysisConfig::default(),
            master_seed: 0,
        };
        spec.sync_rates();
        spec
    }
}

impl NetworkSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn settings(&self, id: MapId) -> &MapSettings {
        match id {
            MapId::Prim1 => &self.prim1,
            MapId::Prim2 => &self.prim2,
            MapId::Assoc => &self.assoc,
            MapId::Front => &self.front,
        }
    }

    pub fn settings_mut(&mut self, id: MapId) -> &mut MapSettings {
        match id {
            MapId::Prim1 => &mut self.prim1,
            MapId::Prim2 => &mut self.prim2,
            MapId::Assoc => &mut self.assoc,
            MapId::Front => &mut self.front,
        }
    }

    pub fn set_projection_rate(&mut self, id: ProjectionId, rate: f64) {
        match id {
            ProjectionId::A => self.projections.a.learning_rate = rate,
            ProjectionId::P2 => self.projections.p2.learning_rate = rate,
            ProjectionId::B => self.projections.b.learning_rate = rate,
        }
        self.sync_rates();
    }

    /// Copy projection rates into the Assoc and Front training configs.
    pub fn sync_rates(&mut self) {
        self.assoc.training.learning_rates = vec![self.projections.a.learning_rate, self.projections.p2.learning_rate];
        self.front.training.learning_rates = vec![self.projections.b.learning_rate];
    }

    pub fn validate(&self) -> Result<()> {
        let assoc_rates = [self.projections.a.learning_rate, self.projections.p2.learning_rate];
        if self.assoc.training.learning_rates != assoc_rates {
            return Err(SomError::Config(format!(
                "Assoc rates {:?} disagree with projections A/P2 {:?}",
                self.assoc.training.learning_rates, assoc_rates
            )));
        }
        if self.front.training.learning_rates != [self.projections.b.learning_rate] {
            return Err(SomError::Config(format!(
                "Front rates {:?} disagree with projection B {}",
                self.front.training.learning_rates, self.projections.b.learning_rate
            )));
        }
        if self.map_side < 2 {
            return Err(SomError::Config(format!("map side must be >= 2, got {}", self.map_side)));
        }
        for id in MapId::ALL {
            let s = self.settings(id);
            s.training.validate()?;
            s.pathology.validate()?;
        }
        self.analysis.validate()
    }

    /// Sub-seed for `stage` of map `id`.
    pub fn stage_seed(&self, id: MapId, stage: &str) -> u64 {
        derive_seed(self.master_seed, &format!("{}/{stage}", id.stage()))
    }
}

/// One developed map with everything derived from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapOutcome {
    pub id: MapId,
    pub map: FeatureMap,
    pub trace: TrainingTrace,
    /// The set the map was trained on and analyzed against.
    pub stimuli: StimulusSet,
    pub report: MapReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    /// First map that could not be developed.
    pub stage: MapId,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkResult {
    pub spec: NetworkSpec,
    /// Developed maps in stage order (Prim1, Prim2, Assoc, Front).
    pub maps: Vec<MapOutcome>,
    pub aborted: Option<Abort>,
}

impl NetworkResult {
    pub fn get(&self, id: MapId) -> Option<&MapOutcome> {
        self.maps.iter().find(|m| m.id == id)
    }

    pub fn report(&self, id: MapId) -> Option<&MapReport> {
        self.get(id).map(|m| &m.report)
    }
}

fn develop_map(
    id: MapId,
    settings: &MapSettings,
    map: FeatureMap,
    stimuli: StimulusSet,
    train_seed: u64,
    analysis: &AnalysisConfig,
) -> Result<MapOutcome> {
    let cfg = TrainingConfig {
        rng_seed: train_seed,
        ..settings.training.clone()
    };
    let (map, trace) = train(map, &stimuli, &cfg, &settings.pathology)?;
    let mut report = analyze_map(&map, &stimuli, Some(&trace), analysis)?;
    if id == MapId::Front {
        report.symptom = Some(symptom_of(&report.category, analysis.large_cluster_fraction));
    }
    Ok(MapOutcome {
        id,
        map,
        trace,
        stimuli,
        report,
    })
}

fn develop_primary(spec: &NetworkSpec, id: MapId) -> Result<MapOutcome> {
    let stimuli = gen_primary_inputs(spec.stage_seed(id, "inputs"));
    let map = init_map(spec.map_side, spec.map_side, 2, stimuli.bounds(), spec.stage_seed(id, "init"))?;
    develop_map(id, spec.settings(id), map, stimuli, spec.stage_seed(id, "train"), &spec.analysis)
}

fn develop_assoc(spec: &NetworkSpec, prim1: &MapReport, prim2: &MapReport) -> Result<MapOutcome> {
    let id = MapId::Assoc;
    let stimuli = gen_assoc_inputs(&prim1.field, &prim2.field, spec.pairing, spec.stage_seed(id, "inputs"))?;
    let map = init_map(spec.map_side, spec.map_side, 4, stimuli.bounds(), spec.stage_seed(id, "init"))?
        .with_dim_groups(vec![DimGroup::new("A", vec![0, 1]), DimGroup::new("P2", vec![2, 3])])?;
    develop_map(id, &spec.assoc, map, stimuli, spec.stage_seed(id, "train"), &spec.analysis)
}

fn develop_front(spec: &NetworkSpec, assoc: &MapReport) -> Result<MapOutcome> {
    let id = MapId::Front;
    let stimuli = gen_front_inputs(&assoc.field, spec.pairing, spec.stage_seed(id, "inputs"))?;
    let map = init_map(spec.map_side, spec.map_side, 2, stimuli.bounds(), spec.stage_seed(id, "init"))?
        .with_dim_groups(vec![DimGroup::new("B", vec![0, 1])])?;
    develop_map(id, &spec.front, map, stimuli, spec.stage_seed(id, "train"), &spec.analysis)
}

/// Develop Prim1 and Prim2, then Assoc from their encoders, then Front
/// from Assoc's. A stage that cannot be developed ends the run with a
/// partial result.
pub fn develop_network(spec: &NetworkSpec) -> Result<NetworkResult> {
    spec.validate()?;
    let mut result = NetworkResult {
        spec: spec.clone(),
        maps: Vec::with_capacity(4),
        aborted: None,
    };
    let stage = |result: &mut NetworkResult, id: MapId, outcome: Result<MapOutcome>| match outcome {
        Ok(m) => {
            result.maps.push(m);
            true
        }
        Err(e) => {
            result.aborted = Some(Abort {
                stage: id,
                reason: e.to_string(),
            });
            false
        }
    };
    for id in [MapId::Prim1, MapId::Prim2] {
        let outcome = develop_primary(spec, id);
        if !stage(&mut result, id, outcome) {
            return Ok(result);
        }
    }
    let outcome = develop_assoc(spec, &result.maps[0].report, &result.maps[1].report);
    if !stage(&mut result, MapId::Assoc, outcome) || spec.levels == Levels::Two {
        return Ok(result);
    }
    let outcome = develop_front(spec, &result.maps[2].report);
    stage(&mut result, MapId::Front, outcome);
    Ok(result)
}

/// A single primary-style map trained in isolation on quadrant stimuli.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleMapSpec {
    pub settings: MapSettings,
    pub map_side: usize,
    pub analysis: AnalysisConfig,
    pub seed: u64,
}

impl Default for SingleMapSpec {
    fn default() -> Self {
        SingleMapSpec {
            settings: MapSettings::default(),
            map_side: MAP_SIDE,
            analysis: AnalysisConfig::default(),
            seed: 0,
        }
    }
}

pub fn develop_single_map(spec: &SingleMapSpec) -> Result<MapOutcome> {
    spec.settings.training.validate()?;
    spec.settings.pathology.validate()?;
    spec.analysis.validate()?;
    let net = NetworkSpec {
        prim1: spec.settings.clone(),
        map_side: spec.map_side,
        analysis: spec.analysis.clone(),
        master_seed: spec.seed,
        ..NetworkSpec::default()
    };
    develop_primary(&net, MapId::Prim1)
}

/// Long-range disruption case of the combined-pathology matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Projection A disrupted.
    One = 1,
    /// Projection B disrupted.
    Two = 2,
    /// Both disrupted.
    Three = 3,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::One, Case::Two, Case::Three];

    pub fn from_number(n: u8) -> Result<Case> {
        match n {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            3 => Ok(Case::Three),
            _ => Err(SomError::Config(format!("case must be 1, 2 or 3, got {n}"))),
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn disrupted(self) -> &'static [ProjectionId] {
        match self {
            Case::One => &[ProjectionId::A],
            Case::Two => &[ProjectionId::B],
            Case::Three => &[ProjectionId::A, ProjectionId::B],
        }
    }
}

/// The eleven over-excited map combinations, in table row order.
pub const COMBOS: [&[MapId]; 11] = [
    &[MapId::Prim1, MapId::Prim2],
    &[MapId::Assoc],
    &[MapId::Front],
    &[MapId::Assoc, MapId::Front],
    &[MapId::Prim1, MapId::Prim2, MapId::Assoc],
    &[MapId::Prim1, MapId::Prim2, MapId::Front],
    &[MapId::Prim1, MapId::Prim2, MapId::Assoc, MapId::Front],
    &[MapId::Prim1],
    &[MapId::Prim1, MapId::Assoc],
    &[MapId::Prim1, MapId::Front],
    &[MapId::Prim1, MapId::Assoc, MapId::Front],
];

/// Row index (0-based) of a combination, order-insensitive.
pub fn combo_index(maps: &[MapId]) -> Option<usize> {
    let mut wanted = maps.to_vec();
    wanted.sort();
    wanted.dedup();
    COMBOS.iter().position(|c| {
        let mut have = c.to_vec();
        have.sort();
        have == wanted
    })
}

pub fn combo_label(index: usize) -> String {
    COMBOS[index].iter().map(|m| m.name()).collect::<Vec<_>>().join("+")
}

/// Set the case's disrupted projections to the weakened rate and
/// over-strengthen (Ω = 5) every map in `combo`.
pub fn apply_case(spec: &NetworkSpec, case: Case, combo: &[MapId]) -> Result<NetworkSpec> {
    if combo_index(combo).is_none() {
        return Err(SomError::Config(format!(
            "{combo:?} is not one of the eleven imbalance combinations"
        )));
    }
    let mut out = spec.clone();
    for &p in case.disrupted() {
        out.set_projection_rate(p, DISRUPTED_RATE);
    }
    for &m in combo {
        out.settings_mut(m).pathology = PathologySpec::over_strengthen(CASE_OMEGA);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::PathologyMode;

    #[test]
    fn case_one_assoc_row() {
        let s = apply_case(&NetworkSpec::default(), Case::One, &[MapId::Assoc]).unwrap();
        assert_eq!(s.projections.a.learning_rate, 0.02);
        assert_eq!(s.projections.b.learning_rate, 0.5);
        assert_eq!(s.assoc.training.learning_rates, vec![0.02, 0.5]);
        assert_eq!(s.assoc.pathology.mode, PathologyMode::OverStrengthen { omega: 5.0 });
        for m in [MapId::Prim1, MapId::Prim2, MapId::Front] {
            assert_eq!(s.settings(m).pathology, PathologySpec::none());
        }
        s.validate().unwrap();
    }

    #[test]
    fn case_three_prim1_row() {
        let s = apply_case(&NetworkSpec::default(), Case::Three, &[MapId::Prim1]).unwrap();
        assert_eq!(s.projections.a.learning_rate, 0.02);
        assert_eq!(s.projections.b.learning_rate, 0.02);
        assert_eq!(s.front.training.learning_rates, vec![0.02]);
        assert_eq!(s.prim1.pathology.mode, PathologyMode::OverStrengthen { omega: 5.0 });
        assert!(s.prim2.pathology.is_none());
    }

    #[test]
    fn empty_combo_rejected() {
        assert!(apply_case(&NetworkSpec::default(), Case::Two, &[]).is_err());
        assert!(apply_case(&NetworkSpec::default(), Case::Two, &[MapId::Prim2]).is_err());
    }

    #[test]
    fn combo_lookup_is_order_insensitive() {
        assert_eq!(combo_index(&[MapId::Front, MapId::Assoc]), Some(3));
        assert_eq!(combo_label(6), "Prim1+Prim2+Assoc+Front");
        assert_eq!(COMBOS.len(), 11);
    }

    #[test]
    fn inconsistent_rates_rejected() {
        let mut s = NetworkSpec::default();
        s.assoc.training.learning_rates = vec![0.5, 0.1];
        assert!(s.validate().is_err());
    }

    #[test]
    fn sub_seeds_differ() {
        let s = NetworkSpec::default().with_seed(4);
        let t = NetworkSpec::default().with_seed(5);
        assert_ne!(s.stage_seed(MapId::Prim1, "train"), s.stage_seed(MapId::Prim2, "train"));
        assert_ne!(s.stage_seed(MapId::Prim1, "inputs"), t.stage_seed(MapId::Prim1, "inputs"));
    }
}
