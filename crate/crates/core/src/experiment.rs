//! Named experiments over seed ensembles.
//!
//! An [`ExperimentSpec`] expands into one or more groups (a σ value, a
//! disruption pattern, a case/combination pair, ...), each developed for
//! every seed. Seeds run in parallel; results are folded in spec order, so
//! the output never depends on scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{calibrate_on_maps, Calibration, MapReport, PutativeSymptom, StateTag, CALIBRATION_BRACKET};
use crate::error::{Result, SomError};
use crate::network::{
    apply_case, combo_label, develop_network, develop_single_map, Abort, Case, Levels, MapId, MapOutcome,
    MapSettings, NetworkSpec, ProjectionId, SingleMapSpec, COMBOS, DISRUPTED_RATE,
};
use crate::render::{render_map, RenderFormat};
use crate::report::{emit_report, write_map_document, SCHEMA_VERSION};
use crate::seed::hash_hex;
use crate::som::{PathologySpec, StabilityVerdict};
use crate::stimuli::StimulusSet;

pub const DEFAULT_SEED_COUNT: u64 = 50;
pub const DEFAULT_OMEGA: f64 = 5.0;
pub const DEFAULT_C: f64 = 1.1;
pub const SWEEP_SIGMAS: [f64; 10] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
/// Reference ensemble for activation calibration: seeds `0..CALIBRATION_SEEDS`.
pub const CALIBRATION_SEEDS: u64 = 20;
pub const MIN_CALIBRATION_SEEDS: usize = 10;
pub const CALIBRATION_TARGET: (f64, f64) = (200.0, 300.0);
/// Histogram label for maps a run never reached.
pub const ABORTED_LABEL: &str = "aborted";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Three-level network, no pathology.
    Normal,
    /// Single map with over-strengthened neighbor updates.
    SingleMapOmega,
    /// Single map with the increase factor.
    SingleMapXi,
    /// Single map at each neighborhood width of a list.
    SigmaSweep,
    /// Prim1/Prim2 under local imbalance feeding Assoc; no Front.
    TwoLevelImpairment,
    /// Three-level network with weakened projections and no local imbalance.
    Disruption,
    /// Disruption case × the eleven imbalance combinations.
    CaseMatrix,
    /// The base network spec exactly as given.
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Normal,
        ExperimentKind::SingleMapOmega,
        ExperimentKind::SingleMapXi,
        ExperimentKind::SigmaSweep,
        ExperimentKind::TwoLevelImpairment,
        ExperimentKind::Disruption,
        ExperimentKind::CaseMatrix,
        ExperimentKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Normal => "normal",
            ExperimentKind::SingleMapOmega => "single_map_omega",
            ExperimentKind::SingleMapXi => "single_map_xi",
            ExperimentKind::SigmaSweep => "sigma_sweep",
            ExperimentKind::TwoLevelImpairment => "two_level_impairment",
            ExperimentKind::Disruption => "disruption",
            ExperimentKind::CaseMatrix => "case_matrix",
            ExperimentKind::Custom => "custom",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| SomError::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// Kind-specific knobs. Unused fields are ignored by other kinds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentParams {
    pub omega: Option<f64>,
    pub omega_includes_winner: bool,
    pub c: Option<f64>,
    pub sigmas: Vec<f64>,
    /// Disruption case (1-3); all three when absent.
    pub case: Option<u8>,
    /// 1-based row of one imbalance combination; all eleven when absent.
    pub combo: Option<usize>,
    pub disrupted: Vec<ProjectionId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub params: ExperimentParams,
    pub seeds: Vec<u64>,
    /// Training, analysis and pairing settings shared by every run.
    pub base: NetworkSpec,
    /// Fit `sigma_act` on the reference ensemble before running.
    #[serde(default)]
    pub calibrate: bool,
    #[serde(default)]
    pub render: Vec<RenderFormat>,
    /// Also write every trained map's weights.
    #[serde(default)]
    pub save_maps: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Defaults for `kind`: 50 seeds, Table 1 parameters and the kind's
    /// documented pathology settings.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut params = ExperimentParams::default();
        match kind {
            ExperimentKind::SingleMapOmega => params.omega = Some(DEFAULT_OMEGA),
            ExperimentKind::SingleMapXi | ExperimentKind::TwoLevelImpairment => params.c = Some(DEFAULT_C),
            ExperimentKind::SigmaSweep => params.sigmas = SWEEP_SIGMAS.to_vec(),
            ExperimentKind::Disruption => params.disrupted = vec![ProjectionId::A],
            _ => {}
        }
        ExperimentSpec {
            name: kind.name().to_string(),
            kind,
            params,
            seeds: (0..DEFAULT_SEED_COUNT).collect(),
            base: NetworkSpec::default(),
            calibrate: false,
            render: Vec::new(),
            save_maps: false,
            out_dir: None,
        }
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds = seeds.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(SomError::Config("an experiment needs at least one seed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(SomError::Config("seed list contains duplicates".into()));
        }
        self.base.validate()?;
        let p = &self.params;
        match self.kind {
            ExperimentKind::SingleMapOmega => {
                let omega = p.omega.ok_or_else(|| SomError::Config("single_map_omega needs omega".into()))?;
                PathologySpec::over_strengthen(omega).validate()?;
            }
            ExperimentKind::SingleMapXi => {
                let c = p.c.ok_or_else(|| SomError::Config("single_map_xi needs c".into()))?;
                PathologySpec::increase_factor(c).validate()?;
            }
            ExperimentKind::TwoLevelImpairment => {
                if p.c.is_none() && p.omega.is_none() {
                    return Err(SomError::Config("two_level_impairment needs c or omega".into()));
                }
                self.primary_impairment().validate()?;
            }
            ExperimentKind::SigmaSweep => {
                if p.sigmas.is_empty() {
                    return Err(SomError::Config("sigma_sweep needs at least one sigma".into()));
                }
                if let Some(s) = p.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                    return Err(SomError::Config(format!("sigma must be positive, got {s}")));
                }
            }
            ExperimentKind::Disruption => {
                if p.disrupted.is_empty() {
                    return Err(SomError::Config("disruption needs at least one projection".into()));
                }
            }
            ExperimentKind::CaseMatrix => {
                if let Some(c) = p.case {
                    Case::from_number(c)?;
                }
                if let Some(i) = p.combo {
                    if i == 0 || i > COMBOS.len() {
                        return Err(SomError::Config(format!("combo must be 1..={}, got {i}", COMBOS.len())));
                    }
                }
            }
            ExperimentKind::Normal | ExperimentKind::Custom => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("spec is always serializable");
        hash_hex(&bytes)
    }

    fn primary_impairment(&self) -> PathologySpec {
        let mut p = match (self.params.omega, self.params.c) {
            (Some(omega), _) => PathologySpec::over_strengthen(omega),
            (None, c) => PathologySpec::increase_factor(c.unwrap_or(DEFAULT_C)),
        };
        p.omega_includes_winner = self.params.omega_includes_winner;
        p
    }

    fn single(&self, pathology: PathologySpec) -> Job {
        Job::Single(SingleMapSpec {
            settings: MapSettings {
                training: self.base.prim1.training.clone(),
                pathology,
            },
            map_side: self.base.map_side,
            analysis: self.base.analysis.clone(),
            seed: 0,
        })
    }

    fn groups(&self) -> Result<Vec<Group>> {
        let p = &self.params;
        let plain = |label: String, job| Group {
            label,
            case: None,
            combo: None,
            sigma: None,
            job,
        };
        let groups = match self.kind {
            ExperimentKind::Normal | ExperimentKind::Custom => {
                vec![plain(self.kind.name().into(), Job::Network(self.base.clone()))]
            }
            ExperimentKind::SingleMapOmega => {
                let omega = p.omega.unwrap_or(DEFAULT_OMEGA);
                let mut path = PathologySpec::over_strengthen(omega);
                path.omega_includes_winner = p.omega_includes_winner;
                vec![plain(format!("omega={omega}"), self.single(path))]
            }
            ExperimentKind::SingleMapXi => {
                let c = p.c.unwrap_or(DEFAULT_C);
                vec![plain(format!("xi(C={c})"), self.single(PathologySpec::increase_factor(c)))]
            }
            ExperimentKind::SigmaSweep => p
                .sigmas
                .iter()
                .map(|&s| Group {
                    sigma: Some(s),
                    ..plain(format!("sigma={s}"), self.single(self.base.prim1.pathology.with_sigma(s)))
                })
                .collect(),
            ExperimentKind::TwoLevelImpairment => {
                let mut net = self.base.clone();
                net.levels = Levels::Two;
                net.prim1.pathology = self.primary_impairment();
                net.prim2.pathology = self.primary_impairment();
                vec![plain("two_level".into(), Job::Network(net))]
            }
            ExperimentKind::Disruption => {
                let mut net = self.base.clone();
                let mut names = Vec::new();
                for &proj in &p.disrupted {
                    net.set_projection_rate(proj, DISRUPTED_RATE);
                    names.push(format!("{proj:?}"));
                }
                vec![plain(format!("disrupted={}", names.join("+")), Job::Network(net))]
            }
            ExperimentKind::CaseMatrix => {
                let cases = match p.case {
                    Some(n) => vec![Case::from_number(n)?],
                    None => Case::ALL.to_vec(),
                };
                let combos: Vec<usize> = match p.combo {
                    Some(i) => vec![i - 1],
                    None => (0..COMBOS.len()).collect(),
                };
                let mut out = Vec::new();
                for case in cases {
                    for &i in &combos {
                        out.push(Group {
                            case: Some(case.number()),
                            combo: Some(i + 1),
                            ..plain(
                                format!("case{}/{}", case.number(), combo_label(i)),
                                Job::Network(apply_case(&self.base, case, COMBOS[i])?),
                            )
                        });
                    }
                }
                out
            }
        };
        Ok(groups)
    }
}

#[derive(Clone, Debug)]
enum Job {
    Single(SingleMapSpec),
    Network(NetworkSpec),
}

impl Job {
    fn map_ids(&self) -> &'static [MapId] {
        match self {
            Job::Single(_) => &[MapId::Prim1],
            Job::Network(n) if n.levels == Levels::Two => &[MapId::Prim1, MapId::Prim2, MapId::Assoc],
            Job::Network(_) => &MapId::ALL,
        }
    }

    fn set_sigma_act(&mut self, sigma_act: f64) {
        match self {
            Job::Single(s) => s.analysis.sigma_act = sigma_act,
            Job::Network(n) => n.analysis.sigma_act = sigma_act,
        }
    }
}

#[derive(Clone, Debug)]
struct Group {
    label: String,
    case: Option<u8>,
    combo: Option<usize>,
    sigma: Option<f64>,
    job: Job,
}

/// One map of one run, without its weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRecord {
    pub map: MapId,
    pub stimulus_seed: u64,
    pub stimuli: StimulusSet,
    pub report: MapReport,
    /// Mean per-neuron displacement between the last two snapshots.
    pub final_displacement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub group: String,
    pub seed: u64,
    pub maps: Vec<MapRecord>,
    pub aborted: Option<Abort>,
}

impl RunRecord {
    pub fn get(&self, id: MapId) -> Option<&MapRecord> {
        self.maps.iter().find(|m| m.map == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub map: MapId,
    /// Seeds in the group, including aborted ones.
    pub runs: usize,
    /// Category label → seed count; unreached maps count as `aborted`.
    pub histogram: BTreeMap<String, usize>,
    pub proportions: BTreeMap<String, f64>,
    pub modal: String,
    pub modal_tag: Option<StateTag>,
    pub modal_fraction: f64,
    /// Over developed maps only.
    pub mean_encoders: f64,
    pub stable_fraction: f64,
    /// Most frequent putative symptom (frontal maps only).
    pub modal_symptom: Option<PutativeSymptom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub case: Option<u8>,
    pub combo: Option<usize>,
    pub sigma: Option<f64>,
    pub seeds: usize,
    pub maps: Vec<MapSummary>,
}

impl GroupSummary {
    pub fn map(&self, id: MapId) -> Option<&MapSummary> {
        self.maps.iter().find(|m| m.map == id)
    }
}

/// One combination row of a case table: the modal category of every map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub combo: usize,
    pub label: String,
    pub prim1: String,
    pub prim2: String,
    pub assoc: String,
    pub front: String,
    pub front_symptom: Option<PutativeSymptom>,
}

/// Single-encoder association maps and the single overlapping cluster
/// frontal maps that follow them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub assoc_single_encoder: usize,
    pub front_single_cluster: usize,
    pub front_single_cluster_after_single_encoder: usize,
}

/// Combinations whose frontal map still ends well organized, by the modal
/// association category that preceded it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontRecovery {
    pub front_well_organized: usize,
    pub preceded_by: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseTable {
    pub case: u8,
    pub rows: Vec<CaseRow>,
    /// Modal association category → number of combinations.
    pub assoc_states: BTreeMap<String, usize>,
    /// Modal frontal category → number of combinations.
    pub front_states: BTreeMap<String, usize>,
    pub linkage: Linkage,
    pub recovery: FrontRecovery,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub spec_hash: String,
    pub code_version: String,
    pub sigma_act: f64,
    pub calibration: Option<Calibration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema: String,
    pub provenance: RunProvenance,
    pub spec: ExperimentSpec,
    /// Group-major, then in seed-list order.
    pub runs: Vec<RunRecord>,
    pub groups: Vec<GroupSummary>,
    /// Map name → category label → count over every group.
    pub histogram: BTreeMap<String, BTreeMap<String, usize>>,
    pub case_tables: Vec<CaseTable>,
    /// Artifacts that could not be written; the run itself went on.
    pub artifact_errors: Vec<String>,
}

impl ExperimentResult {
    pub fn group(&self, label: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn case_table(&self, case: u8) -> Option<&CaseTable> {
        self.case_tables.iter().find(|t| t.case == case)
    }
}

/// Fit `sigma_act` on single maps trained with `template`'s settings for
/// each of `seeds`.
pub fn calibrate_with(template: &SingleMapSpec, seeds: &[u64], target: (f64, f64)) -> Result<Calibration> {
    if seeds.len() < MIN_CALIBRATION_SEEDS {
        return Err(SomError::Config(format!(
            "calibration needs at least {MIN_CALIBRATION_SEEDS} seeds, got {}",
            seeds.len()
        )));
    }
    let maps = seeds
        .par_iter()
        .map(|&seed| {
            let o = develop_single_map(&SingleMapSpec {
                seed,
                ..template.clone()
            })?;
            Ok((o.map, o.stimuli))
        })
        .collect::<Result<Vec<_>>>()?;
    calibrate_on_maps(&maps, template.analysis.theta, target, CALIBRATION_BRACKET)
}

fn record(outcome: &MapOutcome, stimulus_seed: u64) -> MapRecord {
    MapRecord {
        map: outcome.id,
        stimulus_seed,
        stimuli: outcome.stimuli.clone(),
        report: outcome.report.clone(),
        final_displacement: outcome.trace.mean_step_displacement.last().copied().unwrap_or(0.0),
    }
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn write_artifacts(
    spec: &ExperimentSpec,
    out: &Path,
    run: &RunRecord,
    outcomes: &[&MapOutcome],
    config_hash: &str,
) -> Vec<String> {
    let mut errors = Vec::new();
    let dir = out.join("runs").join(slug(&run.group));
    if let Err(e) = fs::create_dir_all(&dir) {
        errors.push(SomError::io(&dir, e).to_string());
        return errors;
    }
    let stem = format!("seed-{}", run.seed);
    let doc = dir.join(format!("{stem}.json"));
    let written = serde_json::to_vec_pretty(run)
        .map_err(SomError::from)
        .and_then(|bytes| fs::write(&doc, bytes).map_err(|e| SomError::io(&doc, e)));
    if let Err(e) = written {
        errors.push(e.to_string());
    }
    for o in outcomes {
        for &fmt in &spec.render {
            let path = dir.join(format!("{stem}-{}.{}", o.id.name(), fmt.extension()));
            if let Err(e) = fs::write(&path, render_map(&o.report, fmt)) {
                errors.push(SomError::io(&path, e).to_string());
            }
        }
        if spec.save_maps {
            let path = dir.join(format!("{stem}-{}.map.json", o.id.name()));
            if let Err(e) = write_map_document(&path, &o.map, run.seed, config_hash) {
                errors.push(e.to_string());
            }
        }
    }
    errors
}

fn run_one(spec: &ExperimentSpec, group: &Group, seed: u64, config_hash: &str) -> Result<(RunRecord, Vec<String>)> {
    let (run, outcomes) = match &group.job {
        Job::Single(template) => {
            let s = SingleMapSpec {
                seed,
                ..template.clone()
            };
            let o = develop_single_map(&s)?;
            let net = NetworkSpec {
                master_seed: seed,
                ..NetworkSpec::default()
            };
            let run = RunRecord {
                group: group.label.clone(),
                seed,
                maps: vec![record(&o, net.stage_seed(MapId::Prim1, "inputs"))],
                aborted: None,
            };
            (run, vec![o])
        }
        Job::Network(template) => {
            let net = template.clone().with_seed(seed);
            let r = develop_network(&net)?;
            let run = RunRecord {
                group: group.label.clone(),
                seed,
                maps: r.maps.iter().map(|o| record(o, net.stage_seed(o.id, "inputs"))).collect(),
                aborted: r.aborted.clone(),
            };
            (run, r.maps)
        }
    };
    let errors = match &spec.out_dir {
        Some(out) => write_artifacts(spec, out, &run, &outcomes.iter().collect::<Vec<_>>(), config_hash),
        None => Vec::new(),
    };
    Ok((run, errors))
}

/// Count-descending, then label order.
fn modal_of(histogram: &BTreeMap<String, usize>) -> (String, usize) {
    histogram
        .iter()
        .fold((String::new(), 0), |best, (k, &v)| if v > best.1 { (k.clone(), v) } else { best })
}

fn summarize_map(id: MapId, runs: &[&RunRecord]) -> MapSummary {
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    let mut tags: BTreeMap<String, StateTag> = BTreeMap::new();
    let mut symptoms: BTreeMap<String, (PutativeSymptom, usize)> = BTreeMap::new();
    let (mut developed, mut encoders, mut stable) = (0usize, 0usize, 0usize);
    for run in runs {
        match run.get(id) {
            Some(m) => {
                let tag = m.report.category.tag;
                *histogram.entry(tag.to_string()).or_insert(0) += 1;
                tags.insert(tag.to_string(), tag);
                developed += 1;
                encoders += m.report.encoder_count();
                if m.report.stability == Some(StabilityVerdict::Stable) {
                    stable += 1;
                }
                if let Some(s) = m.report.symptom {
                    symptoms.entry(s.symptom.to_string()).or_insert((s.symptom, 0)).1 += 1;
                }
            }
            None => *histogram.entry(ABORTED_LABEL.to_string()).or_insert(0) += 1,
        }
    }
    let n = runs.len();
    let proportions = histogram.iter().map(|(k, &v)| (k.clone(), v as f64 / n as f64)).collect();
    let (modal, count) = modal_of(&histogram);
    let modal_symptom = symptoms
        .values()
        .fold(None::<(PutativeSymptom, usize)>, |best, &(s, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((s, c)),
        })
        .map(|(s, _)| s);
    let per = |x: usize| if developed == 0 { 0.0 } else { x as f64 / developed as f64 };
    MapSummary {
        map: id,
        runs: n,
        modal_tag: tags.get(&modal).copied(),
        modal_fraction: count as f64 / n as f64,
        modal,
        histogram,
        proportions,
        mean_encoders: per(encoders),
        stable_fraction: per(stable),
        modal_symptom,
    }
}

fn case_tables(groups: &[GroupSummary]) -> Vec<CaseTable> {
    let mut cases: Vec<u8> = groups.iter().filter_map(|g| g.case).collect();
    cases.dedup();
    cases
        .into_iter()
        .map(|case| {
            let mut table = CaseTable {
                case,
                rows: Vec::new(),
                assoc_states: BTreeMap::new(),
                front_states: BTreeMap::new(),
                linkage: Linkage::default(),
                recovery: FrontRecovery::default(),
            };
            for g in groups.iter().filter(|g| g.case == Some(case)) {
                let modal = |id| g.map(id).map(|m| m.modal.clone()).unwrap_or_default();
                let tag = |id| g.map(id).and_then(|m| m.modal_tag);
                table.rows.push(CaseRow {
                    combo: g.combo.unwrap_or(0),
                    label: g.label.split('/').nth(1).unwrap_or(&g.label).to_string(),
                    prim1: modal(MapId::Prim1),
                    prim2: modal(MapId::Prim2),
                    assoc: modal(MapId::Assoc),
                    front: modal(MapId::Front),
                    front_symptom: g.map(MapId::Front).and_then(|m| m.modal_symptom),
                });
                *table.assoc_states.entry(modal(MapId::Assoc)).or_insert(0) += 1;
                *table.front_states.entry(modal(MapId::Front)).or_insert(0) += 1;
                let single_encoder = tag(MapId::Assoc) == Some(StateTag::SingleEncoder);
                let single_cluster = tag(MapId::Front) == Some(StateTag::SingleClusterOverlapping);
                table.linkage.assoc_single_encoder += single_encoder as usize;
                table.linkage.front_single_cluster += single_cluster as usize;
                table.linkage.front_single_cluster_after_single_encoder += (single_encoder && single_cluster) as usize;
                if tag(MapId::Front) == Some(StateTag::WellOrganized4) {
                    table.recovery.front_well_organized += 1;
                    *table.recovery.preceded_by.entry(modal(MapId::Assoc)).or_insert(0) += 1;
                }
            }
            table
        })
        .collect()
}

/// Run every group of `spec` for every seed and aggregate.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let mut groups = spec.groups()?;
    let calibration = if spec.calibrate {
        let template = SingleMapSpec {
            settings: spec.base.prim1.clone(),
            map_side: spec.base.map_side,
            analysis: spec.base.analysis.clone(),
            seed: 0,
        };
        let seeds: Vec<u64> = (0..CALIBRATION_SEEDS).collect();
        let cal = calibrate_with(&template, &seeds, CALIBRATION_TARGET)?;
        for g in &mut groups {
            g.job.set_sigma_act(cal.sigma_act);
        }
        Some(cal)
    } else {
        None
    };
    let sigma_act = calibration.as_ref().map_or(spec.base.analysis.sigma_act, |c| c.sigma_act);
    let spec_hash = spec.hash();

    let jobs: Vec<(usize, u64)> = (0..groups.len())
        .flat_map(|g| spec.seeds.iter().map(move |&s| (g, s)))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(g, seed)| run_one(spec, &groups[g], seed, &spec_hash))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(outputs.len());
    let mut artifact_errors = Vec::new();
    for (run, errors) in outputs {
        runs.push(run);
        artifact_errors.extend(errors);
    }

    let per_group = spec.seeds.len();
    let summaries: Vec<GroupSummary> = groups
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let group_runs: Vec<&RunRecord> = runs[gi * per_group..(gi + 1) * per_group].iter().collect();
            GroupSummary {
                label: g.label.clone(),
                case: g.case,
                combo: g.combo,
                sigma: g.sigma,
                seeds: per_group,
                maps: g.job.map_ids().iter().map(|&id| summarize_map(id, &group_runs)).collect(),
            }
        })
        .collect();
    let mut histogram: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for s in &summaries {
        for m in &s.maps {
            let h = histogram.entry(m.map.name().to_string()).or_default();
            for (k, v) in &m.histogram {
                *h.entry(k.clone()).or_insert(0) += v;
            }
        }
    }

    let mut result = ExperimentResult {
        schema: SCHEMA_VERSION.to_string(),
        provenance: RunProvenance {
            spec_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            sigma_act,
            calibration,
        },
        spec: ExperimentSpec {
            out_dir: None,
            ..spec.clone()
        },
        runs,
        case_tables: case_tables(&summaries),
        groups: summaries,
        histogram,
        artifact_errors,
    };
    if let Some(out) = &spec.out_dir {
        if let Err(e) = emit_report(&result, out) {
            result.artifact_errors.push(e.to_string());
        }
    }
    Ok(result)
}

/// All eleven combinations of one disruption case.
pub fn run_case_matrix(case: Case, seeds: &[u64], base: &NetworkSpec) -> Result<ExperimentResult> {
    let mut spec = ExperimentSpec::new(ExperimentKind::CaseMatrix).with_seeds(seeds.iter().copied());
    spec.params.case = Some(case.number());
    spec.base = base.clone();
    spec.name = format!("case{}", case.number());
    run_experiment(&spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(kind).with_seeds([3, 1]);
        for id in MapId::ALL {
            spec.base.settings_mut(id).training.steps = 60;
            spec.base.settings_mut(id).training.snapshot_interval = 20;
        }
        spec
    }

    #[test]
    fn kinds_parse_by_name() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert_eq!("case-matrix".parse::<ExperimentKind>().unwrap(), ExperimentKind::CaseMatrix);
        assert!("chaos".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn invalid_specs_rejected_before_work() {
        assert!(ExperimentSpec::new(ExperimentKind::Normal).with_seeds([]).validate().is_err());
        assert!(ExperimentSpec::new(ExperimentKind::Normal).with_seeds([1, 1]).validate().is_err());
        let mut s = ExperimentSpec::new(ExperimentKind::SingleMapOmega);
        s.params.omega = None;
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::new(ExperimentKind::CaseMatrix);
        s.params.case = Some(4);
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::new(ExperimentKind::CaseMatrix);
        s.params.combo = Some(12);
        assert!(s.validate().is_err());
    }

    #[test]
    fn histogram_totals_match_runs() {
        let r = run_experiment(&quick(ExperimentKind::Normal)).unwrap();
        assert_eq!(r.runs.len(), 2);
        for (_, h) in &r.histogram {
            assert_eq!(h.values().sum::<usize>(), 2);
        }
        let g = &r.groups[0];
        assert_eq!(g.maps.len(), 4);
        for m in &g.maps {
            let total: f64 = m.proportions.values().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seed_results_do_not_depend_on_company() {
        let a = run_experiment(&quick(ExperimentKind::Normal)).unwrap();
        let b = run_experiment(&quick(ExperimentKind::Normal).with_seeds([1])).unwrap();
        assert_eq!(a.runs[1], b.runs[0]);
    }

    #[test]
    fn case_matrix_rows() {
        let mut spec = quick(ExperimentKind::CaseMatrix);
        spec.params.case = Some(2);
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.groups.len(), 11);
        assert_eq!(r.runs.len(), 22);
        let t = r.case_table(2).unwrap();
        assert_eq!(t.rows.len(), 11);
        assert_eq!(t.rows[0].label, "Prim1+Prim2");
        assert_eq!(t.assoc_states.values().sum::<usize>(), 11);
    }

    #[test]
    fn sweep_has_one_group_per_sigma() {
        let mut spec = quick(ExperimentKind::SigmaSweep);
        spec.params.sigmas = vec![1.0, 3.0];
        let r = run_experiment(&spec).unwrap();
        assert_eq!(r.groups.iter().map(|g| g.sigma).collect::<Vec<_>>(), vec![Some(1.0), Some(3.0)]);
        assert_eq!(r.groups[0].maps.len(), 1);
    }

    #[test]
    fn two_level_skips_front() {
        let r = run_experiment(&quick(ExperimentKind::TwoLevelImpairment)).unwrap();
        assert!(r.runs.iter().all(|run| run.get(MapId::Front).is_none()));
        assert_eq!(r.groups[0].maps.len(), 3);
    }

    #[test]
    fn modal_ties_break_by_label() {
        let h: BTreeMap<String, usize> = [("b".to_string(), 2), ("a".to_string(), 2), ("c".to_string(), 1)].into();
        assert_eq!(modal_of(&h), ("a".to_string(), 2));
    }
}
