//! Readout of a trained map: encoding neurons, clusters, overlap, the
//! categorical final state and, for frontal maps, the putative symptom.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SomError};
use crate::experiment::calibrate_with;
use crate::network::SingleMapSpec;
use crate::som::{stability_verdict, FeatureMap, GridPos, StabilityVerdict, TrainingTrace, STABILITY_EPSILON};
use crate::stimuli::StimulusSet;

/// Activation scale for encoder detection, frozen from
/// `calibrate_activation(0..20, (200, 300))` on the default maps.
pub const DEFAULT_SIGMA_ACT: f64 = 4.123703068156014;

/// Search bracket for `calibrate_activation`.
pub const CALIBRATION_BRACKET: (f64, f64) = (0.01, 50.0);

/// Thresholds used to turn a trained map into a category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Encoding threshold: a neuron encodes a class when its activation is at least `theta` times the winner's.
    pub theta: f64,
    pub sigma_act: f64,
    /// Connected encoder groups smaller than this are isolated encoders, not clusters.
    pub min_cluster_size: usize,
    /// Up to this many encoders (and no cluster) the map is "a few encoding neurons".
    pub few_encoder_max: usize,
    /// Area fraction above which a cluster counts as enlarged.
    pub large_cluster_fraction: f64,
    /// Chebyshev gap bridged when grouping isolated fragments of one class set.
    pub tendency_gap: usize,
    pub stability_epsilon: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            theta: 0.999,
            sigma_act: DEFAULT_SIGMA_ACT,
            min_cluster_size: 4,
            few_encoder_max: 9,
            large_cluster_fraction: 0.25,
            tendency_gap: 2,
            stability_epsilon: STABILITY_EPSILON,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(SomError::Config(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.sigma_act > 0.0) {
            return Err(SomError::Config(format!("sigma_act must be positive, got {}", self.sigma_act)));
        }
        if self.min_cluster_size == 0 {
            return Err(SomError::Config("min_cluster_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-neuron class membership as bitmasks (bit `k` set = encodes class `k`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderField {
    width: usize,
    height: usize,
    num_classes: usize,
    classes: Vec<u32>,
    /// Detection parameters; zero for fields built directly from masks.
    pub sigma_act: f64,
    pub theta: f64,
}

impl EncoderField {
    pub fn from_masks(width: usize, height: usize, num_classes: usize, classes: Vec<u32>) -> Result<Self> {
        if classes.len() != width * height {
            return Err(SomError::Config(format!(
                "{} masks for a {width}x{height} field",
                classes.len()
            )));
        }
        if num_classes > 32 || classes.iter().any(|m| num_classes < 32 && m >> num_classes != 0) {
            return Err(SomError::Config("class mask outside the class range".into()));
        }
        Ok(EncoderField {
            width,
            height,
            num_classes,
            classes,
            sigma_act: 0.0,
            theta: 0.0,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Row-major class bitmasks.
    pub fn masks(&self) -> &[u32] {
        &self.classes
    }

    pub fn mask_at(&self, pos: GridPos) -> u32 {
        self.classes[pos.y * self.width + pos.x]
    }

    fn pos(&self, i: usize) -> GridPos {
        GridPos::new(i % self.width, i / self.width)
    }

    pub fn encoder_count(&self) -> usize {
        self.classes.iter().filter(|&&m| m != 0).count()
    }

    pub fn encoder_positions(&self) -> Vec<GridPos> {
        (0..self.classes.len())
            .filter(|&i| self.classes[i] != 0)
            .map(|i| self.pos(i))
            .collect()
    }

    pub fn class_positions(&self, class_id: u8) -> Vec<GridPos> {
        (0..self.classes.len())
            .filter(|&i| self.classes[i] & (1 << class_id) != 0)
            .map(|i| self.pos(i))
            .collect()
    }

    /// Neurons encoding at least two classes.
    pub fn overlapped_neurons(&self) -> usize {
        self.classes.iter().filter(|m| m.count_ones() >= 2).count()
    }

    pub fn max_classes_per_neuron(&self) -> u32 {
        self.classes.iter().map(|m| m.count_ones()).max().unwrap_or(0)
    }

    /// True when every class owns a connected single-class group of at least
    /// `min_group` encoders.
    pub fn has_class_structure(&self, min_group: usize) -> bool {
        let (clusters, _) = extract_clusters(self, 1);
        (0..self.num_classes).all(|k| {
            clusters
                .iter()
                .any(|c| c.class_mask == 1 << k && c.size() >= min_group)
        })
    }
}

/// Mark every neuron whose activation for class `k` is within `theta` of the winner's.
///
/// With `a_i = exp(−d_i² / 2σ²)`, the test `a_i ≥ θ·a*` is evaluated in its
/// equivalent log form `d_i² − d*² ≤ −2σ²·ln θ`, which does not underflow
/// for distant maps.
pub fn detect_encoders(map: &FeatureMap, stimuli: &StimulusSet, theta: f64, sigma_act: f64) -> Result<EncoderField> {
    if !(theta > 0.0 && theta <= 1.0) || !(sigma_act > 0.0) {
        return Err(SomError::Contract(format!(
            "encoder detection needs 0 < theta <= 1 and sigma_act > 0 (got {theta}, {sigma_act})"
        )));
    }
    if stimuli.dim() != map.input_dim() {
        return Err(SomError::Contract(format!(
            "stimuli are {}-D, map is {}-D",
            stimuli.dim(),
            map.input_dim()
        )));
    }
    let tolerance = -2.0 * sigma_act * sigma_act * theta.ln();
    let mut classes = vec![0u32; map.len()];
    let mut dist = vec![0.0; map.len()];
    for s in stimuli.patterns() {
        let mut best = f64::INFINITY;
        let mut winner = 0;
        for (i, d) in dist.iter_mut().enumerate() {
            *d = map.dist2_to(i, &s.values);
            if *d < best {
                best = *d;
                winner = i;
            }
        }
        for (i, d) in dist.iter().enumerate() {
            if i == winner || d - best <= tolerance {
                classes[i] |= 1 << s.class_id;
            }
        }
    }
    let mut field = EncoderField::from_masks(map.width(), map.height(), stimuli.num_classes(), classes)?;
    field.sigma_act = sigma_act;
    field.theta = theta;
    Ok(field)
}

/// A connected group of encoding neurons (8-adjacency).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Members in row-major order.
    pub members: Vec<GridPos>,
    /// Union of the members' class masks.
    pub class_mask: u32,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn class_count(&self) -> u32 {
        self.class_mask.count_ones()
    }
}

/// 8-connected components of the encoder set, split by `min_cluster_size`
/// into clusters and sub-threshold fragments (the isolated encoders).
pub fn extract_clusters(field: &EncoderField, min_cluster_size: usize) -> (Vec<Cluster>, Vec<Cluster>) {
    let (w, h) = (field.width, field.height);
    let mut seen = vec![false; w * h];
    let mut clusters = Vec::new();
    let mut fragments = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || field.classes[start] == 0 {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        let mut mask = 0;
        while let Some(i) = queue.pop_front() {
            members.push(i);
            mask |= field.classes[i];
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && field.classes[j] != 0 {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        members.sort_unstable();
        let c = Cluster {
            members: members.into_iter().map(|i| field.pos(i)).collect(),
            class_mask: mask,
        };
        if c.size() >= min_cluster_size {
            clusters.push(c);
        } else {
            fragments.push(c);
        }
    }
    (clusters, fragments)
}

/// Categorical final state, in the vocabulary of the map descriptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum StateTag {
    WellOrganized4,
    ClustersWithIsolated { n: usize },
    TendencyTo { n: usize },
    Clusters { n: usize, overlapping: bool },
    SingleClusterOverlapping,
    FewEncoders { k: usize, overlapping: bool },
    SingleEncoder,
    AbsenceOfClusters,
    Patternless,
}

impl StateTag {
    /// Well-organized, with or without a few isolated neurons.
    pub fn is_normal(&self) -> bool {
        matches!(self, StateTag::WellOrganized4 | StateTag::ClustersWithIsolated { n: 4 })
    }
}

impl fmt::Display for StateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ov = |o: &bool| if *o { ",overlap" } else { "" };
        match self {
            StateTag::WellOrganized4 => write!(f, "WellOrganized4"),
            StateTag::ClustersWithIsolated { n } => write!(f, "ClustersWithIsolated({n})"),
            StateTag::TendencyTo { n } => write!(f, "TendencyTo({n})"),
            StateTag::Clusters { n, overlapping } => write!(f, "Clusters({n}{})", ov(overlapping)),
            StateTag::SingleClusterOverlapping => write!(f, "SingleClusterOverlapping"),
            StateTag::FewEncoders { k, overlapping } => write!(f, "FewEncoders({k}{})", ov(overlapping)),
            StateTag::SingleEncoder => write!(f, "SingleEncoder"),
            StateTag::AbsenceOfClusters => write!(f, "AbsenceOfClusters"),
            StateTag::Patternless => write!(f, "Patternless"),
        }
    }
}

/// Counts backing a category.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryDetail {
    pub encoders: usize,
    pub clusters: usize,
    pub isolated: usize,
    pub overlapped_neurons: usize,
    pub max_classes_per_neuron: u32,
    /// Size and class count of the largest cluster, or of the largest
    /// fragment group when there are no clusters.
    pub dominant_size: usize,
    pub dominant_classes: u32,
    pub dominant_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapStateCategory {
    pub tag: StateTag,
    pub detail: CategoryDetail,
}

/// Group fragments with identical class masks whose bounding boxes lie
/// within `gap` cells of each other. Returns (mask, total size) per group.
fn fragment_groups(fragments: &[Cluster], gap: usize) -> Vec<(u32, usize)> {
    let n = fragments.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let near = |a: &Cluster, b: &Cluster| {
        a.members
            .iter()
            .any(|p| b.members.iter().any(|q| p.x.abs_diff(q.x) <= gap + 1 && p.y.abs_diff(q.y) <= gap + 1))
    };
    for i in 0..n {
        for j in i + 1..n {
            if fragments[i].class_mask == fragments[j].class_mask && near(&fragments[i], &fragments[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[rj] = ri;
            }
        }
    }
    let mut groups: Vec<(usize, u32, usize)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.2 += fragments[i].size(),
            None => groups.push((r, fragments[i].class_mask, fragments[i].size())),
        }
    }
    groups.into_iter().map(|(_, m, s)| (m, s)).collect()
}

/// First-match decision cascade from encoder field and components to a category.
pub fn classify_state(
    field: &EncoderField,
    clusters: &[Cluster],
    fragments: &[Cluster],
    cfg: &AnalysisConfig,
) -> MapStateCategory {
    let encoders = field.encoder_count();
    let isolated: usize = fragments.iter().map(Cluster::size).sum();
    let overlapped = field.overlapped_neurons();
    // A neuron or a whole cluster answering to more than one class.
    let overlapping = overlapped > 0 || clusters.iter().any(|c| c.class_count() >= 2);
    let area = (field.width * field.height) as f64;
    let groups = fragment_groups(fragments, cfg.tendency_gap);

    let (dominant_size, dominant_classes) = match clusters.iter().max_by_key(|c| c.size()) {
        Some(c) => (c.size(), c.class_count()),
        None => groups
            .iter()
            .max_by_key(|g| g.1)
            .map_or((0, 0), |g| (g.1, g.0.count_ones())),
    };
    let detail = CategoryDetail {
        encoders,
        clusters: clusters.len(),
        isolated,
        overlapped_neurons: overlapped,
        max_classes_per_neuron: field.max_classes_per_neuron(),
        dominant_size,
        dominant_classes,
        dominant_fraction: dominant_size as f64 / area,
    };

    let distinct_single_classes = || {
        let mut seen = 0u32;
        clusters.iter().all(|c| {
            let ok = c.class_count() == 1 && seen & c.class_mask == 0;
            seen |= c.class_mask;
            ok
        })
    };

    let n = clusters.len();
    let tag = if encoders == 0 {
        StateTag::Patternless
    } else if encoders == 1 {
        StateTag::SingleEncoder
    } else if encoders <= cfg.few_encoder_max && n == 0 {
        StateTag::FewEncoders {
            k: encoders,
            overlapping,
        }
    } else if n == 4 && !overlapping && isolated == 0 && distinct_single_classes() {
        StateTag::WellOrganized4
    } else if n == 4 && !overlapping && distinct_single_classes() {
        StateTag::ClustersWithIsolated { n: 4 }
    } else if n == 1 && overlapping {
        StateTag::SingleClusterOverlapping
    } else if n >= 1 {
        StateTag::Clusters { n, overlapping }
    } else {
        let mut masks: Vec<u32> = groups.iter().map(|g| g.0).collect();
        masks.sort_unstable();
        masks.dedup();
        if !groups.is_empty() && masks.len() == groups.len() {
            StateTag::TendencyTo { n: groups.len() }
        } else {
            StateTag::AbsenceOfClusters
        }
    };
    MapStateCategory { tag, detail }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PutativeSymptom {
    NormalCognition,
    MildCognitiveDamageMildRigidity,
    MentalRigidity,
    MarkedMentalRigidity,
    ExpressiveCognitiveDamage,
    ExtremeCognitiveDamage,
}

impl fmt::Display for PutativeSymptom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PutativeSymptom::NormalCognition => "normal cognition",
            PutativeSymptom::MildCognitiveDamageMildRigidity => "mild cognitive damage / mild mental rigidity",
            PutativeSymptom::MentalRigidity => "mental rigidity",
            PutativeSymptom::MarkedMentalRigidity => "marked mental rigidity",
            PutativeSymptom::ExpressiveCognitiveDamage => "expressive cognitive damage",
            PutativeSymptom::ExtremeCognitiveDamage => "extreme cognitive damage",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomAssessment {
    pub symptom: PutativeSymptom,
    /// The category matched no table row exactly; the nearest rule was used.
    pub extrapolated: bool,
}

/// Putative symptom for a frontal-map category.
pub fn symptom_of(category: &MapStateCategory, large_cluster_fraction: f64) -> SymptomAssessment {
    use PutativeSymptom::*;
    let d = &category.detail;
    let enlarged = d.dominant_fraction >= large_cluster_fraction;
    let exact = |symptom| SymptomAssessment {
        symptom,
        extrapolated: false,
    };
    let near = |symptom| SymptomAssessment {
        symptom,
        extrapolated: true,
    };
    match category.tag {
        StateTag::WellOrganized4 | StateTag::ClustersWithIsolated { n: 4 } => exact(NormalCognition),
        StateTag::Clusters { n: 3, .. } if d.dominant_classes == 2 => {
            if enlarged {
                exact(MentalRigidity)
            } else {
                exact(MildCognitiveDamageMildRigidity)
            }
        }
        StateTag::Clusters { n: 2, .. } if d.dominant_classes == 3 && enlarged => exact(MentalRigidity),
        StateTag::SingleClusterOverlapping if d.dominant_classes == 4 => exact(MarkedMentalRigidity),
        StateTag::TendencyTo { n: 2 } if d.dominant_classes == 3 => exact(MarkedMentalRigidity),
        StateTag::TendencyTo { n: 3 | 4 } if d.dominant_classes >= 2 || d.overlapped_neurons > 0 => {
            exact(ExpressiveCognitiveDamage)
        }
        StateTag::SingleEncoder if d.max_classes_per_neuron == 4 => exact(ExtremeCognitiveDamage),
        StateTag::FewEncoders { k: 2, .. } if d.max_classes_per_neuron == 3 => exact(ExtremeCognitiveDamage),

        StateTag::ClustersWithIsolated { .. } => near(MildCognitiveDamageMildRigidity),
        StateTag::Clusters { n, overlapping } => match n {
            1 => near(MarkedMentalRigidity),
            2 => near(MentalRigidity),
            3 if enlarged => near(MentalRigidity),
            _ if overlapping || n != 4 => near(MildCognitiveDamageMildRigidity),
            _ => near(NormalCognition),
        },
        StateTag::SingleClusterOverlapping => near(MarkedMentalRigidity),
        StateTag::TendencyTo { n } if n <= 2 => near(MarkedMentalRigidity),
        StateTag::TendencyTo { .. } | StateTag::AbsenceOfClusters => near(ExpressiveCognitiveDamage),
        StateTag::SingleEncoder | StateTag::FewEncoders { .. } | StateTag::Patternless => {
            near(ExtremeCognitiveDamage)
        }
    }
}

/// Cluster count plus the class sets of the clusters, in a canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSignature {
    pub clusters: usize,
    pub class_sets: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub overlapped_neurons: usize,
    pub max_classes_per_neuron: u32,
}

/// Everything the analysis knows about one trained map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub field: EncoderField,
    pub clusters: Vec<Cluster>,
    /// Connected encoder groups below `min_cluster_size`.
    pub fragments: Vec<Cluster>,
    pub category: MapStateCategory,
    pub stability: Option<StabilityVerdict>,
    pub overlap: OverlapStats,
    pub dominant_fraction: f64,
    pub symptom: Option<SymptomAssessment>,
    pub thresholds: AnalysisConfig,
}

impl MapReport {
    pub fn encoder_count(&self) -> usize {
        self.field.encoder_count()
    }

    pub fn isolated_count(&self) -> usize {
        self.fragments.iter().map(Cluster::size).sum()
    }

    pub fn signature(&self) -> ClusterSignature {
        signature_of(&self.clusters)
    }
}

fn signature_of(clusters: &[Cluster]) -> ClusterSignature {
    let mut class_sets: Vec<u32> = clusters.iter().map(|c| c.class_mask).collect();
    class_sets.sort_unstable();
    ClusterSignature {
        clusters: clusters.len(),
        class_sets,
    }
}

/// Cluster signature of a map under `cfg` (used for stability checks).
pub fn cluster_signature(map: &FeatureMap, stimuli: &StimulusSet, cfg: &AnalysisConfig) -> Result<ClusterSignature> {
    let field = detect_encoders(map, stimuli, cfg.theta, cfg.sigma_act)?;
    let (clusters, _) = extract_clusters(&field, cfg.min_cluster_size);
    Ok(signature_of(&clusters))
}

/// Full readout of `map` against the stimuli it was trained on.
pub fn analyze_map(
    map: &FeatureMap,
    stimuli: &StimulusSet,
    trace: Option<&TrainingTrace>,
    cfg: &AnalysisConfig,
) -> Result<MapReport> {
    cfg.validate()?;
    let field = detect_encoders(map, stimuli, cfg.theta, cfg.sigma_act)?;
    let (clusters, fragments) = extract_clusters(&field, cfg.min_cluster_size);
    let category = classify_state(&field, &clusters, &fragments, cfg);
    let stability = match trace {
        Some(t) if t.snapshots.len() >= 3 => Some(stability_verdict(
            t,
            |m| cluster_signature(m, stimuli, cfg).ok(),
            cfg.stability_epsilon,
        )?),
        _ => None,
    };
    Ok(MapReport {
        overlap: OverlapStats {
            overlapped_neurons: field.overlapped_neurons(),
            max_classes_per_neuron: field.max_classes_per_neuron(),
        },
        dominant_fraction: category.detail.dominant_fraction,
        field,
        clusters,
        fragments,
        category,
        stability,
        symptom: None,
        thresholds: cfg.clone(),
    })
}

/// Result of fitting `sigma_act` to a target encoder count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma_act: f64,
    pub mean_encoders: f64,
    /// `(sigma_act, mean encoder count)` for every probe, in probe order.
    pub curve: Vec<(f64, f64)>,
}

/// Mean encoder count across `maps` for one activation scale.
pub fn mean_encoder_count(maps: &[(FeatureMap, StimulusSet)], theta: f64, sigma_act: f64) -> Result<f64> {
    let mut total = 0usize;
    for (m, s) in maps {
        total += detect_encoders(m, s, theta, sigma_act)?.encoder_count();
    }
    Ok(total as f64 / maps.len().max(1) as f64)
}

/// Log-space bisection on `sigma_act` until the mean encoder count over
/// `maps` hits the middle of `target` (and at least lands inside it).
pub fn calibrate_on_maps(
    maps: &[(FeatureMap, StimulusSet)],
    theta: f64,
    target: (f64, f64),
    bracket: (f64, f64),
) -> Result<Calibration> {
    if maps.is_empty() {
        return Err(SomError::Calibration("no maps to calibrate on".into()));
    }
    let goal = 0.5 * (target.0 + target.1);
    let mut curve = Vec::new();
    let probe = |s: f64, curve: &mut Vec<(f64, f64)>| -> Result<f64> {
        let c = mean_encoder_count(maps, theta, s)?;
        curve.push((s, c));
        Ok(c)
    };
    let (mut lo, mut hi) = (bracket.0.ln(), bracket.1.ln());
    let c_lo = probe(bracket.0, &mut curve)?;
    let c_hi = probe(bracket.1, &mut curve)?;
    if c_lo > target.1 || c_hi < target.0 {
        return Err(SomError::Calibration(format!(
            "bracket [{}, {}] gives mean counts [{c_lo}, {c_hi}], target [{}, {}]; curve {curve:?}",
            bracket.0, bracket.1, target.0, target.1
        )));
    }
    let mut best = (f64::NAN, f64::INFINITY);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let s = mid.exp();
        let c = probe(s, &mut curve)?;
        if (c - goal).abs() < (best.1 - goal).abs() {
            best = (s, c);
        }
        if (c - goal).abs() < 0.5 || hi - lo < 1e-9 {
            break;
        }
        if c < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(target.0..=target.1).contains(&best.1) {
        return Err(SomError::Calibration(format!(
            "no sigma_act reached the target range; curve {curve:?}"
        )));
    }
    Ok(Calibration {
        sigma_act: best.0,
        mean_encoders: best.1,
        curve,
    })
}

/// Train one default single map per seed and fit `sigma_act` so that
/// their mean encoder count lands in `target`.
pub fn calibrate_activation(seeds: &[u64], theta: f64, target: (f64, f64)) -> Result<Calibration> {
    let mut template = SingleMapSpec::default();
    template.analysis.theta = theta;
    calibrate_with(&template, seeds, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::DimGroup;
    use crate::stimuli::{Provenance, Stimulus};

    fn field_from_grid(rows: &[&str]) -> EncoderField {
        let h = rows.len();
        let w = rows[0].len();
        let masks = rows
            .iter()
            .flat_map(|r| {
                r.chars().map(|c| match c {
                    '.' => 0,
                    '*' => 0b11,
                    d => 1 << d.to_digit(10).unwrap(),
                })
            })
            .collect();
        EncoderField::from_masks(w, h, 4, masks).unwrap()
    }

    fn classify(rows: &[&str]) -> MapStateCategory {
        let f = field_from_grid(rows);
        let cfg = AnalysisConfig::default();
        let (c, i) = extract_clusters(&f, cfg.min_cluster_size);
        classify_state(&f, &c, &i, &cfg)
    }

    #[test]
    fn theta_one_keeps_only_winners() {
        let g = vec![DimGroup::new("g", vec![0, 1])];
        let m = FeatureMap::from_weights(3, 1, 2, vec![0.0, 0.0, 1.0, 1.0, 5.0, 5.0], g).unwrap();
        let s = StimulusSet::new(
            vec![Stimulus::new(vec![0.9, 0.9], 0), Stimulus::new(vec![4.0, 4.0], 1)],
            vec![(0.0, 20.0); 2],
            Provenance::Primary,
        )
        .unwrap();
        let f = detect_encoders(&m, &s, 1.0, 3.0).unwrap();
        assert_eq!(f.masks(), &[0, 1, 2]);
        let all = detect_encoders(&m, &s, 1e-300, 3.0).unwrap();
        assert_eq!(all.masks(), &[3, 3, 3]);
    }

    #[test]
    fn empty_field_has_no_components() {
        let f = EncoderField::from_masks(5, 5, 4, vec![0; 25]).unwrap();
        let (c, i) = extract_clusters(&f, 4);
        assert!(c.is_empty() && i.is_empty());
        let cat = classify_state(&f, &c, &i, &AnalysisConfig::default());
        assert_eq!(cat.tag, StateTag::Patternless);
    }

    #[test]
    fn solid_block_is_one_cluster() {
        let mut masks = vec![0u32; 100];
        for y in 2..7 {
            for x in 3..8 {
                masks[y * 10 + x] = 1;
            }
        }
        let f = EncoderField::from_masks(10, 10, 4, masks).unwrap();
        let (c, i) = extract_clusters(&f, 4);
        assert_eq!(c.len(), 1);
        assert!(i.is_empty());
        assert_eq!(c[0].size(), 25);
        assert_eq!(c[0].class_mask, 1);
    }

    #[test]
    fn diagonal_neighbors_merge() {
        let f = field_from_grid(&["0...", ".0..", "..0.", "...0"]);
        let (c, _) = extract_clusters(&f, 1);
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn four_disjoint_blocks_are_well_organized() {
        let cat = classify(&[
            "00....11",
            "00....11",
            "........",
            "........",
            "22....33",
            "22....33",
        ]);
        assert_eq!(cat.tag, StateTag::WellOrganized4);
        let cat = classify(&[
            "00....11",
            "00....11",
            "......1.",
            "........",
            "22....33",
            "22....33",
        ]);
        assert_eq!(cat.tag, StateTag::WellOrganized4);
    }

    #[test]
    fn isolated_neurons_with_four_clusters() {
        let cat = classify(&[
            "00....11",
            "00....11",
            "........",
            "...0....",
            "22....33",
            "22....33",
        ]);
        assert_eq!(cat.tag, StateTag::ClustersWithIsolated { n: 4 });
        assert_eq!(cat.detail.isolated, 1);
    }

    #[test]
    fn one_neuron_for_everything() {
        let mut masks = vec![0u32; 400];
        masks[57] = 0b1111;
        let f = EncoderField::from_masks(20, 20, 4, masks).unwrap();
        let (c, i) = extract_clusters(&f, 4);
        let cat = classify_state(&f, &c, &i, &AnalysisConfig::default());
        assert_eq!(cat.tag, StateTag::SingleEncoder);
        assert_eq!(cat.detail.max_classes_per_neuron, 4);
        assert_eq!(
            symptom_of(&cat, 0.25),
            SymptomAssessment {
                symptom: PutativeSymptom::ExtremeCognitiveDamage,
                extrapolated: false
            }
        );
    }

    #[test]
    fn enlarged_three_class_cluster() {
        // 184-neuron cluster with classes {0,1,2} (one neuron carries all three) and a small class-3 cluster.
        let mut masks = vec![0u32; 400];
        for i in 0..184 {
            masks[i] = 1 << (i % 3);
        }
        masks[0] = 0b111;
        for y in 16..20 {
            for x in 16..20 {
                masks[y * 20 + x] = 0b1000;
            }
        }
        let f = EncoderField::from_masks(20, 20, 4, masks).unwrap();
        let cfg = AnalysisConfig::default();
        let (c, i) = extract_clusters(&f, cfg.min_cluster_size);
        let cat = classify_state(&f, &c, &i, &cfg);
        assert_eq!(cat.tag, StateTag::Clusters { n: 2, overlapping: true });
        assert!((cat.detail.dominant_fraction - 184.0 / 400.0).abs() < 1e-15);
        assert_eq!(symptom_of(&cat, cfg.large_cluster_fraction).symptom, PutativeSymptom::MentalRigidity);
    }

    #[test]
    fn tendency_groups_fragments_by_class() {
        let cat = classify(&[
            "0.0........1.1",
            "..............",
            "0.0........1.1",
            "..............",
            "..............",
            "2.2...........",
        ]);
        assert_eq!(cat.tag, StateTag::TendencyTo { n: 3 });
        let scattered = classify(&[
            "0............0",
            "..............",
            "......0.......",
            "..............",
            "0.............",
            "1.1.1.1.1.1.1.",
        ]);
        assert_eq!(scattered.tag, StateTag::AbsenceOfClusters);
    }

    #[test]
    fn few_encoders() {
        let cat = classify(&["*.....", "......", "...1.."]);
        assert_eq!(cat.tag, StateTag::FewEncoders { k: 2, overlapping: true });
    }

    #[test]
    fn touching_classes_make_an_overlapping_cluster() {
        let cat = classify(&["0011....", "0011....", "........", "22....33", "22....33"]);
        assert_eq!(cat.detail.overlapped_neurons, 0);
        assert_eq!(cat.tag, StateTag::Clusters { n: 3, overlapping: true });
    }

    #[test]
    fn class_structure_needs_a_group_per_class() {
        let f = field_from_grid(&["00....11", "00....11", "........", "22....33", "22....33"]);
        assert!(f.has_class_structure(4));
        assert!(!f.has_class_structure(5));
        let f = field_from_grid(&["00....11", "00....11", "........", "22....3.", "22......"]);
        assert!(!f.has_class_structure(4));
    }

    #[test]
    fn symptom_table_rows() {
        let well = classify(&["00....11", "00....11", "........", "22....33", "22....33"]);
        assert_eq!(symptom_of(&well, 0.25).symptom, PutativeSymptom::NormalCognition);
        assert!(!symptom_of(&well, 0.25).extrapolated);
    }
}
