//! The SOM training kernel: winner selection, Gaussian neighborhood, the
//! weight update with its excitatory pathology modifiers, and trajectory capture.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SomError};
use crate::seed::rng_from_seed;
use crate::stimuli::StimulusSet;

/// Mean per-neuron displacement (input units) below which a trajectory may be called stable.
pub const STABILITY_EPSILON: f64 = 0.05;

/// Position of a neuron on the map grid. `x` is the column, `y` the row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPos {
    pub x: usize,
    pub y: usize,
}

impl GridPos {
    pub fn new(x: usize, y: usize) -> Self {
        GridPos { x, y }
    }

    /// Squared Euclidean grid distance.
    pub fn dist2(self, other: GridPos) -> usize {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        dx * dx + dy * dy
    }
}

/// A named subset of weight dimensions that share one learning rate
/// (one afferent projection).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimGroup {
    pub name: String,
    pub dims: Vec<usize>,
}

impl DimGroup {
    pub fn new(name: impl Into<String>, dims: impl Into<Vec<usize>>) -> Self {
        DimGroup {
            name: name.into(),
            dims: dims.into(),
        }
    }
}

/// A `width × height` sheet of neurons, each with an `input_dim` weight vector.
///
/// Weights are stored neuron-major in row-major neuron order: neuron `i`
/// occupies `weights[i * input_dim .. (i + 1) * input_dim]` and sits at
/// `(x, y) = (i % width, i / width)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    input_dim: usize,
    weights: Vec<f64>,
    dim_groups: Vec<DimGroup>,
}

impl FeatureMap {
    /// Build a map from explicit weights; `weights` is neuron-major.
    pub fn from_weights(
        width: usize,
        height: usize,
        input_dim: usize,
        weights: Vec<f64>,
        dim_groups: Vec<DimGroup>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || input_dim == 0 {
            return Err(SomError::Config(format!(
                "map extent must be positive (got {width}x{height}, dim {input_dim})"
            )));
        }
        if weights.len() != width * height * input_dim {
            return Err(SomError::Config(format!(
                "expected {} weight components, got {}",
                width * height * input_dim,
                weights.len()
            )));
        }
        validate_groups(&dim_groups, input_dim)?;
        Ok(FeatureMap {
            width,
            height,
            input_dim,
            weights,
            dim_groups,
        })
    }

    /// Replace the dimension partition (e.g. split an association map's
    /// input into one group per afferent projection).
    pub fn with_dim_groups(mut self, dim_groups: Vec<DimGroup>) -> Result<Self> {
        validate_groups(&dim_groups, self.input_dim)?;
        self.dim_groups = dim_groups;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim_groups(&self) -> &[DimGroup] {
        &self.dim_groups
    }

    /// All weight components, neuron-major.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> &[f64] {
        &self.weights[index * self.input_dim..(index + 1) * self.input_dim]
    }

    pub fn weight_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.weights[index * self.input_dim..(index + 1) * self.input_dim]
    }

    pub fn position(&self, index: usize) -> GridPos {
        GridPos::new(index % self.width, index / self.width)
    }

    pub fn index_of(&self, pos: GridPos) -> usize {
        pos.y * self.width + pos.x
    }

    /// Squared Euclidean distance between `x` and neuron `index`'s weights.
    pub fn dist2_to(&self, index: usize, x: &[f64]) -> f64 {
        sq_dist(self.weight(index), x)
    }

    /// Row-major index of the best-matching neuron. Ties go to the lowest index.
    pub(crate) fn winner_index(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, w) in self.weights.chunks_exact(self.input_dim).enumerate() {
            let d = sq_dist(w, x);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Per-dimension learning rate vector from per-group rates.
    fn rates_by_dim(&self, group_rates: &[f64]) -> Vec<f64> {
        let mut rates = vec![0.0; self.input_dim];
        for (group, &rate) in self.dim_groups.iter().zip(group_rates) {
            for &d in &group.dims {
                rates[d] = rate;
            }
        }
        rates
    }

    /// Mean Euclidean distance between corresponding neurons of two maps of equal shape.
    pub fn mean_displacement(&self, other: &FeatureMap) -> f64 {
        let total: f64 = self
            .weights
            .chunks_exact(self.input_dim)
            .zip(other.weights.chunks_exact(other.input_dim))
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .sum();
        total / self.len() as f64
    }
}

fn validate_groups(groups: &[DimGroup], input_dim: usize) -> Result<()> {
    let mut seen = vec![false; input_dim];
    for g in groups {
        for &d in &g.dims {
            if d >= input_dim {
                return Err(SomError::Config(format!(
                    "dim group {:?} names dimension {d} >= input_dim {input_dim}",
                    g.name
                )));
            }
            if seen[d] {
                return Err(SomError::Config(format!(
                    "dimension {d} appears in more than one dim group"
                )));
            }
            seen[d] = true;
        }
    }
    if let Some(d) = seen.iter().position(|s| !s) {
        return Err(SomError::Config(format!(
            "dimension {d} is not covered by any dim group"
        )));
    }
    Ok(())
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Map training parameters (defaults are the reference configuration).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Learning rate per dim group, in the map's group order.
    pub learning_rates: Vec<f64>,
    pub sigma: f64,
    pub steps: usize,
    pub snapshot_interval: usize,
    pub rng_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rates: vec![0.5],
            sigma: 2.0,
            steps: 1400,
            snapshot_interval: 100,
            rng_seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rates.is_empty() || self.learning_rates.iter().any(|r| !(*r > 0.0)) {
            return Err(SomError::Config(format!(
                "learning rates must be positive, got {:?}",
                self.learning_rates
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(SomError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.snapshot_interval == 0 {
            return Err(SomError::Config("snapshot_interval must be >= 1".into()));
        }
        Ok(())
    }

    fn validate_for(&self, map: &FeatureMap) -> Result<()> {
        self.validate()?;
        if self.learning_rates.len() != map.dim_groups.len() {
            return Err(SomError::Config(format!(
                "{} learning rates for {} dim groups",
                self.learning_rates.len(),
                map.dim_groups.len()
            )));
        }
        Ok(())
    }
}

/// How the excitatory imbalance modifies the update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PathologyMode {
    #[default]
    None,
    /// `w += Ω·Δw` for the winner's neighbors.
    OverStrengthen { omega: f64 },
    /// `φ` replaced by `φ / (C − φ)`.
    IncreaseFactor { c: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathologySpec {
    pub mode: PathologyMode,
    /// Replaces the training sigma (excitatory area enlargement).
    pub sigma_override: Option<f64>,
    /// Also scale the winner's own update by Ω.
    #[serde(default)]
    pub omega_includes_winner: bool,
}

impl PathologySpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn over_strengthen(omega: f64) -> Self {
        PathologySpec {
            mode: PathologyMode::OverStrengthen { omega },
            ..Self::default()
        }
    }

    pub fn increase_factor(c: f64) -> Self {
        PathologySpec {
            mode: PathologyMode::IncreaseFactor { c },
            ..Self::default()
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma_override = Some(sigma);
        self
    }

    pub fn is_none(&self) -> bool {
        self.mode == PathologyMode::None && self.sigma_override.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            PathologyMode::OverStrengthen { omega } if !(omega > 1.0) => {
                return Err(SomError::Config(format!("omega must exceed 1, got {omega}")))
            }
            PathologyMode::IncreaseFactor { c } if !(c > 1.0) => {
                return Err(SomError::Config(format!("C must exceed 1, got {c}")))
            }
            _ => {}
        }
        if let Some(s) = self.sigma_override {
            if !(s > 0.0) {
                return Err(SomError::Config(format!("sigma override must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn effective_sigma(&self, cfg: &TrainingConfig) -> f64 {
        self.sigma_override.unwrap_or(cfg.sigma)
    }
}

/// Gaussian neighborhood `exp(−‖a − b‖² / 2σ²)` on the grid.
pub fn neighborhood_weight(a: GridPos, b: GridPos, sigma: f64) -> f64 {
    gaussian(a.dist2(b), sigma)
}

#[inline]
fn gaussian(dist2: usize, sigma: f64) -> f64 {
    (-(dist2 as f64) / (2.0 * sigma * sigma)).exp()
}

/// `φ` for every integer squared grid distance the map can produce.
struct NeighborhoodTable {
    phi: Vec<f64>,
}

impl NeighborhoodTable {
    fn new(map: &FeatureMap, sigma: f64) -> Self {
        let max = (map.width - 1).pow(2) + (map.height - 1).pow(2);
        NeighborhoodTable {
            phi: (0..=max).map(|d2| gaussian(d2, sigma)).collect(),
        }
    }
}

/// Uniform random initialization within per-dimension `(lo, hi)` bounds.
pub fn init_map(
    width: usize,
    height: usize,
    input_dim: usize,
    bounds: &[(f64, f64)],
    rng_seed: u64,
) -> Result<FeatureMap> {
    if bounds.len() != input_dim {
        return Err(SomError::Config(format!(
            "{} bounds for input_dim {input_dim}",
            bounds.len()
        )));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo < hi)) {
        return Err(SomError::Config(format!("invalid bounds ({lo}, {hi})")));
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut weights = Vec::with_capacity(width * height * input_dim);
    for _ in 0..width * height {
        for &(lo, hi) in bounds {
            weights.push(rng.random_range(lo..hi));
        }
    }
    FeatureMap::from_weights(
        width,
        height,
        input_dim,
        weights,
        vec![DimGroup::new("input", (0..input_dim).collect::<Vec<_>>())],
    )
}

/// Best-matching neuron for `x` (minimal squared distance, lowest index on ties).
pub fn find_winner(map: &FeatureMap, x: &[f64]) -> Result<GridPos> {
    check_dim(map, x)?;
    Ok(map.position(map.winner_index(x)))
}

fn check_dim(map: &FeatureMap, x: &[f64]) -> Result<()> {
    if x.len() != map.input_dim {
        return Err(SomError::Contract(format!(
            "stimulus has {} components, map expects {}",
            x.len(),
            map.input_dim
        )));
    }
    Ok(())
}

/// One competitive-cooperative step for stimulus `x`.
pub fn update_step(
    map: &mut FeatureMap,
    x: &[f64],
    cfg: &TrainingConfig,
    pathology: &PathologySpec,
) -> Result<()> {
    check_dim(map, x)?;
    cfg.validate_for(map)?;
    pathology.validate()?;
    let table = NeighborhoodTable::new(map, pathology.effective_sigma(cfg));
    let rates = map.rates_by_dim(&cfg.learning_rates);
    apply_update(map, x, &rates, &table, pathology)
}

fn apply_update(
    map: &mut FeatureMap,
    x: &[f64],
    rates: &[f64],
    table: &NeighborhoodTable,
    pathology: &PathologySpec,
) -> Result<()> {
    let winner = map.winner_index(x);
    let winner_pos = map.position(winner);
    let dim = map.input_dim;
    for i in 0..map.len() {
        let phi = table.phi[map.position(i).dist2(winner_pos)];
        let (strength, scale) = match pathology.mode {
            PathologyMode::None => (phi, None),
            PathologyMode::OverStrengthen { omega } => {
                if i == winner && !pathology.omega_includes_winner {
                    (phi, None)
                } else {
                    (phi, Some(omega))
                }
            }
            PathologyMode::IncreaseFactor { c } => {
                if c <= phi {
                    return Err(SomError::IncreaseFactor { c, phi });
                }
                (phi / (c - phi), None)
            }
        };
        let w = &mut map.weights[i * dim..(i + 1) * dim];
        for d in 0..dim {
            let delta = rates[d] * strength * (x[d] - w[d]);
            let next = match scale {
                None => w[d] + delta,
                Some(omega) => w[d] + omega * delta,
            };
            if !next.is_finite() {
                return Err(SomError::NonFinite);
            }
            w[d] = next;
        }
    }
    Ok(())
}

/// Snapshot of the full weight state at a given step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub map: FeatureMap,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub snapshots: Vec<Snapshot>,
    /// Mean per-neuron displacement from the previous snapshot (0 for the first).
    pub mean_step_displacement: Vec<f64>,
}

impl TrainingTrace {
    fn record(&mut self, step: usize, map: &FeatureMap) {
        let displacement = self
            .snapshots
            .last()
            .map_or(0.0, |prev| prev.map.mean_displacement(map));
        self.snapshots.push(Snapshot {
            step,
            map: map.clone(),
        });
        self.mean_step_displacement.push(displacement);
    }
}

/// Train for `cfg.steps` iterations, drawing one pattern uniformly per step.
///
/// Snapshots are taken at step 0, every `snapshot_interval` steps and at the final step.
pub fn train(
    mut map: FeatureMap,
    stimuli: &StimulusSet,
    cfg: &TrainingConfig,
    pathology: &PathologySpec,
) -> Result<(FeatureMap, TrainingTrace)> {
    cfg.validate_for(&map)?;
    pathology.validate()?;
    if stimuli.is_empty() {
        return Err(SomError::Config("empty stimulus set".into()));
    }
    for s in stimuli.patterns() {
        check_dim(&map, &s.values)?;
    }
    let table = NeighborhoodTable::new(&map, pathology.effective_sigma(cfg));
    let rates = map.rates_by_dim(&cfg.learning_rates);
    let mut rng = rng_from_seed(cfg.rng_seed);
    let mut trace = TrainingTrace::default();
    trace.record(0, &map);
    for step in 1..=cfg.steps {
        let k = rng.random_range(0..stimuli.len());
        apply_update(&mut map, &stimuli.patterns()[k].values, &rates, &table, pathology)?;
        if step % cfg.snapshot_interval == 0 || step == cfg.steps {
            trace.record(step, &map);
        }
    }
    Ok((map, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    Unstable,
}

/// Stable iff `signature` agrees on the final three snapshots and the mean
/// displacement between the last two is below `epsilon`.
pub fn stability_verdict<S, F>(trace: &TrainingTrace, signature: F, epsilon: f64) -> Result<StabilityVerdict>
where
    S: PartialEq,
    F: Fn(&FeatureMap) -> S,
{
    let n = trace.snapshots.len();
    if n < 3 {
        return Err(SomError::Contract(format!(
            "stability needs at least 3 snapshots, trace has {n}"
        )));
    }
    let tail = &trace.snapshots[n - 3..];
    let last = signature(&tail[2].map);
    let consistent = signature(&tail[0].map) == last && signature(&tail[1].map) == last;
    let settled = tail[1].map.mean_displacement(&tail[2].map) < epsilon;
    Ok(if consistent && settled {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Unstable
    })
}
