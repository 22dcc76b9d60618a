//! Stimulus sets for the three network levels.
//!
//! Primary maps see one random point per quadrant of `[0,20)²`. The
//! association map sees 4-D concatenations of encoder grid coordinates
//! drawn from both primary maps, and the frontal map sees 2-D encoder
//! coordinates drawn from the association map.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::EncoderField;
use crate::error::{Result, SomError};
use crate::seed::rng_from_seed;
use crate::som::GridPos;

/// Number of stimulus classes used by every experiment.
pub const NUM_CLASSES: usize = 4;

/// Half-open quadrants of the primary input domain, indexed by class id.
pub const QUADRANTS: [[(f64, f64); 2]; NUM_CLASSES] = [
    [(0.0, 10.0), (0.0, 10.0)],
    [(0.0, 10.0), (10.0, 20.0)],
    [(10.0, 20.0), (0.0, 10.0)],
    [(10.0, 20.0), (10.0, 20.0)],
];

/// Smallest single-class encoder group that still counts as class structure.
pub const CLASS_GROUP_MIN: usize = 4;

pub const PRIMARY_BOUNDS: [(f64, f64); 2] = [(0.0, 20.0), (0.0, 20.0)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub values: Vec<f64>,
    pub class_id: u8,
}

impl Stimulus {
    pub fn new(values: Vec<f64>, class_id: u8) -> Self {
        Stimulus { values, class_id }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Primary,
    AssocDerived,
    FrontDerived,
}

/// How upstream encoders are picked when shaping higher-level inputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    /// Pattern `k` is drawn from the class-`k` encoders when the upstream
    /// map still carries class structure, otherwise from all encoders.
    #[default]
    ByClass,
    /// Every pattern is drawn from the full encoder set.
    Uniform,
}

impl std::str::FromStr for PairingMode {
    type Err = SomError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "by_class" | "by-class" => Ok(PairingMode::ByClass),
            "uniform" => Ok(PairingMode::Uniform),
            other => Err(SomError::Config(format!("unknown pairing mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusSet {
    patterns: Vec<Stimulus>,
    bounds: Vec<(f64, f64)>,
    provenance: Provenance,
}

impl StimulusSet {
    pub fn new(patterns: Vec<Stimulus>, bounds: Vec<(f64, f64)>, provenance: Provenance) -> Result<Self> {
        let mut seen = 0u32;
        for p in &patterns {
            if p.values.len() != bounds.len() {
                return Err(SomError::Config(format!(
                    "pattern of class {} has {} components, bounds have {}",
                    p.class_id,
                    p.values.len(),
                    bounds.len()
                )));
            }
            if p.class_id >= 32 || seen & (1 << p.class_id) != 0 {
                return Err(SomError::Config(format!("duplicate or invalid class id {}", p.class_id)));
            }
            seen |= 1 << p.class_id;
            for (v, (lo, hi)) in p.values.iter().zip(&bounds) {
                if !(lo <= v && v < hi) {
                    return Err(SomError::Config(format!(
                        "component {v} of class {} outside [{lo}, {hi})",
                        p.class_id
                    )));
                }
            }
        }
        Ok(StimulusSet {
            patterns,
            bounds,
            provenance,
        })
    }

    pub fn patterns(&self) -> &[Stimulus] {
        &self.patterns
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Largest class id + 1.
    pub fn num_classes(&self) -> usize {
        self.patterns.iter().map(|p| p.class_id as usize + 1).max().unwrap_or(0)
    }
}

/// One uniform point per quadrant; class `k` lives in `QUADRANTS[k]`.
pub fn gen_primary_inputs(rng_seed: u64) -> StimulusSet {
    let mut rng = rng_from_seed(rng_seed);
    let patterns = QUADRANTS
        .iter()
        .enumerate()
        .map(|(k, quad)| {
            let values = quad.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
            Stimulus::new(values, k as u8)
        })
        .collect();
    StimulusSet::new(patterns, PRIMARY_BOUNDS.to_vec(), Provenance::Primary)
        .expect("quadrant points are in bounds by construction")
}

/// Grid bounds for stimuli built from encoder coordinates of a `width × height` map.
fn coordinate_bounds(field: &EncoderField) -> [(f64, f64); 2] {
    [(0.0, field.width() as f64), (0.0, field.height() as f64)]
}

/// Candidate pools, one per class, for drawing encoder coordinates.
fn pools(field: &EncoderField, mode: PairingMode, map_name: &str) -> Result<Vec<Vec<GridPos>>> {
    let all = field.encoder_positions();
    if all.is_empty() {
        return Err(SomError::DeadUpstream {
            map: map_name.to_string(),
        });
    }
    let by_class = mode == PairingMode::ByClass && field.has_class_structure(CLASS_GROUP_MIN);
    Ok((0..NUM_CLASSES)
        .map(|k| {
            let class_k = field.class_positions(k as u8);
            if by_class && !class_k.is_empty() {
                class_k
            } else {
                all.clone()
            }
        })
        .collect())
}

fn draw<R: Rng>(rng: &mut R, pool: &[GridPos]) -> GridPos {
    pool[rng.random_range(0..pool.len())]
}

/// Four 4-D patterns: a Prim1 encoder coordinate followed by a Prim2 one.
pub fn gen_assoc_inputs(
    prim1: &EncoderField,
    prim2: &EncoderField,
    mode: PairingMode,
    rng_seed: u64,
) -> Result<StimulusSet> {
    let p1 = pools(prim1, mode, "Prim1")?;
    let p2 = pools(prim2, mode, "Prim2")?;
    let mut rng = rng_from_seed(rng_seed);
    let mut patterns = Vec::with_capacity(NUM_CLASSES);
    for k in 0..NUM_CLASSES {
        let a = draw(&mut rng, &p1[k]);
        let b = draw(&mut rng, &p2[k]);
        patterns.push(Stimulus::new(
            vec![a.x as f64, a.y as f64, b.x as f64, b.y as f64],
            k as u8,
        ));
    }
    let [bx, by] = coordinate_bounds(prim1);
    let [cx, cy] = coordinate_bounds(prim2);
    StimulusSet::new(patterns, vec![bx, by, cx, cy], Provenance::AssocDerived)
}

/// Four 2-D patterns, each an Assoc encoder coordinate.
pub fn gen_front_inputs(assoc: &EncoderField, mode: PairingMode, rng_seed: u64) -> Result<StimulusSet> {
    let pool = pools(assoc, mode, "Assoc")?;
    let mut rng = rng_from_seed(rng_seed);
    let patterns = (0..NUM_CLASSES)
        .map(|k| {
            let p = draw(&mut rng, &pool[k]);
            Stimulus::new(vec![p.x as f64, p.y as f64], k as u8)
        })
        .collect();
    StimulusSet::new(patterns, coordinate_bounds(assoc).to_vec(), Provenance::FrontDerived)
}
