//! Deliberately naive reference implementations used as test oracles.
//!
//! Nothing here shares code with the crate: distances, neighborhoods and
//! components are recomputed from first principles on plain vectors.

#![allow(dead_code)]

use std::collections::VecDeque;

use cortexsom::som::DimGroup;
use cortexsom::{FeatureMap, PathologyMode, PathologySpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Plain-vector copy of a map: `w[i][d]`, row-major neurons.
pub fn weights_of(map: &FeatureMap) -> Vec<Vec<f64>> {
    (0..map.len()).map(|i| map.weight(i).to_vec()).collect()
}

/// Exhaustive scan, strict `<` so the first minimum wins.
pub fn naive_winner(w: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for (i, wi) in w.iter().enumerate() {
        let mut d = 0.0;
        for k in 0..x.len() {
            d += (wi[k] - x[k]).powi(2);
        }
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// One update step, written out term by term.
pub fn naive_update(
    w: &[Vec<f64>],
    width: usize,
    x: &[f64],
    groups: &[DimGroup],
    rates: &[f64],
    sigma: f64,
    pathology: &PathologySpec,
) -> Vec<Vec<f64>> {
    let sigma = pathology.sigma_override.unwrap_or(sigma);
    let win = naive_winner(w, x);
    let (wx, wy) = ((win % width) as f64, (win / width) as f64);
    let mut out = w.to_vec();
    for (i, wi) in w.iter().enumerate() {
        let (ix, iy) = ((i % width) as f64, (i / width) as f64);
        let grid_d2 = (ix - wx) * (ix - wx) + (iy - wy) * (iy - wy);
        let phi = (-grid_d2 / (2.0 * sigma * sigma)).exp();
        for d in 0..x.len() {
            let g = groups.iter().position(|g| g.dims.contains(&d)).unwrap();
            let rho = rates[g];
            let step = match pathology.mode {
                PathologyMode::None => rho * phi * (x[d] - wi[d]),
                PathologyMode::OverStrengthen { omega } => {
                    if i == win && !pathology.omega_includes_winner {
                        rho * phi * (x[d] - wi[d])
                    } else {
                        omega * rho * phi * (x[d] - wi[d])
                    }
                }
                PathologyMode::IncreaseFactor { c } => {
                    let xi = phi / (c - phi);
                    rho * xi * (x[d] - wi[d])
                }
            };
            out[i][d] = wi[d] + step;
        }
    }
    out
}

/// A random small update instance.
pub struct UpdateCase {
    pub map: FeatureMap,
    pub x: Vec<f64>,
    pub rates: Vec<f64>,
    pub sigma: f64,
}

pub fn random_case(rng: &mut ChaCha8Rng) -> UpdateCase {
    let width = rng.random_range(1..=6);
    let height = rng.random_range(1..=6);
    let dim = rng.random_range(1..=4);
    let split = rng.random_range(0..dim);
    let groups = if split == 0 {
        vec![DimGroup::new("all", (0..dim).collect::<Vec<_>>())]
    } else {
        vec![
            DimGroup::new("lo", (0..split).collect::<Vec<_>>()),
            DimGroup::new("hi", (split..dim).collect::<Vec<_>>()),
        ]
    };
    let weights = (0..width * height * dim).map(|_| rng.random_range(-10.0..10.0)).collect();
    let rates = groups.iter().map(|_| rng.random_range(0.01..=1.0)).collect();
    let map = FeatureMap::from_weights(width, height, dim, weights, groups).unwrap();
    let x = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
    UpdateCase {
        map,
        x,
        rates,
        sigma: rng.random_range(0.3..4.0),
    }
}

/// Largest per-component deviation between the crate's update and the oracle.
pub fn update_deviation(case: &UpdateCase, pathology: &PathologySpec) -> f64 {
    use cortexsom::{update_step, TrainingConfig};
    let cfg = TrainingConfig {
        learning_rates: case.rates.clone(),
        sigma: case.sigma,
        ..TrainingConfig::default()
    };
    let expected = naive_update(
        &weights_of(&case.map),
        case.map.width(),
        &case.x,
        case.map.dim_groups(),
        &case.rates,
        case.sigma,
        pathology,
    );
    let mut got = case.map.clone();
    update_step(&mut got, &case.x, &cfg, pathology).unwrap();
    weights_of(&got)
        .iter()
        .zip(&expected)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// 8-connected components of the cells where `occupied` is true, each as a
/// sorted list of row-major indices, found by breadth-first search.
pub fn flood_fill(width: usize, height: usize, occupied: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; occupied.len()];
    let mut components = Vec::new();
    for start in 0..occupied.len() {
        if !occupied[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = ((i % width) as i64, (i / width) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                        continue;
                    }
                    let j = ny as usize * width + nx as usize;
                    if occupied[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    components.sort();
    components
}
