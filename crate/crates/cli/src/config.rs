//! TOML overrides for the reference parameters.
//!
//! ```toml
//! map_side = 20
//! learning_rate = 0.5
//! sigma = 2.0
//! steps = 1400
//! theta = 0.999
//! sigma_act = 4.1
//!
//! [projections]
//! A = 0.02
//!
//! [maps.Assoc]
//! omega = 5.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use cortexsom::{MapId, NetworkSpec, PairingMode, PathologySpec, ProjectionId};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub map_side: Option<usize>,
    /// Rate of the primary maps and of every projection.
    pub learning_rate: Option<f64>,
    pub sigma: Option<f64>,
    pub steps: Option<usize>,
    pub snapshot_interval: Option<usize>,
    pub theta: Option<f64>,
    pub sigma_act: Option<f64>,
    pub min_cluster_size: Option<usize>,
    pub pairing: Option<PairingMode>,
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub projections: BTreeMap<String, f64>,
    #[serde(default)]
    pub maps: BTreeMap<String, MapOverride>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapOverride {
    pub omega: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    #[serde(default)]
    pub omega_includes_winner: bool,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn apply(&self, spec: &mut NetworkSpec) -> Result<()> {
        if let Some(side) = self.map_side {
            spec.map_side = side;
        }
        for id in MapId::ALL {
            let t = &mut spec.settings_mut(id).training;
            if let Some(s) = self.sigma {
                t.sigma = s;
            }
            if let Some(n) = self.steps {
                t.steps = n;
            }
            if let Some(n) = self.snapshot_interval {
                t.snapshot_interval = n;
            }
        }
        if let Some(rate) = self.learning_rate {
            spec.prim1.training.learning_rates = vec![rate];
            spec.prim2.training.learning_rates = vec![rate];
            for p in [ProjectionId::A, ProjectionId::P2, ProjectionId::B] {
                spec.set_projection_rate(p, rate);
            }
        }
        for (name, &rate) in &self.projections {
            spec.set_projection_rate(name.parse()?, rate);
        }
        if let Some(theta) = self.theta {
            spec.analysis.theta = theta;
        }
        if let Some(s) = self.sigma_act {
            spec.analysis.sigma_act = s;
        }
        if let Some(n) = self.min_cluster_size {
            spec.analysis.min_cluster_size = n;
        }
        if let Some(p) = self.pairing {
            spec.pairing = p;
        }
        for (name, o) in &self.maps {
            let id: MapId = name.parse()?;
            let mut p = match (o.omega, o.c) {
                (Some(_), Some(_)) => anyhow::bail!("map {name}: give omega or c, not both"),
                (Some(omega), None) => PathologySpec::over_strengthen(omega),
                (None, Some(c)) => PathologySpec::increase_factor(c),
                (None, None) => PathologySpec::none(),
            };
            p.sigma_override = o.sigma;
            p.omega_includes_winner = o.omega_includes_winner;
            spec.settings_mut(id).pathology = p;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_every_map() {
        let cfg = ConfigFile::parse(
            "map_side = 12\nsigma = 3.0\nsteps = 50\nlearning_rate = 0.4\n[projections]\nB = 0.02\n[maps.Front]\nc = 1.1\n",
        )
        .unwrap();
        let mut spec = NetworkSpec::default();
        cfg.apply(&mut spec).unwrap();
        assert_eq!(spec.map_side, 12);
        assert!(MapId::ALL.iter().all(|&id| spec.settings(id).training.steps == 50));
        assert_eq!(spec.assoc.training.learning_rates, vec![0.4, 0.4]);
        assert_eq!(spec.front.training.learning_rates, vec![0.02]);
        assert_eq!(spec.front.pathology, PathologySpec::increase_factor(1.1));
        spec.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigFile::parse("sigmaa = 2.0\n").is_err());
        let cfg = ConfigFile::parse("[maps.Middle]\nomega = 3.0\n").unwrap();
        assert!(cfg.apply(&mut NetworkSpec::default()).is_err());
    }
}
