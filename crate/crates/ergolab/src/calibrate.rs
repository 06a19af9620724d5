//! Frozen constants for inequalities whose constant is not explicit.
//!
//! A suite is run once per seed with a single case; the largest observed ratio
//! per constant, times [`HEADROOM`], is frozen.  Later runs compare against it.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{execute, Experiment, ExperimentConfig, Limit, ARTIFACT_VERSION};

pub const HEADROOM: f64 = 2.0;

/// Experiments that carry calibrated constants.
pub const SUITES: [Experiment; 7] = [
    Experiment::Jumps,
    Experiment::Bessel,
    Experiment::Forest,
    Experiment::Branches,
    Experiment::SingleScale,
    Experiment::KeyInequality,
    Experiment::FreqSnap,
];

const COMMITTED: &str = include_str!("../calibration/frozen.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub id: String,
    pub suite: Experiment,
    pub seeds: Vec<u64>,
    pub headroom: f64,
    pub observed: BTreeMap<String, f64>,
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenConstants {
    pub version: String,
    pub suites: BTreeMap<Experiment, Calibration>,
}

impl FrozenConstants {
    pub fn committed() -> Result<Self> {
        serde_json::from_str(COMMITTED).map_err(|e| Error::Config(format!("committed constants: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read constants {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("constants {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// The constant and the id of the calibration that froze it.
    pub fn lookup(&self, name: &str) -> Result<(f64, &str)> {
        self.suites
            .values()
            .find_map(|c| c.constants.get(name).map(|v| (*v, c.id.as_str())))
            .ok_or_else(|| Error::Config(format!("no frozen constant named `{name}`")))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Runs `suite` once per seed (one case each) from `base`, or from the
/// suite's defaults, and freezes `HEADROOM` times the largest ratios.
pub fn calibrate(suite: Experiment, seeds: &[u64], base: Option<&ExperimentConfig>) -> Result<Calibration> {
    if seeds.is_empty() {
        return Err(Error::Config("calibration needs at least one seed".into()));
    }
    let per_seed: Vec<Vec<(String, f64)>> = seeds
        .par_iter()
        .map(|&s| {
            let cfg = base.cloned().unwrap_or_else(|| ExperimentConfig::new(suite)).with_seed(s).with_cases(1);
            let out = execute(&cfg)?;
            Ok(out
                .cases
                .iter()
                .flat_map(|c| &c.ratios)
                .chain(&out.summary)
                .filter_map(|(_, v, l)| match l {
                    Limit::Calibrated(name) => Some((name.clone(), *v)),
                    _ => None,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut observed: BTreeMap<String, f64> = BTreeMap::new();
    for (name, v) in per_seed.into_iter().flatten() {
        let e = observed.entry(name).or_insert(0.0);
        *e = e.max(v);
    }
    let constants = observed.iter().map(|(k, v)| (k.clone(), v * HEADROOM)).collect::<BTreeMap<_, _>>();
    let digest = fnv1a(serde_json::to_string(&(&seeds, &constants))?.as_bytes());
    Ok(Calibration {
        id: format!("{suite}-{digest:016x}"),
        suite,
        seeds: seeds.to_vec(),
        headroom: HEADROOM,
        observed,
        constants,
    })
}

pub fn calibrate_all(suites: &[Experiment], seeds: &[u64]) -> Result<FrozenConstants> {
    let suites =
        suites.iter().map(|&s| calibrate(s, seeds, None).map(|c| (s, c))).collect::<Result<BTreeMap<_, _>>>()?;
    Ok(FrozenConstants { version: ARTIFACT_VERSION.into(), suites })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn committed_file_parses_and_names_resolve() {
        let f = FrozenConstants::committed().unwrap();
        assert!(f.lookup("no_such_constant").is_err());
        for c in f.suites.values() {
            for (name, v) in &c.constants {
                assert_eq!(*v, c.observed[name] * c.headroom);
                assert_eq!(f.lookup(name).unwrap().1, c.id);
            }
        }
    }
}
