//! Experiment configuration: a flat TOML table with a `schema_version` key.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use weylwalk::{StepLaw, WeylPoint};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Tail,
    VProperties,
    LimitDist,
    DysonCompare,
    HeavyTail,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Tail => "tail",
            ExperimentKind::VProperties => "v-properties",
            ExperimentKind::LimitDist => "limit-dist",
            ExperimentKind::DysonCompare => "dyson-compare",
            ExperimentKind::HeavyTail => "heavy-tail",
        }
    }
}

/// One experiment. Field meanings per kind are listed in the README.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub k: usize,
    /// Step law descriptor, e.g. `gaussian`, `rademacher`, `pareto:2.5`.
    pub law: String,
    pub start: Vec<f64>,
    /// Strictly increasing horizons (walk steps).
    pub horizons: Vec<u64>,
    /// Monte Carlo paths for the plain estimators.
    pub samples: u64,
    /// Particles per splitting level or per conditioned ensemble.
    pub particles: usize,
    pub replicates: usize,
    pub seed: u64,
    pub eps: f64,
    /// Horizon for the stopped estimator of `V`.
    pub v_horizon: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Built-in recipe for `kind`; the seed is always supplied by the caller.
    pub fn recipe(kind: ExperimentKind, seed: u64) -> Self {
        let dyadic = |from: u32, to: u32| (from..=to).map(|e| 1u64 << e).collect::<Vec<_>>();
        let base = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            kind,
            k: 3,
            law: "gaussian".into(),
            start: vec![0.0, 2.0, 4.0],
            horizons: dyadic(6, 12),
            samples: 2_000_000,
            particles: 1 << 14,
            replicates: 4,
            seed,
            eps: 0.1,
            v_horizon: 100_000,
            out: None,
        };
        match kind {
            ExperimentKind::Tail => base,
            ExperimentKind::VProperties => ExperimentConfig {
                samples: 20_000,
                v_horizon: 10_000,
                horizons: vec![1_000_000],
                ..base
            },
            ExperimentKind::LimitDist => ExperimentConfig {
                k: 2,
                start: vec![0.0, 1.0],
                horizons: vec![10_000],
                samples: 100_000,
                particles: 10_000,
                replicates: 10,
                v_horizon: 10_000,
                ..base
            },
            ExperimentKind::DysonCompare => ExperimentConfig {
                k: 2,
                start: vec![0.0, 0.01],
                horizons: vec![1000],
                samples: 4000,
                replicates: 1,
                ..base
            },
            ExperimentKind::HeavyTail => ExperimentConfig {
                k: 4,
                law: "pareto:2.5".into(),
                start: vec![0.0, 2.0, 4.0, 6.0],
                replicates: 8,
                ..base
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        // check the version before the full schema so old files get a clear message
        let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        match raw.get("schema_version").and_then(toml::Value::as_integer) {
            Some(v) if v == i64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(CliError::Usage(format!(
                    "config schema_version {v} not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(CliError::Usage("config lacks an integer schema_version".into())),
        }
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn step_law(&self) -> Result<StepLaw, CliError> {
        StepLaw::from_str(&self.law).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn start_point(&self) -> Result<WeylPoint, CliError> {
        WeylPoint::new(self.start.clone()).map_err(|e| CliError::Usage(format!("start: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version must be {SCHEMA_VERSION}"));
        }
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        if self.start.len() != self.k {
            return bad(format!("start has {} coordinates, k = {}", self.start.len(), self.k));
        }
        self.start_point()?;
        self.step_law()?;
        if self.horizons.is_empty() || self.horizons[0] == 0 {
            return bad("horizons must be non-empty and positive".into());
        }
        if self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return bad("horizons must be strictly increasing".into());
        }
        if self.samples < 2 || self.particles < 2 || self.replicates < 1 {
            return bad("need samples >= 2, particles >= 2, replicates >= 1".into());
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return bad(format!("eps must lie in (0, 1/2), got {}", self.eps));
        }
        if self.v_horizon == 0 {
            return bad("v_horizon must be positive".into());
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> u64 {
        *self.horizons.last().unwrap()
    }
}
