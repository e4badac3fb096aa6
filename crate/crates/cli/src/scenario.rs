//! Scenario configs and the per-kind payload schemas.

use std::path::PathBuf;

use flatheights::io::{ChainSpec, TorusSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Torus,
    Cylinder,
    Exhaustion,
    Variational,
    Dirichlet,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Torus => "torus",
            Kind::Cylinder => "cylinder",
            Kind::Exhaustion => "exhaustion",
            Kind::Variational => "variational",
            Kind::Dirichlet => "dirichlet",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub payload: serde_json::Value,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Schema(format!("scenario config: {e}")))
    }

    /// Validates the payload against the schema of `kind`.
    pub fn payload<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_value(self.payload.clone())
            .map_err(|e| CliError::Schema(format!("{} payload: {e}", self.kind.as_str())))
    }

    /// The built-in example scenario for `kind`.
    pub fn example(kind: Kind) -> Self {
        let payload = match kind {
            Kind::Torus => serde_json::json!({"tau": [0.0, 1.0], "tau_prime": [0.0, 2.0], "B": [[1, 0], [0, 1]]}),
            Kind::Cylinder => serde_json::json!({
                "generator": {"a": "1", "b": "2^-n", "lambda": "2-1/(n+1)", "sup": 2, "sup_attained": false,
                              "monotone": "increasing", "norm": 2},
                "nMax": 100
            }),
            Kind::Exhaustion => serde_json::json!({
                "generator": {"a": "1", "b": "2^-n", "lambda": "2", "start": 1, "sup": 2, "sup_attained": true,
                              "inf": 2, "inf_attained": true, "norm": 1},
                "nMax": 30
            }),
            Kind::Variational => serde_json::json!({
                "tau": [0.0, 1.0], "mu": [0.3, 0.0], "q": [1.0, 0.0],
                "chain": {"generator": {"a": "1", "b": "2^-n", "lambda": "2-1/(n+1)", "start": 1, "sup": 2,
                                         "sup_attained": false, "monotone": "increasing", "norm": 1},
                          "nMax": 10}
            }),
            Kind::Dirichlet => serde_json::json!({"tau": [0.0, 1.0], "periods": [1.0, 1.0], "N": 16, "perturbation": 0.1}),
        };
        Self {
            kind,
            payload,
            output: None,
            plot: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusPayload {
    pub tau: [f64; 2],
    pub tau_prime: [f64; 2],
    #[serde(rename = "B")]
    pub marking: [[i64; 2]; 2],
    /// Rows of the emitted theta sweep.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    flatheights::torus::DEFAULT_SAMPLES
}

impl TorusPayload {
    pub fn spec(&self) -> TorusSpec {
        TorusSpec {
            tau: self.tau,
            tau_prime: self.tau_prime,
            marking: self.marking,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationalPayload {
    pub tau: [f64; 2],
    pub mu: [f64; 2],
    /// Coefficient of `q = c dz^2`.
    pub q: [f64; 2],
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub gauge: Option<String>,
    pub chain: ChainSpec,
}

fn default_t_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

fn default_step() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletPayload {
    pub tau: [f64; 2],
    pub periods: [f64; 2],
    #[serde(rename = "N")]
    pub n: usize,
    /// Amplitude of the seeded random potential added before relaxing.
    #[serde(default)]
    pub perturbation: f64,
    /// Optional marked map for the quasiconformal energy bound; its source must be `tau`.
    #[serde(default)]
    pub map: Option<MapTarget>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapTarget {
    pub tau_prime: [f64; 2],
    #[serde(rename = "B")]
    pub marking: [[i64; 2]; 2],
}
