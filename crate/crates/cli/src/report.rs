//! JSON report written by `solve`.

use serde::{Deserialize, Serialize};
use vortex_core::diagnostics::{EnergyDecomposition, Fluxes, ResidualNorms};
use vortex_core::tw::TwIterate;
use vortex_core::vav::VavIterate;

use crate::config::{ModelTag, SolverSpec, SourcesSpec, TorusSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Solved,
    Inadmissible,
    Nonconverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Solved => 0,
            Status::Inadmissible => 2,
            Status::Nonconverged => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub torus: TorusSpec,
    pub sources: SourcesSpec,
    pub sigma: f64,
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// The inequality being checked, in words.
    pub condition: String,
    /// Names of violated inequalities.
    pub violated: Vec<String>,
    /// `(a1, a2)` for TW, `(1 - |a|, 1 - |b|)` for VAV.
    pub margins: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Iterates {
    Tw(Vec<TwIterate>),
    Vav(Vec<VavIterate>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
    pub residual: Option<ResidualNorms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_gradient_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functional_lower_bound: Option<f64>,
    /// Constraint shifts `(c1, c2)` of the fixed-point mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shifts: Option<[f64; 2]>,
    pub error: Option<String>,
    pub iterates: Iterates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizedReport {
    pub iu: f64,
    pub iv: f64,
    pub expected_iu: f64,
    pub expected_iv: f64,
    pub rel_error_iu: f64,
    pub rel_error_iv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<EnergyDecomposition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub model: ModelTag,
    pub inputs: Inputs,
    pub admissibility: Admissibility,
    pub solver_trace: Option<SolverTrace>,
    pub quantized_integrals: Option<QuantizedReport>,
    pub fluxes: Option<Fluxes>,
    pub energy: Option<EnergyReport>,
    pub timings: Timings,
    pub status: Status,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
