use std::collections::BTreeMap;

use bwkit_core::programs::RETRY_TOLERANCE_FACTOR;
use bwkit_core::SolverSettings;
use serde::Serialize;
use serde_json::Value;

use crate::io::InputRecord;

/// One validated quantity: `passed` is `value <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingsRecord {
    pub feasibility_tolerance: f64,
    pub gap_tolerance: f64,
    pub max_solver_iterations: usize,
    pub refinement_steps: usize,
    pub retry_tolerance_factor: f64,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl SettingsRecord {
    pub fn new(s: &SolverSettings) -> Self {
        Self {
            feasibility_tolerance: s.feasibility_tolerance,
            gap_tolerance: s.gap_tolerance,
            max_solver_iterations: s.max_iterations,
            refinement_steps: s.refinement_steps,
            retry_tolerance_factor: RETRY_TOLERANCE_FACTOR,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<InputRecord>,
    pub settings: SettingsRecord,
    pub result: Value,
    pub checks: Vec<Check>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub duration_seconds: f64,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self.status.as_str() {
            "ok" => 0,
            "solver_failure" => 3,
            "validation_failed" => 4,
            _ => 2,
        }
    }
}
