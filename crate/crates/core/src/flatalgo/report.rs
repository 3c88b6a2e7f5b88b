use serde::Serialize;

use super::run::{Budget, RunConfig, TraceNode, Verdict};
use crate::symcore::Numerics;

pub const SCHEMA_VERSION: &str = "dynflat.trace/1";

/// Settings that determine a run, recorded for reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigRecord {
    pub seed: u64,
    pub samples: usize,
    pub tol_zero: f64,
    pub tol_rank: f64,
    pub max_order: usize,
    pub budget: Budget,
    pub parallel: bool,
    pub hints: usize,
}

impl ConfigRecord {
    pub fn new(cfg: &RunConfig, num: &Numerics) -> Self {
        ConfigRecord {
            seed: num.seed(),
            samples: num.cfg.samples,
            tol_zero: num.cfg.tol_zero,
            tol_rank: num.cfg.tol_rank,
            max_order: cfg.max_order,
            budget: cfg.budget.clone(),
            parallel: cfg.parallel,
            hints: cfg.hints.first_integrals.len() + cfg.hints.linearizing_outputs.len(),
        }
    }
}

/// The JSON document written by `dynflat check --format json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub system: String,
    pub config: ConfigRecord,
    pub verdict: Verdict,
    pub trace: TraceNode,
}

impl RunReport {
    pub fn new(system: &str, cfg: &RunConfig, num: &Numerics, verdict: Verdict, trace: TraceNode) -> Self {
        RunReport {
            schema: SCHEMA_VERSION,
            system: system.to_string(),
            config: ConfigRecord::new(cfg, num),
            verdict,
            trace,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
