use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::symcore::linalg::tidy;
use crate::symcore::{are_zero, substitute, Domain, Expr, Numerics, Symbol};
use crate::sysdsl::SystemModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    StateTransform,
    InputTransform,
    Prolong,
    Decompose,
    Normalize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Binding {
    pub var: Symbol,
    pub expr: Expr,
}

/// How a decomposition split the transformed state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Split {
    /// States of the retained subsystem.
    pub upper: Vec<Symbol>,
    /// States that act as its inputs.
    pub lower: Vec<Symbol>,
    /// Equations of the lower states, in the new coordinates.
    pub lower_rhs: Vec<Expr>,
}

/// One action of the algorithm. `forward` expresses every new variable that
/// differs from the old ones in terms of the old variables; `inverse` does the
/// reverse. Variables missing from a map are unchanged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformStep {
    pub kind: StepKind,
    pub forward: Vec<Binding>,
    pub inverse: Vec<Binding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prolonged: Option<(Symbol, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub rationale: String,
}

impl TransformStep {
    pub fn identity(kind: StepKind, rationale: impl Into<String>) -> Self {
        TransformStep {
            kind,
            forward: Vec::new(),
            inverse: Vec::new(),
            prolonged: None,
            split: None,
            rationale: rationale.into(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.forward.is_empty() && self.inverse.is_empty() && self.prolonged.is_none() && self.split.is_none()
    }

    pub fn forward_map(&self) -> BTreeMap<Symbol, Expr> {
        self.forward.iter().map(|b| (b.var.clone(), b.expr.clone())).collect()
    }

    pub fn inverse_map(&self) -> BTreeMap<Symbol, Expr> {
        self.inverse.iter().map(|b| (b.var.clone(), b.expr.clone())).collect()
    }

    /// Checks `forward ∘ inverse = id` on the child domain and
    /// `inverse ∘ forward = id` on the parent domain.
    pub fn check_inverse(&self, parent: &SystemModel, child: &SystemModel, num: &Numerics) -> Result<bool> {
        if self.forward.is_empty() && self.inverse.is_empty() {
            return Ok(true);
        }
        let inv = self.inverse_map();
        let fwd = self.forward_map();
        let a: Vec<Expr> = self
            .forward
            .iter()
            .map(|b| tidy(&(&substitute(&b.expr, &inv) - &Expr::symbol(&b.var))))
            .collect();
        let b: Vec<Expr> = self
            .inverse
            .iter()
            .map(|b| tidy(&(&substitute(&b.expr, &fwd) - &Expr::symbol(&b.var))))
            .collect();
        let dc = check_domain(child, parent);
        let dp = check_domain(parent, child);
        Ok(are_zero(&a, &dc, num)?.into_iter().all(|z| z) && are_zero(&b, &dp, num)?.into_iter().all(|z| z))
    }
}

/// Sampling domain of `m`, with parameters of `other` added in case a map
/// mentions them.
fn check_domain(m: &SystemModel, other: &SystemModel) -> Domain {
    let mut ranges = m.param_ranges();
    for (s, r) in other.param_ranges() {
        if !ranges.iter().any(|(t, _)| t == &s) {
            ranges.push((s, r));
        }
    }
    Domain::new(&m.coords(), &ranges, &m.domain)
}
