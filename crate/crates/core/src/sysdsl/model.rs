use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::symcore::{diff, generic_rank, Domain, Expr, Numerics, Symbol};

pub const DEFAULT_PARAM_RANGE: (f64, f64) = (0.1, 2.0);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Param {
    pub name: Symbol,
    pub range: Option<(f64, f64)>,
}

impl Param {
    pub fn new(name: &str) -> Param {
        Param {
            name: Symbol::new(name),
            range: None,
        }
    }

    pub fn effective_range(&self) -> (f64, f64) {
        self.range.unwrap_or(DEFAULT_PARAM_RANGE)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    /// Produced by the algorithm at the given trace step.
    Derived(usize),
}

/// A control system `dx/dt = f(x, u)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemModel {
    pub name: String,
    pub params: Vec<Param>,
    pub states: Vec<Symbol>,
    pub inputs: Vec<Symbol>,
    pub rhs: Vec<Expr>,
    pub domain: Vec<Expr>,
    pub provenance: Provenance,
}

impl SystemModel {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn m(&self) -> usize {
        self.inputs.len()
    }

    /// States followed by inputs: the coordinates of the combined manifold.
    pub fn coords(&self) -> Vec<Symbol> {
        self.states.iter().chain(self.inputs.iter()).cloned().collect()
    }

    pub fn param_symbols(&self) -> Vec<Symbol> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn param_ranges(&self) -> Vec<(Symbol, (f64, f64))> {
        self.params.iter().map(|p| (p.name.clone(), p.effective_range())).collect()
    }

    /// Sampling domain over states and inputs; the right-hand side must
    /// evaluate at every sampled point.
    pub fn sampling_domain(&self) -> Domain {
        Domain::new(&self.coords(), &self.param_ranges(), &self.domain).with_guards(&self.rhs)
    }

    pub fn rhs_of(&self, s: &Symbol) -> Option<&Expr> {
        self.states.iter().position(|x| x == s).map(|i| &self.rhs[i])
    }

    pub fn state_index(&self, s: &Symbol) -> Option<usize> {
        self.states.iter().position(|x| x == s)
    }

    pub fn input_index(&self, s: &Symbol) -> Option<usize> {
        self.inputs.iter().position(|x| x == s)
    }

    /// Every declared name, in declaration order.
    pub fn all_names(&self) -> Vec<Symbol> {
        let mut v = self.states.clone();
        v.extend(self.inputs.iter().cloned());
        v.extend(self.param_symbols());
        v
    }

    /// Input Jacobian `d f / d u` as rows per input (each an n-vector).
    pub fn input_fields(&self) -> Vec<Vec<Expr>> {
        self.inputs
            .iter()
            .map(|u| self.rhs.iter().map(|f| diff(f, u)).collect())
            .collect()
    }

    /// Structural checks that need no sampling.
    pub fn check_structure(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::Validation("at least one state is required".into()));
        }
        if self.inputs.is_empty() || self.inputs.len() > 2 {
            return Err(Error::Validation(format!(
                "one or two inputs are supported, found {}",
                self.inputs.len()
            )));
        }
        if self.rhs.len() != self.states.len() {
            return Err(Error::Validation("one right-hand side per state is required".into()));
        }
        let mut seen = BTreeSet::new();
        for s in self.all_names() {
            if !seen.insert(s.clone()) {
                return Err(Error::Validation(format!("`{s}` is declared twice")));
            }
        }
        for (i, f) in self.rhs.iter().enumerate() {
            for s in f.free_symbols() {
                if !seen.contains(&s) {
                    return Err(Error::Validation(format!(
                        "right-hand side of `{}` uses undeclared `{s}`",
                        self.states[i]
                    )));
                }
            }
        }
        for c in &self.domain {
            for s in c.free_symbols() {
                if !seen.contains(&s) {
                    return Err(Error::Validation(format!("domain constraint uses undeclared `{s}`")));
                }
            }
        }
        for p in &self.params {
            if let Some((lo, hi)) = p.range {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::Validation(format!("empty range for parameter `{}`", p.name)));
                }
            }
        }
        Ok(())
    }

    /// Full validation including the generic input rank.
    pub fn validate(&self, num: &Numerics) -> Result<()> {
        self.check_structure()?;
        let rank = generic_rank(&self.input_fields(), &self.sampling_domain(), num)?;
        if rank != self.m() {
            return Err(Error::Validation(format!(
                "rank of d f/d u is {rank} at generic points, but {} inputs are declared",
                self.m()
            )));
        }
        Ok(())
    }
}
