use std::collections::HashMap;

use crate::coordxform::inc_n;
use crate::error::{Error, Result};
use crate::symcore::{add, diff, Domain, Expr, Symbol};
use crate::sysdsl::SystemModel;

/// States, inputs and input derivatives `u_1, u_2, ...` up to a fixed order,
/// with the total time derivative along the dynamics.
#[derive(Clone, Debug)]
pub struct JetSpace {
    states: Vec<Symbol>,
    rhs: Vec<Expr>,
    /// `jets[j][k]`: k-th derivative of input j.
    jets: Vec<Vec<Symbol>>,
    index: HashMap<Symbol, (usize, usize)>,
    params: Vec<(Symbol, (f64, f64))>,
    constraints: Vec<Expr>,
}

impl JetSpace {
    pub fn new(m: &SystemModel, order: usize) -> Result<JetSpace> {
        let names = m.all_names();
        let mut jets = Vec::new();
        let mut index = HashMap::new();
        for (j, u) in m.inputs.iter().enumerate() {
            let mut row = Vec::new();
            for k in 0..=order {
                let s = inc_n(u, k);
                if k > 0 && names.contains(&s) {
                    return Err(Error::Validation(format!("jet name `{s}` clashes with a declared name")));
                }
                if index.insert(s.clone(), (j, k)).is_some() {
                    return Err(Error::Validation(format!("jet name `{s}` is ambiguous")));
                }
                row.push(s);
            }
            jets.push(row);
        }
        Ok(JetSpace {
            states: m.states.clone(),
            rhs: m.rhs.clone(),
            jets,
            index,
            params: m.param_ranges(),
            constraints: m.domain.clone(),
        })
    }

    pub fn order(&self) -> usize {
        self.jets[0].len() - 1
    }

    pub fn states(&self) -> &[Symbol] {
        &self.states
    }

    pub fn jet(&self, input: usize, k: usize) -> &Symbol {
        &self.jets[input][k]
    }

    /// `(input, order)` when `s` names an input or one of its derivatives.
    pub fn jet_of(&self, s: &Symbol) -> Option<(usize, usize)> {
        self.index.get(s).copied()
    }

    /// Highest input-derivative order occurring in `e`.
    pub fn order_of(&self, e: &Expr) -> usize {
        e.free_symbols().iter().filter_map(|s| self.jet_of(s)).map(|(_, k)| k).max().unwrap_or(0)
    }

    /// States followed by the input jets of order `0..=k`, input by input.
    pub fn vars(&self, k: usize) -> Vec<Symbol> {
        let mut v = self.states.clone();
        for row in &self.jets {
            v.extend(row[..=k.min(row.len() - 1)].iter().cloned());
        }
        v
    }

    /// Sampling domain over `vars(k)`.
    pub fn domain(&self, k: usize) -> Domain {
        Domain::new(&self.vars(k), &self.params, &self.constraints).with_guards(&self.rhs)
    }

    /// `d/dt` along `ẋ = f(x, u)`, with `d/dt u_k = u_{k+1}`.
    pub fn total_derivative(&self, e: &Expr) -> Result<Expr> {
        let mut terms = Vec::new();
        for s in e.free_symbols() {
            let rate = if let Some(i) = self.states.iter().position(|x| x == &s) {
                self.rhs[i].clone()
            } else if let Some((j, k)) = self.jet_of(&s) {
                if k + 1 >= self.jets[j].len() {
                    return Err(Error::OrderExceeded(format!("derivative of `{s}` beyond the jet order")));
                }
                Expr::symbol(&self.jets[j][k + 1])
            } else {
                continue;
            };
            let d = diff(e, &s);
            if !d.is_zero_literal() {
                terms.push(&d * &rate);
            }
        }
        Ok(add(terms))
    }

    pub fn total_derivative_n(&self, e: &Expr, k: usize) -> Result<Expr> {
        let mut out = e.clone();
        for _ in 0..k {
            out = self.total_derivative(&out)?;
        }
        Ok(out)
    }
}
