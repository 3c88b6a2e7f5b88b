use std::collections::BTreeMap;

use super::jets::JetSpace;
use crate::coordxform::{inc_n, TransformStep};
use crate::error::Result;
use crate::symcore::{simplify, substitute, Expr, Symbol};
use crate::sysdsl::SystemModel;

const JET_LIMIT: usize = 24;

/// One applied transformation with the models on both sides.
#[derive(Clone, Debug)]
pub struct Link {
    pub parent: SystemModel,
    pub step: TransformStep,
    pub child: SystemModel,
}

fn child_input_jet(child: &SystemModel, s: &Symbol) -> Option<(Symbol, usize)> {
    for c in &child.inputs {
        for j in 1..=JET_LIMIT {
            if &inc_n(c, j) == s {
                return Some((c.clone(), j));
            }
        }
    }
    None
}

/// Rewrites an expression over the child variables of `link` in the parent
/// variables. Derivatives of child inputs become total derivatives of their
/// definitions along the parent dynamics.
pub fn pull_back_step(e: &Expr, link: &Link) -> Result<Expr> {
    let fwd = link.step.forward_map();
    let mut js: Option<JetSpace> = None;
    let declared = link.child.all_names();
    let mut sub: BTreeMap<Symbol, Expr> = BTreeMap::new();
    for s in e.free_symbols() {
        if let Some(f) = fwd.get(&s) {
            sub.insert(s, f.clone());
        } else if declared.contains(&s) {
            continue;
        } else if let Some((c, j)) = child_input_jet(&link.child, &s) {
            let base = fwd.get(&c).cloned().unwrap_or_else(|| Expr::symbol(&c));
            if js.is_none() {
                js = Some(JetSpace::new(&link.parent, JET_LIMIT + 2)?);
            }
            sub.insert(s, js.as_ref().unwrap().total_derivative_n(&base, j)?);
        }
    }
    if sub.is_empty() {
        return Ok(e.clone());
    }
    Ok(simplify(&substitute(e, &sub)))
}

/// Composes [`pull_back_step`] from the last link back to the first.
pub fn pull_back(links: &[Link], y: &[Expr]) -> Result<Vec<Expr>> {
    let mut out = y.to_vec();
    for link in links.iter().rev() {
        out = out.iter().map(|e| pull_back_step(e, link)).collect::<Result<_>>()?;
    }
    Ok(out)
}
