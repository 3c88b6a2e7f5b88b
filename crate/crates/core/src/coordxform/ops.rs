use std::collections::BTreeMap;

use super::ansatz::IntegralSearch;
use super::invert::{isolate, solve_system};
use super::names::{fresh_bar, inc, inc_n};
use super::step::{Binding, Split, StepKind, TransformStep};
use crate::diffgeo::{coords, VectorField};
use crate::error::{Error, Result};
use crate::symcore::expr::Kind;
use crate::symcore::linalg::{nullspace, tidy};
use crate::symcore::{add, are_zero, diff, generic_rank, gradient, substitute, Expr, Numerics, Symbol};
use crate::sysdsl::SystemModel;

/// Nonzero conditions implied by `e != 0`: the bases of its factors.
fn constraint_factors(e: &Expr) -> Vec<Expr> {
    let factors: Vec<Expr> = match e.kind() {
        Kind::Mul(fs) => fs.to_vec(),
        _ => vec![e.clone()],
    };
    factors
        .into_iter()
        .map(|f| match f.kind() {
            Kind::Pow(b, _) => b.clone(),
            _ => f,
        })
        .filter(|f| !f.is_constant())
        .collect()
}

/// Domain constraints of a derived model: the parent's constraints carried
/// through `inv` (dropped when they mention variables the child lacks) plus
/// the nonzero conditions of `extra`.
pub(crate) fn carry_constraints(
    parent: &SystemModel,
    inv: &BTreeMap<Symbol, Expr>,
    child_names: &[Symbol],
    extra: &[Expr],
) -> Vec<Expr> {
    let mut out: Vec<Expr> = Vec::new();
    let mut push = |c: Expr| {
        for f in constraint_factors(&c) {
            if f.free_symbols().iter().all(|s| child_names.contains(s)) && !out.contains(&f) {
                out.push(f);
            }
        }
    };
    for c in &parent.domain {
        push(tidy(&substitute(c, inv)));
    }
    for c in extra {
        push(c.clone());
    }
    out
}

fn bindings(pairs: impl IntoIterator<Item = (Symbol, Expr)>) -> Vec<Binding> {
    pairs.into_iter().map(|(var, expr)| Binding { var, expr }).collect()
}

/// Adds `k` integrators in front of `input`: the input becomes a state, its
/// derivatives up to order `k - 1` too, and `inc^k(input)` is the new input.
pub fn prolong(m: &SystemModel, input: &Symbol, k: usize) -> Result<(SystemModel, TransformStep)> {
    assert!(k >= 1, "prolongation order must be positive");
    let pos = m
        .input_index(input)
        .ok_or_else(|| Error::Precondition(format!("`{input}` is not an input")))?;
    let names = m.all_names();
    let mut child = m.clone();
    for j in 0..k {
        let s = inc_n(input, j);
        if j > 0 && names.contains(&s) {
            return Err(Error::Validation(format!("prolongation name `{s}` is already taken")));
        }
        child.states.push(s.clone());
        child.rhs.push(Expr::symbol(&inc(&s)));
    }
    let top = inc_n(input, k);
    if names.contains(&top) {
        return Err(Error::Validation(format!("prolongation name `{top}` is already taken")));
    }
    child.inputs[pos] = top;
    let mut step = TransformStep::identity(StepKind::Prolong, format!("prolong `{input}` {k} time(s)"));
    step.prolonged = Some((input.clone(), k));
    Ok((child, step))
}

/// Result of straightening an input direction.
pub struct Straightened {
    pub model: SystemModel,
    pub step: TransformStep,
    /// The new input that is constant along the direction.
    pub straightened: Symbol,
    /// The original input kept as the coordinate along the direction.
    pub kept: Symbol,
}

/// Input transformation `(ū¹, ū²)` with `L_v ū¹ = 0` for
/// `v = α¹∂_{u¹} + α²∂_{u²}`, so that `span{v} = span{∂_{ū²}}`. The kept
/// input is the highest-index one with a nonzero `v` component.
pub fn straighten_line(m: &SystemModel, alpha: &[Expr; 2], hints: &[Expr], num: &Numerics) -> Result<Straightened> {
    if m.m() != 2 {
        return Err(Error::Precondition("straightening needs two inputs".into()));
    }
    let c = coords(&m.coords());
    let mut comps = vec![Expr::zero(); m.n()];
    comps.extend(alpha.iter().cloned());
    let v = VectorField::new(&c, comps);
    let domain = m.sampling_domain();
    let fields = [v];
    let search = IntegralSearch {
        fields: &fields,
        vars: m.coords(),
        ratio_vars: m.inputs.clone(),
        params: m.param_symbols(),
        hints,
        must_contain: m.inputs.clone(),
        domain: &domain,
        num,
    };
    let phi = search.find(1)?.remove(0);
    let az = are_zero(alpha, &domain, num)?;
    let dz = are_zero(&[diff(&phi, &m.inputs[0]), diff(&phi, &m.inputs[1])], &domain, num)?;
    let kept_idx = (0..2)
        .rev()
        .find(|&k| !az[k] && !dz[1 - k])
        .ok_or_else(|| Error::Straighten(format!("integral {phi} does not complete to an input chart")))?;
    let kept = m.inputs[kept_idx].clone();
    let replaced = m.inputs[1 - kept_idx].clone();
    if phi.as_symbol() == Some(&replaced) {
        let step = TransformStep::identity(
            StepKind::InputTransform,
            format!("direction already straight: `{replaced}` is invariant"),
        );
        return Ok(Straightened {
            model: m.clone(),
            step,
            straightened: replaced,
            kept,
        });
    }
    let new = fresh_bar(&replaced, &m.all_names());
    let (sol, dens) = isolate(&phi, &replaced, &Expr::symbol(&new))
        .ok_or_else(|| Error::Inversion(format!("cannot solve {new} = {phi} for {replaced}")))?;
    let inv: BTreeMap<Symbol, Expr> = [(replaced.clone(), sol.clone())].into_iter().collect();
    let mut child = m.clone();
    child.inputs[1 - kept_idx] = new.clone();
    child.rhs = m.rhs.iter().map(|f| tidy(&substitute(f, &inv))).collect();
    child.domain = carry_constraints(m, &inv, &child.all_names(), &dens);
    let step = TransformStep {
        kind: StepKind::InputTransform,
        forward: bindings([(new.clone(), phi.clone())]),
        inverse: bindings([(replaced.clone(), sol)]),
        prolonged: None,
        split: None,
        rationale: format!("straighten the input direction; `{new}` = {phi} is invariant along it"),
    };
    Ok(Straightened {
        model: child,
        step,
        straightened: new,
        kept,
    })
}

/// Output of [`decompose`].
pub struct Decomposition {
    /// The upper subsystem, whose inputs are the two complementary states.
    pub model: SystemModel,
    pub step: TransformStep,
    /// Whether the upper subsystem depends on its inputs through a single
    /// combination only.
    pub redundant: bool,
}

/// Straightens the involutive input distribution of an input-affine system
/// and splits off the upper subsystem.
pub fn decompose(m: &SystemModel, hints: &[Expr], num: &Numerics) -> Result<Decomposition> {
    let n = m.n();
    if m.m() != 2 || n < 3 {
        return Err(Error::Precondition("decomposition needs two inputs and at least three states".into()));
    }
    let bs = m.input_fields();
    if bs.iter().flatten().any(|e| e.contains_any(&m.inputs)) {
        return Err(Error::NotAffine("input vector fields depend on the inputs".into()));
    }
    let sc = coords(&m.states);
    let fields: Vec<VectorField> = bs.iter().map(|b| VectorField::new(&sc, b.clone())).collect();
    let domain = m.sampling_domain();
    let search = IntegralSearch {
        fields: &fields,
        vars: m.states.clone(),
        ratio_vars: Vec::new(),
        params: m.param_symbols(),
        hints,
        must_contain: Vec::new(),
        domain: &domain,
        num,
    };
    let ints = search.find(n - 2)?;

    // complementary coordinates: highest-index pair completing a chart
    let mut grads: Vec<Vec<Expr>> = ints.iter().map(|e| gradient(e, &m.states)).collect();
    let mut pair = None;
    'search: for j in (0..n).rev() {
        for i in (0..j).rev() {
            let mut rows = grads.clone();
            rows.push(gradient(&Expr::symbol(&m.states[i]), &m.states));
            rows.push(gradient(&Expr::symbol(&m.states[j]), &m.states));
            if generic_rank(&rows, &domain, num)? == n {
                pair = Some((i, j));
                break 'search;
            }
        }
    }
    let (ci, cj) = pair.ok_or_else(|| Error::Straighten("first integrals do not complete to a chart".into()))?;
    grads.clear();
    let lower = vec![m.states[ci].clone(), m.states[cj].clone()];

    // names: integrals equal to a state keep it, the rest replace leftovers
    let mut identity: Vec<Symbol> = Vec::new();
    let mut nontrivial: Vec<Expr> = Vec::new();
    for e in &ints {
        match e.as_symbol() {
            Some(s) if !lower.contains(s) => identity.push(s.clone()),
            _ => nontrivial.push(e.clone()),
        }
    }
    let mut leftover: Vec<Symbol> = m
        .states
        .iter()
        .filter(|s| !lower.contains(s) && !identity.contains(s))
        .cloned()
        .collect();
    let mut assigned: Vec<(Symbol, Symbol, Expr)> = Vec::new(); // (old, new, φ)
    let mut taken = m.all_names();
    for phi in &nontrivial {
        let at = leftover.iter().position(|s| phi.contains(s)).unwrap_or(0);
        let old = leftover.remove(at);
        let new = fresh_bar(&old, &taken);
        taken.push(new.clone());
        assigned.push((old, new, phi.clone()));
    }
    let eqs: Vec<(Expr, Expr)> = assigned.iter().map(|(_, new, phi)| (phi.clone(), Expr::symbol(new))).collect();
    let unknowns: Vec<Symbol> = assigned.iter().map(|(old, _, _)| old.clone()).collect();
    let (sol, dens) = solve_system(&eqs, &unknowns)
        .ok_or_else(|| Error::Inversion("cannot invert the straightening state transformation".into()))?;

    let zero_u: BTreeMap<Symbol, Expr> = m.inputs.iter().map(|u| (u.clone(), Expr::zero())).collect();
    let drift: Vec<Expr> = m.rhs.iter().map(|f| tidy(&substitute(f, &zero_u))).collect();
    let mut upper = Vec::new();
    let mut upper_rhs = Vec::new();
    for (i, s) in m.states.iter().enumerate() {
        if lower.contains(s) {
            continue;
        }
        if let Some((_, new, phi)) = assigned.iter().find(|(old, _, _)| old == s) {
            let lf = add(
                m.states
                    .iter()
                    .zip(&drift)
                    .map(|(x, a)| a * &diff(phi, x))
                    .collect(),
            );
            upper.push(new.clone());
            upper_rhs.push(tidy(&substitute(&tidy(&lf), &sol)));
        } else {
            upper.push(s.clone());
            upper_rhs.push(tidy(&substitute(&m.rhs[i], &sol)));
        }
    }
    if upper_rhs.iter().any(|e| e.contains_any(&m.inputs)) {
        return Err(Error::NotAffine("upper subsystem depends on the inputs".into()));
    }
    let lower_rhs: Vec<Expr> = [ci, cj].iter().map(|&i| tidy(&substitute(&m.rhs[i], &sol))).collect();
    let mut child = SystemModel {
        name: m.name.clone(),
        params: m.params.clone(),
        states: upper.clone(),
        inputs: lower.clone(),
        rhs: upper_rhs,
        domain: Vec::new(),
        provenance: m.provenance.clone(),
    };
    child.domain = carry_constraints(m, &sol, &child.all_names(), &dens);

    let cdom = child.sampling_domain();
    let redundant = generic_rank(&child.input_fields(), &cdom, num)? < 2;
    let step = TransformStep {
        kind: StepKind::Decompose,
        forward: bindings(assigned.iter().map(|(_, new, phi)| (new.clone(), phi.clone()))),
        inverse: bindings(unknowns.iter().map(|s| (s.clone(), sol[s].clone()))),
        prolonged: None,
        split: Some(Split {
            upper,
            lower: lower.clone(),
            lower_rhs,
        }),
        rationale: format!(
            "straighten the input distribution; continue with `{}` and `{}` as inputs",
            lower[0], lower[1]
        ),
    };
    Ok(Decomposition {
        model: child,
        step,
        redundant,
    })
}

/// Removes a redundant input: when the right-hand side depends on the inputs
/// through one combination only, straighten the direction along which it is
/// constant and drop the corresponding input.
pub fn single_input_reduce(m: &SystemModel, hints: &[Expr], num: &Numerics) -> Result<(SystemModel, TransformStep, Symbol)> {
    let domain = m.sampling_domain();
    let cols = m.input_fields();
    let mat: Vec<Vec<Expr>> = (0..m.n()).map(|i| vec![cols[0][i].clone(), cols[1][i].clone()]).collect();
    let ker = nullspace(&mat, 2, &domain, num)?;
    let w = ker
        .first()
        .ok_or_else(|| Error::Precondition("inputs are not redundant".into()))?;
    let st = straighten_line(m, &[w[0].clone(), w[1].clone()], hints, num)?;
    let dropped = st.kept.clone();
    let mut child = st.model.clone();
    let dfs: Vec<Expr> = child.rhs.iter().map(|f| diff(f, &dropped)).collect();
    if !are_zero(&dfs, &child.sampling_domain(), num)?.into_iter().all(|z| z) {
        return Err(Error::Straighten("reduced system still depends on the dropped input".into()));
    }
    let zero: BTreeMap<Symbol, Expr> = [(dropped.clone(), Expr::zero())].into_iter().collect();
    child.rhs = child.rhs.iter().map(|f| tidy(&substitute(f, &zero))).collect();
    child.inputs.retain(|u| u != &dropped);
    child.domain.retain(|c| !c.contains(&dropped));
    let mut step = st.step;
    step.rationale = format!("{}; `{dropped}` no longer enters and is dropped", step.rationale);
    Ok((child, step, dropped))
}
