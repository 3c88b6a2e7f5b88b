use std::collections::BTreeMap;

use serde::Serialize;

use crate::coordxform::names::fresh_bar;
use crate::coordxform::ops::carry_constraints;
use crate::coordxform::{prolong, Binding, StepKind, TransformStep};
use crate::diffgeo::{
    cauchy_characteristic, coords, involutive_closure, is_involutive, lie_bracket, member_mod, members_mod,
    Distribution, VectorField,
};
use crate::error::{Error, Result};
use crate::reptest::{ai_test, normalize_alpha, pai_condition_solutions, pai_filter, to_ai_form, to_pai_form};
use crate::symcore::linalg::{annihilators, dot, nullspace, tidy};
use crate::symcore::{are_zero, generic_rank, substitute, Expr, Numerics, Symbol};
use crate::sysdsl::SystemModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    #[serde(rename = "1")]
    Case1,
    #[serde(rename = "2-dim3")]
    Case2Dim3,
    #[serde(rename = "2-dim4")]
    Case2Dim4,
    #[serde(rename = "3")]
    Case3,
    #[serde(rename = "terminal-sfl")]
    TerminalSfl,
    #[serde(rename = "terminal-fail")]
    TerminalFail,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl CaseTag {
    /// Case number for the case path; `None` for terminal tags.
    pub fn number(self) -> Option<u8> {
        match self {
            CaseTag::Case1 => Some(1),
            CaseTag::Case2Dim3 | CaseTag::Case2Dim4 => Some(2),
            CaseTag::Case3 => Some(3),
            _ => None,
        }
    }
}

/// State-space fields of an input-affine model: drift `a` and `b_1, b_2`.
pub struct AffineFields {
    pub drift: VectorField,
    pub inputs: Vec<VectorField>,
}

pub fn affine_fields(m: &SystemModel) -> AffineFields {
    let c = coords(&m.states);
    let zero: BTreeMap<Symbol, Expr> = m.inputs.iter().map(|u| (u.clone(), Expr::zero())).collect();
    let drift = VectorField::new(&c, m.rhs.iter().map(|f| tidy(&substitute(f, &zero))).collect());
    let inputs = m.input_fields().into_iter().map(|b| VectorField::new(&c, b)).collect();
    AffineFields { drift, inputs }
}

/// Outcome of case selection. For cases 1 and 2 the model is the explicit
/// input-affine form reached by `step`.
pub struct Selection {
    pub tag: CaseTag,
    pub affine: Option<(SystemModel, TransformStep)>,
    pub reason: String,
}

/// Picks the case that applies to a system that is not static feedback
/// linearizable.
pub fn classify(m: &SystemModel, num: &Numerics) -> Result<Selection> {
    if m.m() != 2 {
        return Err(Error::Precondition("case selection needs two inputs".into()));
    }
    if !ai_test(m, num)? {
        return Ok(Selection {
            tag: CaseTag::Case3,
            affine: None,
            reason: "no input-affine representation".into(),
        });
    }
    let (am, step) = to_ai_form(m, num)?;
    let domain = am.sampling_domain();
    let af = affine_fields(&am);
    let d1 = Distribution::new(&coords(&am.states), af.inputs.clone());
    if is_involutive(&d1, &domain, num)? {
        return Ok(Selection {
            tag: CaseTag::Case1,
            affine: Some((am, step)),
            reason: "input-affine with involutive input distribution".into(),
        });
    }
    let closure = involutive_closure(&d1, &domain, num)?;
    let dim = closure.rank(&domain, num)?;
    let (tag, reason) = match dim {
        3 => (CaseTag::Case2Dim3, "input distribution not involutive, closure of dimension 3".to_string()),
        4 => (CaseTag::Case2Dim4, "input distribution not involutive, closure of dimension 4".to_string()),
        d => (CaseTag::TerminalFail, format!("involutive closure of the input distribution has dimension {d}")),
    };
    Ok(Selection {
        tag,
        affine: Some((am, step)),
        reason,
    })
}

pub fn select_case(m: &SystemModel, num: &Numerics) -> Result<CaseTag> {
    Ok(classify(m, num)?.tag)
}

/// Coefficients of `b_c = α¹b₁ + α²b₂` for case 2.
pub fn build_bc(m: &SystemModel, tag: CaseTag, num: &Numerics) -> Result<[Expr; 2]> {
    let domain = m.sampling_domain();
    let af = affine_fields(m);
    let sc = coords(&m.states);
    let (b1, b2) = (&af.inputs[0], &af.inputs[1]);
    let derived = Distribution::new(&sc, vec![b1.clone(), b2.clone(), lie_bracket(b1, b2)]);
    let alpha = match tag {
        CaseTag::Case2Dim3 => {
            let target = involutive_closure(&Distribution::new(&sc, af.inputs.clone()), &domain, num)?;
            let ab = [lie_bracket(&af.drift, b1), lie_bracket(&af.drift, b2)];
            let omegas = annihilators(&target.rows(), m.n(), &domain, num)?;
            let rows: Vec<Vec<Expr>> = omegas
                .iter()
                .map(|w| vec![dot(w, ab[0].comps()), dot(w, ab[1].comps())])
                .collect();
            let rank = if rows.is_empty() { 0 } else { generic_rank(&rows, &domain, num)? };
            let alpha = match rank {
                0 => [Expr::zero(), Expr::one()],
                1 => {
                    let ns = nullspace(&rows, 2, &domain, num)?;
                    [ns[0][0].clone(), ns[0][1].clone()]
                }
                _ => return Err(Error::NoSolution("no combination of the input fields keeps [a, b_c] in the closure".into())),
            };
            let alpha = normalize_alpha(&alpha, &domain, num)?;
            let v = ab[0].scale(&alpha[0]).plus(&ab[1].scale(&alpha[1]));
            if !member_mod(&v, &target, &domain, num)? {
                return Err(Error::Lift("b_c fails the membership check".into()));
            }
            alpha
        }
        CaseTag::Case2Dim4 => {
            let ch = cauchy_characteristic(&derived, &domain, num)?;
            if ch.fields().is_empty() {
                return Err(Error::NoSolution("the derived input distribution has no Cauchy characteristics".into()));
            }
            // α¹b₁ + α²b₂ - Σ γ_k c_k = 0
            let mut cols: Vec<Vec<Expr>> = vec![b1.comps().to_vec(), b2.comps().to_vec()];
            cols.extend(ch.fields().iter().map(|c| c.comps().to_vec()));
            let nc = cols.len();
            let mat: Vec<Vec<Expr>> = (0..m.n()).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
            let ns = nullspace(&mat, nc, &domain, num)?;
            let mut found = None;
            for v in ns {
                if !are_zero(&v[..2], &domain, num)?.into_iter().all(|z| z) {
                    found = Some([v[0].clone(), v[1].clone()]);
                    break;
                }
            }
            let alpha = found.ok_or_else(|| Error::NoSolution("no input field lies in the Cauchy characteristics".into()))?;
            let alpha = normalize_alpha(&alpha, &domain, num)?;
            let bc = b1.scale(&alpha[0]).plus(&b2.scale(&alpha[1]));
            if !members_mod(std::slice::from_ref(&bc), &ch, &domain, num)? {
                return Err(Error::Lift("b_c fails the Cauchy characteristic check".into()));
            }
            alpha
        }
        _ => return Err(Error::Precondition("build_bc applies to case 2 only".into())),
    };
    Ok(alpha)
}

/// `ū¹ = α²u¹ - α¹u²`, `ū² = α¹u¹ + α²u²`, then one-fold prolongation of `ū¹`.
/// Returns every step with the model it produces; the last model is the
/// prolonged system.
pub fn case2_step(m: &SystemModel, alpha: &[Expr; 2]) -> Result<Vec<(TransformStep, SystemModel)>> {
    let (u1, u2) = (Expr::symbol(&m.inputs[0]), Expr::symbol(&m.inputs[1]));
    let new1 = tidy(&(&(&alpha[1] * &u1) - &(&alpha[0] * &u2)));
    let new2 = tidy(&(&(&alpha[0] * &u1) + &(&alpha[1] * &u2)));
    let mut steps = Vec::new();
    let mut model = m.clone();
    if new1 == u1 && new2 == u2 {
        steps.push((
            TransformStep::identity(StepKind::InputTransform, "b_c = b_2: no input transformation needed"),
            m.clone(),
        ));
    } else {
        let mut taken = m.all_names();
        let mut names = Vec::new();
        for (j, e) in [&new1, &new2].into_iter().enumerate() {
            let old = &m.inputs[j];
            if e.as_symbol() == Some(old) {
                names.push(old.clone());
            } else {
                let n = fresh_bar(old, &taken);
                taken.push(n.clone());
                names.push(n);
            }
        }
        let det = tidy(&(&(&alpha[0] * &alpha[0]) + &(&alpha[1] * &alpha[1])));
        let (n1, n2) = (Expr::symbol(&names[0]), Expr::symbol(&names[1]));
        let inv1 = tidy(&(&(&(&alpha[1] * &n1) + &(&alpha[0] * &n2)) / &det));
        let inv2 = tidy(&(&(&(&alpha[1] * &n2) - &(&alpha[0] * &n1)) / &det));
        let inv: BTreeMap<Symbol, Expr> = [(m.inputs[0].clone(), inv1), (m.inputs[1].clone(), inv2)].into_iter().collect();
        model.inputs = names.clone();
        model.rhs = m.rhs.iter().map(|f| tidy(&substitute(f, &inv))).collect();
        let extra = if det.is_constant() { vec![] } else { vec![det.clone()] };
        model.domain = carry_constraints(m, &inv, &model.all_names(), &extra);
        let mut forward = Vec::new();
        for (n, e) in names.iter().zip([new1, new2]) {
            if e.as_symbol() != Some(n) {
                forward.push(Binding { var: n.clone(), expr: e });
            }
        }
        let inverse = m
            .inputs
            .iter()
            .filter(|u| !names.contains(u))
            .map(|u| Binding { var: u.clone(), expr: inv[u].clone() })
            .collect();
        let step = TransformStep {
            kind: StepKind::InputTransform,
            forward,
            inverse,
            prolonged: None,
            split: None,
            rationale: format!("new input along b_c with alpha = ({}, {})", alpha[0], alpha[1]),
        };
        steps.push((step, model.clone()));
    }
    let (child, p) = prolong(&model, &model.inputs[0].clone(), 1)?;
    steps.push((p, child));
    Ok(steps)
}

/// One case-3 branch: the PAI direction, the transformations and the
/// prolonged model, or the error that stopped it.
pub struct Case3Branch {
    pub alpha: [Expr; 2],
    /// Steps with the model each produces; the last is the prolonged system.
    pub result: Result<Vec<(TransformStep, SystemModel)>>,
}

/// PAI candidates that pass the filter, each transformed and prolonged.
/// `Ok(vec![])` never occurs: no surviving candidate is a `NoSolution` error.
pub fn case3_step(m: &SystemModel, hints: &[Expr], num: &Numerics) -> Result<(usize, Vec<Case3Branch>)> {
    let sols = pai_condition_solutions(m, num)?;
    let total = sols.len();
    let mut out = Vec::new();
    for s in sols {
        if !pai_filter(m, &s.alpha, num)? {
            continue;
        }
        let result = to_pai_form(m, &s.alpha, hints, num).and_then(|pai| {
            let (child, p) = prolong(&pai.model, &pai.nonaffine, 1)?;
            let mut steps: Vec<(TransformStep, SystemModel)> = pai.steps.into_iter().zip(pai.models).collect();
            steps.push((p, child));
            Ok(steps)
        });
        out.push(Case3Branch { alpha: s.alpha, result });
    }
    if out.is_empty() {
        return Err(Error::NoSolution(format!("none of the {total} PAI candidates passes the filter")));
    }
    Ok((total, out))
}
