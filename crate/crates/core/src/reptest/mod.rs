//! Representation analysis: affine-input test and normal form, and the
//! partial affine-input condition with its candidate directions.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coordxform::names::fresh_bar;
use crate::coordxform::ops::carry_constraints;
use crate::coordxform::{isolate, solve_system, straighten_line, Binding, StepKind, TransformStep};
use crate::diffgeo::{cauchy_characteristic, coords, lie_bracket, member_mod, members_mod, Distribution, VectorField};
use crate::error::{Error, Result};
use crate::symcore::linalg::{annihilators, divide, dot, tidy};
use crate::symcore::poly::sqrt_exact;
use crate::symcore::{
    add, are_zero, diff, generic_rank, is_zero, ranks_of_prefixes, substitute, Domain, Expr, Numerics, Symbol,
};
use crate::sysdsl::SystemModel;

/// A direction `v_c = α¹∂_{u¹} + α²∂_{u²}` solving the PAI condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaSolution {
    pub alpha: [Expr; 2],
    /// Result of [`pai_filter`], once evaluated.
    pub passes_filter: Option<bool>,
}

/// `∂_{u^j} ∂_{u^k} f` for `j <= k`, as state vectors.
fn second_derivatives(m: &SystemModel) -> Vec<Vec<Expr>> {
    let b = m.input_fields();
    let mut out = Vec::new();
    for j in 0..m.m() {
        for k in j..m.m() {
            out.push(b[j].iter().map(|e| tidy(&diff(e, &m.inputs[k]))).collect());
        }
    }
    out
}

/// Whether every right-hand side is affine in the inputs by construction.
pub fn is_syntactically_affine(m: &SystemModel) -> bool {
    second_derivatives(m).iter().flatten().all(|e| e.is_zero_literal())
}

/// The affine-input test: `[∂_{u^j}, [∂_{u^k}, f]] ∈ D₁` for all `j, k`.
pub fn ai_test(m: &SystemModel, num: &Numerics) -> Result<bool> {
    if is_syntactically_affine(m) {
        return Ok(true);
    }
    let mut rows = m.input_fields();
    let k = rows.len();
    rows.extend(second_derivatives(m));
    let r = ranks_of_prefixes(&rows, &[k, rows.len()], &m.sampling_domain(), num)?;
    Ok(r[0] == r[1])
}

/// Fields on the combined state-input manifold.
pub struct SystemFields {
    pub coords: crate::diffgeo::Coords,
    /// `f = f^i ∂_{x^i}`.
    pub drift: VectorField,
    /// `∂_{u^j}`.
    pub inputs: Vec<VectorField>,
}

pub fn system_fields(m: &SystemModel) -> SystemFields {
    let c = coords(&m.coords());
    let mut comps = m.rhs.clone();
    comps.extend(std::iter::repeat_n(Expr::zero(), m.m()));
    let drift = VectorField::new(&c, comps);
    let inputs = (0..m.m()).map(|j| VectorField::basis(&c, m.n() + j)).collect();
    SystemFields {
        coords: c,
        drift,
        inputs,
    }
}

/// The affine-input test in its original form: `D₀ ⊆ C(D₁)`.
pub fn ai_test_cauchy(m: &SystemModel, num: &Numerics) -> Result<bool> {
    let sf = system_fields(m);
    let mut fields = sf.inputs.clone();
    fields.extend(sf.inputs.iter().map(|u| lie_bracket(u, &sf.drift)));
    let d1 = Distribution::new(&sf.coords, fields);
    let domain = m.sampling_domain();
    let ch = cauchy_characteristic(&d1, &domain, num)?;
    members_mod(&sf.inputs, &ch, &domain, num)
}

/// Rewrites an input-affine right-hand side as `a + Σ b_j u^j` literally.
fn literal_affine(m: &SystemModel, inputs: &[Symbol]) -> Vec<Expr> {
    let zero: BTreeMap<Symbol, Expr> = inputs.iter().map(|u| (u.clone(), Expr::zero())).collect();
    m.rhs
        .iter()
        .map(|f| {
            let mut terms = vec![tidy(&substitute(f, &zero))];
            for u in inputs {
                let b = tidy(&substitute(&diff(f, u), &zero));
                terms.push(&b * &Expr::symbol(u));
            }
            tidy(&add(terms))
        })
        .collect()
}

/// Brings an input-affine (by [`ai_test`]) system into explicit affine shape.
pub fn to_ai_form(m: &SystemModel, num: &Numerics) -> Result<(SystemModel, TransformStep)> {
    if is_syntactically_affine(m) {
        return Ok((m.clone(), TransformStep::identity(StepKind::Normalize, "already input-affine")));
    }
    let domain = m.sampling_domain();
    let h = second_derivatives(m);
    if are_zero(&h.concat(), &domain, num)?.into_iter().all(|z| z) {
        let mut child = m.clone();
        child.rhs = literal_affine(m, &m.inputs);
        return Ok((child, TransformStep::identity(StepKind::Normalize, "rewritten in input-affine shape")));
    }
    if m.m() != 2 {
        return Err(Error::Precondition("affine normalization implemented for two inputs".into()));
    }
    let b = m.input_fields();
    let mut pick = None;
    'outer: for i1 in 0..m.n() {
        for i2 in i1 + 1..m.n() {
            let rows = vec![vec![b[0][i1].clone(), b[1][i1].clone()], vec![b[0][i2].clone(), b[1][i2].clone()]];
            if generic_rank(&rows, &domain, num)? == 2 {
                pick = Some((i1, i2));
                break 'outer;
            }
        }
    }
    let (i1, i2) = pick.ok_or_else(|| Error::Validation("input Jacobian has rank below two".into()))?;
    let mut taken = m.all_names();
    let mut news = Vec::new();
    for (j, &i) in [i1, i2].iter().enumerate() {
        let n = fresh_bar(&m.inputs[j], &taken);
        taken.push(n.clone());
        news.push((n, m.rhs[i].clone()));
    }
    let eqs: Vec<(Expr, Expr)> = news.iter().map(|(n, f)| (f.clone(), Expr::symbol(n))).collect();
    let (sol, dens) = solve_system(&eqs, &m.inputs).ok_or_else(|| {
        Error::Inversion(format!("cannot solve ({}, {}) = ({}, {}) for the inputs", news[0].0, news[1].0, news[0].1, news[1].1))
    })?;
    let mut child = m.clone();
    child.inputs = news.iter().map(|(n, _)| n.clone()).collect();
    child.rhs = m.rhs.iter().map(|f| tidy(&substitute(f, &sol))).collect();
    child.domain = carry_constraints(m, &sol, &child.all_names(), &dens);
    let h2 = second_derivatives(&child);
    if !are_zero(&h2.concat(), &child.sampling_domain(), num)?.into_iter().all(|z| z) {
        return Err(Error::NotAffine("residual input nonlinearity after normalization".into()));
    }
    if !is_syntactically_affine(&child) {
        child.rhs = literal_affine(&child, &child.inputs.clone());
    }
    let step = TransformStep {
        kind: StepKind::InputTransform,
        forward: news.iter().map(|(n, f)| Binding { var: n.clone(), expr: f.clone() }).collect(),
        inverse: m.inputs.iter().map(|u| Binding { var: u.clone(), expr: sol[u].clone() }).collect(),
        prolonged: None,
        split: None,
        rationale: format!(
            "new inputs are the right-hand sides of `{}` and `{}`",
            m.states[i1], m.states[i2]
        ),
    };
    Ok((child, step))
}

fn cross(a: &[Expr], b: &[Expr]) -> [Expr; 3] {
    let c = |i: usize, j: usize| tidy(&(&(&a[i] * &b[j]) - &(&a[j] * &b[i])));
    [c(1, 2), c(2, 0), c(0, 1)]
}

/// Scales `α` so a nonzero constant component becomes 1, or else the
/// component of largest magnitude at the reference point (lowest index on ties).
pub fn normalize_alpha(alpha: &[Expr; 2], domain: &Domain, num: &Numerics) -> Result<[Expr; 2]> {
    let by = if let Some(k) = (0..2).find(|&k| alpha[k].as_num().is_some_and(|c| !num_traits::Zero::is_zero(c))) {
        k
    } else {
        let (_, ev) = domain.reference_point(num, alpha)?;
        if ev.values[1].abs() > ev.values[0].abs() * (1.0 + 1e-9) {
            1
        } else {
            0
        }
    };
    let d = alpha[by].clone();
    Ok([divide(&alpha[0], &d), divide(&alpha[1], &d)])
}

/// Solutions `(α¹ : α²)` of `(α¹)²∂²_{u¹}f + 2α¹α²∂_{u¹}∂_{u²}f + (α²)²∂²_{u²}f ∈ D₁`.
pub fn pai_condition_solutions(m: &SystemModel, num: &Numerics) -> Result<Vec<AlphaSolution>> {
    if m.m() != 2 {
        return Err(Error::Precondition("the PAI condition needs two inputs".into()));
    }
    if ai_test(m, num)? {
        return Err(Error::Precondition("system admits an input-affine representation".into()));
    }
    let domain = m.sampling_domain();
    let b = m.input_fields();
    let h = second_derivatives(m);
    let omegas = annihilators(&b, m.n(), &domain, num)?;
    // coefficients of (α¹)², α¹α², (α²)²
    let rows: Vec<Vec<Expr>> = omegas
        .iter()
        .map(|w| {
            vec![
                dot(w, &h[0]),
                tidy(&(&Expr::int(2) * &dot(w, &h[1]))),
                dot(w, &h[2]),
            ]
        })
        .collect();
    let nonzero: Vec<usize> = {
        let flat: Vec<Expr> = rows.iter().map(|r| add(r.iter().map(|e| e * e).collect())).collect();
        let z = are_zero(&flat, &domain, num)?;
        (0..rows.len()).filter(|&i| !z[i]).collect()
    };
    // rank of the quadratic form modulo span{b}, from the raw derivatives;
    // the annihilator rows can be badly conditioned near their poles
    let mut bh = b.clone();
    bh.extend(h.iter().cloned());
    let r = ranks_of_prefixes(&bh, &[2, 5], &domain, num)?;
    let rank = r[1] - r[0];
    let mut sols: Vec<[Expr; 2]> = Vec::new();
    match rank {
        0 => return Err(Error::Precondition("PAI condition is void: system is input-affine".into())),
        3 => return Err(Error::NoSolution("the PAI condition has only the trivial solution".into())),
        2 => {
            let i = nonzero[0];
            let mut j = None;
            for &k in &nonzero[1..] {
                if generic_rank(&[rows[i].clone(), rows[k].clone()], &domain, num)? == 2 {
                    j = Some(k);
                    break;
                }
            }
            let j = j.ok_or_else(|| Error::RankInstability("rank-two condition without an independent pair".into()))?;
            let [x, y, z] = cross(&rows[i], &rows[j]);
            if !is_zero(&tidy(&(&(&y * &y) - &(&x * &z))), &domain, num)? {
                return Err(Error::NoSolution("the PAI condition has no nontrivial solution".into()));
            }
            sols.push(if is_zero(&x, &domain, num)? { [y, z] } else { [x, y] });
        }
        _ => {
            let i = *nonzero
                .iter()
                .min_by_key(|&&i| rows[i].iter().map(|e| e.size()).sum::<u64>())
                .expect("rank one has a nonzero row");
            let a = rows[i][0].clone();
            let bh = tidy(&(&rows[i][1] / &Expr::int(2)));
            let c = rows[i][2].clone();
            if is_zero(&a, &domain, num)? {
                sols.push([Expr::one(), Expr::zero()]);
                if !is_zero(&bh, &domain, num)? {
                    sols.push([c.neg(), tidy(&(&Expr::int(2) * &bh))]);
                }
            } else {
                let disc = tidy(&(&(&bh * &bh) - &(&a * &c)));
                if is_zero(&disc, &domain, num)? {
                    sols.push([bh.neg(), a.clone()]);
                } else {
                    let g = match sqrt_exact(&disc) {
                        Some(g) => g,
                        None => {
                            // real solutions live where the discriminant is positive;
                            // the sampler skips points where the root is undefined
                            let t = domain.compile(std::slice::from_ref(&disc))?;
                            let pts = domain.sample_eval(&num.fork(0xd15c), &t, num.cfg.samples)?;
                            if pts.iter().all(|(_, ev)| ev.values[0] < 0.0) {
                                return Err(Error::NoSolution("the PAI condition has only complex solutions".into()));
                            }
                            disc.sqrt()
                        }
                    };
                    sols.push([tidy(&(&bh.neg() + &g)), a.clone()]);
                    sols.push([tidy(&(&bh.neg() - &g)), a.clone()]);
                }
            }
        }
    }
    // drop trivial and proportional solutions
    let mut out: Vec<[Expr; 2]> = Vec::new();
    for s in sols {
        if are_zero(&s, &domain, num)?.into_iter().all(|z| z) {
            continue;
        }
        let s = normalize_alpha(&s, &domain, num)?;
        let mut dup = false;
        for t in &out {
            let c = tidy(&(&(&s[0] * &t[1]) - &(&s[1] * &t[0])));
            if is_zero(&c, &domain, num)? {
                dup = true;
                break;
            }
        }
        if !dup {
            out.push(s);
        }
    }
    // re-check membership at fresh points
    let check = num.fork(0xc4ec);
    for s in &out {
        let q: Vec<Expr> = (0..m.n())
            .map(|i| {
                tidy(&add(vec![
                    &(&s[0] * &s[0]) * &h[0][i],
                    &(&Expr::int(2) * &(&s[0] * &s[1])) * &h[1][i],
                    &(&s[1] * &s[1]) * &h[2][i],
                ]))
            })
            .collect();
        let mut all = b.clone();
        all.push(q);
        let r = ranks_of_prefixes(&all, &[2, 3], &domain, &check)?;
        if r[0] != r[1] {
            return Err(Error::Lift(format!("solution ({}, {}) fails the membership check", s[0], s[1])));
        }
    }
    Ok(out
        .into_iter()
        .map(|alpha| AlphaSolution {
            alpha,
            passes_filter: None,
        })
        .collect())
}

/// `[v_c, [v_c, f]] ∈ span{∂_{u¹}, ∂_{u²}, [v_c, f]}`.
pub fn pai_filter(m: &SystemModel, alpha: &[Expr; 2], num: &Numerics) -> Result<bool> {
    let sf = system_fields(m);
    let mut comps = vec![Expr::zero(); m.n()];
    comps.extend(alpha.iter().cloned());
    let vc = VectorField::new(&sf.coords, comps);
    let b = lie_bracket(&vc, &sf.drift);
    let c = lie_bracket(&vc, &b);
    let mut fields = sf.inputs.clone();
    fields.push(b);
    member_mod(&c, &Distribution::new(&sf.coords, fields), &m.sampling_domain(), num)
}

/// A system in partial affine-input form.
pub struct PaiForm {
    pub model: SystemModel,
    pub steps: Vec<TransformStep>,
    /// The model after each step.
    pub models: Vec<SystemModel>,
    /// The input entering affinely.
    pub affine: Symbol,
    /// The input to prolong.
    pub nonaffine: Symbol,
}

/// Straightens `span{v_c}` and, when needed, normalizes one equation so the
/// system becomes affine in the second input.
pub fn to_pai_form(m: &SystemModel, alpha: &[Expr; 2], hints: &[Expr], num: &Numerics) -> Result<PaiForm> {
    let st = straighten_line(m, alpha, hints, num)?;
    let mut steps = vec![st.step];
    let model1 = st.model;
    let mut models = vec![model1.clone()];
    let kept = st.kept;
    let domain = model1.sampling_domain();
    let d1: Vec<Expr> = model1.rhs.iter().map(|f| tidy(&diff(f, &kept))).collect();
    let d2: Vec<Expr> = d1.iter().map(|f| tidy(&diff(f, &kept))).collect();
    if are_zero(&d2, &domain, num)?.into_iter().all(|z| z) {
        let mut model = model1;
        if !d2.iter().all(|e| e.is_zero_literal()) {
            model.rhs = literal_affine(&model, std::slice::from_ref(&kept));
            models[0] = model.clone();
        }
        return Ok(PaiForm {
            model,
            steps,
            models,
            affine: kept,
            nonaffine: st.straightened,
        });
    }
    let z1 = are_zero(&d1, &domain, num)?;
    let i = z1
        .iter()
        .position(|z| !z)
        .ok_or_else(|| Error::Affinity(format!("no equation depends on `{kept}`")))?;
    let g = model1.rhs[i].clone();
    let new = fresh_bar(&kept, &model1.all_names());
    let (sol, dens) = isolate(&g, &kept, &Expr::symbol(&new))
        .ok_or_else(|| Error::Inversion(format!("cannot solve {new} = {g} for {kept}")))?;
    let inv: BTreeMap<Symbol, Expr> = [(kept.clone(), sol.clone())].into_iter().collect();
    let mut model = model1.clone();
    let pos = model.input_index(&kept).expect("kept input exists");
    model.inputs[pos] = new.clone();
    model.rhs = model1.rhs.iter().map(|f| tidy(&substitute(f, &inv))).collect();
    model.domain = carry_constraints(&model1, &inv, &model.all_names(), &dens);
    let dd: Vec<Expr> = model.rhs.iter().map(|f| diff(&diff(f, &new), &new)).collect();
    if !are_zero(&dd, &model.sampling_domain(), num)?.into_iter().all(|z| z) {
        return Err(Error::Affinity(format!("not affine in `{new}` after normalizing `{}`", model1.states[i])));
    }
    if !dd.iter().all(|e| e.is_zero_literal()) {
        model.rhs = literal_affine(&model, std::slice::from_ref(&new));
    }
    steps.push(TransformStep {
        kind: StepKind::Normalize,
        forward: vec![Binding { var: new.clone(), expr: g }],
        inverse: vec![Binding { var: kept, expr: sol }],
        prolonged: None,
        split: None,
        rationale: format!("take the right-hand side of `{}` as the affine input", model1.states[i]),
    });
    models.push(model.clone());
    Ok(PaiForm {
        model,
        steps,
        models,
        affine: new,
        nonaffine: st.straightened,
    })
}
