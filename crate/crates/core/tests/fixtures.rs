//! The worked examples, followed step by step.

mod common;

use common::*;
use dynflat::coordxform::decompose;
use dynflat::flatalgo::{
    build_bc, case3_step, classify, extract_linearizing_output, run, select_case, sfl_test, verify_flat_output, CaseTag,
    DChain, JetSpace, RunConfig, Verdict,
};
use dynflat::reptest::{ai_test, pai_condition_solutions, pai_filter, to_pai_form};
use dynflat::symcore::{is_zero, Domain, Expr, Numerics};
use dynflat::sysdsl::SystemModel;

fn num() -> Numerics {
    Numerics::default()
}

fn same(a: &Expr, b: &Expr, d: &Domain) -> bool {
    is_zero(&(a - b), d, &num()).unwrap()
}

fn parallel(a: &[Expr; 2], b: &[Expr; 2], d: &Domain) -> bool {
    same(&(&a[0] * &b[1]), &(&a[1] * &b[0]), d)
}

fn rhs(m: &SystemModel, s: &str) -> Expr {
    m.rhs_of(&s.into()).unwrap().clone()
}

#[test]
fn vtol_decomposes_by_the_velocity_integral() {
    let m = load("vtol.sys");
    assert!(ai_test(&m, &num()).unwrap());
    assert!(!sfl_test(&m, &num()).unwrap());
    assert_eq!(select_case(&m, &num()).unwrap(), CaseTag::Case1);

    let d = decompose(&m, &[], &num()).unwrap();
    assert!(!d.redundant);
    let sub = d.model;
    assert_eq!(sub.n(), 4);
    assert_eq!(sub.inputs, syms(&["v_z", "omega"]));
    let fwd = d.step.forward_map();
    let integral = &fwd[&"v_x_bar".into()];
    assert!(same(integral, &p("cos(theta)*v_x + sin(theta)*v_z - epsilon*omega"), &m.sampling_domain()));

    let dom = sub.sampling_domain();
    let want = p("omega/cos(theta)*(v_z - sin(theta)*(v_x_bar + epsilon*omega)) - sin(theta)");
    assert!(same(&rhs(&sub, "v_x_bar"), &want, &dom));
    assert!(same(&rhs(&sub, "x"), &p("(v_x_bar - sin(theta)*v_z + epsilon*omega)/cos(theta)"), &dom));
}

#[test]
fn vtol_subsystem_has_two_pai_representations() {
    let m = load("vtol.sys");
    let sub = decompose(&m, &[], &num()).unwrap().model;
    assert!(!ai_test(&sub, &num()).unwrap());
    assert_eq!(select_case(&sub, &num()).unwrap(), CaseTag::Case3);
    let sols = pai_condition_solutions(&sub, &num()).unwrap();
    assert_eq!(sols.len(), 2);
    let dom = sub.sampling_domain();
    let paper = [[p("1"), p("0")], [p("epsilon*sin(theta)"), p("1")]];
    for q in &paper {
        assert!(sols.iter().any(|s| parallel(&s.alpha, q, &dom)));
    }
    for s in &sols {
        assert!(pai_filter(&sub, &s.alpha, &num()).unwrap());
    }
}

#[test]
fn vtol_end_to_end() {
    let m = load("vtol.sys");
    let (v, _) = run(&m, &RunConfig::for_model(&m), &num());
    let Verdict::Flat { d, r, case_path, output, .. } = v else { panic!("{v:?}") };
    assert_eq!(d, 2);
    assert_eq!(r, vec![4, 4]);
    assert_eq!(case_path, vec![1, 3, 2]);
    let rep = verify_flat_output(&m, &output, m.n() + 4, &num()).unwrap();
    assert!(rep.verified);
}

#[test]
fn academic_one_pai_form_and_prolongation() {
    let m = load("academic1.sys");
    let dom = m.sampling_domain();
    assert!(!ai_test(&m, &num()).unwrap());
    let sols = pai_condition_solutions(&m, &num()).unwrap();
    let keep = sols.iter().find(|s| parallel(&s.alpha, &[p("u1"), p("u2")], &dom)).unwrap();
    assert!(pai_filter(&m, &keep.alpha, &num()).unwrap());

    let pai = to_pai_form(&m, &keep.alpha, &[], &num()).unwrap();
    let f = &pai.model;
    assert_eq!(f.inputs, syms(&["u1_bar", "u2"]));
    let fd = f.sampling_domain();
    assert!(same(&rhs(f, "x1"), &p("u1_bar*u2"), &fd));
    assert!(same(&rhs(f, "x3"), &p("sin(u1_bar)"), &fd));
    assert!(same(&pai.steps[0].forward_map()[&"u1_bar".into()], &p("u1/u2"), &dom));

    let (total, branches) = case3_step(&m, &[], &num()).unwrap();
    assert_eq!((total, branches.len()), (2, 1));
    let prolonged = &branches[0].result.as_ref().unwrap().last().unwrap().1;
    assert_eq!(prolonged.n(), 4);
    let sel = classify(prolonged, &num()).unwrap();
    assert_eq!(sel.tag, CaseTag::Case2Dim3);
    let (am, _) = sel.affine.unwrap();
    let bc = build_bc(&am, sel.tag, &num()).unwrap();
    assert!(parallel(&bc, &[p("0"), p("1")], &am.sampling_domain()));
}

#[test]
fn academic_one_output_and_parameterization() {
    let m = load("academic1.sys");
    let y = [p("x3"), p("x1 - x2*u1/u2")];
    let rep = verify_flat_output(&m, &y, m.n() + 4, &num()).unwrap();
    assert!(rep.verified);
    assert_eq!((rep.r, rep.d), (Some(vec![3, 2]), Some(2)));
}

#[test]
fn academic_two_follows_three_one_three() {
    let m = load("academic2.sys");
    let sols = pai_condition_solutions(&m, &num()).unwrap();
    assert_eq!(sols.len(), 1);
    assert!(parallel(&sols[0].alpha, &[p("1"), p("-1")], &m.sampling_domain()));
    let (v, trace) = run(&m, &RunConfig::for_model(&m), &num());
    let Verdict::Flat { d, case_path, .. } = v else { panic!("{v:?}") };
    assert_eq!((d, case_path), (2, vec![3, 1, 3]));
    for l in trace.links() {
        assert!(l.step.check_inverse(&l.parent, &l.child, &num()).unwrap(), "{:?}", l.step.kind);
    }
    let rep = verify_flat_output(&m, &[p("x1 + x2"), p("x3 + x4")], 8, &num()).unwrap();
    assert_eq!(rep.d, Some(2));
}

#[test]
fn linear_chain_is_static() {
    let m = load("linear.sys");
    let chain = DChain::compute(&m, &num()).unwrap();
    assert!(chain.is_sfl(&m));
    assert_eq!(chain.indices(), vec![3, 2]);
    let y = extract_linearizing_output(&m, &[], &num()).unwrap();
    let rep = verify_flat_output(&m, &y, m.n() + 4, &num()).unwrap();
    assert_eq!((rep.verified, rep.d), (true, Some(0)));
}

#[test]
fn vtol_rejects_position_output() {
    let m = load("vtol.sys");
    let rep = verify_flat_output(&m, &[p("x"), p("z")], m.n() + 4, &num()).unwrap();
    assert!(!rep.verified);
    assert_eq!(rep.max_order, 10);
}

#[test]
fn total_derivatives_follow_the_dynamics() {
    let m = load("academic1.sys");
    let j = JetSpace::new(&m, 2).unwrap();
    let dom = j.domain(2);
    let dx3 = j.total_derivative(&p("x3")).unwrap();
    assert!(same(&dx3, &p("sin(u1/u2)"), &dom));
    let d2 = j.total_derivative_n(&p("x1 - x2*u1/u2"), 1).unwrap();
    assert!(same(&d2, &p("-x2*(u1_1*u2 - u1*u2_1)/u2^2"), &dom));
    assert!(j.total_derivative_n(&p("u1"), 3).is_err());
}
