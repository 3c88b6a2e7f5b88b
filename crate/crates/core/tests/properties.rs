mod common;

use common::*;
use dynflat::diffgeo::{
    cauchy_characteristic, derived_flag, involutive_closure, is_involutive, lie_bracket, members_mod, Distribution,
};
use dynflat::flatalgo::{extract_linearizing_output, sfl_test, verify_flat_output, DChain};
use dynflat::reptest::{ai_test, ai_test_cauchy, pai_condition_solutions, system_fields};
use dynflat::symcore::{add, call, diff, is_zero, mul, pow, Domain, Expr, Func, Numerics, Rational, Symbol, Tape};
use dynflat::sysdsl::{parse_system_structure, serialize_system};
use dynflat::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Rank instability is a legitimate inconclusive answer near degenerate
/// loci; [`instability_is_rare`] bounds how often it happens.
fn unstable<T>(r: &dynflat::Result<T>) -> bool {
    matches!(r, Err(Error::RankInstability(_)))
}

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// Random tree over `x, y` that stays smooth on the whole plane.
fn tree(r: &mut ChaCha8Rng, depth: u32) -> Expr {
    if depth == 0 || r.random_bool(0.2) {
        return match r.random_range(0..3) {
            0 => p("x"),
            1 => p("y"),
            _ => Expr::int(r.random_range(-3..=3)),
        };
    }
    let a = tree(r, depth - 1);
    match r.random_range(0..8) {
        0 => add(vec![a, tree(r, depth - 1)]),
        1 => &a - &tree(r, depth - 1),
        2 => mul(vec![a, tree(r, depth - 1)]),
        3 => call(Func::Sin, a),
        4 => call(Func::Cos, a),
        5 => call(Func::Exp, call(Func::Sin, a)),
        6 => &a / &add(vec![Expr::int(2), call(Func::Cos, tree(r, depth - 1))]),
        _ => pow(add(vec![Expr::one(), &a * &a]), Rational::new(1.into(), 2.into())),
    }
}

fn five_point(t: &Tape, at: [f64; 2], h: f64) -> Option<f64> {
    let f = |dx: f64| t.eval(&[at[0] + dx, at[1]]).ok().map(|e| e.values[0]);
    Some((f(-2.0 * h)? - 8.0 * f(-h)? + 8.0 * f(h)? - f(2.0 * h)?) / (12.0 * h))
}

proptest! {
    #![proptest_config(cfg(200))]

    #[test]
    fn derivative_matches_finite_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = tree(&mut r, 6);
        let vars = syms(&["x", "y"]);
        let t = Tape::compile(std::slice::from_ref(&e), &vars).unwrap();
        let d = Tape::compile(&[diff(&e, &Symbol::new("x"))], &vars).unwrap();
        for _ in 0..20 {
            let at = [r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)];
            let exact = d.eval(&at).unwrap().values[0];
            let h = 1e-3;
            let (Some(a), Some(b)) = (five_point(&t, at, h), five_point(&t, at, h / 2.0)) else { continue };
            // skip points where the difference quotient itself has not settled
            if (a - b).abs() > 1e-6 * (1.0 + b.abs()) {
                continue;
            }
            prop_assert!((exact - b).abs() <= 1e-6 * (1.0 + exact.abs()), "{e}: {exact} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(cfg(50))]

    #[test]
    fn parse_serialize_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = if r.random_bool(0.5) { random_substituted(&mut r, 0) } else { random_linear(&mut r, 0) };
        let back = parse_system_structure(&serialize_system(&m)).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn bracket_is_antisymmetric_and_jacobi(seed in any::<u64>()) {
        let names = ["x1", "x2", "x3"];
        let c = coords_of(&names);
        let dom = Domain::new(&syms(&names), &[], &[]);
        let num = Numerics::default();
        let mut r = rng(seed);
        let (u, v, w) = (random_field(&mut r, &c, &names), random_field(&mut r, &c, &names), random_field(&mut r, &c, &names));
        let s = lie_bracket(&u, &v).plus(&lie_bracket(&v, &u));
        for e in s.comps() {
            prop_assert!(is_zero(e, &dom, &num).unwrap());
        }
        let j = lie_bracket(&u, &lie_bracket(&v, &w))
            .plus(&lie_bracket(&v, &lie_bracket(&w, &u)))
            .plus(&lie_bracket(&w, &lie_bracket(&u, &v)));
        for e in j.comps() {
            prop_assert!(is_zero(e, &dom, &num).unwrap());
        }
    }

    #[test]
    fn derived_flag_is_nested_and_closure_involutive(seed in any::<u64>()) {
        let names = ["x1", "x2", "x3", "x4"];
        let c = coords_of(&names);
        let dom = Domain::new(&syms(&names), &[], &[]);
        let num = Numerics::default();
        let mut r = rng(seed);
        let d = Distribution::new(&c, vec![random_field(&mut r, &c, &names), random_field(&mut r, &c, &names)]);
        let flag = derived_flag(&d, 4, &dom, &num).unwrap();
        for w in flag.windows(2) {
            prop_assert!(w[0].rank(&dom, &num).unwrap() <= w[1].rank(&dom, &num).unwrap());
            prop_assert!(members_mod(w[0].fields(), &w[1], &dom, &num).unwrap());
        }
        let cl = involutive_closure(&d, &dom, &num).unwrap();
        prop_assert!(is_involutive(&cl, &dom, &num).unwrap());
        prop_assert!(members_mod(d.fields(), &cl, &dom, &num).unwrap());
    }
}

proptest! {
    #![proptest_config(cfg(20))]

    #[test]
    fn cauchy_characteristic_is_involutive_subbundle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = if r.random_bool(0.5) { random_affine(&mut r, 0) } else { random_substituted(&mut r, 0) };
        let num = Numerics::default();
        let dom = m.sampling_domain();
        let chain = DChain::compute(&m, &num).unwrap();
        let Some(d1) = chain.levels.get(1) else { return Ok(()) };
        let cd = cauchy_characteristic(d1, &dom, &num);
        prop_assume!(!unstable(&cd));
        let cd = cd.unwrap();
        prop_assert!(members_mod(cd.fields(), d1, &dom, &num).unwrap());
        prop_assert!(is_involutive(&cd, &dom, &num).unwrap());
    }

    #[test]
    fn ai_tests_agree(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = if r.random_bool(0.5) { random_affine(&mut r, 0) } else { random_substituted(&mut r, 0) };
        let num = Numerics::default();
        let (a, b) = (ai_test(&m, &num), ai_test_cauchy(&m, &num));
        prop_assume!(!unstable(&a) && !unstable(&b));
        prop_assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn feedback_keeps_d1(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_substituted(&mut r, 0);
        let ch = random_input_change(&mut r, &m);
        let mv = apply_change(&m, &ch);
        let num = Numerics::default();
        let dom = m.sampling_domain();
        let d1 = |m: &dynflat::sysdsl::SystemModel| {
            let sf = system_fields(m);
            let mut f = sf.inputs.clone();
            f.extend(sf.inputs.iter().map(|g| lie_bracket(&sf.drift, g)));
            Distribution::new(&sf.coords, f)
        };
        let before = d1(&m);
        let pushed: Vec<_> = d1(&mv).fields().iter().map(|v| push_forward(v, &m, &ch)).collect();
        let pushed = Distribution::new(before.coords(), pushed);
        prop_assert!(members_mod(pushed.fields(), &before, &dom, &num).unwrap());
        prop_assert!(members_mod(before.fields(), &pushed, &dom, &num).unwrap());
    }

    #[test]
    fn at_most_two_pai_directions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_substituted(&mut r, 0);
        let num = Numerics::default();
        if ai_test(&m, &num).unwrap() {
            return Ok(());
        }
        match pai_condition_solutions(&m, &num) {
            Ok(s) => prop_assert!(s.len() <= 2),
            Err(e) => prop_assert!(matches!(e, Error::NoSolution(_) | Error::RankInstability(_)), "{e}"),
        }
    }

    #[test]
    fn linear_systems_are_sfl_with_static_outputs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = random_linear(&mut r, 0);
        let num = Numerics::default();
        prop_assert!(sfl_test(&m, &num).unwrap());
        let y = extract_linearizing_output(&m, &[], &num).unwrap();
        let rep = verify_flat_output(&m, &y, m.n() + 4, &num).unwrap();
        prop_assert!(rep.verified);
        prop_assert_eq!(rep.d, Some(0));
        let mut idx = DChain::compute(&m, &num).unwrap().indices();
        idx.sort();
        let mut r = rep.r.unwrap();
        r.sort();
        prop_assert_eq!(idx, r);
    }
}

#[test]
fn instability_is_rare() {
    let mut unstable_runs = 0;
    for seed in 0..100u64 {
        let mut r = rng(seed);
        let m = if r.random_bool(0.5) { random_affine(&mut r, 0) } else { random_substituted(&mut r, 0) };
        let num = Numerics::default();
        let a = ai_test_cauchy(&m, &num);
        let b = DChain::compute(&m, &num)
            .and_then(|c| c.levels.get(1).map(|d| cauchy_characteristic(d, &m.sampling_domain(), &num)).transpose());
        if unstable(&a) || unstable(&b) {
            unstable_runs += 1;
        }
    }
    assert!(unstable_runs <= 10, "{unstable_runs} of 100 random systems were inconclusive");
}
