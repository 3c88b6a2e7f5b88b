//! Acceptance run: prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use dynflat::cli::main_with;
use dynflat::diffgeo::{
    cauchy_characteristic, derived_flag, is_involutive, lie_bracket, members_mod, Distribution, VectorField,
};
use dynflat::flatalgo::{extract_linearizing_output, run, sfl_test, verify_flat_output, RunConfig, Verdict};
use dynflat::reptest::{ai_test, pai_condition_solutions, pai_filter, system_fields};
use dynflat::symcore::{is_zero, Expr, Numerics, DEFAULT_SEED};
use dynflat::Error;
use serde_json::Value;

type Outcome = Result<String, String>;

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["dynflat"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap())
}

fn check_json(file: &str, seed: u64) -> (i32, String) {
    let path = fixture(file);
    cli(&["check", path.to_str().unwrap(), "--format", "json", "--seed", &seed.to_string()])
}

fn verify_json(file: &str, y: &str, seed: u64) -> (i32, Value) {
    let path = fixture(file);
    let (code, out) = cli(&["verify", path.to_str().unwrap(), y, "--format", "json", "--seed", &seed.to_string()]);
    (code, serde_json::from_str(&out).unwrap_or(Value::Null))
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn flat_summary(json: &str) -> Result<(i64, Vec<i64>, Vec<String>), String> {
    let v: Value = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let verdict = &v["verdict"];
    ensure(verdict["status"] == "flat", format!("verdict is {}", verdict["status"]))?;
    let d = verdict["d"].as_i64().unwrap();
    let path = verdict["case_path"].as_array().unwrap().iter().map(|x| x.as_i64().unwrap()).collect();
    let y = verdict["output"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect();
    Ok((d, path, y))
}

fn criterion1(json: &str, secs: f64) -> Outcome {
    let (d, path, _) = flat_summary(json)?;
    ensure(d == 2 && path == [1, 3, 2], format!("d={d}, path {path:?}"))?;
    ensure(secs < 60.0, format!("took {secs:.1} s"))?;
    let y = "x - epsilon*sin(theta), z + epsilon*cos(theta)";
    let mut rs = Vec::new();
    for seed in [DEFAULT_SEED, 1, 2] {
        let (code, v) = verify_json("vtol.sys", y, seed);
        let rep = &v["report"];
        ensure(code == 0 && rep["d"] == 2, format!("seed {seed}: exit {code}, d={}", rep["d"]))?;
        rs.push(rep["r"].clone());
    }
    ensure(rs.windows(2).all(|w| w[0] == w[1]), format!("R differs across seeds: {rs:?}"))?;
    Ok(format!("flat, d=2, path [1, 3, 2] in {secs:.1} s; output verified at 3 seeds with R={}", rs[0]))
}

fn criterion2(json: &str, secs: f64) -> Outcome {
    let (d, _, y) = flat_summary(json)?;
    ensure(d == 2, format!("d={d}"))?;
    ensure(secs < 30.0, format!("took {secs:.1} s"))?;
    let m = load("academic1.sys");
    let num = Numerics::default();
    let dom = m.sampling_domain();
    let want = [p("x3"), p("x1 - x2*u1/u2")];
    let got: Vec<Expr> = y.iter().map(|s| p(s)).collect();
    let same = |a: &Expr, b: &Expr| is_zero(&(a - b), &dom, &num).unwrap();
    let direct = same(&got[0], &want[0]) && same(&got[1], &want[1]);
    let swapped = same(&got[0], &want[1]) && same(&got[1], &want[0]);
    ensure(got.len() == 2 && (direct || swapped), format!("output {y:?}"))?;

    let sols = pai_condition_solutions(&m, &num).map_err(|e| e.to_string())?;
    ensure(sols.len() == 2, format!("{} PAI solutions", sols.len()))?;
    let paper = [
        [p("u1"), p("u2")],
        [p("u1*tan(u1/u2) - 2*u2"), p("u2*tan(u1/u2)")],
    ];
    let tdom = dom.with_constraints(&[p("cos(u1/u2)")]);
    let parallel = |a: &[Expr; 2], b: &[Expr; 2]| is_zero(&(&(&a[0] * &b[1]) - &(&a[1] * &b[0])), &tdom, &num).unwrap();
    let mut matched = [None, None];
    for (i, s) in sols.iter().enumerate() {
        let k = paper.iter().position(|q| parallel(&s.alpha, q));
        ensure(k.is_some(), format!("solution ({}, {}) is not one of the paper's", s.alpha[0], s.alpha[1]))?;
        matched[i] = k;
    }
    ensure(matched[0] != matched[1], "both solutions match the same paper solution")?;
    let mut passing = Vec::new();
    for (i, s) in sols.iter().enumerate() {
        if pai_filter(&m, &s.alpha, &num).map_err(|e| e.to_string())? {
            passing.push(i);
        }
    }
    ensure(passing.len() == 1, format!("{} solutions pass the filter", passing.len()))?;
    ensure(matched[passing[0]] == Some(0), "the filter keeps the wrong solution")?;
    Ok(format!("flat, d=2 in {secs:.2} s; output ({}, {}); 2 PAI solutions, 1 passes", y[0], y[1]))
}

fn criterion3(json: &str) -> Outcome {
    let (d, path, _) = flat_summary(json)?;
    ensure(d == 2 && path == [3, 1, 3], format!("d={d}, path {path:?}"))?;
    let (code, v) = verify_json("academic2.sys", "x1 + x2, x3 + x4", DEFAULT_SEED);
    ensure(code == 0 && v["report"]["d"] == 2, format!("verify exit {code}, d={}", v["report"]["d"]))?;
    Ok("flat, d=2, path [3, 1, 3]; (x1+x2, x3+x4) verified with d=2".into())
}

fn criterion4() -> Outcome {
    let mut r = rng(4);
    let num = Numerics::default();
    let mut sizes = Vec::new();
    for k in 0..20 {
        let m = random_linear(&mut r, k);
        let name = &m.name;
        ensure(sfl_test(&m, &num).map_err(|e| e.to_string())?, format!("{name}: not SFL"))?;
        let y = extract_linearizing_output(&m, &[], &num).map_err(|e| format!("{name}: {e}"))?;
        let rep = verify_flat_output(&m, &y, m.n() + 4, &num).map_err(|e| format!("{name}: {e}"))?;
        ensure(rep.verified && rep.d == Some(0), format!("{name}: extracted output fails: {}", rep.message))?;
        let (v, _) = run(&m, &RunConfig::for_model(&m), &num);
        match v {
            Verdict::Flat { d: 0, .. } => {}
            other => return Err(format!("{name}: verdict {other:?}")),
        }
        sizes.push(m.n());
    }
    Ok(format!("20 systems with n in {sizes:?}: SFL, d=0, outputs verified"))
}

fn normalized_jacobi(x: &VectorField, y: &VectorField, z: &VectorField, dom: &dynflat::symcore::Domain, num: &Numerics) -> f64 {
    let terms = [
        lie_bracket(x, &lie_bracket(y, z)),
        lie_bracket(y, &lie_bracket(z, x)),
        lie_bracket(z, &lie_bracket(x, y)),
    ];
    let n = x.comps().len();
    let exprs: Vec<Expr> = terms.iter().flat_map(|t| t.comps().to_vec()).collect();
    let tape = dom.compile(&exprs).unwrap();
    let mut worst = 0.0f64;
    for (_, ev) in dom.sample_eval(num, &tape, 20).unwrap() {
        for i in 0..n {
            let v = [ev.values[i], ev.values[n + i], ev.values[2 * n + i]];
            let scale = v.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
            worst = worst.max((v[0] + v[1] + v[2]).abs() / scale);
        }
    }
    worst
}

fn criterion5() -> Outcome {
    let names = ["x1", "x2", "x3", "x4"];
    let c = coords_of(&names);
    let dom = dynflat::symcore::Domain::new(&syms(&names), &[], &[]);
    let num = Numerics::default();
    let mut r = rng(5);

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let f: Vec<VectorField> = (0..3).map(|_| random_field(&mut r, &c, &names)).collect();
        worst = worst.max(normalized_jacobi(&f[0], &f[1], &f[2], &dom, &num));
    }
    ensure(worst <= 1e-9, format!("Jacobi residual {worst:e}"))?;

    for k in 0..50 {
        let f: Vec<VectorField> = (0..2).map(|_| random_field(&mut r, &c, &names)).collect();
        let d = Distribution::new(&c, f);
        let flag = derived_flag(&d, 4, &dom, &num).map_err(|e| format!("flag {k}: {e}"))?;
        for w in flag.windows(2) {
            let r0 = w[0].rank(&dom, &num).unwrap();
            let r1 = w[1].rank(&dom, &num).unwrap();
            ensure(r0 <= r1, format!("flag {k}: rank drops {r0} -> {r1}"))?;
            ensure(members_mod(w[0].fields(), &w[1], &dom, &num).unwrap(), format!("flag {k}: not nested"))?;
        }
    }

    let mut nontrivial = 0;
    for k in 0..20 {
        let m = if k % 2 == 0 { random_substituted(&mut r, k) } else { random_affine(&mut r, k) };
        let sf = system_fields(&m);
        let mdom = m.sampling_domain();
        let mut fields = sf.inputs.clone();
        fields.extend(sf.inputs.iter().map(|g| lie_bracket(&sf.drift, g)));
        let d = Distribution::new(&sf.coords, fields);
        let cd = cauchy_characteristic(&d, &mdom, &num).map_err(|e| format!("cauchy {k}: {e}"))?;
        ensure(members_mod(cd.fields(), &d, &mdom, &num).unwrap(), format!("cauchy {k}: C(D) not in D"))?;
        ensure(is_involutive(&cd, &mdom, &num).unwrap(), format!("cauchy {k}: C(D) not involutive"))?;
        if cd.rank(&mdom, &num).unwrap() > 0 {
            nontrivial += 1;
        }
    }

    for k in 0..20 {
        let m = if k % 2 == 0 { random_substituted(&mut r, k) } else { random_affine(&mut r, k) };
        let ch = random_input_change(&mut r, &m);
        let mv = apply_change(&m, &ch);
        let d1 = |m: &dynflat::sysdsl::SystemModel| {
            let sf = system_fields(m);
            let mut f = sf.inputs.clone();
            f.extend(sf.inputs.iter().map(|g| lie_bracket(&sf.drift, g)));
            Distribution::new(&sf.coords, f)
        };
        let before = d1(&m);
        let after = d1(&mv);
        let pushed: Vec<VectorField> = after.fields().iter().map(|v| push_forward(v, &m, &ch)).collect();
        let pushed = Distribution::new(before.coords(), pushed);
        let mdom = m.sampling_domain();
        let a = members_mod(pushed.fields(), &before, &mdom, &num).map_err(|e| e.to_string())?;
        let b = members_mod(before.fields(), &pushed, &mdom, &num).map_err(|e| e.to_string())?;
        ensure(a && b, format!("feedback case {k}: spans differ"))?;
    }
    Ok(format!(
        "Jacobi max residual {worst:.1e} over 50 triples; 50 flags monotone; 20 Cauchy cases ({nontrivial} nontrivial); 20 feedback changes keep D1"
    ))
}

fn criterion6() -> Outcome {
    let mut r = rng(6);
    let num = Numerics::default();
    let mut counts = Vec::new();
    let mut k = 0;
    while counts.len() < 20 {
        k += 1;
        let m = random_substituted(&mut r, k);
        if ai_test(&m, &num).map_err(|e| e.to_string())? {
            continue;
        }
        match pai_condition_solutions(&m, &num) {
            Ok(s) => {
                ensure(s.len() <= 2, format!("{}: {} solutions", m.name, s.len()))?;
                counts.push(s.len().to_string());
            }
            Err(Error::NoSolution(_)) => counts.push("0".into()),
            Err(e) => counts.push(format!("error({e})")),
        }
    }
    let errors = counts.iter().filter(|c| c.starts_with("error")).count();
    ensure(errors == 0, format!("{errors} systems could not be solved: {counts:?}"))?;
    Ok(format!("solution counts over 20 non-AI systems: [{}]", counts.join(", ")))
}

fn criterion7() -> Outcome {
    let (code, v) = verify_json("vtol.sys", "x, z", DEFAULT_SEED);
    let rep = &v["report"];
    ensure(code == 2 && rep["verified"] == false, format!("y=(x, z) exit {code}"))?;
    ensure(rep["max_order"] == 10, format!("searched only to {}", rep["max_order"]))?;
    let num = Numerics::default();
    let mut total = 0;
    for f in ["vtol.sys", "academic1.sys", "academic2.sys"] {
        let m = load(f);
        let (_, trace) = run(&m, &RunConfig::for_model(&m), &num);
        for l in trace.links() {
            let ok = l.step.check_inverse(&l.parent, &l.child, &num).map_err(|e| format!("{f}: {e}"))?;
            ensure(ok, format!("{f}: inverse fails for {:?} step", l.step.kind))?;
            total += 1;
        }
    }
    Ok(format!("y=(x, z) rejected up to #R=10; {total} trace steps invert"))
}

fn criterion8(first: &[(String, String)]) -> Outcome {
    for (file, json) in first {
        let (_, again) = check_json(file, DEFAULT_SEED);
        ensure(&again == json, format!("{file}: traces differ"))?;
    }
    let bytes: usize = first.iter().map(|(_, j)| j.len()).sum();
    Ok(format!("3 fixtures reproduce byte-identical traces ({bytes} bytes)"))
}

fn report(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = t.elapsed().as_secs_f64();
    match &res {
        Ok(m) => println!("criterion {n}: PASS ({secs:.1} s) {m}"),
        Err(m) => println!("criterion {n}: FAIL ({secs:.1} s) {m}"),
    }
    res.is_ok()
}

fn timed_check(file: &str) -> (String, f64) {
    let t = Instant::now();
    let (_, json) = check_json(file, DEFAULT_SEED);
    (json, t.elapsed().as_secs_f64())
}

fn main() {
    let (vtol, t1) = timed_check("vtol.sys");
    let (ac1, t2) = timed_check("academic1.sys");
    let (ac2, _) = timed_check("academic2.sys");
    let results = [
        report(1, || criterion1(&vtol, t1)),
        report(2, || criterion2(&ac1, t2)),
        report(3, || criterion3(&ac2)),
        report(4, criterion4),
        report(5, criterion5),
        report(6, criterion6),
        report(7, criterion7),
        report(8, || {
            criterion8(&[
                ("vtol.sys".into(), vtol.clone()),
                ("academic1.sys".into(), ac1.clone()),
                ("academic2.sys".into(), ac2.clone()),
            ])
        }),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} of 8 criteria pass", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
