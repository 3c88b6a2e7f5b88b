//! Random model and field generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use dynflat::diffgeo::{coords, Coords, VectorField};
use dynflat::symcore::{diff, parse_expr, substitute, Expr, Numerics, Symbol};
use dynflat::sysdsl::{parse_system, SystemModel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/systems").join(name)
}

pub fn load(name: &str) -> SystemModel {
    let text = std::fs::read_to_string(fixture(name)).unwrap();
    parse_system(&text).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn p(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

pub fn syms(names: &[&str]) -> Vec<Symbol> {
    names.iter().map(|s| Symbol::new(s)).collect()
}

fn nonzero(r: &mut ChaCha8Rng, k: i64) -> i64 {
    let v = r.random_range(1..=k);
    if r.random_bool(0.5) {
        v
    } else {
        -v
    }
}

/// Sum of `terms` random monomials of degree at most `deg` in `vars`.
pub fn random_poly(r: &mut ChaCha8Rng, vars: &[&str], terms: usize, deg: u32) -> String {
    let mut out = Vec::new();
    for _ in 0..terms {
        let c = nonzero(r, 3);
        let d = r.random_range(0..=deg);
        let mut mono = vec![c.to_string()];
        for _ in 0..d {
            mono.push(vars[r.random_range(0..vars.len())].to_string());
        }
        out.push(format!("({})", mono.join("*")));
    }
    out.join(" + ")
}

/// Like [`random_poly`] with an occasional sine or cosine factor.
pub fn random_smooth(r: &mut ChaCha8Rng, vars: &[&str], terms: usize) -> String {
    let mut s = random_poly(r, vars, terms, 2);
    if r.random_bool(0.4) {
        let v = vars[r.random_range(0..vars.len())];
        let f = if r.random_bool(0.5) { "sin" } else { "cos" };
        s = format!("{s} + {}*{f}({v})", nonzero(r, 2));
    }
    s
}

pub fn random_field(r: &mut ChaCha8Rng, c: &Coords, names: &[&str]) -> VectorField {
    let comps = (0..names.len())
        .map(|_| {
            if r.random_bool(0.25) {
                Expr::zero()
            } else {
                let t = r.random_range(1..=3);
                p(&random_poly(r, names, t, 2))
            }
        })
        .collect();
    VectorField::new(c, comps)
}

pub fn coords_of(names: &[&str]) -> Coords {
    coords(&syms(names))
}

fn build(name: &str, n: usize, rhs: &[String], domain: &[&str]) -> String {
    let mut t = format!("system {name}\nstate");
    for i in 1..=n {
        t.push_str(&format!(" x{i}"));
    }
    t.push_str("\ninput u1 u2\n");
    for d in domain {
        t.push_str(&format!("domain {d} != 0\n"));
    }
    for (i, f) in rhs.iter().enumerate() {
        t.push_str(&format!("dot x{} = {f}\n", i + 1));
    }
    t
}

fn controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut k = DMatrix::zeros(n, 2 * n);
    let mut blk = b.clone();
    for i in 0..n {
        k.view_mut((0, 2 * i), (n, 2)).copy_from(&blk);
        blk = a * blk;
    }
    k.rank(1e-9) == n && b.rank(1e-9) == 2
}

/// A controllable linear system `x' = A x + B u` with small integer entries.
pub fn random_linear(r: &mut ChaCha8Rng, tag: usize) -> SystemModel {
    loop {
        let n = r.random_range(2..=6);
        let a = DMatrix::from_fn(n, n, |_, _| if r.random_bool(0.35) { nonzero(r, 2) as f64 } else { 0.0 });
        let b = DMatrix::from_fn(n, 2, |_, _| if r.random_bool(0.4) { nonzero(r, 2) as f64 } else { 0.0 });
        if !controllable(&a, &b) {
            continue;
        }
        let rhs: Vec<String> = (0..n)
            .map(|i| {
                let mut terms: Vec<String> = (0..n)
                    .filter(|&j| a[(i, j)] != 0.0)
                    .map(|j| format!("({})*x{}", a[(i, j)], j + 1))
                    .collect();
                terms.extend((0..2).filter(|&j| b[(i, j)] != 0.0).map(|j| format!("({})*u{}", b[(i, j)], j + 1)));
                if terms.is_empty() {
                    "0".into()
                } else {
                    terms.join(" + ")
                }
            })
            .collect();
        return parse_system(&build(&format!("linear{tag}"), n, &rhs, &[])).unwrap();
    }
}

const NONAFFINE: &[&str] = &[
    "u1*u2",
    "u1^2",
    "u2^2",
    "sin(u1)",
    "u1^3",
    "u1*u2^2",
    "exp(u2/2)",
    "u1^2/u2",
    "sin(u1/u2)",
    "u1*cos(u2)",
];

/// An affine system with a third input `w`, where `w` is replaced by a
/// random non-affine function of the two inputs. Generically not input
/// affine under any static feedback.
pub fn random_substituted(r: &mut ChaCha8Rng, tag: usize) -> SystemModel {
    random_two_input(r, &format!("subst{tag}"), true)
}

/// A random input-affine two-input system.
pub fn random_affine(r: &mut ChaCha8Rng, tag: usize) -> SystemModel {
    random_two_input(r, &format!("affine{tag}"), false)
}

fn random_two_input(r: &mut ChaCha8Rng, name: &str, with_w: bool) -> SystemModel {
    loop {
        let n = r.random_range(3..=4);
        let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let xr: Vec<&str> = xs.iter().map(|s| s.as_str()).collect();
        let w = NONAFFINE[r.random_range(0..NONAFFINE.len())];
        let rhs: Vec<String> = (0..n)
            .map(|_| {
                let mut parts = Vec::new();
                if r.random_bool(0.6) {
                    let t = r.random_range(1..=2);
                    parts.push(random_poly(r, &xr, t, 2));
                }
                for u in ["u1", "u2", "w"] {
                    if (u != "w" || with_w) && r.random_bool(0.6) {
                        let t = r.random_range(1..=2);
                        let b = random_poly(r, &xr, t, 1);
                        let arg = if u == "w" { format!("({w})") } else { u.to_string() };
                        parts.push(format!("({b})*{arg}"));
                    }
                }
                if parts.is_empty() {
                    "0".into()
                } else {
                    parts.join(" + ")
                }
            })
            .collect();
        let domain: &[&str] = if with_w && w.contains("/u2") { &["u2"] } else { &[] };
        if let Ok(m) = parse_system(&build(name, n, &rhs, domain)) {
            return m;
        }
    }
}

/// Triangular input change `u1 = v1 + p(x)`, `u2 = v2 + c v1 + q(x)`.
pub struct InputChange {
    pub forward: BTreeMap<Symbol, Expr>,
    pub backward: BTreeMap<Symbol, Expr>,
}

pub fn random_input_change(r: &mut ChaCha8Rng, m: &SystemModel) -> InputChange {
    let xs: Vec<String> = m.states.iter().map(|s| s.to_string()).collect();
    let xr: Vec<&str> = xs.iter().map(|s| s.as_str()).collect();
    let pp = p(&random_poly(r, &xr, 2, 2));
    let qq = p(&random_poly(r, &xr, 2, 2));
    let c = Expr::from(nonzero(r, 2));
    let (u1, u2, v1, v2) = (p("u1"), p("u2"), p("v1"), p("v2"));
    let mut forward = BTreeMap::new();
    forward.insert(Symbol::new("u1"), &v1 + &pp);
    forward.insert(Symbol::new("u2"), &(&v2 + &(&c * &v1)) + &qq);
    let mut backward = BTreeMap::new();
    let v1b = &u1 - &pp;
    backward.insert(Symbol::new("v2"), &(&u2 - &qq) - &(&c * &v1b));
    backward.insert(Symbol::new("v1"), v1b);
    InputChange { forward, backward }
}

/// The model in the new inputs `v1, v2`.
pub fn apply_change(m: &SystemModel, ch: &InputChange) -> SystemModel {
    let mut out = m.clone();
    out.inputs = syms(&["v1", "v2"]);
    out.rhs = m.rhs.iter().map(|f| substitute(f, &ch.forward)).collect();
    out.domain = m.domain.iter().map(|f| substitute(f, &ch.forward)).collect();
    out
}

/// Pushes a field on `(x, v)` forward to `(x, u)`.
pub fn push_forward(v: &VectorField, m: &SystemModel, ch: &InputChange) -> VectorField {
    let target = coords(&m.coords());
    let src: Vec<Symbol> = v.coords().iter().cloned().collect();
    let mut comps = Vec::new();
    for s in m.states.iter() {
        comps.push(substitute(&v.comp(s), &ch.backward));
    }
    for u in &m.inputs {
        let psi = &ch.forward[u];
        let mut acc = Expr::zero();
        for c in &src {
            acc = &acc + &(&diff(psi, c) * &v.comp(c));
        }
        comps.push(substitute(&acc, &ch.backward));
    }
    VectorField::new(&target, comps)
}

pub fn default_num() -> Numerics {
    Numerics::default()
}
