//! Compiled floating-point evaluation of expression batches.
//!
//! Shared subexpressions are evaluated once. Alongside each value the tape
//! propagates a first-order magnitude estimate of the rounding error scale,
//! which the zero test uses to tell structural zeros from cancellation noise.

use std::collections::HashMap;

use num_traits::{Signed, ToPrimitive};

use super::expr::{Expr, Func, Kind, Rational, Symbol};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    Pow(usize, PowKind),
    Call(Func, usize),
}

#[derive(Clone, Copy, Debug)]
enum PowKind {
    Int(i32),
    /// `p/q` with `q` odd: defined for negative bases.
    OddRoot(f64, i64),
    /// `p/q` with `q` even: requires a non-negative base.
    EvenRoot(f64),
}

impl PowKind {
    fn from(r: &Rational) -> PowKind {
        if r.is_integer() {
            PowKind::Int(r.numer().to_i32().unwrap_or(i32::MAX))
        } else {
            let p = r.numer().to_i64().unwrap_or(1);
            let q = r.denom().to_i64().unwrap_or(2);
            let f = p as f64 / q as f64;
            if q % 2 == 1 {
                PowKind::OddRoot(f, p)
            } else {
                PowKind::EvenRoot(f)
            }
        }
    }

    fn exponent(self) -> f64 {
        match self {
            PowKind::Int(k) => k as f64,
            PowKind::OddRoot(f, _) | PowKind::EvenRoot(f) => f,
        }
    }

    fn apply(self, b: f64) -> Result<f64> {
        match self {
            PowKind::Int(k) => {
                if b == 0.0 && k < 0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                Ok(b.powi(k))
            }
            PowKind::OddRoot(f, p) => {
                if b == 0.0 && f < 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                let m = b.abs().powf(f);
                Ok(if b < 0.0 && p % 2 != 0 { -m } else { m })
            }
            PowKind::EvenRoot(f) => {
                if b < 0.0 {
                    return Err(Error::Domain("even root of a negative number".into()));
                }
                if b == 0.0 && f < 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                Ok(b.powf(f))
            }
        }
    }

    /// Derivative `p * b^(p-1)`.
    fn deriv(self, b: f64) -> Result<f64> {
        let e = self.exponent();
        let lowered = match self {
            PowKind::Int(k) => PowKind::Int(k - 1).apply(b)?,
            PowKind::OddRoot(_, p) => {
                let m = b.abs().powf(e - 1.0);
                // b^(p/q - 1) has numerator p - q; q odd flips parity.
                if b < 0.0 && (p % 2 == 0) {
                    -m
                } else {
                    m
                }
            }
            PowKind::EvenRoot(_) => {
                if b <= 0.0 {
                    return Err(Error::Domain("derivative of a root at zero".into()));
                }
                b.powf(e - 1.0)
            }
        };
        Ok(e * lowered)
    }
}

/// A batch of expressions compiled over an ordered symbol list.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    nvars: usize,
}

/// Values and error-scale estimates of every output at one point.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub values: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Evaluation {
    /// Whether output `i` is indistinguishable from zero at this point.
    pub fn is_small(&self, i: usize, tol: f64) -> bool {
        self.values[i].abs() <= tol * (1.0 + self.scales[i])
    }
}

impl Tape {
    pub fn compile(exprs: &[Expr], vars: &[Symbol]) -> Result<Tape> {
        let index: HashMap<&Symbol, usize> = vars.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut b = Builder {
            ops: Vec::new(),
            cse: HashMap::new(),
            index,
        };
        let outputs = exprs.iter().map(|e| b.node(e)).collect::<Result<Vec<_>>>()?;
        Ok(Tape {
            ops: b.ops,
            outputs,
            nvars: vars.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    fn forward(&self, point: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        assert_eq!(point.len(), self.nvars, "point dimension mismatch");
        let mut v = vec![0.0; self.ops.len()];
        let mut s = vec![0.0; self.ops.len()];
        for (i, op) in self.ops.iter().enumerate() {
            let (val, scale) = match op {
                Op::Const(c) => (*c, c.abs()),
                Op::Var(k) => (point[*k], point[*k].abs()),
                Op::Add(xs) => {
                    let mut acc = 0.0;
                    let mut sc = 0.0;
                    for &x in xs {
                        acc += v[x];
                        sc += s[x];
                    }
                    (acc, sc)
                }
                Op::Mul(xs) => {
                    let mut acc = 1.0;
                    let mut sc = 1.0;
                    for &x in xs {
                        acc *= v[x];
                        sc *= s[x];
                    }
                    (acc, sc)
                }
                Op::Pow(x, k) => {
                    let b = v[x.to_owned()];
                    let val = k.apply(b)?;
                    let rel = if b != 0.0 { s[*x] / b.abs() } else { 1.0 };
                    (val, val.abs() * (1.0 + k.exponent().abs() * rel))
                }
                Op::Call(f, x) => {
                    let a = v[*x];
                    let sa = s[*x];
                    match f {
                        Func::Sin => (a.sin(), a.sin().abs() + a.cos().abs() * sa),
                        Func::Cos => (a.cos(), a.cos().abs() + a.sin().abs() * sa),
                        Func::Tan => {
                            let t = a.tan();
                            (t, t.abs() + (1.0 + t * t) * sa)
                        }
                        Func::Asin => {
                            if !(-1.0..=1.0).contains(&a) {
                                return Err(Error::Domain(format!("asin argument {a} outside [-1, 1]")));
                            }
                            let d = (1.0 - a * a).sqrt();
                            (a.asin(), a.asin().abs() + if d > 0.0 { sa / d } else { f64::INFINITY })
                        }
                        Func::Atan => (a.atan(), a.atan().abs() + sa / (1.0 + a * a)),
                        Func::Exp => {
                            let e = a.exp();
                            (e, e * (1.0 + sa))
                        }
                        Func::Ln => {
                            if a <= 0.0 {
                                return Err(Error::Domain(format!("ln of non-positive {a}")));
                            }
                            (a.ln(), a.ln().abs() + sa / a)
                        }
                    }
                }
            };
            if !val.is_finite() {
                return Err(Error::Domain("non-finite value".into()));
            }
            v[i] = val;
            s[i] = if scale.is_finite() { scale } else { f64::MAX };
        }
        Ok((v, s))
    }

    pub fn eval(&self, point: &[f64]) -> Result<Evaluation> {
        let (v, s) = self.forward(point)?;
        Ok(Evaluation {
            values: self.outputs.iter().map(|&o| v[o]).collect(),
            scales: self.outputs.iter().map(|&o| s[o]).collect(),
        })
    }

    /// Values plus the dense Jacobian (outputs x variables) by reverse sweeps.
    pub fn jacobian(&self, point: &[f64]) -> Result<(Evaluation, Vec<Vec<f64>>)> {
        let (v, s) = self.forward(point)?;
        // local partials per op, computed once
        let mut partials: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let p = match op {
                Op::Const(_) | Op::Var(_) => Vec::new(),
                Op::Add(xs) => xs.iter().map(|&x| (x, 1.0)).collect(),
                Op::Mul(xs) => {
                    let mut out = Vec::with_capacity(xs.len());
                    for (i, &x) in xs.iter().enumerate() {
                        let mut prod = 1.0;
                        for (j, &y) in xs.iter().enumerate() {
                            if i != j {
                                prod *= v[y];
                            }
                        }
                        out.push((x, prod));
                    }
                    out
                }
                Op::Pow(x, k) => vec![(*x, k.deriv(v[*x])?)],
                Op::Call(f, x) => {
                    let a = v[*x];
                    let d = match f {
                        Func::Sin => a.cos(),
                        Func::Cos => -a.sin(),
                        Func::Tan => 1.0 + a.tan().powi(2),
                        Func::Asin => {
                            let r = 1.0 - a * a;
                            if r <= 0.0 {
                                return Err(Error::Domain("asin derivative at the boundary".into()));
                            }
                            1.0 / r.sqrt()
                        }
                        Func::Atan => 1.0 / (1.0 + a * a),
                        Func::Exp => a.exp(),
                        Func::Ln => 1.0 / a,
                    };
                    vec![(*x, d)]
                }
            };
            partials.push(p);
        }
        let mut jac = Vec::with_capacity(self.outputs.len());
        let mut adj = vec![0.0; self.ops.len()];
        for &o in &self.outputs {
            adj.iter_mut().for_each(|a| *a = 0.0);
            adj[o] = 1.0;
            let mut row = vec![0.0; self.nvars];
            for i in (0..=o).rev() {
                let a = adj[i];
                if a == 0.0 {
                    continue;
                }
                if let Op::Var(k) = self.ops[i] {
                    row[k] += a;
                }
                for &(x, d) in &partials[i] {
                    adj[x] += a * d;
                }
            }
            if row.iter().any(|r| !r.is_finite()) {
                return Err(Error::Domain("non-finite derivative".into()));
            }
            jac.push(row);
        }
        let ev = Evaluation {
            values: self.outputs.iter().map(|&o| v[o]).collect(),
            scales: self.outputs.iter().map(|&o| s[o]).collect(),
        };
        Ok((ev, jac))
    }
}

struct Builder<'a> {
    ops: Vec<Op>,
    cse: HashMap<Expr, usize>,
    index: HashMap<&'a Symbol, usize>,
}

impl Builder<'_> {
    fn push(&mut self, e: &Expr, op: Op) -> usize {
        self.ops.push(op);
        let i = self.ops.len() - 1;
        self.cse.insert(e.clone(), i);
        i
    }

    fn node(&mut self, e: &Expr) -> Result<usize> {
        if let Some(&i) = self.cse.get(e) {
            return Ok(i);
        }
        let op = match e.kind() {
            Kind::Num(r) => Op::Const(r.to_f64().unwrap_or(if r.is_negative() { f64::MIN } else { f64::MAX })),
            Kind::Sym(s) => Op::Var(*self.index.get(s).ok_or_else(|| Error::Unbound(s.to_string()))?),
            Kind::Add(ts) => Op::Add(ts.iter().map(|t| self.node(t)).collect::<Result<_>>()?),
            Kind::Mul(fs) => Op::Mul(fs.iter().map(|t| self.node(t)).collect::<Result<_>>()?),
            Kind::Pow(b, p) => Op::Pow(self.node(b)?, PowKind::from(p)),
            Kind::Call(f, a) => Op::Call(*f, self.node(a)?),
        };
        Ok(self.push(e, op))
    }
}

/// Evaluates one expression at explicit bindings.
pub fn eval_at(e: &Expr, bindings: &[(&str, f64)]) -> Result<f64> {
    let vars: Vec<Symbol> = bindings.iter().map(|(n, _)| Symbol::new(n)).collect();
    let point: Vec<f64> = bindings.iter().map(|(_, v)| *v).collect();
    let t = Tape::compile(std::slice::from_ref(e), &vars)?;
    Ok(t.eval(&point)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_expr;

    #[test]
    fn basic_values() {
        assert_eq!(eval_at(&parse_expr("x + 1").unwrap(), &[("x", 2.0)]).unwrap(), 3.0);
        assert_eq!(eval_at(&parse_expr("u1/u2").unwrap(), &[("u1", 1.0), ("u2", 2.0)]).unwrap(), 0.5);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(eval_at(&parse_expr("asin(2)").unwrap(), &[]), Err(Error::Domain(_))));
        assert!(matches!(eval_at(&parse_expr("ln(x)").unwrap(), &[("x", -1.0)]), Err(Error::Domain(_))));
        assert!(matches!(eval_at(&parse_expr("1/x").unwrap(), &[("x", 0.0)]), Err(Error::Domain(_))));
        assert!(matches!(eval_at(&parse_expr("sqrt(x)").unwrap(), &[("x", -1.0)]), Err(Error::Domain(_))));
    }

    #[test]
    fn unbound_symbol() {
        assert!(matches!(eval_at(&parse_expr("x + y").unwrap(), &[("x", 1.0)]), Err(Error::Unbound(_))));
    }

    #[test]
    fn odd_roots_of_negatives() {
        let v = eval_at(&parse_expr("x^(1/3)").unwrap(), &[("x", -8.0)]).unwrap();
        assert!((v + 2.0).abs() < 1e-12);
        let v = eval_at(&parse_expr("x^(2/3)").unwrap(), &[("x", -8.0)]).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reverse_mode_matches_symbolic() {
        let e = parse_expr("sin(x*y) + x^3/y - asin(x/2)").unwrap();
        let vars = [Symbol::new("x"), Symbol::new("y")];
        let t = Tape::compile(std::slice::from_ref(&e), &vars).unwrap();
        let (_, j) = t.jacobian(&[0.3, -1.2]).unwrap();
        for (k, v) in vars.iter().enumerate() {
            let d = crate::symcore::diff::diff(&e, v);
            let want = eval_at(&d, &[("x", 0.3), ("y", -1.2)]).unwrap();
            assert!((j[0][k] - want).abs() < 1e-12);
        }
    }
}
