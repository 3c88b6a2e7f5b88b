use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::One;

use super::expr::{add, call, mul, pow, Expr, Func, Kind, Rational, Symbol};

/// Exact partial derivative with respect to `v`.
pub fn diff(e: &Expr, v: &Symbol) -> Expr {
    let mut memo = HashMap::new();
    diff_memo(e, v, &mut memo)
}

fn diff_memo(e: &Expr, v: &Symbol, memo: &mut HashMap<*const (), (Expr, Expr)>) -> Expr {
    if !e.contains(v) {
        return Expr::zero();
    }
    if let Some((_, d)) = memo.get(&e.ptr()) {
        return d.clone();
    }
    let d = match e.kind() {
        Kind::Num(_) => Expr::zero(),
        Kind::Sym(s) => {
            if s == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Kind::Add(ts) => add(ts.iter().map(|t| diff_memo(t, v, memo)).collect()),
        Kind::Mul(fs) => {
            let mut terms = Vec::new();
            for (i, f) in fs.iter().enumerate() {
                let df = diff_memo(f, v, memo);
                if df.is_zero_literal() {
                    continue;
                }
                let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                prod.push(df);
                prod.extend(fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()));
                terms.push(mul(prod));
            }
            add(terms)
        }
        Kind::Pow(b, p) => {
            let db = diff_memo(b, v, memo);
            let lowered = pow(b.clone(), p - Rational::one());
            mul(vec![Expr::rational(p.clone()), lowered, db])
        }
        Kind::Call(f, a) => {
            let da = diff_memo(a, v, memo);
            let outer = match f {
                Func::Sin => a.cos(),
                Func::Cos => a.sin().neg(),
                Func::Tan => add(vec![Expr::one(), a.tan().powi(2)]),
                Func::Asin => pow(
                    add(vec![Expr::one(), a.powi(2).neg()]),
                    Rational::new(BigInt::from(-1), BigInt::from(2)),
                ),
                Func::Atan => add(vec![Expr::one(), a.powi(2)]).recip(),
                Func::Exp => call(Func::Exp, a.clone()),
                Func::Ln => a.recip(),
            };
            mul(vec![outer, da])
        }
    };
    memo.insert(e.ptr(), (e.clone(), d.clone()));
    d
}

/// Gradient with respect to an ordered variable list.
pub fn gradient(e: &Expr, vars: &[Symbol]) -> Vec<Expr> {
    vars.iter().map(|v| diff(e, v)).collect()
}

/// Jacobian of a vector of expressions: row `i` holds the gradient of `es[i]`.
pub fn jacobian(es: &[Expr], vars: &[Symbol]) -> Vec<Vec<Expr>> {
    es.iter().map(|e| gradient(e, vars)).collect()
}

/// Simultaneous substitution: every occurrence of a bound symbol is replaced
/// by its image in the original expression, with no chaining.
pub fn substitute(e: &Expr, bindings: &BTreeMap<Symbol, Expr>) -> Expr {
    if bindings.is_empty() {
        return e.clone();
    }
    let mask = bindings.keys().map(|k| Expr::symbol(k).mask()).fold(0, |a, b| a | b);
    let mut memo = HashMap::new();
    subst_memo(e, bindings, mask, &mut memo)
}

fn subst_memo(
    e: &Expr,
    b: &BTreeMap<Symbol, Expr>,
    mask: u64,
    memo: &mut HashMap<*const (), (Expr, Expr)>,
) -> Expr {
    if e.mask() & mask == 0 {
        return e.clone();
    }
    if let Some((_, r)) = memo.get(&e.ptr()) {
        return r.clone();
    }
    let r = match e.kind() {
        Kind::Num(_) => e.clone(),
        Kind::Sym(s) => b.get(s).cloned().unwrap_or_else(|| e.clone()),
        Kind::Add(ts) => add(ts.iter().map(|t| subst_memo(t, b, mask, memo)).collect()),
        Kind::Mul(fs) => mul(fs.iter().map(|t| subst_memo(t, b, mask, memo)).collect()),
        Kind::Pow(x, p) => pow(subst_memo(x, b, mask, memo), p.clone()),
        Kind::Call(f, a) => call(*f, subst_memo(a, b, mask, memo)),
    };
    memo.insert(e.ptr(), (e.clone(), r.clone()));
    r
}

/// Substitutes a single symbol.
pub fn subs1(e: &Expr, v: &Symbol, by: &Expr) -> Expr {
    let mut m = BTreeMap::new();
    m.insert(v.clone(), by.clone());
    substitute(e, &m)
}

/// Rebuilds the tree bottom-up through the canonicalizing constructors.
pub fn rebuild(e: &Expr) -> Expr {
    fn go(e: &Expr, memo: &mut HashMap<*const (), (Expr, Expr)>) -> Expr {
        if let Some((_, r)) = memo.get(&e.ptr()) {
            return r.clone();
        }
        let r = match e.kind() {
            Kind::Num(_) | Kind::Sym(_) => e.clone(),
            Kind::Add(ts) => add(ts.iter().map(|t| go(t, memo)).collect()),
            Kind::Mul(fs) => mul(fs.iter().map(|t| go(t, memo)).collect()),
            Kind::Pow(x, p) => pow(go(x, memo), p.clone()),
            Kind::Call(f, a) => call(*f, go(a, memo)),
        };
        memo.insert(e.ptr(), (e.clone(), r.clone()));
        r
    }
    go(e, &mut HashMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn table_derivatives() {
        let th = Symbol::new("theta");
        assert_eq!(diff(&p("sin(theta)"), &th), p("cos(theta)"));
        assert_eq!(diff(&p("cos(theta)"), &th), p("-sin(theta)"));
        assert_eq!(diff(&p("7/3"), &th), Expr::zero());
        assert_eq!(diff(&p("theta^3"), &th), p("3*theta^2"));
    }

    #[test]
    fn ratio_inside_sine() {
        let u1 = Symbol::new("u1");
        let d = diff(&p("sin(u1/u2)"), &u1);
        assert_eq!(d, p("cos(u1/u2)/u2"));
    }

    #[test]
    fn substitution_is_simultaneous() {
        let mut b = BTreeMap::new();
        b.insert(Symbol::new("x"), p("y"));
        b.insert(Symbol::new("y"), p("x"));
        assert_eq!(substitute(&p("x - 2*y"), &b), p("y - 2*x"));
        let mut b = BTreeMap::new();
        b.insert(Symbol::new("x"), p("y"));
        assert_eq!(substitute(&p("x + y"), &b), p("2*y"));
        assert_eq!(substitute(&p("x + y"), &BTreeMap::new()), p("x + y"));
    }

    #[test]
    fn straightened_input_collapses() {
        let mut b = BTreeMap::new();
        b.insert(Symbol::new("u1"), p("u1_bar*u2"));
        assert_eq!(substitute(&p("sin(u1/u2)"), &b), p("sin(u1_bar)"));
    }
}
