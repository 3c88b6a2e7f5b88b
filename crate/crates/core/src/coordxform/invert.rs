//! Symbolic inversion by isolation: affine solving or peeling a single
//! occurrence of the unknown.

use std::collections::BTreeMap;

use crate::symcore::expr::{add, Kind};
use crate::symcore::linalg::{divide, tidy};
use crate::symcore::{diff, pow, subs1, substitute, Expr, Func, Symbol};

/// Solves `e = target` for `v`. Returns the solution and the denominators
/// that must stay nonzero for it to be valid.
pub fn isolate(e: &Expr, v: &Symbol, target: &Expr) -> Option<(Expr, Vec<Expr>)> {
    let mut dens = Vec::new();
    let sol = isolate_rec(e, v, target, &mut dens, 0)?;
    Some((sol, dens))
}

fn isolate_rec(e: &Expr, v: &Symbol, t: &Expr, dens: &mut Vec<Expr>, depth: usize) -> Option<Expr> {
    if depth > 64 || !e.contains(v) {
        return None;
    }
    if e.as_symbol() == Some(v) {
        return Some(t.clone());
    }
    let d = tidy(&diff(e, v));
    if !d.contains(v) && !d.is_zero_literal() {
        let mut rest = tidy(&(e - &(&d * &Expr::symbol(v))));
        if rest.contains(v) {
            rest = tidy(&subs1(e, v, &Expr::zero()));
        }
        if !rest.contains(v) {
            if d.as_num().is_none() {
                dens.push(d.clone());
            }
            return Some(divide(&tidy(&(t - &rest)), &d));
        }
    }
    match e.kind() {
        Kind::Add(terms) => {
            let (with, without): (Vec<&Expr>, Vec<&Expr>) = terms.iter().partition(|x| x.contains(v));
            if with.len() != 1 {
                return None;
            }
            let rest = add(without.into_iter().cloned().collect());
            isolate_rec(with[0], v, &tidy(&(t - &rest)), dens, depth + 1)
        }
        Kind::Mul(factors) => {
            let (with, without): (Vec<&Expr>, Vec<&Expr>) = factors.iter().partition(|x| x.contains(v));
            if with.len() != 1 {
                return None;
            }
            let rest = crate::symcore::mul(without.into_iter().cloned().collect());
            if rest.as_num().is_none() {
                dens.push(rest.clone());
            }
            isolate_rec(with[0], v, &divide(t, &rest), dens, depth + 1)
        }
        Kind::Pow(b, r) => {
            let inv = r.recip();
            isolate_rec(b, v, &pow(t.clone(), inv), dens, depth + 1)
        }
        Kind::Call(f, arg) => {
            let t2 = match f {
                Func::Sin => t.asin(),
                Func::Tan => t.atan(),
                Func::Exp => t.ln(),
                Func::Ln => t.exp(),
                Func::Asin => t.sin(),
                Func::Atan => t.tan(),
                Func::Cos => return None,
            };
            isolate_rec(arg, v, &t2, dens, depth + 1)
        }
        _ => None,
    }
}

/// Solves the equations `lhs_i = rhs_i` for `unknowns` by repeated
/// isolation. Returns the solution map and collected denominators.
pub fn solve_system(eqs: &[(Expr, Expr)], unknowns: &[Symbol]) -> Option<(BTreeMap<Symbol, Expr>, Vec<Expr>)> {
    let mut eqs: Vec<(Expr, Expr)> = eqs.to_vec();
    let mut left: Vec<Symbol> = unknowns.to_vec();
    let mut sol: BTreeMap<Symbol, Expr> = BTreeMap::new();
    let mut dens = Vec::new();
    while !left.is_empty() {
        // prefer equations with the fewest remaining unknowns
        let mut order: Vec<usize> = (0..eqs.len()).collect();
        let count = |e: &Expr| left.iter().filter(|s| e.contains(s)).count();
        order.sort_by_key(|&i| count(&eqs[i].0));
        let mut found = None;
        'outer: for &i in &order {
            if count(&eqs[i].0) == 0 {
                continue;
            }
            for s in left.iter().rev() {
                if let Some((x, d)) = isolate(&eqs[i].0, s, &eqs[i].1) {
                    if !x.contains_any(&left) {
                        found = Some((i, s.clone(), x, d));
                        break 'outer;
                    }
                }
            }
            // solutions that still mention other unknowns are fine as long as
            // they do not mention the variable being solved for
            for s in left.iter().rev() {
                if let Some((x, d)) = isolate(&eqs[i].0, s, &eqs[i].1) {
                    if !x.contains(s) {
                        found = Some((i, s.clone(), x, d));
                        break 'outer;
                    }
                }
            }
        }
        let (i, s, x, d) = found?;
        eqs.remove(i);
        left.retain(|y| y != &s);
        let one: BTreeMap<Symbol, Expr> = [(s.clone(), x.clone())].into_iter().collect();
        for (l, _) in eqs.iter_mut() {
            *l = tidy(&substitute(l, &one));
        }
        for y in sol.values_mut() {
            *y = tidy(&substitute(y, &one));
        }
        dens.extend(d.iter().map(|e| substitute(e, &one)));
        for e in dens.iter_mut() {
            *e = substitute(e, &one);
        }
        sol.insert(s, x);
    }
    Some((sol, dens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn affine_and_peeled() {
        let s = Symbol::new("u1");
        let (x, d) = isolate(&p("u1/u2"), &s, &p("w")).unwrap();
        assert_eq!(x, p("u2*w"));
        assert!(d.is_empty() || d == vec![p("1/u2")]);
        let (x, _) = isolate(&p("sin(u1) + 3"), &s, &p("w")).unwrap();
        assert_eq!(x, p("asin(w - 3)"));
        assert!(isolate(&p("cos(u1)"), &s, &p("w")).is_none());
        let vx = Symbol::new("v_x");
        let (x, d) = isolate(&p("cos(theta)*v_x + sin(theta)*v_z - epsilon*omega"), &vx, &p("b")).unwrap();
        assert_eq!(d, vec![p("cos(theta)")]);
        assert_eq!(x, p("(b - sin(theta)*v_z + epsilon*omega)/cos(theta)"));
    }

    #[test]
    fn linear_pair() {
        let eqs = vec![(p("u1 + u2"), p("a")), (p("u1 - u2"), p("b"))];
        let (sol, _) = solve_system(&eqs, &[Symbol::new("u1"), Symbol::new("u2")]).unwrap();
        let u1 = &sol[&Symbol::new("u1")];
        let u2 = &sol[&Symbol::new("u2")];
        assert_eq!(tidy(u1), p("a/2 + b/2"));
        assert_eq!(tidy(u2), p("a/2 - b/2"));
    }
}
