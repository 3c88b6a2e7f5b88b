//! Laurent polynomials over opaque atoms with rational coefficients.
//!
//! Anything that is not a sum, a product or an integer power becomes an atom
//! (symbols, function calls, fractional powers, and sums raised to negative
//! powers). Used for exact square roots and exact division of expressions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::expr::{add, mul, pow, Expr, Kind, Rational};

/// Exponent vector compared lexicographically with implicit trailing zeros.
#[derive(Clone, Debug)]
pub struct Mono(Vec<i32>);

impl Mono {
    fn new(mut v: Vec<i32>) -> Mono {
        while v.last() == Some(&0) {
            v.pop();
        }
        Mono(v)
    }

    fn get(&self, i: usize) -> i32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    fn combine(&self, o: &Mono, f: impl Fn(i32, i32) -> i32) -> Mono {
        let n = self.0.len().max(o.0.len());
        Mono::new((0..n).map(|i| f(self.get(i), o.get(i))).collect())
    }
}

impl PartialEq for Mono {
    fn eq(&self, o: &Mono) -> bool {
        self.0 == o.0
    }
}

impl Eq for Mono {}

impl Ord for Mono {
    fn cmp(&self, o: &Mono) -> Ordering {
        let n = self.0.len().max(o.0.len());
        for i in 0..n {
            match self.get(i).cmp(&o.get(i)) {
                Ordering::Equal => {}
                x => return x,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Mono) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Atom registry shared by the polynomials of one computation.
#[derive(Default)]
pub struct PolyCtx {
    atoms: Vec<Expr>,
    index: HashMap<Expr, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    terms: BTreeMap<Mono, Rational>,
}

const TERM_LIMIT: usize = 4000;

impl Poly {
    pub fn zero() -> Poly {
        Poly { terms: BTreeMap::new() }
    }

    pub fn constant(c: Rational) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Mono::new(vec![]), c);
        }
        p
    }

    fn monomial(m: Mono, c: Rational) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn lead(&self) -> Option<(&Mono, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut t = self.terms.clone();
        for (m, c) in &o.terms {
            let e = t.entry(m.clone()).or_insert_with(Rational::zero);
            *e += c;
            if e.is_zero() {
                t.remove(m);
            }
        }
        Poly { terms: t }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly) -> Option<Poly> {
        if self.terms.len().saturating_mul(o.terms.len()) > TERM_LIMIT * 4 {
            return None;
        }
        let mut t: BTreeMap<Mono, Rational> = BTreeMap::new();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let m = m1.combine(m2, |a, b| a + b);
                let e = t.entry(m).or_insert_with(Rational::zero);
                *e += c1 * c2;
            }
        }
        t.retain(|_, c| !c.is_zero());
        if t.len() > TERM_LIMIT {
            return None;
        }
        Some(Poly { terms: t })
    }

    fn powi(&self, k: u32) -> Option<Poly> {
        let mut acc = Poly::constant(Rational::one());
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Some(acc)
    }

    pub fn from_expr(e: &Expr, ctx: &mut PolyCtx) -> Option<Poly> {
        match e.kind() {
            Kind::Num(c) => Some(Poly::constant(c.clone())),
            Kind::Add(ts) => {
                let mut acc = Poly::zero();
                for t in ts {
                    acc = acc.add(&Poly::from_expr(t, ctx)?);
                    if acc.len() > TERM_LIMIT {
                        return None;
                    }
                }
                Some(acc)
            }
            Kind::Mul(fs) => {
                let mut acc = Poly::constant(Rational::one());
                for f in fs {
                    acc = acc.mul(&Poly::from_expr(f, ctx)?)?;
                }
                Some(acc)
            }
            Kind::Pow(b, p) if p.is_integer() => {
                let k = p.numer().to_i32()?;
                if k >= 0 {
                    if k > 16 {
                        return None;
                    }
                    return Poly::from_expr(b, ctx)?.powi(k as u32);
                }
                let inner = Poly::from_expr(b, ctx)?;
                if inner.len() == 1 {
                    let (m, c) = inner.terms.iter().next().unwrap();
                    let m = Mono::new(m.0.iter().map(|x| x * k).collect());
                    let c = num_traits::pow(c.recip(), k.unsigned_abs() as usize);
                    return Some(Poly::monomial(m, c));
                }
                Some(Poly::atom_pow(b, k, ctx))
            }
            _ => Some(Poly::atom_pow(e, 1, ctx)),
        }
    }

    fn atom_pow(e: &Expr, k: i32, ctx: &mut PolyCtx) -> Poly {
        let i = match ctx.index.get(e) {
            Some(&i) => i,
            None => {
                ctx.atoms.push(e.clone());
                ctx.index.insert(e.clone(), ctx.atoms.len() - 1);
                ctx.atoms.len() - 1
            }
        };
        let mut v = vec![0; i + 1];
        v[i] = k;
        Poly::monomial(Mono::new(v), Rational::one())
    }

    pub fn to_expr(&self, ctx: &PolyCtx) -> Expr {
        let terms = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| {
                let mut fs = vec![Expr::rational(c.clone())];
                for (i, &k) in m.0.iter().enumerate() {
                    if k != 0 {
                        fs.push(pow(ctx.atoms[i].clone(), Rational::from_integer(BigInt::from(k))));
                    }
                }
                mul(fs)
            })
            .collect();
        add(terms)
    }

    /// Exact square root by the leading-term method, if one exists.
    pub fn sqrt(&self) -> Option<Poly> {
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let (m, c) = self.lead()?;
        if m.0.iter().any(|k| k % 2 != 0) || !c.is_positive() {
            return None;
        }
        let rc = rational_sqrt(c)?;
        let first = Poly::monomial(Mono::new(m.0.iter().map(|k| k / 2).collect()), rc);
        let (lm, lc) = {
            let (a, b) = first.lead().unwrap();
            (a.clone(), b.clone())
        };
        let mut root = first;
        let mut rem = self.sub(&root.mul(&root)?);
        let bound = 2 * self.len() + 8;
        for _ in 0..bound {
            let Some((rm, rcoef)) = rem.lead() else {
                return Some(root);
            };
            if rm >= &lm.combine(&lm, |a, b| a + b) {
                return None;
            }
            let t = Poly::monomial(rm.combine(&lm, |a, b| a - b), rcoef / (Rational::from_integer(BigInt::from(2)) * &lc));
            let twice = Poly::constant(Rational::from_integer(BigInt::from(2)));
            let delta = twice.mul(&root)?.mul(&t)?.add(&t.mul(&t)?);
            root = root.add(&t);
            rem = rem.sub(&delta);
        }
        if rem.is_zero() {
            Some(root)
        } else {
            None
        }
    }

    /// Exact quotient `self / d`, if `d` divides `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let (dm, dc) = d.lead()?;
        let (dm, dc) = (dm.clone(), dc.clone());
        let mut q = Poly::zero();
        let mut r = self.clone();
        let bound = 2 * (self.len() + 1) * (d.len() + 1) + 8;
        for _ in 0..bound {
            let Some((rm, rc)) = r.lead() else {
                return Some(q);
            };
            let t = Poly::monomial(rm.combine(&dm, |a, b| a - b), rc / &dc);
            r = r.sub(&t.mul(d)?);
            q = q.add(&t);
        }
        None
    }
}

fn rational_sqrt(c: &Rational) -> Option<Rational> {
    let rt = |n: &BigInt| {
        let r = n.sqrt();
        if &r * &r == *n {
            Some(r)
        } else {
            None
        }
    };
    Some(Rational::new(rt(c.numer())?, rt(c.denom())?))
}

/// Expands an expression into a sum of monomials over its atoms.
pub fn expand(e: &Expr) -> Option<Expr> {
    let mut ctx = PolyCtx::default();
    let p = Poly::from_expr(e, &mut ctx)?;
    Some(p.to_expr(&ctx))
}

/// Exact square root of an expression, up to sign.
pub fn sqrt_exact(e: &Expr) -> Option<Expr> {
    let mut ctx = PolyCtx::default();
    let p = Poly::from_expr(e, &mut ctx)?;
    Some(p.sqrt()?.to_expr(&ctx))
}

/// Exact quotient `a / b` when `b` divides `a` as Laurent polynomials.
pub fn div_exact(a: &Expr, b: &Expr) -> Option<Expr> {
    let mut ctx = PolyCtx::default();
    let pa = Poly::from_expr(a, &mut ctx)?;
    let pb = Poly::from_expr(b, &mut ctx)?;
    if pb.is_zero() {
        return None;
    }
    Some(pa.div_exact(&pb)?.to_expr(&ctx))
}
