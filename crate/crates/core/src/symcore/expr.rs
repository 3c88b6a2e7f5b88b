//! Immutable expression trees with canonicalizing constructors.
//!
//! Every constructor (`add`, `mul`, `pow`, `call`) returns a value in a light
//! canonical form: nested sums and products are flattened, rational constants
//! are folded, like terms and like powers are collected, and
//! `c*m*sin(a)^2 + c*m*cos(a)^2` collapses to `c*m`. The form is not a normal
//! form; semantic decisions go through sampling, see [`super::sample`].

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

pub type Rational = BigRational;

/// Interned-by-value variable name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Symbol::new(&s))
    }
}

/// Elementary functions. `sqrt` is represented as a power with exponent 1/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Asin,
    Atan,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Asin => "asin",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "asin" | "arcsin" => Func::Asin,
            "atan" | "arctan" => Func::Atan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            _ => return None,
        })
    }

    fn is_odd(self) -> bool {
        matches!(self, Func::Sin | Func::Tan | Func::Asin | Func::Atan)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Kind {
    Num(Rational),
    Sym(Symbol),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Expr, Rational),
    Call(Func, Expr),
}

struct Node {
    kind: Kind,
    hash: u64,
    size: u64,
    mask: u64,
}

/// A shared, immutable symbolic scalar expression.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

fn symbol_bit(s: &Symbol) -> u64 {
    let mut h = DefaultHasher::new();
    s.as_str().hash(&mut h);
    1u64 << (h.finish() % 64)
}

impl Expr {
    fn raw(kind: Kind) -> Expr {
        let mut h = DefaultHasher::new();
        let (size, mask) = match &kind {
            Kind::Num(r) => {
                0u8.hash(&mut h);
                r.numer().hash(&mut h);
                r.denom().hash(&mut h);
                (1, 0)
            }
            Kind::Sym(s) => {
                1u8.hash(&mut h);
                s.as_str().hash(&mut h);
                (1, symbol_bit(s))
            }
            Kind::Add(ts) | Kind::Mul(ts) => {
                if matches!(kind, Kind::Add(_)) { 2u8 } else { 3u8 }.hash(&mut h);
                let mut size = 1u64;
                let mut mask = 0;
                for t in ts {
                    t.0.hash.hash(&mut h);
                    size = size.saturating_add(t.0.size);
                    mask |= t.0.mask;
                }
                (size, mask)
            }
            Kind::Pow(b, e) => {
                4u8.hash(&mut h);
                b.0.hash.hash(&mut h);
                e.numer().hash(&mut h);
                e.denom().hash(&mut h);
                (b.0.size.saturating_add(1), b.0.mask)
            }
            Kind::Call(f, a) => {
                5u8.hash(&mut h);
                f.hash(&mut h);
                a.0.hash.hash(&mut h);
                (a.0.size.saturating_add(1), a.0.mask)
            }
        };
        Expr(Arc::new(Node {
            kind,
            hash: h.finish(),
            size,
            mask,
        }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Tree size counting shared subtrees once per occurrence.
    pub fn size(&self) -> u64 {
        self.0.size
    }

    pub(crate) fn mask(&self) -> u64 {
        self.0.mask
    }

    pub(crate) fn ptr(&self) -> *const () {
        Arc::as_ptr(&self.0) as *const ()
    }

    pub fn ptr_eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn rational(r: Rational) -> Expr {
        Expr::raw(Kind::Num(r))
    }

    pub fn int(i: i64) -> Expr {
        Expr::rational(Rational::from_integer(BigInt::from(i)))
    }

    pub fn frac(n: i64, d: i64) -> Expr {
        Expr::rational(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn sym(name: &str) -> Expr {
        Expr::raw(Kind::Sym(Symbol::new(name)))
    }

    pub fn symbol(s: &Symbol) -> Expr {
        Expr::raw(Kind::Sym(s.clone()))
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self.kind() {
            Kind::Num(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self.kind() {
            Kind::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero_literal(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_zero())
    }

    pub fn is_one_literal(&self) -> bool {
        self.as_num().is_some_and(|r| r.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.0.mask == 0
    }

    /// Whether the variable occurs anywhere in the tree.
    pub fn contains(&self, s: &Symbol) -> bool {
        if self.0.mask & symbol_bit(s) == 0 {
            return false;
        }
        match self.kind() {
            Kind::Num(_) => false,
            Kind::Sym(t) => t == s,
            Kind::Add(ts) | Kind::Mul(ts) => ts.iter().any(|t| t.contains(s)),
            Kind::Pow(b, _) => b.contains(s),
            Kind::Call(_, a) => a.contains(s),
        }
    }

    pub fn contains_any(&self, syms: &[Symbol]) -> bool {
        syms.iter().any(|s| self.contains(s))
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        let mut seen = std::collections::HashSet::new();
        self.collect_symbols(&mut out, &mut seen);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>, seen: &mut std::collections::HashSet<*const ()>) {
        if self.0.mask == 0 || !seen.insert(self.ptr()) {
            return;
        }
        match self.kind() {
            Kind::Num(_) => {}
            Kind::Sym(s) => {
                out.insert(s.clone());
            }
            Kind::Add(ts) | Kind::Mul(ts) => ts.iter().for_each(|t| t.collect_symbols(out, seen)),
            Kind::Pow(b, _) => b.collect_symbols(out, seen),
            Kind::Call(_, a) => a.collect_symbols(out, seen),
        }
    }

    /// Splits a numeric coefficient off a product: `3*x*y -> (3, x*y)`.
    pub fn split_coeff(&self) -> (Rational, Expr) {
        match self.kind() {
            Kind::Num(r) => (r.clone(), Expr::one()),
            Kind::Mul(fs) => match fs[0].kind() {
                Kind::Num(c) => {
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        Expr::raw(Kind::Mul(fs[1..].to_vec()))
                    };
                    (c.clone(), rest)
                }
                _ => (Rational::one(), self.clone()),
            },
            _ => (Rational::one(), self.clone()),
        }
    }

    /// `(base, exponent)` view used when collecting powers.
    pub fn base_exp(&self) -> (Expr, Rational) {
        match self.kind() {
            Kind::Pow(b, e) => (b.clone(), e.clone()),
            _ => (self.clone(), Rational::one()),
        }
    }

    /// Whether the expression reads as negative (leading coefficient < 0).
    pub fn has_negative_sign(&self) -> bool {
        match self.kind() {
            Kind::Num(r) => r.is_negative(),
            Kind::Mul(fs) => fs[0].as_num().is_some_and(|c| c.is_negative()),
            Kind::Add(ts) => ts
                .iter()
                .find(|t| t.as_num().is_none())
                .is_some_and(|t| t.has_negative_sign()),
            _ => false,
        }
    }

    pub fn neg(&self) -> Expr {
        mul(vec![Expr::int(-1), self.clone()])
    }

    pub fn recip(&self) -> Expr {
        pow(self.clone(), Rational::from_integer(BigInt::from(-1)))
    }

    pub fn powi(&self, k: i64) -> Expr {
        pow(self.clone(), Rational::from_integer(BigInt::from(k)))
    }

    pub fn sin(&self) -> Expr {
        call(Func::Sin, self.clone())
    }

    pub fn cos(&self) -> Expr {
        call(Func::Cos, self.clone())
    }

    pub fn tan(&self) -> Expr {
        call(Func::Tan, self.clone())
    }

    pub fn exp(&self) -> Expr {
        call(Func::Exp, self.clone())
    }

    pub fn ln(&self) -> Expr {
        call(Func::Ln, self.clone())
    }

    pub fn asin(&self) -> Expr {
        call(Func::Asin, self.clone())
    }

    pub fn atan(&self) -> Expr {
        call(Func::Atan, self.clone())
    }

    pub fn sqrt(&self) -> Expr {
        pow(self.clone(), Rational::new(BigInt::from(1), BigInt::from(2)))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.kind == other.0.kind)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.hash.hash(state)
    }
}

fn rank_of(k: &Kind) -> u8 {
    match k {
        Kind::Num(_) => 0,
        Kind::Sym(_) => 1,
        Kind::Call(..) => 2,
        Kind::Pow(..) => 3,
        Kind::Mul(_) => 4,
        Kind::Add(_) => 5,
    }
}

fn cmp_seq(a: &[Expr], b: &[Expr]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn cmp_base(a: &Expr, b: &Expr) -> Ordering {
    if a.ptr_eq(b) {
        return Ordering::Equal;
    }
    let (ka, kb) = (a.kind(), b.kind());
    match rank_of(ka).cmp(&rank_of(kb)) {
        Ordering::Equal => {}
        o => return o,
    }
    match (ka, kb) {
        (Kind::Num(x), Kind::Num(y)) => x.cmp(y),
        (Kind::Sym(x), Kind::Sym(y)) => x.cmp(y),
        (Kind::Call(f, x), Kind::Call(g, y)) => f.cmp(g).then_with(|| x.cmp(y)),
        (Kind::Pow(x, e), Kind::Pow(y, f)) => x.cmp(y).then_with(|| e.cmp(f)),
        (Kind::Mul(x), Kind::Mul(y)) | (Kind::Add(x), Kind::Add(y)) => cmp_seq(x, y),
        _ => Ordering::Equal,
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Expr) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        match (self.kind(), other.kind()) {
            (Kind::Num(x), Kind::Num(y)) => return x.cmp(y),
            (Kind::Num(_), _) => return Ordering::Less,
            (_, Kind::Num(_)) => return Ordering::Greater,
            _ => {}
        }
        let (ba, ea) = match self.kind() {
            Kind::Pow(b, e) => (b, e.clone()),
            _ => (self, Rational::one()),
        };
        let (bb, eb) = match other.kind() {
            Kind::Pow(b, e) => (b, e.clone()),
            _ => (other, Rational::one()),
        };
        cmp_base(ba, bb).then_with(|| ea.cmp(&eb))
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Expr) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn is_int(r: &Rational) -> bool {
    r.is_integer()
}

/// Exact integer root of a non-negative big integer, if one exists.
fn int_root(n: &BigInt, q: u32) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let r = n.nth_root(q);
    if num_traits::pow(r.clone(), q as usize) == *n {
        Some(r)
    } else {
        None
    }
}

fn rational_pow_int(c: &Rational, k: &BigInt) -> Option<Rational> {
    let k = k.to_i64()?;
    if k.unsigned_abs() > 512 {
        return None;
    }
    if c.is_zero() && k < 0 {
        return None;
    }
    let p = num_traits::pow(c.clone(), k.unsigned_abs() as usize);
    Some(if k < 0 { p.recip() } else { p })
}

/// Sum with flattening, constant folding, like-term collection and the
/// Pythagorean collapse.
pub fn add(terms: Vec<Expr>) -> Expr {
    let mut constant = Rational::zero();
    let mut map: BTreeMap<Expr, Rational> = BTreeMap::new();
    let mut stack: Vec<(Rational, Expr)> = terms.into_iter().map(|t| (Rational::one(), t)).collect();
    while let Some((scale, t)) = stack.pop() {
        match t.kind() {
            Kind::Num(c) => constant += scale * c,
            Kind::Add(ts) => stack.extend(ts.iter().map(|x| (scale.clone(), x.clone()))),
            _ => {
                let (c, rest) = t.split_coeff();
                if let Kind::Add(ts) = rest.kind() {
                    let s = scale * c;
                    stack.extend(ts.iter().map(|x| (s.clone(), x.clone())));
                } else {
                    *map.entry(rest).or_insert_with(Rational::zero) += scale * c;
                }
            }
        }
    }
    map.retain(|_, c| !c.is_zero());
    pythagorean_collapse(&mut map, &mut constant);
    let mut out = Vec::with_capacity(map.len() + 1);
    if !constant.is_zero() {
        out.push(Expr::rational(constant));
    }
    for (rest, c) in map {
        out.push(scaled(c, rest));
    }
    match out.len() {
        0 => Expr::zero(),
        1 => out.pop().unwrap(),
        _ => Expr::raw(Kind::Add(out)),
    }
}

/// `c * rest` where `rest` carries no numeric coefficient.
fn scaled(c: Rational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    match rest.kind() {
        Kind::Mul(fs) => {
            let mut v = Vec::with_capacity(fs.len() + 1);
            v.push(Expr::rational(c));
            v.extend(fs.iter().cloned());
            Expr::raw(Kind::Mul(v))
        }
        _ => Expr::raw(Kind::Mul(vec![Expr::rational(c), rest])),
    }
}

fn strip_trig_square(k: &Expr, f: Func) -> Option<(Expr, Expr)> {
    let is_sq = |e: &Expr| -> Option<Expr> {
        if let Kind::Pow(b, p) = e.kind() {
            if *p == Rational::from_integer(BigInt::from(2)) {
                if let Kind::Call(g, a) = b.kind() {
                    if *g == f {
                        return Some(a.clone());
                    }
                }
            }
        }
        None
    };
    if let Some(a) = is_sq(k) {
        return Some((Expr::one(), a));
    }
    if let Kind::Mul(fs) = k.kind() {
        for (i, fct) in fs.iter().enumerate() {
            if let Some(a) = is_sq(fct) {
                let rest: Vec<Expr> = fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| x.clone()).collect();
                return Some((mul(rest), a));
            }
        }
    }
    None
}

fn pythagorean_collapse(map: &mut BTreeMap<Expr, Rational>, constant: &mut Rational) {
    loop {
        let mut hit = None;
        for (k, c) in map.iter() {
            if let Some((m, arg)) = strip_trig_square(k, Func::Sin) {
                let partner = mul(vec![m.clone(), call(Func::Cos, arg).powi(2)]);
                if map.get(&partner) == Some(c) {
                    hit = Some((k.clone(), partner, m, c.clone()));
                    break;
                }
            }
        }
        let Some((k, partner, m, c)) = hit else { break };
        map.remove(&k);
        map.remove(&partner);
        let (mc, mrest) = m.split_coeff();
        if m.as_num().is_some() {
            *constant += c * mc;
        } else {
            let e = map.entry(mrest).or_insert_with(Rational::zero);
            *e += c * mc;
            if e.is_zero() {
                map.retain(|_, v| !v.is_zero());
            }
        }
    }
}

/// Product with flattening, coefficient folding and power collection.
pub fn mul(factors: Vec<Expr>) -> Expr {
    let mut coeff = Rational::one();
    let mut map: BTreeMap<Expr, Rational> = BTreeMap::new();
    let mut stack = factors;
    while let Some(f) = stack.pop() {
        match f.kind() {
            Kind::Num(c) => {
                if c.is_zero() {
                    return Expr::zero();
                }
                coeff *= c;
            }
            Kind::Mul(fs) => stack.extend(fs.iter().cloned()),
            _ => {
                let (b, e) = f.base_exp();
                *map.entry(b).or_insert_with(Rational::zero) += e;
            }
        }
    }
    let mut out: Vec<Expr> = Vec::with_capacity(map.len());
    let mut refold = false;
    for (b, e) in map {
        if e.is_zero() {
            continue;
        }
        let p = pow(b, e);
        match p.kind() {
            Kind::Num(c) => coeff *= c,
            Kind::Mul(fs) => {
                refold = true;
                for x in fs {
                    match x.kind() {
                        Kind::Num(c) => coeff *= c,
                        _ => out.push(x.clone()),
                    }
                }
            }
            _ => out.push(p),
        }
    }
    if refold {
        out.push(Expr::rational(coeff));
        return mul(out);
    }
    if coeff.is_zero() {
        return Expr::zero();
    }
    out.sort();
    if out.is_empty() {
        return Expr::rational(coeff);
    }
    if out.len() == 1 {
        if coeff.is_one() {
            return out.pop().unwrap();
        }
        if let Kind::Add(ts) = out[0].kind() {
            let ts: Vec<Expr> = ts.iter().map(|t| mul(vec![Expr::rational(coeff.clone()), t.clone()])).collect();
            return add(ts);
        }
    }
    if coeff.is_one() {
        Expr::raw(Kind::Mul(out))
    } else {
        let mut v = Vec::with_capacity(out.len() + 1);
        v.push(Expr::rational(coeff));
        v.extend(out);
        Expr::raw(Kind::Mul(v))
    }
}

/// Power with a rational exponent.
pub fn pow(base: Expr, e: Rational) -> Expr {
    if e.is_zero() {
        return Expr::one();
    }
    if e.is_one() {
        return base;
    }
    match base.kind() {
        Kind::Num(c) => {
            if c.is_zero() {
                return if e.is_positive() { Expr::zero() } else { Expr::raw(Kind::Pow(base, e)) };
            }
            if c.is_one() {
                return Expr::one();
            }
            if is_int(&e) {
                if let Some(r) = rational_pow_int(c, e.numer()) {
                    return Expr::rational(r);
                }
                return Expr::raw(Kind::Pow(base, e));
            }
            let q = e.denom().to_u32().unwrap_or(0);
            if q > 0 && q <= 64 {
                let abs = c.abs();
                if let (Some(n), Some(d)) = (int_root(abs.numer(), q), int_root(abs.denom(), q)) {
                    let odd = q % 2 == 1;
                    if c.is_positive() || odd {
                        let mut root = Rational::new(n, d);
                        if c.is_negative() {
                            root = -root;
                        }
                        if let Some(r) = rational_pow_int(&root, e.numer()) {
                            return Expr::rational(r);
                        }
                    }
                }
            }
            let k = e.floor();
            if k.is_zero() {
                return Expr::raw(Kind::Pow(base, e));
            }
            let frac = &e - &k;
            let whole = rational_pow_int(c, k.numer());
            match whole {
                Some(w) => mul(vec![Expr::rational(w), Expr::raw(Kind::Pow(base.clone(), frac))]),
                None => Expr::raw(Kind::Pow(base, e)),
            }
        }
        Kind::Pow(b, s) => {
            if is_int(&e) {
                pow(b.clone(), s * &e)
            } else {
                Expr::raw(Kind::Pow(base, e))
            }
        }
        Kind::Mul(fs) => {
            if is_int(&e) {
                mul(fs.iter().map(|f| pow(f.clone(), e.clone())).collect())
            } else {
                Expr::raw(Kind::Pow(base, e))
            }
        }
        _ => Expr::raw(Kind::Pow(base, e)),
    }
}

/// Elementary function application with exact special values and parity.
pub fn call(f: Func, arg: Expr) -> Expr {
    if let Some(c) = arg.as_num() {
        if c.is_zero() {
            return match f {
                Func::Cos | Func::Exp => Expr::one(),
                Func::Ln => Expr::raw(Kind::Call(f, arg)),
                _ => Expr::zero(),
            };
        }
        if c.is_one() && f == Func::Ln {
            return Expr::zero();
        }
    }
    match (f, arg.kind()) {
        (Func::Exp, Kind::Call(Func::Ln, a)) => return a.clone(),
        (Func::Ln, Kind::Call(Func::Exp, a)) => return a.clone(),
        _ => {}
    }
    if f != Func::Exp && f != Func::Ln && arg.has_negative_sign() {
        let pos = arg.neg();
        return if f.is_odd() {
            call(f, pos).neg()
        } else {
            call(f, pos)
        };
    }
    Expr::raw(Kind::Call(f, arg))
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(vec![self, rhs])
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        add(vec![self.clone(), rhs.clone()])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        add(vec![self, rhs.neg()])
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        add(vec![self.clone(), rhs.neg()])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(vec![self, rhs])
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        mul(vec![self.clone(), rhs.clone()])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        mul(vec![self, rhs.recip()])
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        mul(vec![self.clone(), rhs.recip()])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<i64> for Expr {
    fn from(i: i64) -> Expr {
        Expr::int(i)
    }
}

// ---------------------------------------------------------------------------
// Printing. The output re-parses to a structurally equal expression.
// ---------------------------------------------------------------------------

fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Binding strength of the printed form, used to decide parentheses.
#[derive(PartialEq, PartialOrd)]
enum Prec {
    Sum,
    Product,
    Unary,
    Power,
    Atom,
}

fn prec_of(e: &Expr) -> Prec {
    match e.kind() {
        Kind::Num(r) => {
            if r.is_negative() {
                Prec::Unary
            } else if r.is_integer() {
                Prec::Atom
            } else {
                Prec::Product
            }
        }
        Kind::Sym(_) | Kind::Call(..) => Prec::Atom,
        Kind::Add(_) => Prec::Sum,
        Kind::Mul(_) => {
            if e.has_negative_sign() {
                Prec::Unary
            } else {
                Prec::Product
            }
        }
        Kind::Pow(_, p) => {
            if p.is_negative() {
                Prec::Product
            } else if *p == Rational::new(BigInt::from(1), BigInt::from(2)) {
                Prec::Atom
            } else {
                Prec::Power
            }
        }
    }
}

fn wrap(e: &Expr, min: Prec) -> String {
    let s = e.to_string();
    if prec_of(e) < min {
        format!("({s})")
    } else {
        s
    }
}

fn fmt_mul_positive(coeff: &Rational, factors: &[Expr]) -> String {
    let mut num: Vec<String> = Vec::new();
    let mut den: Vec<String> = Vec::new();
    let n = coeff.numer().abs();
    let d = coeff.denom().clone();
    if !n.is_one() {
        num.push(n.to_string());
    }
    if !d.is_one() {
        den.push(d.to_string());
    }
    for f in factors {
        match f.kind() {
            Kind::Pow(b, p) if p.is_negative() => {
                let inv = pow(b.clone(), -p.clone());
                den.push(wrap(&inv, Prec::Power));
            }
            _ => num.push(wrap(f, Prec::Power)),
        }
    }
    let numerator = if num.is_empty() { "1".to_string() } else { num.join("*") };
    match den.len() {
        0 => numerator,
        1 => format!("{numerator}/{}", den[0]),
        _ => format!("{numerator}/({})", den.join("*")),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Num(r) => f.write_str(&fmt_rational(r)),
            Kind::Sym(s) => f.write_str(s.as_str()),
            Kind::Call(g, a) => write!(f, "{}({})", g.name(), a),
            Kind::Pow(b, p) => {
                if *p == Rational::new(BigInt::from(1), BigInt::from(2)) {
                    return write!(f, "sqrt({b})");
                }
                if p.is_negative() {
                    return f.write_str(&fmt_mul_positive(&Rational::one(), std::slice::from_ref(self)));
                }
                let base = wrap(b, Prec::Atom);
                if p.is_integer() {
                    write!(f, "{base}^{}", p.numer())
                } else {
                    write!(f, "{base}^({})", fmt_rational(p))
                }
            }
            Kind::Mul(fs) => {
                let (coeff, rest): (Rational, &[Expr]) = match fs[0].as_num() {
                    Some(c) => (c.clone(), &fs[1..]),
                    None => (Rational::one(), &fs[..]),
                };
                let body = fmt_mul_positive(&coeff, rest);
                if coeff.is_negative() {
                    write!(f, "-{body}")
                } else {
                    f.write_str(&body)
                }
            }
            Kind::Add(ts) => {
                let mut parts: Vec<&Expr> = ts.iter().filter(|t| t.as_num().is_none()).collect();
                if let Some(c) = ts.iter().find(|t| t.as_num().is_some()) {
                    parts.push(c);
                }
                for (i, t) in parts.iter().enumerate() {
                    let neg = t.has_negative_sign();
                    let body = if neg { Expr::neg(t).to_string() } else { t.to_string() };
                    let body = if neg && matches!(Expr::neg(t).kind(), Kind::Add(_)) {
                        format!("({body})")
                    } else {
                        body
                    };
                    if i == 0 {
                        if neg {
                            write!(f, "-{body}")?;
                        } else {
                            f.write_str(&body)?;
                        }
                    } else if neg {
                        write!(f, " - {body}")?;
                    } else {
                        write!(f, " + {body}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
