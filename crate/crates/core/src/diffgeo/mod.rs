//! Vector fields and distributions on an explicit coordinate list, with
//! rank, membership and involutivity decided at sampled generic points.

use std::sync::{Arc, OnceLock};

use crate::error::Result;
use crate::symcore::linalg::{annihilators, dot, nullspace, tidy};
use crate::symcore::{add, diff, ranks_of_prefixes, Domain, Expr, Numerics, Symbol};

pub type Coords = Arc<[Symbol]>;

pub fn coords(names: &[Symbol]) -> Coords {
    names.to_vec().into()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    coords: Coords,
    comps: Vec<Expr>,
}

impl VectorField {
    pub fn new(coords: &Coords, comps: Vec<Expr>) -> Self {
        assert_eq!(coords.len(), comps.len(), "one component per coordinate");
        VectorField {
            coords: coords.clone(),
            comps,
        }
    }

    /// The coordinate field `∂/∂ coords[i]`.
    pub fn basis(coords: &Coords, i: usize) -> Self {
        let comps = (0..coords.len())
            .map(|j| if i == j { Expr::one() } else { Expr::zero() })
            .collect();
        Self::new(coords, comps)
    }

    pub fn zero(coords: &Coords) -> Self {
        Self::new(coords, vec![Expr::zero(); coords.len()])
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn comp(&self, s: &Symbol) -> Expr {
        match self.coords.iter().position(|c| c == s) {
            Some(i) => self.comps[i].clone(),
            None => Expr::zero(),
        }
    }

    pub fn is_zero_literal(&self) -> bool {
        self.comps.iter().all(|c| c.is_zero_literal())
    }

    /// `v(φ) = Σ v^j ∂_j φ`.
    pub fn apply(&self, phi: &Expr) -> Expr {
        let terms: Vec<Expr> = self
            .coords
            .iter()
            .zip(&self.comps)
            .filter(|(_, c)| !c.is_zero_literal())
            .map(|(s, c)| c * &diff(phi, s))
            .collect();
        tidy(&add(terms))
    }

    pub fn scale(&self, k: &Expr) -> Self {
        Self::new(&self.coords, self.comps.iter().map(|c| tidy(&(c * k))).collect())
    }

    pub fn plus(&self, o: &VectorField) -> Self {
        debug_assert_eq!(self.coords, o.coords);
        Self::new(
            &self.coords,
            self.comps.iter().zip(&o.comps).map(|(a, b)| tidy(&(a + b))).collect(),
        )
    }

    /// `Σ λ_i v_i`.
    pub fn combination(coords: &Coords, lambdas: &[Expr], fields: &[VectorField]) -> Self {
        let comps = (0..coords.len())
            .map(|j| {
                let col: Vec<Expr> = fields.iter().map(|f| f.comps[j].clone()).collect();
                dot(lambdas, &col)
            })
            .collect();
        Self::new(coords, comps)
    }
}

/// `[v, w]^i = v(w^i) − w(v^i)`.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> VectorField {
    assert_eq!(v.coords, w.coords, "bracket needs a shared coordinate list");
    let comps = v
        .comps
        .iter()
        .zip(&w.comps)
        .map(|(vi, wi)| tidy(&(&v.apply(wi) - &w.apply(vi))))
        .collect();
    VectorField::new(&v.coords, comps)
}

/// `L_v^k φ`.
pub fn lie_derivative(v: &VectorField, phi: &Expr, k: usize) -> Expr {
    let mut out = phi.clone();
    for _ in 0..k {
        out = v.apply(&out);
    }
    out
}

#[derive(Clone, Debug)]
pub struct Distribution {
    coords: Coords,
    fields: Vec<VectorField>,
    rank: OnceLock<usize>,
}

impl Distribution {
    pub fn new(coords: &Coords, fields: Vec<VectorField>) -> Self {
        for f in &fields {
            assert_eq!(&f.coords, coords, "spanning fields must share the coordinate list");
        }
        Distribution {
            coords: coords.clone(),
            fields,
            rank: OnceLock::new(),
        }
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn rows(&self) -> Vec<Vec<Expr>> {
        self.fields.iter().map(|f| f.comps.clone()).collect()
    }

    pub fn with(&self, extra: impl IntoIterator<Item = VectorField>) -> Self {
        let mut fields = self.fields.clone();
        fields.extend(extra);
        Distribution::new(&self.coords, fields)
    }

    pub fn rank(&self, domain: &Domain, num: &Numerics) -> Result<usize> {
        if let Some(r) = self.rank.get() {
            return Ok(*r);
        }
        let r = generic_rank(self, domain, num)?;
        let _ = self.rank.set(r);
        Ok(r)
    }

    /// A maximal independent subfamily of the spanning set, in order.
    pub fn pruned(&self, domain: &Domain, num: &Numerics) -> Result<Distribution> {
        let live: Vec<&VectorField> = self.fields.iter().filter(|f| !f.is_zero_literal()).collect();
        let rows: Vec<Vec<Expr>> = live.iter().map(|f| f.comps.clone()).collect();
        let prefixes: Vec<usize> = (1..=rows.len()).collect();
        let ranks = ranks_of_prefixes(&rows, &prefixes, domain, num)?;
        let mut kept = Vec::new();
        let mut prev = 0;
        for (i, r) in ranks.iter().enumerate() {
            if *r > prev {
                kept.push(live[i].clone());
                prev = *r;
            }
        }
        let d = Distribution::new(&self.coords, kept);
        let _ = d.rank.set(prev);
        Ok(d)
    }
}

pub fn generic_rank(d: &Distribution, domain: &Domain, num: &Numerics) -> Result<usize> {
    crate::symcore::generic_rank(&d.rows(), domain, num)
}

/// Whether every field of `vs` lies in `d` (appending them keeps the rank).
pub fn members_mod(vs: &[VectorField], d: &Distribution, domain: &Domain, num: &Numerics) -> Result<bool> {
    let live: Vec<&VectorField> = vs.iter().filter(|v| !v.is_zero_literal()).collect();
    if live.is_empty() {
        return Ok(true);
    }
    let mut rows = d.rows();
    rows.extend(live.iter().map(|v| v.comps.clone()));
    let k = d.fields.len();
    let r = ranks_of_prefixes(&rows, &[k, rows.len()], domain, num)?;
    Ok(r[0] == r[1])
}

pub fn member_mod(v: &VectorField, d: &Distribution, domain: &Domain, num: &Numerics) -> Result<bool> {
    members_mod(std::slice::from_ref(v), d, domain, num)
}

fn pair_brackets(fields: &[VectorField]) -> Vec<VectorField> {
    let mut out = Vec::new();
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            let b = lie_bracket(&fields[i], &fields[j]);
            if !b.is_zero_literal() {
                out.push(b);
            }
        }
    }
    out
}

pub fn is_involutive(d: &Distribution, domain: &Domain, num: &Numerics) -> Result<bool> {
    let base = d.pruned(domain, num)?;
    members_mod(&pair_brackets(&base.fields), &base, domain, num)
}

/// `D^(0) ⊆ D^(1) ⊆ ...` with `D^(i+1) = D^(i) + [D^(i), D^(i)]`, each level
/// pruned to an independent spanning set. Stops once the rank stabilizes
/// (the stable level is included once) or after `max_steps` extensions.
pub fn derived_flag(d: &Distribution, max_steps: usize, domain: &Domain, num: &Numerics) -> Result<Vec<Distribution>> {
    let mut cur = d.pruned(domain, num)?;
    let mut out = vec![cur.clone()];
    for _ in 0..max_steps {
        let r = cur.rank(domain, num)?;
        if r == cur.coords.len() {
            break;
        }
        let next = cur.with(pair_brackets(&cur.fields)).pruned(domain, num)?;
        if next.rank(domain, num)? == r {
            break;
        }
        out.push(next.clone());
        cur = next;
    }
    Ok(out)
}

/// Smallest involutive distribution containing `d`.
pub fn involutive_closure(d: &Distribution, domain: &Domain, num: &Numerics) -> Result<Distribution> {
    let flag = derived_flag(d, d.coords.len() + 1, domain, num)?;
    Ok(flag.into_iter().last().expect("flag is never empty"))
}

/// Covectors annihilating `d`, one per row.
pub fn annihilator(d: &Distribution, domain: &Domain, num: &Numerics) -> Result<Vec<Vec<Expr>>> {
    annihilators(&d.rows(), d.coords.len(), domain, num)
}

/// `C(D)`: fields `c ∈ D` with `[c, D] ⊆ D`.
///
/// With an independent basis `d_i` and annihilating covectors `ω_a`, the
/// condition on `c = Σ λ_i d_i` is `Σ_i λ_i ω_a([d_i, d_j]) = 0` for all `a, j`
/// (derivatives of `λ` only contribute multiples of `d_i`), a linear system
/// in `λ` that is solved by symbolic elimination.
pub fn cauchy_characteristic(d: &Distribution, domain: &Domain, num: &Numerics) -> Result<Distribution> {
    let base = d.pruned(domain, num)?;
    let k = base.fields.len();
    if k == base.coords.len() || k == 0 {
        return Ok(base);
    }
    let omegas = annihilator(&base, domain, num)?;
    let mut conds: Vec<Vec<Expr>> = Vec::new();
    for j in 0..k {
        let brs: Vec<VectorField> = (0..k).map(|i| lie_bracket(&base.fields[i], &base.fields[j])).collect();
        for w in &omegas {
            let row: Vec<Expr> = brs.iter().map(|b| dot(w, &b.comps)).collect();
            if row.iter().any(|e| !e.is_zero_literal()) {
                conds.push(row);
            }
        }
    }
    let lambdas = nullspace(&conds, k, domain, num)?;
    let fields = lambdas
        .iter()
        .map(|l| VectorField::combination(&base.coords, l, &base.fields))
        .collect();
    Distribution::new(&base.coords, fields).pruned(domain, num)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_expr;

    fn p(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn setup(names: &[&str], params: &[&str]) -> (Coords, Domain, Numerics) {
        let syms: Vec<Symbol> = names.iter().map(|s| Symbol::new(s)).collect();
        let ps: Vec<(Symbol, (f64, f64))> = params.iter().map(|s| (Symbol::new(s), (0.1, 1.0))).collect();
        (coords(&syms), Domain::new(&syms, &ps, &[]), Numerics::default())
    }

    fn vf(c: &Coords, comps: &[&str]) -> VectorField {
        VectorField::new(c, comps.iter().map(|s| p(s)).collect())
    }

    #[test]
    fn constant_fields_commute() {
        let (c, _, _) = setup(&["x", "y"], &[]);
        assert!(lie_bracket(&VectorField::basis(&c, 0), &VectorField::basis(&c, 1)).is_zero_literal());
    }

    #[test]
    fn vtol_input_distribution_is_involutive() {
        let (c, d, n) = setup(&["x", "z", "theta", "v_x", "v_z", "omega"], &["epsilon"]);
        let b1 = vf(&c, &["0", "0", "0", "-sin(theta)", "cos(theta)", "0"]);
        let b2 = vf(&c, &["0", "0", "0", "epsilon*cos(theta)", "epsilon*sin(theta)", "1"]);
        let dist = Distribution::new(&c, vec![b1.clone(), b2.clone()]);
        assert_eq!(dist.rank(&d, &n).unwrap(), 2);
        assert!(member_mod(&lie_bracket(&b1, &b2), &dist, &d, &n).unwrap());
        assert!(is_involutive(&dist, &d, &n).unwrap());
        let dv = Distribution::new(&c, vec![VectorField::basis(&c, 3)]);
        assert!(!member_mod(&VectorField::basis(&c, 5), &dv, &d, &n).unwrap());
    }

    #[test]
    fn academic_prolonged_flag() {
        let (c, d, n) = setup(&["x1", "x2", "x3", "ub1"], &[]);
        let b1 = VectorField::basis(&c, 3);
        let b2 = vf(&c, &["ub1", "1", "0", "0"]);
        let dist = Distribution::new(&c, vec![b1.clone(), b2.clone()]);
        assert!(!is_involutive(&dist, &d, &n).unwrap());
        assert_eq!(lie_bracket(&b1, &b2), VectorField::basis(&c, 0));
        let flag = derived_flag(&dist, 4, &d, &n).unwrap();
        let ranks: Vec<usize> = flag.iter().map(|f| f.rank(&d, &n).unwrap()).collect();
        assert_eq!(ranks, vec![2, 3]);
        let cl = involutive_closure(&dist, &d, &n).unwrap();
        assert!(is_involutive(&cl, &d, &n).unwrap());
    }

    #[test]
    fn cauchy_of_contact_like_distribution() {
        // D = span{∂_u1, ∂_u2, u1 ∂_x + u2 ∂_y} has the radial field as characteristic
        let (c, d, n) = setup(&["x", "y", "u1", "u2"], &[]);
        let dist = Distribution::new(
            &c,
            vec![
                VectorField::basis(&c, 2),
                VectorField::basis(&c, 3),
                vf(&c, &["u1", "u2", "0", "0"]),
            ],
        );
        let ch = cauchy_characteristic(&dist, &d, &n).unwrap();
        assert_eq!(ch.rank(&d, &n).unwrap(), 1);
        let radial = vf(&c, &["0", "0", "u1", "u2"]);
        assert!(member_mod(&radial, &ch, &d, &n).unwrap());
        assert!(members_mod(ch.fields(), &dist, &d, &n).unwrap());
        // involutive distributions are their own characteristic
        let inv = Distribution::new(&c, vec![VectorField::basis(&c, 0), VectorField::basis(&c, 1)]);
        assert_eq!(cauchy_characteristic(&inv, &d, &n).unwrap().rank(&d, &n).unwrap(), 2);
    }

    #[test]
    fn lie_derivative_powers() {
        let (c, _, _) = setup(&["x", "y"], &[]);
        let v = vf(&c, &["y", "-x"]);
        assert_eq!(lie_derivative(&v, &p("x"), 0), p("x"));
        assert_eq!(lie_derivative(&v, &p("x"), 2), p("-x"));
    }
}
