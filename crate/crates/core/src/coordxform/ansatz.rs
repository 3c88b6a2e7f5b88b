//! First integrals by linear ansatz: `φ = Σ c_k t_k` over a fixed library of
//! terms, with the annihilation conditions sampled at generic points.

use nalgebra::DMatrix;
use num_bigint::BigInt;

use crate::diffgeo::VectorField;
use crate::error::{Error, Result};
use crate::symcore::linalg::tidy;
use crate::symcore::{add, generic_rank, gradient, is_zero, Domain, Expr, Numerics, Rational, Symbol};

const MAX_DEN: i64 = 64;

/// Ordered basis terms, simplest first.
#[derive(Clone, Debug)]
pub struct AnsatzLibrary {
    terms: Vec<Expr>,
    desc: String,
}

impl AnsatzLibrary {
    /// `v, sin v, cos v, tan v, v*w, v*sin w, v*cos w` over `vars`, plus
    /// `v/w` for `v, w` in `ratio_vars` when `w` is constrained nonzero.
    pub fn standard(vars: &[Symbol], ratio_vars: &[Symbol], nonzero: &[Expr]) -> Self {
        let e: Vec<Expr> = vars.iter().map(Expr::symbol).collect();
        let mut terms = e.clone();
        for v in &e {
            terms.push(v.sin());
            terms.push(v.cos());
            terms.push(v.tan());
        }
        for i in 0..e.len() {
            for j in i..e.len() {
                terms.push(&e[i] * &e[j]);
            }
        }
        for v in &e {
            for w in &e {
                terms.push(v * &w.sin());
            }
        }
        for v in &e {
            for w in &e {
                terms.push(v * &w.cos());
            }
        }
        for v in ratio_vars {
            for w in ratio_vars {
                if v != w && nonzero.iter().any(|c| c.as_symbol() == Some(w)) {
                    terms.push(&Expr::symbol(v) / &Expr::symbol(w));
                }
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        terms.retain(|t| seen.insert(t.clone()));
        let names: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
        AnsatzLibrary {
            desc: format!(
                "terms v, sin v, cos v, tan v, v*w, v*sin w, v*cos w over ({}){}",
                names.join(", "),
                if ratio_vars.is_empty() { "" } else { ", and input ratios" }
            ),
            terms,
        }
    }

    /// Adds `p*t` for every parameter `p` and term `t`.
    pub fn times_params(&self, params: &[Symbol]) -> Self {
        let mut terms = self.terms.clone();
        for p in params {
            let pe = Expr::symbol(p);
            terms.extend(self.terms.iter().map(|t| &pe * t));
        }
        AnsatzLibrary {
            terms,
            desc: format!("{}, each also times a parameter", self.desc),
        }
    }

    pub fn retain(mut self, f: impl Fn(&Expr) -> bool) -> Self {
        self.terms.retain(|t| f(t));
        self
    }

    pub fn terms(&self) -> &[Expr] {
        &self.terms
    }

    pub fn describe(&self) -> &str {
        &self.desc
    }
}

/// Best rational approximation with denominator at most `MAX_DEN`, if close.
pub fn rationalize(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut y = x;
    for _ in 0..20 {
        let a = y.floor();
        if a.abs() > 1e9 {
            break;
        }
        let a = a as i64;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > MAX_DEN {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= 1e-7 * x.abs().max(1.0) {
            return Some(Rational::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = y - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        y = 1.0 / frac;
    }
    None
}

/// Rows of the reduced row echelon form of `m`, pivoting over columns from
/// last to first so that late (simple) columns end up in the last rows.
fn rref_reversed(mut m: Vec<Vec<f64>>, ncols: usize) -> Vec<Vec<f64>> {
    let nrows = m.len();
    let mut r = 0;
    for col in (0..ncols).rev() {
        if r == nrows {
            break;
        }
        let (best, val) = (r..nrows)
            .map(|i| (i, m[i][col].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val < 1e-9 {
            continue;
        }
        m.swap(r, best);
        let p = m[r][col];
        for v in m[r].iter_mut() {
            *v /= p;
        }
        for i in 0..nrows {
            if i != r {
                let f = m[i][col];
                if f != 0.0 {
                    for j in 0..ncols {
                        m[i][j] -= f * m[r][j];
                    }
                }
            }
        }
        r += 1;
    }
    m.truncate(r);
    m
}

/// A first-integral search over one set of vector fields.
pub struct IntegralSearch<'a> {
    pub fields: &'a [VectorField],
    /// Variables the ansatz is built from; independence is measured in them.
    pub vars: Vec<Symbol>,
    pub ratio_vars: Vec<Symbol>,
    pub params: Vec<Symbol>,
    pub hints: &'a [Expr],
    /// When nonempty, candidates must mention one of these variables.
    pub must_contain: Vec<Symbol>,
    pub domain: &'a Domain,
    pub num: &'a Numerics,
}

impl IntegralSearch<'_> {
    pub fn library(&self, with_params: bool) -> AnsatzLibrary {
        let mut lib = AnsatzLibrary::standard(&self.vars, &self.ratio_vars, self.domain.constraints());
        if with_params && !self.params.is_empty() {
            lib = lib.times_params(&self.params);
        }
        let must = self.must_contain.clone();
        if must.is_empty() {
            lib
        } else {
            lib.retain(move |t| t.contains_any(&must))
        }
    }

    /// Unverified candidates from the nullspace of the sampled annihilation
    /// conditions, simplest first.
    pub fn ansatz_candidates(&self, with_params: bool) -> Result<Vec<Expr>> {
        let lib = self.library(with_params);
        let terms = lib.terms();
        let nt = terms.len();
        if nt == 0 || self.fields.is_empty() {
            return Ok(Vec::new());
        }
        let mut exprs = Vec::with_capacity(nt * self.fields.len());
        for f in self.fields {
            for t in terms {
                exprs.push(f.apply(t));
            }
        }
        let tape = self.domain.compile(&exprs)?;
        let npts = 3 * nt;
        let pts = self.domain.sample_eval(&self.num.fork(0xa45a), &tape, npts)?;
        let nf = self.fields.len();
        let a = DMatrix::from_fn(npts * nf, nt, |r, c| pts[r / nf].1.values[(r % nf) * nt + c]);
        let norms: Vec<f64> = (0..nt)
            .map(|c| {
                let n = a.column(c).norm();
                if n > 0.0 {
                    n
                } else {
                    1.0
                }
            })
            .collect();
        let scaled = DMatrix::from_fn(a.nrows(), nt, |r, c| a[(r, c)] / norms[c]);
        let svd = scaled.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let mut null: Vec<Vec<f64>> = Vec::new();
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s <= 1e-9 * smax.max(1e-300) {
                null.push((0..nt).map(|c| vt[(i, c)] / norms[c]).collect());
            }
        }
        let rows = rref_reversed(null, nt);
        let mut cands: Vec<(usize, usize, u64, Expr)> = Vec::new();
        for row in rows {
            let max = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let support: Vec<usize> = (0..nt).filter(|&c| row[c].abs() > 1e-7 * max).collect();
            let Some(&first) = support.first() else { continue };
            // any coefficient may serve as the unit; the first that makes
            // every ratio a small rational wins
            let parts = support.iter().find_map(|&l| {
                support
                    .iter()
                    .map(|&c| rationalize(row[c] / row[l]).map(|q| &Expr::rational(q) * &terms[c]))
                    .collect::<Option<Vec<Expr>>>()
            });
            let Some(parts) = parts else { continue };
            let e = tidy(&add(parts));
            if e.is_constant() {
                continue;
            }
            let size = e.size();
            cands.push((support.len(), first, size, e));
        }
        cands.sort_by_key(|c| (c.0, c.1, c.2));
        let mut out: Vec<Expr> = Vec::new();
        for (_, _, _, e) in cands {
            if !out.contains(&e) {
                out.push(e);
            }
        }
        Ok(out)
    }

    /// Whether every field annihilates `phi`.
    pub fn is_integral(&self, phi: &Expr) -> Result<bool> {
        for f in self.fields {
            if !is_zero(&f.apply(phi), self.domain, self.num)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn usable_hint(&self, h: &Expr) -> bool {
        let syms = self.domain.symbols();
        h.free_symbols().iter().all(|s| syms.contains(s))
            && (self.must_contain.is_empty() || h.contains_any(&self.must_contain))
    }

    /// `count` functionally independent first integrals: hints first, then
    /// ansatz candidates, retrying with parameter-scaled terms.
    pub fn find(&self, count: usize) -> Result<Vec<Expr>> {
        let mut chosen: Vec<Expr> = Vec::new();
        if count == 0 {
            return Ok(chosen);
        }
        let hints: Vec<Expr> = self.hints.iter().filter(|h| self.usable_hint(h)).cloned().collect();
        self.extend_independent(&mut chosen, &hints, count)?;
        for with_params in [false, true] {
            if chosen.len() == count || (with_params && self.params.is_empty()) {
                break;
            }
            let cands = self.ansatz_candidates(with_params)?;
            self.extend_independent(&mut chosen, &cands, count)?;
        }
        if chosen.len() < count {
            return Err(Error::Straighten(self.failure_message(count, chosen.len())));
        }
        Ok(chosen)
    }

    fn extend_independent(&self, chosen: &mut Vec<Expr>, cands: &[Expr], count: usize) -> Result<()> {
        for c in cands {
            if chosen.len() == count {
                break;
            }
            if chosen.contains(c) {
                continue;
            }
            // a candidate over variables that are themselves chosen adds nothing
            let coordinate_vars: Vec<&Symbol> = chosen.iter().filter_map(|e| e.as_symbol()).collect();
            if c.free_symbols()
                .iter()
                .filter(|s| self.vars.contains(s))
                .all(|s| coordinate_vars.contains(&s))
            {
                continue;
            }
            if !self.is_integral(c)? {
                continue;
            }
            let mut rows: Vec<Vec<Expr>> = chosen.iter().map(|e| gradient(e, &self.vars)).collect();
            rows.push(gradient(c, &self.vars));
            if generic_rank(&rows, self.domain, self.num)? == rows.len() {
                chosen.push(c.clone());
            }
        }
        Ok(())
    }

    /// Describes the unsolved annihilation conditions, in a form a user can
    /// answer with a hint file.
    pub fn failure_message(&self, count: usize, found: usize) -> String {
        let vars: Vec<&str> = self.vars.iter().map(|s| s.as_str()).collect();
        let mut msg = format!(
            "found {found} of {count} first integrals with {}; supply `hint first_integral <expr>` lines for functions phi({}) with",
            self.library(true).describe(),
            vars.join(", ")
        );
        for f in self.fields {
            let parts: Vec<String> = f
                .coords()
                .iter()
                .zip(f.comps())
                .filter(|(_, c)| !c.is_zero_literal())
                .map(|(s, c)| format!("({c})*d(phi)/d({s})"))
                .collect();
            msg.push_str(&format!("\n  {} = 0", parts.join(" + ")));
        }
        msg
    }
}
