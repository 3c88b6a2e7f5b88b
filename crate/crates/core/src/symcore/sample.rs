//! Generic-point sampling: the probabilistic zero test and numeric rank.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::expr::{Expr, Symbol};
use super::tape::{Evaluation, Tape};
use crate::error::{Error, Result};

/// Tolerances and sample counts for every sampling-based decision.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct NumConfig {
    pub samples: usize,
    pub tol_zero: f64,
    pub tol_rank: f64,
}

impl Default for NumConfig {
    fn default() -> Self {
        NumConfig {
            samples: 25,
            tol_zero: 1e-9,
            tol_rank: 1e-8,
        }
    }
}

/// Seeded source of sample points. Every request draws from a fresh stream
/// derived from the seed, a fork path and a request counter, so results do
/// not depend on scheduling when branches run on separate threads.
#[derive(Debug)]
pub struct Numerics {
    pub cfg: NumConfig,
    seed: u64,
    path: Arc<Vec<u64>>,
    counter: AtomicU64,
}

impl Clone for Numerics {
    fn clone(&self) -> Self {
        Numerics {
            cfg: self.cfg.clone(),
            seed: self.seed,
            path: self.path.clone(),
            counter: AtomicU64::new(self.counter.load(Ordering::SeqCst)),
        }
    }
}

pub const DEFAULT_SEED: u64 = 20_200_817;

impl Default for Numerics {
    fn default() -> Self {
        Numerics::new(DEFAULT_SEED, NumConfig::default())
    }
}

impl Numerics {
    pub fn new(seed: u64, cfg: NumConfig) -> Self {
        Numerics {
            cfg,
            seed,
            path: Arc::new(Vec::new()),
            counter: AtomicU64::new(0),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent deterministic stream for a sub-task.
    pub fn fork(&self, tag: u64) -> Numerics {
        let mut path = (*self.path).clone();
        path.push(self.counter.fetch_add(1, Ordering::SeqCst));
        path.push(tag);
        Numerics {
            cfg: self.cfg.clone(),
            seed: self.seed,
            path: Arc::new(path),
            counter: AtomicU64::new(0),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let k = self.counter.fetch_add(1, Ordering::SeqCst);
        let mut h = DefaultHasher::new();
        self.seed.hash(&mut h);
        self.path.hash(&mut h);
        k.hash(&mut h);
        ChaCha8Rng::seed_from_u64(h.finish())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

/// Variables, parameters and nonzero constraints that define where
/// expressions are sampled.
#[derive(Clone, Debug)]
pub struct Domain {
    symbols: Vec<Symbol>,
    ranges: Vec<Option<(f64, f64)>>,
    constraints: Vec<Expr>,
    guards: Vec<Expr>,
}

pub const VAR_RANGE: f64 = 1.5;
pub const VAR_GAP: f64 = 0.05;
const CONSTRAINT_MARGIN: f64 = 0.02;
const MAX_ATTEMPTS_PER_POINT: usize = 400;

impl Domain {
    pub fn new(vars: &[Symbol], params: &[(Symbol, (f64, f64))], constraints: &[Expr]) -> Self {
        let mut symbols: Vec<Symbol> = vars.to_vec();
        let mut ranges: Vec<Option<(f64, f64)>> = vec![None; vars.len()];
        for (p, r) in params {
            symbols.push(p.clone());
            ranges.push(Some(*r));
        }
        Domain {
            symbols,
            ranges,
            constraints: constraints.to_vec(),
            guards: Vec::new(),
        }
    }

    /// Expressions that must evaluate at every accepted point.
    pub fn with_guards(mut self, guards: &[Expr]) -> Self {
        self.guards.extend(guards.iter().cloned());
        self
    }

    pub fn with_vars(&self, extra: &[Symbol]) -> Self {
        let mut d = self.clone();
        for s in extra {
            if !d.symbols.contains(s) {
                let at = d.ranges.iter().position(|r| r.is_some()).unwrap_or(d.symbols.len());
                d.symbols.insert(at, s.clone());
                d.ranges.insert(at, None);
            }
        }
        d
    }

    pub fn with_constraints(&self, extra: &[Expr]) -> Self {
        let mut d = self.clone();
        for c in extra {
            if !c.is_constant() && !d.constraints.contains(c) {
                d.constraints.push(c.clone());
            }
        }
        d
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.ranges
            .iter()
            .map(|r| match r {
                Some((lo, hi)) => rng.random_range(*lo..*hi),
                None => {
                    let m = rng.random_range(VAR_GAP..VAR_RANGE);
                    if rng.random_bool(0.5) {
                        m
                    } else {
                        -m
                    }
                }
            })
            .collect()
    }

    /// Draws `count` points at which the constraints are bounded away from
    /// zero, the guards evaluate, and every expression of `targets` evaluates.
    /// Returns the points with the evaluations of `targets`.
    pub fn sample_eval(&self, num: &Numerics, targets: &Tape, count: usize) -> Result<Vec<(Vec<f64>, Evaluation)>> {
        let check = Tape::compile(
            &self.constraints.iter().chain(self.guards.iter()).cloned().collect::<Vec<_>>(),
            &self.symbols,
        )?;
        let nc = self.constraints.len();
        let mut rng = num.rng();
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0usize;
        while out.len() < count {
            attempts += 1;
            if attempts > MAX_ATTEMPTS_PER_POINT * count.max(1) {
                return Err(Error::Sampling(format!(
                    "found {} of {} admissible points after {} attempts",
                    out.len(),
                    count,
                    attempts - 1
                )));
            }
            let p = self.draw(&mut rng);
            let Ok(c) = check.eval(&p) else { continue };
            if (0..nc).any(|i| c.values[i].abs() < CONSTRAINT_MARGIN) {
                continue;
            }
            let Ok(ev) = targets.eval(&p) else { continue };
            out.push((p, ev));
        }
        Ok(out)
    }

    /// Like [`Domain::sample_eval`] but returns Jacobians of the targets with
    /// respect to the domain symbols as well.
    pub fn sample_jacobian(
        &self,
        num: &Numerics,
        targets: &Tape,
        count: usize,
    ) -> Result<Vec<(Vec<f64>, Evaluation, Vec<Vec<f64>>)>> {
        let pts = self.sample_eval(num, targets, count * 2 + 4)?;
        let mut out = Vec::with_capacity(count);
        for (p, _) in pts {
            if let Ok((ev, j)) = targets.jacobian(&p) {
                out.push((p, ev, j));
                if out.len() == count {
                    return Ok(out);
                }
            }
        }
        Err(Error::Sampling("derivatives undefined at too many sample points".into()))
    }

    pub fn compile(&self, exprs: &[Expr]) -> Result<Tape> {
        Tape::compile(exprs, &self.symbols)
    }

    /// A fixed reference point for deterministic tie-breaking choices.
    pub fn reference_point(&self, num: &Numerics, exprs: &[Expr]) -> Result<(Vec<f64>, Evaluation)> {
        let t = self.compile(exprs)?;
        let mut v = self.sample_eval(&num.fork(0x5eed), &t, 1)?;
        Ok(v.pop().unwrap())
    }
}

/// Probabilistic zero test at `cfg.samples` admissible points.
pub fn is_zero(e: &Expr, domain: &Domain, num: &Numerics) -> Result<bool> {
    if let Some(c) = e.as_num() {
        return Ok(num_traits::Zero::is_zero(c));
    }
    let t = domain.compile(std::slice::from_ref(e))?;
    let pts = domain.sample_eval(num, &t, num.cfg.samples.max(1))?;
    Ok(pts.iter().all(|(_, ev)| ev.is_small(0, num.cfg.tol_zero)))
}

/// Zero test for every expression of a batch (one answer per expression).
pub fn are_zero(es: &[Expr], domain: &Domain, num: &Numerics) -> Result<Vec<bool>> {
    let mut out = vec![true; es.len()];
    let live: Vec<usize> = (0..es.len()).filter(|&i| es[i].as_num().is_none()).collect();
    for (i, e) in es.iter().enumerate() {
        if let Some(c) = e.as_num() {
            out[i] = num_traits::Zero::is_zero(c);
        }
    }
    if live.is_empty() {
        return Ok(out);
    }
    let t = domain.compile(&live.iter().map(|&i| es[i].clone()).collect::<Vec<_>>())?;
    let pts = domain.sample_eval(num, &t, num.cfg.samples.max(1))?;
    for (k, &i) in live.iter().enumerate() {
        out[i] = pts.iter().all(|(_, ev)| ev.is_small(k, num.cfg.tol_zero));
    }
    Ok(out)
}

/// Numeric rank of a matrix whose entries carry error scales. Entries within
/// noise of zero are cleared, rows are normalized, and singular values below
/// `tol_rank` times the largest are discarded.
pub fn numeric_rank(values: &[Vec<f64>], scales: &[Vec<f64>], tol_zero: f64, tol_rank: f64) -> usize {
    let rows: Vec<Vec<f64>> = values
        .iter()
        .zip(scales)
        .filter_map(|(r, s)| {
            let cleaned: Vec<f64> = r
                .iter()
                .zip(s)
                .map(|(v, sc)| if v.abs() <= tol_zero * (1.0 + sc) { 0.0 } else { *v })
                .collect();
            let norm = cleaned.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                None
            } else {
                Some(cleaned.into_iter().map(|v| v / norm).collect())
            }
        })
        .collect();
    if rows.is_empty() {
        return 0;
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > tol_rank * max).count()
}

/// Majority vote over per-point integer decisions; disagreement above 10%
/// is reported as rank instability.
pub fn majority(values: &[usize], what: &str) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Sampling(format!("no samples for {what}")));
    }
    let mut counts = std::collections::BTreeMap::new();
    for v in values {
        *counts.entry(*v).or_insert(0usize) += 1;
    }
    let (&best, &n) = counts.iter().max_by_key(|(k, c)| (**c, std::cmp::Reverse(**k))).unwrap();
    let disagree = values.len() - n;
    if disagree * 10 > values.len() {
        return Err(Error::RankInstability(format!(
            "{what}: values {:?} across {} samples",
            counts,
            values.len()
        )));
    }
    Ok(best)
}

/// Generic rank of a list of row vectors of expressions.
pub fn generic_rank(rows: &[Vec<Expr>], domain: &Domain, num: &Numerics) -> Result<usize> {
    ranks_of_prefixes(rows, &[rows.len()], domain, num).map(|v| v[0])
}

/// Generic ranks of several leading row blocks `rows[..k]`, decided on a
/// shared set of sample points.
pub fn ranks_of_prefixes(rows: &[Vec<Expr>], prefixes: &[usize], domain: &Domain, num: &Numerics) -> Result<Vec<usize>> {
    if rows.is_empty() {
        return Ok(prefixes.iter().map(|_| 0).collect());
    }
    let ncols = rows[0].len();
    let flat: Vec<Expr> = rows.iter().flat_map(|r| r.iter().cloned()).collect();
    let t = domain.compile(&flat)?;
    let pts = domain.sample_eval(num, &t, num.cfg.samples.max(1))?;
    let mut per: Vec<Vec<usize>> = vec![Vec::new(); prefixes.len()];
    for (_, ev) in &pts {
        let vals: Vec<Vec<f64>> = ev.values.chunks(ncols).map(|c| c.to_vec()).collect();
        let scs: Vec<Vec<f64>> = ev.scales.chunks(ncols).map(|c| c.to_vec()).collect();
        for (k, &p) in prefixes.iter().enumerate() {
            per[k].push(numeric_rank(&vals[..p], &scs[..p], num.cfg.tol_zero, num.cfg.tol_rank));
        }
    }
    per.iter().map(|v| majority(v, "generic rank")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_expr;

    fn dom(vars: &[&str]) -> Domain {
        Domain::new(&vars.iter().map(|v| Symbol::new(v)).collect::<Vec<_>>(), &[], &[])
    }

    #[test]
    fn pythagorean_is_zero() {
        let num = Numerics::default();
        let e = parse_expr("sin(t)^2 + cos(t)^2 - 1").unwrap();
        assert!(is_zero(&e, &dom(&["t"]), &num).unwrap());
        let d = Domain::new(&[Symbol::new("u1")], &[], &[parse_expr("u1").unwrap()]);
        assert!(!is_zero(&parse_expr("u1").unwrap(), &d, &num).unwrap());
    }

    #[test]
    fn cancellation_is_zero() {
        let num = Numerics::default();
        let e = parse_expr("(x + y)^3 - x^3 - 3*x^2*y - 3*x*y^2 - y^3").unwrap();
        // the canonical form does not expand powers of sums
        assert!(e.as_num().is_none());
        assert!(is_zero(&e, &dom(&["x", "y"]), &num).unwrap());
    }

    #[test]
    fn collinear_rank() {
        let num = Numerics::default();
        let rows = vec![
            vec![Expr::one(), Expr::zero()],
            vec![Expr::int(2), Expr::zero()],
        ];
        assert_eq!(generic_rank(&rows, &dom(&["x"]), &num).unwrap(), 1);
    }

    #[test]
    fn unsatisfiable_domain_fails() {
        let num = Numerics::default();
        let d = dom(&["x"]).with_guards(&[parse_expr("ln(x - 10)").unwrap()]);
        assert!(matches!(is_zero(&parse_expr("x").unwrap(), &d, &num), Err(Error::Sampling(_))));
    }

    #[test]
    fn forks_are_deterministic() {
        let a = Numerics::new(7, NumConfig::default());
        let b = Numerics::new(7, NumConfig::default());
        let x: f64 = a.fork(3).rng().random();
        let y: f64 = b.fork(3).rng().random();
        assert_eq!(x, y);
    }

    #[test]
    fn majority_flags_instability() {
        assert_eq!(majority(&[2, 2, 2, 2, 2, 2, 2, 2, 2, 1], "t").unwrap(), 2);
        assert!(matches!(majority(&[2, 2, 2, 1, 1], "t"), Err(Error::RankInstability(_))));
    }
}
