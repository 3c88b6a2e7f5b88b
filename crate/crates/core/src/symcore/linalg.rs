//! Symbolic Gauss-Jordan elimination whose pivot and zero decisions are made
//! numerically at generic sample points.

use super::expr::{mul, Expr};
use super::poly::{div_exact, expand};
use super::sample::{Domain, Numerics};
use crate::error::{Error, Result};

const PIVOT_POINTS: usize = 12;

/// Light cleanup for matrix entries: prefer the expanded form when smaller.
pub fn tidy(e: &Expr) -> Expr {
    if e.size() > 400 {
        return e.clone();
    }
    match expand(e) {
        Some(x) if x.size() < e.size() => x,
        _ => e.clone(),
    }
}

/// `a / b`, exact when `b` divides `a` as a Laurent polynomial.
pub fn divide(a: &Expr, b: &Expr) -> Expr {
    if b.is_one_literal() || a.is_zero_literal() {
        return a.clone();
    }
    if b.as_num().is_none() && a.size() < 400 && b.size() < 200 {
        if let Some(q) = div_exact(a, b) {
            let plain = mul(vec![a.clone(), b.recip()]);
            return if q.size() <= plain.size() { q } else { tidy(&plain) };
        }
    }
    tidy(&mul(vec![a.clone(), b.recip()]))
}

/// Which entries of the matrix vanish identically, and which are safe pivots.
fn classify(m: &[Vec<Expr>], domain: &Domain, num: &Numerics) -> Result<Vec<Vec<(bool, bool)>>> {
    let ncols = m.first().map_or(0, |r| r.len());
    let flat: Vec<Expr> = m.iter().flat_map(|r| r.iter().cloned()).collect();
    let t = domain.compile(&flat)?;
    let pts = domain.sample_eval(num, &t, PIVOT_POINTS)?;
    let tol = num.cfg.tol_zero;
    let mut out = vec![vec![(true, false); ncols]; m.len()];
    for (k, e) in flat.iter().enumerate() {
        let (i, j) = (k / ncols, k % ncols);
        if e.is_zero_literal() {
            continue;
        }
        let small = pts.iter().filter(|(_, ev)| ev.is_small(k, tol)).count();
        out[i][j] = (small == pts.len(), small * 10 <= pts.len());
    }
    Ok(out)
}

/// Reduced row echelon form. Returns the reduced matrix and pivot positions
/// `(row, col)`; pivot entries are normalized to 1.
pub fn rref(m: &[Vec<Expr>], domain: &Domain, num: &Numerics) -> Result<(Vec<Vec<Expr>>, Vec<(usize, usize)>)> {
    let mut a: Vec<Vec<Expr>> = m.to_vec();
    let nrows = a.len();
    let ncols = a.first().map_or(0, |r| r.len());
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let num = num.fork(0x11a1);
    loop {
        let cls = classify(&a, domain, &num)?;
        for i in 0..nrows {
            for j in 0..ncols {
                if cls[i][j].0 {
                    a[i][j] = Expr::zero();
                }
            }
        }
        let mut best: Option<(usize, usize)> = None;
        for i in 0..nrows {
            if pivots.iter().any(|p| p.0 == i) {
                continue;
            }
            for j in 0..ncols {
                if pivots.iter().any(|p| p.1 == j) || !cls[i][j].1 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj)) => {
                        let key = |e: &Expr| (!e.is_constant(), e.size());
                        key(&a[i][j]) < key(&a[bi][bj])
                    }
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else {
            // leftover entries that are neither zero nor safe pivots
            let unsettled = (0..nrows)
                .filter(|i| !pivots.iter().any(|p| p.0 == *i))
                .any(|i| (0..ncols).any(|j| !pivots.iter().any(|p| p.1 == j) && !cls[i][j].0));
            if unsettled {
                return Err(Error::RankInstability(
                    "matrix entry vanishes at some but not all sample points".into(),
                ));
            }
            break;
        };
        let p = a[pi][pj].clone();
        for j in 0..ncols {
            a[pi][j] = if j == pj { Expr::one() } else { divide(&a[pi][j], &p) };
        }
        for i in 0..nrows {
            if i == pi || a[i][pj].is_zero_literal() {
                continue;
            }
            let f = a[i][pj].clone();
            for j in 0..ncols {
                a[i][j] = if j == pj {
                    Expr::zero()
                } else if a[pi][j].is_zero_literal() {
                    a[i][j].clone()
                } else {
                    tidy(&(&a[i][j] - &(&f * &a[pi][j])))
                };
            }
        }
        pivots.push((pi, pj));
        if pivots.len() == nrows.min(ncols) {
            break;
        }
    }
    Ok((a, pivots))
}

/// Basis of `{x : M x = 0}` as symbolic vectors.
pub fn nullspace(m: &[Vec<Expr>], ncols: usize, domain: &Domain, num: &Numerics) -> Result<Vec<Vec<Expr>>> {
    if m.is_empty() {
        return Ok((0..ncols)
            .map(|j| (0..ncols).map(|k| if k == j { Expr::one() } else { Expr::zero() }).collect())
            .collect());
    }
    let (a, pivots) = rref(m, domain, num)?;
    let mut out = Vec::new();
    for j in 0..ncols {
        if pivots.iter().any(|p| p.1 == j) {
            continue;
        }
        let mut v = vec![Expr::zero(); ncols];
        v[j] = Expr::one();
        for &(r, c) in &pivots {
            v[c] = a[r][j].neg();
        }
        out.push(v);
    }
    Ok(out)
}

/// Covectors annihilating every row vector in `fields` (each of length `n`).
pub fn annihilators(fields: &[Vec<Expr>], n: usize, domain: &Domain, num: &Numerics) -> Result<Vec<Vec<Expr>>> {
    nullspace(fields, n, domain, num)
}

/// Dot product with tidy-up.
pub fn dot(a: &[Expr], b: &[Expr]) -> Expr {
    let terms: Vec<Expr> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero_literal() && !y.is_zero_literal())
        .map(|(x, y)| x * y)
        .collect();
    tidy(&super::expr::add(terms))
}

/// Solves the 2x2 system `[a b; c d] (x, y) = (e, f)` by Cramer's rule.
pub fn solve2(m: [[&Expr; 2]; 2], rhs: [&Expr; 2]) -> [Expr; 2] {
    let det = &(m[0][0] * m[1][1]) - &(m[0][1] * m[1][0]);
    let det = tidy(&det);
    let x = &(rhs[0] * m[1][1]) - &(m[0][1] * rhs[1]);
    let y = &(m[0][0] * rhs[1]) - &(rhs[0] * m[1][0]);
    [divide(&tidy(&x), &det), divide(&tidy(&y), &det)]
}
