use nalgebra::DMatrix;
use serde::Serialize;

use super::jets::JetSpace;
use crate::error::{Error, Result};
use crate::symcore::sample::{majority, numeric_rank};
use crate::symcore::{Expr, Numerics};
use crate::sysdsl::SystemModel;

/// Result of the numeric flatness check of a candidate output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub verified: bool,
    /// Least `R = (r₁, r₂)` with `x, u` functions of `y_[R]`.
    pub r: Option<Vec<usize>>,
    /// `#R - n`.
    pub d: Option<i64>,
    pub max_order: usize,
    pub samples: usize,
    /// Largest residual of the `x, u` coordinate rows against the row space
    /// of the jet Jacobian, over the sample points.
    pub max_residual: Option<f64>,
    /// Smallest `σ_min / σ_max` of the jet Jacobian over the sample points.
    pub min_singular_ratio: Option<f64>,
    pub message: String,
}

/// `R` in the order they are tried: by `#R`, then by `r₁`.
fn multi_indices(m: usize, total: usize) -> Vec<Vec<usize>> {
    if m == 1 {
        return vec![vec![total]];
    }
    (0..=total).map(|r1| vec![r1, total - r1]).collect()
}

fn stats(j: &[Vec<f64>], unit_cols: &[usize]) -> (f64, f64) {
    let ncols = j[0].len();
    let norms: Vec<f64> = j.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300)).collect();
    let a = DMatrix::from_fn(j.len(), ncols, |r, c| j[r][c] / norms[r]);
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-8 * smax)
        .collect();
    let mut worst = 0.0f64;
    for &c in unit_cols {
        // |e_c - P e_c|² = 1 - Σ v_ic²
        let proj: f64 = keep.iter().map(|&i| vt[(i, c)] * vt[(i, c)]).sum();
        worst = worst.max((1.0 - proj).max(0.0).sqrt());
    }
    (worst, if smax > 0.0 { smin / smax } else { 0.0 })
}

/// Numeric test that `cand` is a flat output of `m`: searches the least `R`
/// with `#R <= max_order` such that the rows of `y_[R]` are independent and
/// the coordinate rows of `x` and `u` lie in their span.
pub fn verify_flat_output(m: &SystemModel, cand: &[Expr], max_order: usize, num: &Numerics) -> Result<VerifyReport> {
    if cand.len() != m.m() {
        return Err(Error::Precondition(format!("{} output components for {} inputs", cand.len(), m.m())));
    }
    // input derivatives are accepted up to a generous order
    let wide = JetSpace::new(m, 16)?;
    let known = m.all_names();
    for e in cand {
        if let Some(s) = e.free_symbols().into_iter().find(|s| !known.contains(s) && wide.jet_of(s).is_none()) {
            return Err(Error::Unbound(s.to_string()));
        }
    }
    let q = cand.iter().map(|e| wide.order_of(e)).max().unwrap_or(0);
    let order = q + max_order + 1;
    let js = JetSpace::new(m, order)?;
    let n = m.n();

    // jets y_i^(k), k = 0..=max_order
    let mut jets: Vec<Vec<Expr>> = cand.iter().map(|e| vec![e.clone()]).collect();
    for row in jets.iter_mut() {
        for _ in 0..max_order {
            let next = js.total_derivative(row.last().unwrap())?;
            row.push(next);
        }
    }
    let flat: Vec<Expr> = jets.iter().flatten().cloned().collect();
    let vars = js.vars(order);
    let domain = js.domain(order);
    let tape = domain.compile(&flat)?;
    let count = num.cfg.samples.max(1);
    let pts = domain.sample_jacobian(num, &tape, count)?;
    let nv = vars.len();
    // coordinate columns of x and u (order-0 jets)
    let mut unit_cols: Vec<usize> = (0..n).collect();
    for j in 0..m.m() {
        let s = js.jet(j, 0);
        unit_cols.push(vars.iter().position(|v| v == s).unwrap());
    }
    let stride = max_order + 1;
    let tol = (num.cfg.tol_zero, num.cfg.tol_rank);
    let mut report = VerifyReport {
        verified: false,
        r: None,
        d: None,
        max_order,
        samples: pts.len(),
        max_residual: None,
        min_singular_ratio: None,
        message: String::new(),
    };
    let mut unstable = 0usize;
    for total in n..=max_order {
        for r in multi_indices(m.m(), total) {
            let rows_idx: Vec<usize> = r.iter().enumerate().flat_map(|(i, &ri)| (0..=ri).map(move |k| i * stride + k)).collect();
            let want = total + m.m();
            let mut ry = Vec::new();
            let mut rall = Vec::new();
            let mut mats = Vec::new();
            for (_, _, jac) in &pts {
                let rows: Vec<Vec<f64>> = rows_idx.iter().map(|&i| jac[i][..nv].to_vec()).collect();
                let zeros = vec![vec![0.0; nv]; rows.len()];
                ry.push(numeric_rank(&rows, &zeros, tol.0, tol.1));
                let mut all = rows.clone();
                for &c in &unit_cols {
                    let mut e = vec![0.0; nv];
                    e[c] = 1.0;
                    all.push(e);
                }
                let zeros = vec![vec![0.0; nv]; all.len()];
                rall.push(numeric_rank(&all, &zeros, tol.0, tol.1));
                mats.push(rows);
            }
            let (ky, ka) = match (majority(&ry, "jet rank"), majority(&rall, "augmented jet rank")) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    unstable += 1;
                    continue;
                }
            };
            if ky == want && ka == ky {
                let mut worst = 0.0f64;
                let mut ratio = f64::INFINITY;
                for rows in &mats {
                    let (w, s) = stats(rows, &unit_cols);
                    worst = worst.max(w);
                    ratio = ratio.min(s);
                }
                report.verified = true;
                report.d = Some(total as i64 - n as i64);
                report.r = Some(r.clone());
                report.max_residual = Some(worst);
                report.min_singular_ratio = Some(ratio);
                report.message = format!("x and u are functions of y_[R] with R = {:?}", r);
                return Ok(report);
            }
        }
    }
    report.message = if unstable > 0 {
        format!("no R with #R <= {max_order} found; {unstable} rank decisions were unstable")
    } else {
        format!("no R with #R <= {max_order} parameterizes x and u")
    };
    Ok(report)
}
