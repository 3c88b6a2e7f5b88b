use super::sfl::DChain;
use crate::coordxform::IntegralSearch;
use crate::diffgeo::lie_derivative;
use crate::error::{Error, Result};
use crate::reptest::system_fields;
use crate::symcore::{generic_rank, gradient, Expr, Numerics};
use crate::sysdsl::SystemModel;

/// Linearizing outputs of a static feedback linearizable system, one per
/// input, largest controllability index first. Hint expressions are tried
/// before the ansatz candidates.
pub fn extract_linearizing_output(m: &SystemModel, hints: &[Expr], num: &Numerics) -> Result<Vec<Expr>> {
    let chain = DChain::compute(m, num)?;
    if !chain.is_sfl(m) {
        return Err(Error::Precondition("system is not static feedback linearizable".into()));
    }
    let indices = chain.indices();
    debug_assert_eq!(indices.len(), m.m());
    debug_assert_eq!(indices.iter().sum::<usize>(), m.n());
    let domain = m.sampling_domain();
    let sf = system_fields(m);
    let coords = m.coords();
    let states = m.states.clone();
    let usable: Vec<Expr> = hints
        .iter()
        .filter(|h| h.free_symbols().iter().all(|s| states.contains(s) || m.param_symbols().contains(s)))
        .cloned()
        .collect();

    let mut outputs: Vec<Expr> = Vec::new();
    let mut lie_rows: Vec<Vec<Expr>> = Vec::new();
    let mut dec_rows: Vec<Vec<Expr>> = Vec::new();
    let mut cache: Option<(usize, Vec<Expr>)> = None;
    for &k in &indices {
        let fields = chain.levels[k - 1].fields();
        let search = IntegralSearch {
            fields,
            vars: states.clone(),
            ratio_vars: Vec::new(),
            params: m.param_symbols(),
            hints: &usable,
            must_contain: Vec::new(),
            domain: &domain,
            num,
        };
        let mut found = None;
        let mut stages: Vec<Option<bool>> = vec![None, Some(false)];
        if !m.params.is_empty() {
            stages.push(Some(true));
        }
        'stages: for stage in stages {
            let cands = match stage {
                None => usable.clone(),
                Some(wp) => match &cache {
                    Some((ck, c)) if *ck == k && !wp => c.clone(),
                    _ => {
                        let c = search.ansatz_candidates(wp)?;
                        if !wp {
                            cache = Some((k, c.clone()));
                        }
                        c
                    }
                },
            };
            for c in cands {
                if outputs.contains(&c) || !search.is_integral(&c)? {
                    continue;
                }
                let mut lr = lie_rows.clone();
                for j in 0..k {
                    lr.push(gradient(&lie_derivative(&sf.drift, &c, j), &coords));
                }
                if generic_rank(&lr, &domain, num)? != lr.len() {
                    continue;
                }
                let mut dr = dec_rows.clone();
                dr.push(gradient(&lie_derivative(&sf.drift, &c, k), &m.inputs));
                if generic_rank(&dr, &domain, num)? != dr.len() {
                    continue;
                }
                found = Some((c, lr, dr));
                break 'stages;
            }
        }
        let Some((c, lr, dr)) = found else {
            return Err(Error::Straighten(format!(
                "no linearizing output of index {k} found; {}",
                search.failure_message(1, 0)
            )));
        };
        outputs.push(c);
        lie_rows = lr;
        dec_rows = dr;
    }
    Ok(outputs)
}
