use crate::diffgeo::{is_involutive, lie_bracket, Distribution};
use crate::error::Result;
use crate::reptest::system_fields;
use crate::symcore::Numerics;
use crate::sysdsl::SystemModel;

/// The chain `D₀ = span{∂_u}`, `D_i = D_{i-1} + [f, D_{i-1}]` on the
/// state-input manifold.
#[derive(Clone, Debug)]
pub struct DChain {
    pub levels: Vec<Distribution>,
    pub ranks: Vec<usize>,
    /// Index of the first non-involutive level, if any.
    pub first_non_involutive: Option<usize>,
}

impl DChain {
    pub fn compute(m: &SystemModel, num: &Numerics) -> Result<DChain> {
        let sf = system_fields(m);
        let domain = m.sampling_domain();
        let full = m.n() + m.m();
        let mut levels = vec![Distribution::new(&sf.coords, sf.inputs.clone())];
        let mut ranks = vec![m.m()];
        let mut first_non_involutive = None;
        loop {
            let last = levels.last().unwrap();
            let k = levels.len() - 1;
            if first_non_involutive.is_none() && !is_involutive(last, &domain, num)? {
                first_non_involutive = Some(k);
            }
            if ranks[k] == full || k > m.n() {
                break;
            }
            let next = last
                .with(last.fields().iter().map(|v| lie_bracket(&sf.drift, v)))
                .pruned(&domain, num)?;
            let r = next.rank(&domain, num)?;
            if r == ranks[k] {
                break;
            }
            levels.push(next);
            ranks.push(r);
        }
        Ok(DChain {
            levels,
            ranks,
            first_non_involutive,
        })
    }

    pub fn is_sfl(&self, m: &SystemModel) -> bool {
        self.first_non_involutive.is_none() && self.ranks.last() == Some(&(m.n() + m.m()))
    }

    /// Controllability indices, largest first.
    pub fn indices(&self) -> Vec<usize> {
        // rho[k] = number of indices >= k
        let rho: Vec<usize> = (1..self.ranks.len()).map(|k| self.ranks[k] - self.ranks[k - 1]).collect();
        let mut out = Vec::new();
        for k in (1..=rho.len()).rev() {
            let here = rho[k - 1] - rho.get(k).copied().unwrap_or(0);
            out.extend(std::iter::repeat_n(k, here));
        }
        out
    }
}

/// Static feedback linearizability: every `D_i` involutive and the chain
/// reaches full rank.
pub fn sfl_test(m: &SystemModel, num: &Numerics) -> Result<bool> {
    Ok(DChain::compute(m, num)?.is_sfl(m))
}
