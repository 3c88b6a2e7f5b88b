//! Naming conventions for derived variables.

use crate::symcore::Symbol;

/// Next jet name: `w -> w_1`, `w_k -> w_{k+1}`.
pub fn inc(s: &Symbol) -> Symbol {
    let name = s.as_str();
    if let Some(i) = name.rfind('_') {
        let tail = &name[i + 1..];
        if i > 0 && !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) {
            if let Ok(k) = tail.parse::<u64>() {
                return Symbol::new(&format!("{}_{}", &name[..i], k + 1));
            }
        }
    }
    Symbol::new(&format!("{name}_1"))
}

/// `inc` applied `k` times.
pub fn inc_n(s: &Symbol, k: usize) -> Symbol {
    let mut out = s.clone();
    for _ in 0..k {
        out = inc(&out);
    }
    out
}

/// Name for a coordinate replacing `s`.
pub fn bar(s: &Symbol) -> Symbol {
    Symbol::new(&format!("{}_bar", s.as_str()))
}

/// `bar(s)`, made unique against `taken` by further suffixes.
pub fn fresh_bar(s: &Symbol, taken: &[Symbol]) -> Symbol {
    let mut out = bar(s);
    while taken.contains(&out) {
        out = bar(&out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_names() {
        let s = |n: &str| Symbol::new(n);
        assert_eq!(inc(&s("u1")), s("u1_1"));
        assert_eq!(inc(&s("u1_1")), s("u1_2"));
        assert_eq!(inc(&s("v_x")), s("v_x_1"));
        assert_eq!(inc_n(&s("u1_bar"), 2), s("u1_bar_2"));
        assert_eq!(inc(&s("_1")), s("_1_1"));
        assert_eq!(fresh_bar(&s("x"), &[s("x_bar")]), s("x_bar_bar"));
    }
}
