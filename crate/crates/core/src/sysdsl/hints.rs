//! Transformation hints: user-supplied first integrals and linearizing outputs.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::parser::{col_of, strip_comment};
use crate::error::{Error, Result};
use crate::symcore::parse::{parse_expr_at, parse_expr_list_at};
use crate::symcore::{Expr, Symbol};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HintSet {
    /// Candidate first integrals for straightening steps.
    pub first_integrals: Vec<Expr>,
    /// Candidate linearizing outputs.
    pub linearizing_outputs: Vec<[Expr; 2]>,
}

impl HintSet {
    pub fn is_empty(&self) -> bool {
        self.first_integrals.is_empty() && self.linearizing_outputs.is_empty()
    }

    fn exprs(&self) -> impl Iterator<Item = &Expr> {
        self.first_integrals
            .iter()
            .chain(self.linearizing_outputs.iter().flat_map(|p| p.iter()))
    }

    /// Checks that every referenced name is declared, or is a name the
    /// algorithm derives from a declared one (`x_bar`, `u1_2`, ...).
    pub fn check_names(&self, declared: &[Symbol]) -> Result<()> {
        let declared: BTreeSet<&str> = declared.iter().map(|s| s.as_str()).collect();
        for e in self.exprs() {
            for s in e.free_symbols() {
                if !is_derived_from(s.as_str(), &declared) {
                    return Err(Error::Validation(format!("hint references undeclared `{s}`")));
                }
            }
        }
        Ok(())
    }
}

fn is_derived_from(name: &str, declared: &BTreeSet<&str>) -> bool {
    let mut cur = name;
    loop {
        if declared.contains(cur) {
            return true;
        }
        if let Some(base) = cur.strip_suffix("_bar") {
            cur = base;
            continue;
        }
        match cur.rfind('_') {
            Some(i) if i > 0 && cur[i + 1..].chars().all(|c| c.is_ascii_digit()) && i + 1 < cur.len() => {
                cur = &cur[..i]
            }
            _ => return false,
        }
    }
}

pub fn parse_hints(text: &str) -> Result<HintSet> {
    let mut out = HintSet::default();
    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        let off = line.len() - trimmed.len();
        let perr = |column: usize, message: &str| Error::Parse {
            line: ln,
            column,
            message: message.into(),
        };
        let Some(rest) = trimmed.strip_prefix("hint") else {
            return Err(perr(col_of(line, off), "expected `hint`"));
        };
        if !rest.starts_with(char::is_whitespace) {
            return Err(perr(col_of(line, off), "expected `hint`"));
        }
        let kind_off = off + 4 + (rest.len() - rest.trim_start().len());
        let body = &line[kind_off..];
        if let Some(e) = body.strip_prefix("first_integral") {
            let at = kind_off + "first_integral".len();
            out.first_integrals.push(parse_expr_at(e, ln, col_of(line, at))?);
        } else if let Some(e) = body.strip_prefix("linearizing_output") {
            let at = kind_off + "linearizing_output".len();
            let list = parse_expr_list_at(e, ln, col_of(line, at))?;
            let [a, b]: [Expr; 2] = list
                .try_into()
                .map_err(|_| perr(col_of(line, at), "expected two comma separated expressions"))?;
            out.linearizing_outputs.push([a, b]);
        } else {
            return Err(perr(col_of(line, kind_off), "expected `first_integral` or `linearizing_output`"));
        }
    }
    Ok(out)
}

pub fn serialize_hints(h: &HintSet) -> String {
    let mut s = String::new();
    for e in &h.first_integrals {
        let _ = writeln!(s, "hint first_integral {e}");
    }
    for [a, b] in &h.linearizing_outputs {
        let _ = writeln!(s, "hint linearizing_output {a} , {b}");
    }
    s
}
