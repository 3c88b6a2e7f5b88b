//! Line-based system description format.
//!
//! ```text
//! system vtol
//! param epsilon range 0.1 1
//! state x z theta v_x v_z omega
//! input u1 u2
//! domain cos(theta) != 0
//! dot x = v_x
//! ```

use std::collections::BTreeMap;

use super::model::{Param, Provenance, SystemModel};
use crate::error::{Error, Result};
use crate::symcore::expr::Func;
use crate::symcore::parse::parse_expr_at;
use crate::symcore::{Expr, Numerics, Symbol};

const KEYWORDS: &[&str] = &["system", "param", "state", "input", "domain", "dot", "range", "hint", "provenance", "sqrt"];

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace separated words with 1-based starting columns.
fn words(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter().map(|(i, w)| (line[..i].chars().count() + 1, w)).collect()
}

pub(crate) fn check_identifier(name: &str, line: usize, col: usize) -> Result<Symbol> {
    let mut chars = name.chars();
    let ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ok {
        return Err(perr(line, col, format!("invalid name `{name}`")));
    }
    if KEYWORDS.contains(&name) || Func::from_name(name).is_some() {
        return Err(perr(line, col, format!("`{name}` is reserved")));
    }
    Ok(Symbol::new(name))
}

/// Strips a trailing `#` comment.
pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Column (1-based) of byte offset `off` in `line`.
pub(crate) fn col_of(line: &str, off: usize) -> usize {
    line[..off].chars().count() + 1
}

/// Parses the format without the sampling-based rank check.
pub fn parse_system_structure(text: &str) -> Result<SystemModel> {
    let mut name: Option<String> = None;
    let mut params: Vec<Param> = Vec::new();
    let mut states: Vec<(Symbol, usize, usize)> = Vec::new();
    let mut inputs: Vec<Symbol> = Vec::new();
    let mut domain: Vec<Expr> = Vec::new();
    let mut dots: BTreeMap<Symbol, (Expr, usize, usize)> = BTreeMap::new();
    let mut provenance = Provenance::Original;

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let line = strip_comment(raw);
        let ws = words(line);
        let Some(&(kcol, kw)) = ws.first() else { continue };
        match kw {
            "system" => {
                if ws.len() != 2 {
                    return Err(perr(ln, kcol, "expected `system <name>`"));
                }
                if name.is_some() {
                    return Err(perr(ln, kcol, "duplicate `system` line"));
                }
                name = Some(ws[1].1.to_string());
            }
            "provenance" => {
                let ok = ws.len() == 3 && ws[1].1 == "derived";
                let k = if ok { ws[2].1.parse::<usize>().ok() } else { None };
                match (ws.len(), k) {
                    (2, _) if ws[1].1 == "original" => provenance = Provenance::Original,
                    (3, Some(k)) => provenance = Provenance::Derived(k),
                    _ => return Err(perr(ln, kcol, "expected `provenance original` or `provenance derived <k>`")),
                }
            }
            "param" => {
                if ws.len() != 2 && ws.len() != 5 {
                    return Err(perr(ln, kcol, "expected `param <name> [range <lo> <hi>]`"));
                }
                let sym = check_identifier(ws[1].1, ln, ws[1].0)?;
                let mut p = Param { name: sym, range: None };
                if ws.len() == 5 {
                    if ws[2].1 != "range" {
                        return Err(perr(ln, ws[2].0, "expected `range`"));
                    }
                    let lo: f64 = ws[3].1.parse().map_err(|_| perr(ln, ws[3].0, "expected a number"))?;
                    let hi: f64 = ws[4].1.parse().map_err(|_| perr(ln, ws[4].0, "expected a number"))?;
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(perr(ln, ws[3].0, "range must satisfy lo < hi"));
                    }
                    p.range = Some((lo, hi));
                }
                params.push(p);
            }
            "state" | "input" => {
                if ws.len() < 2 {
                    return Err(perr(ln, kcol, format!("expected `{kw} <name>+`")));
                }
                for &(c, w) in &ws[1..] {
                    let s = check_identifier(w, ln, c)?;
                    if kw == "state" {
                        states.push((s, ln, c));
                    } else {
                        inputs.push(s);
                    }
                }
            }
            "domain" => {
                let rest_off = line.find("domain").unwrap() + "domain".len();
                let rest = &line[rest_off..];
                let Some(ne) = rest.rfind("!=") else {
                    return Err(perr(ln, kcol, "expected `domain <expr> != 0`"));
                };
                let tail = rest[ne + 2..].trim();
                if tail != "0" {
                    return Err(perr(ln, col_of(line, rest_off + ne + 2), "expected `!= 0`"));
                }
                let e = parse_expr_at(&rest[..ne], ln, col_of(line, rest_off))?;
                domain.push(e);
            }
            "dot" => {
                if ws.len() < 2 {
                    return Err(perr(ln, kcol, "expected `dot <state> = <expr>`"));
                }
                let (scol, sname) = ws[1];
                let sym = check_identifier(sname, ln, scol)?;
                let after_name = line.find("dot").unwrap() + 3;
                let name_off = after_name + line[after_name..].find(sname).unwrap() + sname.len();
                let rest = &line[name_off..];
                let Some(eq) = rest.find('=') else {
                    return Err(perr(ln, col_of(line, name_off), "expected `=`"));
                };
                if !rest[..eq].trim().is_empty() {
                    return Err(perr(ln, col_of(line, name_off), "expected `=` after the state name"));
                }
                let e = parse_expr_at(&rest[eq + 1..], ln, col_of(line, name_off + eq + 1))?;
                if dots.insert(sym.clone(), (e, ln, scol)).is_some() {
                    return Err(perr(ln, scol, format!("duplicate equation for `{sym}`")));
                }
            }
            other => return Err(perr(ln, kcol, format!("unknown declaration `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| perr(1, 1, "missing `system <name>` line"))?;
    if let Some((s, (_, ln, c))) = dots.iter().find(|(s, _)| !states.iter().any(|x| &x.0 == *s)) {
        return Err(perr(*ln, *c, format!("`{s}` is not a declared state")));
    }
    let mut rhs = Vec::with_capacity(states.len());
    for (s, ln, c) in &states {
        match dots.remove(s) {
            Some((e, _, _)) => rhs.push(e),
            None => return Err(perr(*ln, *c, format!("no `dot {s} = ...` equation"))),
        }
    }
    let m = SystemModel {
        name,
        params,
        states: states.into_iter().map(|(s, _, _)| s).collect(),
        inputs,
        rhs,
        domain,
        provenance,
    };
    m.check_structure()?;
    Ok(m)
}

/// Parses and validates a system, including the generic input rank.
pub fn parse_system(text: &str) -> Result<SystemModel> {
    parse_system_with(text, &Numerics::default())
}

pub fn parse_system_with(text: &str, num: &Numerics) -> Result<SystemModel> {
    let m = parse_system_structure(text)?;
    m.validate(num)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ACADEMIC1: &str = "system academic1\nstate x1 x2 x3\ninput u1 u2\ndomain u2 != 0\n\
        dot x1 = u1\ndot x2 = u2\ndot x3 = sin(u1/u2)\n";

    #[test]
    fn parses_academic_example() {
        let m = parse_system(ACADEMIC1).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.domain.len(), 1);
        assert_eq!(m.rhs[2].to_string(), "sin(u1/u2)");
    }

    #[test]
    fn rank_deficiency_is_rejected() {
        let t = "system bad\nstate x1 x2\ninput u1 u2\ndot x1 = u1\ndot x2 = u1\n";
        assert!(matches!(parse_system(t), Err(Error::Validation(_))));
    }

    #[test]
    fn errors_point_at_the_problem() {
        let t = "system s\nstate x\ninput u\ndot x = u +* 2\n";
        match parse_system(t) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (4, 12)),
            other => panic!("{other:?}"),
        }
        let t = "system s\nstate x\ninput u\ndot y = u\n";
        assert!(matches!(parse_system(t), Err(Error::Parse { line: 4, .. })));
        let t = "system s\nstate x sin\ninput u\n";
        assert!(matches!(parse_system(t), Err(Error::Parse { line: 2, column: 9, .. })));
        let t = "system s\nstate x\ninput u\ndot x = u + w\n";
        assert!(matches!(parse_system(t), Err(Error::Validation(_))));
        let t = "system s\nstate x\ninput u\ndot x = u\ndomain u\n";
        assert!(matches!(parse_system(t), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn comments_and_blank_lines() {
        let t = "# header\nsystem s # name\n\nstate x\ninput u\ndot x = u # trailing\n";
        assert_eq!(parse_system(t).unwrap().n(), 1);
    }
}
