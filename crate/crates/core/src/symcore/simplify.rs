use super::diff::rebuild;
use super::expr::Expr;
use super::poly::expand;

/// Best-effort simplification. The constructors already fold constants,
/// collect like terms and collapse `sin^2 + cos^2`; this pass re-runs them
/// bottom-up so trees assembled from raw parts reach the same shape.
pub fn simplify(e: &Expr) -> Expr {
    rebuild(e)
}

/// Like [`simplify`], but also tries full expansion and keeps whichever form
/// is smaller.
pub fn simplify_full(e: &Expr) -> Expr {
    let a = rebuild(e);
    match expand(&a) {
        Some(b) if b.size() < a.size() => b,
        _ => a,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::parse::parse_expr;

    #[test]
    fn guaranteed_rules() {
        let p = |s: &str| parse_expr(s).unwrap();
        assert_eq!(simplify(&p("x*1 + 0")), p("x"));
        assert_eq!(simplify(&p("sin(theta)^2 + cos(theta)^2")), Expr::one());
        assert_eq!(simplify(&p("(u2*u1)/u2")), p("u1"));
        assert_eq!(simplify_full(&p("(x + 1)^2 - x^2 - 2*x")), Expr::one());
    }
}
