//! Infix expression parser.
//!
//! `^` is right associative and binds tighter than unary minus, so `-x^2`
//! reads as `-(x^2)`. Exponents must fold to rational constants. Decimal
//! literals are converted to exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::expr::{add, call, mul, pow, Expr, Func};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn decimal(text: &str) -> Option<BigRational> {
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    if digits.is_empty() {
        return None;
    }
    let n: BigInt = digits.parse().ok()?;
    let shift = exp - frac_part.len() as i32;
    if shift.unsigned_abs() > 400 {
        return None;
    }
    let ten = BigInt::from(10);
    let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
    Some(if shift >= 0 {
        BigRational::from_integer(n * scale)
    } else {
        BigRational::new(n, scale)
    })
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, col });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = decimal(&text).ok_or_else(|| err(line, col, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(value), col });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
            continue;
        }
        return Err(err(line, col, format!("unexpected character `{c}`")));
    }
    out.push(Token {
        tok: Tok::End,
        col: col0 + chars.len(),
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 200;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn col(&self) -> usize {
        self.toks[self.pos].col
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(err(self.line, self.col(), format!("expected {what}")))
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(err(self.line, self.col(), "expression nested too deeply"));
        }
        Ok(())
    }

    /// Binary operators: `+ -` bind at 1, `* /` at 2.
    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        self.enter()?;
        let mut lhs = self.unary()?;
        loop {
            let (bp, op) = match self.peek() {
                Tok::Plus => (1, Tok::Plus),
                Tok::Minus => (1, Tok::Minus),
                Tok::Star => (2, Tok::Star),
                Tok::Slash => (2, Tok::Slash),
                _ => break,
            };
            if bp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(bp + 1)?;
            lhs = match op {
                Tok::Plus => add(vec![lhs, rhs]),
                Tok::Minus => add(vec![lhs, rhs.neg()]),
                Tok::Star => mul(vec![lhs, rhs]),
                _ => mul(vec![lhs, rhs.recip()]),
            };
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                self.enter()?;
                let e = self.unary()?;
                self.depth -= 1;
                Ok(e.neg())
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let col = self.col();
            self.enter()?;
            let e = self.unary()?;
            self.depth -= 1;
            let Some(r) = e.as_num() else {
                return Err(err(self.line, col, "exponent must be a rational constant"));
            };
            if base.is_zero_literal() && !num_traits::Signed::is_positive(r) {
                return Err(err(self.line, col, "zero raised to a non-positive power"));
            }
            return Ok(pow(base, r.clone()));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let col = self.col();
        match self.bump() {
            Tok::Num(r) => Ok(Expr::rational(r)),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let arg = self.expr(0)?;
                    self.expect(Tok::RParen, "`)` after function argument")?;
                    if name == "sqrt" {
                        return Ok(pow(arg, BigRational::new(BigInt::one(), BigInt::from(2))));
                    }
                    let f = Func::from_name(&name)
                        .ok_or_else(|| err(self.line, col, format!("unknown function `{name}`")))?;
                    if f == Func::Ln && arg.as_num().is_some_and(|c| c <= &BigRational::zero()) {
                        return Err(err(self.line, col, "logarithm of a non-positive constant"));
                    }
                    return Ok(call(f, arg));
                }
                if Func::from_name(&name).is_some() || name == "sqrt" {
                    return Err(err(self.line, col, format!("function `{name}` used without arguments")));
                }
                Ok(Expr::sym(&name))
            }
            Tok::End => Err(err(self.line, col, "unexpected end of expression")),
            t => Err(err(self.line, col, format!("unexpected token {}", describe(&t)))),
        }
    }
}

fn describe(t: &Tok) -> &'static str {
    match t {
        Tok::Num(_) => "number",
        Tok::Ident(_) => "identifier",
        Tok::Plus => "`+`",
        Tok::Minus => "`-`",
        Tok::Star => "`*`",
        Tok::Slash => "`/`",
        Tok::Caret => "`^`",
        Tok::LParen => "`(`",
        Tok::RParen => "`)`",
        Tok::Comma => "`,`",
        Tok::End => "end of input",
    }
}

/// Parses a comma separated list of expressions located at `line`, with
/// columns counted from `col0` (1-based).
pub fn parse_expr_list_at(src: &str, line: usize, col0: usize) -> Result<Vec<Expr>> {
    let toks = lex(src, line, col0)?;
    let mut p = Parser {
        toks,
        pos: 0,
        line,
        depth: 0,
    };
    let mut out = vec![p.expr(0)?];
    while *p.peek() == Tok::Comma {
        p.bump();
        out.push(p.expr(0)?);
    }
    if *p.peek() != Tok::End {
        return Err(err(line, p.col(), format!("unexpected {}", describe(p.peek()))));
    }
    Ok(out)
}

/// Parses a single expression located at `line`, column `col0`.
pub fn parse_expr_at(src: &str, line: usize, col0: usize) -> Result<Expr> {
    let mut v = parse_expr_list_at(src, line, col0)?;
    if v.len() != 1 {
        return Err(err(line, col0, "expected a single expression"));
    }
    Ok(v.pop().unwrap())
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    parse_expr_at(src, 1, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        assert_eq!(parse_expr("-x^2").unwrap(), Expr::sym("x").powi(2).neg());
        assert_eq!(parse_expr("2^3^2").unwrap(), Expr::int(512));
        assert_eq!(parse_expr("a - b - c").unwrap(), parse_expr("a - (b + c)").unwrap());
        assert_eq!(parse_expr("a/b/c").unwrap(), parse_expr("a/(b*c)").unwrap());
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_expr("0.25").unwrap(), Expr::frac(1, 4));
        assert_eq!(parse_expr("1.5e-1").unwrap(), Expr::frac(3, 20));
    }

    #[test]
    fn aliases_and_sqrt() {
        assert_eq!(parse_expr("arcsin(x)").unwrap(), parse_expr("asin(x)").unwrap());
        assert_eq!(parse_expr("sqrt(4)").unwrap(), Expr::int(2));
    }

    #[test]
    fn errors_carry_columns() {
        match parse_expr("x + * y") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(parse_expr("x^y").is_err());
        assert!(parse_expr("sin x").is_err());
        assert!(parse_expr("(x").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr("x $ y").is_err());
    }

    #[test]
    fn printed_forms_reparse() {
        for s in [
            "x - epsilon*sin(theta)",
            "(v_x - sin(theta)*v_z)/cos(theta) + epsilon*cos(theta)*omega",
            "asin((u1 + u2)/x2) - x4",
            "x^(3/2) + sqrt(y) - 1/(x*y)",
            "-3*x/4 + 2^(1/3)",
            "exp(-x)*ln(y)",
        ] {
            let e = parse_expr(s).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e, "{s} -> {e}");
        }
    }
}
