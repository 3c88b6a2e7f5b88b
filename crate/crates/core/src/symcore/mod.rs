//! Symbolic expressions: construction, differentiation, substitution,
//! simplification, evaluation and sampling-based decisions.

pub mod diff;
pub mod expr;
pub mod linalg;
pub mod parse;
pub mod poly;
pub mod sample;
pub mod simplify;
pub mod tape;

pub use diff::{diff, gradient, jacobian, subs1, substitute};
pub use expr::{add, call, mul, pow, Expr, Func, Kind, Rational, Symbol};
pub use parse::parse_expr;
pub use sample::{are_zero, generic_rank, is_zero, ranks_of_prefixes, Domain, NumConfig, Numerics, DEFAULT_SEED};
pub use simplify::{simplify, simplify_full};
pub use tape::{eval_at, Tape};
