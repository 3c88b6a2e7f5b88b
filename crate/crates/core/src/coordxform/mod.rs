//! Coordinate and input transformations: first-integral search,
//! straightening, prolongation and decomposition.

pub mod ansatz;
pub mod invert;
pub mod names;
pub mod ops;
pub mod step;

pub use ansatz::{AnsatzLibrary, IntegralSearch};
pub use invert::{isolate, solve_system};
pub use names::{bar, inc, inc_n};
pub use ops::{decompose, prolong, single_input_reduce, straighten_line, Decomposition, Straightened};
pub use step::{Binding, Split, StepKind, TransformStep};
