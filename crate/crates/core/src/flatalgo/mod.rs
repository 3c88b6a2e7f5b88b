//! The decision procedure: case selection and branch exploration down to a
//! static feedback linearizable system, output extraction, pull-back to the
//! original variables, and numeric flatness verification.

pub mod cases;
pub mod extract;
pub mod jets;
pub mod pullback;
pub mod report;
pub mod run;
pub mod sfl;
pub mod verify;

pub use cases::{build_bc, case2_step, case3_step, classify, select_case, CaseTag};
pub use extract::extract_linearizing_output;
pub use jets::JetSpace;
pub use pullback::{pull_back, pull_back_step, Link};
pub use report::{RunReport, SCHEMA_VERSION};
pub use run::{run, Branch, Budget, Failure, FailureKind, RunConfig, TerminalOutput, TraceNode, Verdict};
pub use sfl::{sfl_test, DChain};
pub use verify::{verify_flat_output, VerifyReport};
