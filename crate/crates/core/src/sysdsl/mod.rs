//! The system description format and hint files.

pub mod hints;
pub mod model;
pub mod parser;
pub mod serialize;

pub use hints::{parse_hints, serialize_hints, HintSet};
pub use model::{Param, Provenance, SystemModel, DEFAULT_PARAM_RANGE};
pub use parser::{parse_system, parse_system_structure, parse_system_with};
pub use serialize::serialize_system;
