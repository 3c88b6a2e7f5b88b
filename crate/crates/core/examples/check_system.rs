//! Runs the full test on a system file and prints the verdict.
//!
//!     cargo run --example check_system -- crates/core/examples/systems/vtol.sys

use dynflat::flatalgo::{run, RunConfig};
use dynflat::symcore::Numerics;
use dynflat::sysdsl::parse_system;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/systems/academic1.sys").into());
    let text = std::fs::read_to_string(&path).expect("readable system file");
    let m = parse_system(&text).expect("valid system");
    let num = Numerics::default();
    let cfg = RunConfig::for_model(&m);
    let t = std::time::Instant::now();
    let (verdict, _trace) = run(&m, &cfg, &num);
    println!("{}", serde_json::to_string_pretty(&verdict).unwrap());
    eprintln!("{:.2?}", t.elapsed());
}
