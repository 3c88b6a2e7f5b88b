//! Checks a candidate flat output numerically.
//!
//!     cargo run --example verify_output -- "x - epsilon*sin(theta), z + epsilon*cos(theta)"

use dynflat::symcore::{parse_expr, Numerics};
use dynflat::sysdsl::parse_system;
use dynflat::flatalgo::verify_flat_output;

fn main() {
    let m = parse_system(include_str!("systems/vtol.sys")).unwrap();
    let arg = std::env::args().nth(1).unwrap_or_else(|| "x - epsilon*sin(theta), z + epsilon*cos(theta)".into());
    let y: Vec<_> = arg.split(',').map(|s| parse_expr(s.trim()).unwrap()).collect();
    let rep = verify_flat_output(&m, &y, m.n() + 4, &Numerics::default()).unwrap();
    println!("verified: {}", rep.verified);
    if let (Some(r), Some(d)) = (&rep.r, rep.d) {
        println!("R = {r:?}, d = {d}");
    }
    println!("{}", rep.message);
}
