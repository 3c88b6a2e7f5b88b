//! Straightening the input distribution of the VTOL model. The first
//! integral found becomes a new state, and the upper subsystem takes the
//! remaining states as inputs.

use dynflat::coordxform::decompose;
use dynflat::symcore::Numerics;
use dynflat::sysdsl::parse_system;

fn main() {
    let m = parse_system(include_str!("systems/vtol.sys")).unwrap();
    let num = Numerics::default();
    let d = decompose(&m, &[], &num).unwrap();
    for (s, e) in d.step.forward_map() {
        println!("{s} = {e}");
    }
    println!("upper subsystem, inputs {:?}", d.model.inputs.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for (x, f) in d.model.states.iter().zip(&d.model.rhs) {
        println!("  d/dt {x} = {f}");
    }
    println!("invertible: {}", d.step.check_inverse(&m, &d.model, &num).unwrap());
}
