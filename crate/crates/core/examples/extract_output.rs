//! Linearizing outputs of a static feedback linearizable system, read off
//! the distribution chain.

use dynflat::flatalgo::{extract_linearizing_output, sfl_test, verify_flat_output, DChain};
use dynflat::symcore::Numerics;
use dynflat::sysdsl::parse_system;

fn main() {
    let m = parse_system(include_str!("systems/linear.sys")).unwrap();
    let num = Numerics::default();
    println!("static feedback linearizable: {}", sfl_test(&m, &num).unwrap());
    let chain = DChain::compute(&m, &num).unwrap();
    println!("controllability indices {:?}", chain.indices());
    let y = extract_linearizing_output(&m, &[], &num).unwrap();
    for (i, e) in y.iter().enumerate() {
        println!("y{} = {e}", i + 1);
    }
    let rep = verify_flat_output(&m, &y, m.n() + 4, &num).unwrap();
    println!("R = {:?}", rep.r.unwrap());
}
