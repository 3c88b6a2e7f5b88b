//! Parsing a system description, printing it back, and what a parse
//! error looks like.

use dynflat::sysdsl::{parse_system, serialize_system};

const CART: &str = "
# planar body with a steered thrust direction
system cart
param k range 0.5 2
state p v th
input a w
domain cos(th) != 0
dot p = v
dot v = k*a*cos(th)
dot th = w
";

fn main() {
    let m = parse_system(CART).unwrap();
    println!("{}: n = {}, m = {}", m.name, m.n(), m.m());
    for (x, f) in m.states.iter().zip(&m.rhs) {
        println!("  d/dt {x} = {f}");
    }
    println!("--- round trip\n{}", serialize_system(&m));

    let bad = "system s\nstate x\ninput u\ndot x = u +* 2\n";
    match parse_system(bad) {
        Ok(_) => unreachable!(),
        Err(e) => println!("--- rejected\n{e}"),
    }
}
