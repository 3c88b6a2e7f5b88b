//! Input-affine and partially input-affine representations.

use dynflat::reptest::{ai_test, pai_condition_solutions, pai_filter, to_pai_form};
use dynflat::symcore::Numerics;
use dynflat::sysdsl::parse_system;

fn main() {
    let num = Numerics::default();
    for src in [include_str!("systems/vtol.sys"), include_str!("systems/academic1.sys")] {
        let m = parse_system(src).unwrap();
        let ai = ai_test(&m, &num).unwrap();
        println!("{}: affine in some input coordinates: {ai}", m.name);
        if ai {
            continue;
        }
        for s in pai_condition_solutions(&m, &num).unwrap() {
            let keep = pai_filter(&m, &s.alpha, &num).unwrap();
            println!("  alpha = ({}, {})  filter: {keep}", s.alpha[0], s.alpha[1]);
            if !keep {
                continue;
            }
            let pai = to_pai_form(&m, &s.alpha, &[], &num).unwrap();
            println!("  affine in {}, prolong {}", pai.affine, pai.nonaffine);
            for (x, f) in pai.model.states.iter().zip(&pai.model.rhs) {
                println!("    d/dt {x} = {f}");
            }
        }
    }
}
