//! Vector fields of a system, their brackets, and the derived flag of the
//! input distribution on the extended state `(x, u)`.

use dynflat::diffgeo::{cauchy_characteristic, derived_flag, involutive_closure, lie_bracket, Distribution};
use dynflat::reptest::system_fields;
use dynflat::symcore::Numerics;
use dynflat::sysdsl::parse_system;

fn main() {
    let m = parse_system(include_str!("systems/academic1.sys")).unwrap();
    let num = Numerics::default();
    let dom = m.sampling_domain();
    let sf = system_fields(&m);

    println!("drift    {:?}", sf.drift.comps().iter().map(|e| e.to_string()).collect::<Vec<_>>());
    for (u, g) in m.inputs.iter().zip(&sf.inputs) {
        let b = lie_bracket(&sf.drift, g);
        println!("[f, d/d{u}] {:?}", b.comps().iter().map(|e| e.to_string()).collect::<Vec<_>>());
    }

    let mut gens = sf.inputs.clone();
    gens.extend(sf.inputs.iter().map(|g| lie_bracket(&sf.drift, g)));
    let d1 = Distribution::new(&sf.coords, gens);
    let flag = derived_flag(&d1, 4, &dom, &num).unwrap();
    let ranks: Vec<usize> = flag.iter().map(|d| d.rank(&dom, &num).unwrap()).collect();
    println!("derived flag ranks {ranks:?}");
    println!("closure rank {}", involutive_closure(&d1, &dom, &num).unwrap().rank(&dom, &num).unwrap());
    println!("Cauchy characteristic rank {}", cauchy_characteristic(&d1, &dom, &num).unwrap().rank(&dom, &num).unwrap());
}
