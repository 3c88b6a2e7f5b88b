//! The JSON report of a run, and pulling a flat output of the last model in
//! the trace back to the original coordinates by hand.

use dynflat::flatalgo::{pull_back, run, RunConfig, RunReport};
use dynflat::symcore::{parse_expr, Numerics};
use dynflat::sysdsl::parse_system;

fn main() {
    let m = parse_system(include_str!("systems/academic1.sys")).unwrap();
    let num = Numerics::default();
    let cfg = RunConfig::for_model(&m);
    let (verdict, trace) = run(&m, &cfg, &num);

    let links = trace.links();
    for l in &links {
        println!("{:?}: {} -> {} states", l.step.kind, l.parent.n(), l.child.n());
    }
    // stop at the prolonged model, where (x3, x1 - x2*u1_bar) is flat
    let k = links.iter().position(|l| l.child.states.iter().any(|s| s.as_str() == "u1_bar")).unwrap();
    let y = [parse_expr("x3").unwrap(), parse_expr("x1 - x2*u1_bar").unwrap()];
    for e in pull_back(&links[..=k], &y).unwrap() {
        println!("pulled back: {e}");
    }

    let report = RunReport::new(&m.name, &cfg, &num, verdict, trace);
    let json = report.to_json();
    println!("{} bytes of JSON, first lines:", json.len());
    for line in json.lines().take(8) {
        println!("{line}");
    }
}
