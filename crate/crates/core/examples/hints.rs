//! A first integral outside the built-in ansatz: the run is inconclusive
//! until a hint supplies it.

use dynflat::flatalgo::{run, RunConfig, Verdict};
use dynflat::symcore::Numerics;
use dynflat::sysdsl::{parse_hints, parse_system};

fn show(v: &Verdict) {
    match v {
        Verdict::Flat { d, output, .. } => {
            let y: Vec<String> = output.iter().map(|e| e.to_string()).collect();
            println!("flat, d = {d}, y = ({})", y.join(", "));
        }
        Verdict::Inconclusive { reason } => println!("inconclusive: {reason}"),
        Verdict::NotLinearizable { reason, .. } => println!("not linearizable: {reason}"),
    }
}

fn main() {
    let m = parse_system(include_str!("systems/exp_chart.sys")).unwrap();
    let num = Numerics::default();
    let mut cfg = RunConfig::for_model(&m);
    show(&run(&m, &cfg, &num).0);

    cfg.hints = parse_hints(include_str!("systems/exp_chart.hints")).unwrap();
    show(&run(&m, &cfg, &num).0);
}
