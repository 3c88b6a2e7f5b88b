use std::fmt::Write;

use super::model::{Provenance, SystemModel};

/// Renders a model in the system description format.
pub fn serialize_system(m: &SystemModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "system {}", m.name);
    if let Provenance::Derived(k) = m.provenance {
        let _ = writeln!(s, "provenance derived {k}");
    }
    for p in &m.params {
        match p.range {
            Some((lo, hi)) => {
                let _ = writeln!(s, "param {} range {lo:?} {hi:?}", p.name);
            }
            None => {
                let _ = writeln!(s, "param {}", p.name);
            }
        }
    }
    let names = |v: &[crate::symcore::Symbol]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let _ = writeln!(s, "state {}", names(&m.states));
    let _ = writeln!(s, "input {}", names(&m.inputs));
    for c in &m.domain {
        let _ = writeln!(s, "domain {c} != 0");
    }
    for (x, f) in m.states.iter().zip(&m.rhs) {
        let _ = writeln!(s, "dot {x} = {f}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysdsl::parser::parse_system_structure;

    #[test]
    fn round_trip_keeps_ranges() {
        let t = "system v\nparam epsilon range 0.1 1\nstate x theta\ninput u1 u2\n\
                 dot x = epsilon*cos(theta)*u2 - sin(theta)*u1\ndot theta = u2\n";
        let m = parse_system_structure(t).unwrap();
        let back = parse_system_structure(&serialize_system(&m)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.params[0].range, Some((0.1, 1.0)));
    }
}
