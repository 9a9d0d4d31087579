//! Compares simulated first moments with the master equation.

use std::collections::BTreeMap;

use switchctl::mcsim::{ks_first_jump, moment_check, SimConfig};
use switchctl::model::builtin;

fn main() {
    let cfg = SimConfig::new(50_000, 7);
    for (name, x0) in [("example1", vec![1.0; 4]), ("operon", vec![1.0; 3])] {
        let sys = builtin(name, &BTreeMap::new()).unwrap().to_f64();
        let m = moment_check(&sys, &x0, 0, 0.5, &cfg).unwrap();
        println!("{name}: worst |mc - master| / se = {:.2}, pass {}", m.worst_ratio, m.pass);
        for (mc, ode) in m.monte_carlo.iter().zip(&m.master).take(6) {
            println!("  {:+.5} +- {:.5}   master {:+.5}", mc.mean, mc.stderr, ode);
        }
        let ks = ks_first_jump(&sys, 0, &cfg).unwrap();
        println!("  first-jump KS {:.4} (critical {:.4})", ks.statistic, ks.critical);
    }
}
