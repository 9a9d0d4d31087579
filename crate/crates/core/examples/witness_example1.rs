//! Builds the dual witness started at e3 after one jump and evaluates it on
//! a few mode paths.

use std::collections::BTreeMap;

use switchctl::model::{builtin, ModeTrajectory};
use switchctl::witness::build_witness;
use switchctl::{Rational, Scalar, Tolerance};

fn main() {
    let sys = builtin("example1", &BTreeMap::new()).unwrap();
    let e3: Vec<Rational> = [0, 0, 1, 0].into_iter().map(Rational::from_i64).collect();
    let w = build_witness(&sys, &[0, 1], &e3, &Tolerance::exact()).unwrap();
    println!("feedback identity residual {}", w.family.identity_residual);
    let w = w.to_f64();
    let paths = [
        ModeTrajectory::from_jumps(1.0, 0, &[]).unwrap(),
        ModeTrajectory::from_jumps(1.0, 0, &[(0.3, 1)]).unwrap(),
        ModeTrajectory::from_jumps(1.0, 0, &[(0.3, 1), (0.8, 0)]).unwrap(),
    ];
    for path in &paths {
        println!("modes {:?} jumps {:?}", path.modes(), path.jump_times());
        for t in [0.0, 0.25, 0.5, 1.0] {
            println!("  y({t}) = {:?}", w.y_at(path, t));
        }
        println!("  xi = {:?}", w.xi(path));
    }
}
