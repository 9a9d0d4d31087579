//! Checks that the Example 1 witness is orthogonal to reachable states under
//! several controls, by Monte-Carlo.

use std::collections::BTreeMap;

use switchctl::matrix::Matrix;
use switchctl::mcsim::{duality_check, ControlSpec, SimConfig};
use switchctl::model::builtin;
use switchctl::witness::build_witness;
use switchctl::{Rational, Scalar, Tolerance};

fn main() {
    let exact = builtin("example1", &BTreeMap::new()).unwrap();
    let e3: Vec<Rational> = [0, 0, 1, 0].into_iter().map(Rational::from_i64).collect();
    let w = build_witness(&exact, &[0, 1], &e3, &Tolerance::exact()).unwrap().to_f64();
    let sys = exact.to_f64();
    let controls = [
        ControlSpec::Zero,
        "const:1,-1".parse().unwrap(),
        "sched:1,0;0,1;-1,2".parse().unwrap(),
        ControlSpec::Feedback(vec![Matrix::new(2, 4, vec![0.5; 8]), Matrix::new(2, 4, vec![-0.5; 8])]),
    ];
    let cfg = SimConfig::new(20_000, 7);
    // The witness starts after the first jump, so y0 = 0 and the pairing
    // must vanish from any starting point.
    let x0 = [1.0, -1.0, 0.5, 0.0];
    for u in &controls {
        let r = duality_check(&sys, &w, u, &x0, &cfg).unwrap();
        let label: String = u.to_string().chars().take(24).collect();
        println!("{label:<24} E<X_T, xi> = {:+.5} +- {:.5}  pass {}", r.difference.mean, r.difference.stderr, r.pass);
    }
}
