//! Prints the subspace chain of the four-state, two-mode example.

use std::collections::BTreeMap;

use switchctl::criteria::{null_verdict, v_chain};
use switchctl::model::builtin;
use switchctl::Tolerance;

fn main() {
    let tol = Tolerance::exact();
    let sys = builtin("example1", &BTreeMap::new()).unwrap().with_max_jumps(2);
    println!("ker B* = {}", sys.ker_b_star(&tol).to_json());
    let chain = v_chain(&sys, &tol).unwrap();
    for n in 0..=sys.max_jumps {
        for (g, mode) in sys.modes.iter().enumerate() {
            println!("V^{n} in mode {mode}: {}", chain.get(n, g).to_json());
        }
    }
    for (g, mode) in sys.modes.iter().enumerate() {
        println!("null-controllable from {mode}: {}", null_verdict(&chain, g).answer);
    }
}
