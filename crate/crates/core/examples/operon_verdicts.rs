//! Verdicts for the three-mode operon model, at default and custom rates.

use std::collections::BTreeMap;

use switchctl::criteria::{approx_controllable_sufficient, is_null_controllable};
use switchctl::model::builtin;
use switchctl::{Rational, Scalar, Tolerance};

fn main() {
    let tol = Tolerance::exact();
    let custom: BTreeMap<String, Rational> =
        [("k3", 2), ("k8", 5), ("k11", 3)].into_iter().map(|(k, v)| (k.to_string(), Rational::from_i64(v))).collect();
    for params in [BTreeMap::new(), custom] {
        let sys = builtin("operon", &params).unwrap();
        println!("rates {:?}", sys.rates.iter().map(|r| r.to_string()).collect::<Vec<_>>());
        for (g, mode) in sys.modes.iter().enumerate() {
            let v = is_null_controllable(&sys, g, &tol).unwrap();
            println!("  null-controllable from {mode}: {}", v.answer);
        }
        let suff = approx_controllable_sufficient(&sys, &tol).unwrap();
        let mode = suff.deciding_mode.map(|g| sys.modes[g].as_str()).unwrap_or("-");
        println!("  sufficient condition: {} (largest space in {mode}, dim {})", suff.answer, suff.deciding.dim());
    }
}
