//! Solves the backward cascade on the operon model and shows the residual
//! shrinking with the grid.

use std::collections::BTreeMap;

use switchctl::bsde::{residual, solve_cascade, TreeGrid};
use switchctl::model::{builtin, ModeTrajectory};

fn main() {
    let sys = builtin("operon", &BTreeMap::new()).unwrap().to_f64();
    let xi = |e: &ModeTrajectory| {
        let k = e.jump_count() as f64;
        let last = e.current_mode() as f64;
        Some(vec![1.0, k - last, 0.5 * last])
    };
    for steps in [10, 20, 40, 80] {
        let grid = TreeGrid::uniform(1.0, steps, 2, 0);
        let sol = solve_cascade(&sys, &xi, &grid).unwrap();
        println!(
            "G = {steps:>3}  nodes {:>5}  y0 = {:?}  residual {:.3e}",
            sol.node_count(),
            sol.y0(),
            residual(&sys, &sol)
        );
    }
}
