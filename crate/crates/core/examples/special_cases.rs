//! The no-noise and mode-independent shortcuts against the full chain.

use switchctl::criteria::{criterion_mode_independent, criterion_no_noise, is_null_controllable};
use switchctl::{Matrix, Rational, Scalar, SwitchSystem, Tolerance};

/// Two modes swapping at unit rate, both with the double integrator drift.
fn swap(c: Matrix<Rational>, max_jumps: usize) -> SwitchSystem<Rational> {
    let a = Matrix::from_i64(2, 2, &[0, 1, 0, 0]);
    let zero = Matrix::zeros(2, 2);
    SwitchSystem {
        name: "swap".into(),
        state_dim: 2,
        control_dim: 1,
        modes: vec!["a".into(), "b".into()],
        rates: vec![Rational::from_i64(1); 2],
        transition: Matrix::from_i64(2, 2, &[0, 1, 1, 0]),
        a: vec![a.clone(), a],
        b: Matrix::from_i64(2, 1, &[0, 1]),
        c: vec![vec![zero.clone(), c.clone()], vec![c, zero]],
        max_jumps,
        horizon: Rational::from_i64(1),
    }
}

fn main() {
    let tol = Tolerance::exact();
    let quiet = swap(Matrix::zeros(2, 2), 2);
    let fast = criterion_no_noise(&quiet, 0, &tol).unwrap();
    let full = is_null_controllable(&quiet, 0, &tol).unwrap();
    println!("no jump noise: shortcut {} chain {}", fast.answer, full.answer);

    for c in [[-1, 0, 0, 0], [0, 0, 1, 0], [-1, 0, 0, -1]] {
        let noisy = swap(Matrix::from_i64(2, 2, &c), 3);
        let fast = criterion_mode_independent(&noisy, &tol).unwrap();
        let full = is_null_controllable(&noisy, 0, &tol).unwrap();
        println!("C = {c:?}: shortcut {} chain {}", fast.answer, full.answer);
    }
}
