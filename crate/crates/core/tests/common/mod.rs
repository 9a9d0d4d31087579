//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchctl::{Matrix, Rational, Scalar, SwitchSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn q(v: i64) -> Rational {
    Rational::from_i64(v)
}

/// Small integer, zero with probability about `zero`.
pub fn small(rng: &mut ChaCha8Rng, zero: f64) -> i64 {
    if rng.random::<f64>() < zero {
        0
    } else {
        let v = rng.random_range(1..=2);
        if rng.random() { v } else { -v }
    }
}

pub fn int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, zero: f64) -> Matrix<Rational> {
    let data: Vec<i64> = (0..rows * cols).map(|_| small(rng, zero)).collect();
    Matrix::from_i64(rows, cols, &data)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_n: usize,
    pub max_p: usize,
    pub max_m: usize,
    pub jumps: bool,
    pub shared_a: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Self { max_n: 5, max_p: 3, max_m: 3, jumps: true, shared_a: false }
    }
}

/// Row-stochastic transition with zero diagonal and small integer weights.
fn transition(rng: &mut ChaCha8Rng, p: usize) -> Matrix<Rational> {
    let mut t = Matrix::zeros(p, p);
    if p == 1 {
        return t;
    }
    for g in 0..p {
        let mut w: Vec<i64> = (0..p).map(|k| if k == g { 0 } else { rng.random_range(0..=3) }).collect();
        if w.iter().sum::<i64>() == 0 {
            w[(g + 1) % p] = 1;
        }
        let total: i64 = w.iter().sum();
        for k in 0..p {
            t[(g, k)] = Rational::ratio(w[k], total);
        }
    }
    t
}

pub fn random_model(rng: &mut ChaCha8Rng, shape: Shape) -> SwitchSystem<Rational> {
    let n = rng.random_range(1..=shape.max_n);
    let p = rng.random_range(1..=shape.max_p);
    let m = rng.random_range(1..=n);
    let transition = transition(rng, p);
    let rates: Vec<Rational> = (0..p)
        .map(|_| if p == 1 || rng.random::<f64>() < 0.1 { q(0) } else { q(rng.random_range(1..=3)) })
        .collect();
    let a0 = int_matrix(rng, n, n, 0.5);
    let a = (0..p).map(|_| if shape.shared_a { a0.clone() } else { int_matrix(rng, n, n, 0.5) }).collect();
    let mut c = vec![vec![Matrix::zeros(n, n); p]; p];
    if shape.jumps {
        for g in 0..p {
            for t in 0..p {
                if rates[g].is_positive() && transition[(g, t)].is_positive() {
                    c[g][t] = int_matrix(rng, n, n, 0.7);
                }
            }
        }
    }
    let sys = SwitchSystem {
        name: "random".into(),
        state_dim: n,
        control_dim: m,
        modes: (0..p).map(|g| format!("m{g}")).collect(),
        rates,
        transition,
        a,
        b: int_matrix(rng, n, m, 0.4),
        c,
        max_jumps: rng.random_range(1..=shape.max_m),
        horizon: q(1),
    };
    sys.validated().expect("generated model is valid")
}

/// Mode-independent model: shared `A` and rate, and jumps `g -> g+k mod p`
/// with weight `w_k` and matrix `C_k` for every `g`.
pub fn random_mode_independent(rng: &mut ChaCha8Rng, max_n: usize) -> SwitchSystem<Rational> {
    let n = rng.random_range(1..=max_n);
    let p = rng.random_range(2..=3);
    let m = rng.random_range(1..=n);
    let mut w: Vec<i64> = (0..p).map(|k| if k == 0 { 0 } else { rng.random_range(0..=2) }).collect();
    if w.iter().sum::<i64>() == 0 {
        w[1] = 1;
    }
    let total: i64 = w.iter().sum();
    let cs: Vec<Matrix<Rational>> = (0..p).map(|_| int_matrix(rng, n, n, 0.6)).collect();
    let mut transition = Matrix::zeros(p, p);
    let mut c = vec![vec![Matrix::zeros(n, n); p]; p];
    for g in 0..p {
        for k in 1..p {
            let t = (g + k) % p;
            transition[(g, t)] = Rational::ratio(w[k], total);
            if w[k] > 0 {
                c[g][t] = cs[k].clone();
            }
        }
    }
    let rate = q(rng.random_range(1..=3));
    let a = int_matrix(rng, n, n, 0.5);
    let sys = SwitchSystem {
        name: "poisson".into(),
        state_dim: n,
        control_dim: m,
        modes: (0..p).map(|g| format!("m{g}")).collect(),
        rates: vec![rate; p],
        transition,
        a: vec![a; p],
        b: int_matrix(rng, n, m, 0.4),
        c,
        max_jumps: n + 1,
        horizon: q(1),
    };
    sys.validated().expect("generated model is valid")
}

/// Float model for the cascade and simulator checks: entries in
/// `[-1, 1]`, rates in `[0.5, 2]`, every mode jumping.
pub fn random_float_model(rng: &mut ChaCha8Rng, max_m: usize) -> SwitchSystem<f64> {
    let n = rng.random_range(1..=3);
    let p = rng.random_range(2..=3);
    let mut unif = |rng: &mut ChaCha8Rng| rng.random_range(-1.0..=1.0);
    let mat = |rng: &mut ChaCha8Rng, r: usize, c: usize, unif: &mut dyn FnMut(&mut ChaCha8Rng) -> f64| {
        Matrix::new(r, c, (0..r * c).map(|_| unif(rng)).collect())
    };
    let exact = transition(rng, p).to_f64();
    let mut c = vec![vec![Matrix::zeros(n, n); p]; p];
    for g in 0..p {
        for t in 0..p {
            if exact[(g, t)] > 0.0 {
                c[g][t] = mat(rng, n, n, &mut unif).scale(&0.5);
            }
        }
    }
    SwitchSystem {
        name: "random-float".into(),
        state_dim: n,
        control_dim: 1,
        modes: (0..p).map(|g| format!("m{g}")).collect(),
        rates: (0..p).map(|_| rng.random_range(0.5..=2.0)).collect(),
        transition: exact,
        a: (0..p).map(|_| mat(rng, n, n, &mut unif)).collect(),
        b: mat(rng, n, 1, &mut unif),
        c,
        max_jumps: rng.random_range(1..=max_m),
        horizon: 1.0,
    }
}

/// Final data depending only on the mode sequence, drawn once per sequence.
pub struct ModeTable {
    pub dim: usize,
    pub values: std::collections::HashMap<Vec<usize>, Vec<f64>>,
}

impl ModeTable {
    pub fn random(rng: &mut ChaCha8Rng, sys: &SwitchSystem<f64>, g0: usize) -> Self {
        let mut values = std::collections::HashMap::new();
        let mut frontier = vec![vec![g0]];
        for _ in 0..=sys.max_jumps {
            let mut next = Vec::new();
            for seq in frontier {
                let v: Vec<f64> = (0..sys.state_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
                values.insert(seq.clone(), v);
                for t in sys.active_targets(*seq.last().unwrap()) {
                    let mut s = seq.clone();
                    s.push(t);
                    next.push(s);
                }
            }
            frontier = next;
        }
        Self { dim: sys.state_dim, values }
    }

    pub fn get(&self, modes: &[usize]) -> Option<Vec<f64>> {
        self.values.get(modes).cloned()
    }
}
