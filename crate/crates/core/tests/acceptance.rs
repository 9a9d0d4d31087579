//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exits with status 1 if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use switchctl::bsde::{residual, solve_cascade, TreeGrid};
use switchctl::criteria::{
    approx_controllable_sufficient, criterion_mode_independent, criterion_no_noise, is_null_controllable,
    null_verdict, v_chain,
};
use switchctl::mcsim::{duality_check, ks_first_jump, moment_check, CascadeTarget, ControlSpec, SimConfig};
use switchctl::model::{builtin, ModeTrajectory};
use switchctl::witness::build_witness;
use switchctl::{Matrix, Rational, Scalar, Subspace, SwitchSystem, Tolerance};

use common::{q, rng, ModeTable, Shape};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn example1() -> SwitchSystem<Rational> {
    builtin("example1", &BTreeMap::new()).unwrap()
}

fn e(n: usize, i: usize) -> Vec<Rational> {
    (0..n).map(|j| q((i == j) as i64)).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let tol = Tolerance::exact();
    let sys = example1().with_max_jumps(2);
    let chain = v_chain(&sys, &tol).map_err(|e| e.to_string())?;
    let coord = |idx: &[usize]| Subspace::coordinate(4, idx, &tol);
    ensure(sys.ker_b_star(&tol) == coord(&[2, 3]), || "ker B* is not span{e3, e4}".into())?;
    ensure(chain.get(1, 0) == &coord(&[3]), || format!("V^1_0 = {:?}", chain.get(1, 0).to_json()))?;
    ensure(chain.get(1, 1) == &coord(&[2]), || format!("V^1_1 = {:?}", chain.get(1, 1).to_json()))?;
    ensure(chain.get(0, 0).is_zero() && chain.get(0, 1).is_zero(), || "V^0 is not zero".into())?;
    ensure(null_verdict(&chain, 0).answer && null_verdict(&chain, 1).answer, || "not null-controllable".into())?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("dims {:?}, {took:.2?}", chain.dims()))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let exact = example1();
    let w = build_witness(&exact, &[0, 1], &e(4, 2), &Tolerance::exact()).map_err(|e| e.to_string())?.to_f64();
    let sys = exact.to_f64();
    let mut r = rng(2024);
    let mut rand_vec = |k: usize| (0..k).map(|_| r.random_range(-2.0..=2.0)).collect::<Vec<f64>>();
    let controls = vec![
        ControlSpec::Constant(vec![1.0, -1.0]),
        ControlSpec::Constant(vec![0.5, 2.0]),
        ControlSpec::Schedule((0..4).map(|_| rand_vec(2)).collect()),
        ControlSpec::Feedback((0..2).map(|_| Matrix::new(2, 4, rand_vec(8))).collect()),
        ControlSpec::Schedule((0..10).map(|k| vec![(k as f64).sin(), (k as f64).cos()]).collect()),
    ];
    let cfg = SimConfig::new(100_000, 7);
    let mut worst: f64 = 0.0;
    for u in &controls {
        let rep = duality_check(&sys, &w, u, &[0.0; 4], &cfg).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("{u}: mean {} stderr {}", rep.difference.mean, rep.difference.stderr))?;
        ensure(rep.distance_pass, || {
            format!("{u}: distance {:?} vs |xi|^2 {:?}", rep.distance, rep.xi_norm)
        })?;
        worst = worst.max(rep.difference.mean.abs() / rep.difference.stderr.max(f64::MIN_POSITIVE));
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("5 controls, worst |mean|/stderr {worst:.2}, {took:.2?}"))
}

fn criterion_3() -> Outcome {
    let tol = Tolerance::exact();
    let mut r = rng(33);
    let mut slowest = Duration::ZERO;
    for _ in 0..5 {
        let params: BTreeMap<String, Rational> = ["k3", "km3", "k4", "k5", "k8", "k9", "k11"]
            .iter()
            .map(|k| (k.to_string(), Rational::ratio(r.random_range(1..=9), r.random_range(1..=4))))
            .collect();
        for m in [2, 3] {
            let start = Instant::now();
            let sys = builtin("operon", &params).map_err(|e| e.to_string())?.with_max_jumps(m);
            let null = is_null_controllable(&sys, 0, &tol).map_err(|e| e.to_string())?;
            ensure(null.answer, || format!("not null-controllable from e1 with M = {m}, {params:?}"))?;
            let suff = approx_controllable_sufficient(&sys, &tol).map_err(|e| e.to_string())?;
            ensure(!suff.answer, || "sufficient condition holds".into())?;
            ensure(suff.deciding_mode == Some(2), || format!("deciding mode {:?}", suff.deciding_mode))?;
            ensure(suff.deciding == sys.ker_b_star(&tol), || "deciding space is not ker B*".into())?;
            let took = start.elapsed();
            ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
            slowest = slowest.max(took);
        }
    }
    Ok(format!("5 rate sets, M = 2 and 3, slowest {slowest:.2?}"))
}

fn criterion_4() -> Outcome {
    let tol = Tolerance::exact();
    let mut r = rng(44);
    let (mut positives, mut agree) = (0, 0);
    for i in 0..200 {
        let shape = Shape { jumps: false, shared_a: true, ..Shape::default() };
        let mut sys = common::random_model(&mut r, shape);
        let k = sys.ker_b_star(&tol).dim();
        sys.max_jumps = k.max(1) + r.random_range(0..=1);
        let g0 = r.random_range(0..sys.mode_count());
        let shortcut = criterion_no_noise(&sys, g0, &tol).map_err(|e| format!("model {i}: {e}"))?;
        let chain = is_null_controllable(&sys, g0, &tol).map_err(|e| e.to_string())?;
        ensure(shortcut.answer == chain.answer, || {
            format!("no-noise model {i} disagrees: {}", serde_json::to_string(&switchctl::model::to_json(&sys)).unwrap())
        })?;
        positives += chain.answer as usize;
        agree += 1;
    }
    let mut mi_pos = 0;
    for i in 0..200 {
        let sys = common::random_mode_independent(&mut r, 4);
        let shortcut = criterion_mode_independent(&sys, &tol).map_err(|e| format!("model {i}: {e}"))?;
        for g0 in 0..sys.mode_count() {
            let chain = is_null_controllable(&sys, g0, &tol).map_err(|e| e.to_string())?;
            ensure(shortcut.answer == chain.answer, || {
                format!(
                    "mode-independent model {i} from {g0} disagrees: {}",
                    serde_json::to_string(&switchctl::model::to_json(&sys)).unwrap()
                )
            })?;
        }
        mi_pos += shortcut.answer as usize;
        agree += 1;
    }
    Ok(format!("{agree}/400 agree ({positives} and {mi_pos} controllable)"))
}

fn criterion_5() -> Outcome {
    let tol = Tolerance::exact();
    let mut r = rng(55);
    let mut checks = 0;
    for i in 0..200 {
        let sys = common::random_model(&mut r, Shape::default());
        let m = sys.max_jumps;
        let short = v_chain(&sys, &tol).map_err(|e| e.to_string())?;
        let long = v_chain(&sys.clone().with_max_jumps(m + 3), &tol).map_err(|e| e.to_string())?;
        for g in 0..sys.mode_count() {
            for n in 0..m {
                let inside = short.get(n + 1, g).contains(short.get(n, g), &tol).map_err(|e| e.to_string())?;
                ensure(inside, || format!("model {i}: V^{n}_{g} not inside V^{}_{g}", n + 1))?;
                checks += 1;
            }
            for n in 0..=m {
                ensure(short.get(n, g) == long.get(n + 3, g), || {
                    format!("model {i}: cap {m} level {n} differs from cap {} level {}", m + 3, n + 3)
                })?;
                checks += 1;
            }
        }
    }
    Ok(format!("200 models, {checks} inclusions and alignments, 0 violations"))
}

/// Least-squares slope of `log r` against `log h`.
fn slope(hs: &[f64], rs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn criterion_6() -> Outcome {
    let mut r = rng(66);
    let mut min_slope = f64::INFINITY;
    for i in 0..20 {
        let sys = common::random_float_model(&mut r, 2);
        let table = ModeTable::random(&mut r, &sys, 0);
        let data = |e: &ModeTrajectory| table.get(&e.modes());
        let steps = [20usize, 40, 80];
        let mut res = Vec::new();
        for &g in &steps {
            let grid = TreeGrid::uniform(1.0, g, sys.max_jumps, 0);
            let sol = solve_cascade(&sys, &data, &grid).map_err(|e| e.to_string())?;
            res.push(residual(&sys, &sol));
        }
        let hs: Vec<f64> = steps.iter().map(|&g| 1.0 / g as f64).collect();
        let s = slope(&hs, &res);
        ensure(s >= 1.9, || format!("model {i}: residuals {res:?}, slope {s:.3}"))?;
        min_slope = min_slope.min(s);
    }
    let exact = example1();
    let w = build_witness(&exact, &[0, 1], &e(4, 2), &Tolerance::exact()).map_err(|e| e.to_string())?.to_f64();
    let sys = exact.to_f64();
    let sol = solve_cascade(&sys, &w, &TreeGrid::uniform(1.0, 40, 2, 0)).map_err(|e| e.to_string())?;
    let wres = residual(&sys, &sol);
    ensure(wres <= 1e-10, || format!("witness residual {wres:e}"))?;
    Ok(format!("20 models, smallest slope {min_slope:.3}, witness residual {wres:.1e}"))
}

fn criterion_7() -> Outcome {
    let mut r = rng(77);
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let sys = common::random_float_model(&mut r, 2);
        let table = ModeTable::random(&mut r, &sys, 0);
        let data = |e: &ModeTrajectory| table.get(&e.modes());
        let grid = TreeGrid::uniform(1.0, 100, sys.max_jumps, 0);
        let sol = solve_cascade(&sys, &data, &grid).map_err(|e| e.to_string())?;
        let x0: Vec<f64> = (0..sys.state_dim).map(|_| r.random_range(-1.0..=1.0)).collect();
        let target = CascadeTarget { data, y0: sol.y0().to_vec(), initial_mode: 0 };
        let cfg = SimConfig { grid_step: 1.0, ..SimConfig::new(100_000, 70 + i) };
        let rep = duality_check(&sys, &target, &ControlSpec::Zero, &x0, &cfg).map_err(|e| e.to_string())?;
        ensure(rep.pass, || {
            format!("model {i}: mean {} stderr {}", rep.difference.mean, rep.difference.stderr)
        })?;
        worst = worst.max(rep.difference.mean.abs() / rep.difference.stderr);
    }
    Ok(format!("10 models, worst |mean|/stderr {worst:.2}"))
}

fn criterion_8() -> Outcome {
    let ex1 = example1().to_f64();
    let operon = builtin("operon", &BTreeMap::new()).unwrap().to_f64();
    let ks = ks_first_jump(&ex1, 0, &SimConfig::new(10_000, 7)).map_err(|e| e.to_string())?;
    ensure(ks.pass, || format!("KS statistic {} above {}", ks.statistic, ks.critical))?;
    let cfg = SimConfig::new(100_000, 7);
    let m1 = moment_check(&ex1, &[1.0, 1.0, 1.0, 1.0], 0, 0.5, &cfg).map_err(|e| e.to_string())?;
    ensure(m1.pass, || format!("example1 moments, worst ratio {}", m1.worst_ratio))?;
    let m2 = moment_check(&operon, &[1.0, 1.0, 1.0], 0, 0.5, &cfg).map_err(|e| e.to_string())?;
    ensure(m2.pass, || format!("operon moments, worst ratio {}", m2.worst_ratio))?;

    let w = build_witness(&example1(), &[0, 1], &e(4, 2), &Tolerance::exact()).map_err(|e| e.to_string())?.to_f64();
    let u = ControlSpec::Schedule(vec![vec![1.0, -0.5], vec![0.0, 2.0], vec![-1.0, 1.0]]);
    let reports: Vec<_> = [1, 2, 8]
        .iter()
        .map(|&threads| {
            let cfg = SimConfig { threads, ..SimConfig::new(20_000, 7) };
            let d = duality_check(&ex1, &w, &u, &[0.3, -0.2, 0.1, 0.5], &cfg).unwrap();
            let m = moment_check(&operon, &[1.0, 0.0, 2.0], 0, 0.7, &cfg).unwrap();
            (serde_json::to_string(&d).unwrap(), serde_json::to_string(&m).unwrap())
        })
        .collect();
    ensure(reports.windows(2).all(|p| p[0] == p[1]), || "reports differ across thread counts".into())?;
    Ok(format!(
        "KS {:.4} < {:.4}, moment ratios {:.2} and {:.2}, identical across 1/2/8 threads",
        ks.statistic, ks.critical, m1.worst_ratio, m2.worst_ratio
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("example 1 chain and verdicts", criterion_1),
        ("example 1 witness duality", criterion_2),
        ("operon verdicts", criterion_3),
        ("special-case shortcuts", criterion_4),
        ("chain monotonicity and cap stability", criterion_5),
        ("cascade residual order", criterion_6),
        ("cascade against Monte-Carlo", criterion_7),
        ("simulator soundness", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS  {detail}  [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL  {why}  [{took:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
