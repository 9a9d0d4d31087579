//! The `switchctl` command line.
//!
//! Exit codes: 0 ok, 1 model or usage error, 2 parse error, 3 no witness,
//! 4 statistical check failed. Results go to stdout as JSON, diagnostics to
//! stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::bsde::{residual, solve_cascade, BsdeError, TreeGrid};
use crate::criteria::{
    approx_controllable_sufficient, criterion_mode_independent, criterion_no_noise, null_verdict, v_chain,
    CriteriaError, VChain,
};
use crate::mcsim::{
    duality_check, integrate_state, ks_first_jump, moment_check, sample_mode_path, ControlSpec, McError, RngSpec,
    SimConfig,
};
use crate::model::{builtin, load, ModelError, SwitchSystem};
use crate::scalar::{parse_rational, Rational, Scalar};
use crate::subspace::Tolerance;
use crate::witness::{build_witness_with_chain, default_start_vector, DualWitness, WitnessError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODEL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NO_WITNESS: i32 = 3;
pub const EXIT_STAT_FAIL: i32 = 4;

/// Largest number of prefixes tried when searching for a witness.
const PREFIX_BUDGET: usize = 100_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Sim(#[from] McError),
    #[error(transparent)]
    Cascade(#[from] BsdeError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Model(e) if e.is_parse_error() => EXIT_PARSE,
            CliError::Witness(WitnessError::NoWitness(_)) => EXIT_NO_WITNESS,
            _ => EXIT_MODEL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "switchctl", version, about = "Controllability of switched linear systems with state jumps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Check a model and list its issues.
    Validate {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelOpts,
    },
    /// Invariant-subspace chain and controllability verdicts.
    Analyze {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        #[serde(flatten)]
        numeric: NumericOpts,
    },
    /// Dual witness of a controllability failure.
    Witness {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        #[serde(flatten)]
        numeric: NumericOpts,
        #[command(flatten)]
        #[serde(flatten)]
        target: WitnessOpts,
        /// Sampled trajectories on which the final data is shown.
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Monte-Carlo check of the duality identity for a witness.
    DualityCheck {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        #[serde(flatten)]
        numeric: NumericOpts,
        #[command(flatten)]
        #[serde(flatten)]
        target: WitnessOpts,
        #[command(flatten)]
        #[serde(flatten)]
        sim: SimOpts,
        /// `zero`, `const:u1,..`, `sched:u1,..;v1,..` or `fb:<m>x<n>:k11,..;..`
        /// (one gain per mode). Defaults to the constant control of ones.
        #[arg(long)]
        control: Option<String>,
    },
    /// Sampled paths as JSON lines.
    Simulate {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        #[serde(flatten)]
        sim: SimOpts,
        #[arg(long, default_value = "zero")]
        control: String,
    },
    /// Verdicts, witness and statistical checks in one summary.
    Report {
        #[command(flatten)]
        #[serde(flatten)]
        model: ModelOpts,
        #[command(flatten)]
        #[serde(flatten)]
        numeric: NumericOpts,
        #[command(flatten)]
        #[serde(flatten)]
        sim: SimOpts,
        /// Grid points of the cascade solver used on the witness.
        #[arg(long, default_value_t = 40)]
        grid_points: usize,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct ModelOpts {
    /// Built-in model name (`example1`, `operon`).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub builtin: Option<String>,
    /// Path to a JSON model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Built-in parameters as `k=v,k=v`.
    #[arg(long)]
    pub params: Option<String>,
    /// Initial mode name; defaults to the first mode.
    #[arg(long)]
    pub initial_mode: Option<String>,
    /// Overrides the jump cap.
    #[arg(long)]
    pub max_jumps: Option<usize>,
    /// Overrides the horizon.
    #[arg(long)]
    pub horizon: Option<String>,
    /// Writes the result here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

#[derive(Debug, Args, Serialize)]
pub struct NumericOpts {
    #[arg(long, value_enum, default_value_t = Backend::Exact)]
    pub backend: Backend,
    #[arg(long)]
    pub rank_tol: Option<f64>,
    #[arg(long)]
    pub membership_tol: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct WitnessOpts {
    /// Start level; with no prefix the level-0 prefix is the initial mode.
    #[arg(long)]
    pub level: Option<usize>,
    /// Mode names from the initial mode to the start mode, comma separated.
    #[arg(long)]
    pub prefix: Option<String>,
    /// Start vector, comma separated; defaults to a basis vector.
    #[arg(long)]
    pub vector: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimOpts {
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Worker threads (0 = automatic); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value_t = 0.05)]
    pub grid_step: f64,
    /// Initial state, comma separated; defaults to zero.
    #[arg(long)]
    pub x0: Option<String>,
}

impl SimOpts {
    fn config(&self) -> SimConfig {
        SimConfig { n_paths: self.paths, seed: self.seed, threads: self.threads, grid_step: self.grid_step }
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<Rational>, CliError> {
    s.split(',')
        .map(|x| parse_rational(x).map_err(|e| CliError::Parse(format!("{what}: {e}"))))
        .collect()
}

fn parse_params(s: Option<&str>) -> Result<BTreeMap<String, Rational>, CliError> {
    let mut out = BTreeMap::new();
    for item in s.unwrap_or("").split(',').filter(|x| !x.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("parameter {item:?} is not k=v")))?;
        let v = parse_rational(v).map_err(|e| CliError::Parse(format!("parameter {k}: {e}")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

impl ModelOpts {
    /// Loads, applies overrides and validates.
    pub fn load(&self) -> Result<SwitchSystem<Rational>, CliError> {
        let mut sys = match (&self.builtin, &self.model) {
            (Some(name), None) => builtin(name, &parse_params(self.params.as_deref())?)?,
            (None, Some(path)) => {
                if self.params.is_some() {
                    return Err(CliError::Usage("--params only applies to built-in models".into()));
                }
                load(path)?
            }
            _ => return Err(CliError::Usage("give exactly one of --builtin and --model".into())),
        };
        if let Some(m) = self.max_jumps {
            sys = sys.with_max_jumps(m);
        }
        if let Some(t) = &self.horizon {
            let t = parse_rational(t).map_err(|e| CliError::Parse(format!("horizon: {e}")))?;
            sys = sys.with_horizon(t);
        }
        Ok(sys.validated()?)
    }

    fn initial_mode<S: Scalar>(&self, sys: &SwitchSystem<S>) -> Result<usize, CliError> {
        match &self.initial_mode {
            Some(name) => Ok(sys.mode_index(name)?),
            None => Ok(0),
        }
    }
}

impl NumericOpts {
    fn tolerance<S: Scalar>(&self) -> Tolerance {
        let mut tol = Tolerance::default_for::<S>();
        if let Some(r) = self.rank_tol {
            tol.rank_rel_tol = r;
        }
        if let Some(m) = self.membership_tol {
            tol.membership_tol = m;
        }
        tol
    }
}

fn header(cli: &Command) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("config".into(), serde_json::to_value(cli).expect("config serializes"));
    m
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| CliError::Io { path: path.display().to_string(), source: e }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Io { path: "stdout".into(), source: e })
        }
    }
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> Result<(), CliError> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(v).expect("json")))
}

/// Modes reachable from `g0` in at most `m` jumps.
fn reachable<S: Scalar>(sys: &SwitchSystem<S>, g0: usize, m: usize) -> Vec<bool> {
    let mut seen = vec![false; sys.mode_count()];
    seen[g0] = true;
    let mut frontier = vec![g0];
    for _ in 0..m {
        let mut next = Vec::new();
        for g in frontier {
            for t in sys.active_targets(g) {
                if !seen[t] {
                    seen[t] = true;
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    seen
}

fn analysis<S: Scalar>(sys: &SwitchSystem<S>, g0: usize, tol: &Tolerance) -> Result<(VChain<S>, Value), CliError> {
    let chain = v_chain(sys, tol)?;
    let names = &sys.modes;
    let null_verdicts: Vec<Value> = (0..sys.mode_count()).map(|g| null_verdict(&chain, g).to_json(names)).collect();
    let sufficient = approx_controllable_sufficient(sys, tol)?;
    let special = |r: Result<crate::criteria::Verdict<S>, CriteriaError>| match r {
        Ok(v) => json!({"applicable": true, "verdict": v.to_json(names),
                        "agrees_with_chain": v.answer == chain.get(0, g0).is_zero()}),
        Err(CriteriaError::Precondition(why)) => json!({"applicable": false, "reason": why}),
        Err(e) => json!({"applicable": false, "reason": e.to_string()}),
    };
    let report = json!({
        "model": sys.name,
        "modes": names,
        "initial_mode": names[g0],
        "backend": S::NAME,
        "ker_b_star": sys.ker_b_star(tol).to_json(),
        "chain": chain.to_json(names),
        "null_controllable": null_verdicts,
        "sufficient_condition": sufficient.to_json(names),
        "special_cases": {
            "no_noise": special(criterion_no_noise(sys, g0, tol)),
            "mode_independent": special(criterion_mode_independent(sys, tol)),
        },
    });
    Ok((chain, report))
}

/// Enumerates prefixes from `g0` level by level and returns the first one
/// that admits a witness.
fn find_witness<S: Scalar>(
    sys: &SwitchSystem<S>,
    chain: &VChain<S>,
    g0: usize,
    levels: std::ops::RangeInclusive<usize>,
    tol: &Tolerance,
) -> Result<(Vec<usize>, Vec<S>), WitnessError> {
    let mut tried = 0usize;
    let mut frontier: Vec<Vec<usize>> = vec![vec![g0]];
    for n in 0..=*levels.end() {
        if n > 0 {
            frontier = frontier
                .iter()
                .flat_map(|p| {
                    sys.active_targets(*p.last().expect("nonempty")).into_iter().map(move |t| {
                        let mut q = p.clone();
                        q.push(t);
                        q
                    })
                })
                .collect();
        }
        if n < *levels.start() {
            continue;
        }
        for prefix in &frontier {
            tried += 1;
            if tried > PREFIX_BUDGET {
                return Err(WitnessError::NoWitness(format!("search stopped after {PREFIX_BUDGET} prefixes")));
            }
            match default_start_vector(sys, chain, prefix, tol) {
                Ok(v) => return Ok((prefix.clone(), v)),
                Err(WitnessError::NoWitness(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Err(WitnessError::NoWitness(format!(
        "no prefix from mode {} up to level {} carries a nonzero compatible chain vector",
        sys.modes[g0],
        levels.end()
    )))
}

fn witness_for<S: Scalar>(
    sys: &SwitchSystem<S>,
    chain: &VChain<S>,
    g0: usize,
    opts: &WitnessOpts,
    tol: &Tolerance,
) -> Result<DualWitness<S>, CliError> {
    let prefix = match &opts.prefix {
        Some(p) => p
            .split(',')
            .map(|name| sys.mode_index(name.trim()))
            .collect::<Result<Vec<_>, _>>()?,
        None => match opts.level {
            Some(0) => vec![g0],
            Some(_) => return Err(CliError::Usage("--level above 0 needs --prefix".into())),
            None => {
                let (prefix, v) = find_witness(sys, chain, g0, 0..=sys.max_jumps, tol)?;
                if opts.vector.is_none() {
                    return Ok(build_witness_with_chain(sys, chain, &prefix, &v, tol)?);
                }
                prefix
            }
        },
    };
    if prefix[0] != g0 {
        return Err(WitnessError::BadPrefix { expected: prefix.len(), found: vec![sys.modes[prefix[0]].clone()] }.into());
    }
    if let Some(level) = opts.level {
        if level + 1 != prefix.len() {
            return Err(WitnessError::BadPrefix {
                expected: level + 1,
                found: prefix.iter().map(|&g| sys.modes[g].clone()).collect(),
            }
            .into());
        }
    }
    if prefix.len() > sys.max_jumps + 1 {
        return Err(WitnessError::BadLevel { level: prefix.len() - 1, max_jumps: sys.max_jumps }.into());
    }
    for w in prefix.windows(2) {
        if !sys.is_active(w[0], w[1]) {
            return Err(WitnessError::Unreachable { from: sys.modes[w[0]].clone(), to: sys.modes[w[1]].clone() }.into());
        }
    }
    let v = match &opts.vector {
        Some(s) => parse_list(s, "vector")?.iter().map(S::from_rational).collect(),
        None => default_start_vector(sys, chain, &prefix, tol)?,
    };
    Ok(build_witness_with_chain(sys, chain, &prefix, &v, tol)?)
}

fn parse_x0(s: Option<&str>, n: usize) -> Result<Vec<f64>, CliError> {
    match s {
        None => Ok(vec![0.0; n]),
        Some(s) => {
            let v: Vec<f64> = parse_list(s, "x0")?.iter().map(Scalar::to_f64).collect();
            if v.len() != n {
                return Err(CliError::Usage(format!("--x0 needs {n} entries")));
            }
            Ok(v)
        }
    }
}

fn parse_control(s: &str) -> Result<ControlSpec, CliError> {
    s.parse().map_err(|e: McError| CliError::Parse(e.to_string()))
}

fn run_witness<S: Scalar>(
    cmd: &Command,
    sys: &SwitchSystem<S>,
    g0: usize,
    target: &WitnessOpts,
    tol: &Tolerance,
    samples: usize,
    seed: u64,
) -> Result<Value, CliError> {
    let chain = v_chain(sys, tol)?;
    let w = witness_for(sys, &chain, g0, target, tol)?;
    let fsys = sys.to_f64();
    let trajectories: Vec<_> =
        (0..samples as u64).map(|i| sample_mode_path(&fsys, w.prefix[0], &RngSpec::new(seed, i))).collect();
    let mut out = header(cmd);
    out.insert("witness".into(), w.to_json(&trajectories));
    Ok(Value::Object(out))
}

fn run_duality<S: Scalar>(
    cmd: &Command,
    sys: &SwitchSystem<S>,
    g0: usize,
    target: &WitnessOpts,
    tol: &Tolerance,
    sim: &SimOpts,
    control: &Option<String>,
) -> Result<(Value, bool), CliError> {
    let chain = v_chain(sys, tol)?;
    let w = witness_for(sys, &chain, g0, target, tol)?;
    let fsys = sys.to_f64();
    let u = match control {
        Some(c) => parse_control(c)?,
        None => ControlSpec::Constant(vec![1.0; sys.control_dim]),
    };
    let x0 = parse_x0(sim.x0.as_deref(), sys.state_dim)?;
    let report = duality_check(&fsys, &w.to_f64(), &u, &x0, &sim.config())?;
    let mut out = header(cmd);
    out.insert(
        "witness".into(),
        json!({
            "prefix": w.prefix.iter().map(|&g| sys.modes[g].clone()).collect::<Vec<_>>(),
            "start_vector": crate::matrix::vec_to_json(&w.start_vector),
        }),
    );
    let pass = report.pass;
    out.insert("duality".into(), serde_json::to_value(&report).expect("json"));
    Ok((Value::Object(out), pass))
}

fn run_report<S: Scalar>(
    cmd: &Command,
    sys: &SwitchSystem<S>,
    g0: usize,
    tol: &Tolerance,
    sim: &SimOpts,
    grid_points: usize,
) -> Result<(Value, bool), CliError> {
    let (chain, analysis) = analysis(sys, g0, tol)?;
    let fsys = sys.to_f64();
    let cfg = sim.config();
    let x0 = parse_x0(sim.x0.as_deref(), sys.state_dim)?;
    let mut pass = true;

    let sufficient = approx_controllable_sufficient(sys, tol)?;
    let kernel = sys.ker_b_star(tol);
    let reach = reachable(sys, g0, sys.max_jumps);
    let obstruction = sufficient.deciding_mode.map(|g| {
        json!({
            "mode": sys.modes[g],
            "equals_ker_b_star": sufficient.deciding.equals(&kernel, tol).unwrap_or(false),
            "reachable_within_max_jumps": reach[g],
        })
    });

    let witness = match find_witness(sys, &chain, g0, 0..=sys.max_jumps, tol) {
        Ok((prefix, v)) => {
            let w = build_witness_with_chain(sys, &chain, &prefix, &v, tol)?;
            let wf = w.to_f64();
            let u = ControlSpec::Constant(vec![1.0; sys.control_dim]);
            let dual = duality_check(&fsys, &wf, &u, &vec![0.0; sys.state_dim], &cfg)?;
            pass &= dual.pass;
            let cascade = if sys.max_jumps <= crate::bsde::CASCADE_CAP {
                let grid = TreeGrid::uniform(fsys.horizon, grid_points.max(2), sys.max_jumps, g0);
                match solve_cascade(&fsys, &wf, &grid) {
                    Ok(sol) => json!({"grid_points": grid_points, "residual": residual(&fsys, &sol)}),
                    Err(e) => json!({"skipped": e.to_string()}),
                }
            } else {
                json!({"skipped": "jump cap above the cascade limit"})
            };
            json!({
                "found": true,
                "prefix": prefix.iter().map(|&g| sys.modes[g].clone()).collect::<Vec<_>>(),
                "start_vector": crate::matrix::vec_to_json(&v),
                "duality": dual,
                "cascade": cascade,
            })
        }
        Err(WitnessError::NoWitness(why)) => json!({"found": false, "reason": why}),
        Err(e) => return Err(e.into()),
    };

    let moments = moment_check(&fsys, &if x0.iter().all(|&v| v == 0.0) { vec![1.0; sys.state_dim] } else { x0 }, g0, fsys.horizon / 2.0, &cfg)?;
    pass &= moments.pass;
    let ks = if fsys.rates[g0] > 0.0 {
        let r = ks_first_jump(&fsys, g0, &cfg)?;
        pass &= r.pass;
        serde_json::to_value(r).expect("json")
    } else {
        json!({"skipped": "initial mode is absorbing"})
    };

    let null0 = chain.get(0, g0).is_zero();
    let mut out = header(cmd);
    out.insert("analysis".into(), analysis);
    out.insert(
        "flags".into(),
        json!({
            "null_controllable_from_initial_mode": null0,
            "sufficient_condition_holds": sufficient.answer,
            "obstruction": obstruction,
            "witness_found": witness["found"],
        }),
    );
    out.insert("witness".into(), witness);
    out.insert("moments".into(), serde_json::to_value(moments).expect("json"));
    out.insert("first_jump_ks".into(), ks);
    out.insert("statistics_pass".into(), json!(pass));
    Ok((Value::Object(out), pass))
}

fn execute(cmd: &Command) -> Result<i32, CliError> {
    match cmd {
        Command::Validate { model } => {
            let raw = match (&model.builtin, &model.model) {
                (Some(name), None) => builtin(name, &parse_params(model.params.as_deref())?)?,
                (None, Some(path)) => load(path)?,
                _ => return Err(CliError::Usage("give exactly one of --builtin and --model".into())),
            };
            let report = raw.validate();
            let mut out = header(cmd);
            out.insert("validation".into(), serde_json::to_value(&report).expect("json"));
            emit_json(&model.output, &Value::Object(out))?;
            Ok(if report.ok { EXIT_OK } else { EXIT_MODEL })
        }
        Command::Analyze { model, numeric } => {
            let sys = model.load()?;
            let g0 = model.initial_mode(&sys)?;
            let body = match numeric.backend {
                Backend::Exact => analysis(&sys, g0, &numeric.tolerance::<Rational>())?.1,
                Backend::Float => analysis(&sys.to_f64(), g0, &numeric.tolerance::<f64>())?.1,
            };
            let mut out = header(cmd);
            out.insert("analysis".into(), body);
            emit_json(&model.output, &Value::Object(out))?;
            Ok(EXIT_OK)
        }
        Command::Witness { model, numeric, target, samples, seed } => {
            let sys = model.load()?;
            let g0 = model.initial_mode(&sys)?;
            let out = match numeric.backend {
                Backend::Exact => run_witness(cmd, &sys, g0, target, &numeric.tolerance::<Rational>(), *samples, *seed)?,
                Backend::Float => {
                    run_witness(cmd, &sys.to_f64(), g0, target, &numeric.tolerance::<f64>(), *samples, *seed)?
                }
            };
            emit_json(&model.output, &out)?;
            Ok(EXIT_OK)
        }
        Command::DualityCheck { model, numeric, target, sim, control } => {
            let sys = model.load()?;
            let g0 = model.initial_mode(&sys)?;
            let (out, pass) = match numeric.backend {
                Backend::Exact => run_duality(cmd, &sys, g0, target, &numeric.tolerance::<Rational>(), sim, control)?,
                Backend::Float => {
                    run_duality(cmd, &sys.to_f64(), g0, target, &numeric.tolerance::<f64>(), sim, control)?
                }
            };
            emit_json(&model.output, &out)?;
            Ok(if pass { EXIT_OK } else { EXIT_STAT_FAIL })
        }
        Command::Simulate { model, sim, control } => {
            let sys = model.load()?;
            let g0 = model.initial_mode(&sys)?;
            let fsys = sys.to_f64();
            let u = parse_control(control)?;
            let x0 = parse_x0(sim.x0.as_deref(), sys.state_dim)?;
            let mut body = String::new();
            for i in 0..sim.paths as u64 {
                let path = sample_mode_path(&fsys, g0, &RngSpec::new(sim.seed, i));
                let r = integrate_state(&fsys, &path, &x0, &u, sim.grid_step)?;
                let line = json!({
                    "path": i,
                    "trajectory": path.to_json(&fsys.modes),
                    "times": r.times,
                    "states": r.states,
                    "terminal": r.terminal,
                });
                body.push_str(&line.to_string());
                body.push('\n');
            }
            emit(&model.output, &body)?;
            Ok(EXIT_OK)
        }
        Command::Report { model, numeric, sim, grid_points } => {
            let sys = model.load()?;
            let g0 = model.initial_mode(&sys)?;
            let (out, pass) = match numeric.backend {
                Backend::Exact => run_report(cmd, &sys, g0, &numeric.tolerance::<Rational>(), sim, *grid_points)?,
                Backend::Float => {
                    run_report(cmd, &sys.to_f64(), g0, &numeric.tolerance::<f64>(), sim, *grid_points)?
                }
            };
            emit_json(&model.output, &out)?;
            Ok(if pass { EXIT_OK } else { EXIT_STAT_FAIL })
        }
    }
}

/// Parses the arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
