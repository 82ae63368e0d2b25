//! Command-line front end: model validation, solving, simulation, and
//! solver/oracle/Monte-Carlo consistency checks.
//!
//! Exit codes: 0 success; 1 domain violation (invalid model, out-of-range
//! parameter, unconverged solve, consistency-check failure); 2 usage, IO, or
//! parse error; 3 solve completed with diverged states.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gimdp_core::model::{rat_example, CtmdpModel, ModelError};
use gimdp_core::oracle::{brute_force_value, EnumerationCapError};
use gimdp_core::reduction::reduce;
use gimdp_core::sim::{
    estimate_utility, simulate_path, EventKind, SimOptions, SimulationReport, Termination,
};
use gimdp_core::solver::{
    extract_policy, value_iterate, verify_optimality, PolicyChoice, ResidualReport, SolveOptions,
    SolveStatus, StationaryPolicy, ValueSolution,
};

const EXIT_OK: u8 = 0;
const EXIT_DOMAIN: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gimdp",
    about = "Solver and simulator for finite gradual-impulse CTMDPs under the exponential-utility criterion",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Args)]
struct SolveFlags {
    /// Absolute sup-norm stopping tolerance for value iteration.
    #[arg(long = "tol", env = "GIMDP_TOL", default_value_t = 1e-10)]
    tol: f64,
    /// Value-iteration budget.
    #[arg(long = "max-iter", env = "GIMDP_MAX_ITER", default_value_t = 1_000_000)]
    max_iter: usize,
    /// Values above this cap are declared diverged (+inf).
    #[arg(
        long = "divergence-cap",
        env = "GIMDP_DIVERGENCE_CAP",
        default_value_t = 1e12
    )]
    divergence_cap: f64,
    /// Tie tolerance for the policy selector.
    #[arg(long = "tie-tol", env = "GIMDP_TIE_TOL", default_value_t = 1e-9)]
    tie_tol: f64,
    /// Tolerance for the optimality-residual classification.
    #[arg(
        long = "residual-tol",
        env = "GIMDP_RESIDUAL_TOL",
        default_value_t = 1e-8
    )]
    residual_tol: f64,
}

impl SolveFlags {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            abs_tol: self.tol,
            max_iter: self.max_iter,
            divergence_cap: self.divergence_cap,
        }
    }
}

#[derive(Args)]
struct SimFlags {
    /// Initial state.
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Number of Monte Carlo paths.
    #[arg(long, default_value_t = 10_000)]
    paths: u64,
    /// Master seed; per-path streams derive from it deterministically.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Time horizon truncating live paths.
    #[arg(long, default_value_t = 1e4)]
    horizon: f64,
    /// Maximum impulses within one block.
    #[arg(long = "impulse-cap", default_value_t = 100_000)]
    impulse_cap: usize,
    /// Maximum recorded events per path.
    #[arg(long = "jump-cap", default_value_t = 1_000_000)]
    jump_cap: usize,
}

impl SimFlags {
    fn options(&self) -> SimOptions {
        SimOptions {
            horizon: self.horizon,
            impulse_cap: self.impulse_cap,
            jump_cap: self.jump_cap,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against every invariant.
    Validate { model: PathBuf },
    /// Solve a model: value iteration, policy extraction, residual report.
    Solve {
        model: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
        /// Write the machine-readable result document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of E[exp(total cost)] under a policy.
    Simulate {
        model: PathBuf,
        /// Policy document (either a bare policy or a solve output).
        #[arg(long, conflicts_with = "from_solve")]
        policy: Option<PathBuf>,
        /// Solve the model first and simulate its extracted policy.
        #[arg(long = "from-solve")]
        from_solve: bool,
        #[command(flatten)]
        sim: SimFlags,
        #[command(flatten)]
        solve_flags: SolveFlags,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
        /// Dump event traces of the first paths as tab-separated text.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// How many paths to trace.
        #[arg(long = "trace-paths", default_value_t = 1)]
        trace_paths: u64,
    },
    /// Cross-check value iteration, the enumeration oracle, and Monte Carlo.
    Compare {
        model: PathBuf,
        #[command(flatten)]
        flags: SolveFlags,
        #[command(flatten)]
        sim: SimFlags,
        /// Refuse enumeration above this many policies.
        #[arg(long = "enum-cap", default_value_t = 1_000_000)]
        enum_cap: u64,
        /// Allowed |value iteration - brute force| on finite states.
        #[arg(long = "oracle-tol", default_value_t = 1e-7)]
        oracle_tol: f64,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
    },
    /// Write a built-in example model file.
    Example {
        #[command(subcommand)]
        which: ExampleCommand,
    },
}

#[derive(Subcommand)]
enum ExampleCommand {
    /// Two-state pest-control model: wait for the rat to leave, or shoot.
    Rat {
        /// Rate at which the rat leaves on its own.
        #[arg(long, default_value_t = 2.0)]
        mu: f64,
        /// Cost per unit time while the rat is present.
        #[arg(long = "cost-rate", default_value_t = 1.0)]
        cost_rate: f64,
        /// Probability a shot kills the rat.
        #[arg(long = "hit-prob", default_value_t = 0.5)]
        hit_prob: f64,
        /// Cost per bullet.
        #[arg(long = "shot-cost", default_value_t = 0.1)]
        shot_cost: f64,
        /// Output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Solve {
            model,
            flags,
            format,
            out,
        } => cmd_solve(&model, &flags, format, out.as_deref()),
        Command::Simulate {
            model,
            policy,
            from_solve,
            sim,
            solve_flags,
            format,
            trace,
            trace_paths,
        } => cmd_simulate(
            &model,
            policy.as_deref(),
            from_solve,
            &sim,
            &solve_flags,
            format,
            trace.as_deref(),
            trace_paths,
        ),
        Command::Compare {
            model,
            flags,
            sim,
            enum_cap,
            oracle_tol,
            format,
        } => cmd_compare(&model, &flags, &sim, enum_cap, oracle_tol, format),
        Command::Example { which } => match which {
            ExampleCommand::Rat {
                mu,
                cost_rate,
                hit_prob,
                shot_cost,
                out,
            } => cmd_example_rat(mu, cost_rate, hit_prob, shot_cost, out.as_deref()),
        },
    }
}

/// Loads a model file, mapping parse/IO problems to the usage exit path.
fn load_model(path: &Path) -> anyhow::Result<CtmdpModel> {
    CtmdpModel::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

fn cmd_validate(path: &Path) -> anyhow::Result<u8> {
    let model = load_model(path)?;
    let report = model.validate();
    if report.is_valid() {
        println!(
            "ok: {} states, {} gradual actions, {} impulse actions",
            model.n_states(),
            model.n_gradual(),
            model.n_impulse()
        );
        Ok(EXIT_OK)
    } else {
        println!("{} violation(s):", report.len());
        print!("{report}");
        Ok(EXIT_DOMAIN)
    }
}

#[derive(Serialize)]
struct StateRow {
    state: usize,
    value: Option<f64>,
    diverged: bool,
    action: ActionRef,
    gradual_residual: Option<f64>,
    impulse_residual: Option<f64>,
    gradual_tight: bool,
    impulse_tight: bool,
}

#[derive(Serialize)]
struct ActionRef {
    kind: &'static str,
    index: usize,
    name: String,
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    model: String,
    options: &'a SolveOptions,
    tie_tol: f64,
    residual_tol: f64,
    status: &'a SolveStatus,
    iterations: usize,
    sup_norm_delta: f64,
    states: Vec<StateRow>,
    policy: &'a StationaryPolicy,
}

fn action_ref(model: &CtmdpModel, choice: PolicyChoice) -> ActionRef {
    match choice {
        PolicyChoice::Gradual(a) => ActionRef {
            kind: "gradual",
            index: a,
            name: model.gradual_name(a).to_owned(),
        },
        PolicyChoice::Impulse(b) => ActionRef {
            kind: "impulse",
            index: b,
            name: model.impulse_name(b).to_owned(),
        },
    }
}

fn state_rows(
    model: &CtmdpModel,
    solution: &ValueSolution,
    policy: &StationaryPolicy,
    residuals: &ResidualReport,
) -> Vec<StateRow> {
    (0..model.n_states())
        .map(|x| {
            let finite = solution.values[x].is_finite();
            let row = &residuals.rows[x];
            StateRow {
                state: x,
                value: finite.then_some(solution.values[x]),
                diverged: !finite,
                action: action_ref(model, policy.choice[x]),
                gradual_residual: row.finite.then_some(row.gradual_residual),
                impulse_residual: row.finite.then_some(row.impulse_residual),
                gradual_tight: row.gradual_tight,
                impulse_tight: row.impulse_tight,
            }
        })
        .collect()
}

fn tight_label(gradual: bool, impulse: bool) -> &'static str {
    match (gradual, impulse) {
        (true, true) => "both",
        (true, false) => "gradual",
        (false, true) => "impulse",
        (false, false) => "none",
    }
}

fn print_solve_table(rows: &[StateRow], solution: &ValueSolution) {
    println!(
        "{:>5}  {:>16}  {:<9} {:<18} {:>13}  {:>13}  {:<7}",
        "state", "value", "status", "action", "r_gradual", "r_impulse", "tight"
    );
    for row in rows {
        let value = row
            .value
            .map_or("inf".to_owned(), |v| format!("{v:.10}"));
        let fmt_res =
            |r: Option<f64>| r.map_or("-".to_owned(), |v| format!("{v:.4e}"));
        println!(
            "{:>5}  {:>16}  {:<9} {:<18} {:>13}  {:>13}  {:<7}",
            row.state,
            value,
            if row.diverged { "diverged" } else { "ok" },
            format!("{}:{}", row.action.kind, row.action.name),
            fmt_res(row.gradual_residual),
            fmt_res(row.impulse_residual),
            tight_label(row.gradual_tight, row.impulse_tight),
        );
    }
    println!(
        "iterations: {}   last sup-norm delta: {:.3e}",
        solution.iterations, solution.sup_norm_delta
    );
}

fn model_error_exit(err: &ModelError) -> Option<u8> {
    match err {
        ModelError::Invalid(_) | ModelError::Parameter { .. } => Some(EXIT_DOMAIN),
        _ => None,
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    flags: &SolveFlags,
    format: Format,
    out: Option<&Path>,
) -> anyhow::Result<u8> {
    let model = load_model(path)?;
    let reduced = match reduce(&model) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("{err}");
            return Ok(EXIT_DOMAIN);
        }
    };
    let opts = flags.options();
    let solution = value_iterate(&reduced, &opts);
    let policy = extract_policy(&reduced, &solution.values, flags.tie_tol);
    let residuals = verify_optimality(&model, &solution.values, flags.residual_tol);
    let rows = state_rows(&model, &solution, &policy, &residuals);

    let document = SolveDocument {
        model: path.display().to_string(),
        options: &opts,
        tie_tol: flags.tie_tol,
        residual_tol: flags.residual_tol,
        status: &solution.status,
        iterations: solution.iterations,
        sup_norm_delta: solution.sup_norm_delta,
        states: rows,
        policy: &policy,
    };

    match format {
        Format::Human => print_solve_table(&document.states, &solution),
        Format::Json => println!("{}", serde_json::to_string_pretty(&document)?),
    }
    if let Some(out_path) = out {
        std::fs::write(out_path, serde_json::to_string_pretty(&document)?)
            .with_context(|| format!("cannot write {}", out_path.display()))?;
    }

    Ok(match solution.status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::DivergedStates(_) => {
            eprintln!("note: some states diverged (value +inf)");
            EXIT_DIVERGED
        }
        SolveStatus::MaxIterations => {
            eprintln!(
                "error: value iteration did not converge within {} iterations",
                opts.max_iter
            );
            EXIT_DOMAIN
        }
    })
}

/// Accepts either a bare policy document or a solve output with a `policy`
/// field.
fn load_policy(path: &Path, model: &CtmdpModel) -> anyhow::Result<Result<StationaryPolicy, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read policy {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    let policy_value = value.get("policy").cloned().unwrap_or(value);
    let policy: StationaryPolicy = serde_json::from_value(policy_value)
        .with_context(|| format!("{} does not contain a policy", path.display()))?;

    if policy.choice.len() != model.n_states() {
        return Ok(Err(format!(
            "policy covers {} states, model has {}",
            policy.choice.len(),
            model.n_states()
        )));
    }
    for (x, choice) in policy.choice.iter().enumerate() {
        let ok = match choice {
            PolicyChoice::Gradual(a) => *a < model.n_gradual(),
            PolicyChoice::Impulse(b) => *b < model.n_impulse(),
        };
        if !ok {
            return Ok(Err(format!("policy action at state {x} is out of range")));
        }
    }
    Ok(Ok(policy))
}

fn write_trace(
    path: &Path,
    model: &CtmdpModel,
    policy: &StationaryPolicy,
    x0: usize,
    master_seed: u64,
    n_paths: u64,
    opts: &SimOptions,
) -> anyhow::Result<()> {
    use std::fmt::Write as _;
    let mut text = String::new();
    text.push_str("# path\tevent\ttime\tkind\tpre_state\tactions\tpost_state\tcost_increment\n");
    for i in 0..n_paths {
        let record = simulate_path(model, policy, x0, gimdp_core::rng::path_seed(master_seed, i), opts);
        for (k, event) in record.events.iter().enumerate() {
            let kind = match event.kind {
                EventKind::NaturalJump => "natural_jump",
                EventKind::ImpulseBlock => "impulse_block",
            };
            let actions = if event.intervention.is_empty() {
                "-".to_owned()
            } else {
                event
                    .intervention
                    .iter()
                    .map(|(b, y)| format!("{}->{}", model.impulse_name(*b), y))
                    .collect::<Vec<_>>()
                    .join(";")
            };
            writeln!(
                text,
                "{i}\t{k}\t{:.12}\t{kind}\t{}\t{actions}\t{}\t{:.12}",
                event.time, event.pre_state, event.post_state, event.cost_increment
            )?;
        }
        let termination = match record.termination {
            Termination::AbsorbedZeroCost => "absorbed_zero_cost",
            Termination::HorizonReached => "horizon_reached",
            Termination::ImpulseCapHit => "impulse_cap_hit",
            Termination::JumpCapHit => "jump_cap_hit",
        };
        writeln!(
            text,
            "# path {i}: termination={termination} tail_cost={:.12} total_cost={:.12}",
            record.tail_cost, record.total_cost
        )?;
    }
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateDocument<'a> {
    model: String,
    x0: usize,
    n_paths: u64,
    master_seed: u64,
    horizon: f64,
    report: &'a SimulationReport,
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    policy_path: Option<&Path>,
    from_solve: bool,
    sim: &SimFlags,
    solve_flags: &SolveFlags,
    format: Format,
    trace: Option<&Path>,
    trace_paths: u64,
) -> anyhow::Result<u8> {
    let model = load_model(path)?;
    let report = model.validate();
    if !report.is_valid() {
        eprintln!("model violates invariants:\n{report}");
        return Ok(EXIT_DOMAIN);
    }
    if sim.x0 >= model.n_states() {
        eprintln!(
            "error: x0 = {} out of range for {} states",
            sim.x0,
            model.n_states()
        );
        return Ok(EXIT_DOMAIN);
    }
    if sim.paths < 2 {
        eprintln!("error: --paths must be at least 2");
        return Ok(EXIT_DOMAIN);
    }

    let policy = if let Some(p) = policy_path {
        match load_policy(p, &model)? {
            Ok(policy) => policy,
            Err(msg) => {
                eprintln!("error: {msg}");
                return Ok(EXIT_DOMAIN);
            }
        }
    } else if from_solve {
        let reduced = match reduce(&model) {
            Ok(r) => r,
            Err(err) => {
                eprintln!("{err}");
                return Ok(EXIT_DOMAIN);
            }
        };
        let solution = value_iterate(&reduced, &solve_flags.options());
        extract_policy(&reduced, &solution.values, solve_flags.tie_tol)
    } else {
        anyhow::bail!("either --policy FILE or --from-solve is required");
    };

    let opts = sim.options();
    let report = estimate_utility(&model, &policy, sim.x0, sim.paths, sim.seed, &opts);
    if let Some(trace_path) = trace {
        write_trace(
            trace_path, &model, &policy, sim.x0, sim.seed, trace_paths, &opts,
        )?;
    }

    match format {
        Format::Human => {
            println!(
                "estimate E[exp(cost)] from state {}: {:.10}  (std error {:.4e}, {} paths)",
                sim.x0, report.estimate, report.std_error, report.n_paths
            );
            println!(
                "terminations: absorbed={} horizon={} impulse_cap={} jump_cap={}",
                report.terminations.absorbed_zero_cost,
                report.terminations.horizon_reached,
                report.terminations.impulse_cap_hit,
                report.terminations.jump_cap_hit
            );
            println!(
                "truncated fraction (lower-bound bias): {:.3e}",
                report.truncation_bias_bound
            );
        }
        Format::Json => {
            let doc = SimulateDocument {
                model: path.display().to_string(),
                x0: sim.x0,
                n_paths: sim.paths,
                master_seed: sim.seed,
                horizon: sim.horizon,
                report: &report,
            };
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CompareRow {
    state: usize,
    /// None marks a diverged (+inf) state.
    value_iteration: Option<f64>,
    /// None marks diverged, or the whole column skipped (see `oracle`).
    brute_force: Option<f64>,
    monte_carlo: Option<f64>,
    std_error: Option<f64>,
    vi_oracle_delta: Option<f64>,
    vi_mc_delta: Option<f64>,
    ok: bool,
}

#[derive(Serialize)]
struct CompareDocument {
    model: String,
    oracle: String,
    n_policies: Option<u64>,
    rows: Vec<CompareRow>,
    agree: bool,
}

fn cmd_compare(
    path: &Path,
    flags: &SolveFlags,
    sim: &SimFlags,
    enum_cap: u64,
    oracle_tol: f64,
    format: Format,
) -> anyhow::Result<u8> {
    let model = load_model(path)?;
    let reduced = match reduce(&model) {
        Ok(r) => r,
        Err(err) => {
            eprintln!("{err}");
            return Ok(EXIT_DOMAIN);
        }
    };
    let opts = flags.options();
    let solution = value_iterate(&reduced, &opts);
    let policy = extract_policy(&reduced, &solution.values, flags.tie_tol);

    let oracle = match brute_force_value(&reduced, &opts, enum_cap) {
        Ok(result) => Some(result),
        Err(EnumerationCapError { count, cap }) => {
            eprintln!("note: oracle skipped ({count} policies exceed the cap of {cap})");
            None
        }
    };

    let sim_opts = sim.options();
    let mut rows = Vec::new();
    let mut agree = true;
    for x in 0..model.n_states() {
        let vi = solution.values[x];
        let vi_finite = vi.is_finite();

        let (oracle_value, vi_oracle_delta, oracle_ok) = match &oracle {
            None => (None, None, true),
            Some(result) => {
                let bf = result.values[x];
                if vi_finite != bf.is_finite() {
                    (bf.is_finite().then_some(bf), None, false)
                } else if vi_finite {
                    let delta = (vi - bf).abs();
                    (Some(bf), Some(delta), delta <= oracle_tol)
                } else {
                    (None, None, true)
                }
            }
        };

        let (mc, se, vi_mc_delta, mc_ok) = if vi_finite {
            let report = estimate_utility(&model, &policy, x, sim.paths, sim.seed, &sim_opts);
            let delta = (report.estimate - vi).abs();
            let budget = 3.0 * report.std_error + report.truncation_bias_bound + 1e-9;
            (
                Some(report.estimate),
                Some(report.std_error),
                Some(delta),
                delta <= budget,
            )
        } else {
            (None, None, None, true)
        };

        let ok = oracle_ok && mc_ok;
        agree &= ok;
        rows.push(CompareRow {
            state: x,
            value_iteration: vi_finite.then_some(vi),
            brute_force: oracle_value,
            monte_carlo: mc,
            std_error: se,
            vi_oracle_delta,
            vi_mc_delta,
            ok,
        });
    }

    match format {
        Format::Human => {
            println!(
                "{:>5}  {:>16}  {:>16}  {:>16}  {:>10}  {:>4}",
                "state", "value_iter", "brute_force", "monte_carlo", "mc_se", "ok"
            );
            let oracle_skipped = oracle.is_none();
            for row in &rows {
                let vi = row
                    .value_iteration
                    .map_or("inf".to_owned(), |v| format!("{v:.10}"));
                let bf = if oracle_skipped {
                    "skipped".to_owned()
                } else {
                    row.brute_force
                        .map_or("inf".to_owned(), |v| format!("{v:.10}"))
                };
                let mc = row
                    .monte_carlo
                    .map_or("-".to_owned(), |v| format!("{v:.10}"));
                println!(
                    "{:>5}  {:>16}  {:>16}  {:>16}  {:>10}  {:>4}",
                    row.state,
                    vi,
                    bf,
                    mc,
                    row.std_error
                        .map_or("-".to_owned(), |x| format!("{x:.2e}")),
                    if row.ok { "yes" } else { "NO" },
                );
            }
        }
        Format::Json => {
            let doc = CompareDocument {
                model: path.display().to_string(),
                oracle: if oracle.is_some() {
                    "enumerated".into()
                } else {
                    "skipped".into()
                },
                n_policies: oracle.as_ref().map(|o| o.n_policies),
                rows,
                agree,
            };
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }

    Ok(if agree { EXIT_OK } else { EXIT_DOMAIN })
}

fn cmd_example_rat(
    mu: f64,
    cost_rate: f64,
    hit_prob: f64,
    shot_cost: f64,
    out: Option<&Path>,
) -> anyhow::Result<u8> {
    let model = match rat_example(mu, cost_rate, hit_prob, shot_cost) {
        Ok(model) => model,
        Err(err) => {
            if let Some(code) = model_error_exit(&err) {
                eprintln!("error: {err}");
                return Ok(code);
            }
            return Err(err.into());
        }
    };
    match out {
        Some(path) => {
            model
                .save(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => println!("{}", model.to_json()),
    }
    Ok(EXIT_OK)
}
