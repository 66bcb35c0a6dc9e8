//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a checked hypothesis does not hold, 2 bad input,
//! 3 numerical divergence.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use crate::config::{parse_vector, ExperimentSpec, Sourced};
use crate::design::{additive_delay_check, gamma_tau2, mult_gain_interval, necessity_bound, DesignResult};
use crate::error::{Error, Result};
use crate::gains::{check_conditions, ConditionRates, ConditionReport, GainFunction, GainSpec, Verdict};
use crate::graph::{parse_edge_list, spectral_decompose, Digraph, SpectralData};
use crate::metrics::{EnsembleStats, Summary};
use crate::noise::{NoiseModel, NoiseSpec};
use crate::resolvent::{self, decay_exponents, solve_resolvent, verify_envelope, DecayRate, ResolventProblem};
use crate::scenarios::Scenario;
use crate::sdde::{simulate_ensemble, simulate_trial, SimConfig, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESIS: i32 = 1;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "consensus",
    version,
    about = "Delayed noisy consensus: checks, design bounds and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate gain conditions and graph hypotheses for a theorem.
    Check(CheckArgs),
    /// Print delay margins, the admissible gain interval and rates.
    Design(DesignArgs),
    /// Solve the scalar resolvent equation and write it as CSV.
    Resolvent(ResolventArgs),
    /// Run an ensemble described by a config file and/or flags.
    Simulate(SimulateArgs),
    /// Rerun one of the built-in four-agent experiments.
    Reproduce(ReproduceArgs),
}

/// Result the `check` command tests hypotheses for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Mean-square weak consensus: spanning tree, C1, C4.
    MsWeak,
    /// Mean-square strong consensus: spanning tree, C1, C2.
    MsStrong,
    /// Almost-sure weak consensus: spanning tree, C1, C5.
    AsWeak,
    /// Almost-sure strong consensus: spanning tree, delay margin, C1, C2.
    AsStrong,
    /// Noise-free consensus: spanning tree, delay margin, C1.
    Deterministic,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub gain: String,
    #[arg(long, default_value_t = 0.0)]
    pub tau1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long, value_enum, default_value_t = Theorem::AsStrong)]
    pub theorem: Theorem,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Gain for the additive delay margin.
    #[arg(long)]
    pub gain: Option<String>,
    /// Noise model; its bound and smallest intensity feed the gain bounds.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub tau1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// Constant gain for the guaranteed mean-square rate.
    #[arg(long)]
    pub k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ResolventArgs {
    /// Eigenvalue as `re` or `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: String,
    #[arg(long)]
    pub gain: String,
    #[arg(long, default_value_t = 0.0)]
    pub tau1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// Length of the solution interval after `t0`.
    #[arg(long, default_value_t = resolvent::DEFAULT_ENVELOPE_HORIZON)]
    pub horizon: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub stride: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags shared by `simulate` and `reproduce`; each overrides the config.
#[derive(Debug, Args, Default)]
pub struct RunFlags {
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Worker threads for trials; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub gain: Option<String>,
    #[arg(long)]
    pub noise: Option<String>,
    /// Initial state, comma separated, agent-major.
    #[arg(long, allow_hyphen_values = true)]
    pub initial: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// One of fig1 .. fig8.
    pub scenario: String,
    #[command(flatten)]
    pub run: RunFlags,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Check(a) => cmd_check(&a, &mut out),
        Command::Design(a) => cmd_design(&a, &mut out),
        Command::Resolvent(a) => cmd_resolvent(&a, &mut out),
        Command::Simulate(a) => cmd_simulate(&a, &mut out),
        Command::Reproduce(a) => cmd_reproduce(&a, &mut out),
    }
}

fn load_graph(path: &Path) -> Result<Digraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, &path.display().to_string())
}

fn load_gain(spec: &str) -> Result<GainFunction> {
    GainSpec::parse(spec)?.load(Path::new("."))
}

fn stdout_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn fmt_eig(l: &Complex64) -> String {
    if l.im.abs() < 1e-12 {
        format!("{:.6}", l.re)
    } else {
        format!("{:.6}{:+.6}i", l.re, l.im)
    }
}

fn write_graph_summary<W: Write>(w: &mut W, g: &Digraph, spec: &SpectralData) -> io::Result<()> {
    writeln!(
        w,
        "graph          {} agents, {} edges; spanning tree: {} (spectral: {}); undirected: {}; balanced: {}",
        g.n_agents(),
        g.edge_count(),
        yes_no(spec.has_spanning_tree),
        yes_no(spec.spectral_spanning_tree()),
        yes_no(spec.is_undirected),
        yes_no(spec.is_balanced)
    )?;
    let eigs: Vec<String> = spec.nonzero_eigs.iter().map(fmt_eig).collect();
    writeln!(w, "eigenvalues    0, {}", eigs.join(", "))?;
    let pi: Vec<String> = spec.pi.iter().map(|p| format!("{p:.6}")).collect();
    writeln!(w, "pi             {}", pi.join(" "))
}

/// Outcome of `check`: condition verdicts plus the hypotheses of `theorem`.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub report: ConditionReport,
    pub spanning_tree: bool,
    pub margin: Option<f64>,
    pub rho0: Option<f64>,
    pub hypotheses: Vec<(&'static str, bool)>,
}

impl CheckOutcome {
    pub fn holds(&self) -> bool {
        self.hypotheses.iter().all(|(_, ok)| *ok)
    }
}

/// Evaluates the gain conditions on `g` and the hypotheses of `theorem`.
pub fn evaluate_check(g: &Digraph, c: &GainFunction, tau1: f64, t0: f64, theorem: Theorem) -> Result<CheckOutcome> {
    let spec = spectral_decompose(g)?;
    let tree = spec.has_spanning_tree;
    let margin = if tree {
        Some(additive_delay_check(&spec, c, tau1, t0)?.1)
    } else {
        None
    };
    let feasible = margin.is_some_and(|m| m < 1.0);
    // rho_0 = min over nonzero eigenvalues of the resolvent decay rate
    let rho0 = if feasible {
        let mut best = f64::INFINITY;
        for l in &spec.nonzero_eigs {
            let p = ResolventProblem::new(*l, c.clone(), tau1, t0)?;
            best = best.min(decay_exponents(&p)?.2);
        }
        Some(best)
    } else {
        None
    };
    let rates = ConditionRates {
        c4: rho0,
        c4prime: tree.then(|| 2.0 * spec.max_real_eig()),
    };
    let report = check_conditions(c, rates);
    let holds = |v: Verdict| v.holds();
    let c4 = report.c4.is_some_and(holds);
    let mut hyp = vec![("spanning tree", tree), ("C1", holds(report.c1))];
    match theorem {
        Theorem::MsWeak => hyp.push(("C4", c4)),
        Theorem::MsStrong => hyp.push(("C2", holds(report.c2))),
        Theorem::AsWeak => hyp.push(("C5", holds(report.c5))),
        Theorem::AsStrong => {
            hyp.push(("delay margin < 1", feasible));
            hyp.push(("C2", holds(report.c2)));
        }
        Theorem::Deterministic => hyp.push(("delay margin < 1", feasible)),
    }
    Ok(CheckOutcome {
        report,
        spanning_tree: tree,
        margin,
        rho0,
        hypotheses: hyp,
    })
}

fn cmd_check<W: Write>(a: &CheckArgs, w: &mut W) -> Result<i32> {
    let g = load_graph(&a.graph)?;
    let c = load_gain(&a.gain)?;
    let spec = spectral_decompose(&g)?;
    let outcome = evaluate_check(&g, &c, a.tau1, a.t0, a.theorem)?;
    let r = &outcome.report;
    let mut body = || -> io::Result<()> {
        write_graph_summary(w, &g, &spec)?;
        writeln!(w, "gain           {c}")?;
        match outcome.margin {
            Some(m) => writeln!(
                w,
                "delay margin   {m:.6} ({})",
                if m < 1.0 { "feasible" } else { "infeasible" }
            )?,
            None => writeln!(w, "delay margin   n/a")?,
        }
        if let Some(rho0) = outcome.rho0 {
            writeln!(w, "rho0           {rho0:.6}")?;
        }
        let opt = |v: Option<Verdict>| v.map_or("n/a".to_string(), |v| v.to_string());
        writeln!(w, "C1             {}", r.c1)?;
        writeln!(w, "C2             {}", r.c2)?;
        writeln!(w, "C3             {}", r.c3)?;
        writeln!(w, "C4             {}", opt(r.c4))?;
        writeln!(w, "C4'            {}", opt(r.c4prime))?;
        writeln!(w, "C5             {}", r.c5)?;
        writeln!(w, "C5'            {}", r.c5prime)?;
        if let Some(limit) = r.c5_limit {
            writeln!(w, "C5 limit       {limit}")?;
        }
        let theorem = a
            .theorem
            .to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default();
        for (name, ok) in &outcome.hypotheses {
            writeln!(w, "{theorem:<14} {name}: {}", if *ok { "ok" } else { "not satisfied" })?;
        }
        writeln!(
            w,
            "verdict        {}",
            if outcome.holds() {
                "hypotheses hold"
            } else {
                "hypotheses not satisfied"
            }
        )
    };
    body().map_err(stdout_err)?;
    if !outcome.spanning_tree {
        return Err(Error::NoSpanningTree);
    }
    Ok(if outcome.holds() { EXIT_OK } else { EXIT_HYPOTHESIS })
}

fn fmt_bound(v: f64) -> String {
    if v.is_infinite() {
        "unbounded".into()
    } else {
        format!("{v:.6}")
    }
}

fn cmd_design<W: Write>(a: &DesignArgs, w: &mut W) -> Result<i32> {
    let g = load_graph(&a.graph)?;
    let spec = spectral_decompose(&g)?;
    let n = g.n_agents();
    let noise = match &a.noise {
        Some(s) => Some(NoiseSpec::parse(s)?.load(n, Path::new("."))?),
        None => None,
    };
    let sigma_bar = noise.as_ref().map_or(0.0, NoiseModel::bound);
    let mut result = DesignResult {
        additive_feasible: None,
        additive_margin: None,
        mult_k_max: None,
        gamma_tau2: None,
        necessity_k_max: None,
    };
    let mut lines: Vec<String> = Vec::new();
    let mut code = EXIT_OK;

    match &a.gain {
        Some(gs) if spec.has_spanning_tree => {
            let c = load_gain(gs)?;
            let (ok, margin) = additive_delay_check(&spec, &c, a.tau1, a.t0)?;
            result.additive_feasible = Some(ok);
            result.additive_margin = Some(margin);
            lines.push(format!(
                "additive delay margin    {margin:.6} ({})",
                if ok { "feasible" } else { "infeasible" }
            ));
        }
        Some(_) => lines.push("additive delay margin    n/a (no spanning tree)".into()),
        None => lines.push("additive delay margin    n/a (no --gain)".into()),
    }

    match mult_gain_interval(&spec, a.tau1, sigma_bar, n) {
        Ok(k_max) => {
            result.mult_k_max = Some(k_max);
            lines.push(format!("gain interval            (0, {})", fmt_bound(k_max)));
            if let Some(k) = a.k {
                match gamma_tau2(&spec, k, a.tau1, a.tau2, sigma_bar, n) {
                    Ok(gamma) => {
                        result.gamma_tau2 = Some(gamma);
                        lines.push(format!("rate gamma (k = {k})     {gamma:.6}"));
                    }
                    Err(e @ Error::GainOutOfRange { .. }) => {
                        lines.push(format!("rate gamma (k = {k})     n/a ({e})"));
                        code = EXIT_HYPOTHESIS;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Err(e @ (Error::GraphNotUndirected | Error::NotConnected)) => {
            lines.push(format!("gain interval            n/a ({e})"));
        }
        Err(e) => return Err(e),
    }

    let linear = matches!(
        noise,
        Some(NoiseModel::Multiplicative {
            kind: crate::noise::Multiplicative::Linear { .. },
            ..
        })
    );
    let sigma_min = noise.as_ref().and_then(|m| m.min_sigma(&g));
    match sigma_min {
        Some(s) if linear && s > 0.0 && 2.0 * a.tau2 >= a.tau1 => {
            let bound = necessity_bound(s, n);
            result.necessity_k_max = Some(bound);
            lines.push(format!("necessary gain bound     k < {}", fmt_bound(bound)));
        }
        _ => lines.push(
            "necessary gain bound     n/a (needs linear multiplicative noise, positive intensities, 2 tau2 >= tau1)"
                .into(),
        ),
    }

    let mut body = || -> io::Result<()> {
        write_graph_summary(w, &g, &spec)?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        writeln!(w, "{}", serde_json::to_string(&result).expect("serializable"))
    };
    body().map_err(stdout_err)?;
    Ok(code)
}

/// Parses `re` or `re,im`.
pub fn parse_lambda(text: &str) -> Result<Complex64> {
    let v = parse_vector(text)
        .filter(|v| v.len() <= 2)
        .ok_or_else(|| Error::parse("lambda", 1, 1, format!("expected 're' or 're,im', found '{text}'")))?;
    Ok(Complex64::new(v[0], v.get(1).copied().unwrap_or(0.0)))
}

#[derive(Serialize)]
struct ResolventSummary {
    lambda_re: f64,
    lambda_im: f64,
    tau1: f64,
    t0: f64,
    margin: f64,
    rate: DecayRate,
    envelope_holds: bool,
}

fn cmd_resolvent<W: Write>(a: &ResolventArgs, w: &mut W) -> Result<i32> {
    let lambda = parse_lambda(&a.lambda)?;
    let c = load_gain(&a.gain)?;
    let p = ResolventProblem::new(lambda, c, a.tau1, a.t0)?;
    let (rho1, rho2, rho) = decay_exponents(&p)?;
    let end = a.t0 + a.horizon;
    let mut rate = DecayRate {
        rho1,
        rho2,
        rho,
        fitted_b: f64::NAN,
    };
    let env = verify_envelope(&p, &rate, end)?;
    rate.fitted_b = env.b_fit;
    let dt = a.dt.unwrap_or_else(|| p.default_dt());
    let sol = solve_resolvent(&p, a.t0, end, dt)?;
    let summary = ResolventSummary {
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        tau1: a.tau1,
        t0: a.t0,
        margin: p.margin()?,
        rate,
        envelope_holds: env.holds,
    };
    let line = serde_json::to_string(&summary).expect("serializable");
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            resolvent::write_csv(BufWriter::new(file), &p, &sol, &rate, a.stride)?;
            writeln!(w, "{line}").map_err(stdout_err)?;
        }
        None => {
            resolvent::write_csv(&mut *w, &p, &sol, &rate, a.stride)?;
            eprintln!("{line}");
        }
    }
    Ok(if env.holds { EXIT_OK } else { EXIT_HYPOTHESIS })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Serialize)]
struct Parameters {
    graph: String,
    gain: String,
    noise: String,
    tau1: f64,
    tau2: f64,
    dt: f64,
    horizon: f64,
    trials: usize,
    seed: u64,
    stride: usize,
    dim: usize,
    initial: Vec<f64>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    name: &'a str,
    parameters: Parameters,
    summary: Summary,
}

fn describe_noise(noise: &NoiseModel) -> String {
    match noise {
        NoiseModel::Additive { .. } => format!("additive (max intensity {})", noise.bound()),
        NoiseModel::Multiplicative { bound, .. } => format!("multiplicative (bound {bound})"),
    }
}

/// Runs `cfg`, writing `trajectory.csv`, `stats.csv` and `summary.json` into `dir`.
pub fn run_and_write(name: &str, cfg: &SimConfig, dir: &Path, workers: usize) -> Result<(EnsembleStats, Trajectory)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let traj = simulate_trial(cfg, 0)?;
    let stats = simulate_ensemble(cfg, workers)?;
    let write = |file: &str, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Result<()> {
        let path = dir.join(file);
        let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        f(&mut out).and_then(|_| out.flush()).map_err(|e| Error::io(&path, e))
    };
    write("trajectory.csv", &|w| traj.write_csv(w))?;
    write("stats.csv", &|w| stats.write_csv(w))?;
    let record = RunRecord {
        name,
        parameters: Parameters {
            graph: cfg.graph.to_string().trim_end().replace('\n', "; "),
            gain: cfg.gain.to_string(),
            noise: describe_noise(&cfg.noise),
            tau1: cfg.tau1,
            tau2: cfg.tau2,
            dt: cfg.dt,
            horizon: cfg.horizon,
            trials: cfg.trials,
            seed: cfg.seed,
            stride: cfg.stride,
            dim: cfg.n_dim,
            initial: cfg.history.initial(),
        },
        summary: stats.summary(),
    };
    let line = serde_json::to_string(&record).expect("serializable");
    write("summary.json", &|w| writeln!(w, "{line}"))?;
    Ok((stats, traj))
}

fn apply_flags(spec: &mut ExperimentSpec, f: &RunFlags) {
    if let Some(v) = f.tau1 {
        spec.tau1 = v;
    }
    if let Some(v) = f.tau2 {
        spec.tau2 = v;
    }
    if let Some(v) = f.dt {
        spec.dt = v;
    }
    if let Some(v) = f.horizon {
        spec.horizon = v;
    }
    if let Some(v) = f.trials {
        spec.trials = v;
    }
    if let Some(v) = f.seed {
        spec.seed = v;
    }
    if let Some(v) = &f.out {
        spec.out = v.clone();
    }
    if let Some(v) = f.stride {
        spec.stride = v;
    }
}

fn report_run<W: Write>(w: &mut W, dir: &Path, stats: &EnsembleStats) -> Result<i32> {
    let s = stats.summary();
    writeln!(
        w,
        "wrote {}: final ms disagreement {:e} (initial {:e}), diverged trials {}/{}",
        dir.display(),
        s.final_ms_disagreement,
        s.initial_ms_disagreement,
        s.diverged,
        s.trials
    )
    .map_err(stdout_err)?;
    Ok(if stats.diverged > 0 { EXIT_DIVERGED } else { EXIT_OK })
}

fn cmd_simulate<W: Write>(a: &SimulateArgs, w: &mut W) -> Result<i32> {
    let mut spec = match &a.config {
        Some(path) => ExperimentSpec::read(path)?,
        None => ExperimentSpec::default(),
    };
    let cwd = PathBuf::from(".");
    if let Some(g) = &a.graph {
        spec.graph = Some(g.clone());
    }
    if let Some(g) = &a.gain {
        GainSpec::parse(g)?;
        spec.gain = Some(Sourced {
            value: g.clone(),
            base: cwd.clone(),
        });
    }
    if let Some(n) = &a.noise {
        NoiseSpec::parse(n)?;
        spec.noise = Some(Sourced {
            value: n.clone(),
            base: cwd.clone(),
        });
    }
    if let Some(x) = &a.initial {
        spec.initial = Some(
            parse_vector(x).ok_or_else(|| Error::parse("initial", 1, 1, format!("expected numbers, found '{x}'")))?,
        );
    }
    if let Some(d) = a.dim {
        spec.dim = d;
    }
    if let Some(n) = &a.name {
        spec.name = n.clone();
    }
    apply_flags(&mut spec, &a.run);
    let cfg = spec.to_sim_config()?;
    let workers = a.run.workers.unwrap_or_else(default_workers);
    let (stats, _) = run_and_write(&spec.name, &cfg, &spec.out, workers)?;
    report_run(w, &spec.out, &stats)
}

/// Scenario config with `reproduce` overrides applied.
pub fn scenario_config(scenario: Scenario, f: &RunFlags) -> SimConfig {
    let mut cfg = scenario.config();
    if let Some(v) = f.tau1 {
        cfg.tau1 = v;
    }
    if let Some(v) = f.tau2 {
        cfg.tau2 = v;
    }
    if let Some(v) = f.dt {
        cfg.dt = v;
    }
    if let Some(v) = f.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = f.trials {
        cfg.trials = v;
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = f.stride {
        cfg.stride = v;
    }
    cfg
}

fn cmd_reproduce<W: Write>(a: &ReproduceArgs, w: &mut W) -> Result<i32> {
    let scenario: Scenario = a.scenario.parse()?;
    let cfg = scenario_config(scenario, &a.run);
    let dir = a
        .run
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"))
        .join(scenario.id());
    let workers = a.run.workers.unwrap_or_else(default_workers);
    let (stats, _) = run_and_write(scenario.id(), &cfg, &dir, workers)?;
    report_run(w, &dir, &stats)
}
