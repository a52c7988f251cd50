//! Command implementations behind the `avgtrack` binary.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use avgtrack::analysis::{diagnose, tracking_error, DiagnosticRow, Summary};
use avgtrack::control::Algorithm;
use avgtrack::graph::Graph;
use avgtrack::matrix::{norm, Matrix};
use avgtrack::numerics::{is_stabilizable, lyapunov_residual};
use avgtrack::scenario::{bundled, Built, Scenario, ScenarioError, BUNDLED};
use avgtrack::sim::{run, Controller, SimError, Trajectory};
use serde::Serialize;

/// Version reported in `summary.json` and `--version`.
pub const VERSION: &str = env!("AVGTRACK_VERSION");

/// Header of `trajectory.csv` for an `n`-dimensional plant.
pub fn trajectory_header(n: usize) -> String {
    let mut h = String::from("t,kind,id");
    for k in 1..=n {
        let _ = write!(h, ",x{k}");
    }
    h.push_str(",tracking_error_norm,alpha,beta");
    h
}

pub const DIAGNOSTICS_HEADER: &str = "t,V1,V2,envelope,sum_invariant,max_tracking_error";

/// A failed command: message plus process exit code (1 numerical, 2 config).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Sim(SimError::NonFinite { .. }) => Self::runtime(e.to_string()),
            other => Self::config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NonFinite { .. } => Self::runtime(e.to_string()),
            other => Self::config(other.to_string()),
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// `scenario NAME`: the bundled config as pretty JSON.
pub fn cmd_scenario(name: &str) -> Result<String, CliError> {
    bundled(name).map(|s| s.to_json()).ok_or_else(|| {
        CliError::config(format!(
            "unknown scenario '{name}'; valid names: {}",
            BUNDLED.join(", ")
        ))
    })
}

fn fmt_matrix(m: &Matrix<f64>) -> String {
    let rows: Vec<String> = m
        .to_rows()
        .iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.6}")).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// `gains --config F`: the design report.
pub fn cmd_gains(scenario: &Scenario) -> Result<String, CliError> {
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", scenario.name);
    // run the stabilizability check on its own so the verdict is printed even
    // when the design stops there
    let a =
        Matrix::from_rows(&scenario.a).map_err(|e| CliError::config(format!("matrix A: {e}")))?;
    let b =
        Matrix::from_rows(&scenario.b).map_err(|e| CliError::config(format!("matrix B: {e}")))?;
    if a.is_square() && b.rows() == a.rows() {
        let ok = is_stabilizable(&a, &b, &scenario.numerics)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        let _ = writeln!(
            out,
            "stabilizable (A, B): {}",
            if ok { "yes" } else { "no" }
        );
    }
    let built: Built<f64> = scenario.build().map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{out}{}", err.message);
        err
    })?;
    let problem = &built.problem;
    let (p, k, c12) = match &problem.controller {
        Controller::Static(g) | Controller::Discontinuous(g) => (&g.p, &g.k, Some((g.c1, g.c2))),
        Controller::Adaptive(ap) => (&ap.p, &ap.k, None),
    };
    let plant = problem.refs.plant();
    let bt_p = &plant.b().transpose() * p;
    let gamma = &bt_p.transpose() * &bt_p;
    let closed = plant.a() - &(plant.b() * &bt_p);
    let residual = lyapunov_residual(&closed, p, &(&built.q + &gamma));
    let consts = avgtrack::analysis::theorem_constants(
        p,
        &built.q,
        &problem.graph,
        problem.refs.input_bound(),
        None,
        built.analysis.overrides,
        &built.numerics,
    )
    .map_err(|e| CliError::runtime(e.to_string()))?;
    let _ = writeln!(out, "step 1: P = {}", fmt_matrix(p));
    let _ = writeln!(out, "        ARE residual = {residual:.3e}");
    let _ = writeln!(out, "        K = -B^T P = {}", fmt_matrix(k));
    let _ = writeln!(out, "        Gamma = P B B^T P = {}", fmt_matrix(&gamma));
    let _ = writeln!(out, "step 2: lambda2 = {:.6}", consts.lambda2);
    let n = problem.graph.n_nodes();
    let f0 = problem.refs.input_bound();
    match c12 {
        Some((c1, c2)) => {
            let _ = writeln!(out, "        c1 = {c1:.6}");
            let _ = writeln!(out, "step 3: f0 = {f0:.6}, N = {n}, c2 = {c2:.6}");
        }
        None => {
            let _ = writeln!(
                out,
                "        alpha_bar = {:.6} (adaptive: analysis constant)",
                consts.alpha_bar
            );
            let _ = writeln!(
                out,
                "step 3: f0 = {f0:.6}, N = {n}, beta_bar = {:.6} (adaptive: analysis constant)",
                consts.beta_bar
            );
        }
    }
    let _ = writeln!(
        out,
        "gamma = lambda_min(Q)/lambda_max(P) = {:.6}",
        consts.gamma
    );
    Ok(out)
}

/// Overrides from the command line.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<u64>,
}

impl RunOverrides {
    pub fn apply(&self, s: &mut Scenario) {
        if let Some(dt) = self.dt {
            s.sim.dt = dt;
        }
        if let Some(t) = self.t_end {
            s.sim.t_end = t;
        }
        if let Some(seed) = self.seed {
            s.seed = Some(seed);
        }
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    scenario: &'a str,
    version: &'a str,
    #[serde(flatten)]
    summary: &'a Summary,
    config: &'a Scenario,
}

// `{:?}` keeps full precision and switches to exponent form for tiny values
fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Writes the trajectory in long format: one `agent` row per agent and
/// sample, plus one `edge` row per edge and sample for adaptive runs.
pub fn write_trajectory(w: &mut impl Write, traj: &Trajectory<f64>, g: &Graph) -> io::Result<()> {
    let n = traj
        .states
        .first()
        .and_then(|s| s.x.first())
        .map_or(0, Vec::len);
    writeln!(w, "{}", trajectory_header(n))?;
    let blanks = ",".repeat(n);
    for (state, refs) in traj.states.iter().zip(&traj.references) {
        let err = tracking_error(&state.x, refs);
        for (i, (xi, ei)) in state.x.iter().zip(&err).enumerate() {
            write!(w, "{:?},agent,{i}", state.t)?;
            for v in xi {
                write!(w, ",{v:?}")?;
            }
            writeln!(w, ",{:?},,", norm(ei))?;
        }
        if let Some(gains) = &state.gains {
            for (e, &(i, j)) in g.edges().iter().enumerate() {
                writeln!(
                    w,
                    "{:?},edge,{i}-{j}{blanks},,{:?},{:?}",
                    state.t, gains.alpha[e], gains.beta[e]
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_diagnostics(w: &mut impl Write, rows: &[DiagnosticRow<f64>]) -> io::Result<()> {
    writeln!(w, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:?},{:?},{},{},{:?},{:?}",
            r.t,
            r.v1,
            opt(r.v2),
            opt(r.envelope),
            r.sum_invariant,
            r.max_tracking_error
        )?;
    }
    Ok(())
}

/// Runs one scenario and writes `trajectory.csv`, `diagnostics.csv` and
/// `summary.json` into `dir`.
pub fn run_one(scenario: &Scenario, dir: &Path) -> Result<Summary, CliError> {
    let built: Built<f64> = scenario.build()?;
    let traj = run(&built.problem, &built.sim)?;
    let diag = diagnose(
        &traj,
        &built.problem,
        &built.q,
        &built.analysis,
        &built.numerics,
    )
    .map_err(|e| CliError::runtime(e.to_string()))?;
    let io_err = |e: io::Error| CliError::runtime(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io_err)?;
    let create = |name: &str| {
        fs::File::create(dir.join(name))
            .map(BufWriter::new)
            .map_err(io_err)
    };

    let mut f = create("trajectory.csv")?;
    write_trajectory(&mut f, &traj, &built.problem.graph).map_err(io_err)?;
    f.flush().map_err(io_err)?;

    let mut f = create("diagnostics.csv")?;
    write_diagnostics(&mut f, &diag.rows).map_err(io_err)?;
    f.flush().map_err(io_err)?;

    let file = SummaryFile {
        scenario: &scenario.name,
        version: VERSION,
        summary: &diag.summary,
        config: scenario,
    };
    let mut f = create("summary.json")?;
    serde_json::to_writer_pretty(&mut f, &file).map_err(|e| CliError::runtime(e.to_string()))?;
    writeln!(f).map_err(io_err)?;
    f.flush().map_err(io_err)?;
    Ok(diag.summary)
}

/// Worker count for multi-config runs: `AVGTRACK_THREADS` if set, else the
/// available parallelism, never more than the number of jobs.
pub fn thread_count(jobs: usize) -> usize {
    let requested = std::env::var("AVGTRACK_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let default = std::thread::available_parallelism().map_or(1, usize::from);
    requested.unwrap_or(default).min(jobs).max(1)
}

/// One line of the run report.
pub fn summary_line(s: &Summary, dir: &Path) -> String {
    let mut line = format!(
        "{} -> {}: max final tracking error {:.3e}, sup |S| {:.3e}, envelope violations {}",
        s.algorithm,
        dir.display(),
        s.max_final_tracking_error,
        s.sup_sum_invariant,
        s.envelope_violations
    );
    if s.algorithm == Algorithm::Adaptive {
        match s.omega2_radius {
            Some(r) => {
                let _ = write!(line, ", omega2 radius {r:.4}");
            }
            None => line.push_str(", omega2 radius undefined"),
        }
    }
    line
}

/// `run --config F... --out D`. A single config writes into `D`; several
/// configs write into `D/<index>-<name>` and run in parallel.
pub fn cmd_run(
    configs: &[PathBuf],
    out: &Path,
    overrides: RunOverrides,
) -> Result<Vec<String>, CliError> {
    if configs.is_empty() {
        return Err(CliError::config("no --config given"));
    }
    let mut jobs = Vec::with_capacity(configs.len());
    for (k, path) in configs.iter().enumerate() {
        let mut s = load_scenario(path)?;
        overrides.apply(&mut s);
        let dir = if configs.len() == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("{k}-{}", sanitize(&s.name)))
        };
        jobs.push((s, dir));
    }
    let results: Vec<Mutex<Option<Result<String, CliError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..thread_count(jobs.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((s, dir)) = jobs.get(k) else { break };
                let r = run_one(s, dir).map(|sum| summary_line(&sum, dir));
                *results[k].lock().expect("result slot") = Some(r);
            });
        }
    });
    let mut lines = Vec::new();
    let mut failures: Vec<CliError> = Vec::new();
    for (slot, (s, _)) in results.into_iter().zip(&jobs) {
        match slot.into_inner().expect("result slot").expect("job ran") {
            Ok(line) => lines.push(format!("{}: {line}", s.name)),
            Err(e) => failures.push(CliError {
                code: e.code,
                message: format!("{}: {}", s.name, e.message),
            }),
        }
    }
    if failures.is_empty() {
        return Ok(lines);
    }
    let code = failures.iter().map(|e| e.code).max().unwrap_or(1);
    let message = failures
        .iter()
        .map(|e| e.message.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    Err(CliError { code, message })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
