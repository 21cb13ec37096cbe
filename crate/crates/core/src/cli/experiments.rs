//! One driver per CLI verb. Each writes its CSVs plus `summary.json` into
//! the output directory.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, ExperimentConfig, Method};
use super::output::{num, state_table, OutDir, Summary, Table};
use crate::analytic::{hbar_pendulum, hbar_separable_2d, pendulum_reference, FLAT_EDGE};
use crate::diagnostics::{
    error_report, lyapunov_series, max_increase, monotonicity_gap, pair_distance_series, pair_scale,
    MonotoneProbe, Reference,
};
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::hamiltonian::{DiscreteState, HamiltonianSpec, Potential};
use crate::hrf::{cosine_initial, default_initial, integrate_hrf, integrate_hrf_until, FlowConfig, Trajectory};
use crate::newton::{newton_solve_with, step_inner, NewtonConfig, SolveResult};
use crate::operators::{JacobianKind, PenalizedParams, Problem};
use crate::par::Execution;

/// Owned problem data; borrow a [`Problem`] from it with [`Instance::problem`].
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: HamiltonianSpec,
    pub grid: TorusGrid,
    pub params: PenalizedParams,
}

impl Instance {
    pub fn new(preset: Potential, p: &[f64], n: usize, k: f64) -> Result<Self> {
        let grid = TorusGrid::new(preset.dim(), n)?;
        let spec = HamiltonianSpec::new(preset, p.to_vec())?;
        spec.check_grid(&grid)?;
        Ok(Self {
            spec,
            grid,
            params: PenalizedParams::new(k)?,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::new(cfg.hamiltonian, &cfg.p, cfg.n, cfg.k)
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem {
            spec: &self.spec,
            grid: &self.grid,
            params: self.params,
        }
    }
}

fn newton_config(cfg: &ExperimentConfig) -> NewtonConfig {
    NewtonConfig {
        tau: cfg.tau,
        kappa: cfg.kappa,
        residual_tol: cfg.residual_tol,
        max_iters: cfg.max_iters,
    }
}

fn flow_config(cfg: &ExperimentConfig, t_end: f64) -> FlowConfig {
    FlowConfig::new(t_end)
        .with_uniform_samples(cfg.samples)
        .with_tolerance(cfg.rel_tol)
        .with_abs_tolerance(cfg.abs_tol)
}

/// Analytic `H-(P)` where one is known.
pub fn analytic_hbar(preset: Potential, p: &[f64]) -> Option<f64> {
    match preset {
        Potential::MinusSin => Some(hbar_pendulum(p[0])),
        Potential::TwoCos => Some(hbar_separable_2d([p[0], p[1]])),
        _ => None,
    }
}

fn newton_status(r: &SolveResult) -> &'static str {
    if r.converged {
        "converged"
    } else {
        "not_converged"
    }
}

fn base_summary(cfg: &ExperimentConfig, method: &str) -> Summary {
    Summary {
        experiment: cfg.experiment.name().to_string(),
        preset: cfg.hamiltonian.name().to_string(),
        p: cfg.p.clone(),
        k: cfg.k,
        n: cfg.n.pow(cfg.dimension() as u32),
        n_per_dim: cfg.n,
        method: method.to_string(),
        hbar: None,
        mass_drift: None,
        min_density: None,
        status: "ok".into(),
        hbar_newton: None,
        hbar_hrf: None,
        iterations: None,
        residual: None,
        steps: None,
        wall_seconds: 0.0,
        files: Vec::new(),
        error: None,
    }
}

fn file_name(p: std::path::PathBuf) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn residual_table(r: &SolveResult) -> Table {
    let mut t = Table::new(&["iteration", "residual", "hbar", "mass", "min_density"]);
    for i in 0..r.residuals.len() {
        t.push(vec![
            i.to_string(),
            num(r.residuals[i]),
            num(r.hbar_history[i]),
            num(r.mass_history[i]),
            num(r.min_density_history[i]),
        ]);
    }
    t
}

fn trajectory_table(traj: &Trajectory, phi: &[f64]) -> Table {
    let mut t = Table::new(&["t", "hbar", "mass", "mean_u", "min_density", "phi"]);
    for i in 0..traj.times.len() {
        t.push(vec![
            num(traj.times[i]),
            num(traj.hbar_series[i]),
            num(traj.mass_series[i]),
            num(traj.mean_value_series[i]),
            num(traj.min_density_series[i]),
            num(phi.get(i).copied().unwrap_or(f64::NAN)),
        ]);
    }
    t
}

/// Result of one driver: the summary it wrote, and an error when a solver failed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub failure: Option<Error>,
}

/// Dispatches on `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let exec = Execution::default();
    match cfg.experiment {
        Experiment::Solve => run_solve(cfg),
        Experiment::Sweep => run_sweep(cfg, exec),
        Experiment::Kconv => run_kconv(cfg, exec),
        Experiment::Bench => run_bench(cfg),
        Experiment::Stability => run_stability(cfg),
        Experiment::Monotonicity => run_monotonicity(cfg, exec),
    }
}

fn finish(out: &OutDir, mut summary: Summary, failure: Option<Error>, start: Instant) -> Result<RunOutcome> {
    summary.wall_seconds = start.elapsed().as_secs_f64();
    if let Some(e) = &failure {
        summary.status = "failed".into();
        summary.error = Some(e.to_string());
    }
    out.write_json("summary.json", &summary)?;
    Ok(RunOutcome { summary, failure })
}

/// Single `(P, k)` instance with `summary.json`, `residuals.csv` and/or
/// `trajectory.csv`, and `final_state.csv`.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let inst = Instance::from_config(cfg)?;
    let prob = inst.problem();
    let out = OutDir::create(&cfg.out)?;
    let mut summary = base_summary(cfg, cfg.method.name());
    let init = default_initial(&inst.grid);

    let newton = if cfg.method.runs_newton() || cfg.method.runs_hrf() {
        Some(newton_solve_with(&prob, &init, &newton_config(cfg), Execution::default()))
    } else {
        None
    };
    let mut failure = None;
    let mut root = None;
    match newton {
        Some(Ok(r)) => {
            if cfg.method.runs_newton() {
                summary.files.push(file_name(out.write_table("residuals.csv", &residual_table(&r))?));
                summary.files.push(file_name(out.write_table("final_state.csv", &state_table(&inst.grid, &r.state))?));
                summary.hbar = Some(r.hbar);
                summary.hbar_newton = Some(r.hbar);
                summary.mass_drift = Some(r.mass_drift());
                summary.min_density = Some(
                    r.min_density_history.iter().copied().fold(f64::INFINITY, f64::min),
                );
                summary.iterations = Some(r.iterations);
                summary.residual = r.residuals.last().copied();
                summary.status = newton_status(&r).into();
            }
            root = Some(r.state);
        }
        Some(Err(e)) if cfg.method.runs_newton() => failure = Some(e),
        _ => {}
    }

    if cfg.method.runs_hrf() && failure.is_none() {
        match integrate_hrf(&prob, &init, &flow_config(cfg, cfg.t_end)) {
            Ok(traj) => {
                // phi is measured against the Newton root when one exists,
                // otherwise against the terminal state.
                let reference = root.clone().unwrap_or_else(|| traj.final_state().clone());
                let phi = lyapunov_series(&traj, &reference)?;
                summary.files.push(file_name(out.write_table("trajectory.csv", &trajectory_table(&traj, &phi))?));
                let name = if cfg.method == Method::Both { "final_state_hrf.csv" } else { "final_state.csv" };
                summary.files.push(file_name(out.write_table(name, &state_table(&inst.grid, traj.final_state()))?));
                summary.hbar_hrf = Some(traj.final_hbar());
                summary.steps = Some(traj.stats.accepted + traj.stats.rejected);
                if cfg.method == Method::Hrf {
                    summary.hbar = Some(traj.final_hbar());
                    summary.mass_drift = Some(traj.max_mass_drift());
                    summary.min_density = Some(traj.min_density());
                    summary.status = "completed".into();
                } else {
                    let md = summary.mass_drift.unwrap_or(0.0).max(traj.max_mass_drift());
                    summary.mass_drift = Some(md);
                    let mn = summary.min_density.unwrap_or(f64::INFINITY).min(traj.min_density());
                    summary.min_density = Some(mn);
                }
            }
            Err(e) => failure = Some(e),
        }
    }
    finish(&out, summary, failure, start)
}

#[derive(Debug, Clone)]
struct SweepRow {
    p: Vec<f64>,
    method: Method,
    hbar: f64,
    status: String,
}

fn solve_one(
    inst: &Instance,
    method: Method,
    init: &DiscreteState,
    cfg: &ExperimentConfig,
) -> Result<(f64, DiscreteState, String)> {
    let prob = inst.problem();
    match method {
        Method::Newton => {
            let r = newton_solve_with(&prob, init, &newton_config(cfg), Execution::Sequential)?;
            Ok((r.hbar, r.state.clone(), newton_status(&r).into()))
        }
        _ => {
            let fc = FlowConfig::new(cfg.t_end).with_tolerance(cfg.rel_tol).with_abs_tolerance(cfg.abs_tol);
            let traj = integrate_hrf(&prob, init, &fc)?;
            Ok((traj.final_hbar(), traj.final_state().clone(), "completed".into()))
        }
    }
}

fn methods(m: Method) -> Vec<Method> {
    match m {
        Method::Both => vec![Method::Newton, Method::Hrf],
        other => vec![other],
    }
}

/// `H~^k` along a line (1D) or square (2D) of momenta, `hbar_curve.csv`.
///
/// Points are split into fixed chunks of `sweep_chunk`; each chunk starts
/// from the default datum and warm-starts along the chunk, so the output does
/// not depend on the execution mode.
pub fn run_sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutcome> {
    let start = Instant::now();
    let out = OutDir::create(&cfg.out)?;
    let points = cfg.sweep_points();
    let chunks: Vec<&[Vec<f64>]> = points.chunks(cfg.sweep_chunk).collect();
    let mut jobs = Vec::new();
    for m in methods(cfg.method) {
        for c in &chunks {
            jobs.push((m, *c));
        }
    }
    let results: Vec<Result<Vec<SweepRow>>> = exec.map_slice(&jobs, |(method, chunk)| {
        let mut rows = Vec::with_capacity(chunk.len());
        let mut warm: Option<DiscreteState> = None;
        for p in chunk.iter() {
            let inst = Instance::new(cfg.hamiltonian, p, cfg.n, cfg.k)?;
            let cold = default_initial(&inst.grid);
            // A flat-region root carries near-zero densities that the next
            // momentum cannot recover from, so the warm start is blended with
            // the uniform density and a failed warm solve is retried cold.
            let attempt = match &warm {
                Some(w) => {
                    let blended = DiscreteState {
                        m: w.m.iter().map(|m| 0.5 * (m + 1.0)).collect(),
                        u: w.u.clone(),
                    };
                    solve_one(&inst, *method, &blended, cfg).or_else(|_| {
                        solve_one(&inst, *method, &cold, cfg).map(|(h, s, st)| (h, s, format!("{st} (cold retry)")))
                    })
                }
                None => solve_one(&inst, *method, &cold, cfg),
            };
            match attempt {
                Ok((hbar, state, status)) => {
                    warm = Some(state);
                    rows.push(SweepRow { p: p.clone(), method: *method, hbar, status });
                }
                Err(e) => rows.push(SweepRow {
                    p: p.clone(),
                    method: *method,
                    hbar: f64::NAN,
                    status: format!("failed: {e}"),
                }),
            }
        }
        Ok(rows)
    });

    let d = cfg.dimension();
    let mut header: Vec<String> = (1..=d).map(|i| if d == 1 { "P".into() } else { format!("P{i}") }).collect();
    header.extend(["method", "hbar", "analytic", "gap", "status"].map(String::from));
    let mut table = Table::new(&header);
    let mut failed = 0;
    for chunk in results {
        for r in chunk? {
            let analytic = analytic_hbar(cfg.hamiltonian, &r.p).unwrap_or(f64::NAN);
            if r.status.starts_with("failed") {
                failed += 1;
            }
            let mut row: Vec<String> = r.p.iter().map(|v| num(*v)).collect();
            row.push(r.method.name().into());
            row.push(num(r.hbar));
            row.push(num(analytic));
            row.push(num((r.hbar - analytic).abs()));
            row.push(r.status);
            table.push(row);
        }
    }
    let mut summary = base_summary(cfg, cfg.method.name());
    summary.files.push(file_name(out.write_table("hbar_curve.csv", &table)?));
    summary.status = if failed == 0 { "ok".into() } else { format!("{failed} rows failed") };
    finish(&out, summary, None, start)
}

#[derive(Debug, Clone)]
struct KRun {
    k: f64,
    method: Method,
    state: DiscreteState,
    hbar: f64,
    status: String,
}

/// k-convergence table `kconv.csv`.
pub fn run_kconv(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutcome> {
    let start = Instant::now();
    let out = OutDir::create(&cfg.out)?;
    let mut jobs = Vec::new();
    for m in methods(cfg.method) {
        for &k in &cfg.k_list {
            jobs.push((m, k));
        }
    }
    let runs: Vec<Result<KRun>> = exec.map_slice(&jobs, |&(method, k)| {
        let inst = Instance::new(cfg.hamiltonian, &cfg.p, cfg.n, k)?;
        let init = default_initial(&inst.grid);
        let (hbar, state, status) = solve_one(&inst, method, &init, cfg)?;
        Ok(KRun { k, method, state, hbar, status })
    });
    let runs: Vec<KRun> = runs.into_iter().collect::<Result<_>>()?;

    let grid = TorusGrid::new(cfg.dimension(), cfg.n)?;
    let on_edge = cfg.hamiltonian == Potential::MinusSin && (cfg.p[0].abs() - FLAT_EDGE).abs() <= 1e-9;
    let analytic = if on_edge {
        let r = pendulum_reference(cfg.p[0], &grid)?;
        Some(Reference {
            u: r.corrector.expect("corrector exists on the flat edge"),
            m: None,
            hbar: r.hbar_star,
        })
    } else {
        None
    };

    let d = cfg.dimension();
    let mut header = vec!["method".to_string(), "k".into(), "hbar".into(), "u_error".into(), "m_error".into(), "hbar_error".into()];
    if d == 1 {
        header.push("argmax_x".into());
    } else {
        header.extend(["argmax_x1".into(), "argmax_x2".into()]);
    }
    header.push("status".into());
    let mut table = Table::new(&header);
    for m in methods(cfg.method) {
        let mine: Vec<&KRun> = runs.iter().filter(|r| r.method == m).collect();
        let reference = match &analytic {
            Some(r) => r.clone(),
            None => {
                let top = mine.last().expect("k_list is non-empty");
                Reference::from_state(&top.state, top.hbar)
            }
        };
        for r in mine {
            let inst = Instance::new(cfg.hamiltonian, &cfg.p, cfg.n, r.k)?;
            let rep = error_report(&inst.problem(), &r.state, &reference)?;
            let imax = argmax(&r.state.m);
            let x = grid.point(imax);
            let mut row = vec![
                m.name().to_string(),
                num(r.k),
                num(r.hbar),
                num(rep.u_error),
                num(rep.m_error.unwrap_or(f64::NAN)),
                num(rep.hbar_error),
            ];
            row.extend(x[..d].iter().map(|v| num(*v)));
            row.push(r.status.clone());
            table.push(row);
        }
    }
    let mut summary = base_summary(cfg, cfg.method.name());
    summary.files.push(file_name(out.write_table("kconv.csv", &table)?));
    finish(&out, summary, None, start)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a })
        .0
}

/// Time-to-agreement measurements for one grid size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub method: String,
    pub hbar: f64,
    /// Newton iterations, or integrator steps (accepted + rejected).
    pub iterations: usize,
    /// `F-` evaluations; a finite-difference Jacobian counts its columns.
    pub evaluations: usize,
    pub wall_seconds: f64,
    /// Flow time reached; for Newton `iterations / tau`.
    pub pseudo_time: f64,
    pub reached: bool,
}

/// Benchmark value from a long flow run, then the cost for each method to
/// come within `epsilon` of it.
pub fn bench_one(cfg: &ExperimentConfig, n: usize) -> Result<Vec<BenchRow>> {
    let inst = Instance::new(cfg.hamiltonian, &cfg.p, n, cfg.k)?;
    let prob = inst.problem();
    let init = default_initial(&inst.grid);
    let fc = FlowConfig::new(cfg.bench_t).with_tolerance(cfg.rel_tol).with_abs_tolerance(cfg.abs_tol);

    let t0 = Instant::now();
    let long = integrate_hrf(&prob, &init, &fc)?;
    let bench = long.final_hbar();
    let mut rows = vec![BenchRow {
        n,
        method: "benchmark".into(),
        hbar: bench,
        iterations: long.stats.accepted + long.stats.rejected,
        evaluations: long.stats.rhs_evals,
        wall_seconds: t0.elapsed().as_secs_f64(),
        pseudo_time: cfg.bench_t,
        reached: true,
    }];

    // Sampling every 0.1 time units bounds the detection lag.
    let dense = FlowConfig {
        sample_times: (1..)
            .map(|i| 0.1 * i as f64)
            .take_while(|t| *t < cfg.bench_t)
            .collect(),
        ..fc.clone()
    };
    let eps = cfg.epsilon;
    let t1 = Instant::now();
    let tr = integrate_hrf_until(&prob, &init, &dense, |_, h| (h - bench).abs() < eps)?;
    let hrf_wall = t1.elapsed().as_secs_f64();
    let h_end = tr.final_hbar();
    rows.push(BenchRow {
        n,
        method: "hrf".into(),
        hbar: h_end,
        iterations: tr.stats.accepted + tr.stats.rejected,
        evaluations: tr.stats.rhs_evals,
        wall_seconds: hrf_wall,
        pseudo_time: *tr.times.last().expect("non-empty"),
        reached: (h_end - bench).abs() < eps,
    });

    let nc = newton_config(cfg);
    nc.validate()?;
    let t2 = Instant::now();
    let mut state = init.clone();
    let mut iters = 0;
    let mut evals = 0;
    let mut h = prob.effective_h(&state)?;
    while (h - bench).abs() >= eps && iters < cfg.max_iters {
        let f = prob.f_bar(&state)?;
        evals += 1;
        let (next, kind) = step_inner(&prob, &state, &nc, Execution::Sequential, &f)?;
        evals += match kind {
            Some(JacobianKind::FiniteDifference) => 4 * prob.len(),
            _ => 0,
        };
        state = next;
        iters += 1;
        h = prob.effective_h(&state)?;
    }
    rows.push(BenchRow {
        n,
        method: "newton".into(),
        hbar: h,
        iterations: iters,
        evaluations: evals,
        wall_seconds: t2.elapsed().as_secs_f64(),
        pseudo_time: iters as f64 / nc.tau.max(f64::MIN_POSITIVE),
        reached: (h - bench).abs() < eps,
    });
    Ok(rows)
}

/// `bench.csv`; grid sizes run one after another so timings do not compete.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let out = OutDir::create(&cfg.out)?;
    let mut table = Table::new(&[
        "N", "method", "hbar", "iterations", "evaluations", "wall_seconds", "pseudo_time", "reached",
    ]);
    let mut failure = None;
    for &n in &cfg.n_list {
        match bench_one(cfg, n) {
            Ok(rows) => {
                for r in rows {
                    table.push(vec![
                        r.n.to_string(),
                        r.method,
                        num(r.hbar),
                        r.iterations.to_string(),
                        r.evaluations.to_string(),
                        num(r.wall_seconds),
                        num(r.pseudo_time),
                        r.reached.to_string(),
                    ]);
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let mut summary = base_summary(cfg, "both");
    summary.files.push(file_name(out.write_table("bench.csv", &table)?));
    finish(&out, summary, failure, start)
}

/// Nearly singular regime: per-iterate and per-sample positivity, `stability.csv`.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let inst = Instance::from_config(cfg)?;
    let prob = inst.problem();
    let out = OutDir::create(&cfg.out)?;
    let init = default_initial(&inst.grid);
    let mut table = Table::new(&["method", "index", "time", "hbar", "mass", "min_density"]);
    let mut summary = base_summary(cfg, cfg.method.name());
    let mut failure = None;
    let mut min_m = f64::INFINITY;
    let mut drift: f64 = 0.0;

    if cfg.method.runs_newton() {
        match newton_solve_with(&prob, &init, &newton_config(cfg), Execution::default()) {
            Ok(r) => {
                for i in 0..r.residuals.len() {
                    table.push(vec![
                        "newton".into(),
                        i.to_string(),
                        num(i as f64 / cfg.tau.max(f64::MIN_POSITIVE)),
                        num(r.hbar_history[i]),
                        num(r.mass_history[i]),
                        num(r.min_density_history[i]),
                    ]);
                    min_m = min_m.min(r.min_density_history[i]);
                    drift = drift.max((r.mass_history[i] - 1.0).abs());
                }
                summary.hbar_newton = Some(r.hbar);
                summary.hbar = Some(r.hbar);
                summary.iterations = Some(r.iterations);
                summary.residual = r.residuals.last().copied();
                summary.status = newton_status(&r).into();
            }
            Err(e) => failure = Some(e),
        }
    }
    if cfg.method.runs_hrf() && failure.is_none() {
        match integrate_hrf(&prob, &init, &flow_config(cfg, cfg.t_end)) {
            Ok(tr) => {
                for i in 0..tr.times.len() {
                    table.push(vec![
                        "hrf".into(),
                        i.to_string(),
                        num(tr.times[i]),
                        num(tr.hbar_series[i]),
                        num(tr.mass_series[i]),
                        num(tr.min_density_series[i]),
                    ]);
                }
                min_m = min_m.min(tr.min_density());
                drift = drift.max(tr.max_mass_drift());
                summary.hbar_hrf = Some(tr.final_hbar());
                summary.steps = Some(tr.stats.accepted + tr.stats.rejected);
                if cfg.method == Method::Hrf {
                    summary.hbar = Some(tr.final_hbar());
                    summary.status = "completed".into();
                }
            }
            Err(e) => failure = Some(e),
        }
    }
    if min_m.is_finite() {
        summary.min_density = Some(min_m);
        summary.mass_drift = Some(drift);
    }
    summary.files.push(file_name(out.write_table("stability.csv", &table)?));
    finish(&out, summary, failure, start)
}

/// The two flow trajectories of the non-monotonicity example and their diagnostics.
#[derive(Debug, Clone)]
pub struct PairRun {
    pub a: Trajectory,
    pub b: Trajectory,
    pub root: DiscreteState,
    pub distance: Vec<f64>,
    pub fbar_gap: Vec<f64>,
    pub phi_a: Vec<f64>,
    pub phi_b: Vec<f64>,
}

/// Initial pair `m = 1 + 0.2 cos, u = cos` and `m = 1 + 0.7 cos, u = sin`.
pub fn pair_initials(grid: &TorusGrid) -> (DiscreteState, DiscreteState) {
    use std::f64::consts::PI;
    (
        cosine_initial(grid, 0.2, |x| (2.0 * PI * x).cos()),
        cosine_initial(grid, 0.7, |x| (2.0 * PI * x).sin()),
    )
}

pub fn pair_run(cfg: &ExperimentConfig) -> Result<PairRun> {
    let inst = Instance::from_config(cfg)?;
    let prob = inst.problem();
    let (ia, ib) = pair_initials(&inst.grid);
    let fc = flow_config(cfg, cfg.t_end);
    let a = integrate_hrf(&prob, &ia, &fc)?;
    let b = integrate_hrf(&prob, &ib, &fc)?;
    // The root is polished from the end of the first trajectory, where the
    // iteration no longer has to cross the strongly non-uniform transient.
    let root = newton_solve_with(&prob, a.final_state(), &newton_config(cfg), Execution::default())?;
    let distance = pair_distance_series(&a, &b)?;
    let fbar_gap = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| monotonicity_gap(MonotoneProbe::Bar, &prob, sa, sb))
        .collect::<Result<Vec<_>>>()?;
    let phi_a = lyapunov_series(&a, &root.state)?;
    let phi_b = lyapunov_series(&b, &root.state)?;
    Ok(PairRun {
        a,
        b,
        root: root.state,
        distance,
        fbar_gap,
        phi_a,
        phi_b,
    })
}

/// Worst normalized `F~` monotonicity gap over random admissible pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSuite {
    pub pairs: usize,
    /// `min <F~(a)-F~(b), a-b> / scale`.
    pub min_scaled_gap: f64,
    pub violations: usize,
}

fn random_admissible(rng: &mut ChaCha8Rng, n: usize) -> DiscreteState {
    let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..3.0)).collect();
    let mean = m.iter().sum::<f64>() / n as f64;
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ubar = u.iter().sum::<f64>() / n as f64;
    DiscreteState {
        m: m.iter().map(|v| v / mean).collect(),
        u: u.iter().map(|v| v - ubar).collect(),
    }
}

/// `pairs` random pairs for one preset; pair `i` uses its own seeded stream.
pub fn random_pair_suite(preset: Potential, n: usize, k: f64, pairs: usize, seed: u64, exec: Execution) -> Result<PairSuite> {
    let gaps: Vec<Result<f64>> = exec.map_indices(pairs, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(i as u64));
        let p: Vec<f64> = (0..preset.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let inst = Instance::new(preset, &p, n, k)?;
        let len = inst.grid.len();
        let a = random_admissible(&mut rng, len);
        let b = random_admissible(&mut rng, len);
        let gap = monotonicity_gap(MonotoneProbe::Tilde, &inst.problem(), &a, &b)?;
        Ok(gap / pair_scale(&a, &b))
    });
    let gaps: Vec<f64> = gaps.into_iter().collect::<Result<_>>()?;
    Ok(PairSuite {
        pairs,
        min_scaled_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        violations: gaps.iter().filter(|g| **g < -1e-10).count(),
    })
}

/// `monotonicity.csv` (the trajectory pair) and `monotone_pairs.csv`
/// (random `F~` pairs for every preset).
pub fn run_monotonicity(cfg: &ExperimentConfig, exec: Execution) -> Result<RunOutcome> {
    let start = Instant::now();
    let out = OutDir::create(&cfg.out)?;
    let mut summary = base_summary(cfg, "hrf");

    let mut suite = Table::new(&["preset", "pairs", "min_scaled_gap", "violations"]);
    for preset in Potential::ALL {
        let n = if preset.dim() == 1 { cfg.n } else { cfg.n.min(8) };
        let s = random_pair_suite(preset, n, cfg.k, cfg.pairs, cfg.seed, exec)?;
        suite.push(vec![
            preset.name().into(),
            s.pairs.to_string(),
            num(s.min_scaled_gap),
            s.violations.to_string(),
        ]);
    }
    summary.files.push(file_name(out.write_table("monotone_pairs.csv", &suite)?));

    let failure = match pair_run(cfg) {
        Ok(run) => {
            let mut t = Table::new(&["t", "distance", "fbar_gap", "phi_a", "phi_b"]);
            for i in 0..run.a.times.len() {
                t.push(vec![
                    num(run.a.times[i]),
                    num(run.distance[i]),
                    num(run.fbar_gap[i]),
                    num(run.phi_a[i]),
                    num(run.phi_b[i]),
                ]);
            }
            summary.files.push(file_name(out.write_table("monotonicity.csv", &t)?));
            summary.status = format!(
                "distance max increase {:.3e}; phi max increase {:.3e}",
                max_increase(&run.distance),
                max_increase(&run.phi_a).max(max_increase(&run.phi_b))
            );
            None
        }
        Err(e) => Some(e),
    };
    finish(&out, summary, failure, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_where_known() {
        assert_eq!(analytic_hbar(Potential::MinusSin, &[0.5]), Some(1.0));
        assert!(analytic_hbar(Potential::SinSin, &[0.5, 0.5]).is_none());
        let v = analytic_hbar(Potential::TwoCos, &[1.5, 2.5]).unwrap();
        assert!((v - 4.409966).abs() < 1e-6);
    }

    #[test]
    fn argmax_picks_first_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
    }

    #[test]
    fn random_suite_is_mode_independent() {
        let a = random_pair_suite(Potential::MinusSin, 9, 50.0, 40, 3, Execution::Sequential).unwrap();
        let b = random_pair_suite(Potential::MinusSin, 9, 50.0, 40, 3, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.violations, 0);
    }
}
