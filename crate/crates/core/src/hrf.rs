//! Discrete Hessian Riemannian flow `d(M, U)/dt = -F-(M, U)`, integrated in
//! log coordinates `(W, U)` with `M = e^W`.

use std::f64::consts::PI;

use crate::diagnostics::lyapunov;
use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::hamiltonian::DiscreteState;
use crate::ode::{DormandPrince, OdeStats, StepControl, Tolerances};
use crate::operators::{LogState, Problem};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Output checkpoints in `[0, t_end]`; `0` and `t_end` are always sampled.
    pub sample_times: Vec<f64>,
    pub max_steps: usize,
    pub initial_step: f64,
    /// Root used for the Lyapunov series, when known.
    pub lyapunov_reference: Option<DiscreteState>,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            t_end: 40.0,
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            sample_times: Vec::new(),
            max_steps: 50_000_000,
            initial_step: 1e-3,
            lyapunov_reference: None,
        }
    }
}

impl FlowConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            ..Self::default()
        }
    }

    /// `count` evenly spaced samples over `(0, t_end]`.
    pub fn with_uniform_samples(mut self, count: usize) -> Self {
        self.sample_times = (1..=count)
            .map(|i| self.t_end * i as f64 / count as f64)
            .collect();
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self.abs_tol = tol;
        self
    }

    pub fn with_abs_tolerance(mut self, tol: f64) -> Self {
        self.abs_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {}", self.t_end)));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn checkpoints(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .sample_times
            .iter()
            .copied()
            .filter(|t| *t > 0.0 && *t < self.t_end)
            .collect();
        ts.push(self.t_end);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Sampled flow trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiscreteState>,
    pub hbar_series: Vec<f64>,
    pub mass_series: Vec<f64>,
    pub mean_value_series: Vec<f64>,
    pub min_density_series: Vec<f64>,
    /// Empty unless a Lyapunov reference was supplied.
    pub lyapunov_series: Vec<f64>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn final_state(&self) -> &DiscreteState {
        self.states.last().expect("trajectory always holds the initial sample")
    }

    pub fn final_hbar(&self) -> f64 {
        *self.hbar_series.last().expect("non-empty")
    }

    pub fn max_mass_drift(&self) -> f64 {
        self.mass_series.iter().fold(0.0, |a, m| a.max((m - 1.0).abs()))
    }

    pub fn max_mean_value_drift(&self) -> f64 {
        let u0 = self.mean_value_series[0];
        self.mean_value_series.iter().fold(0.0, |a, m| a.max((m - u0).abs()))
    }

    pub fn min_density(&self) -> f64 {
        self.min_density_series.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn push(&mut self, problem: &Problem<'_>, t: f64, state: DiscreteState, reference: Option<&DiscreteState>) -> Result<()> {
        self.times.push(t);
        self.hbar_series.push(problem.effective_h(&state)?);
        self.mass_series.push(state.mean_density());
        self.mean_value_series.push(state.mean_value());
        self.min_density_series.push(state.min_density());
        if let Some(r) = reference {
            self.lyapunov_series.push(lyapunov(&state, r)?);
        }
        self.states.push(state);
        Ok(())
    }
}

/// Initial datum `m = 1 + 0.9 cos(2 pi x1)`, `u = 0.2 cos(2 pi x1)`,
/// renormalized to unit mean density and zero mean value.
pub fn default_initial(grid: &TorusGrid) -> DiscreteState {
    cosine_initial(grid, 0.9, |x| 0.2 * (2.0 * PI * x).cos())
}

/// `m = 1 + amp cos(2 pi x1)` (unit mean) with `u = value(x1)` (zero mean).
pub fn cosine_initial(grid: &TorusGrid, amp: f64, value: impl Fn(f64) -> f64) -> DiscreteState {
    let m: Vec<f64> = grid
        .points()
        .iter()
        .map(|x| 1.0 + amp * (2.0 * PI * x[0]).cos())
        .collect();
    let u: Vec<f64> = grid.points().iter().map(|x| value(x[0])).collect();
    let mm = grid.mean(&m);
    let mu = grid.mean(&u);
    DiscreteState {
        m: m.iter().map(|v| v / mm).collect(),
        u: u.iter().map(|v| v - mu).collect(),
    }
}

/// Integrates the flow from `initial` to `config.t_end`.
pub fn integrate_hrf(
    problem: &Problem<'_>,
    initial: &DiscreteState,
    config: &FlowConfig,
) -> Result<Trajectory> {
    integrate_hrf_until(problem, initial, config, |_, _| false)
}

/// Like [`integrate_hrf`] but stops at the first sample for which
/// `stop(t, hbar)` holds.
pub fn integrate_hrf_until(
    problem: &Problem<'_>,
    initial: &DiscreteState,
    config: &FlowConfig,
    mut stop: impl FnMut(f64, f64) -> bool,
) -> Result<Trajectory> {
    config.validate()?;
    initial.check_positive()?;
    let n = problem.len();
    let log0 = LogState::from_state(initial)?;
    let mut y0 = log0.w;
    y0.extend_from_slice(&log0.u);

    let mut flow = problem.log_flow();
    let rhs = move |y: &[f64], dy: &mut [f64]| -> Result<()> {
        flow.eval(&y[..n], &y[n..], dy);
        Ok(())
    };
    let mut solver = DormandPrince::new(
        rhs,
        y0,
        Tolerances {
            rel: config.rel_tol,
            abs: config.abs_tol,
        },
        StepControl {
            initial_step: config.initial_step,
            max_steps: config.max_steps,
            ..StepControl::default()
        },
    )?;

    let reference = config.lyapunov_reference.as_ref();
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        hbar_series: Vec::new(),
        mass_series: Vec::new(),
        mean_value_series: Vec::new(),
        min_density_series: Vec::new(),
        lyapunov_series: Vec::new(),
        stats: OdeStats::default(),
    };
    traj.push(problem, 0.0, initial.clone(), reference)?;
    for t in config.checkpoints() {
        solver.advance_to(t)?;
        let state = LogState {
            w: solver.y[..n].to_vec(),
            u: solver.y[n..].to_vec(),
        }
        .to_state();
        if !state.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        traj.push(problem, t, state, reference)?;
        if stop(t, traj.final_hbar()) {
            break;
        }
    }
    traj.stats = solver.stats;
    Ok(traj)
}
