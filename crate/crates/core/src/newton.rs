//! Regularized Newton iteration
//! `z <- z - (tau I + kappa DF-(z))^{-1} F-(z)`.
//!
//! `kappa = 0` gives explicit Euler steps of the flow with step `1/tau`;
//! `tau = 0, kappa = 1` is plain Newton. Mass and the mean of `U` are
//! monitored per iterate, never enforced.

use crate::error::{Error, Result};
use crate::hamiltonian::DiscreteState;
use crate::linalg::{norm_inf, Lu};
use crate::operators::{JacobianKind, Problem};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tau: f64,
    pub kappa: f64,
    pub residual_tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            kappa: 1.0,
            residual_tol: 1e-9,
            max_iters: 500,
        }
    }
}

impl NewtonConfig {
    pub fn new(tau: f64, kappa: f64) -> Self {
        Self {
            tau,
            kappa,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.kappa >= 0.0 && self.tau + self.kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need tau, kappa >= 0 with tau + kappa > 0 (got tau = {}, kappa = {})",
                self.tau, self.kappa
            )));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter("residual_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a Newton solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Final iterate, or the lowest-residual one when not converged.
    pub state: DiscreteState,
    pub hbar: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `||F-||_inf` at each iterate, starting with the initial state.
    pub residuals: Vec<f64>,
    pub hbar_history: Vec<f64>,
    pub mass_history: Vec<f64>,
    pub min_density_history: Vec<f64>,
    /// Iterations whose Jacobian came from finite differences.
    pub fd_jacobians: usize,
}

impl SolveResult {
    pub fn mass_drift(&self) -> f64 {
        (self.state.mean_density() - 1.0).abs()
    }

    /// Whether the residual history decreased at every iteration.
    pub fn residuals_strictly_decreasing(&self) -> bool {
        self.residuals.windows(2).all(|w| w[1] < w[0])
    }
}

pub(crate) fn step_inner(
    problem: &Problem<'_>,
    state: &DiscreteState,
    config: &NewtonConfig,
    exec: Execution,
    f: &[f64],
) -> Result<(DiscreteState, Option<JacobianKind>)> {
    let n = problem.len();
    let (s, kind) = if config.kappa == 0.0 {
        (f.iter().map(|v| v / config.tau).collect::<Vec<_>>(), None)
    } else {
        let jac = problem.jacobian_f_bar(state, exec)?;
        let mut a = jac.matrix;
        a.scale_add_identity(config.kappa, config.tau);
        // Solve for the relative density step sigma = s_M / m. The density
        // rows of the system scale with m, and without this similarity
        // transform pivoting on the O(1) value rows wipes out the relative
        // accuracy of nodes where m is tiny.
        let m = &state.m;
        for i in 0..2 * n {
            for j in 0..2 * n {
                let v = &mut a[(i, j)];
                if i < n {
                    *v /= m[i];
                }
                if j < n {
                    *v *= m[j];
                }
            }
        }
        let rhs: Vec<f64> = f
            .iter()
            .enumerate()
            .map(|(i, v)| if i < n { v / m[i] } else { *v })
            .collect();
        let lu = Lu::factor(&a)?;
        let cond = lu.condition_estimate();
        if !cond.is_finite() || cond > 1e16 {
            return Err(Error::Singular {
                pivot: 0,
                condition: cond,
            });
        }
        let mut s = lu.solve(&rhs)?;
        for (si, mi) in s.iter_mut().zip(m) {
            *si *= mi;
        }
        (s, Some(jac.kind))
    };
    let z = state.to_vec();
    let next: Vec<f64> = z.iter().zip(&s).map(|(a, b)| a - b).collect();
    if let Some(index) = next[..n].iter().position(|&m| !(m > 0.0)) {
        return Err(Error::NonPositiveDensity {
            index,
            value: next[index],
        });
    }
    // Below the normal range the relative scaling above loses all accuracy.
    if let Some(index) = next[..n].iter().position(|&m| m < f64::MIN_POSITIVE) {
        return Err(Error::DensityUnderflow {
            index,
            value: next[index],
        });
    }
    Ok((DiscreteState::from_slice(&next), kind))
}

/// One regularized Newton update.
pub fn newton_step(
    problem: &Problem<'_>,
    state: &DiscreteState,
    config: &NewtonConfig,
) -> Result<DiscreteState> {
    config.validate()?;
    let f = problem.f_bar(state)?;
    step_inner(problem, state, config, Execution::default(), &f).map(|r| r.0)
}

/// Iterates [`newton_step`] until `||F-||_inf <= residual_tol` or `max_iters`.
pub fn newton_solve(
    problem: &Problem<'_>,
    initial: &DiscreteState,
    config: &NewtonConfig,
) -> Result<SolveResult> {
    newton_solve_with(problem, initial, config, Execution::default())
}

pub fn newton_solve_with(
    problem: &Problem<'_>,
    initial: &DiscreteState,
    config: &NewtonConfig,
    exec: Execution,
) -> Result<SolveResult> {
    config.validate()?;
    let mut state = initial.clone();
    let mut result = SolveResult {
        state: initial.clone(),
        hbar: f64::NAN,
        converged: false,
        iterations: 0,
        residuals: Vec::new(),
        hbar_history: Vec::new(),
        mass_history: Vec::new(),
        min_density_history: Vec::new(),
        fd_jacobians: 0,
    };
    let mut best = (f64::INFINITY, initial.clone());
    for iter in 0..=config.max_iters {
        let f = problem.f_bar(&state)?;
        let res = norm_inf(&f);
        if !res.is_finite() {
            return Err(Error::NonFinite { time: iter as f64 });
        }
        result.residuals.push(res);
        result.hbar_history.push(problem.effective_h(&state)?);
        result.mass_history.push(state.mean_density());
        result.min_density_history.push(state.min_density());
        if res < best.0 {
            best = (res, state.clone());
        }
        if res <= config.residual_tol {
            result.converged = true;
            break;
        }
        if iter == config.max_iters {
            break;
        }
        let (next, kind) = step_inner(problem, &state, config, exec, &f)?;
        if kind == Some(JacobianKind::FiniteDifference) {
            result.fd_jacobians += 1;
        }
        result.iterations += 1;
        state = next;
    }
    result.state = if result.converged { state } else { best.1 };
    result.hbar = problem.effective_h(&result.state)?;
    Ok(result)
}
