//! Error metrics, the Lyapunov functional, monotonicity probes and
//! conservation monitors. Integrals are grid means.

use crate::error::{Error, Result};
use crate::hamiltonian::{check_positive, DiscreteState};
use crate::hrf::Trajectory;
use crate::linalg::{dot, norm2};
use crate::operators::Problem;

/// Distances of a state from a reference solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Grid mean of `(u - u*)^2`.
    pub u_error: f64,
    /// Grid mean of `|m - m*|`; `None` when the reference measure is singular.
    pub m_error: Option<f64>,
    pub hbar_error: f64,
    pub mass_drift: f64,
    pub min_density: f64,
}

/// Reference data an [`ErrorReport`] is measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub u: Vec<f64>,
    pub m: Option<Vec<f64>>,
    pub hbar: f64,
}

impl Reference {
    pub fn from_state(state: &DiscreteState, hbar: f64) -> Self {
        Self {
            u: state.u.clone(),
            m: Some(state.m.clone()),
            hbar,
        }
    }
}

pub fn error_report(problem: &Problem<'_>, state: &DiscreteState, reference: &Reference) -> Result<ErrorReport> {
    let n = problem.len();
    if state.len() != n || reference.u.len() != n || reference.m.as_ref().is_some_and(|m| m.len() != n) {
        return Err(Error::GridMismatch(format!(
            "state and reference must both have {n} nodes"
        )));
    }
    let hbar = problem.effective_h(state)?;
    let u_error = state
        .u
        .iter()
        .zip(&reference.u)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n as f64;
    let m_error = reference.m.as_ref().map(|mref| {
        state.m.iter().zip(mref).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64
    });
    Ok(ErrorReport {
        u_error,
        m_error,
        hbar_error: (hbar - reference.hbar).abs(),
        mass_drift: (state.mean_density() - 1.0).abs(),
        min_density: state.min_density(),
    })
}

/// `phi = mean(m* ln(m*/m)) + mean((u - u*)^2) / 2`.
pub fn lyapunov(state: &DiscreteState, root: &DiscreteState) -> Result<f64> {
    if state.len() != root.len() {
        return Err(Error::GridMismatch("state and root differ in length".into()));
    }
    check_positive(&state.m)?;
    check_positive(&root.m)?;
    let n = state.len() as f64;
    let entropy: f64 = root
        .m
        .iter()
        .zip(&state.m)
        .map(|(ms, m)| ms * (ms / m).ln())
        .sum();
    let quad: f64 = state.u.iter().zip(&root.u).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(entropy / n + quad / (2.0 * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneProbe {
    /// The monotone map `F~`.
    Tilde,
    /// The flow field `F-`.
    Bar,
}

/// `<op(a) - op(b), a - b>`.
pub fn monotonicity_gap(
    probe: MonotoneProbe,
    problem: &Problem<'_>,
    a: &DiscreteState,
    b: &DiscreteState,
) -> Result<f64> {
    let (fa, fb) = match probe {
        MonotoneProbe::Tilde => (problem.f_tilde(a)?, problem.f_tilde(b)?),
        MonotoneProbe::Bar => (problem.f_bar(a)?, problem.f_bar(b)?),
    };
    let za = a.to_vec();
    let zb = b.to_vec();
    let df: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
    let dz: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x - y).collect();
    Ok(dot(&df, &dz))
}

/// Dimensionless scale `||a|| + ||b|| + 1` for randomized tolerances.
pub fn pair_scale(a: &DiscreteState, b: &DiscreteState) -> f64 {
    norm2(&a.to_vec()) + norm2(&b.to_vec()) + 1.0
}

/// `sum (m - m~)^2 + (u - u~)^2` at each shared sample time.
pub fn pair_distance_series(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12 * (1.0 + x.abs()))
    {
        return Err(Error::GridMismatch("trajectories are sampled at different times".into()));
    }
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            sa.m.iter()
                .zip(&sb.m)
                .chain(sa.u.iter().zip(&sb.u))
                .map(|(x, y)| (x - y).powi(2))
                .sum()
        })
        .collect())
}

/// Lyapunov values of every sample of a trajectory against `root`.
pub fn lyapunov_series(traj: &Trajectory, root: &DiscreteState) -> Result<Vec<f64>> {
    traj.states.iter().map(|s| lyapunov(s, root)).collect()
}

/// Largest increase between consecutive entries (negative if strictly decreasing).
pub fn max_increase(series: &[f64]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}
