//! Entropy-penalized discrete operators.
//!
//! With `G = G(U)`, `S = sum m_i` and
//! `H~ = sum (m_i G_i - m_i ln m_i / k) / S`:
//!
//! * `F~(M, U) = [ -G_i + H~ + ln(m_i)/k ; (L_U^* M)_i ]` (monotone),
//! * `F-(M, U) = [ m_i (-G_i + H~ + ln(m_i)/k) ; (L_U^* M)_i ]` (the flow field),
//! * in log coordinates `W = ln M` the flow reads
//!   `dW/dt = G - H~ - W/k`, `dU/dt = -L_U^* e^W`.

use crate::error::{Error, Result};
use crate::grid::{Dir, TorusGrid};
use crate::hamiltonian::{
    adjoint_apply, check_len, discrete_hamiltonian, kink_distance, linearize,
    weighted_hessian, DiscreteState, HamiltonianSpec,
};
use crate::linalg::DenseMatrix;
use crate::par::Execution;

/// Entropy penalization strength `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedParams {
    k: f64,
}

impl PenalizedParams {
    pub fn new(k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// Log-density / value pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LogState {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
}

impl LogState {
    pub fn from_state(state: &DiscreteState) -> Result<Self> {
        state.check_positive()?;
        Ok(Self {
            w: state.m.iter().map(|m| m.ln()).collect(),
            u: state.u.clone(),
        })
    }

    pub fn to_state(&self) -> DiscreteState {
        DiscreteState {
            m: self.w.iter().map(|w| w.exp()).collect(),
            u: self.u.clone(),
        }
    }
}

/// Everything that defines one penalized problem instance.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub spec: &'a HamiltonianSpec,
    pub grid: &'a TorusGrid,
    pub params: PenalizedParams,
}

impl<'a> Problem<'a> {
    pub fn new(spec: &'a HamiltonianSpec, grid: &'a TorusGrid, params: PenalizedParams) -> Result<Self> {
        spec.check_grid(grid)?;
        Ok(Self { spec, grid, params })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    fn check_state(&self, state: &DiscreteState) -> Result<()> {
        check_len(&state.m, self.len())?;
        check_len(&state.u, self.len())?;
        state.check_positive()
    }

    pub fn effective_h(&self, state: &DiscreteState) -> Result<f64> {
        self.check_state(state)?;
        let g = discrete_hamiltonian(self.spec, self.grid, &state.u)?;
        Ok(weighted_mean(&state.m, &g, self.params.k))
    }

    pub fn f_tilde(&self, state: &DiscreteState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let n = self.len();
        let inv_k = 1.0 / self.params.k;
        let g = discrete_hamiltonian(self.spec, self.grid, &state.u)?;
        let hbar = weighted_mean(&state.m, &g, self.params.k);
        let mut out = Vec::with_capacity(2 * n);
        out.extend(
            g.iter()
                .zip(&state.m)
                .map(|(gi, mi)| -gi + hbar + inv_k * mi.ln()),
        );
        out.extend(adjoint_apply(self.spec, self.grid, &state.u, &state.m)?);
        Ok(out)
    }

    pub fn f_bar(&self, state: &DiscreteState) -> Result<Vec<f64>> {
        let mut out = self.f_tilde(state)?;
        for (v, m) in out.iter_mut().zip(&state.m) {
            *v *= m;
        }
        Ok(out)
    }

    /// Right-hand side `(dW/dt, dU/dt)` of the flow in log coordinates.
    pub fn f_bar_log(&self, log: &LogState) -> Result<Vec<f64>> {
        check_len(&log.w, self.len())?;
        check_len(&log.u, self.len())?;
        let mut out = vec![0.0; 2 * self.len()];
        self.f_bar_log_into(&log.w, &log.u, &mut out)?;
        Ok(out)
    }

    /// Allocation-light variant of [`Problem::f_bar_log`] used by the integrators.
    pub(crate) fn f_bar_log_into(&self, w: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.len();
        let inv_k = 1.0 / self.params.k;
        let m: Vec<f64> = w.iter().map(|x| x.exp()).collect();
        let g = discrete_hamiltonian(self.spec, self.grid, u)?;
        let s: f64 = m.iter().sum();
        let num: f64 = m
            .iter()
            .zip(&g)
            .zip(w)
            .map(|((mi, gi), wi)| mi * gi - inv_k * mi * wi)
            .sum();
        let hbar = num / s;
        for i in 0..n {
            out[i] = g[i] - hbar - inv_k * w[i];
        }
        let lm = adjoint_apply(self.spec, self.grid, u, &m)?;
        for i in 0..n {
            out[n + i] = -lm[i];
        }
        Ok(())
    }

    /// Precomputed right-hand side of the log-coordinate flow.
    pub fn log_flow(&self) -> LogFlow {
        let grid = self.grid;
        let n = grid.len();
        let dim = grid.dim();
        let mut fwd = Vec::with_capacity(n * dim);
        let mut bwd = Vec::with_capacity(n * dim);
        for i in 0..n {
            for axis in 0..dim {
                fwd.push(grid.neighbor(i, axis, Dir::Forward));
                bwd.push(grid.neighbor(i, axis, Dir::Backward));
            }
        }
        LogFlow {
            potential: self.spec.potential_on(grid),
            momentum: self.spec.momentum().to_vec(),
            fwd,
            bwd,
            inv_h: 1.0 / grid.spacing(),
            inv_k: 1.0 / self.params.k,
            m: vec![0.0; n],
            g: vec![0.0; n],
        }
    }

    /// Whether every upwind branch is at least the kink margin away from switching.
    pub fn is_kink_free(&self, u: &[f64]) -> bool {
        kink_distance(self.spec, self.grid, u) > self.kink_margin()
    }

    pub fn kink_margin(&self) -> f64 {
        let p = self.spec.momentum().iter().map(|x| x * x).sum::<f64>().sqrt();
        1e-8 * (1.0 + p)
    }

    /// Jacobian of `F-`, analytic when kink-free, finite differences otherwise.
    pub fn jacobian_f_bar(&self, state: &DiscreteState, exec: Execution) -> Result<Jacobian> {
        self.check_state(state)?;
        if self.is_kink_free(&state.u) {
            Ok(Jacobian {
                matrix: self.jacobian_analytic(state)?,
                kind: JacobianKind::Analytic,
            })
        } else {
            Ok(Jacobian {
                matrix: self.jacobian_fd(state, exec)?,
                kind: JacobianKind::FiniteDifference,
            })
        }
    }

    /// Exact one-sided Jacobian of `F-` from the active upwind branches.
    pub fn jacobian_analytic(&self, state: &DiscreteState) -> Result<DenseMatrix> {
        self.check_state(state)?;
        let n = self.len();
        let inv_k = 1.0 / self.params.k;
        let m = &state.m;
        let g = discrete_hamiltonian(self.spec, self.grid, &state.u)?;
        let l = linearize(self.spec, self.grid, &state.u)?;
        let hess = weighted_hessian(self.spec, self.grid, &state.u, m)?;
        let s: f64 = m.iter().sum();
        let hbar = weighted_mean(m, &g, self.params.k);
        let lstar_m = l.apply_transpose(m);

        let dh_dm: Vec<f64> = (0..n)
            .map(|j| (g[j] - inv_k * (m[j].ln() + 1.0) - hbar) / s)
            .collect();
        let dh_du: Vec<f64> = lstar_m.iter().map(|v| v / s).collect();

        let mut jac = DenseMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let a_i = -g[i] + hbar + inv_k * m[i].ln();
            for j in 0..n {
                jac[(i, j)] = m[i] * dh_dm[j];
                jac[(i, n + j)] = m[i] * dh_du[j];
            }
            jac[(i, i)] += a_i + inv_k;
            for (j, v) in l.row(i) {
                jac[(i, n + j)] -= m[i] * v;
                // second block: d(L^* M)_j / dm_i = L_ij
                jac[(n + j, i)] += v;
            }
            for (j, v) in hess.row(i) {
                jac[(n + i, n + j)] += v;
            }
        }
        Ok(jac)
    }

    /// Column-wise central finite-difference Jacobian of `F-`.
    pub fn jacobian_fd(&self, state: &DiscreteState, exec: Execution) -> Result<DenseMatrix> {
        self.check_state(state)?;
        let n = self.len();
        let z = state.to_vec();
        let columns: Vec<Result<Vec<f64>>> = exec.map_indices(2 * n, |j| {
            let step = if j < n {
                1e-6 * z[j]
            } else {
                1e-6 * z[j].abs().max(1.0)
            };
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += step;
            zm[j] -= step;
            let fp = self.f_bar(&DiscreteState::from_slice(&zp))?;
            let fm = self.f_bar(&DiscreteState::from_slice(&zm))?;
            let width = zp[j] - zm[j];
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / width).collect())
        });
        let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(DenseMatrix::from_columns(2 * n, &columns))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianKind {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct Jacobian {
    pub matrix: DenseMatrix,
    pub kind: JacobianKind,
}

/// `sum (m_i g_i - m_i ln m_i / k) / sum m_i`.
pub(crate) fn weighted_mean(m: &[f64], g: &[f64], k: f64) -> f64 {
    let inv_k = 1.0 / k;
    let s: f64 = m.iter().sum();
    let num: f64 = m
        .iter()
        .zip(g)
        .map(|(mi, gi)| mi * gi - inv_k * mi * mi.ln())
        .sum();
    num / s
}

pub fn effective_h_estimate(
    state: &DiscreteState,
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    params: PenalizedParams,
) -> Result<f64> {
    Problem::new(spec, grid, params)?.effective_h(state)
}

pub fn f_tilde(
    state: &DiscreteState,
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    params: PenalizedParams,
) -> Result<Vec<f64>> {
    Problem::new(spec, grid, params)?.f_tilde(state)
}

pub fn f_bar(
    state: &DiscreteState,
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    params: PenalizedParams,
) -> Result<Vec<f64>> {
    Problem::new(spec, grid, params)?.f_bar(state)
}

pub fn f_bar_log(
    log: &LogState,
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    params: PenalizedParams,
) -> Result<Vec<f64>> {
    Problem::new(spec, grid, params)?.f_bar_log(log)
}

pub fn jacobian_f_bar(
    state: &DiscreteState,
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    params: PenalizedParams,
) -> Result<Jacobian> {
    Problem::new(spec, grid, params)?.jacobian_f_bar(state, Execution::default())
}

/// Allocation-free evaluator of `(dW/dt, dU/dt)`, with the potential and
/// neighbour tables cached.
#[derive(Debug, Clone)]
pub struct LogFlow {
    potential: Vec<f64>,
    momentum: Vec<f64>,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
    inv_h: f64,
    inv_k: f64,
    m: Vec<f64>,
    g: Vec<f64>,
}

impl LogFlow {
    pub fn eval(&mut self, w: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.potential.len();
        let dim = self.momentum.len();
        let inv_h = self.inv_h;
        let (dw, du) = out.split_at_mut(n);
        du.fill(0.0);
        let mut s = 0.0;
        let mut num = 0.0;
        for i in 0..n {
            let mi = w[i].exp();
            self.m[i] = mi;
            let mut gi = self.potential[i];
            for a in 0..dim {
                let pa = self.momentum[a];
                let ip = self.fwd[i * dim + a];
                let im = self.bwd[i * dim + a];
                let f = pa + (u[ip] - u[i]) * inv_h;
                if f < 0.0 {
                    gi += 0.5 * f * f;
                    let c = f * inv_h * mi;
                    du[ip] -= c;
                    du[i] += c;
                }
                let b = pa + (u[i] - u[im]) * inv_h;
                if b > 0.0 {
                    gi += 0.5 * b * b;
                    let c = b * inv_h * mi;
                    du[i] -= c;
                    du[im] += c;
                }
            }
            self.g[i] = gi;
            s += mi;
            num += mi * (gi - self.inv_k * w[i]);
        }
        let hbar = num / s;
        for i in 0..n {
            dw[i] = self.g[i] - hbar - self.inv_k * w[i];
        }
    }
}
