//! Adaptive Dormand–Prince 5(4) integrator with PI step-size control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub initial_step: f64,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            max_steps: 5_000_000,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}


const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;

/// Dormand–Prince integrator state for an autonomous system `y' = f(y)`.
pub struct DormandPrince<F> {
    rhs: F,
    tol: Tolerances,
    control: StepControl,
    pub t: f64,
    pub y: Vec<f64>,
    h: f64,
    err_prev: f64,
    k: [Vec<f64>; 7],
    pub stats: OdeStats,
}

impl<F> DormandPrince<F>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(mut rhs: F, y0: Vec<f64>, tol: Tolerances, control: StepControl) -> Result<Self> {
        let n = y0.len();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        rhs(&y0, &mut k[0])?;
        Ok(Self {
            rhs,
            tol,
            control,
            t: 0.0,
            y: y0,
            h: control.initial_step,
            err_prev: 1e-4,
            k,
            stats: OdeStats {
                rhs_evals: 1,
                ..OdeStats::default()
            },
        })
    }

    /// Current proposed step size.
    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Advances exactly to `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let n = self.y.len();
        let mut stage = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        while self.t < t_target {
            if self.stats.accepted + self.stats.rejected >= self.control.max_steps {
                return Err(Error::MaxSteps {
                    max_steps: self.control.max_steps,
                    time: self.t,
                });
            }
            let remaining = t_target - self.t;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            if h < self.control.min_step {
                return Err(Error::StepSizeUnderflow { time: self.t });
            }

            let y = &self.y;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            for i in 0..n {
                stage[i] = y[i] + h * A21 * k1[i];
            }
            (self.rhs)(&stage, k2)?;
            for i in 0..n {
                stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.rhs)(&stage, k3)?;
            for i in 0..n {
                stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.rhs)(&stage, k4)?;
            for i in 0..n {
                stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.rhs)(&stage, k5)?;
            for i in 0..n {
                stage[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            (self.rhs)(&stage, k6)?;
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            (self.rhs)(&y_new, k7)?;
            self.stats.rhs_evals += 6;

            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.tol.abs + self.tol.rel * y[i].abs().max(y_new[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = h * MIN_FACTOR;
                continue;
            }

            if err <= 1.0 {
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-ALPHA) * self.err_prev.powf(BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                self.err_prev = err.max(1e-4);
                self.t = if last { t_target } else { self.t + h };
                std::mem::swap(&mut self.y, &mut y_new);
                let [k1, .., k7] = &mut self.k;
                std::mem::swap(k1, k7);
                self.stats.accepted += 1;
                // Keep the controller's step when the last one was clipped.
                self.h = if last { self.h.max(h * factor) } else { h * factor };
            } else {
                self.stats.rejected += 1;
                let factor = (SAFETY * err.powf(-ALPHA)).clamp(MIN_FACTOR, 1.0);
                self.h = h * factor;
            }
        }
        Ok(())
    }
}
