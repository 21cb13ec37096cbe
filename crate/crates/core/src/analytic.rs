//! Reference effective Hamiltonians for the pendulum family
//! `H = p^2/2 - sin(2 pi x)` (and its translate `p^2/2 + cos(2 pi x)`).
//!
//! `H(P) = 1` on the flat part `|P| <= 4/pi`; beyond it `H(P) = c` where
//! `|P| = int_0^1 sqrt(2 (sin(2 pi s) + c)) ds`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

/// Edge of the flat part, `int_0^1 sqrt(2 (sin(2 pi s) + 1)) ds = 4/pi`.
pub const FLAT_EDGE: f64 = 4.0 / PI;

const QUAD_TOL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-12;
const MAX_DEPTH: u32 = 60;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureDepth);
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// `int_0^1 sqrt(2 max{sin(2 pi s) + c, 0}) ds`.
pub fn pendulum_action(c: f64) -> f64 {
    // Split at the quarter points so the kink at s = 3/4 (c = 1) is a node.
    let f = |s: f64| (2.0 * ((2.0 * PI * s).sin() + c).max(0.0)).sqrt();
    [0.0, 0.25, 0.5, 0.75, 1.0]
        .windows(2)
        .map(|w| adaptive_quadrature(f, w[0], w[1], QUAD_TOL / 4.0).expect("integrand is continuous"))
        .sum()
}

/// Bisection for an increasing function on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The constant `C(P) >= 1` with `|P| = pendulum_action(C(P))`.
pub fn cell_constant(p: f64) -> Result<f64> {
    let a = p.abs();
    if !a.is_finite() {
        return Err(Error::InvalidParameter(format!("momentum must be finite, got {p}")));
    }
    if a < FLAT_EDGE {
        return Err(Error::InvalidParameter(format!(
            "|P| = {a} lies inside the flat part [0, 4/pi]"
        )));
    }
    if a <= FLAT_EDGE * (1.0 + 1e-15) {
        return Ok(1.0);
    }
    Ok(bisect(|c| pendulum_action(c) - a, 1.0, 1.0 + a * a, ROOT_TOL))
}

/// Exact effective Hamiltonian of the one-dimensional pendulum.
pub fn hbar_pendulum(p: f64) -> f64 {
    if p.abs() <= FLAT_EDGE {
        1.0
    } else {
        cell_constant(p).expect("|P| beyond the flat part")
    }
}

/// `H(P1) + H(P2)` for the separable `two_cos` Hamiltonian.
pub fn hbar_separable_2d(p: [f64; 2]) -> f64 {
    hbar_pendulum(p[0]) + hbar_pendulum(p[1])
}

/// Corrector gradient `u*_x = sign(P) sqrt(2 max{C(P) + sin(2 pi x), 0}) - P`
/// sampled on the grid nodes.
pub fn corrector_gradient_pendulum(p: f64, grid: &TorusGrid) -> Result<Vec<f64>> {
    check_1d(grid)?;
    let c = cell_constant(p)?;
    Ok(grid
        .points()
        .iter()
        .map(|x| corrector_gradient_at(p, c, x[0]))
        .collect())
}

fn corrector_gradient_at(p: f64, c: f64, x: f64) -> f64 {
    p.signum() * (2.0 * (c + (2.0 * PI * x).sin()).max(0.0)).sqrt() - p
}

/// Corrector `u*` on the grid nodes, normalized to zero grid mean.
pub fn corrector_pendulum(p: f64, grid: &TorusGrid) -> Result<Vec<f64>> {
    check_1d(grid)?;
    let c = cell_constant(p)?;
    let f = |s: f64| corrector_gradient_at(p, c, s);
    let mut u = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for x in grid.points() {
        let x = x[0];
        // keep the kink at 3/4 on an interval boundary
        let mut cuts = vec![prev];
        if prev < 0.75 && x > 0.75 {
            cuts.push(0.75);
        }
        cuts.push(x);
        for w in cuts.windows(2) {
            acc += adaptive_quadrature(f, w[0], w[1], 1e-13)?;
        }
        u.push(acc);
        prev = x;
    }
    let mean = grid.mean(&u);
    Ok(u.into_iter().map(|v| v - mean).collect())
}

fn check_1d(grid: &TorusGrid) -> Result<()> {
    if grid.dim() != 1 {
        return Err(Error::GridMismatch("pendulum references are one-dimensional".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    AbsolutelyContinuous,
    /// Dirac mass at `x = 3/4` (the edge of the flat part).
    DiracAtThreeQuarters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub hbar_star: f64,
    /// Sampled `u*_x` (only when `|P| >= 4/pi`).
    pub corrector_gradient: Option<Vec<f64>>,
    /// Sampled zero-mean `u*` (only when `|P| >= 4/pi`).
    pub corrector: Option<Vec<f64>>,
    pub measure: MeasureKind,
}

/// Reference solution of the unpenalized pendulum problem on a grid.
pub fn pendulum_reference(p: f64, grid: &TorusGrid) -> Result<ReferenceSolution> {
    check_1d(grid)?;
    let on_edge = (p.abs() - FLAT_EDGE).abs() <= 1e-12;
    let (grad, u) = if p.abs() >= FLAT_EDGE || on_edge {
        let pp = if on_edge { FLAT_EDGE.copysign(p) } else { p };
        (
            Some(corrector_gradient_pendulum(pp, grid)?),
            Some(corrector_pendulum(pp, grid)?),
        )
    } else {
        (None, None)
    };
    Ok(ReferenceSolution {
        hbar_star: hbar_pendulum(p),
        corrector_gradient: grad,
        corrector: u,
        measure: if on_edge {
            MeasureKind::DiracAtThreeQuarters
        } else {
            MeasureKind::AbsolutelyContinuous
        },
    })
}
