//! Hamiltonian presets `H(x, p) = |p|^2 / 2 + V(x)` and their monotone
//! upwind discretization.
//!
//! Per node and axis the kinetic energy is split into a forward branch
//! `min{P_a + (u_{i+e_a} - u_i)/h, 0}^2 / 2` and a backward branch
//! `max{P_a + (u_i - u_{i-e_a})/h, 0}^2 / 2`. A branch whose argument is
//! exactly zero is treated as clamped, so its derivative is zero.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Dir, TorusGrid};
use crate::linalg::CsrMatrix;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Potential {
    /// `V = -sin(2 pi x1)`
    MinusSin,
    /// `V = cos(2 pi x1) + cos(2 pi x2)`
    TwoCos,
    /// `V = sin(2 pi x1) sin(2 pi x2)`
    SinSin,
    /// `V = -10 cos(2 pi x1) - 10 sin(2 pi x1)`
    StrongMix,
}

impl Potential {
    pub const ALL: [Potential; 4] = [
        Potential::MinusSin,
        Potential::TwoCos,
        Potential::SinSin,
        Potential::StrongMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Potential::MinusSin => "minus_sin",
            Potential::TwoCos => "two_cos",
            Potential::SinSin => "sin_sin",
            Potential::StrongMix => "strong_mix",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Potential::MinusSin | Potential::StrongMix => 1,
            Potential::TwoCos | Potential::SinSin => 2,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Potential::MinusSin => -(TWO_PI * x[0]).sin(),
            Potential::TwoCos => (TWO_PI * x[0]).cos() + (TWO_PI * x[1]).cos(),
            Potential::SinSin => (TWO_PI * x[0]).sin() * (TWO_PI * x[1]).sin(),
            Potential::StrongMix => -10.0 * (TWO_PI * x[0]).cos() - 10.0 * (TWO_PI * x[0]).sin(),
        }
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Potential {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Potential::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::UnknownPreset(s.trim().to_string()))
    }
}

/// A preset potential together with the momentum shift `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    potential: Potential,
    momentum: Vec<f64>,
}

impl HamiltonianSpec {
    pub fn new(potential: Potential, momentum: Vec<f64>) -> Result<Self> {
        if momentum.len() != potential.dim() {
            return Err(Error::Length {
                expected: potential.dim(),
                found: momentum.len(),
            });
        }
        if momentum.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("momentum must be finite".into()));
        }
        Ok(Self {
            potential,
            momentum,
        })
    }

    pub fn potential(&self) -> Potential {
        self.potential
    }

    pub fn momentum(&self) -> &[f64] {
        &self.momentum
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    pub fn with_momentum(&self, momentum: Vec<f64>) -> Result<Self> {
        Self::new(self.potential, momentum)
    }

    /// Strong-convexity constant of the kinetic part.
    pub fn convexity_constant(&self) -> f64 {
        1.0
    }

    pub fn check_grid(&self, grid: &TorusGrid) -> Result<()> {
        if grid.dim() != self.dim() {
            return Err(Error::PresetDimension {
                preset: self.potential.name(),
                expected: self.dim(),
                found: grid.dim(),
            });
        }
        Ok(())
    }

    /// `|p|^2 / 2 + V(x)`.
    pub fn eval(&self, x: &[f64], p: &[f64]) -> f64 {
        0.5 * p.iter().map(|q| q * q).sum::<f64>() + self.potential.eval(x)
    }

    /// Potential sampled on the grid nodes.
    pub fn potential_on(&self, grid: &TorusGrid) -> Vec<f64> {
        grid.points().iter().map(|x| self.potential.eval(x)).collect()
    }
}

/// Density/value pair on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub m: Vec<f64>,
    pub u: Vec<f64>,
}

impl DiscreteState {
    pub fn new(m: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if m.len() != u.len() {
            return Err(Error::Length {
                expected: m.len(),
                found: u.len(),
            });
        }
        Ok(Self { m, u })
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn check_positive(&self) -> Result<()> {
        check_positive(&self.m)
    }

    pub fn min_density(&self) -> f64 {
        self.m.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean_density(&self) -> f64 {
        self.m.iter().sum::<f64>() / self.m.len() as f64
    }

    pub fn mean_value(&self) -> f64 {
        self.u.iter().sum::<f64>() / self.u.len() as f64
    }

    /// Concatenated `(M, U)` vector of length `2N`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.m.len());
        v.extend_from_slice(&self.m);
        v.extend_from_slice(&self.u);
        v
    }

    pub fn from_slice(z: &[f64]) -> Self {
        let n = z.len() / 2;
        Self {
            m: z[..n].to_vec(),
            u: z[n..].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().chain(&self.u).all(|v| v.is_finite())
    }
}

pub(crate) fn check_positive(m: &[f64]) -> Result<()> {
    match m.iter().position(|&v| !(v > 0.0)) {
        Some(index) => Err(Error::NonPositiveDensity {
            index,
            value: m[index],
        }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Length {
            expected: n,
            found: v.len(),
        });
    }
    Ok(())
}

/// One upwind branch at a node: its argument is `P_a + (u[hi] - u[lo]) / h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub node: usize,
    pub hi: usize,
    pub lo: usize,
    pub arg: f64,
    pub forward: bool,
}

impl Branch {
    /// Whether the branch contributes to `G` (strictly off the clamp).
    pub fn is_active(&self) -> bool {
        if self.forward {
            self.arg < 0.0
        } else {
            self.arg > 0.0
        }
    }

    pub fn value(&self) -> f64 {
        if self.is_active() {
            0.5 * self.arg * self.arg
        } else {
            0.0
        }
    }
}

/// Visits every upwind branch of every node, `2d` per node.
pub fn for_each_branch(
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    u: &[f64],
    mut visit: impl FnMut(Branch),
) {
    let inv_h = 1.0 / grid.spacing();
    let p = spec.momentum();
    for i in 0..grid.len() {
        for (axis, &pa) in p.iter().enumerate() {
            let ip = grid.neighbor(i, axis, Dir::Forward);
            let im = grid.neighbor(i, axis, Dir::Backward);
            visit(Branch {
                node: i,
                hi: ip,
                lo: i,
                arg: pa + (u[ip] - u[i]) * inv_h,
                forward: true,
            });
            visit(Branch {
                node: i,
                hi: i,
                lo: im,
                arg: pa + (u[i] - u[im]) * inv_h,
                forward: false,
            });
        }
    }
}

/// Smallest distance of any branch argument from its switching point.
pub fn kink_distance(spec: &HamiltonianSpec, grid: &TorusGrid, u: &[f64]) -> f64 {
    let mut d = f64::INFINITY;
    for_each_branch(spec, grid, u, |b| d = d.min(b.arg.abs()));
    d
}

/// Upwind discrete Hamiltonian `G(U)`.
pub fn discrete_hamiltonian(spec: &HamiltonianSpec, grid: &TorusGrid, u: &[f64]) -> Result<Vec<f64>> {
    spec.check_grid(grid)?;
    check_len(u, grid.len())?;
    let mut g = spec.potential_on(grid);
    for_each_branch(spec, grid, u, |b| g[b.node] += b.value());
    Ok(g)
}

/// Jacobian `dG_i/du_j` of the upwind Hamiltonian (the operator `L_U`).
pub fn linearize(spec: &HamiltonianSpec, grid: &TorusGrid, u: &[f64]) -> Result<CsrMatrix> {
    spec.check_grid(grid)?;
    check_len(u, grid.len())?;
    let inv_h = 1.0 / grid.spacing();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(4 * grid.dim()); grid.len()];
    for_each_branch(spec, grid, u, |b| {
        if b.is_active() {
            let c = b.arg * inv_h;
            rows[b.node].push((b.hi, c));
            rows[b.node].push((b.lo, -c));
        }
    });
    Ok(CsrMatrix::from_rows(grid.len(), rows))
}

/// `L_U^* M`, the transpose action of the linearization on a density.
pub fn adjoint_apply(
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    u: &[f64],
    m: &[f64],
) -> Result<Vec<f64>> {
    spec.check_grid(grid)?;
    check_len(u, grid.len())?;
    check_len(m, grid.len())?;
    let inv_h = 1.0 / grid.spacing();
    let mut out = vec![0.0; grid.len()];
    for_each_branch(spec, grid, u, |b| {
        if b.is_active() {
            let c = b.arg * inv_h * m[b.node];
            out[b.hi] += c;
            out[b.lo] -= c;
        }
    });
    Ok(out)
}

/// Second-derivative action `sum_r m_r d^2 G_r / du du`, returned as a
/// sparse symmetric matrix. Piecewise constant for the quadratic kinetic
/// form; clamped branches contribute nothing.
pub fn weighted_hessian(
    spec: &HamiltonianSpec,
    grid: &TorusGrid,
    u: &[f64],
    m: &[f64],
) -> Result<CsrMatrix> {
    spec.check_grid(grid)?;
    check_len(u, grid.len())?;
    check_len(m, grid.len())?;
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); grid.len()];
    for_each_branch(spec, grid, u, |b| {
        if b.is_active() {
            let c = m[b.node] * inv_h2;
            rows[b.hi].push((b.hi, c));
            rows[b.lo].push((b.lo, c));
            rows[b.hi].push((b.lo, -c));
            rows[b.lo].push((b.hi, -c));
        }
    });
    Ok(CsrMatrix::from_rows(grid.len(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn minus_sin(p: f64) -> HamiltonianSpec {
        HamiltonianSpec::new(Potential::MinusSin, vec![p]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eval_examples() {
        assert!(close(minus_sin(0.0).eval(&[0.25], &[0.0]), -1.0, 1e-15));
        let tc = HamiltonianSpec::new(Potential::TwoCos, vec![0.0, 0.0]).unwrap();
        assert_eq!(tc.eval(&[0.0, 0.0], &[0.0, 0.0]), 2.0);
        assert!(close(minus_sin(0.0).eval(&[0.5], &[2.0]), 2.0, 1e-15));
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Potential::ALL {
            assert_eq!(p.name().parse::<Potential>().unwrap(), p);
        }
        assert_eq!(
            "bogus".parse::<Potential>(),
            Err(Error::UnknownPreset("bogus".into()))
        );
    }

    #[test]
    fn dimension_checks() {
        assert!(HamiltonianSpec::new(Potential::TwoCos, vec![1.0]).is_err());
        let grid = TorusGrid::new(2, 4).unwrap();
        assert!(matches!(
            discrete_hamiltonian(&minus_sin(0.0), &grid, &[0.0; 16]),
            Err(Error::PresetDimension { .. })
        ));
    }

    #[test]
    fn g_with_zero_values_is_the_potential() {
        let grid = TorusGrid::new(1, 4).unwrap();
        let g = discrete_hamiltonian(&minus_sin(0.0), &grid, &[0.0; 4]).unwrap();
        let expected = [-1.0, 0.0, 1.0, 0.0];
        for (a, b) in g.iter().zip(expected) {
            assert!(close(*a, b, 1e-15));
        }
        let g = discrete_hamiltonian(&minus_sin(1.0), &grid, &[0.0; 4]).unwrap();
        for (a, b) in g.iter().zip(expected) {
            assert!(close(*a, 0.5 + b, 1e-15));
        }
    }

    #[test]
    fn g_two_node_hand_evaluation() {
        // h = 1/2, u = (0, 1): node 1 has backward arg 2 -> 2; node 0 has
        // forward arg 2 (clamped) and backward arg -2 (clamped), V = 0 at both.
        let grid = TorusGrid::new(1, 2).unwrap();
        let g = discrete_hamiltonian(&minus_sin(0.0), &grid, &[0.0, 1.0]).unwrap();
        assert!(close(g[0], 0.0, 1e-15));
        assert!(close(g[1], 4.0, 1e-15));
    }

    #[test]
    fn linearization_vanishes_at_ties() {
        let grid = TorusGrid::new(1, 6).unwrap();
        let l = linearize(&minus_sin(0.0), &grid, &[0.0; 6]).unwrap();
        assert_eq!(l.to_dense().max_abs(), 0.0);
        let a = adjoint_apply(&minus_sin(0.0), &grid, &[0.0; 6], &[0.3, 1.0, 2.0, 1.0, 0.5, 1.2]).unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
    }

    fn random_setup(rng: &mut ChaCha8Rng, d: usize) -> (HamiltonianSpec, TorusGrid) {
        let (pot, n) = if d == 1 {
            (Potential::MinusSin, 9)
        } else {
            (Potential::SinSin, 5)
        };
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        (HamiltonianSpec::new(pot, p).unwrap(), TorusGrid::new(d, n).unwrap())
    }

    #[test]
    fn linearization_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [1, 2] {
            for _ in 0..20 {
                let (spec, grid) = random_setup(&mut rng, d);
                let n = grid.len();
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
                if kink_distance(&spec, &grid, &u) < 1e-3 {
                    continue;
                }
                let l = linearize(&spec, &grid, &u).unwrap().to_dense();
                let eps = 1e-6;
                for j in 0..n {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[j] += eps;
                    dn[j] -= eps;
                    let gp = discrete_hamiltonian(&spec, &grid, &up).unwrap();
                    let gm = discrete_hamiltonian(&spec, &grid, &dn).unwrap();
                    for i in 0..n {
                        let fd = (gp[i] - gm[i]) / (2.0 * eps);
                        let scale = l.max_abs().max(1.0);
                        assert!((fd - l[(i, j)]).abs() <= 1e-5 * scale, "{fd} vs {}", l[(i, j)]);
                    }
                }
                for i in 0..n {
                    assert!(linearize(&spec, &grid, &u).unwrap().nnz_in_row(i) <= 2 * d + 1);
                }
            }
        }
    }

    #[test]
    fn rows_sum_to_zero_and_adjoint_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [1, 2] {
            for _ in 0..20 {
                let (spec, grid) = random_setup(&mut rng, d);
                let n = grid.len();
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let l = linearize(&spec, &grid, &u).unwrap();
                let ones = vec![1.0; n];
                assert!(l.apply(&ones).iter().all(|r| r.abs() < 1e-9));
                let lstar_m = adjoint_apply(&spec, &grid, &u, &m).unwrap();
                assert!(lstar_m.iter().sum::<f64>().abs() < 1e-9);
                let explicit = l.apply_transpose(&m);
                let scale = 1.0 + crate::linalg::norm_inf(&explicit);
                for (a, b) in lstar_m.iter().zip(&explicit) {
                    assert!((a - b).abs() <= 1e-12 * scale);
                }
                let lhs = dot(&lstar_m, &v);
                let rhs = dot(&m, &l.apply(&v));
                assert!((lhs - rhs).abs() <= 1e-12 * scale * n as f64);
            }
        }
    }

    #[test]
    fn translation_invariance_is_exact() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let spec = minus_sin(0.7);
        let u: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        // Shift by a power of two so the differences are reproduced bit for bit.
        let shifted: Vec<f64> = u.iter().map(|v| v + 4.0).collect();
        let g0 = discrete_hamiltonian(&spec, &grid, &u).unwrap();
        let g1 = discrete_hamiltonian(&spec, &grid, &shifted).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            assert!((a - b).abs() <= 1e-13);
        }
    }

    #[test]
    fn coercive_along_non_constant_directions() {
        let grid = TorusGrid::new(1, 10).unwrap();
        let spec = minus_sin(0.3);
        let u: Vec<f64> = (0..10).map(|i| (i as f64).cos()).collect();
        let mean_g = |s: f64| {
            let us: Vec<f64> = u.iter().map(|v| s * v).collect();
            grid.mean(&discrete_hamiltonian(&spec, &grid, &us).unwrap())
        };
        let (g10, g20) = (mean_g(10.0), mean_g(20.0));
        assert!(g20 > 3.5 * g10 && g10 > 0.0);
    }

    #[test]
    fn hessian_matches_finite_difference_of_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (spec, grid) = random_setup(&mut rng, 2);
        let n = grid.len();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let m: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        assert!(kink_distance(&spec, &grid, &u) > 1e-4);
        let hess = weighted_hessian(&spec, &grid, &u, &m).unwrap().to_dense();
        let eps = 1e-6;
        for j in 0..n {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += eps;
            dn[j] -= eps;
            let ap = adjoint_apply(&spec, &grid, &up, &m).unwrap();
            let am = adjoint_apply(&spec, &grid, &dn, &m).unwrap();
            for i in 0..n {
                let fd = (ap[i] - am[i]) / (2.0 * eps);
                assert!((fd - hess[(i, j)]).abs() <= 1e-5 * hess.max_abs());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-2.0f64..2.0, n)
        }

        proptest! {
            #[test]
            fn each_component_is_convex(
                p in -2.0f64..2.0,
                u in vec_strategy(7),
                v in vec_strategy(7),
                lambda in 0.0f64..=1.0,
            ) {
                let grid = TorusGrid::new(1, 7).unwrap();
                let spec = HamiltonianSpec::new(Potential::StrongMix, vec![p]).unwrap();
                let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
                let gu = discrete_hamiltonian(&spec, &grid, &u).unwrap();
                let gv = discrete_hamiltonian(&spec, &grid, &v).unwrap();
                let gm = discrete_hamiltonian(&spec, &grid, &mix).unwrap();
                for i in 0..7 {
                    let bound = lambda * gu[i] + (1.0 - lambda) * gv[i];
                    prop_assert!(gm[i] <= bound + 1e-12 * (1.0 + bound.abs()));
                }
            }
        }
    }
}
