//! Uniform periodic grids on the unit torus.
//!
//! Nodes are flattened row-major: for `d = 2` the flat index of the
//! multi-index `(i0, i1)` is `i0 * n + i1`. Node `i` along an axis sits at
//! coordinate `(i + 1) * h`, so the last node lies at `1.0` (identified with
//! `0.0` on the torus).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n_per_dim: usize,
    len: usize,
    h: f64,
    points: Vec<[f64; 2]>,
}

/// Direction along an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    Forward,
    Backward,
}

impl TorusGrid {
    pub fn new(dim: usize, n_per_dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Dimension(dim));
        }
        if n_per_dim < 2 {
            return Err(Error::GridTooSmall(n_per_dim));
        }
        let len = n_per_dim.pow(dim as u32);
        let h = 1.0 / n_per_dim as f64;
        let points = (0..len)
            .map(|flat| {
                let mut x = [0.0; 2];
                let mut rest = flat;
                for axis in (0..dim).rev() {
                    x[axis] = ((rest % n_per_dim) + 1) as f64 * h;
                    rest /= n_per_dim;
                }
                x
            })
            .collect();
        Ok(Self {
            dim,
            n_per_dim,
            len,
            h,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Coordinates of node `i`; unused trailing components are zero.
    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    fn stride(&self, axis: usize) -> usize {
        self.n_per_dim.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis index of node `i` along `axis`.
    pub fn axis_index(&self, i: usize, axis: usize) -> usize {
        (i / self.stride(axis)) % self.n_per_dim
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim);
        multi
            .iter()
            .enumerate()
            .map(|(axis, &j)| j * self.stride(axis))
            .sum()
    }

    /// Periodic neighbor of node `i` one step along `axis`.
    pub fn neighbor(&self, i: usize, axis: usize, dir: Dir) -> usize {
        let stride = self.stride(axis);
        let j = self.axis_index(i, axis);
        let n = self.n_per_dim;
        let j_new = match dir {
            Dir::Forward => (j + 1) % n,
            Dir::Backward => (j + n - 1) % n,
        };
        i - j * stride + j_new * stride
    }

    /// Grid mean of a nodal vector.
    pub fn mean(&self, v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / self.len as f64
    }

    /// Index of the node nearest to `x` in periodic distance.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = (0..self.dim)
                .map(|a| {
                    let diff = (p[a] - x[a]).rem_euclid(1.0);
                    diff.min(1.0 - diff).powi(2)
                })
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}
