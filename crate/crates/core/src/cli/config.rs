//! Flat `key = value` experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hamiltonian::Potential;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hrf,
    Newton,
    Both,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hrf => "hrf",
            Method::Newton => "newton",
            Method::Both => "both",
        }
    }

    pub fn runs_newton(self) -> bool {
        matches!(self, Method::Newton | Method::Both)
    }

    pub fn runs_hrf(self) -> bool {
        matches!(self, Method::Hrf | Method::Both)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hrf" => Ok(Method::Hrf),
            "newton" => Ok(Method::Newton),
            "both" => Ok(Method::Both),
            other => Err(Error::Config(format!("unknown method \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Solve,
    Sweep,
    Kconv,
    Bench,
    Stability,
    Monotonicity,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Sweep => "sweep",
            Experiment::Kconv => "kconv",
            Experiment::Bench => "bench",
            Experiment::Stability => "stability",
            Experiment::Monotonicity => "monotonicity",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "solve" => Experiment::Solve,
            "sweep" => Experiment::Sweep,
            "kconv" => Experiment::Kconv,
            "bench" => Experiment::Bench,
            "stability" => Experiment::Stability,
            "monotonicity" => Experiment::Monotonicity,
            other => return Err(Error::Config(format!("unknown experiment \"{other}\""))),
        })
    }
}

/// Every knob an experiment driver reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub hamiltonian: Potential,
    pub n: usize,
    pub p: Vec<f64>,
    pub k: f64,
    pub method: Method,
    pub tau: f64,
    pub kappa: f64,
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub residual_tol: f64,
    pub max_iters: usize,
    /// Evenly spaced trajectory samples.
    pub samples: usize,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_step: f64,
    /// Consecutive sweep points that share a warm start.
    pub sweep_chunk: usize,
    pub k_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub epsilon: f64,
    pub bench_t: f64,
    pub pairs: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Solve,
            hamiltonian: Potential::MinusSin,
            n: 30,
            p: vec![0.5],
            k: 100.0,
            method: Method::Newton,
            tau: 1.0,
            kappa: 1.0,
            t_end: 40.0,
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            residual_tol: 1e-9,
            max_iters: 500,
            samples: 40,
            sweep_min: -2.0,
            sweep_max: 2.0,
            sweep_step: 0.1,
            sweep_chunk: 8,
            k_list: vec![10.0, 100.0, 1000.0, 10000.0],
            n_list: vec![15, 30, 60, 120],
            epsilon: 1e-3,
            bench_t: 50.0,
            pairs: 1000,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a number, got \"{v}\"")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: must be finite")));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got \"{v}\"")))
}

fn parse_list<T>(key: &str, v: &str, item: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| item(key, s))
        .collect()
}

impl ExperimentConfig {
    pub fn dimension(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "experiment" => self.experiment = v.parse()?,
            "hamiltonian" | "preset" => {
                self.hamiltonian = v.parse().map_err(|e: Error| match e {
                    Error::UnknownPreset(p) => Error::Config(format!("unknown preset \"{p}\"")),
                    other => other,
                })?
            }
            "dimension" => {
                let d = parse_usize("dimension", v)?;
                if d != self.hamiltonian.dim() {
                    return Err(Error::Config(format!(
                        "dimension = {d} but preset {} is {}-dimensional",
                        self.hamiltonian,
                        self.hamiltonian.dim()
                    )));
                }
            }
            "n" | "n_per_dim" => self.n = parse_usize("n", v)?,
            "P" | "p" => self.p = parse_list("P", v, parse_f64)?,
            "k" => self.k = parse_f64("k", v)?,
            "method" => self.method = v.parse()?,
            "tau" => self.tau = parse_f64("tau", v)?,
            "kappa" => self.kappa = parse_f64("kappa", v)?,
            "T" | "t_end" => self.t_end = parse_f64("T", v)?,
            "rel_tol" => self.rel_tol = parse_f64("rel_tol", v)?,
            "abs_tol" => self.abs_tol = parse_f64("abs_tol", v)?,
            "tol" => {
                self.rel_tol = parse_f64("tol", v)?;
                self.abs_tol = self.rel_tol;
            }
            "residual_tol" => self.residual_tol = parse_f64("residual_tol", v)?,
            "max_iters" => self.max_iters = parse_usize("max_iters", v)?,
            "samples" => self.samples = parse_usize("samples", v)?,
            "sweep_min" => self.sweep_min = parse_f64("sweep_min", v)?,
            "sweep_max" => self.sweep_max = parse_f64("sweep_max", v)?,
            "sweep_step" => self.sweep_step = parse_f64("sweep_step", v)?,
            "sweep_chunk" => self.sweep_chunk = parse_usize("sweep_chunk", v)?,
            "k_list" => self.k_list = parse_list("k_list", v, parse_f64)?,
            "n_list" => self.n_list = parse_list("n_list", v, parse_usize)?,
            "epsilon" => self.epsilon = parse_f64("epsilon", v)?,
            "bench_T" | "bench_t" => self.bench_t = parse_f64("bench_T", v)?,
            "pairs" => self.pairs = parse_usize("pairs", v)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::Config(format!("seed: expected an integer, got \"{v}\"")))?
            }
            "out" => self.out = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key \"{other}\""))),
        }
        Ok(())
    }

    /// Parses the text of a config file on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        // The preset decides the dimension, so it is applied first.
        let mut assignments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            assignments.push((key.trim().to_string(), value.trim().to_string()));
        }
        assignments.sort_by_key(|(k, _)| !matches!(k.as_str(), "hamiltonian" | "preset"));
        for (k, v) in assignments {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = self.dimension();
        if self.p.len() != d {
            return bad(format!("P has {} components, preset {} needs {d}", self.p.len(), self.hamiltonian));
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.k <= 0.0 {
            return bad(format!("k must be positive, got {}", self.k));
        }
        if self.tau < 0.0 || self.kappa < 0.0 || self.tau + self.kappa <= 0.0 {
            return bad("need tau, kappa >= 0 with tau + kappa > 0".into());
        }
        if self.t_end <= 0.0 || self.bench_t <= 0.0 {
            return bad("T must be positive".into());
        }
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 || self.residual_tol <= 0.0 || self.epsilon <= 0.0 {
            return bad("tolerances must be positive".into());
        }
        if self.samples == 0 || self.max_iters == 0 || self.sweep_chunk == 0 {
            return bad("samples, max_iters and sweep_chunk must be positive".into());
        }
        match self.experiment {
            Experiment::Sweep => {
                if !(self.sweep_step > 0.0 && self.sweep_max >= self.sweep_min) {
                    return bad("sweep needs sweep_step > 0 and sweep_max >= sweep_min".into());
                }
            }
            Experiment::Kconv => {
                if self.k_list.is_empty() || self.k_list.iter().any(|k| *k <= 0.0) {
                    return bad("k_list must hold positive values".into());
                }
                if self.k_list.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("k_list must be strictly ascending".into());
                }
            }
            Experiment::Bench if self.n_list.is_empty() || self.n_list.iter().any(|n| *n < 2) => {
                return bad("n_list must hold grid sizes >= 2".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Sweep momenta along one axis (1D) or over the square `[min, max]^2` (2D).
    pub fn sweep_points(&self) -> Vec<Vec<f64>> {
        let count = ((self.sweep_max - self.sweep_min) / self.sweep_step + 1e-9).floor() as usize + 1;
        let axis: Vec<f64> = (0..count)
            .map(|i| self.sweep_min + i as f64 * self.sweep_step)
            .collect();
        match self.dimension() {
            1 => axis.iter().map(|&p| vec![p]).collect(),
            _ => axis
                .iter()
                .flat_map(|&p1| axis.iter().map(move |&p2| vec![p1, p2]))
                .collect(),
        }
    }
}
