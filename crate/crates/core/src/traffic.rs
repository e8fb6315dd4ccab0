//! Traffic matrices: gravity-model synthesis, per-step Gaussian variation,
//! utilization-targeted scaling and replay from a text series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::netsim::{Network, NodeId};

/// Per-step standard deviation of the gravity weights, as a fraction of their mean.
pub const DEFAULT_STD_FRACTION: f64 = 0.01;

/// Mean gravity weights `p_in[i]`, `p_out[j]` and their per-step relative spread.
#[derive(Debug, Clone, PartialEq)]
pub struct GravityParams {
    pub p_in: Vec<f64>,
    pub p_out: Vec<f64>,
    pub std_fraction: f64,
}

impl GravityParams {
    pub fn new(p_in: Vec<f64>, p_out: Vec<f64>, std_fraction: f64) -> Result<Self> {
        if p_in.len() != p_out.len() {
            return Err(Error::Dimension {
                expected: p_in.len(),
                got: p_out.len(),
            });
        }
        if p_in.iter().chain(&p_out).any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("gravity weights must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&std_fraction) {
            return Err(Error::Config(format!(
                "std_fraction must lie in [0, 1), got {std_fraction}"
            )));
        }
        Ok(Self {
            p_in,
            p_out,
            std_fraction,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.p_in.len()
    }

    /// Scales the matrix produced by these weights by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            p_in: self.p_in.iter().map(|p| p * factor).collect(),
            ..self.clone()
        }
    }
}

/// Square demand matrix `T[i][j]` with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficMatrix {
    n: usize,
    demand: Vec<f64>,
}

impl TrafficMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            demand: vec![0.0; n * n],
        }
    }

    /// Row-major `n * n` entries; rejects negative, non-finite or diagonal demand.
    pub fn from_vec(n: usize, demand: Vec<f64>) -> Result<Self> {
        if demand.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: demand.len(),
            });
        }
        for (k, &d) in demand.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::Config(format!(
                    "demand [{}][{}] = {d} is not a non-negative number",
                    k / n,
                    k % n
                )));
            }
            if k / n == k % n && d != 0.0 {
                return Err(Error::Config(format!("diagonal demand [{0}][{0}] must be zero", k / n)));
            }
        }
        Ok(Self { n, demand })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.demand[i * self.n + j]
    }

    pub fn set(&mut self, i: NodeId, j: NodeId, value: f64) {
        assert!(i != j || value == 0.0, "diagonal must stay zero");
        assert!(value >= 0.0);
        self.demand[i * self.n + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.demand
    }

    pub fn total(&self) -> f64 {
        self.demand.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            demand: self.demand.iter().map(|d| d * factor).collect(),
        }
    }

    /// Non-zero entries as `(src, dst, demand)` triples, row-major.
    pub fn demands(&self) -> Vec<(NodeId, NodeId, f64)> {
        self.demand
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0.0)
            .map(|(k, &d)| (k / self.n, k % self.n, d))
            .collect()
    }
}

/// `T[i][j] = p_in[i] * p_out[j]` off the diagonal.
pub fn gravity_mean_tm(params: &GravityParams) -> TrafficMatrix {
    let n = params.n_nodes();
    let mut tm = TrafficMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                tm.demand[i * n + j] = params.p_in[i] * params.p_out[j];
            }
        }
    }
    tm
}

/// Draws every `p_in[i]` and `p_out[j]` i.i.d. exponential with mean `rate`.
pub fn sample_gravity_params(n: usize, rate: f64, seed: u64) -> Result<GravityParams> {
    if n < 2 {
        return Err(Error::Config(format!("gravity model needs >= 2 nodes, got {n}")));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Config(format!("rate must be positive, got {rate}")));
    }
    let exp = Exp::new(1.0 / rate).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_in = (0..n).map(|_| exp.sample(&mut rng)).collect();
    let p_out = (0..n).map(|_| exp.sample(&mut rng)).collect();
    GravityParams::new(p_in, p_out, DEFAULT_STD_FRACTION)
}

/// Gravity weights for time step `step`: each drawn Gaussian around its mean
/// with standard deviation `std_fraction * mean`, truncated at zero.
///
/// A pure function of `(params, seed, step)`.
pub fn perturb_params(params: &GravityParams, seed: u64, step: usize) -> GravityParams {
    if params.std_fraction == 0.0 {
        return params.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    let mut draw = |mean: f64| {
        let normal = Normal::new(mean, params.std_fraction * mean).expect("finite std");
        normal.sample(&mut rng).max(0.0)
    };
    let p_in = params.p_in.iter().map(|&m| draw(m)).collect();
    let p_out = params.p_out.iter().map(|&m| draw(m)).collect();
    GravityParams {
        p_in,
        p_out,
        std_fraction: params.std_fraction,
    }
}

/// The traffic matrix of time step `step`; see [`perturb_params`].
pub fn perturb_tm(params: &GravityParams, seed: u64, step: usize) -> TrafficMatrix {
    gravity_mean_tm(&perturb_params(params, seed, step))
}

/// Maximum link utilization when `tm` is routed over plain ECMP.
pub fn max_utilization(tm: &TrafficMatrix, network: &Network) -> Result<f64> {
    let loads = network.accumulate(&tm.demands())?;
    Ok(network.max_utilization(loads.as_slice()))
}

/// Scales `tm` so that its routed maximum link utilization equals `target`.
/// Returns the scaled matrix and the factor applied.
pub fn scale_to_utilization(
    tm: &TrafficMatrix,
    network: &Network,
    target: f64,
) -> Result<(TrafficMatrix, f64)> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::Scaling(format!("target utilization must be positive, got {target}")));
    }
    let current = max_utilization(tm, network)?;
    if current <= 0.0 {
        return Err(Error::Scaling("traffic matrix carries no traffic".into()));
    }
    let factor = target / current;
    Ok((tm.scaled(factor), factor))
}

/// Parses a traffic-matrix series: a header line holding `n`, then one line
/// per time step with `n * n` non-negative values in row-major order. `#`
/// starts a comment.
pub fn parse_tm_series(text: &str, origin: &Path) -> Result<Vec<TrafficMatrix>> {
    let mut n = None;
    let mut series = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some(n) = n else {
            let value = line
                .parse::<usize>()
                .map_err(|_| Error::parse(origin, lineno, format!("bad node count `{line}`")))?;
            if value == 0 {
                return Err(Error::parse(origin, lineno, "node count must be positive"));
            }
            n = Some(value);
            continue;
        };
        let values = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(origin, lineno, format!("bad number `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n * n {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {} values, found {}", n * n, values.len()),
            ));
        }
        let tm = TrafficMatrix::from_vec(n, values)
            .map_err(|e| Error::parse(origin, lineno, e.to_string()))?;
        series.push(tm);
    }
    if n.is_none() {
        return Err(Error::parse(origin, 0, "empty traffic series"));
    }
    Ok(series)
}

pub fn load_tm_series(path: impl AsRef<Path>) -> Result<Vec<TrafficMatrix>> {
    let path = path.as_ref();
    parse_tm_series(&fs::read_to_string(path)?, path)
}

pub fn tm_series_to_text(series: &[TrafficMatrix]) -> Result<String> {
    let n = series.first().map_or(0, |tm| tm.n());
    let mut out = format!("{n}\n");
    for tm in series {
        if tm.n() != n {
            return Err(Error::Dimension {
                expected: n,
                got: tm.n(),
            });
        }
        let row: Vec<String> = tm.demand.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    Ok(out)
}

pub fn write_tm_series(path: impl AsRef<Path>, series: &[TrafficMatrix]) -> Result<()> {
    fs::write(path, tm_series_to_text(series)?)?;
    Ok(())
}
