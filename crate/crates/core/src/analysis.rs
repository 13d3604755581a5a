//! Exponential-decay fits, the union-bound check on total variation between
//! extreme starts, and mixing-time scans across graph sizes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::MCurveEstimate;
use crate::ctmc::{build_generator, exact_m_curve, exact_mixing_time, tv_distance, Distribution};
use crate::dynamics::ModelParams;
use crate::error::{input, Error, Result};
use crate::graph::Graph;

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root mean square residual.
    pub rms: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 paired points, got {} and {}", xs.len(), ys.len())));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / m).sqrt();
    Ok(LinearFit { intercept, slope, rms })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitSource {
    Exact,
    MonteCarlo,
}

/// `value(t) ≈ C·exp(−c·t)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    #[serde(rename = "C_hat")]
    pub prefactor: f64,
    #[serde(rename = "c_hat")]
    pub rate: f64,
    /// RMS residual in log space.
    pub residual: f64,
    pub source: FitSource,
    pub points: usize,
    /// Standard error of the rate, propagated from per-point errors when known.
    pub rate_stderr: Option<f64>,
}

/// Points used by a fit: inside `window` (inclusive) if given, otherwise
/// those whose value lies in `[1e-8, 0.5]`.
fn select(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Vec<usize> {
    (0..times.len())
        .filter(|&k| match window {
            Some((lo, hi)) => times[k] >= lo && times[k] <= hi,
            None => (1e-8..=0.5).contains(&values[k]),
        })
        .filter(|&k| values[k] > 1e-14)
        .collect()
}

fn fit_indices(times: &[f64], values: &[f64], idx: &[usize], source: FitSource, errors: Option<&[f64]>) -> Result<DecayFit> {
    if idx.len() < 4 {
        return Err(Error::DegenerateFit(format!("need 4 points above 1e-14 in the window, have {}", idx.len())));
    }
    let xs: Vec<f64> = idx.iter().map(|&k| times[k]).collect();
    let ys: Vec<f64> = idx.iter().map(|&k| values[k].ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let rate_stderr = errors.map(|se| {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        idx.iter()
            .zip(&xs)
            .map(|(&k, x)| ((x - mx) / sxx).powi(2) * (se[k] / values[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    Ok(DecayFit {
        prefactor: fit.intercept.exp(),
        rate: -fit.slope,
        residual: fit.rms,
        source,
        points: idx.len(),
        rate_stderr,
    })
}

/// Least-squares line through `(t, ln value)`.
pub fn fit_decay(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Result<DecayFit> {
    if times.len() != values.len() {
        return input("times and values differ in length");
    }
    fit_indices(times, values, &select(times, values, window), FitSource::Exact, None)
}

/// Decay fit of a Monte Carlo M̂(t) curve.
///
/// The points share replicas, so their errors are correlated. The rate
/// error propagates the batch-means covariance of M̂ across times through
/// the least-squares slope (first order in ln M̂). With a single batch it
/// falls back to independent binomial errors.
pub fn fit_mc_decay(est: &MCurveEstimate, window: Option<(f64, f64)>) -> Result<DecayFit> {
    let idx = select(&est.times, &est.m_hat, window);
    let mut fit = fit_indices(&est.times, &est.m_hat, &idx, FitSource::MonteCarlo, Some(&est.m_stderr))?;
    let batches = est.batch_m.first().map_or(0, Vec::len);
    if batches >= 2 {
        let xs: Vec<f64> = idx.iter().map(|&k| est.times[k]).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        // Slope of ln M̂ is Σ g_i·M̂_i to first order, g_i = w_i / M̂_i.
        let g: Vec<f64> = idx.iter().zip(&xs).map(|(&k, x)| (x - mx) / sxx / est.m_hat[k]).collect();
        let per_batch: Vec<f64> =
            (0..batches).map(|b| idx.iter().zip(&g).map(|(&k, gi)| gi * est.batch_m[k][b]).sum()).collect();
        let mean = per_batch.iter().sum::<f64>() / batches as f64;
        let var = per_batch.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (batches * (batches - 1)) as f64;
        fit.rate_stderr = Some(var.sqrt());
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OtmRow {
    pub t: f64,
    /// ‖P_0̄(X_t ∈ ·) − P_1̄(X_t ∈ ·)‖.
    pub tv: f64,
    /// Σ_v P(Z_t(v) = 1), exact.
    pub union_bound: f64,
    /// n·exp(−2δt/(2δ+1)), i.e. C = 1.
    pub bound: f64,
    pub margin: f64,
}

/// Compares the exact distance between the all-0 and all-1 starts with the
/// union bound and with n·exp(−2δt/(2δ+1)) at each grid time.
pub fn otm_bound_check(graph: &Graph, params: &ModelParams, t_grid: &[f64]) -> Result<Vec<OtmRow>> {
    params.validate_symmetric()?;
    let q = build_generator(graph, params, None)?;
    let curve = exact_m_curve(graph, params, t_grid)?;
    let dim = q.dim();
    let n = graph.n() as f64;
    let c = params.noise_fraction();
    let mut from0 = Distribution::point_mass(dim, 0).0;
    let mut from1 = Distribution::point_mass(dim, dim - 1).0;
    let mut now = 0.0;
    t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            q.advance(&mut from0, t - now);
            q.advance(&mut from1, t - now);
            now = t;
            let tv = tv_distance(&Distribution(from0.clone()), &Distribution(from1.clone()))?;
            let bound = n * (-c * t).exp();
            Ok(OtmRow { t, tv, union_bound: curve.per_vertex[k].iter().sum(), bound, margin: bound - tv })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFamily {
    Cycle,
    Path,
    SquareBox,
}

impl GraphFamily {
    /// Member of the family with `n` vertices; square boxes need a perfect square.
    pub fn build(self, n: usize) -> Result<Graph> {
        match self {
            GraphFamily::Cycle => Graph::cycle(n),
            GraphFamily::Path => Graph::path(n),
            GraphFamily::SquareBox => {
                let k = (n as f64).sqrt().round() as usize;
                if k * k != n {
                    return input(format!("square-box family needs a perfect square, got {n}"));
                }
                Graph::grid(k, k)
            }
        }
    }
}

impl FromStr for GraphFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(GraphFamily::Cycle),
            "path" => Ok(GraphFamily::Path),
            "square-box" => Ok(GraphFamily::SquareBox),
            _ => input(format!("unknown family {s:?}; expected cycle, path or square-box")),
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphFamily::Cycle => "cycle",
            GraphFamily::Path => "path",
            GraphFamily::SquareBox => "square-box",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub family: GraphFamily,
    pub n: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub t_mix: f64,
    /// ((2δ+1)/(2δ))·ln(n/ε).
    pub bound: f64,
    pub all_initial_states: bool,
}

impl ScalingRow {
    pub fn margin(&self) -> f64 {
        self.bound - self.t_mix
    }
}

/// `t_mix ≈ a + b·ln n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingScan {
    pub rows: Vec<ScalingRow>,
    pub fit: Option<LogFit>,
}

impl MixingScan {
    pub fn all_within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.t_mix <= r.bound)
    }

    /// CSV with header `family,n,delta,epsilon,t_mix,bound,margin`.
    pub fn to_csv(&self) -> String {
        let f = crate::fmt_float;
        let mut out = String::from("family,n,delta,epsilon,t_mix,bound,margin\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.family,
                r.n,
                f(r.delta),
                f(r.epsilon),
                f(r.t_mix),
                f(r.bound),
                f(r.margin())
            ));
        }
        out
    }
}

/// Upper bound ((2δ+1)/(2δ))·ln(n/ε) on t_mix(ε) for the symmetric model.
pub fn mixing_time_bound(n: usize, params: &ModelParams, epsilon: f64) -> f64 {
    (n as f64 / epsilon).ln() / params.noise_fraction()
}

/// Exact mixing times for each size in `n_list` and a fit in ln n.
pub fn mixing_scan(family: GraphFamily, n_list: &[usize], params: &ModelParams, epsilon: f64) -> Result<MixingScan> {
    params.validate_ergodic()?;
    params.validate_symmetric()?;
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let g = family.build(n)?;
            let q = build_generator(&g, params, None)?;
            let r = exact_mixing_time(&q, epsilon)?;
            Ok(ScalingRow {
                family,
                n,
                delta: params.delta,
                epsilon,
                t_mix: r.t_mix,
                bound: mixing_time_bound(n, params, epsilon),
                all_initial_states: r.all_initial_states,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.t_mix).collect();
        let lf = linear_fit(&xs, &ys)?;
        Some(LogFit { a: lf.intercept, b: lf.slope, residual: lf.rms })
    } else {
        None
    };
    Ok(MixingScan { rows, fit })
}
