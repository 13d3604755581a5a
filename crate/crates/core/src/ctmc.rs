//! Exact analysis on the full configuration space `{0,1}^n`.
//!
//! States are encoded as integers whose bit `v` is the spin at `v`. Every
//! generator here only has single-flip transitions, so it is stored as an
//! `n`-wide table of flip rates per state plus the total exit rate.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{rate_from_counts, ModelParams};
use crate::error::{input, Error, Result};
use crate::graph::Graph;

/// Largest vertex count accepted by exact solves (2^20 states).
pub const MAX_EXACT_VERTICES: usize = 20;

/// Below this many states the stationary law is found by a dense LU solve.
const DIRECT_SOLVE_MAX_STATES: usize = 1 << 10;

/// Uniformization chunks keep `Λ·dt` at most this, so Poisson weights never underflow.
const MAX_POISSON_MEAN: f64 = 32.0;

/// Tail mass tolerated by [`GeneratorMatrix::transient`].
pub const TRANSIENT_TOL: f64 = 1e-12;

/// Per-chunk Poisson tail, tight enough that short hops are exact to rounding.
const TAIL_TOL_PER_CHUNK: f64 = 1e-16;

/// Time resolution of [`exact_mixing_time`].
pub const MIXING_RESOLUTION: f64 = 1e-4;

/// Largest number of symmetry-reduced initial states the mixing time scans;
/// beyond it only the all-0 and all-1 starts are used.
pub const MAX_SCAN_STARTS: usize = 1024;

/// Symmetry reduction is attempted up to this many vertices.
const SYMMETRY_MAX_VERTICES: usize = 16;

/// Frozen spins felt by each flipping vertex: `ones[x]` and `zeros[x]` count
/// the neighbors of `x` held at 1 and 0. They add to the degree of `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrozenField {
    pub ones: Vec<usize>,
    pub zeros: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    Spin,
    Disagreement,
}

/// Sparse single-flip rate matrix on `2^n` states.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    n: usize,
    /// `rates[s * n + v]` = q(s, s ^ (1 << v)).
    rates: Vec<f64>,
    /// `exit[s]` = -q(s, s).
    exit: Vec<f64>,
    pub kind: ChainKind,
    pub params: ModelParams,
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_EXACT_VERTICES {
        return Err(Error::Resource { vertices: n, cap: MAX_EXACT_VERTICES });
    }
    Ok(())
}

impl GeneratorMatrix {
    fn from_rate_fn(n: usize, kind: ChainKind, params: ModelParams, rate: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let dim = 1usize << n;
        let mut rates = vec![0.0; dim * n];
        if n > 0 {
            rates.par_chunks_mut(n).enumerate().for_each(|(s, row)| {
                for (v, r) in row.iter_mut().enumerate() {
                    *r = rate(s, v);
                }
            });
        }
        let exit = if n == 0 { vec![0.0; dim] } else { rates.chunks(n).map(|row| row.iter().sum()).collect() };
        GeneratorMatrix { n, rates, exit, kind, params }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// q(s, s^v).
    #[inline]
    pub fn rate(&self, s: usize, v: usize) -> f64 {
        self.rates[s * self.n + v]
    }

    /// q(s, s) = minus the total exit rate.
    #[inline]
    pub fn diagonal(&self, s: usize) -> f64 {
        -self.exit[s]
    }

    /// Entry q(a, b) of the full matrix.
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.diagonal(a);
        }
        let d = a ^ b;
        if d.is_power_of_two() {
            self.rate(a, d.trailing_zeros() as usize)
        } else {
            0.0
        }
    }

    pub fn row_sum(&self, s: usize) -> f64 {
        (0..self.n).map(|v| self.rate(s, v)).sum::<f64>() + self.diagonal(s)
    }

    pub fn off_diagonal_nnz(&self) -> usize {
        self.rates.iter().filter(|&&r| r > 0.0).count()
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |a, b| self.entry(a, b))
    }

    /// Row vector product `p · Q`.
    pub fn left_apply(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..self.dim())
            .map(|s| {
                let inflow: f64 = (0..n).map(|v| p[s ^ (1 << v)] * self.rate(s ^ (1 << v), v)).sum();
                inflow - p[s] * self.exit[s]
            })
            .collect()
    }

    /// `out = p · (I + Q/λ)` in pull form; the reduction order per state is fixed.
    fn uniformized_step(&self, p: &[f64], out: &mut [f64], lambda: f64) {
        let n = self.n;
        let inv = 1.0 / lambda;
        let body = |(s, o): (usize, &mut f64)| {
            let mut acc = p[s] * (1.0 - self.exit[s] * inv);
            for v in 0..n {
                let r = s ^ (1 << v);
                acc += p[r] * self.rates[r * n + v] * inv;
            }
            *o = acc;
        };
        if out.len() >= 1 << 12 {
            out.par_iter_mut().enumerate().for_each(body);
        } else {
            out.iter_mut().enumerate().for_each(body);
        }
    }

    /// Solves dp/dt = p·Q from `p0` over time `t` by uniformization.
    /// The truncated Poisson tail has total mass at most [`TRANSIENT_TOL`].
    pub fn transient(&self, p0: &Distribution, t: f64) -> Result<Distribution> {
        if p0.len() != self.dim() {
            return input(format!("distribution has {} entries, chain has {}", p0.len(), self.dim()));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return input(format!("time must be finite and >= 0, got {t}"));
        }
        let mut p = p0.0.clone();
        self.advance(&mut p, t);
        Ok(Distribution(p))
    }

    pub(crate) fn advance(&self, p: &mut [f64], t: f64) {
        let lambda = self.max_exit_rate();
        if t == 0.0 || lambda == 0.0 {
            return;
        }
        let chunks = ((lambda * t) / MAX_POISSON_MEAN).ceil().max(1.0) as usize;
        let dt = t / chunks as f64;
        let tol = (TRANSIENT_TOL / chunks as f64).min(TAIL_TOL_PER_CHUNK);
        let mean = lambda * dt;
        let k_max = (mean + 20.0 * mean.sqrt() + 100.0) as usize;
        let dim = p.len();
        let mut v = vec![0.0; dim];
        let mut next = vec![0.0; dim];
        let mut acc = vec![0.0; dim];
        for _ in 0..chunks {
            let mut w = (-mean).exp();
            v.copy_from_slice(p);
            acc.iter_mut().zip(p.iter()).for_each(|(a, x)| *a = w * x);
            let mut k = 0;
            // Past the mode, the Poisson tail after term k is at most
            // w_k·r/(1−r) with r = mean/(k+1).
            while k < k_max {
                let r = mean / (k + 1) as f64;
                if r < 1.0 && w * r / (1.0 - r) <= tol {
                    break;
                }
                self.uniformized_step(&v, &mut next, lambda);
                std::mem::swap(&mut v, &mut next);
                k += 1;
                w *= mean / k as f64;
                acc.iter_mut().zip(&v).for_each(|(a, x)| *a += w * x);
            }
            p.copy_from_slice(&acc);
        }
    }

    /// Strong connectivity over positive off-diagonal rates, checked by a
    /// forward and a backward search from state 0.
    pub fn check_irreducible(&self) -> Result<()> {
        let dim = self.dim();
        for forward in [true, false] {
            let mut seen = vec![false; dim];
            seen[0] = true;
            let mut stack = vec![0usize];
            while let Some(s) = stack.pop() {
                for v in 0..self.n {
                    let r = s ^ (1 << v);
                    let edge = if forward { self.rate(s, v) } else { self.rate(r, v) };
                    if edge > 0.0 && !seen[r] {
                        seen[r] = true;
                        stack.push(r);
                    }
                }
            }
            if let Some(miss) = seen.iter().position(|&x| !x) {
                return Err(if forward {
                    Error::Reducible { from: 0, to: miss }
                } else {
                    Error::Reducible { from: miss, to: 0 }
                });
            }
        }
        Ok(())
    }

    /// ∞-norm of π·Q.
    pub fn balance_residual(&self, pi: &Distribution) -> f64 {
        self.left_apply(&pi.0).iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Generator of the noisy voter spin chain. With `frozen`, the fixed
/// neighbor spins enter each vertex's count and degree.
pub fn build_generator(graph: &Graph, params: &ModelParams, frozen: Option<&FrozenField>) -> Result<GeneratorMatrix> {
    params.validate_ergodic()?;
    let n = graph.n();
    check_size(n)?;
    if let Some(f) = frozen {
        if f.ones.len() != n || f.zeros.len() != n {
            return input("frozen field must have one entry per vertex");
        }
    }
    let nbr_masks: Vec<usize> = (0..n).map(|x| graph.neighbors(x).iter().fold(0, |m, &u| m | 1 << u)).collect();
    let p = *params;
    Ok(GeneratorMatrix::from_rate_fn(n, ChainKind::Spin, p, move |s, x| {
        let spin = s >> x & 1 == 1;
        let ones_in = (s & nbr_masks[x]).count_ones() as usize;
        let mut degree = graph.degree(x);
        let mut ones = ones_in;
        if let Some(f) = frozen {
            degree += f.ones[x] + f.zeros[x];
            ones += f.ones[x];
        }
        let disagree = if spin { degree - ones } else { ones };
        rate_from_counts(spin, disagree, degree, &p)
    }))
}

/// Generator of the disagreement chain Z of the grand coupling:
/// q(η, η^v) = (2δ/(2δ+1))·1{η(v)=1} + (1/(2δ+1))·(1/d(v))·#{u ∼ v : η(u) ≠ η(v)}.
pub fn build_disagreement_generator(graph: &Graph, params: &ModelParams) -> Result<GeneratorMatrix> {
    params.validate_ergodic()?;
    params.validate_symmetric()?;
    let n = graph.n();
    check_size(n)?;
    let nbr_masks: Vec<usize> = (0..n).map(|x| graph.neighbors(x).iter().fold(0, |m, &u| m | 1 << u)).collect();
    let kill = params.noise_fraction();
    let copy = 1.0 / params.normalizer();
    Ok(GeneratorMatrix::from_rate_fn(n, ChainKind::Disagreement, *params, move |s, v| {
        let z = s >> v & 1 == 1;
        let d = graph.degree(v);
        let imitation = if d == 0 {
            0.0
        } else {
            let ones = (s & nbr_masks[v]).count_ones() as usize;
            let differ = if z { d - ones } else { ones };
            differ as f64 / d as f64
        };
        kill * z as u8 as f64 + copy * imitation
    }))
}

/// Probability vector over state encodings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution(pub Vec<f64>);

impl Distribution {
    pub fn point_mass(dim: usize, state: usize) -> Self {
        let mut p = vec![0.0; dim];
        p[state] = 1.0;
        Distribution(p)
    }

    pub fn uniform(dim: usize) -> Self {
        Distribution(vec![1.0 / dim as f64; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// P(bit v = 1).
    pub fn marginal(&self, v: usize) -> f64 {
        self.0.iter().enumerate().filter(|(s, _)| s >> v & 1 == 1).map(|(_, p)| p).sum()
    }

    /// P(bit x = a, bit u = b).
    pub fn pair(&self, x: usize, a: bool, u: usize, b: bool) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(s, _)| (s >> x & 1 == 1) == a && (s >> u & 1 == 1) == b)
            .map(|(_, p)| p)
            .sum()
    }

    /// Law of the bits listed in `positions`, re-encoded so that bit `i` of
    /// the result is bit `positions[i]` of the original state.
    pub fn project(&self, positions: &[usize]) -> Distribution {
        let mut out = vec![0.0; 1 << positions.len()];
        for (s, p) in self.0.iter().enumerate() {
            let t = positions.iter().enumerate().fold(0, |acc, (i, &v)| acc | (s >> v & 1) << i);
            out[t] += p;
        }
        Distribution(out)
    }

    /// CSV with header `state,config,probability`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("state,config,probability\n");
        for (s, p) in self.0.iter().enumerate() {
            let bits: String = (0..n).map(|v| if s >> v & 1 == 1 { '1' } else { '0' }).collect();
            out.push_str(&format!("{s},{bits},{}\n", crate::fmt_float(*p)));
        }
        out
    }
}

/// Half the L1 distance, i.e. the largest gap over events.
pub fn tv_distance(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.len() != b.len() {
        return input(format!("distributions have {} and {} entries", a.len(), b.len()));
    }
    Ok(tv_slices(&a.0, &b.0))
}

fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    (0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()).min(1.0)
}

/// Stationary law: solves π·Q = 0 with Σπ = 1.
pub fn stationary(q: &GeneratorMatrix) -> Result<Distribution> {
    q.check_irreducible()?;
    let dim = q.dim();
    let mut pi = if dim <= DIRECT_SOLVE_MAX_STATES { direct_stationary(q)? } else { vec![1.0 / dim as f64; dim] };
    gauss_seidel(q, &mut pi, 1e-13, if dim <= DIRECT_SOLVE_MAX_STATES { 50 } else { 200_000 })?;
    let pi = Distribution(pi);
    let res = q.balance_residual(&pi);
    if res > 1e-10 {
        return Err(Error::NoConvergence(format!("stationary residual {res:e} exceeds 1e-10")));
    }
    Ok(pi)
}

fn direct_stationary(q: &GeneratorMatrix) -> Result<Vec<f64>> {
    let dim = q.dim();
    // Q^T π = 0 with the last balance equation replaced by Σπ = 1.
    let mut a = q.to_dense().transpose();
    a.row_mut(dim - 1).fill(1.0);
    let mut b = DVector::zeros(dim);
    b[dim - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NoConvergence("singular stationary system".into()))?;
    Ok(x.iter().map(|&p| p.max(0.0)).collect())
}

/// Gauss–Seidel sweeps on the balance equations
/// π(s)·exit(s) = Σ_v π(s^v)·q(s^v, s), renormalizing between checks.
fn gauss_seidel(q: &GeneratorMatrix, pi: &mut [f64], tol: f64, max_sweeps: usize) -> Result<()> {
    let n = q.n;
    let normalize = |pi: &mut [f64]| {
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|p| *p /= s);
    };
    normalize(pi);
    let mut sweeps = 0;
    loop {
        let res = q.balance_residual(&Distribution(pi.to_vec()));
        if res <= tol {
            return Ok(());
        }
        if sweeps >= max_sweeps {
            // The caller decides whether the achieved residual is acceptable.
            return Ok(());
        }
        for _ in 0..10 {
            for s in 0..pi.len() {
                let inflow: f64 = (0..n).map(|v| pi[s ^ (1 << v)] * q.rate(s ^ (1 << v), v)).sum();
                if q.exit[s] > 0.0 {
                    pi[s] = inflow / q.exit[s];
                }
            }
            normalize(pi);
        }
        sweeps += 10;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingTimeResult {
    pub epsilon: f64,
    pub t_mix: f64,
    /// Initial state attaining the largest distance at `t_mix`.
    pub worst_state: usize,
    /// Bisection resolution in time.
    pub tolerance: f64,
    /// False when only the all-0 and all-1 starts were scanned. When true,
    /// every start was covered, directly or through a rate-preserving
    /// symmetry.
    pub all_initial_states: bool,
}

/// t_mix(ε) = inf{t : max_x ‖P_x(X_t ∈ ·) − π‖ ≤ ε}.
///
/// Point-mass starts suffice since the distance to π is convex in the
/// initial law, and one start per symmetry class of the generator suffices
/// among those. Rows are advanced together in steps, and the crossing step
/// is refined by bisection to [`MIXING_RESOLUTION`].
pub fn exact_mixing_time(q: &GeneratorMatrix, epsilon: f64) -> Result<MixingTimeResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return input(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    q.params.validate_ergodic()?;
    let pi = stationary(q)?;
    let dim = q.dim();
    let reps = if q.n <= SYMMETRY_MAX_VERTICES { crate::symmetry::start_representatives(q) } else { Vec::new() };
    let all = !reps.is_empty() && reps.len() <= MAX_SCAN_STARTS;
    let starts: Vec<usize> = if all { reps } else { vec![0, dim - 1] };

    let worst = |rows: &[Vec<f64>]| -> (f64, usize) {
        rows.par_iter()
            .map(|r| tv_slices(r, &pi.0))
            .collect::<Vec<_>>()
            .into_iter()
            .zip(&starts)
            .fold((f64::NEG_INFINITY, 0), |best, (d, &s)| if d > best.0 { (d, s) } else { best })
    };
    let advance = |rows: &[Vec<f64>], dt: f64| -> Vec<Vec<f64>> {
        rows.par_iter()
            .map(|r| {
                let mut r = r.clone();
                q.advance(&mut r, dt);
                r
            })
            .collect()
    };

    let mut rows: Vec<Vec<f64>> = starts.iter().map(|&s| Distribution::point_mass(dim, s).0).collect();
    let (d0, s0) = worst(&rows);
    if d0 <= epsilon {
        return Ok(MixingTimeResult { epsilon, t_mix: 0.0, worst_state: s0, tolerance: MIXING_RESOLUTION, all_initial_states: all });
    }

    // Bracket from the decay bound when available, otherwise a generous cap.
    let p = q.params;
    let upper = if p.delta == p.beta && q.n > 0 {
        let c = p.noise_fraction();
        (q.n as f64 / epsilon).ln() / c + 10.0
    } else {
        1e4
    };
    let step = 0.25;
    let mut lo = 0.0;
    let mut hi_rows;
    loop {
        hi_rows = advance(&rows, step);
        if worst(&hi_rows).0 <= epsilon {
            break;
        }
        rows = hi_rows;
        lo += step;
        if lo > upper {
            return Err(Error::NoConvergence(format!("distance still above {epsilon} at t = {lo}")));
        }
    }
    let mut hi = lo + step;
    while hi - lo > MIXING_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        let mid_rows = advance(&rows, mid - lo);
        if worst(&mid_rows).0 <= epsilon {
            hi = mid;
            hi_rows = mid_rows;
        } else {
            lo = mid;
            rows = mid_rows;
        }
    }
    let (_, worst_state) = worst(&hi_rows);
    Ok(MixingTimeResult { epsilon, t_mix: hi, worst_state, tolerance: MIXING_RESOLUTION, all_initial_states: all })
}

/// Exact M(t) = max_v P(Z_t(v) = 1) from Z_0 = 1̄.
#[derive(Debug, Clone, Serialize)]
pub struct ExactMCurve {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    /// `per_vertex[k][v]` = P(Z_{t_k}(v) = 1).
    pub per_vertex: Vec<Vec<f64>>,
    pub argmax: Vec<usize>,
}

impl ExactMCurve {
    /// CSV with header `t,m,argmax,bound`; `bound` is exp(-2δt/(2δ+1)).
    pub fn to_csv(&self, params: &ModelParams) -> String {
        let f = crate::fmt_float;
        let mut out = String::from("t,m,argmax,bound\n");
        for (k, &t) in self.times.iter().enumerate() {
            let bound = (-params.noise_fraction() * t).exp();
            out.push_str(&format!("{},{},{},{}\n", f(t), f(self.m[k]), self.argmax[k], f(bound)));
        }
        out
    }
}

/// Transient laws of the disagreement chain from 1̄ on a sorted grid.
fn disagreement_laws(graph: &Graph, params: &ModelParams, t_grid: &[f64]) -> Result<(GeneratorMatrix, Vec<Distribution>)> {
    crate::coupling::check_grid(t_grid)?;
    let q = build_disagreement_generator(graph, params)?;
    let dim = q.dim();
    let mut p = Distribution::point_mass(dim, dim - 1).0;
    let mut now = 0.0;
    let mut laws = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        q.advance(&mut p, t - now);
        now = t;
        laws.push(Distribution(p.clone()));
    }
    Ok((q, laws))
}

pub fn exact_m_curve(graph: &Graph, params: &ModelParams, t_grid: &[f64]) -> Result<ExactMCurve> {
    let (_, laws) = disagreement_laws(graph, params, t_grid)?;
    let n = graph.n();
    let mut curve = ExactMCurve { times: t_grid.to_vec(), m: vec![], per_vertex: vec![], argmax: vec![] };
    for law in laws {
        let row: Vec<f64> = (0..n).map(|v| law.marginal(v)).collect();
        let (arg, m) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (v, &p)| if p > best.1 { (v, p) } else { best });
        curve.m.push(m);
        curve.argmax.push(arg);
        curve.per_vertex.push(row);
    }
    Ok(curve)
}

/// Both sides of the single-site master equation at vertex `x`, time `t`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MasterEquationCheck {
    /// Central difference of P(Z(x)=1) over `[t-h, t+h]`.
    pub lhs: f64,
    /// −(2δ/(2δ+1))·P(Z(x)=1) − (1/(2δ+1))(1/d(x))·Σ_u [P(Z(x)=1,Z(u)=0) − P(Z(x)=0,Z(u)=1)].
    pub rhs: f64,
    pub residual: f64,
}

pub fn master_eq_check(graph: &Graph, params: &ModelParams, x: usize, t: f64, h: f64) -> Result<MasterEquationCheck> {
    if x >= graph.n() {
        return input(format!("vertex {x} out of range"));
    }
    if !(h > 0.0) || !(t - h >= 0.0) {
        return input(format!("need h > 0 and t - h >= 0, got t={t}, h={h}"));
    }
    // Short hops from t-h keep the three laws mutually consistent.
    let (q, laws) = disagreement_laws(graph, params, &[t - h])?;
    let before = laws.into_iter().next().expect("one law");
    let mut mid = before.0.clone();
    q.advance(&mut mid, h);
    let mut after = mid.clone();
    q.advance(&mut after, h);
    let mid = Distribution(mid);

    let lhs = (Distribution(after).marginal(x) - before.marginal(x)) / (2.0 * h);
    let mut rhs = -params.noise_fraction() * mid.marginal(x);
    let d = graph.degree(x);
    if d > 0 {
        let flow: f64 = graph
            .neighbors(x)
            .iter()
            .map(|&u| mid.pair(x, true, u, false) - mid.pair(x, false, u, true))
            .sum();
        rhs -= flow / (params.normalizer() * d as f64);
    }
    Ok(MasterEquationCheck { lhs, rhs, residual: (lhs - rhs).abs() })
}

/// |LHS − RHS| of the master equation at (`x`, `t`) with step `h`.
pub fn master_eq_residual(graph: &Graph, params: &ModelParams, x: usize, t: f64, h: f64) -> Result<f64> {
    Ok(master_eq_check(graph, params, x, t, h)?.residual)
}
