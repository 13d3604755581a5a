//! Grand coupling of two noisy voter copies on shared randomness, the
//! disagreement field, and Monte Carlo estimation of the worst-vertex
//! disagreement probability M(t).
//!
//! Each ring at `v` draws one branch uniform and one neighbor uniform that
//! both copies share: both spins are set to 0, both set to 1, or both copy
//! the same neighbor.

use rayon::prelude::*;

use crate::dynamics::{apply_branch, select_branch, Configuration, EventDraws, ModelParams};
use crate::error::{input, Result};
use crate::graph::Graph;
use crate::rng::ReplicaStream;

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub x: Configuration,
    pub y: Configuration,
    pub time: f64,
}

/// Per-vertex indicator that the two copies disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisagreementField {
    pub z: Configuration,
}

impl DisagreementField {
    pub fn get(&self, v: usize) -> bool {
        self.z.get(v)
    }

    pub fn count(&self) -> usize {
        self.z.count_ones()
    }

    pub fn is_coalesced(&self) -> bool {
        self.z.is_zero()
    }
}

impl CoupledState {
    pub fn new(x: Configuration, y: Configuration) -> Result<Self> {
        if x.len() != y.len() {
            return input(format!("coupled copies have {} and {} spins", x.len(), y.len()));
        }
        Ok(CoupledState { x, y, time: 0.0 })
    }

    pub fn disagreement(&self) -> DisagreementField {
        DisagreementField { z: self.x.xor(&self.y) }
    }

    /// Applies one ring at `v` to both copies with the shared uniforms.
    #[inline]
    pub fn update(&mut self, graph: &Graph, params: &ModelParams, v: usize, branch_u: f64, neighbor_u: f64) {
        let branch = select_branch(graph, v, params, branch_u, neighbor_u);
        let xs = apply_branch(&self.x, v, branch);
        let ys = apply_branch(&self.y, v, branch);
        self.x.set(v, xs);
        self.y.set(v, ys);
    }
}

/// Stateless form of [`CoupledState::update`].
pub fn coupled_update(
    state: &CoupledState,
    graph: &Graph,
    params: &ModelParams,
    v: usize,
    branch_u: f64,
    neighbor_u: f64,
) -> CoupledState {
    let mut next = state.clone();
    next.update(graph, params, v, branch_u, neighbor_u);
    next
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledEvent {
    pub time: f64,
    pub vertex: usize,
    pub x_spin: bool,
    pub y_spin: bool,
}

#[derive(Debug, Clone)]
pub struct CoupledTrajectory {
    pub x0: Configuration,
    pub y0: Configuration,
    pub events: Vec<CoupledEvent>,
    pub t_end: f64,
}

impl CoupledTrajectory {
    /// Replays the path, calling `visit` with the state after every event.
    pub fn replay(&self, mut visit: impl FnMut(&CoupledState)) {
        let mut s = CoupledState { x: self.x0.clone(), y: self.y0.clone(), time: 0.0 };
        for e in &self.events {
            s.x.set(e.vertex, e.x_spin);
            s.y.set(e.vertex, e.y_spin);
            s.time = e.time;
            visit(&s);
        }
    }

    /// State at each (sorted) sample time, by replaying events up to it.
    pub fn sample(&self, times: &[f64]) -> Vec<CoupledState> {
        let mut s = CoupledState { x: self.x0.clone(), y: self.y0.clone(), time: 0.0 };
        let mut k = 0;
        times
            .iter()
            .map(|&t| {
                while k < self.events.len() && self.events[k].time <= t {
                    let e = self.events[k];
                    s.x.set(e.vertex, e.x_spin);
                    s.y.set(e.vertex, e.y_spin);
                    k += 1;
                }
                CoupledState { time: t, ..s.clone() }
            })
            .collect()
    }

    pub fn final_state(&self) -> CoupledState {
        self.sample(&[self.t_end]).pop().expect("one sample")
    }

    /// CSV with header `time,vertex,x_spin,y_spin,disagreements`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,vertex,x_spin,y_spin,disagreements\n");
        let mut z = self.x0.xor(&self.y0);
        for e in &self.events {
            z.set(e.vertex, e.x_spin != e.y_spin);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::fmt_float(e.time),
                e.vertex,
                e.x_spin as u8,
                e.y_spin as u8,
                z.count_ones()
            ));
        }
        out
    }
}

fn check_coupling_inputs(params: &ModelParams) -> Result<()> {
    params.validate()?;
    params.validate_symmetric()
}

/// Runs the coupled pair from `(x0, y0)` up to `t_end` on replica stream
/// `replica` of `seed`.
pub fn run_coupling_replica(
    graph: &Graph,
    params: &ModelParams,
    x0: &Configuration,
    y0: &Configuration,
    t_end: f64,
    seed: u64,
    replica: u64,
) -> Result<CoupledTrajectory> {
    check_coupling_inputs(params)?;
    if x0.len() != graph.n() || y0.len() != graph.n() {
        return input("initial configurations must match the graph size");
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return input(format!("t_end must be finite and >= 0, got {t_end}"));
    }
    let n = graph.n();
    let mut state = CoupledState::new(x0.clone(), y0.clone())?;
    let mut events = Vec::new();
    if n > 0 {
        let mut stream = ReplicaStream::new(seed, replica);
        loop {
            let d = EventDraws::next(&mut stream, n);
            state.time += d.wait;
            if state.time > t_end {
                break;
            }
            state.update(graph, params, d.vertex, d.branch_u, d.neighbor_u);
            events.push(CoupledEvent {
                time: state.time,
                vertex: d.vertex,
                x_spin: state.x.get(d.vertex),
                y_spin: state.y.get(d.vertex),
            });
        }
    }
    Ok(CoupledTrajectory { x0: x0.clone(), y0: y0.clone(), events, t_end })
}

pub fn run_coupling(
    graph: &Graph,
    params: &ModelParams,
    x0: &Configuration,
    y0: &Configuration,
    t_end: f64,
    seed: u64,
) -> Result<CoupledTrajectory> {
    run_coupling_replica(graph, params, x0, y0, t_end, seed, 0)
}

/// Monte Carlo estimate of per-vertex disagreement probabilities from the
/// `(0̄, 1̄)` start.
#[derive(Debug, Clone)]
pub struct MCurveEstimate {
    pub times: Vec<f64>,
    /// `p_hat[k][v]` estimates P(Z_{t_k}(v) = 1).
    pub p_hat: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// max over vertices of `p_hat[k]`.
    pub m_hat: Vec<f64>,
    /// Vertex attaining `m_hat[k]` (lowest id on ties).
    pub argmax: Vec<usize>,
    /// Binomial standard error at the maximizing vertex.
    pub m_stderr: Vec<f64>,
    /// Fraction of replicas with X_t ≠ Y_t anywhere.
    pub p_any: Vec<f64>,
    /// `batch_m[k][b]`: disagreement frequency at `argmax[k]` within the
    /// `b`-th contiguous block of replicas. Used for covariances across times.
    pub batch_m: Vec<Vec<f64>>,
    pub replicas: u64,
}

impl MCurveEstimate {
    /// CSV with header `t,vertex,p_hat,stderr`; after each time block a
    /// summary row with `vertex = max` carries `m_hat` and its error.
    pub fn to_csv(&self) -> String {
        let f = crate::fmt_float;
        let mut out = String::from("t,vertex,p_hat,stderr\n");
        for (k, &t) in self.times.iter().enumerate() {
            for (v, (p, s)) in self.p_hat[k].iter().zip(&self.stderr[k]).enumerate() {
                out.push_str(&format!("{},{},{},{}\n", f(t), v, f(*p), f(*s)));
            }
            out.push_str(&format!("{},max,{},{}\n", f(t), f(self.m_hat[k]), f(self.m_stderr[k])));
        }
        out
    }
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return input("time grid entries must be finite and >= 0");
    }
    if t_grid.windows(2).any(|w| w[0] > w[1]) {
        return input("time grid must be sorted ascending");
    }
    Ok(())
}

/// Replicas are split into this many contiguous blocks for batch-means errors.
const MC_BATCHES: u64 = 20;

/// Disagreement indicators of one replica at each grid time, written into
/// `counts[k * n + v]`; `any[k]` counts global disagreement.
fn accumulate_replica(
    graph: &Graph,
    params: &ModelParams,
    t_grid: &[f64],
    seed: u64,
    replica: u64,
    counts: &mut [u64],
    any: &mut [u64],
) {
    let n = graph.n();
    let mut state = CoupledState { x: Configuration::zeros(n), y: Configuration::ones(n), time: 0.0 };
    let mut stream = ReplicaStream::new(seed, replica);
    let mut next = EventDraws::next(&mut stream, n);
    for (k, &t) in t_grid.iter().enumerate() {
        while state.time + next.wait <= t {
            state.time += next.wait;
            state.update(graph, params, next.vertex, next.branch_u, next.neighbor_u);
            next = EventDraws::next(&mut stream, n);
        }
        let z = state.disagreement();
        if z.is_coalesced() {
            // Shared updates keep coalesced copies together for all later times.
            return;
        }
        any[k] += 1;
        for v in 0..n {
            counts[k * n + v] += z.get(v) as u64;
        }
    }
}

/// Estimates M(t) on `t_grid` from `replicas` independent coupled runs.
///
/// Replica `r` uses stream `(seed, r)`; tallies are integer sums, so the
/// result does not depend on the rayon thread count.
pub fn estimate_m(
    graph: &Graph,
    params: &ModelParams,
    t_grid: &[f64],
    replicas: u64,
    seed: u64,
) -> Result<MCurveEstimate> {
    check_coupling_inputs(params)?;
    check_grid(t_grid)?;
    if replicas == 0 {
        return input("replicas must be >= 1");
    }
    let n = graph.n();
    if n == 0 {
        return input("graph has no vertices");
    }
    let len = t_grid.len();
    let batches = replicas.min(MC_BATCHES) as usize;
    let batch_of = |r: u64| (r as u128 * batches as u128 / replicas as u128) as usize;
    let block = len * n;
    let (batch_counts, any) = (0..replicas)
        .into_par_iter()
        .fold(
            || (vec![0u64; batches * block], vec![0u64; len]),
            |(mut c, mut a), r| {
                let b = batch_of(r);
                accumulate_replica(graph, params, t_grid, seed, r, &mut c[b * block..(b + 1) * block], &mut a);
                (c, a)
            },
        )
        .reduce(
            || (vec![0u64; batches * block], vec![0u64; len]),
            |(mut c1, mut a1), (c2, a2)| {
                c1.iter_mut().zip(c2).for_each(|(x, y)| *x += y);
                a1.iter_mut().zip(a2).for_each(|(x, y)| *x += y);
                (c1, a1)
            },
        );
    let mut counts = vec![0u64; block];
    for chunk in batch_counts.chunks(block) {
        counts.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
    }
    let mut batch_sizes = vec![0u64; batches];
    for b in 0..batches {
        // Replicas r with floor(r·B/R) = b.
        let first = |b: usize| ((b as u128 * replicas as u128).div_ceil(batches as u128)) as u64;
        batch_sizes[b] = first(b + 1) - first(b);
    }

    let rf = replicas as f64;
    let se = |p: f64| (p * (1.0 - p) / rf).sqrt();
    let mut est = MCurveEstimate {
        times: t_grid.to_vec(),
        p_hat: Vec::with_capacity(len),
        stderr: Vec::with_capacity(len),
        m_hat: Vec::with_capacity(len),
        argmax: Vec::with_capacity(len),
        m_stderr: Vec::with_capacity(len),
        p_any: any.iter().map(|&a| a as f64 / rf).collect(),
        batch_m: Vec::with_capacity(len),
        replicas,
    };
    for k in 0..len {
        let row: Vec<f64> = counts[k * n..(k + 1) * n].iter().map(|&c| c as f64 / rf).collect();
        let (arg, &m) = row
            .iter()
            .enumerate()
            .fold((0, &row[0]), |best, (v, p)| if *p > *best.1 { (v, p) } else { best });
        est.stderr.push(row.iter().map(|&p| se(p)).collect());
        est.m_hat.push(m);
        est.argmax.push(arg);
        est.m_stderr.push(se(m));
        est.p_hat.push(row);
        est.batch_m.push(
            (0..batches)
                .map(|b| batch_counts[b * block + k * n + arg] as f64 / batch_sizes[b] as f64)
                .collect(),
        );
    }
    Ok(est)
}
