//! Noisy voter flip rates, the resampling update, and a single-trajectory
//! event-driven simulator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::graph::Graph;
use crate::rng::{index_from_unit, ReplicaStream};

/// Noise parameters.
///
/// `delta` is the noise weight felt by a vertex whose spin is 0 (it pushes
/// that spin to 1); `beta` is the weight felt by a vertex whose spin is 1.
/// The symmetric model has `delta == beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delta: f64,
    pub beta: f64,
}

impl ModelParams {
    pub fn symmetric(delta: f64) -> Self {
        ModelParams { delta, beta: delta }
    }

    pub fn asymmetric(delta: f64, beta: f64) -> Self {
        ModelParams { delta, beta }
    }

    /// Accepts any finite, non-negative pair (including the pure voter model).
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.delta) || !ok(self.beta) {
            return input(format!(
                "noise parameters must be finite and non-negative, got delta={}, beta={}",
                self.delta, self.beta
            ));
        }
        Ok(())
    }

    /// Ergodicity requires strictly positive noise on both spins.
    pub fn validate_ergodic(&self) -> Result<()> {
        self.validate()?;
        if self.delta <= 0.0 || self.beta <= 0.0 {
            return Err(Error::NonErgodic(format!(
                "delta={} and beta={} must both be > 0 (the voter model has absorbing states)",
                self.delta, self.beta
            )));
        }
        Ok(())
    }

    pub fn validate_symmetric(&self) -> Result<()> {
        if self.delta != self.beta {
            return input(format!(
                "the grand coupling is defined for delta == beta, got delta={}, beta={}",
                self.delta, self.beta
            ));
        }
        Ok(())
    }

    /// `delta + beta + 1`.
    #[inline]
    pub fn normalizer(&self) -> f64 {
        self.delta + self.beta + 1.0
    }

    /// Probability that a ring sets the spin to 0 by noise.
    #[inline]
    pub fn p_noise_zero(&self) -> f64 {
        self.beta / self.normalizer()
    }

    /// Probability that a ring sets the spin to 1 by noise.
    #[inline]
    pub fn p_noise_one(&self) -> f64 {
        self.delta / self.normalizer()
    }

    /// `2δ/(2δ+1)` for the symmetric model: the per-ring probability that
    /// the new spin ignores the neighbors.
    #[inline]
    pub fn noise_fraction(&self) -> f64 {
        (self.delta + self.beta) / self.normalizer()
    }
}

/// A 0/1 spin per vertex, bit-packed. Bit `v` holds η(v).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    words: Vec<u64>,
    n: usize,
}

impl Configuration {
    pub fn zeros(n: usize) -> Self {
        Configuration { words: vec![0; n.div_ceil(64)], n }
    }

    pub fn ones(n: usize) -> Self {
        let mut c = Configuration::zeros(n);
        for v in 0..n {
            c.set(v, true);
        }
        c
    }

    /// Configuration whose bit `v` equals bit `v` of `state` (`n <= 64`).
    pub fn from_state(state: usize, n: usize) -> Self {
        debug_assert!(n <= 64);
        let mut c = Configuration::zeros(n);
        if n > 0 {
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            c.words[0] = state as u64 & mask;
        }
        c
    }

    /// Integer encoding with bit `v` = η(v); only meaningful for `n <= 64`.
    pub fn to_state(&self) -> usize {
        self.words.first().copied().unwrap_or(0) as usize
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, v: usize) -> bool {
        self.words[v / 64] >> (v % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, v: usize, spin: bool) {
        let mask = 1u64 << (v % 64);
        if spin {
            self.words[v / 64] |= mask;
        } else {
            self.words[v / 64] &= !mask;
        }
    }

    /// η^x: the configuration with the spin at `x` flipped.
    pub fn flip(&self, x: usize) -> Result<Self> {
        if x >= self.n {
            return input(format!("vertex {x} out of range for {} spins", self.n));
        }
        let mut c = self.clone();
        c.words[x / 64] ^= 1u64 << (x % 64);
        Ok(c)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.n == other.n && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Positions where the two configurations differ.
    pub fn xor(&self, other: &Self) -> Self {
        Configuration {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
            n: self.n,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn complement(&self) -> Self {
        let mut c = Configuration::ones(self.n);
        for (w, s) in c.words.iter_mut().zip(&self.words) {
            *w &= !s;
        }
        c
    }

    /// Parses `all0`, `all1`, or an explicit bit string (vertex 0 first).
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        match text.trim() {
            "all0" => Ok(Configuration::zeros(n)),
            "all1" => Ok(Configuration::ones(n)),
            bits => {
                let c: Configuration = bits.parse()?;
                if c.len() != n {
                    return input(format!("configuration {bits:?} has {} spins, graph has {n}", c.len()));
                }
                Ok(c)
            }
        }
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut c = Configuration::zeros(s.len());
        for (v, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => c.set(v, true),
                _ => return input(format!("invalid spin character {ch:?} in {s:?}")),
            }
        }
        Ok(c)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in 0..self.n {
            f.write_str(if self.get(v) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({self})")
    }
}

/// Flip rate for a vertex with spin `spin`, `disagree` disagreeing neighbors
/// out of `degree`. With `degree == 0` the imitation term is the empty sum.
#[inline]
pub fn rate_from_counts(spin: bool, disagree: usize, degree: usize, params: &ModelParams) -> f64 {
    let imitation = if degree == 0 { 0.0 } else { disagree as f64 / degree as f64 };
    let noise = if spin { params.beta } else { params.delta };
    (imitation + noise) / params.normalizer()
}

/// c(x, η) for the noisy voter model.
pub fn flip_rate(x: usize, config: &Configuration, graph: &Graph, params: &ModelParams) -> f64 {
    let spin = config.get(x);
    let disagree = graph.neighbors(x).iter().filter(|&&y| config.get(y) != spin).count();
    rate_from_counts(spin, disagree, graph.degree(x), params)
}

/// Outcome of one clock ring at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    NoiseZero,
    NoiseOne,
    /// Copy the spin of this neighbor.
    Copy(usize),
    /// Imitation branch at an isolated vertex: nothing to copy.
    Keep,
}

/// Selects the branch from the two uniforms of an event.
///
/// Thresholds on `branch_u` are `[0, β/z)` → 0, `[β/z, (β+δ)/z)` → 1,
/// otherwise imitation, where `z = δ+β+1`; the neighbor index comes from
/// `neighbor_u`.
#[inline]
pub fn select_branch(graph: &Graph, v: usize, params: &ModelParams, branch_u: f64, neighbor_u: f64) -> Branch {
    let p0 = params.p_noise_zero();
    if branch_u < p0 {
        Branch::NoiseZero
    } else if branch_u < p0 + params.p_noise_one() {
        Branch::NoiseOne
    } else {
        let nbrs = graph.neighbors(v);
        if nbrs.is_empty() {
            Branch::Keep
        } else {
            Branch::Copy(nbrs[index_from_unit(neighbor_u, nbrs.len())])
        }
    }
}

/// The uniforms consumed by one event, in stream order.
#[derive(Debug, Clone, Copy)]
pub struct EventDraws {
    pub wait: f64,
    pub vertex: usize,
    pub branch_u: f64,
    pub neighbor_u: f64,
}

impl EventDraws {
    /// Draws the next event for `n` superposed rate-1 clocks: waiting time,
    /// vertex, branch selector, neighbor selector.
    #[inline]
    pub fn next(stream: &mut ReplicaStream, n: usize) -> Self {
        let wait = stream.exponential(n as f64);
        let vertex = stream.index(n);
        let branch_u = stream.uniform();
        let neighbor_u = stream.uniform();
        EventDraws { wait, vertex, branch_u, neighbor_u }
    }
}

/// New spin at `v` after `branch` is applied to `config`.
#[inline]
pub fn apply_branch(config: &Configuration, v: usize, branch: Branch) -> bool {
    match branch {
        Branch::NoiseZero => false,
        Branch::NoiseOne => true,
        Branch::Copy(u) => config.get(u),
        Branch::Keep => config.get(v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub vertex: usize,
    pub new_spin: bool,
}

/// A sample path: every clock ring in `(0, t_end]`, including rings that
/// leave the spin unchanged.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub t_end: f64,
}

impl Trajectory {
    pub fn final_config(&self) -> Configuration {
        let mut c = self.initial.clone();
        for e in &self.events {
            c.set(e.vertex, e.new_spin);
        }
        c
    }

    /// CSV with header `time,vertex,new_spin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,vertex,new_spin\n");
        for e in &self.events {
            out.push_str(&format!("{},{},{}\n", crate::fmt_float(e.time), e.vertex, e.new_spin as u8));
        }
        out
    }
}

/// Simulates one replica; identical `(seed, replica)` give identical paths.
pub fn simulate_replica(
    graph: &Graph,
    params: &ModelParams,
    init: &Configuration,
    t_end: f64,
    seed: u64,
    replica: u64,
) -> Result<Trajectory> {
    params.validate()?;
    if init.len() != graph.n() {
        return input(format!("initial configuration has {} spins, graph has {}", init.len(), graph.n()));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return input(format!("t_end must be finite and >= 0, got {t_end}"));
    }
    let n = graph.n();
    let mut events = Vec::new();
    let mut config = init.clone();
    if n > 0 {
        let mut stream = ReplicaStream::new(seed, replica);
        let mut t = 0.0;
        loop {
            let d = EventDraws::next(&mut stream, n);
            t += d.wait;
            if t > t_end {
                break;
            }
            let branch = select_branch(graph, d.vertex, params, d.branch_u, d.neighbor_u);
            let spin = apply_branch(&config, d.vertex, branch);
            config.set(d.vertex, spin);
            events.push(Event { time: t, vertex: d.vertex, new_spin: spin });
        }
    }
    Ok(Trajectory { initial: init.clone(), events, t_end })
}

pub fn simulate(graph: &Graph, params: &ModelParams, init: &Configuration, t_end: f64, seed: u64) -> Result<Trajectory> {
    simulate_replica(graph, params, init, t_end, seed, 0)
}
