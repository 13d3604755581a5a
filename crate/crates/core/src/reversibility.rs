//! Kolmogorov-criterion reversibility checks on single-flip generators, and
//! the correspondence between the noisy voter model on the cycle Z/nZ and
//! zero-field ferromagnetic Ising Glauber dynamics.

use serde::Serialize;

use crate::ctmc::{build_generator, Distribution, GeneratorMatrix};
use crate::dynamics::ModelParams;
use crate::error::{input, Result};
use crate::graph::Graph;

/// A configuration-space cycle with the rate products in both directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleWitness {
    /// Closed state sequence; the first state is repeated at the end.
    pub states: Vec<usize>,
    pub forward: f64,
    pub backward: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReversibilityVerdict {
    pub reversible: bool,
    pub witness: Option<CycleWitness>,
    pub cycles_checked: u64,
    pub max_cycle_len: usize,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

struct CycleSearch<'a> {
    q: &'a GeneratorMatrix,
    max_len: usize,
    tol: f64,
    path: Vec<usize>,
    checked: u64,
    witness: Option<CycleWitness>,
}

impl CycleSearch<'_> {
    /// Extends `path` (whose first state is its minimum) one flip at a time.
    fn extend(&mut self, forward: f64, backward: f64) {
        if self.witness.is_some() {
            return;
        }
        let start = self.path[0];
        let last = *self.path.last().expect("non-empty path");
        for v in 0..self.q.n() {
            let next = last ^ (1 << v);
            let (f, b) = (self.q.rate(last, v), self.q.rate(next, v));
            if f == 0.0 || b == 0.0 {
                continue;
            }
            if next == start && self.path.len() >= 3 {
                // Each undirected cycle is visited once: second state < last state.
                if self.path[1] < last {
                    self.checked += 1;
                    let (fw, bw) = (forward * f, backward * b);
                    if relative_gap(fw, bw) > self.tol {
                        let mut states = self.path.clone();
                        states.push(start);
                        self.witness = Some(CycleWitness { states, forward: fw, backward: bw });
                        return;
                    }
                }
                continue;
            }
            if next <= start || self.path.len() >= self.max_len || self.path.contains(&next) {
                continue;
            }
            self.path.push(next);
            self.extend(forward * f, backward * b);
            self.path.pop();
        }
    }
}

/// Checks Kolmogorov's criterion over all simple cycles of length at most
/// `max_cycle_len` in the single-flip transition graph.
///
/// Cycles are rooted at their smallest state. A transition that is positive
/// in one direction only is reported as a two-state witness.
pub fn kolmogorov_check(q: &GeneratorMatrix, max_cycle_len: usize, tol: f64) -> Result<ReversibilityVerdict> {
    if max_cycle_len < 3 {
        return input(format!("max_cycle_len must be at least 3, got {max_cycle_len}"));
    }
    for s in 0..q.dim() {
        for v in 0..q.n() {
            let t = s ^ (1 << v);
            let (f, b) = (q.rate(s, v), q.rate(t, v));
            if (f > 0.0) != (b > 0.0) {
                return Ok(ReversibilityVerdict {
                    reversible: false,
                    witness: Some(CycleWitness { states: vec![s, t, s], forward: f, backward: b }),
                    cycles_checked: 0,
                    max_cycle_len,
                });
            }
        }
    }
    let mut search = CycleSearch { q, max_len: max_cycle_len, tol, path: Vec::new(), checked: 0, witness: None };
    for start in 0..q.dim() {
        search.path.clear();
        search.path.push(start);
        search.extend(1.0, 1.0);
        if search.witness.is_some() {
            break;
        }
    }
    Ok(ReversibilityVerdict {
        reversible: search.witness.is_none(),
        witness: search.witness,
        cycles_checked: search.checked,
        max_cycle_len,
    })
}

/// Inverse temperature of the Ising model matching noise `delta` on the cycle:
/// β = ¼·ln(1 + 1/δ).
pub fn ising_beta(delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return input(format!("delta must be finite and > 0, got {delta}"));
    }
    Ok(0.25 * (1.0 / delta).ln_1p())
}

/// Unnormalized Gibbs weights exp(β·Σ_i σ_i σ_{i+1}) on Z/nZ with σ = 2η − 1.
pub fn cycle_gibbs_weights(n: usize, beta: f64) -> Vec<f64> {
    (0..1usize << n)
        .map(|s| {
            let energy: i64 = (0..n)
                .map(|i| {
                    let a = (s >> i & 1) as i64 * 2 - 1;
                    let b = (s >> ((i + 1) % n) & 1) as i64 * 2 - 1;
                    a * b
                })
                .sum();
            (beta * energy as f64).exp()
        })
        .collect()
}

pub fn cycle_gibbs_distribution(n: usize, beta: f64) -> Distribution {
    let w = cycle_gibbs_weights(n, beta);
    let z: f64 = w.iter().sum();
    Distribution(w.into_iter().map(|x| x / z).collect())
}

/// Largest relative detailed-balance violation
/// |π(η)q(η,η^x) − π(η^x)q(η^x,η)| / max(·) of the noisy voter generator on
/// Z/nZ against the Ising Gibbs weights at inverse temperature `beta`.
pub fn detailed_balance_violation(n: usize, delta: f64, beta: f64) -> Result<f64> {
    if n < 3 {
        return input(format!("cycle length must be at least 3, got {n}"));
    }
    let q = build_generator(&Graph::cycle(n)?, &ModelParams::symmetric(delta), None)?;
    let w = cycle_gibbs_weights(n, beta);
    let mut worst: f64 = 0.0;
    for s in 0..q.dim() {
        for x in 0..n {
            let t = s ^ (1 << x);
            worst = worst.max(relative_gap(w[s] * q.rate(s, x), w[t] * q.rate(t, x)));
        }
    }
    Ok(worst)
}

/// Detailed-balance check of the cycle against Ising at β = ising_beta(δ).
pub fn cycle_ising_equivalence_check(n: usize, delta: f64) -> Result<f64> {
    detailed_balance_violation(n, delta, ising_beta(delta)?)
}
