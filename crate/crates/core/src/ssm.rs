//! Strong spatial mixing on lattice boxes: stationary laws under frozen
//! boundary conditions, their projections onto a sub-box, and the decay of
//! a single boundary flip's influence with distance.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::linear_fit;
use crate::ctmc::{build_generator, stationary, tv_distance, Distribution, FrozenField};
use crate::dynamics::ModelParams;
use crate::error::{input, Error, Result};
use crate::graph::{dist_to_box, LatticeBox, Point};

/// Largest projection target handled exactly.
pub const MAX_PROJECTION_VERTICES: usize = 12;

/// Spins held fixed on the boundary of a box, indexed like `LatticeBox::boundary`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryCondition {
    spins: Vec<bool>,
}

impl BoundaryCondition {
    pub fn constant(b: &LatticeBox, spin: bool) -> Self {
        BoundaryCondition { spins: vec![spin; b.boundary.len()] }
    }

    pub fn random(b: &LatticeBox, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BoundaryCondition { spins: (0..b.boundary.len()).map(|_| rng.next_u64() >> 63 == 1).collect() }
    }

    pub fn from_spins(b: &LatticeBox, spins: Vec<bool>) -> Result<Self> {
        if spins.len() != b.boundary.len() {
            return input(format!("boundary condition has {} spins, box boundary has {}", spins.len(), b.boundary.len()));
        }
        Ok(BoundaryCondition { spins })
    }

    pub fn spins(&self) -> &[bool] {
        &self.spins
    }

    /// τ^u: the condition with boundary site `u` flipped.
    pub fn flipped(&self, u: usize) -> Self {
        let mut spins = self.spins.clone();
        spins[u] = !spins[u];
        BoundaryCondition { spins }
    }

    pub fn complement(&self) -> Self {
        BoundaryCondition { spins: self.spins.iter().map(|s| !s).collect() }
    }

    /// Frozen neighbor counts felt by each interior vertex.
    pub fn frozen_field(&self, b: &LatticeBox) -> FrozenField {
        let n = b.interior.n();
        let mut f = FrozenField { ones: vec![0; n], zeros: vec![0; n] };
        for &(bi, x) in &b.boundary_adjacency {
            if self.spins[bi] {
                f.ones[x] += 1;
            } else {
                f.zeros[x] += 1;
            }
        }
        f
    }
}

fn interior_ids(b: &LatticeBox, h: &[Point]) -> Result<Vec<usize>> {
    if h.is_empty() {
        return input("projection target is empty");
    }
    if h.len() > MAX_PROJECTION_VERTICES {
        return input(format!("projection target has {} vertices, cap is {MAX_PROJECTION_VERTICES}", h.len()));
    }
    h.iter()
        .map(|p| b.id_of(p).ok_or_else(|| Error::Input(format!("point {p} is not in the box interior"))))
        .collect()
}

/// Stationary law of the frozen-boundary chain on the box interior.
pub fn frozen_stationary(b: &LatticeBox, tau: &BoundaryCondition, params: &ModelParams) -> Result<Distribution> {
    if tau.spins.len() != b.boundary.len() {
        return input("boundary condition does not cover the box boundary");
    }
    let q = build_generator(&b.interior, params, Some(&tau.frozen_field(b)))?;
    stationary(&q)
}

/// μ_G^τ projected onto `{0,1}^H`; bit `i` of an outcome is the spin at `h[i]`.
pub fn projected_stationary(b: &LatticeBox, tau: &BoundaryCondition, params: &ModelParams, h: &[Point]) -> Result<Distribution> {
    let ids = interior_ids(b, h)?;
    Ok(frozen_stationary(b, tau, params)?.project(&ids))
}

#[derive(Debug, Clone, Serialize)]
pub struct SsmRow {
    pub site: Point,
    pub dist: u64,
    pub tv: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SsmTable {
    pub rows: Vec<SsmRow>,
    pub h: Vec<Point>,
    pub params: ModelParams,
}

impl SsmTable {
    /// CSV with header `u_coords,dist,tv`; coordinates are `:`-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u_coords,dist,tv\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.site, r.dist, crate::fmt_float(r.tv)));
        }
        out
    }

    /// Largest tv at each distance, by increasing distance.
    pub fn max_tv_by_distance(&self) -> Vec<(u64, f64)> {
        let mut out: Vec<(u64, f64)> = Vec::new();
        let mut rows: Vec<&SsmRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.dist);
        for r in rows {
            match out.last_mut() {
                Some((d, tv)) if *d == r.dist => *tv = tv.max(r.tv),
                _ => out.push((r.dist, r.tv)),
            }
        }
        out
    }
}

/// For each boundary site `u` in `sites`, the TV distance between the
/// projections onto `h` under `tau_base` and under `tau_base` flipped at `u`.
pub fn ssm_scan(
    b: &LatticeBox,
    h: &[Point],
    params: &ModelParams,
    tau_base: &BoundaryCondition,
    sites: &[Point],
) -> Result<SsmTable> {
    let ids = interior_ids(b, h)?;
    let site_ids: Vec<usize> = sites
        .iter()
        .map(|u| b.boundary_id_of(u).ok_or_else(|| Error::Input(format!("site {u} is not on the box boundary"))))
        .collect::<Result<_>>()?;
    let base = frozen_stationary(b, tau_base, params)?.project(&ids);
    let rows = sites
        .par_iter()
        .zip(&site_ids)
        .map(|(u, &ui)| {
            let other = frozen_stationary(b, &tau_base.flipped(ui), params)?.project(&ids);
            Ok(SsmRow { site: u.clone(), dist: dist_to_box(u, h)?, tv: tv_distance(&base, &other)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SsmTable { rows, h: h.to_vec(), params: *params })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SsmFit {
    /// Prefactor with |V(H)| divided out.
    #[serde(rename = "C_hat")]
    pub prefactor: f64,
    #[serde(rename = "c_hat")]
    pub rate: f64,
    /// RMS of the log-space residuals.
    pub residual: f64,
}

/// Least-squares fit of log(tv) = log(C·|V(H)|) − c·dist over rows with tv
/// above 1e-14.
pub fn fit_ssm_decay(table: &SsmTable) -> Result<SsmFit> {
    let usable: Vec<&SsmRow> = table.rows.iter().filter(|r| r.tv > 1e-14).collect();
    if usable.is_empty() {
        return Err(Error::DegenerateFit("every tv is below 1e-14; decay too fast to resolve".into()));
    }
    let mut distinct: Vec<u64> = usable.iter().map(|r| r.dist).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(format!("need 3 distinct distances with tv > 1e-14, have {}", distinct.len())));
    }
    let xs: Vec<f64> = usable.iter().map(|r| r.dist as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.tv.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(SsmFit { prefactor: fit.intercept.exp() / table.h.len() as f64, rate: -fit.slope, residual: fit.rms })
}
