//! Exact engine checked against a dense scaling-and-squaring exponential and
//! brute-force scans.

use nalgebra::DMatrix;
use noisy_voter::ctmc::{
    build_generator, exact_m_curve, exact_mixing_time, stationary, tv_distance, Distribution, GeneratorMatrix,
};
use noisy_voter::dynamics::ModelParams;
use noisy_voter::graph::Graph;

/// exp(A) by scaling to norm ≤ 1/2, a 30-term Taylor sum and repeated squaring.
fn dense_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a / 2f64.powi(squarings as i32);
    let dim = a.nrows();
    let mut sum = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn row(m: &DMatrix<f64>, r: usize) -> Distribution {
    Distribution(m.row(r).iter().cloned().collect())
}

fn l1(a: &Distribution, b: &Distribution) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).sum()
}

fn generator(g: &Graph, p: ModelParams) -> GeneratorMatrix {
    build_generator(g, &p, None).unwrap()
}

#[test]
fn k2_transient_matches_dense_exponential() {
    let q = generator(&Graph::k2(), ModelParams::symmetric(0.5));
    let law = q.transient(&Distribution::point_mass(4, 3), 1.0).unwrap();
    let oracle = row(&dense_exp(&q.to_dense()), 3);
    assert!(l1(&law, &oracle) <= 1e-10, "{:?} vs {:?}", law.0, oracle.0);
}

#[test]
fn transient_matches_dense_exponential_on_larger_chains() {
    let cases = [
        (Graph::path(3).unwrap(), ModelParams::symmetric(1.0)),
        (Graph::cycle(4).unwrap(), ModelParams::asymmetric(0.3, 0.8)),
        (Graph::grid(2, 3).unwrap(), ModelParams::symmetric(0.1)),
    ];
    for (g, p) in cases {
        let q = generator(&g, p);
        for t in [0.1, 1.0, 7.5, 40.0] {
            let e = dense_exp(&(q.to_dense() * t));
            for start in [0, q.dim() / 3, q.dim() - 1] {
                let law = q.transient(&Distribution::point_mass(q.dim(), start), t).unwrap();
                assert!(l1(&law, &row(&e, start)) <= 1e-10, "n={} t={t} start={start}", g.n());
            }
        }
    }
}

/// t_mix by bisection on dense exponentials over every start.
fn dense_mixing_time(q: &GeneratorMatrix, pi: &Distribution, eps: f64) -> f64 {
    let dense = q.to_dense();
    let dist = |t: f64| {
        let e = dense_exp(&(&dense * t));
        (0..q.dim()).map(|s| tv_distance(&row(&e, s), pi).unwrap()).fold(0.0, f64::max)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while dist(hi) > eps {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if dist(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[test]
fn k2_mixing_time_matches_dense_bisection() {
    let q = generator(&Graph::k2(), ModelParams::symmetric(0.5));
    let pi = stationary(&q).unwrap();
    let r = exact_mixing_time(&q, 0.25).unwrap();
    let oracle = dense_mixing_time(&q, &pi, 0.25);
    assert!((r.t_mix - oracle).abs() <= 1e-3, "{} vs {oracle}", r.t_mix);
    assert!(r.all_initial_states);
}

#[test]
fn symmetry_reduced_scan_agrees_with_all_starts() {
    // Graphs with nontrivial automorphisms, with and without flip symmetry.
    let cases = [
        (Graph::cycle(6).unwrap(), ModelParams::symmetric(0.5)),
        (Graph::cycle(5).unwrap(), ModelParams::asymmetric(0.4, 0.9)),
        (Graph::path(4).unwrap(), ModelParams::symmetric(2.0)),
        (Graph::grid(3, 3).unwrap(), ModelParams::symmetric(0.5)),
        (Graph::random_connected(7, 0.4, 3).unwrap(), ModelParams::symmetric(1.0)),
    ];
    for (g, p) in cases {
        let q = generator(&g, p);
        let pi = stationary(&q).unwrap();
        let r = exact_mixing_time(&q, 0.25).unwrap();
        assert!(r.all_initial_states);
        let worst = |t: f64| {
            (0..q.dim())
                .map(|s| tv_distance(&q.transient(&Distribution::point_mass(q.dim(), s), t).unwrap(), &pi).unwrap())
                .fold(0.0, f64::max)
        };
        assert!(worst(r.t_mix) <= 0.25 + 1e-12, "n={}", g.n());
        assert!(worst(r.t_mix - 2.0 * r.tolerance) > 0.25, "n={}", g.n());
    }
}

#[test]
fn stationary_is_a_fixed_point_and_flip_invariant() {
    for g in [Graph::path(4).unwrap(), Graph::grid(2, 3).unwrap(), Graph::random_connected(8, 0.3, 9).unwrap()] {
        let q = generator(&g, ModelParams::symmetric(0.7));
        let pi = stationary(&q).unwrap();
        let later = q.transient(&pi, 1.0).unwrap();
        assert!(tv_distance(&later, &pi).unwrap() <= 1e-9);
        let mask = q.dim() - 1;
        for s in 0..q.dim() {
            assert!((pi.0[s] - pi.0[!s & mask]).abs() <= 1e-12);
        }
    }
}

#[test]
fn m_curve_is_nonincreasing() {
    let ts: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
    for g in [Graph::k2(), Graph::path(3).unwrap(), Graph::cycle(4).unwrap()] {
        for delta in [0.1, 0.5, 2.0] {
            let c = exact_m_curve(&g, &ModelParams::symmetric(delta), &ts).unwrap();
            assert_eq!(c.m[0], 1.0);
            assert!(c.m.windows(2).all(|w| w[1] <= w[0] + 1e-15), "n={} delta={delta}", g.n());
        }
    }
}

#[test]
fn maximizing_vertex_obeys_the_differential_inequality() {
    // d/dt P(Z_t(x_k) = 1) ≤ −c·M(t) where x_k attains M(t).
    let h = 1e-4;
    for g in [Graph::k2(), Graph::path(3).unwrap(), Graph::cycle(4).unwrap(), Graph::grid(2, 3).unwrap()] {
        for delta in [0.1, 0.5, 2.0] {
            let p = ModelParams::symmetric(delta);
            let c = 2.0 * delta / (2.0 * delta + 1.0);
            for k in 1..=40 {
                let t = k as f64 * 0.25;
                let curve = exact_m_curve(&g, &p, &[t - h, t, t + h]).unwrap();
                let x = curve.argmax[1];
                let slope = (curve.per_vertex[2][x] - curve.per_vertex[0][x]) / (2.0 * h);
                assert!(slope <= -c * curve.m[1] + 1e-6, "n={} delta={delta} t={t}: {slope} vs {}", g.n(), -c * curve.m[1]);
            }
        }
    }
}
