//! Monte Carlo output of the coupled simulator against exact laws.

use noisy_voter::analysis::{fit_decay, fit_mc_decay};
use noisy_voter::coupling::{estimate_m, run_coupling_replica};
use noisy_voter::ctmc::{build_disagreement_generator, build_generator, exact_m_curve, stationary, Distribution};
use noisy_voter::dynamics::{simulate_replica, Configuration, ModelParams};
use noisy_voter::graph::Graph;

/// Largest |empirical − exact| / binomial standard error over all states.
fn worst_z(counts: &[u64], exact: &Distribution, samples: u64) -> f64 {
    counts
        .iter()
        .zip(&exact.0)
        .map(|(&c, &p)| {
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            let emp = c as f64 / samples as f64;
            if se == 0.0 {
                if emp == p { 0.0 } else { f64::INFINITY }
            } else {
                (emp - p).abs() / se
            }
        })
        .fold(0.0, f64::max)
}

fn chi_square(counts: &[u64], exact: &Distribution, samples: u64) -> f64 {
    counts
        .iter()
        .zip(&exact.0)
        .map(|(&c, &p)| {
            let e = p * samples as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

#[test]
fn disagreement_field_law_matches_exact_chain() {
    let p = ModelParams::symmetric(0.5);
    let replicas = 40_000u64;
    for (seed, g) in [Graph::k2(), Graph::path(3).unwrap()].into_iter().enumerate() {
        let n = g.n();
        let (x0, y0) = (Configuration::zeros(n), Configuration::ones(n));
        let mut counts = vec![0u64; 1 << n];
        for r in 0..replicas {
            let z = run_coupling_replica(&g, &p, &x0, &y0, 1.0, 31 + seed as u64, r).unwrap().final_state();
            counts[z.x.xor(&z.y).to_state()] += 1;
        }
        let q = build_disagreement_generator(&g, &p).unwrap();
        let exact = q.transient(&Distribution::point_mass(q.dim(), q.dim() - 1), 1.0).unwrap();
        let z = worst_z(&counts, &exact, replicas);
        assert!(z <= 3.0, "n={n}: worst z {z}");
    }
}

#[test]
fn each_copy_follows_the_single_chain_law() {
    // Both coupled copies, and the plain simulator, against the exact law at t = 1.
    // Whole-law comparisons use chi-square to avoid a max over many z-scores.
    let g = Graph::path(3).unwrap();
    let p = ModelParams::symmetric(0.5);
    let q = build_generator(&g, &p, None).unwrap();
    let x0 = Configuration::parse("100", 3).unwrap();
    let y0 = Configuration::parse("111", 3).unwrap();
    let replicas = 40_000u64;
    let (mut cx, mut cy, mut cs) = (vec![0u64; 8], vec![0u64; 8], vec![0u64; 8]);
    for r in 0..replicas {
        let s = run_coupling_replica(&g, &p, &x0, &y0, 1.0, 5, r).unwrap().final_state();
        cx[s.x.to_state()] += 1;
        cy[s.y.to_state()] += 1;
        cs[simulate_replica(&g, &p, &x0, 1.0, 6, r).unwrap().final_config().to_state()] += 1;
    }
    let law_x = q.transient(&Distribution::point_mass(8, x0.to_state()), 1.0).unwrap();
    let law_y = q.transient(&Distribution::point_mass(8, y0.to_state()), 1.0).unwrap();
    // 99.9% quantile of chi-square with 7 degrees of freedom.
    for (counts, law) in [(&cx, &law_x), (&cy, &law_y), (&cs, &law_x)] {
        let c = chi_square(counts, law, replicas);
        assert!(c <= 24.32, "chi2 {c}: {counts:?} vs {:?}", law.0);
    }
}

#[test]
fn coupled_copy_reaches_the_stationary_law_on_k2() {
    let g = Graph::k2();
    let p = ModelParams::symmetric(0.5);
    let pi = stationary(&build_generator(&g, &p, None).unwrap()).unwrap();
    let replicas = 20_000u64;
    let mut counts = [0u64; 4];
    for r in 0..replicas {
        let s = run_coupling_replica(&g, &p, &Configuration::zeros(2), &Configuration::ones(2), 20.0, 12, r)
            .unwrap()
            .final_state();
        counts[s.x.to_state()] += 1;
    }
    let chi2 = chi_square(&counts, &pi, replicas);
    // 99.9% quantile of chi-square with 3 degrees of freedom.
    assert!(chi2 <= 16.27, "chi2 {chi2}");
    assert!(worst_z(&counts, &pi, replicas) <= 3.0);
}

#[test]
fn m_hat_within_three_errors_of_exact_on_k2() {
    let g = Graph::k2();
    let p = ModelParams::symmetric(0.5);
    let est = estimate_m(&g, &p, &[2.0], 100_000, 8).unwrap();
    let exact = exact_m_curve(&g, &p, &[2.0]).unwrap();
    assert!((est.m_hat[0] - exact.m[0]).abs() <= 3.0 * est.m_stderr[0]);
    assert!(est.m_hat[0] <= (-0.5f64 * 2.0).exp() + 3.0 * est.m_stderr[0]);
}

#[test]
fn standard_error_shrinks_with_replicas() {
    let g = Graph::cycle(4).unwrap();
    let p = ModelParams::symmetric(0.5);
    let ts = [0.5, 1.0, 2.0];
    let small = estimate_m(&g, &p, &ts, 1_000, 4).unwrap();
    let large = estimate_m(&g, &p, &ts, 16_000, 4).unwrap();
    for k in 0..ts.len() {
        assert!((0.0..=1.0).contains(&small.m_hat[k]) && (0.0..=1.0).contains(&large.m_hat[k]));
        assert!(large.m_stderr[k] <= small.m_stderr[k]);
    }
}

#[test]
fn monte_carlo_and_exact_fits_agree() {
    let ts: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
    for g in [Graph::k2(), Graph::cycle(4).unwrap()] {
        let p = ModelParams::symmetric(0.5);
        let exact = exact_m_curve(&g, &p, &ts).unwrap();
        let est = estimate_m(&g, &p, &ts, 100_000, 21).unwrap();
        // Same time window for both: where the exact curve lies in [1e-3, 0.5].
        let inside: Vec<f64> = ts.iter().zip(&exact.m).filter(|(_, m)| (1e-3..=0.5).contains(*m)).map(|(t, _)| *t).collect();
        let window = Some((inside[0], *inside.last().unwrap()));
        let fe = fit_decay(&exact.times, &exact.m, window).unwrap();
        let fm = fit_mc_decay(&est, window).unwrap();
        let se = fm.rate_stderr.unwrap();
        assert!((fe.rate - fm.rate).abs() <= 3.0 * se, "n={}: {} vs {} (se {se})", g.n(), fe.rate, fm.rate);
    }
}
