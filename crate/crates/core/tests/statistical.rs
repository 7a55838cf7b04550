//! Monte Carlo checks against independently computed expectations. Seeds are
//! fixed so every run is reproducible.

use rand::Rng;

use specreg::estimators::{self, EmpiricalSpectrum};
use specreg::harness::stats;
use specreg::inference;
use specreg::signal::{self, SignalSpectrum};
use specreg::simulate::{self, NoiseModel};
use specreg::{UniformGrid, WeightSequence};

fn freq(k: usize) -> f64 {
    (k / 2).max(1) as f64
}

/// Δ=3, θ=1 by direct summation, with no closed forms.
struct BruteForce;

impl BruteForce {
    fn w(k: usize) -> f64 {
        freq(k)
    }
    fn c(k: usize) -> f64 {
        freq(k).powi(-3)
    }
    fn s(n: usize) -> f64 {
        (1..=n).map(|k| Self::w(k).powi(2)).sum()
    }
    fn rho(n: usize) -> f64 {
        // Tail beyond 4·10⁶ is below 1e-19.
        (n + 1..=4_000_000).rev().map(|k| (Self::c(k) * Self::w(k)).powi(2)).sum()
    }
    fn n_plus(n: usize) -> usize {
        let base = n as f64 / ((n + 8) as f64).ln();
        (base.floor() as usize).min(base.sqrt().floor() as usize).min(n / 3)
    }
}

fn model() -> (SignalSpectrum, WeightSequence) {
    (
        SignalSpectrum::power_law(3.0, 1.0, Default::default()).unwrap(),
        WeightSequence::power_law(1.0, 1.0).unwrap(),
    )
}

#[test]
fn oracle_matches_brute_force_scan() {
    let (sig, w) = model();
    let (n, sigma) = (4096, 0.5);
    let oracle = signal::oracle_risk(&sig, &w, n, sigma).unwrap();
    let np = BruteForce::n_plus(n);
    assert_eq!(oracle.n_plus, np);
    let curve: Vec<f64> = (1..=np)
        .map(|m| sigma * sigma * BruteForce::s(m) / n as f64 + BruteForce::rho(m))
        .collect();
    let (mut best, mut best_v) = (0, f64::INFINITY);
    for (i, &v) in curve.iter().enumerate() {
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    assert_eq!(oracle.n0, best + 1);
    assert!((oracle.a_star - best_v).abs() < 1e-9 * best_v, "{} vs {best_v}", oracle.a_star);
    for (a, b) in oracle.a_curve.iter().zip(&curve) {
        assert!((a - b).abs() < 1e-9 * b);
    }
}

#[test]
fn tau_expectation_matches_closed_form() {
    let (sig, w) = model();
    let (n, sigma, big_n, reps) = (2048, 0.5, 6, 1500);
    let g = simulate::forward(&sig, UniformGrid::new(n).unwrap()).unwrap();
    let taus: Vec<f64> = (0..reps)
        .map(|r| {
            let obs = simulate::observe(&g, sigma, &NoiseModel::Gaussian, 1000 + r as u64).unwrap();
            estimators::tau(&obs, &w, big_n).unwrap()
        })
        .collect();
    let bias: f64 = (big_n + 1..=2 * big_n).map(|k| (BruteForce::c(k) * BruteForce::w(k)).powi(2)).sum();
    let expected = bias + sigma * sigma * (BruteForce::s(2 * big_n) - BruteForce::s(big_n)) / n as f64;
    let (m, se) = (stats::mean(&taus), stats::std_err(&taus));
    assert!((m - expected).abs() < 3.0 * se, "mean {m} expected {expected} se {se}");
}

#[test]
fn coefficients_are_unbiased() {
    let (sig, _) = model();
    let (n, sigma, reps) = (1024, 1.0, 800);
    let g = simulate::forward(&sig, UniformGrid::new(n).unwrap()).unwrap();
    let mut diffs = vec![Vec::new(); 20];
    for r in 0..reps {
        let obs = simulate::observe(&g, sigma, &NoiseModel::Gaussian, 50_000 + r as u64).unwrap();
        let spec = EmpiricalSpectrum::new(&obs);
        for (k, d) in diffs.iter_mut().enumerate() {
            d.push(spec.c(k + 1) - sig.c(k + 1));
        }
    }
    for (k, d) in diffs.iter().enumerate() {
        let (m, se) = (stats::mean(d), stats::std_err(d));
        // Aliasing contributes O(n^{-3}) bias, far below the Monte Carlo error.
        assert!(m.abs() < 3.0 * se, "k={} mean {m} se {se}", k + 1);
    }
}

#[test]
fn anti_penalty_removes_noise_bias() {
    let (sig, w) = model();
    let (n, sigma, m, reps) = (4096, 0.5, 10, 1000);
    let g = simulate::forward(&sig, UniformGrid::new(n).unwrap()).unwrap();
    let raw: Vec<f64> = (0..reps)
        .map(|r| {
            let obs = simulate::observe(&g, sigma, &NoiseModel::Gaussian, 7_000 + r as u64).unwrap();
            let spec = EmpiricalSpectrum::new(&obs);
            (1..=m).map(|k| (spec.c(k) * w.w(k)).powi(2)).sum()
        })
        .collect();
    let truth: f64 = (1..=m).map(|k| (BruteForce::c(k) * BruteForce::w(k)).powi(2)).sum();
    let expected = truth + sigma * sigma * BruteForce::s(m) / n as f64;
    let (mean, se) = (stats::mean(&raw), stats::std_err(&raw));
    assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected} (se {se})");
}

#[test]
fn fixed_cutoff_risk_matches_a_curve() {
    let (sig, w) = model();
    let (n, sigma, reps) = (4096, 0.5, 400);
    let oracle = signal::oracle_risk(&sig, &w, n, sigma).unwrap();
    let g = simulate::forward(&sig, UniformGrid::new(n).unwrap()).unwrap();
    for big_n in [oracle.n0, oracle.n0 + 5] {
        let risks: Vec<f64> = (0..reps)
            .map(|r| {
                let obs = simulate::observe(&g, sigma, &NoiseModel::Gaussian, 90_000 + r as u64).unwrap();
                let est = estimators::projection_estimate(&obs, &w, big_n).unwrap();
                signal::l2_error(&sig, &w, est.coefficients.as_slice()).unwrap()
            })
            .collect();
        let mean = stats::mean(&risks);
        let target = oracle.a(big_n);
        assert!((mean / target - 1.0).abs() < 0.1, "N={big_n}: {mean} vs {target}");
    }
}

#[test]
fn noise_families_are_standardized() {
    let m = 1_000_000;
    for noise in [
        NoiseModel::Gaussian,
        NoiseModel::Subweibull { q: 1.0, tail_scale: None },
        NoiseModel::StudentT { df: 5.0 },
    ] {
        let sampler = noise.sampler().unwrap();
        let mut rng = simulate::rng_for(11);
        let xs: Vec<f64> = (0..m).map(|_| sampler.sample(&mut rng)).collect();
        let (mean, var) = (stats::mean(&xs), stats::variance(&xs));
        assert!(mean.abs() < 4.0 / (m as f64).sqrt(), "{}: mean {mean}", noise.family_name());
        assert!((var - 1.0).abs() < 0.05, "{}: var {var}", noise.family_name());
    }
}

#[test]
fn subweibull_tails_respect_declared_class() {
    let m = 1_000_000;
    for q in [1.0, 2.0] {
        let noise = NoiseModel::Subweibull { q, tail_scale: None };
        let (_, big_q) = noise.tail_params().unwrap();
        let sampler = noise.sampler().unwrap();
        let mut rng = simulate::rng_for(3);
        let xs: Vec<f64> = (0..m).map(|_| sampler.sample(&mut rng)).collect();
        for u in [2.0, 3.0, 4.0] {
            let p = xs.iter().filter(|&&x| x > u).count() as f64 / m as f64;
            let bound = (-(u / big_q).powf(q)).exp();
            let mc = 3.0 * (bound * (1.0 - bound) / m as f64).sqrt();
            assert!(p <= bound + mc, "q={q} u={u}: {p} > {bound}");
        }
    }
}

#[test]
fn sigma_estimate_ignores_representable_signal() {
    let n = 4096;
    let mut rng = simulate::rng_for(5);
    let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let sig = SignalSpectrum::trig_poly(vec![0.4, 1.0, -2.0, 0.5, 0.3]).unwrap();
    let g = simulate::forward(&sig, UniformGrid::new(n).unwrap()).unwrap();
    let with: Vec<f64> = g.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let pre = simulate::default_pre_truncation(n);
    let a = simulate::estimate_sigma(&specreg::ObservationSet::from_values(noise).unwrap(), pre).unwrap();
    let b = simulate::estimate_sigma(&specreg::ObservationSet::from_values(with).unwrap(), pre).unwrap();
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
}

#[test]
fn sigma_estimate_rmse() {
    let (sig, _) = model();
    let (n, sigma, reps) = (4096, 0.5, 1000);
    let g = simulate::forward(&sig, UniformGrid::new(n).unwrap()).unwrap();
    let pre = simulate::default_pre_truncation(n);
    assert_eq!(pre, 16);
    let sq: Vec<f64> = (0..reps)
        .map(|r| {
            let obs = simulate::observe(&g, sigma, &NoiseModel::Gaussian, 300 + r as u64).unwrap();
            (simulate::estimate_sigma(&obs, pre).unwrap() - sigma).powi(2)
        })
        .collect();
    let rmse = stats::mean(&sq).sqrt();
    assert!(rmse <= 2.0 / (n as f64).sqrt(), "{rmse}");
}

#[test]
fn pure_noise_sigma_concentrates() {
    let n = 4096;
    let zero = vec![0.0; n];
    let hits = (0..200)
        .filter(|&r| {
            let obs = simulate::observe(&zero, 1.0, &NoiseModel::Gaussian, 40 + r).unwrap();
            let s = simulate::estimate_sigma(&obs, 1).unwrap();
            s > 0.95 && s < 1.05
        })
        .count();
    assert!(hits >= 198, "{hits}/200");
}

#[test]
fn fisher_and_plain_energy_intervals_agree_to_first_order() {
    let w = WeightSequence::identity();
    for h in [0.9, 1.0, 1.1] {
        let est = inference::EnergyEstimate { h_hat: h, m_used: 8, anti_penalty: 0.0, sigma_used: 0.5, b_norm_sq_hat: h, n: 4096 };
        let plain = inference::energy_ci(&est, 0.5, 4096, 0.95).unwrap();
        let fisher = inference::energy_ci_fisher(&est, &w, 0.5, 4096, 0.95).unwrap();
        let r = fisher.half_width() / plain.half_width();
        assert!(r > 0.8 && r < 1.25, "H={h}: ratio {r}");
    }
}
