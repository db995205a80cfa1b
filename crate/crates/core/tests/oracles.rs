//! Independent reference values for the numerical building blocks.

use causal_neco::backtest::{christoffersen_cc, kupiec_uc, HitSeries};
use causal_neco::copula::{standard_normal_cdf, standard_normal_quantile, to_latent};
use causal_neco::discovery::{discover, CITestConfig};
use causal_neco::engines::{fit_garch11, garch_std_errors, garch_var, hist_var, GarchFit};
use causal_neco::graph::CausalGraph;
use causal_neco::panel::ReturnPanel;
use causal_neco::rng::{derive_seed, rng_from};
use causal_neco::sem::{fit_sem, select_lags, CovarianceMode, SemModel};
use causal_neco::simulation::{benchmark_network, simulate_sem, Noise, SimConfig};
use causal_neco::stats::{chi2_sf, quantile};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn labels(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("X{i}")).collect()
}

#[test]
fn chi2_survival_matches_statrs() {
    for df in [1.0, 2.0, 3.0, 6.0, 10.0] {
        let d = ChiSquared::new(df).unwrap();
        for x in [0.01, 0.5, 1.0, 3.841, 7.5, 15.0, 40.0] {
            let ours = chi2_sf(x, df);
            let reference = 1.0 - d.cdf(x);
            assert!((ours - reference).abs() < 1e-10, "df {df} x {x}: {ours} vs {reference}");
        }
    }
}

#[test]
fn normal_cdf_and_quantile_match_statrs() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for i in -80..=80 {
        let x = i as f64 / 10.0;
        let (ours, reference) = (standard_normal_cdf(x), n.cdf(x));
        assert!((ours - reference).abs() <= 1e-9 * reference + 1e-16, "cdf at {x}: {ours} vs {reference}");
    }
    // 30-digit references from mpmath.ncdf
    for (x, exact) in [
        (-8.0, 6.220_960_574_271_784e-16),
        (-6.0, 9.865_876_450_376_98e-10),
        (-4.6, 2.112_454_702_502_853_4e-6),
        (-3.6, 1.591_085_901_575_338_3e-4),
        (-1.2, 0.115_069_670_221_708_28),
    ] {
        let ours = standard_normal_cdf(x);
        assert!((ours - exact).abs() <= 1e-9 * exact, "cdf at {x}: {ours} vs {exact}");
    }
    for p in [1e-12, 1e-6, 0.001, 0.01, 0.05, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
        let ours = standard_normal_quantile(p).unwrap();
        assert!((ours - n.inverse_cdf(p)).abs() < 1e-8 * ours.abs().max(1.0), "quantile at {p}");
    }
}

#[test]
fn kupiec_and_christoffersen_match_hand_formulas() {
    // 250 days, 6 hits at alpha 0.01, two of them consecutive
    let mut hits = vec![false; 250];
    for i in [10, 11, 90, 130, 170, 210] {
        hits[i] = true;
    }
    let h = HitSeries::from_hits(hits, 0.01).unwrap();
    let uc = kupiec_uc(&h);
    assert!((uc.statistic - 3.5553547710617437).abs() < 1e-9);
    assert!((uc.pvalue - 0.059353618972289114).abs() < 1e-8);

    // transitions: n00 = 238, n01 = 5, n10 = 5, n11 = 1
    let (n00, n01, n10, n11) = (238.0f64, 5.0f64, 5.0f64, 1.0f64);
    let p01 = n01 / (n00 + n01);
    let p11 = n11 / (n10 + n11);
    let p = (n01 + n11) / (n00 + n01 + n10 + n11);
    let ind = -2.0
        * ((n00 + n10) * (1.0 - p).ln() + (n01 + n11) * p.ln()
            - n00 * (1.0 - p01).ln()
            - n01 * p01.ln()
            - n10 * (1.0 - p11).ln()
            - n11 * p11.ln());
    let cc = christoffersen_cc(&h);
    assert!((cc.statistic - (uc.statistic + ind)).abs() < 1e-9);
    assert!((cc.pvalue - chi2_sf(cc.statistic, 2.0)).abs() < 1e-12);
}

#[test]
fn two_node_implied_covariance() {
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]);
    let m = SemModel::new(labels(2), DVector::zeros(2), DMatrix::zeros(2, 0), b, DVector::from_element(2, 1.0)).unwrap();
    let v = m.implied_covariance(CovarianceMode::Estimated);
    let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.25]);
    assert!((v - expected).abs().max() < 1e-14);
}

fn garch_path(omega: f64, a1: f64, b1: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    let mut h = omega / (1.0 - a1 - b1);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n + 200 {
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = h.sqrt() * z;
        out.push(x);
        h = omega + a1 * x * x + b1 * h;
    }
    out.split_off(200)
}

#[test]
fn garch_standard_errors_cover_truth() {
    let (omega, a1, b1) = (1e-5, 0.08, 0.88);
    let reps = 40;
    let (mut cover_a, mut cover_b) = (0, 0);
    for r in 0..reps {
        let x = garch_path(omega, a1, b1, 2000, derive_seed(99, &[r]));
        let fit = fit_garch11(&x, None).unwrap();
        let se = garch_std_errors(&x, &fit).unwrap();
        cover_a += ((fit.a1 - a1).abs() <= 1.96 * se[1]) as usize;
        cover_b += ((fit.b1 - b1).abs() <= 1.96 * se[2]) as usize;
    }
    // nominal 95%; allow for Monte Carlo noise in 40 replications
    assert!(cover_a >= 32, "a1 coverage {cover_a}/{reps}");
    assert!(cover_b >= 32, "b1 coverage {cover_b}/{reps}");
}

#[test]
fn garch_mc_var_converges_to_normal_quantile() {
    let fit = GarchFit {
        omega: 1e-6,
        a1: 0.05,
        b1: 0.9,
        mu: 0.001,
        sigma_t: vec![],
        sigma_next: 0.02,
        loglik: 0.0,
    };
    let exact = 0.001 + 0.02 * standard_normal_quantile(0.05).unwrap();
    let v = garch_var(&fit, 0.05, 2_000_000, 5).unwrap();
    // quantile standard error is about 0.02 * 0.0015 at this draw count
    assert!((v - exact).abs() < 1e-4, "{v} vs {exact}");
}

#[test]
fn hist_var_tracks_empirical_quantile() {
    let mut rng = rng_from(8);
    let x: Vec<f64> = (0..500)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.01 * z
        })
        .collect();
    let panel = ReturnPanel::with_synthetic_dates(labels(1), DMatrix::from_column_slice(500, 1, &x)).unwrap();
    let direct = quantile(&x, 0.05);
    let v = hist_var(&panel, 0.05, 2000, 3).unwrap().values[0];
    // bootstrap pooling reproduces the sample quantile up to the spacing of order statistics
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let gap = sorted[26] - sorted[23];
    assert!((v - direct).abs() <= gap, "{v} vs {direct}");
}

#[test]
fn sem_estimates_are_consistent() {
    let g = benchmark_network();
    let b = DMatrix::from_fn(5, 5, |i, j| if g.has_directed(j, i) { 0.4 } else { 0.0 });
    let a = DMatrix::from_element(5, 1, 0.2);
    let truth = SemModel::new(labels(5), DVector::zeros(5), a, b.clone(), DVector::from_element(5, 1.0)).unwrap();
    let rmse = |n: usize| {
        let mut total = 0.0;
        for seed in 0..10 {
            let cfg = SimConfig {
                n,
                noise: Noise::Gaussian,
                sigma: 1.0,
                seed,
                ..SimConfig::default()
            };
            let panel = simulate_sem(&truth, &cfg).unwrap();
            let (latent, _) = to_latent(&panel).unwrap();
            let fit = fit_sem(&latent, &g, 1).unwrap();
            let diff = &fit.primary().b - &b;
            total += (diff.norm_squared() / 7.0).sqrt();
        }
        total / 10.0
    };
    let small = rmse(500);
    let large = rmse(5000);
    assert!(large < small, "rmse {large} at n=5000 vs {small} at n=500");
}

#[test]
fn aic_picks_first_order_lag_on_ar1_panels() {
    let p = 4;
    let empty = CausalGraph::empty(labels(p));
    let model = SemModel::new(
        labels(p),
        DVector::zeros(p),
        DMatrix::from_element(p, 1, 0.5),
        DMatrix::zeros(p, p),
        DVector::from_element(p, 1.0),
    )
    .unwrap();
    let reps = 40;
    let mut ones = 0;
    for seed in 0..reps {
        let cfg = SimConfig {
            p,
            n: 1000,
            sigma: 1.0,
            noise: Noise::Gaussian,
            seed,
            ..SimConfig::default()
        };
        let panel = simulate_sem(&model, &cfg).unwrap();
        let (latent, _) = to_latent(&panel).unwrap();
        ones += (select_lags(&latent, &empty, 4).unwrap().chosen_lags == 1) as usize;
    }
    assert!(ones as f64 / reps as f64 >= 0.9, "L=1 chosen {ones}/{reps}");
}

#[test]
fn benchmark_network_recovered_with_strong_coefficients() {
    let g = benchmark_network();
    // smallest population partial correlation over all edges and
    // conditioning sets is 0.10; the equivalence class leaves X2 - X3 undirected
    let b = DMatrix::from_fn(5, 5, |i, j| match (j, i) {
        (1, 2) => 0.8,
        _ if g.has_directed(j, i) => 0.5,
        _ => 0.0,
    });
    let model = SemModel::new(labels(5), DVector::zeros(5), DMatrix::zeros(5, 0), b, DVector::from_element(5, 1.0)).unwrap();
    for seed in 0..5 {
        let cfg = SimConfig {
            n: 5000,
            sigma: 1.0,
            lags: 0,
            noise: Noise::Gaussian,
            seed,
            ..SimConfig::default()
        };
        let panel = simulate_sem(&model, &cfg).unwrap();
        let (latent, _) = to_latent(&panel).unwrap();
        let est = discover(latent.values(), labels(5), &CITestConfig::default()).unwrap();
        assert_eq!(est.skeleton(), g.skeleton(), "seed {seed}");
        assert!(est.has_undirected(1, 2), "seed {seed}");
        for &(j, i) in g.directed.iter().filter(|&&(j, i)| (j, i) != (1, 2)) {
            assert!(est.has_directed(j, i), "seed {seed}: {j} -> {i}");
        }
    }
}
