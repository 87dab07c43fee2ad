//! Statistical invariants of the analysis, design and simulation layers,
//! verified against independent Monte Carlo oracles and exact identities.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use goldsci_core::design::{
    success_probability, Allocation, EffectScenario, ProbMode, SuccessSplit,
};
use goldsci_core::sci::{
    adjudicate_success, baseline_hierarchical, sci_bounds, sci_informative, sci_iu_formal,
    sci_iu_intuitive, sci_single_step, ArmSummary, DesignParams, SciMethod, TrialData,
    VarianceMode, Verdict,
};
use goldsci_core::simulate::{run_simulation, SimulationConfig};
use goldsci_core::stats::{
    bivariate_normal_cdf, equicoordinate_quantile, gaussian_region_prob, std_normal_cdf,
    std_normal_quantile, std_normal_sf, GaussianRegion,
};

fn reference_params() -> DesignParams {
    DesignParams::from_historical(0.025, 0.5, 1.0, 0.01).unwrap()
}

fn draw(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn known_sigma_trial(x_e: f64, x_r: f64, x_p: f64, n: (usize, usize, usize)) -> TrialData {
    TrialData {
        arm_e: ArmSummary::new(x_e, n.0),
        arm_r: ArmSummary::new(x_r, n.1),
        arm_p: ArmSummary::new(x_p, n.2),
        variance_mode: VarianceMode::KnownSigma(2.0),
    }
}

// ---------------------------------------------------------------------------
// Gaussian region probabilities vs a sampling oracle
// ---------------------------------------------------------------------------

/// Unpivoted Cholesky square root that tolerates PSD rank deficiency by
/// zeroing exhausted columns. Independent of the quadrature implementation.
fn psd_cholesky(cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = cov.len();
    let scale = cov
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |a, &x| a.max(x.abs()))
        .max(1e-300);
    let mut l = vec![vec![0.0f64; d]; d];
    for j in 0..d {
        let mut diag = cov[j][j];
        for k in 0..j {
            diag -= l[j][k] * l[j][k];
        }
        if diag <= 1e-10 * scale {
            continue; // exhausted direction: column stays zero
        }
        l[j][j] = diag.sqrt();
        for i in (j + 1)..d {
            let mut v = cov[i][j];
            for k in 0..j {
                v -= l[i][k] * l[j][k];
            }
            l[i][j] = v / l[j][j];
        }
    }
    l
}

fn oracle_box_probability(region: &GaussianRegion, draws: u64, seed: u64) -> f64 {
    let d = region.mean.len();
    let l = psd_cholesky(&region.covariance);
    let hits: u64 = (0..64u64)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let per = draws / 64 + u64::from(chunk < draws % 64);
            let mut hits = 0u64;
            let mut z = [0.0f64; 3];
            for _ in 0..per {
                for zj in z.iter_mut().take(d) {
                    *zj = StandardNormal.sample(&mut rng);
                }
                let mut inside = true;
                for i in 0..d {
                    let mut x = region.mean[i];
                    for (j, zj) in z.iter().enumerate().take(d) {
                        x += l[i][j] * zj;
                    }
                    if x < region.lower[i] || x > region.upper[i] {
                        inside = false;
                        break;
                    }
                }
                hits += u64::from(inside);
            }
            hits
        })
        .sum();
    hits as f64 / draws as f64
}

/// Random test box; every third three-dimensional case uses the singular
/// rank-2 covariance of the difference statistics (D1, D2, D1 - D2).
fn random_region(rng: &mut ChaCha8Rng, idx: usize) -> GaussianRegion {
    let dim = 1 + idx % 3;
    let singular = dim == 3 && idx % 2 == 0;
    let cov: Vec<Vec<f64>> = if singular {
        let ve: f64 = rng.gen_range(0.05..1.5);
        let vr: f64 = rng.gen_range(0.05..1.5);
        let vp: f64 = rng.gen_range(0.05..1.5);
        vec![
            vec![ve + vp, vp, ve],
            vec![vp, vr + vp, -vr],
            vec![ve, -vr, ve + vr],
        ]
    } else {
        let g: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        (0..dim)
            .map(|i| {
                (0..dim)
                    .map(|j| {
                        (0..dim).map(|k| g[i][k] * g[j][k]).sum::<f64>()
                            + if i == j { 0.05 } else { 0.0 }
                    })
                    .collect()
            })
            .collect()
    };
    let mean: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for i in 0..dim {
        let sd = cov[i][i].sqrt().max(0.05);
        let a = mean[i] + sd * rng.gen_range(-2.0..2.0);
        let b = mean[i] + sd * rng.gen_range(-2.0..2.0);
        let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
        match idx % 4 {
            0 => lo = f64::NEG_INFINITY,
            1 => hi = f64::INFINITY,
            2 => {}
            _ => {
                lo = f64::NEG_INFINITY;
                hi = if i == 0 { hi } else { f64::INFINITY };
            }
        }
        lower.push(lo);
        upper.push(hi);
    }
    GaussianRegion { lower, upper, mean, covariance: cov }
}

#[test]
fn region_probabilities_match_monte_carlo_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 10_000_000u64;
    for idx in 0..100 {
        let region = random_region(&mut rng, idx);
        let p = gaussian_region_prob(&region).unwrap();
        let p_mc = oracle_box_probability(&region, draws, 1_000 + idx as u64);
        let se = (p_mc.max(1e-9) * (1.0 - p_mc).max(1e-9) / draws as f64).sqrt();
        // 3 MC standard errors plus the documented 1e-5 quadrature budget.
        let tol = 3.0 * se + 1e-5;
        assert!(
            (p - p_mc).abs() <= tol,
            "box {idx}: quadrature {p} vs oracle {p_mc} (tol {tol:.2e})\n{region:?}"
        );
    }
}

// ---------------------------------------------------------------------------
// Simultaneous coverage and type-I control
// ---------------------------------------------------------------------------

/// Empirical simultaneous coverage of the simultaneous bounds at given true
/// effects, per method.
fn simulated_coverage(
    method: SciMethod,
    theta1: f64,
    theta2: f64,
    reps: u64,
    seed: u64,
) -> f64 {
    let n = (356usize, 348usize, 145usize);
    let sigma = 2.0f64;
    let params = reference_params();
    let (mu_e, mu_r, mu_p) = (theta1, theta1 - theta2, 0.0);
    let sds = (
        sigma / (n.0 as f64).sqrt(),
        sigma / (n.1 as f64).sqrt(),
        sigma / (n.2 as f64).sqrt(),
    );
    let covered: u64 = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep);
            let x_e = mu_e + sds.0 * draw(&mut rng);
            let x_r = mu_r + sds.1 * draw(&mut rng);
            let x_p = mu_p + sds.2 * draw(&mut rng);
            let trial = known_sigma_trial(x_e, x_r, x_p, n);
            let sci = sci_bounds(&trial, &params, method).unwrap();
            u64::from(sci.l_ep <= theta1 && sci.l_er <= theta2)
        })
        .sum();
    covered as f64 / reps as f64
}

#[test]
fn empirical_simultaneous_coverage() {
    let reps = 100_000u64;
    let alpha = 0.025f64;
    let floor = 1.0 - alpha - 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    // Boundary configuration (theta1, theta2) = (0, -delta0) and an interior one.
    for (theta1, theta2) in [(0.0, -0.5), (1.0, 0.25)] {
        for method in [SciMethod::Iu, SciMethod::Informative, SciMethod::SingleStep] {
            let cov = simulated_coverage(method, theta1, theta2, reps, 77);
            assert!(
                cov >= floor,
                "{method:?} coverage {cov} below {floor} at ({theta1}, {theta2})"
            );
        }
    }
}

fn mc_total(method: SciMethod, scenario: &EffectScenario, alloc: &Allocation, reps: u64, seed: u64) -> f64 {
    success_probability(
        scenario,
        alloc,
        &reference_params(),
        method,
        ProbMode::MonteCarlo { reps, seed },
    )
    .unwrap()
    .total
}

#[test]
fn type_one_success_control_at_reference_nulls() {
    // With no experimental effect the success probability stays at or below
    // alpha at the reference-strength scenarios (v = 0, 0.5, 1).
    let alloc = Allocation::from_sizes(356, 348, 145).unwrap();
    let reps = 100_000u64;
    let alpha = 0.025;
    let cap = alpha + 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
    for v in [0.0, 0.5, 1.0] {
        let scenario = EffectScenario::from_v(0.0, v, 1.0, 2.0);
        for method in SciMethod::ALL {
            let total = mc_total(method, &scenario, &alloc, reps, 31);
            assert!(total <= cap, "{method:?} at v={v}: {total} > {cap}");
        }
    }
}

#[test]
fn single_step_type_one_exceeds_alpha_between_margins() {
    // The single-step procedure has no gatekeeper: with mu_E = mu_P and an
    // intermediate reference effect (between 0 and delta0), the probability
    // of some success verdict exceeds alpha. Exact computation, confirmed by
    // simulation; the non-inferiority claim made there is a true statement
    // (theta2 > -delta0), so familywise error control is not contradicted.
    let alloc = Allocation::from_sizes(356, 348, 145).unwrap();
    let scenario = EffectScenario::from_v(0.0, 0.25, 1.0, 2.0);
    let exact = success_probability(
        &scenario,
        &alloc,
        &reference_params(),
        SciMethod::SingleStep,
        ProbMode::Analytic,
    )
    .unwrap()
    .total;
    assert!(exact > 0.030, "expected an exceedance, got {exact}");
    let mc = mc_total(SciMethod::SingleStep, &scenario, &alloc, 200_000, 13);
    assert!((exact - mc).abs() < 0.003, "exact {exact} vs mc {mc}");
    // Every gated procedure stays below alpha at the same configuration.
    for method in [SciMethod::BaselineNoSci, SciMethod::Iu, SciMethod::Informative] {
        let total = mc_total(method, &scenario, &alloc, 100_000, 13);
        assert!(total <= 0.0265, "{method:?}: {total}");
    }
}

// ---------------------------------------------------------------------------
// Analytic vs Monte Carlo success probabilities
// ---------------------------------------------------------------------------

#[test]
fn analytic_matches_monte_carlo_on_random_scenarios() {
    let params = reference_params();
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let reps = 1_000_000u64;
    for case in 0..20 {
        let n_e = rng.gen_range(50..400);
        let c_r = rng.gen_range(0.3..2.0);
        let c_p = rng.gen_range(0.3..2.0);
        let alloc = Allocation::new(n_e, c_r, c_p).unwrap();
        let scenario = EffectScenario::new(
            rng.gen_range(-0.2..1.4),
            rng.gen_range(-0.2..1.4),
            rng.gen_range(1.0..3.0),
        );
        for method in [SciMethod::Iu, SciMethod::SingleStep, SciMethod::BaselineNoSci] {
            let a = success_probability(&scenario, &alloc, &params, method, ProbMode::Analytic)
                .unwrap();
            let m = success_probability(
                &scenario,
                &alloc,
                &params,
                method,
                ProbMode::MonteCarlo { reps, seed: 9_000 + case },
            )
            .unwrap();
            for (name, pa, pm) in [
                ("total", a.total, m.total),
                ("er", a.er, m.er),
                ("ep", a.ep, m.ep),
            ] {
                let se = (pa.clamp(1e-9, 1.0 - 1e-9) * (1.0 - pa.clamp(1e-9, 1.0 - 1e-9))
                    / reps as f64)
                    .sqrt();
                let tol = 3.0 * se + 2e-5;
                assert!(
                    (pa - pm).abs() <= tol,
                    "case {case} {method:?} {name}: analytic {pa} vs mc {pm} (tol {tol:.2e})"
                );
            }
        }
    }
}

#[test]
fn design_fast_verdicts_match_constructor_adjudication() {
    // The design layer's closed-form verdict (including the inverted
    // informative superiority test) agrees with the bound constructors plus
    // adjudication on simulated data, for every method.
    let params = reference_params();
    let n = (120usize, 90usize, 150usize);
    let alloc = Allocation::from_sizes(n.0, n.1, n.2).unwrap();
    let scenario = EffectScenario::new(0.8, 0.4, 2.0);
    let reps = 100_000u64;
    for method in SciMethod::ALL {
        let fast = success_probability(
            &scenario,
            &alloc,
            &params,
            method,
            ProbMode::MonteCarlo { reps, seed: 4242 },
        )
        .unwrap();
        // Replay the identical substreams through the constructors.
        let sds = (
            scenario.sigma / (n.0 as f64).sqrt(),
            scenario.sigma / (n.1 as f64).sqrt(),
            scenario.sigma / (n.2 as f64).sqrt(),
        );
        let (er, ep): (u64, u64) = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(4242);
                rng.set_stream(rep);
                let x_e = scenario.effect_ep + sds.0 * draw(&mut rng);
                let x_r = scenario.effect_rp + sds.1 * draw(&mut rng);
                let x_p = sds.2 * draw(&mut rng);
                let trial = known_sigma_trial(x_e, x_r, x_p, n);
                let verdict = match method {
                    SciMethod::BaselineNoSci => {
                        baseline_hierarchical(&trial, &params).unwrap().verdict
                    }
                    _ => {
                        let sci = sci_bounds(&trial, &params, method).unwrap();
                        adjudicate_success(&sci, &params).unwrap().verdict
                    }
                };
                match verdict {
                    Verdict::SuccessEr => (1u64, 0u64),
                    Verdict::SuccessEp => (0, 1),
                    Verdict::Failure => (0, 0),
                }
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let want = SuccessSplit {
            total: (er + ep) as f64 / reps as f64,
            er: er as f64 / reps as f64,
            ep: ep as f64 / reps as f64,
        };
        assert_eq!(fast, want, "{method:?}");
    }
}

// ---------------------------------------------------------------------------
// Simulation engine invariants
// ---------------------------------------------------------------------------

#[test]
fn simulation_partition_independent() {
    let config = SimulationConfig {
        scenario: EffectScenario::from_v(1.0, 0.5, 1.0, 2.0),
        alloc: Allocation::from_sizes(227, 75, 285).unwrap(),
        params: reference_params(),
        methods: SciMethod::ALL.to_vec(),
        reps: 20_000,
        seed: 99,
    };
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_simulation(&config).unwrap());
    let multi = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(|| run_simulation(&config).unwrap());
    assert_eq!(single, multi);
}

#[test]
fn simulated_pos_matches_analytic() {
    let params = reference_params();
    let alloc = Allocation::from_sizes(356, 348, 145).unwrap();
    let reps = 100_000u64;
    for v in [0.0, 0.5, 1.0] {
        let scenario = EffectScenario::from_v(1.0, v, 1.0, 2.0);
        let config = SimulationConfig {
            scenario,
            alloc,
            params,
            methods: vec![SciMethod::Iu, SciMethod::SingleStep, SciMethod::BaselineNoSci],
            reps,
            seed: 1234,
        };
        let summary = run_simulation(&config).unwrap();
        for m in &summary.per_method {
            let a = success_probability(&scenario, &alloc, &params, m.method, ProbMode::Analytic)
                .unwrap();
            let se = (a.total.clamp(1e-9, 1.0 - 1e-9) * (1.0 - a.total.clamp(1e-9, 1.0 - 1e-9))
                / reps as f64)
                .sqrt();
            assert!(
                (a.total - m.pos_total).abs() <= 3.0 * se + 2e-5,
                "{:?} at v={v}: analytic {} vs simulated {}",
                m.method,
                a.total,
                m.pos_total
            );
        }
    }
}

#[test]
fn median_lower_bound_monotone_in_effect_ep() {
    let params = reference_params();
    let alloc = Allocation::from_sizes(356, 348, 145).unwrap();
    for method in [SciMethod::Iu, SciMethod::Informative, SciMethod::SingleStep] {
        let mut prev = f64::NEG_INFINITY;
        for step in 0..6 {
            let effect_ep = 0.2 * step as f64;
            let config = SimulationConfig {
                scenario: EffectScenario::new(effect_ep, 0.5, 2.0),
                alloc,
                params,
                methods: vec![method],
                reps: 20_000,
                seed: 31_415,
            };
            let summary = run_simulation(&config).unwrap();
            let median = summary.per_method[0].median_l_ep;
            assert!(
                median >= prev - 1e-12,
                "{method:?}: median fell from {prev} to {median} at effect_ep={effect_ep}"
            );
            prev = median;
        }
    }
}

// ---------------------------------------------------------------------------
// Stepwise bound identities (randomized)
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn formal_and_intuitive_bounds_identical(
        x_e in -3.0f64..3.0,
        x_r in -3.0f64..3.0,
        x_p in -3.0f64..3.0,
        n_e in 10usize..500,
        n_r in 10usize..500,
        n_p in 10usize..500,
        delta0 in 1e-6f64..2.0,
    ) {
        let params = DesignParams::new(0.025, delta0, 0.5, 0.01).unwrap();
        let trial = known_sigma_trial(x_e, x_r, x_p, (n_e, n_r, n_p));
        let formal = sci_iu_formal(&trial, &params).unwrap();
        let intuitive = sci_iu_intuitive(&trial, &params).unwrap();
        prop_assert_eq!(formal.l_ep.to_bits(), intuitive.l_ep.to_bits());
        prop_assert_eq!(formal.l_er.to_bits(), intuitive.l_er.to_bits());
        // Simultaneity never improves on the unadjusted bound.
        prop_assert!(formal.l_ep <= formal.ell_ep);
        prop_assert!(formal.l_er <= formal.ell_er);
        // Doubly-rejected branch identity.
        if formal.ell_ep >= 0.0 && formal.ell_er >= -delta0 {
            prop_assert!(formal.l_ep >= 0.0);
            prop_assert_eq!(formal.l_ep, formal.ell_ep.min(formal.ell_er + delta0));
            prop_assert!((formal.l_ep - formal.l_er - delta0).abs() <= 1e-9 * (1.0 + delta0));
        }
    }

    #[test]
    fn informative_root_is_exact_and_above_margin(
        x_e in -2.0f64..3.0,
        x_r in -2.0f64..3.0,
        n_e in 10usize..500,
        n_r in 10usize..500,
        q in 0.001f64..0.5,
    ) {
        let params = DesignParams::new(0.025, 0.5, 0.5, q).unwrap();
        let trial = known_sigma_trial(x_e, x_r, 0.0, (n_e, n_r, 100));
        let res = sci_informative(&trial, &params).unwrap();
        if res.ell_ep >= 0.0 && res.ell_er >= -params.delta0 {
            let (_, se_er, _) = trial.comparison_ses().unwrap();
            let lhs = std_normal_sf((x_e - x_r - res.l_er) / se_er);
            let rhs = q.powf(res.l_er + params.delta0) * params.alpha;
            prop_assert!((lhs - rhs).abs() <= 1e-8, "residual {}", lhs - rhs);
            prop_assert!(res.l_er >= -params.delta0);
            prop_assert!(res.l_ep <= res.ell_ep + 1e-12);
        }
    }

    #[test]
    fn single_step_bounds_dominated_and_calibrated(
        x_e in -2.0f64..3.0,
        x_r in -2.0f64..3.0,
        n_e in 10usize..500,
        n_r in 10usize..500,
        n_p in 10usize..500,
    ) {
        let params = reference_params();
        let trial = known_sigma_trial(x_e, x_r, 0.0, (n_e, n_r, n_p));
        let res = sci_single_step(&trial, &params).unwrap();
        prop_assert!(res.l_ep <= res.ell_ep);
        prop_assert!(res.l_er <= res.ell_er);
    }
}

// ---------------------------------------------------------------------------
// Scalar primitive identities on grids
// ---------------------------------------------------------------------------

#[test]
fn normal_reflection_and_round_trip_grids() {
    let mut x = -8.0f64;
    while x <= 8.0 {
        assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() <= 1e-12);
        x += 0.013;
    }
    let mut x = -6.0f64;
    while x <= 6.0 {
        let back = std_normal_quantile(std_normal_cdf(x)).unwrap();
        assert!((back - x).abs() <= 1e-8, "round trip at {x}: {back}");
        x += 0.017;
    }
}

#[test]
fn bivariate_closed_form_identity_grid() {
    let mut rho = -0.999f64;
    while rho < 1.0 {
        let p = bivariate_normal_cdf(0.0, 0.0, rho).unwrap();
        let closed = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        assert!((p - closed).abs() <= 1e-7, "rho {rho}: {p} vs {closed}");
        rho += 0.013;
    }
}

#[test]
fn equicoordinate_quantile_limit_values() {
    let d_high = equicoordinate_quantile(0.025, 1.0 - 1e-9).unwrap();
    assert!((d_high - std_normal_quantile(0.975).unwrap()).abs() <= 1e-3);
    let d_zero = equicoordinate_quantile(0.025, 0.0).unwrap();
    assert!((d_zero - std_normal_quantile(0.975f64.sqrt()).unwrap()).abs() <= 1e-3);
}
