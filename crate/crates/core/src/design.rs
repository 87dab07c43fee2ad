//! Design-stage calculations: success probabilities under assumed true
//! effects, required sample sizes at fixed allocation ratios, allocation
//! optimization, and mixture-weighted success probabilities.
//!
//! Success events of the stepwise, single-step and baseline procedures are
//! intersections of half-spaces in the joint law of the difference
//! statistics `(X_E - X_P, X_R - X_P, X_E - X_R)`, a rank-2 Gaussian vector;
//! their probabilities are evaluated exactly through
//! [`gaussian_region_prob`]. The informative procedure's superiority event
//! is not polyhedral, so its design calculations run on seeded Monte Carlo.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sci::{DesignParams, FilterKind, SciMethod};
use crate::stats::{
    equicoordinate_quantile, gaussian_region_prob, std_normal_sf, GaussianRegion,
};

/// Assumed true effects of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectScenario {
    /// True `mu_E - mu_P`.
    pub effect_ep: f64,
    /// True `mu_R - mu_P`.
    pub effect_rp: f64,
    /// Common known standard deviation.
    pub sigma: f64,
    /// Optional bookkeeping ratio `effect_rp / mu_r_hist`.
    pub v: Option<f64>,
}

impl EffectScenario {
    pub fn new(effect_ep: f64, effect_rp: f64, sigma: f64) -> Self {
        Self { effect_ep, effect_rp, sigma, v: None }
    }

    /// Scenario expressed through the reference-strength ratio `v`.
    pub fn from_v(effect_ep: f64, v: f64, mu_r_hist: f64, sigma: f64) -> Self {
        Self { effect_ep, effect_rp: v * mu_r_hist, sigma, v: Some(v) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Validation(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !self.effect_ep.is_finite() || !self.effect_rp.is_finite() {
            return Err(Error::Validation("effects must be finite".into()));
        }
        Ok(())
    }
}

/// Sample sizes expressed as `n_E` plus the allocation ratios
/// `c_R = n_R / n_E` and `c_P = n_P / n_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub n_e: usize,
    pub c_r: f64,
    pub c_p: f64,
}

impl Allocation {
    pub fn new(n_e: usize, c_r: f64, c_p: f64) -> Result<Self> {
        let alloc = Self { n_e, c_r, c_p };
        alloc.validate()?;
        Ok(alloc)
    }

    /// Allocation from explicit per-arm sizes.
    pub fn from_sizes(n_e: usize, n_r: usize, n_p: usize) -> Result<Self> {
        Self::new(n_e, n_r as f64 / n_e as f64, n_p as f64 / n_e as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_e < 2 {
            return Err(Error::Validation(format!("n_E must be >= 2, got {}", self.n_e)));
        }
        if !(self.c_r > 0.0) || !(self.c_p > 0.0) {
            return Err(Error::Validation(format!(
                "allocation ratios must be positive, got c_R = {}, c_P = {}",
                self.c_r, self.c_p
            )));
        }
        if self.n_r() < 2 || self.n_p() < 2 {
            return Err(Error::Validation(
                "derived group sizes n_R and n_P must be >= 2".into(),
            ));
        }
        Ok(())
    }

    /// Reference arm size, rounded half-up from the ratio.
    pub fn n_r(&self) -> usize {
        (self.c_r * self.n_e as f64).round() as usize
    }

    /// Placebo arm size, rounded half-up from the ratio.
    pub fn n_p(&self) -> usize {
        (self.c_p * self.n_e as f64).round() as usize
    }

    pub fn total(&self) -> usize {
        self.n_e + self.n_r() + self.n_p()
    }
}

/// Discrete mixture of effect scenarios with probability weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureScenario {
    pub components: Vec<(EffectScenario, f64)>,
}

impl MixtureScenario {
    pub fn new(components: Vec<(EffectScenario, f64)>) -> Result<Self> {
        let mix = Self { components };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Validation("mixture requires at least one component".into()));
        }
        let mut total = 0.0;
        for (scenario, w) in &self.components {
            scenario.validate()?;
            if !(*w >= 0.0) {
                return Err(Error::Validation(format!("mixture weights must be >= 0, got {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("mixture weights must sum to 1, got {total}")));
        }
        Ok(())
    }
}

impl From<EffectScenario> for MixtureScenario {
    fn from(scenario: EffectScenario) -> Self {
        Self { components: vec![(scenario, 1.0)] }
    }
}

/// How success probabilities are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProbMode {
    /// Exact Gaussian region probabilities (IU, single-step, baseline).
    Analytic,
    /// Seeded Monte Carlo with per-replication substreams.
    MonteCarlo { reps: u64, seed: u64 },
}

/// Success probability split by verdict path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessSplit {
    pub total: f64,
    pub er: f64,
    pub ep: f64,
}

/// Search settings for sample-size calculations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    /// Largest experimental-arm size the search may reach.
    pub n_e_cap: usize,
    /// Monte Carlo replications used where the analytic path is unavailable.
    pub mc_reps: u64,
    /// Seed of the design-stage Monte Carlo.
    pub mc_seed: u64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { n_e_cap: 100_000, mc_reps: 100_000, mc_seed: 0x5eed_0001 }
    }
}

/// Result of a sample-size determination at fixed ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub n_e: usize,
    pub n_r: usize,
    pub n_p: usize,
    pub n_total: usize,
    pub achieved_power: f64,
}

/// Result of an allocation optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub n_e: usize,
    pub n_r: usize,
    pub n_p: usize,
    pub n_total: usize,
    pub achieved_power: f64,
    pub c_r: f64,
    pub c_p: f64,
    pub method: SciMethod,
    pub filter: FilterKind,
}

/// Standard errors and filter threshold of a design configuration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DesignScales {
    se_ep: f64,
    se_er: f64,
    se_rp: f64,
    z_alpha: f64,
    /// Filter threshold on `X_R - X_P`.
    filter_threshold: f64,
}

impl DesignScales {
    fn new(scenario: &EffectScenario, alloc: &Allocation, params: &DesignParams, method: SciMethod) -> Self {
        let (ne, nr, np) = (alloc.n_e as f64, alloc.n_r() as f64, alloc.n_p() as f64);
        let s = scenario.sigma;
        let se_ep = s * (1.0 / ne + 1.0 / np).sqrt();
        let se_er = s * (1.0 / ne + 1.0 / nr).sqrt();
        let se_rp = s * (1.0 / nr + 1.0 / np).sqrt();
        let z_alpha = params.z_alpha();
        let filter_threshold = match method.filter_kind() {
            FilterKind::IuFilter => z_alpha * (se_ep - se_er) + params.delta0,
            FilterKind::SuperiorityFilter => z_alpha * se_rp,
        };
        Self { se_ep, se_er, se_rp, z_alpha, filter_threshold }
    }
}

/// Joint mean and covariance of `(D1, D2, W) = (X_E - X_P, X_R - X_P, X_E - X_R)`.
fn difference_law(scenario: &EffectScenario, alloc: &Allocation) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (ne, nr, np) = (alloc.n_e as f64, alloc.n_r() as f64, alloc.n_p() as f64);
    let s2 = scenario.sigma * scenario.sigma;
    let (ve, vr, vp) = (s2 / ne, s2 / nr, s2 / np);
    let mean = vec![
        scenario.effect_ep,
        scenario.effect_rp,
        scenario.effect_ep - scenario.effect_rp,
    ];
    let cov = vec![
        vec![ve + vp, vp, ve],
        vec![vp, vr + vp, -vr],
        vec![ve, -vr, ve + vr],
    ];
    (mean, cov)
}

/// Success events in the `(D1, D2, W)` basis as box constraints:
/// `(d1_lower, d2_lower, d2_upper, w_lower)`.
struct SuccessEvents {
    er: (f64, f64, f64, f64),
    ep: (f64, f64, f64, f64),
}

fn success_events(
    scales: &DesignScales,
    params: &DesignParams,
    method: SciMethod,
) -> Result<SuccessEvents> {
    let z = scales.z_alpha;
    let t = scales.filter_threshold;
    let inf = f64::INFINITY;
    match method {
        // Success-ER: filter, gatekeeper, and non-inferiority all hold.
        // Success-EP: filter fails, doubly-rejected branch, and the reported
        // E-vs-P bound reaches delta1 (for IU the bound equals ell_EP when
        // the filter fails).
        SciMethod::Iu | SciMethod::BaselineNoSci => Ok(SuccessEvents {
            er: (z * scales.se_ep, t, inf, z * scales.se_er - params.delta0),
            ep: (
                z * scales.se_ep + params.delta1,
                -inf,
                t,
                z * scales.se_er - params.delta0,
            ),
        }),
        SciMethod::SingleStep => {
            let rho = scales.rho_single_step();
            let d = equicoordinate_quantile(params.alpha, rho)?;
            Ok(SuccessEvents {
                er: (-inf, t, inf, d * scales.se_er - params.delta0),
                ep: (d * scales.se_ep + params.delta1, -inf, t, -inf),
            })
        }
        SciMethod::Informative => Err(Error::UnsupportedMode(
            "informative success events are not polyhedral; use Monte Carlo".into(),
        )),
    }
}

impl DesignScales {
    /// Correlation of the two single-step test statistics, recovered from the
    /// comparison standard errors: `rho = Var(X_E) / (se_EP * se_ER)`.
    fn rho_single_step(&self) -> f64 {
        // se_ep^2 + se_er^2 - se_rp^2 = 2 Var(X_E).
        let var_e = 0.5 * (self.se_ep * self.se_ep + self.se_er * self.se_er - self.se_rp * self.se_rp);
        (var_e / (self.se_ep * self.se_er)).clamp(0.0, 1.0 - 1e-12)
    }
}

fn event_probability(
    mean: &[f64],
    cov: &[Vec<f64>],
    event: (f64, f64, f64, f64),
) -> Result<f64> {
    let (d1_lo, d2_lo, d2_hi, w_lo) = event;
    let region = GaussianRegion {
        lower: vec![d1_lo, d2_lo, w_lo],
        upper: vec![f64::INFINITY, d2_hi, f64::INFINITY],
        mean: mean.to_vec(),
        covariance: cov.to_vec(),
    };
    gaussian_region_prob(&region)
}

/// Probability of study success under assumed true effects, split into the
/// non-inferiority (ER) and superiority (EP) paths.
///
/// `Analytic` mode is exact for `Iu`, `SingleStep` and `BaselineNoSci`;
/// the informative method requires `MonteCarlo`.
pub fn success_probability(
    scenario: &EffectScenario,
    alloc: &Allocation,
    params: &DesignParams,
    method: SciMethod,
    mode: ProbMode,
) -> Result<SuccessSplit> {
    scenario.validate()?;
    alloc.validate()?;
    params.validate()?;
    match mode {
        ProbMode::Analytic => {
            if method == SciMethod::Informative {
                return Err(Error::UnsupportedMode(
                    "analytic success probabilities are unavailable for the informative method"
                        .into(),
                ));
            }
            let scales = DesignScales::new(scenario, alloc, params, method);
            let events = success_events(&scales, params, method)?;
            let (mean, cov) = difference_law(scenario, alloc);
            let p_er = event_probability(&mean, &cov, events.er)?;
            let p_ep = event_probability(&mean, &cov, events.ep)?;
            Ok(SuccessSplit { total: p_er + p_ep, er: p_er, ep: p_ep })
        }
        ProbMode::MonteCarlo { reps, seed } => {
            if reps == 0 {
                return Err(Error::Validation("Monte Carlo mode requires reps >= 1".into()));
            }
            let (er, ep) = mc_success_counts(scenario, alloc, params, method, reps, seed);
            let n = reps as f64;
            Ok(SuccessSplit {
                total: (er + ep) as f64 / n,
                er: er as f64 / n,
                ep: ep as f64 / n,
            })
        }
    }
}

/// Per-replication success verdict on simulated arm means, counted in
/// parallel. Replication `i` draws from a dedicated RNG substream, so the
/// result is independent of the worker count.
fn mc_success_counts(
    scenario: &EffectScenario,
    alloc: &Allocation,
    params: &DesignParams,
    method: SciMethod,
    reps: u64,
    seed: u64,
) -> (u64, u64) {
    mc_success_counts_range(scenario, alloc, params, method, 0..reps, seed)
}

/// Success counts over a replication index range; replication `i` always sees
/// the same draws no matter how the range is split or scheduled.
fn mc_success_counts_range(
    scenario: &EffectScenario,
    alloc: &Allocation,
    params: &DesignParams,
    method: SciMethod,
    range: std::ops::Range<u64>,
    seed: u64,
) -> (u64, u64) {
    let scales = DesignScales::new(scenario, alloc, params, method);
    let d_single = if method == SciMethod::SingleStep {
        equicoordinate_quantile(params.alpha, scales.rho_single_step()).expect("validated")
    } else {
        scales.z_alpha
    };
    let (ne, nr, np) = (alloc.n_e as f64, alloc.n_r() as f64, alloc.n_p() as f64);
    let sd_e = scenario.sigma / ne.sqrt();
    let sd_r = scenario.sigma / nr.sqrt();
    let sd_p = scenario.sigma / np.sqrt();
    let base = base_rng(seed);

    range
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream_of(&base, rep);
            let x_e = scenario.effect_ep + sd_e * draw_standard(&mut rng);
            let x_r = scenario.effect_rp + sd_r * draw_standard(&mut rng);
            let x_p = sd_p * draw_standard(&mut rng);
            match verdict_fast(x_e, x_r, x_p, &scales, params, method, d_single) {
                FastVerdict::Er => (1u64, 0u64),
                FastVerdict::Ep => (0, 1),
                FastVerdict::Failure => (0, 0),
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

/// Base generator for a seed; replication substreams are derived from it by
/// [`substream_of`]. Keyed once so the per-replication cost is a state copy.
pub(crate) fn base_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub(crate) fn substream_of(base: &rand_chacha::ChaCha8Rng, rep: u64) -> rand_chacha::ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(rep);
    rng
}


#[inline]
pub(crate) fn draw_standard(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub(crate) enum FastVerdict {
    Er,
    Ep,
    Failure,
}

/// Closed-form success verdict on observed means under known sigma.
///
/// For the informative method the superiority condition
/// `L_EP_inf >= delta1` is tested by inverting the level-decay equation
/// instead of solving for the bound: with `p_req = 1 - Phi((D1 - delta1)/se_EP)`
/// and `R = 1 - p_req/alpha`, the condition holds iff
/// `1 - Phi((W - theta_req)/se_ER) <= R alpha` at
/// `theta_req = ln(R)/ln(q) - delta0`.
pub(crate) fn verdict_fast(
    x_e: f64,
    x_r: f64,
    x_p: f64,
    scales: &DesignScales,
    params: &DesignParams,
    method: SciMethod,
    d_quant: f64,
) -> FastVerdict {
    let d1 = x_e - x_p;
    let d2 = x_r - x_p;
    let w = x_e - x_r;
    let filter = d2 >= scales.filter_threshold;
    let z = scales.z_alpha;
    match method {
        SciMethod::SingleStep => {
            if filter {
                if w - d_quant * scales.se_er >= -params.delta0 {
                    FastVerdict::Er
                } else {
                    FastVerdict::Failure
                }
            } else if d1 - d_quant * scales.se_ep >= params.delta1 {
                FastVerdict::Ep
            } else {
                FastVerdict::Failure
            }
        }
        SciMethod::Iu | SciMethod::BaselineNoSci => {
            let gate = d1 >= z * scales.se_ep;
            let ni = w >= z * scales.se_er - params.delta0;
            if filter {
                if gate && ni {
                    FastVerdict::Er
                } else {
                    FastVerdict::Failure
                }
            } else if gate && ni && d1 >= z * scales.se_ep + params.delta1 {
                FastVerdict::Ep
            } else {
                FastVerdict::Failure
            }
        }
        SciMethod::Informative => {
            let gate = d1 >= z * scales.se_ep;
            let ni = w >= z * scales.se_er - params.delta0;
            if filter {
                if gate && ni {
                    FastVerdict::Er
                } else {
                    FastVerdict::Failure
                }
            } else {
                if !(gate && ni) {
                    return FastVerdict::Failure;
                }
                let p_req = std_normal_sf((d1 - params.delta1) / scales.se_ep);
                if p_req >= params.alpha {
                    return FastVerdict::Failure;
                }
                let ratio = 1.0 - p_req / params.alpha;
                if ratio <= 0.0 {
                    return FastVerdict::Failure;
                }
                let theta_req = ratio.ln() / params.q.ln() - params.delta0;
                if std_normal_sf((w - theta_req) / scales.se_er) <= ratio * params.alpha {
                    FastVerdict::Ep
                } else {
                    FastVerdict::Failure
                }
            }
        }
    }
}

/// Mixture-weighted success probability: the weighted sum of per-component
/// success probabilities.
pub fn weighted_success_probability(
    mixture: &MixtureScenario,
    alloc: &Allocation,
    params: &DesignParams,
    method: SciMethod,
    mode: ProbMode,
) -> Result<f64> {
    mixture.validate()?;
    let mut total = 0.0;
    for (scenario, weight) in &mixture.components {
        if *weight == 0.0 {
            continue;
        }
        total += weight * success_probability(scenario, alloc, params, method, mode)?.total;
    }
    Ok(total)
}

fn mixture_split(
    mixture: &MixtureScenario,
    alloc: &Allocation,
    params: &DesignParams,
    method: SciMethod,
    mode: ProbMode,
) -> Result<SuccessSplit> {
    let mut acc = SuccessSplit { total: 0.0, er: 0.0, ep: 0.0 };
    for (scenario, weight) in &mixture.components {
        if *weight == 0.0 {
            continue;
        }
        let s = success_probability(scenario, alloc, params, method, mode)?;
        acc.total += weight * s.total;
        acc.er += weight * s.er;
        acc.ep += weight * s.ep;
    }
    Ok(acc)
}

fn default_mode(method: SciMethod, opts: &DesignOptions) -> ProbMode {
    if method == SciMethod::Informative {
        ProbMode::MonteCarlo { reps: opts.mc_reps, seed: opts.mc_seed }
    } else {
        ProbMode::Analytic
    }
}

/// Smallest success count that reaches the target as a fraction of `reps`
/// under the same `f64` comparison used for full evaluations.
fn min_success_count(target: f64, reps: u64) -> u64 {
    let n = reps as f64;
    let mut k = (target * n).ceil() as u64;
    while k > 0 && (k - 1) as f64 / n >= target {
        k -= 1;
    }
    while (k as f64) / n < target {
        k += 1;
    }
    k.min(reps + 1)
}

/// Whether the success probability reaches the target.
///
/// In Monte Carlo mode the replications are consumed in deterministic index
/// chunks and the scan stops once the accumulated count settles the
/// comparison; the decision equals the full-run decision exactly.
fn meets_target(
    mixture: &MixtureScenario,
    alloc: &Allocation,
    params: &DesignParams,
    method: SciMethod,
    mode: ProbMode,
    target: f64,
) -> Result<bool> {
    match mode {
        ProbMode::Analytic => Ok(mixture_split(mixture, alloc, params, method, mode)?.total >= target),
        ProbMode::MonteCarlo { reps, seed } => {
            let single = mixture.components.len() == 1 && mixture.components[0].1 == 1.0;
            if !single {
                return Ok(mixture_split(mixture, alloc, params, method, mode)?.total >= target);
            }
            let scenario = &mixture.components[0].0;
            let need = min_success_count(target, reps);
            if need > reps {
                return Ok(false);
            }
            const CHUNK: u64 = 10_000;
            let mut successes = 0u64;
            let mut done = 0u64;
            while done < reps {
                let end = (done + CHUNK).min(reps);
                let (er, ep) =
                    mc_success_counts_range(scenario, alloc, params, method, done..end, seed);
                successes += er + ep;
                done = end;
                if successes >= need {
                    return Ok(true);
                }
                if successes + (reps - done) < need {
                    return Ok(false);
                }
            }
            Ok(successes >= need)
        }
    }
}

/// The smallest experimental-arm size `n_E` such that `n_E` and every larger
/// size below `hi` reach the target, or `None` when even `hi` falls short.
fn bisect_n_e(
    mixture: &MixtureScenario,
    c_r: f64,
    c_p: f64,
    params: &DesignParams,
    method: SciMethod,
    target: f64,
    mode: ProbMode,
    lo_hint: usize,
    hi: usize,
) -> Result<Option<usize>> {
    let reaches = |n_e: usize| -> Result<Option<bool>> {
        match Allocation::new(n_e, c_r, c_p) {
            Ok(alloc) => Ok(Some(meets_target(mixture, &alloc, params, method, mode, target)?)),
            // Derived arm sizes below 2: treat as unreachable at this n_E.
            Err(_) => Ok(None),
        }
    };
    match reaches(hi)? {
        Some(true) => {}
        _ => return Ok(None),
    }
    let mut lo = lo_hint.max(2);
    if reaches(lo)? == Some(true) {
        return Ok(Some(lo));
    }
    let mut hi = hi;
    // Invariant: target unmet at lo, met at hi.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match reaches(mid)? {
            Some(true) => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(Some(hi))
}

/// Smallest sample size reaching the target success probability at fixed
/// allocation ratios, by integer bisection on `n_E` (success probability is
/// nondecreasing in `n_E` at fixed ratios).
pub fn required_total_n(
    mixture: &MixtureScenario,
    c_r: f64,
    c_p: f64,
    params: &DesignParams,
    method: SciMethod,
    target: f64,
    opts: &DesignOptions,
) -> Result<SampleSize> {
    mixture.validate()?;
    params.validate()?;
    if !(target > params.alpha && target < 1.0) {
        return Err(Error::Validation(format!(
            "target success probability must lie in (alpha, 1), got {target}"
        )));
    }
    if !(c_r > 0.0 && c_p > 0.0) {
        return Err(Error::Validation("allocation ratios must be positive".into()));
    }
    let mode = default_mode(method, opts);
    let n_e = bisect_n_e(mixture, c_r, c_p, params, method, target, mode, 2, opts.n_e_cap)?
        .ok_or(Error::TargetUnreachable { target, cap: opts.n_e_cap })?;
    let alloc = Allocation::new(n_e, c_r, c_p)?;
    let achieved = mixture_split(mixture, &alloc, params, method, mode)?.total;
    Ok(SampleSize {
        n_e,
        n_r: alloc.n_r(),
        n_p: alloc.n_p(),
        n_total: alloc.total(),
        achieved_power: achieved,
    })
}

/// Candidate cell of the allocation search.
#[derive(Debug, Clone, Copy)]
struct Cell {
    c_r: f64,
    c_p: f64,
    n_e: usize,
    n_total: usize,
    n_p: usize,
}

/// Minimizes the total sample size over allocation ratios: a coarse grid
/// (step 0.05 on each ratio in [0.05, 3]) followed by local refinement at
/// step 0.01. Ties break toward smaller `n_P`, then smaller `c_R`.
///
/// Grid cells are pruned against the best total found so far (success
/// probability is nondecreasing in `n_E` at fixed ratios, so a cell that
/// misses the target at the current-best total cannot improve on it).
pub fn optimize_allocation(
    mixture: &MixtureScenario,
    params: &DesignParams,
    method: SciMethod,
    target: f64,
    opts: &DesignOptions,
) -> Result<OptimizationResult> {
    mixture.validate()?;
    params.validate()?;
    if !(target > params.alpha && target < 1.0) {
        return Err(Error::Validation(format!(
            "target success probability must lie in (alpha, 1), got {target}"
        )));
    }
    let mode = default_mode(method, opts);

    let coarse: Vec<f64> = (1..=60).map(|i| i as f64 * 0.05).collect();
    let mut best: Option<Cell> = None;

    // Seed the pruning bound from a small pilot set of allocations.
    for &(c_r, c_p) in &[(1.0, 1.0), (1.0, 0.5), (0.5, 1.0), (0.3, 1.25), (1.0, 0.35)] {
        if let Ok(size) = required_total_n(mixture, c_r, c_p, params, method, target, opts) {
            let cell = Cell {
                c_r,
                c_p,
                n_e: size.n_e,
                n_total: size.n_total,
                n_p: size.n_p,
            };
            best = Some(match best {
                Some(b) if !better(&cell, &b) => b,
                _ => cell,
            });
        }
    }

    best = search_grid(&coarse, &coarse, mixture, params, method, target, mode, opts, best)?;
    let coarse_best = best.ok_or(Error::TargetUnreachable { target, cap: opts.n_e_cap })?;

    // Local refinement around the coarse winner.
    let refine_axis = |center: f64| -> Vec<f64> {
        (-5..=5)
            .map(|k| center + 0.01 * k as f64)
            .filter(|&c| c >= 0.009)
            .collect()
    };
    let grid_r = refine_axis(coarse_best.c_r);
    let grid_p = refine_axis(coarse_best.c_p);
    best = search_grid(&grid_r, &grid_p, mixture, params, method, target, mode, opts, best)?;

    let cell = best.expect("coarse winner persists");
    let alloc = Allocation::new(cell.n_e, cell.c_r, cell.c_p)?;
    let achieved = mixture_split(mixture, &alloc, params, method, mode)?.total;
    Ok(OptimizationResult {
        n_e: cell.n_e,
        n_r: alloc.n_r(),
        n_p: cell.n_p,
        n_total: cell.n_total,
        achieved_power: achieved,
        c_r: cell.c_r,
        c_p: cell.c_p,
        method,
        filter: method.filter_kind(),
    })
}

/// Lexicographic preference: smaller N, then smaller n_P, then smaller c_R.
fn better(a: &Cell, b: &Cell) -> bool {
    (a.n_total, a.n_p, ordered(a.c_r)) < (b.n_total, b.n_p, ordered(b.c_r))
}

fn ordered(x: f64) -> ordered_key::Key {
    ordered_key::Key(x)
}

mod ordered_key {
    /// Total order on finite grid ratios for deterministic tie-breaking.
    #[derive(PartialEq, PartialOrd)]
    pub struct Key(pub f64);
    impl Eq for Key {}
    #[allow(clippy::derive_ord_xor_partial_ord)]
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn search_grid(
    grid_r: &[f64],
    grid_p: &[f64],
    mixture: &MixtureScenario,
    params: &DesignParams,
    method: SciMethod,
    target: f64,
    mode: ProbMode,
    opts: &DesignOptions,
    mut best: Option<Cell>,
) -> Result<Option<Cell>> {
    // Rows are processed in deterministic chunks; cells within a chunk run in
    // parallel against the same pruning bound, so the scan order (and hence
    // the result) does not depend on the worker count.
    for &c_r in grid_r {
        let best_total = best.as_ref().map(|b| b.n_total);
        let row: Vec<Option<Cell>> = grid_p
            .par_iter()
            .map(|&c_p| -> Result<Option<Cell>> {
                let cap_cell = best_total.map_or(opts.n_e_cap, |n| cap_n_e(n, c_r, c_p)).min(opts.n_e_cap);
                if cap_cell < 2 {
                    return Ok(None);
                }
                let found = bisect_n_e(
                    mixture, c_r, c_p, params, method, target, mode, 2, cap_cell,
                )?;
                Ok(found.and_then(|n_e| {
                    let alloc = Allocation::new(n_e, c_r, c_p).ok()?;
                    Some(Cell {
                        c_r,
                        c_p,
                        n_e,
                        n_total: alloc.total(),
                        n_p: alloc.n_p(),
                    })
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        for cell in row.into_iter().flatten() {
            best = Some(match best {
                Some(b) if !better(&cell, &b) => b,
                _ => cell,
            });
        }
    }
    Ok(best)
}

/// Upper bound on `n_E` for a cell to possibly match a known total `n_best`:
/// the derived total is at least `n_E (1 + c_r + c_p) - 1` after rounding,
/// so larger `n_E` cannot tie or beat it.
fn cap_n_e(n_best: usize, c_r: f64, c_p: f64) -> usize {
    ((n_best as f64 + 1.0) / (1.0 + c_r + c_p)).floor() as usize + 1
}
