//! Confidence bounds, filters, and success adjudication for the three-arm
//! gold-standard design.
//!
//! The trial compares an experimental treatment E against an active reference
//! R and placebo P. Write `theta1 = mu_E - mu_P` and `theta2 = mu_E - mu_R`.
//! A study is successful if either the reference is "strong" (a data-driven
//! filter holds) and non-inferiority `theta2 > -delta0` is shown, or the
//! reference is "weak" and relevant superiority `theta1 > delta1` over
//! placebo is shown. Three families of simultaneous lower confidence bounds
//! for `(theta1, theta2)` are provided, plus the hierarchical baseline
//! procedure that reports no intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{
    equicoordinate_quantile, pooled_sd, solve_monotone_root, std_normal_quantile, std_normal_sf,
    RootBracket,
};

/// Observed summary of one trial arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    /// Observed mean outcome.
    pub mean: f64,
    /// Observed standard deviation; required in pooled-variance mode.
    pub sd: Option<f64>,
    /// Number of observations.
    pub n: usize,
}

impl ArmSummary {
    pub fn new(mean: f64, n: usize) -> Self {
        Self { mean, sd: None, n }
    }

    pub fn with_sd(mean: f64, sd: f64, n: usize) -> Self {
        Self { mean, sd: Some(sd), n }
    }
}

/// How the outcome standard deviation enters the test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarianceMode {
    /// Known common standard deviation sigma for all arms.
    KnownSigma(f64),
    /// Per-comparison pooled sample standard deviations with normal quantiles.
    PooledPerComparison,
}

/// Observed data of a three-arm trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialData {
    pub arm_e: ArmSummary,
    pub arm_r: ArmSummary,
    pub arm_p: ArmSummary,
    pub variance_mode: VarianceMode,
}

impl TrialData {
    pub fn validate(&self) -> Result<()> {
        for (name, arm) in [("E", &self.arm_e), ("R", &self.arm_r), ("P", &self.arm_p)] {
            if arm.n < 2 {
                return Err(Error::Validation(format!("arm {name} requires n >= 2, got {}", arm.n)));
            }
            if !arm.mean.is_finite() {
                return Err(Error::Validation(format!("arm {name} mean must be finite")));
            }
            if let Some(sd) = arm.sd {
                if !(sd > 0.0) {
                    return Err(Error::Validation(format!(
                        "arm {name} sd must be positive, got {sd}"
                    )));
                }
            }
        }
        match self.variance_mode {
            VarianceMode::KnownSigma(sigma) if !(sigma > 0.0) => Err(Error::Validation(
                format!("known sigma must be positive, got {sigma}"),
            )),
            VarianceMode::PooledPerComparison
                if self.arm_e.sd.is_none() || self.arm_r.sd.is_none() || self.arm_p.sd.is_none() =>
            {
                Err(Error::Validation(
                    "pooled variance mode requires a standard deviation for every arm".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Standard errors of the three mean differences: `(se_EP, se_ER, se_RP)`,
    /// i.e. `sigma_XY * sqrt(1/n_X + 1/n_Y)` per comparison.
    pub fn comparison_ses(&self) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let inv = |n: usize| 1.0 / n as f64;
        let (ne, nr, np) = (self.arm_e.n, self.arm_r.n, self.arm_p.n);
        match self.variance_mode {
            VarianceMode::KnownSigma(sigma) => Ok((
                sigma * (inv(ne) + inv(np)).sqrt(),
                sigma * (inv(ne) + inv(nr)).sqrt(),
                sigma * (inv(nr) + inv(np)).sqrt(),
            )),
            VarianceMode::PooledPerComparison => {
                let (sd_e, sd_r, sd_p) = (
                    self.arm_e.sd.expect("validated"),
                    self.arm_r.sd.expect("validated"),
                    self.arm_p.sd.expect("validated"),
                );
                let s_ep = pooled_sd(sd_e, ne, sd_p, np)?;
                let s_er = pooled_sd(sd_e, ne, sd_r, nr)?;
                let s_rp = pooled_sd(sd_r, nr, sd_p, np)?;
                Ok((
                    s_ep * (inv(ne) + inv(np)).sqrt(),
                    s_er * (inv(ne) + inv(nr)).sqrt(),
                    s_rp * (inv(nr) + inv(np)).sqrt(),
                ))
            }
        }
    }
}

/// Margins, level, and the informative decay base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    /// One-sided familywise level, in (0, 0.5).
    pub alpha: f64,
    /// Non-inferiority margin (> 0).
    pub delta0: f64,
    /// Relevance (superiority) margin (> 0).
    pub delta1: f64,
    /// Optional margin fraction: `delta0 = r * mu_r_hist`.
    pub r: Option<f64>,
    /// Optional historical reference effect (> 0).
    pub mu_r_hist: Option<f64>,
    /// Decay base of the informative bounds, in (0, 1).
    pub q: f64,
}

impl DesignParams {
    /// Explicit margins.
    pub fn new(alpha: f64, delta0: f64, delta1: f64, q: f64) -> Result<Self> {
        let p = Self { alpha, delta0, delta1, r: None, mu_r_hist: None, q };
        p.validate()?;
        Ok(p)
    }

    /// Margins derived from the historical reference effect:
    /// `delta0 = r * mu_r_hist`, `delta1 = (1 - r) * mu_r_hist`.
    pub fn from_historical(alpha: f64, r: f64, mu_r_hist: f64, q: f64) -> Result<Self> {
        let p = Self {
            alpha,
            delta0: r * mu_r_hist,
            delta1: (1.0 - r) * mu_r_hist,
            r: Some(r),
            mu_r_hist: Some(mu_r_hist),
            q,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Validation(format!(
                "alpha must lie in (0, 0.5), got {}",
                self.alpha
            )));
        }
        if !(self.delta0 > 0.0) {
            return Err(Error::Validation(format!("delta0 must be positive, got {}", self.delta0)));
        }
        if !(self.delta1 > 0.0) {
            return Err(Error::Validation(format!("delta1 must be positive, got {}", self.delta1)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Validation(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Validation(format!("r must lie in (0, 1), got {r}")));
            }
            if let Some(mu) = self.mu_r_hist {
                if !(mu > 0.0) {
                    return Err(Error::Validation(format!("mu_r_hist must be positive, got {mu}")));
                }
                if (self.delta0 - r * mu).abs() > 1e-12
                    || (self.delta1 - (1.0 - r) * mu).abs() > 1e-12
                {
                    return Err(Error::Validation(
                        "margins are inconsistent with r and mu_r_hist".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn z_alpha(&self) -> f64 {
        std_normal_quantile(1.0 - self.alpha).expect("alpha validated")
    }
}

/// The simultaneous confidence bound family (or the no-interval baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SciMethod {
    /// Stepwise bounds with the intrinsic intersection-union filter.
    Iu,
    /// Informative stepwise bounds (level decays with the bound).
    Informative,
    /// Single-step equicoordinate bounds.
    SingleStep,
    /// Hierarchical testing without simultaneous intervals.
    BaselineNoSci,
}

impl SciMethod {
    pub const ALL: [SciMethod; 4] =
        [SciMethod::BaselineNoSci, SciMethod::Iu, SciMethod::Informative, SciMethod::SingleStep];

    /// The filter paired with the method for interpreting results.
    pub fn filter_kind(self) -> FilterKind {
        match self {
            SciMethod::Iu => FilterKind::IuFilter,
            _ => FilterKind::SuperiorityFilter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SciMethod::Iu => "iu",
            SciMethod::Informative => "informative",
            SciMethod::SingleStep => "single-step",
            SciMethod::BaselineNoSci => "baseline",
        }
    }
}

/// Which reference-strength filter a result was interpreted with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterKind {
    IuFilter,
    SuperiorityFilter,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::IuFilter => "iu",
            FilterKind::SuperiorityFilter => "superiority",
        }
    }
}

/// Nominal one-sided levels spent on each reported bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelsSpent {
    pub ep: f64,
    pub er: f64,
}

/// Simultaneous lower confidence bounds with their interpretation context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SciResult {
    pub method: SciMethod,
    /// Unadjusted one-sided lower bound for `mu_E - mu_P`.
    pub ell_ep: f64,
    /// Unadjusted one-sided lower bound for `mu_E - mu_R`.
    pub ell_er: f64,
    /// Simultaneous lower bound for `mu_E - mu_P`.
    pub l_ep: f64,
    /// Simultaneous lower bound for `mu_E - mu_R`; may be `-inf`.
    pub l_er: f64,
    pub filter_used: FilterKind,
    pub filter_holds: bool,
    pub levels_spent: LevelsSpent,
    /// Set when the informative level decayed below the representable range
    /// and the bound was reported at the truncated bracket edge.
    pub level_underflow: bool,
}

/// Study verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// Non-inferiority to the (strong) reference established.
    SuccessEr,
    /// Relevant superiority over placebo established (weak reference).
    SuccessEp,
    Failure,
}

impl Verdict {
    pub fn is_success(self) -> bool {
        !matches!(self, Verdict::Failure)
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::SuccessEr => "success-er",
            Verdict::SuccessEp => "success-ep",
            Verdict::Failure => "failure",
        }
    }
}

/// Adjudicated outcome of a trial analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessOutcome {
    pub verdict: Verdict,
    pub filter_holds: bool,
    /// Whether the gatekeeper `H: mu_E - mu_P <= 0` was rejected.
    pub gatekeeper_rejected: bool,
}

/// Unadjusted lower confidence bounds `(ell_EP, ell_ER)` at one-sided level
/// `alpha` for `mu_E - mu_P` and `mu_E - mu_R`.
pub fn unadjusted_bounds(trial: &TrialData, params: &DesignParams) -> Result<(f64, f64)> {
    params.validate()?;
    let (se_ep, se_er, _) = trial.comparison_ses()?;
    let z = params.z_alpha();
    let ell_ep = trial.arm_e.mean - trial.arm_p.mean - z * se_ep;
    let ell_er = trial.arm_e.mean - trial.arm_r.mean - z * se_er;
    Ok((ell_ep, ell_er))
}

/// Intrinsic intersection-union filter: "R > P" holds iff
/// `X_R - X_P >= z_alpha (se_EP - se_ER) + delta0`, equivalently iff
/// `ell_EP >= ell_ER + delta0`.
pub fn iu_filter(trial: &TrialData, params: &DesignParams) -> Result<bool> {
    params.validate()?;
    let (se_ep, se_er, _) = trial.comparison_ses()?;
    let threshold = params.z_alpha() * (se_ep - se_er) + params.delta0;
    Ok(trial.arm_r.mean - trial.arm_p.mean >= threshold)
}

/// Superiority filter: "R > P" holds iff the R-vs-P test statistic reaches
/// `z_alpha`.
pub fn superiority_filter(trial: &TrialData, params: &DesignParams) -> Result<bool> {
    params.validate()?;
    let (_, _, se_rp) = trial.comparison_ses()?;
    Ok((trial.arm_r.mean - trial.arm_p.mean) / se_rp >= params.z_alpha())
}

/// Stepwise simultaneous bounds in their formal three-branch form.
///
/// With `L_min = min(ell_EP, ell_ER + delta0)`:
///
/// - `ell_EP < 0`: `(ell_EP, -inf)`;
/// - `ell_EP >= 0, ell_ER < -delta0`: `(0, ell_ER)`;
/// - otherwise: `(L_min, L_min - delta0)`.
pub fn sci_iu_formal(trial: &TrialData, params: &DesignParams) -> Result<SciResult> {
    let (ell_ep, ell_er) = unadjusted_bounds(trial, params)?;
    let filter_holds = iu_filter(trial, params)?;
    let d0 = params.delta0;
    let (l_ep, l_er) = if ell_ep < 0.0 {
        (ell_ep, f64::NEG_INFINITY)
    } else if ell_er < -d0 {
        (0.0, ell_er)
    } else {
        // L_min - delta0 is evaluated as min(ell_EP - delta0, ell_ER) so the
        // active unadjusted bound is carried through unchanged.
        (ell_ep.min(ell_er + d0), (ell_ep - d0).min(ell_er))
    };
    Ok(SciResult {
        method: SciMethod::Iu,
        ell_ep,
        ell_er,
        l_ep,
        l_er,
        filter_used: FilterKind::IuFilter,
        filter_holds,
        levels_spent: LevelsSpent { ep: params.alpha, er: params.alpha },
        level_underflow: false,
    })
}

/// Stepwise simultaneous bounds in their intuitive filter-first form:
/// after the gatekeeper, the filter decides which unadjusted bound is
/// reported, and the other bound is its shift by `delta0`.
///
/// Equals [`sci_iu_formal`] on every input.
pub fn sci_iu_intuitive(trial: &TrialData, params: &DesignParams) -> Result<SciResult> {
    let (ell_ep, ell_er) = unadjusted_bounds(trial, params)?;
    let filter_holds = iu_filter(trial, params)?;
    let d0 = params.delta0;
    let (l_ep, l_er) = if ell_ep < 0.0 {
        (ell_ep, f64::NEG_INFINITY)
    } else if filter_holds {
        (0.0f64.max(ell_er + d0), ell_er)
    } else {
        (ell_ep, ell_ep - d0)
    };
    Ok(SciResult {
        method: SciMethod::Iu,
        ell_ep,
        ell_er,
        l_ep,
        l_er,
        filter_used: FilterKind::IuFilter,
        filter_holds,
        levels_spent: LevelsSpent { ep: params.alpha, er: params.alpha },
        level_underflow: false,
    })
}

/// Informative simultaneous bounds.
///
/// In the doubly-rejected branch the E-vs-R bound solves
/// `1 - Phi((X_E - X_R - theta)/se_ER) = q^(theta + delta0) alpha`
/// (strictly monotone, unique root), and the E-vs-P bound is reported at the
/// complementary level `(1 - q^(L_ER + delta0)) alpha`.
pub fn sci_informative(trial: &TrialData, params: &DesignParams) -> Result<SciResult> {
    let (ell_ep, ell_er) = unadjusted_bounds(trial, params)?;
    let filter_holds = superiority_filter(trial, params)?;
    let (se_ep, se_er, _) = trial.comparison_ses()?;
    let d0 = params.delta0;
    let alpha = params.alpha;
    let q = params.q;

    let base = |l_ep: f64, l_er: f64, ep_level: f64, er_level: f64, underflow: bool| SciResult {
        method: SciMethod::Informative,
        ell_ep,
        ell_er,
        l_ep,
        l_er,
        filter_used: FilterKind::SuperiorityFilter,
        filter_holds,
        levels_spent: LevelsSpent { ep: ep_level, er: er_level },
        level_underflow: underflow,
    };

    if ell_ep < 0.0 {
        return Ok(base(ell_ep, f64::NEG_INFINITY, alpha, 0.0, false));
    }
    if ell_er < -d0 {
        return Ok(base(0.0, ell_er, alpha, alpha, false));
    }

    // Doubly rejected: solve for the decayed E-vs-R bound. The defining
    // function g is strictly increasing with g(-delta0) <= 0 and
    // g(ell_ER) > 0, so [-delta0, ell_ER] brackets the unique root. The
    // upper end is truncated where q^(theta + delta0) alpha would underflow.
    let diff_er = trial.arm_e.mean - trial.arm_r.mean;
    let ln_q = q.ln();
    let g =
        |theta: f64| std_normal_sf((diff_er - theta) / se_er) - alpha * (ln_q * (theta + d0)).exp();

    let underflow_cap = (1e-300f64 / alpha).ln() / ln_q - d0;
    let hi = ell_er.min(underflow_cap);
    let level_underflow = ell_er > underflow_cap;

    let l_er = if hi <= -d0 {
        -d0
    } else if level_underflow && g(hi) < 0.0 {
        // Root lies beyond the representable level range; report the edge.
        hi
    } else {
        let bracket = RootBracket::with_tolerance(-d0, hi, 1e-12)?;
        solve_monotone_root(g, &bracket)?
    };

    let er_level = alpha * (ln_q * (l_er + d0)).exp();
    let ep_level = (1.0 - (ln_q * (l_er + d0)).exp()) * alpha;
    let adjusted_ep = if ep_level <= 1e-300 {
        f64::NEG_INFINITY
    } else {
        // z at the remaining level, via the lower-tail quantile for accuracy.
        let z = -std_normal_quantile(ep_level)?;
        trial.arm_e.mean - trial.arm_p.mean - z * se_ep
    };
    let l_ep = adjusted_ep.max(0.0);
    Ok(base(l_ep, l_er, ep_level, er_level, level_underflow))
}

/// Single-step equicoordinate simultaneous bounds.
///
/// Both bounds use the equicoordinate quantile `d_alpha` of the bivariate
/// normal law of the two test statistics, whose correlation is
/// `sqrt(c_P c_R / ((1 + c_P)(1 + c_R)))` for `c_R = n_R/n_E`,
/// `c_P = n_P/n_E`.
pub fn sci_single_step(trial: &TrialData, params: &DesignParams) -> Result<SciResult> {
    let (ell_ep, ell_er) = unadjusted_bounds(trial, params)?;
    let filter_holds = superiority_filter(trial, params)?;
    let (se_ep, se_er, _) = trial.comparison_ses()?;
    let c_r = trial.arm_r.n as f64 / trial.arm_e.n as f64;
    let c_p = trial.arm_p.n as f64 / trial.arm_e.n as f64;
    let rho = (c_p * c_r / ((1.0 + c_p) * (1.0 + c_r))).sqrt();
    let d = equicoordinate_quantile(params.alpha, rho)?;
    let marginal_level = std_normal_sf(d);
    Ok(SciResult {
        method: SciMethod::SingleStep,
        ell_ep,
        ell_er,
        l_ep: trial.arm_e.mean - trial.arm_p.mean - d * se_ep,
        l_er: trial.arm_e.mean - trial.arm_r.mean - d * se_er,
        filter_used: FilterKind::SuperiorityFilter,
        filter_holds,
        levels_spent: LevelsSpent { ep: marginal_level, er: marginal_level },
        level_underflow: false,
    })
}

/// Hierarchical baseline without intervals: tests superiority of E over P,
/// then non-inferiority of E versus R, then delta1-superiority of E over P,
/// each at level alpha, with the superiority filter classifying the verdict.
pub fn baseline_hierarchical(trial: &TrialData, params: &DesignParams) -> Result<SuccessOutcome> {
    let (ell_ep, ell_er) = unadjusted_bounds(trial, params)?;
    let filter_holds = superiority_filter(trial, params)?;
    let gate = ell_ep >= 0.0;
    let ni_rejected = gate && ell_er >= -params.delta0;
    let sup_rejected = ni_rejected && ell_ep >= params.delta1;
    let verdict = if filter_holds && ni_rejected {
        Verdict::SuccessEr
    } else if !filter_holds && sup_rejected {
        Verdict::SuccessEp
    } else {
        Verdict::Failure
    };
    Ok(SuccessOutcome { verdict, filter_holds, gatekeeper_rejected: gate })
}

/// Success verdict for a simultaneous-bounds result: success-ER iff the
/// paired filter holds and `L_ER >= -delta0`; success-EP iff the filter
/// fails and `L_EP >= delta1`.
pub fn adjudicate_success(result: &SciResult, params: &DesignParams) -> Result<SuccessOutcome> {
    params.validate()?;
    if result.method.filter_kind() != result.filter_used {
        return Err(Error::Validation(format!(
            "method {} must be interpreted with the {} filter, got {}",
            result.method.name(),
            result.method.filter_kind().name(),
            result.filter_used.name()
        )));
    }
    let verdict = if result.filter_holds && result.l_er >= -params.delta0 {
        Verdict::SuccessEr
    } else if !result.filter_holds && result.l_ep >= params.delta1 {
        Verdict::SuccessEp
    } else {
        Verdict::Failure
    };
    Ok(SuccessOutcome {
        verdict,
        filter_holds: result.filter_holds,
        gatekeeper_rejected: result.ell_ep >= 0.0,
    })
}

/// Computes the simultaneous bounds of `method` for observed data.
/// `BaselineNoSci` is rejected here; it reports no intervals.
pub fn sci_bounds(trial: &TrialData, params: &DesignParams, method: SciMethod) -> Result<SciResult> {
    match method {
        SciMethod::Iu => sci_iu_formal(trial, params),
        SciMethod::Informative => sci_informative(trial, params),
        SciMethod::SingleStep => sci_single_step(trial, params),
        SciMethod::BaselineNoSci => Err(Error::UnsupportedMode(
            "the baseline procedure reports no simultaneous bounds".into(),
        )),
    }
}

/// Full per-method analysis of observed data: bounds (if any) plus verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: SciMethod,
    pub ell_ep: f64,
    pub ell_er: f64,
    pub sci: Option<SciResult>,
    pub outcome: SuccessOutcome,
}

/// Analyzes observed data with one method.
pub fn analyze(trial: &TrialData, params: &DesignParams, method: SciMethod) -> Result<MethodReport> {
    let (ell_ep, ell_er) = unadjusted_bounds(trial, params)?;
    match method {
        SciMethod::BaselineNoSci => {
            let outcome = baseline_hierarchical(trial, params)?;
            Ok(MethodReport { method, ell_ep, ell_er, sci: None, outcome })
        }
        _ => {
            let sci = sci_bounds(trial, params, method)?;
            let outcome = adjudicate_success(&sci, params)?;
            Ok(MethodReport { method, ell_ep, ell_er, sci: Some(sci), outcome })
        }
    }
}
