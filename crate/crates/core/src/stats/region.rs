//! Probabilities of axis-aligned boxes under low-dimensional Gaussian laws,
//! including the rank-deficient covariances produced by difference statistics
//! of independent arm means, plus the bivariate equicoordinate quantile.

use crate::error::{Error, Result};
use crate::stats::bivariate::bvnd_upper;
use crate::stats::normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use crate::stats::root::{solve_monotone_root, RootBracket};

/// Integration range, in standard deviations, beyond which normal mass is
/// treated as zero (consistent with the CDF saturation threshold).
const RANGE_SD: f64 = 8.5;

/// Internal absolute tolerance of the outer quadratures. The documented
/// accuracy of [`gaussian_region_prob`] is 1e-5; the extra margin absorbs
/// kink handling and the inner CDF error.
const QUAD_TOL: f64 = 1e-8;

/// An axis-aligned box under a (possibly singular) Gaussian distribution in
/// dimension 1 to 3.
///
/// Bounds may be infinite. The covariance must be symmetric and positive
/// semi-definite up to a tolerance of `-1e-10` (relative to its largest
/// eigenvalue) on the smallest eigenvalue, with rank at least 1.
#[derive(Debug, Clone)]
pub struct GaussianRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl GaussianRegion {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let region = Self { lower, upper, mean, covariance };
        region.validate()?;
        Ok(region)
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        if d == 0 || d > 3 {
            return Err(Error::Validation(format!(
                "Gaussian region dimension must be 1..=3, got {d}"
            )));
        }
        if self.lower.len() != d || self.upper.len() != d || self.covariance.len() != d {
            return Err(Error::Validation(
                "Gaussian region fields must all have the same dimension".into(),
            ));
        }
        for row in &self.covariance {
            if row.len() != d {
                return Err(Error::Validation("covariance matrix must be square".into()));
            }
        }
        for i in 0..d {
            if self.lower[i] > self.upper[i] {
                return Err(Error::Validation(format!(
                    "lower bound exceeds upper bound in coordinate {i}"
                )));
            }
            if self.mean[i].is_nan() {
                return Err(Error::Validation("mean must be finite".into()));
            }
        }
        let scale = matrix_scale(&self.covariance);
        for i in 0..d {
            for j in (i + 1)..d {
                if (self.covariance[i][j] - self.covariance[j][i]).abs() > 1e-8 * scale.max(1e-300)
                {
                    return Err(Error::Validation("covariance matrix must be symmetric".into()));
                }
            }
        }
        let (vals, _) = jacobi_eigen(&self.covariance);
        let max_val = vals.iter().cloned().fold(0.0f64, f64::max);
        for &v in vals.iter().take(d) {
            if v < -1e-10 * max_val.max(1.0) {
                return Err(Error::Validation(format!(
                    "covariance is not positive semi-definite (eigenvalue {v:e})"
                )));
            }
        }
        if max_val <= 0.0 {
            return Err(Error::Validation("covariance must have rank >= 1".into()));
        }
        Ok(())
    }
}

/// Probability of the axis-aligned box under the region's Gaussian law.
///
/// Dimension 1 and full-rank dimension 2 are closed-form (univariate /
/// bivariate CDF). Full-rank dimension 3 conditions on the first coordinate
/// and integrates the conditional bivariate box. Rank-deficient covariances
/// are factored as `x = mean + A u` with `u` standard normal of the
/// effective rank; for rank 2 this yields a 1-D outer quadrature with
/// closed-form conditional normal inner terms. Absolute error <= 1e-5.
pub fn gaussian_region_prob(region: &GaussianRegion) -> Result<f64> {
    region.validate()?;
    let d = region.dimension();
    let (vals, vecs) = jacobi_eigen(&region.covariance);
    let max_val = vals.iter().cloned().fold(0.0f64, f64::max);
    let rank_tol = 1e-12 * max_val;
    let rank = (0..d).filter(|&i| vals[i] > rank_tol).count();

    let p = match (d, rank) {
        (1, _) => prob_dim1(region),
        (2, 2) => prob_dim2_full(region),
        (3, 3) => prob_dim3_full(region)?,
        _ => prob_factored(region, &vals, &vecs, rank),
    };
    Ok(p.clamp(0.0, 1.0))
}

fn prob_dim1(region: &GaussianRegion) -> f64 {
    let s = region.covariance[0][0].max(0.0).sqrt();
    let m = region.mean[0];
    if s == 0.0 {
        return indicator(region.lower[0] <= m && m <= region.upper[0]);
    }
    std_normal_cdf((region.upper[0] - m) / s) - std_normal_cdf((region.lower[0] - m) / s)
}

/// Full-rank bivariate box by inclusion-exclusion over the bivariate CDF.
fn prob_dim2_full(region: &GaussianRegion) -> f64 {
    let s1 = region.covariance[0][0].sqrt();
    let s2 = region.covariance[1][1].sqrt();
    let rho = (region.covariance[0][1] / (s1 * s2)).clamp(-1.0, 1.0);
    let z = |x: f64, m: f64, s: f64| {
        if x == f64::INFINITY || x == f64::NEG_INFINITY {
            x
        } else {
            (x - m) / s
        }
    };
    let l1 = z(region.lower[0], region.mean[0], s1);
    let u1 = z(region.upper[0], region.mean[0], s1);
    let l2 = z(region.lower[1], region.mean[1], s2);
    let u2 = z(region.upper[1], region.mean[1], s2);
    let phi2 = |a: f64, b: f64| bvnd_upper(-a, -b, rho);
    phi2(u1, u2) - phi2(l1, u2) - phi2(u1, l2) + phi2(l1, l2)
}

/// Full-rank trivariate box: outer quadrature over the first coordinate,
/// inner conditional bivariate box in closed form.
fn prob_dim3_full(region: &GaussianRegion) -> Result<f64> {
    let c = &region.covariance;
    let m = &region.mean;
    let s1 = c[0][0].sqrt();
    let k2 = c[0][1] / c[0][0];
    let k3 = c[0][2] / c[0][0];
    // Conditional covariance of (x2, x3) given x1.
    let v22 = c[1][1] - c[0][1] * c[0][1] / c[0][0];
    let v33 = c[2][2] - c[0][2] * c[0][2] / c[0][0];
    let v23 = c[1][2] - c[0][1] * c[0][2] / c[0][0];
    let s2 = v22.max(0.0).sqrt();
    let s3 = v33.max(0.0).sqrt();
    if s2 == 0.0 || s3 == 0.0 {
        return Err(Error::Numerical(
            "conditional variance vanished in full-rank trivariate path".into(),
        ));
    }
    let rho = (v23 / (s2 * s3)).clamp(-1.0, 1.0);

    let a = region.lower[0].max(m[0] - RANGE_SD * s1);
    let b = region.upper[0].min(m[0] + RANGE_SD * s1);
    if a >= b {
        return Ok(0.0);
    }
    let stdz = |x: f64, mm: f64, ss: f64| {
        if x.is_infinite() {
            x
        } else {
            (x - mm) / ss
        }
    };
    let f = |x: f64| {
        let m2 = m[1] + k2 * (x - m[0]);
        let m3 = m[2] + k3 * (x - m[0]);
        let l2 = stdz(region.lower[1], m2, s2);
        let u2 = stdz(region.upper[1], m2, s2);
        let l3 = stdz(region.lower[2], m3, s3);
        let u3 = stdz(region.upper[2], m3, s3);
        let phi2 = |p: f64, q: f64| bvnd_upper(-p, -q, rho);
        let inner = phi2(u2, u3) - phi2(l2, u3) - phi2(u2, l3) + phi2(l2, l3);
        std_normal_pdf((x - m[0]) / s1) / s1 * inner.max(0.0)
    };
    // Split where a conditional bound's standardized argument saturates, so
    // no transition of the inner box can hide between sample points.
    let mut cuts: Vec<f64> = Vec::new();
    for (i, (k, s)) in [(1usize, (k2, s2)), (2, (k3, s3))] {
        if k.abs() < 1e-14 {
            continue;
        }
        for c in [region.lower[i], region.upper[i]] {
            if c.is_finite() {
                for sign in [-1.0, 1.0] {
                    cuts.push(m[0] + (c - m[i] + sign * RANGE_SD * s) / k);
                }
            }
        }
    }
    Ok(integrate_piecewise(&f, a, b, cuts, s1, QUAD_TOL))
}

/// Rank-deficient path: factor `cov = A A'` with `A` of full column rank and
/// reduce the box to constraints on the standard normal factor variables.
fn prob_factored(
    region: &GaussianRegion,
    vals: &[f64; 3],
    vecs: &[[f64; 3]; 3],
    rank: usize,
) -> f64 {
    let d = region.dimension();
    // Column j of `a` is sqrt(lambda_j) * eigenvector_j, for the `rank`
    // largest eigenvalues (jacobi_eigen returns them sorted descending).
    let mut a = [[0.0f64; 2]; 3];
    for j in 0..rank.min(2) {
        for i in 0..d {
            a[i][j] = vals[j].max(0.0).sqrt() * vecs[i][j];
        }
    }
    if rank == 0 {
        let inside = (0..d).all(|i| region.lower[i] <= region.mean[i] && region.mean[i] <= region.upper[i]);
        return indicator(inside);
    }

    // Accumulate constraints: either on u alone, or as v-lines given u.
    let mut u_lo = -RANGE_SD;
    let mut u_hi = RANGE_SD;
    // Lines v >= alpha + beta u and v <= alpha + beta u.
    let mut v_lowers: Vec<(f64, f64)> = Vec::new();
    let mut v_uppers: Vec<(f64, f64)> = Vec::new();

    for i in 0..d {
        let (lo, hi) = (region.lower[i], region.upper[i]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            continue;
        }
        let (ai, bi) = (a[i][0], a[i][1]);
        let row_scale = ai.abs().max(bi.abs()).max(1e-300);
        let mi = region.mean[i];
        if bi.abs() <= 1e-12 * row_scale {
            if ai.abs() <= 1e-12 * row_scale.max(1.0) {
                // Deterministic coordinate.
                if !(lo <= mi && mi <= hi) {
                    return 0.0;
                }
                continue;
            }
            // Constraint on u alone: lo <= mi + ai*u <= hi.
            let (mut c_lo, mut c_hi) = (
                if lo.is_infinite() { -f64::INFINITY } else { (lo - mi) / ai },
                if hi.is_infinite() { f64::INFINITY } else { (hi - mi) / ai },
            );
            if ai < 0.0 {
                std::mem::swap(&mut c_lo, &mut c_hi);
            }
            u_lo = u_lo.max(c_lo);
            u_hi = u_hi.min(c_hi);
        } else {
            // Conditional on u, constraint on v: lo <= mi + ai*u + bi*v <= hi.
            let lower_line = ((lo - mi) / bi, -ai / bi);
            let upper_line = ((hi - mi) / bi, -ai / bi);
            if bi > 0.0 {
                if lo.is_finite() {
                    v_lowers.push(lower_line);
                }
                if hi.is_finite() {
                    v_uppers.push(upper_line);
                }
            } else {
                if lo.is_finite() {
                    v_uppers.push(lower_line);
                }
                if hi.is_finite() {
                    v_lowers.push(upper_line);
                }
            }
        }
    }

    if u_lo >= u_hi {
        return 0.0;
    }

    if rank == 1 || (v_lowers.is_empty() && v_uppers.is_empty()) {
        return (std_normal_cdf(u_hi) - std_normal_cdf(u_lo)).max(0.0);
    }

    // Split the u-range at crossings of the active linear v-bounds and at
    // the points where each bound's argument saturates, so the integrand is
    // smooth within a piece and no transition hides between sample points.
    let mut cuts: Vec<f64> = Vec::new();
    {
        let mut push_crossing = |l1: (f64, f64), l2: (f64, f64)| {
            let denom = l2.1 - l1.1;
            if denom.abs() > 1e-14 {
                cuts.push((l1.0 - l2.0) / denom);
            }
        };
        for i in 0..v_lowers.len() {
            for j in (i + 1)..v_lowers.len() {
                push_crossing(v_lowers[i], v_lowers[j]);
            }
            for &up in &v_uppers {
                push_crossing(v_lowers[i], up);
            }
        }
        for i in 0..v_uppers.len() {
            for j in (i + 1)..v_uppers.len() {
                push_crossing(v_uppers[i], v_uppers[j]);
            }
        }
    }
    for &(al, be) in v_lowers.iter().chain(v_uppers.iter()) {
        if be.abs() > 1e-14 {
            cuts.push((-RANGE_SD - al) / be);
            cuts.push((RANGE_SD - al) / be);
        }
    }

    let f = |u: f64| {
        let mut vh = f64::INFINITY;
        for &(al, be) in &v_uppers {
            vh = vh.min(al + be * u);
        }
        let mut vl = f64::NEG_INFINITY;
        for &(al, be) in &v_lowers {
            vl = vl.max(al + be * u);
        }
        if vl >= vh {
            return 0.0;
        }
        std_normal_pdf(u) * (std_normal_cdf(vh) - std_normal_cdf(vl))
    };
    integrate_piecewise(&f, u_lo, u_hi, cuts, 1.0, QUAD_TOL)
}

/// Adaptive quadrature over `[a, b]` after splitting at the given cut points
/// and into panels no wider than `scale` units, so localized features are
/// always sampled.
fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    mut cuts: Vec<f64>,
    scale: f64,
    tol: f64,
) -> f64 {
    cuts.retain(|x| x.is_finite() && *x > a && *x < b);
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-13 * scale.max(1.0));
    let max_panel = scale;
    let mut panels: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let k = ((hi - lo) / max_panel).ceil().max(1.0) as usize;
        let step = (hi - lo) / k as f64;
        for i in 0..k {
            panels.push((lo + step * i as f64, if i + 1 == k { hi } else { lo + step * (i + 1) as f64 }));
        }
    }
    let tol_each = tol / panels.len().max(1) as f64;
    panels
        .iter()
        .map(|&(lo, hi)| adaptive_simpson(f, lo, hi, tol_each))
        .sum()
}

/// Equicoordinate upper quantile: the value `d` with
/// `P(Z1 <= d, Z2 <= d) = 1 - alpha` under correlation `rho`.
///
/// Always at least the univariate quantile `Phi^{-1}(1 - alpha)`.
pub fn equicoordinate_quantile(alpha: f64, rho: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Validation(format!(
            "equicoordinate quantile requires alpha in (0, 0.5), got {alpha}"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Validation(format!(
            "equicoordinate quantile requires rho in [0, 1), got {rho}"
        )));
    }
    let z_single = std_normal_quantile(1.0 - alpha)?;
    // Bonferroni upper end: P(both <= d) >= 1 - 2(1 - Phi(d)).
    let z_bonf = std_normal_quantile(1.0 - alpha / 2.0)?;
    let target = 1.0 - alpha;
    let f = |d: f64| bvnd_upper(-d, -d, rho) - target;
    let bracket = RootBracket::with_tolerance(z_single - 1e-7, z_bonf + 1e-7, 1e-9)?;
    let d = solve_monotone_root(f, &bracket)?;
    Ok(d.max(z_single))
}

#[inline]
fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn matrix_scale(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Cyclic Jacobi eigendecomposition for symmetric matrices up to 3x3.
/// Returns eigenvalues (descending) and matching eigenvector columns.
fn jacobi_eigen(cov: &[Vec<f64>]) -> ([f64; 3], [[f64; 3]; 3]) {
    let n = cov.len();
    let mut a = [[0.0f64; 3]; 3];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = 0.5 * (cov[i][j] + cov[j][i]);
        }
    }
    let mut v = [[0.0f64; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = a.iter().flatten().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if scale == 0.0 {
        return ([0.0; 3], v);
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off <= (1e-30 * scale * scale).max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut vals = [0.0f64; 3];
    for i in 0..n {
        vals[i] = a[i][i];
    }
    // Sort eigenpairs by descending eigenvalue.
    let mut order = [0usize, 1, 2];
    order[..n].sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let mut sorted_vals = [0.0f64; 3];
    let mut sorted_vecs = [[0.0f64; 3]; 3];
    for (new_j, &old_j) in order[..n].iter().enumerate() {
        sorted_vals[new_j] = vals[old_j];
        for i in 0..n {
            sorted_vecs[i][new_j] = v[i][old_j];
        }
    }
    (sorted_vals, sorted_vecs)
}

/// Adaptive Simpson quadrature with absolute tolerance.
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, fa, b, fb, m, fm, whole, tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}
