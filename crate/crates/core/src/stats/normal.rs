//! Univariate standard normal CDF, survival function, quantile, and a pooled
//! standard deviation helper.

use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SQRT_2_PI: f64 = 2.506628274631000502415765284811;

/// Arguments beyond this magnitude saturate the CDF to exactly 0 or 1.
const CDF_SATURATION: f64 = 8.5;

/// Density of the standard normal distribution.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2_PI
}

/// Standard normal CDF `Phi(x)`.
///
/// Saturates to exactly 0.0 / 1.0 for `|x| > 8.5`; monotone nondecreasing.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    if x > CDF_SATURATION {
        return 1.0;
    }
    if x < -CDF_SATURATION {
        return 0.0;
    }
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Phi(x)`, computed without
/// cancellation in the upper tail.
#[inline]
pub fn std_normal_sf(x: f64) -> f64 {
    if x > CDF_SATURATION {
        return 0.0;
    }
    if x < -CDF_SATURATION {
        return 1.0;
    }
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal quantile `Phi^{-1}(p)`.
///
/// Rational approximation (Wichura's PPND16) followed by one Newton step
/// against [`std_normal_cdf`] so that the quantile and the CDF are mutually
/// consistent. Rejects `p` outside `(1e-300, 1 - 1e-16)`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 1e-300 && p < 1.0 - 1e-16) {
        return Err(Error::Validation(format!(
            "normal quantile requires p in (1e-300, 1 - 1e-16), got {p}"
        )));
    }
    let mut x = ppnd16(p);
    // Newton polish; skip deep in the tails where the CDF saturates.
    if x.abs() < CDF_SATURATION - 0.5 {
        let err = std_normal_cdf(x) - p;
        let d = std_normal_pdf(x);
        if d > 0.0 {
            x -= err / d;
        }
    }
    Ok(x)
}

/// Wichura's algorithm AS 241 (PPND16): double-precision rational
/// approximation to the standard normal quantile.
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
            + 6.7265770927008700853e4)
            * r
            + 4.5921953931549871457e4)
            * r
            + 1.3731693765509461125e4)
            * r
            + 1.9715909503065514427e3)
            * r
            + 1.3314166789178437745e2)
            * r
            + 3.3871328727963666080e0;
        let den = ((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
            + 3.9307895800092710610e4)
            * r
            + 2.1213794301586595867e4)
            * r
            + 5.3941960214247511077e3)
            * r
            + 6.8718700749205790830e2)
            * r
            + 4.2313330701600911252e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
            + 2.41780725177450611770e-1)
            * r
            + 1.27045825245236838258e0)
            * r
            + 3.64784832476320460504e0)
            * r
            + 5.76949722146069140550e0)
            * r
            + 4.63033784615654529590e0)
            * r
            + 1.42343711074968357734e0;
        let den = ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
            + 1.51986665636164571966e-2)
            * r
            + 1.48103976427480074590e-1)
            * r
            + 6.89767334985100004550e-1)
            * r
            + 1.67638483018380384940e0)
            * r
            + 2.05319162663775882187e0)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 1.24266094738807843860e-3)
            * r
            + 2.65321895265761230930e-2)
            * r
            + 2.96560571828504891230e-1)
            * r
            + 1.78482653991729133580e0)
            * r
            + 5.46378491116411436990e0)
            * r
            + 6.65790464350110377720e0;
        let den = ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
            + 1.84631831751005468180e-5)
            * r
            + 7.86869131145613259100e-4)
            * r
            + 1.48753612908506148525e-2)
            * r
            + 1.36929880922735805310e-1)
            * r
            + 5.99832206555887937690e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Pooled standard deviation of two groups:
/// `sqrt(((n_a-1) sd_a^2 + (n_b-1) sd_b^2) / (n_a + n_b - 2))`.
pub fn pooled_sd(sd_a: f64, n_a: usize, sd_b: f64, n_b: usize) -> Result<f64> {
    if !(sd_a > 0.0 && sd_b > 0.0) {
        return Err(Error::Validation(format!(
            "pooled_sd requires positive standard deviations, got {sd_a} and {sd_b}"
        )));
    }
    if n_a < 2 || n_b < 2 {
        return Err(Error::Validation(format!(
            "pooled_sd requires group sizes >= 2, got {n_a} and {n_b}"
        )));
    }
    let na = n_a as f64;
    let nb = n_b as f64;
    Ok((((na - 1.0) * sd_a * sd_a + (nb - 1.0) * sd_b * sd_b) / (na + nb - 2.0)).sqrt())
}
