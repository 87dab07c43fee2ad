//! Bivariate standard normal probabilities.
//!
//! Scalar port of Alan Genz' `bvnd` Fortran routine (tvpack), which follows
//! Drezner & Wesolowsky's method with fixed-order Gauss-Legendre quadrature
//! over the correlation parameter and a specialized expansion for |rho| close
//! to one. The negative-rho branch below uses the corrected reduction
//! `P(X > h, Y > k; rho) = Phi(-k) - P(X > -h, Y > k; -rho)` rather than the
//! original sign flip of both arguments.
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::stats::normal::std_normal_sf;

const FRAC_1_2_PI: f64 = 0.159154943091895335768883763373; // 1 / (2 pi)
const SQRT_2_PI: f64 = 2.506628274631000502415765284811;

// Gauss-Legendre points and weights (w, x), N = 6.
const QUAD_6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];

// Gauss-Legendre points and weights, N = 12.
const QUAD_12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];

// Gauss-Legendre points and weights, N = 20.
const QUAD_20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

fn select_quadrature(rho_abs: f64) -> &'static [(f64, f64)] {
    if rho_abs < 0.3 {
        &QUAD_6[..]
    } else if rho_abs < 0.75 {
        &QUAD_12[..]
    } else {
        &QUAD_20[..]
    }
}

/// Upper-orthant probability `P(X > dh, Y > dk)` for standard normals with
/// correlation `rho`. Infinite arguments degenerate to the univariate CDF.
pub(crate) fn bvnd_upper(dh: f64, dk: f64, rho: f64) -> f64 {
    if dh == f64::INFINITY || dk == f64::INFINITY {
        return 0.0;
    }
    if dh == f64::NEG_INFINITY {
        return std_normal_sf(dk);
    }
    if dk == f64::NEG_INFINITY {
        return std_normal_sf(dh);
    }
    if rho == 0.0 {
        return std_normal_sf(dh) * std_normal_sf(dk);
    }
    if rho == 1.0 {
        return std_normal_sf(dh.max(dk));
    }
    if rho == -1.0 {
        return (std_normal_sf(dh) + std_normal_sf(dk) - 1.0).max(0.0);
    }

    let quad = select_quadrature(rho.abs());
    let mut bvn = 0.0;

    if rho.abs() <= 0.925 {
        let h = dh;
        let k = dk;
        let hk = h * k;
        let hs = (h * h + k * k) / 2.0;
        let asr = 0.5 * libm::asin(rho);
        for &(w, x) in quad {
            for is in [-1.0, 1.0] {
                let sn = libm::sin(asr * (is * x + 1.0));
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn *= asr * FRAC_1_2_PI;
        bvn + std_normal_sf(h) * std_normal_sf(k)
    } else {
        // |rho| > 0.925: expansion about rho = +-1 plus quadrature remainder.
        // For rho < 0 reduce to a positive-correlation evaluation of (-dh, dk).
        let (h, k) = if rho > 0.0 { (dh, dk) } else { (-dh, dk) };
        let hk = h * k;
        let a_s = (1.0 - rho) * (1.0 + rho);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -0.5 * (b_s / a_s + hk);
        if asr > -100.0 {
            bvn = a
                * asr.exp()
                * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0
                    + c * d * (a_s * a_s) / 5.0);
        }
        if -hk < 100.0 {
            let b = b_s.sqrt();
            bvn -= (-0.5 * hk).exp()
                * SQRT_2_PI
                * std_normal_sf(b / a)
                * b
                * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in quad {
            for is in [-1.0, 1.0] {
                let xq = a * (is * x + 1.0);
                let x_s = xq * xq;
                let asr = -0.5 * (b_s / x_s + hk);
                if asr > -100.0 {
                    let r_s = (1.0 - x_s).sqrt();
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - r_s) / (2.0 * (1.0 + r_s))).exp() / r_s
                            - (1.0 + c * x_s * (1.0 + d * x_s)));
                }
            }
        }
        bvn *= -FRAC_1_2_PI;
        if rho > 0.0 {
            bvn + std_normal_sf(h.max(k))
        } else if k >= h {
            -bvn
        } else {
            std_normal_sf(dh) + std_normal_sf(dk) - 1.0 - bvn
        }
    }
}

/// Bivariate standard normal CDF `P(Z1 <= h, Z2 <= k)` with correlation
/// `rho`. Absolute error is below 1e-7 over the whole correlation range.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::Validation(format!(
            "bivariate correlation must lie in [-1, 1], got {rho}"
        )));
    }
    Ok(bvnd_upper(-h, -k, rho).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::normal::std_normal_cdf;

    fn closed_form_at_origin(rho: f64) -> f64 {
        0.25 + libm::asin(rho) / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn origin_closed_form_identity() {
        let mut rho = -0.99;
        while rho < 1.0 {
            let p = bivariate_normal_cdf(0.0, 0.0, rho).unwrap();
            assert!(
                (p - closed_form_at_origin(rho)).abs() < 1e-7,
                "rho = {rho}: {p} vs {}",
                closed_form_at_origin(rho)
            );
            rho += 0.01;
        }
    }

    #[test]
    fn independence_at_origin() {
        assert!((bivariate_normal_cdf(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((bivariate_normal_cdf(0.0, 0.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn perfect_correlation_degenerates() {
        for &(h, k) in &[(0.3, -1.2), (-2.0, 0.7), (1.5, 1.4), (0.0, 0.0)] {
            let p = bivariate_normal_cdf(h, k, 1.0).unwrap();
            assert!((p - std_normal_cdf(h.min(k))).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_consistency() {
        // P(Z1 <= h, Z2 <= inf) = Phi(h) for any rho.
        for &rho in &[-0.97, -0.5, 0.0, 0.31, 0.93] {
            for &h in &[-2.5, -0.3, 0.0, 1.7] {
                let p = bivariate_normal_cdf(h, f64::INFINITY, rho).unwrap();
                assert!((p - std_normal_cdf(h)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetry_and_complement_identities() {
        // P(X<=h, Y<=k; rho) = P(X<=k, Y<=h; rho), and
        // P(X>h) = P(X>h, Y>k; rho) + P(X>h, Y<=k) with corr(X, -Y) = -rho.
        let pts = [
            (0.4, -0.8, 0.6),
            (-1.3, 0.9, -0.6),
            (2.1, 1.9, 0.95),
            (-2.1, -0.4, -0.97),
            (0.05, 0.0, 0.3),
        ];
        for &(h, k, rho) in &pts {
            let a = bivariate_normal_cdf(h, k, rho).unwrap();
            let b = bivariate_normal_cdf(k, h, rho).unwrap();
            assert!((a - b).abs() < 1e-13, "symmetry at {h},{k},{rho}");
            let lhs = bvnd_upper(h, k, rho) + bvnd_upper(h, -k, -rho);
            assert!(
                (lhs - std_normal_sf(h)).abs() < 1e-13,
                "complement at {h},{k},{rho}: {lhs}"
            );
        }
    }

    #[test]
    fn rejects_out_of_range_correlation() {
        assert!(bivariate_normal_cdf(0.0, 0.0, 1.2).is_err());
        assert!(bivariate_normal_cdf(0.0, 0.0, -1.0001).is_err());
    }
}
