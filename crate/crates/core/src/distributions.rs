//! Stable-law constants and the normalized Mittag-Leffler law.
//!
//! The Mittag-Leffler law of order `alpha` used here is the law of
//! `Gamma(1 + alpha) * X^(-alpha)` where `X` is a standard one-sided stable
//! variable with Laplace transform `exp(-s^alpha)`. With that scaling the
//! mean is exactly one, and the `p`-th moment is
//! `p! Gamma(1 + alpha)^p / Gamma(1 + p alpha)`.

use std::f64::consts::PI;

use rand::Rng;

use crate::numeric::{adaptive_simpson, gamma, ln_gamma};
use crate::{Error, Result};

/// Symmetric stable law `Z_d` under the standardization used throughout the crate.
///
/// For `d = 2` the law is the unit-variance normal; for `d < 2` it is the
/// symmetric law with characteristic function `exp(-|u|^d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableLawSpec {
    pub d: f64,
    pub g0: f64,
}

impl StableLawSpec {
    pub fn new(d: f64) -> Result<Self> {
        Ok(Self {
            d,
            g0: stable_density_at_zero(d)?,
        })
    }

    pub fn is_normal(&self) -> bool {
        self.d == 2.0
    }
}

/// Density at zero of the standardized symmetric stable law of index `d`.
///
/// `d = 2` uses the unit-variance normal, giving `1/sqrt(2 pi)`. Otherwise
/// the inversion integral `(1/pi) * int_0^inf exp(-u^d) du` has the closed
/// form `Gamma(1 + 1/d) / pi`.
pub fn stable_density_at_zero(d: f64) -> Result<f64> {
    if !(d > 0.0 && d <= 2.0) {
        return Err(Error::Domain(format!(
            "stability index must lie in (0, 2], got {d}"
        )));
    }
    if d == 2.0 {
        return Ok(1.0 / (2.0 * PI).sqrt());
    }
    Ok(gamma(1.0 + 1.0 / d) / PI)
}

/// Normalized (mean one) Mittag-Leffler law of order `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MittagLeffler {
    alpha: f64,
    gamma_1p_alpha: f64,
}

impl MittagLeffler {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "Mittag-Leffler order must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            gamma_1p_alpha: gamma(1.0 + alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `p! Gamma(1+alpha)^p / Gamma(1+p alpha)`, evaluated in log space.
    pub fn moment(&self, p: u32) -> f64 {
        if p == 0 {
            return 1.0;
        }
        let p = p as f64;
        let ln = ln_gamma(p + 1.0) + p * self.gamma_1p_alpha.ln() - ln_gamma(1.0 + p * self.alpha);
        ln.exp()
    }

    /// Distribution function, accurate to well below `1e-6` on `[0, 10]`.
    ///
    /// Uses Kanter's integral for the one-sided stable law:
    /// `P(X <= x) = (1/pi) int_0^pi exp(-A(phi) x^(-alpha/(1-alpha))) dphi`,
    /// so `P(Y <= y) = (1/pi) int_0^pi (1 - exp(-A(phi) s)) dphi` with
    /// `s = (y / Gamma(1+alpha))^(1/(1-alpha))`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= 0.0 {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        let s = (x / self.gamma_1p_alpha).powf(1.0 / (1.0 - self.alpha));
        // Minimum of A over [0, pi]; beyond this the integrand is 1 to f64 precision.
        if s * kanter_a(self.alpha, 0.0) > 745.0 {
            return 1.0;
        }
        let alpha = self.alpha;
        let f = |phi: f64| -(-kanter_a(alpha, phi) * s).exp_m1();
        let v = adaptive_simpson(&f, 0.0, PI, 1e-11) / PI;
        v.clamp(0.0, 1.0)
    }

    /// Draws `Gamma(1+alpha) * X^(-alpha)` with `X` from Kanter's representation
    /// `X = (A(pi U) / E)^((1-alpha)/alpha)`, which simplifies to
    /// `Gamma(1+alpha) * (E / A(pi U))^(1-alpha)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_unit(rng);
        let e = -(1.0 - rng.random::<f64>()).ln();
        let a = kanter_a(self.alpha, PI * u);
        self.gamma_1p_alpha * (e / a).powf(1.0 - self.alpha)
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Kanter's function
/// `A(phi) = sin(alpha phi)^(alpha/(1-alpha)) sin((1-alpha) phi) / sin(phi)^(1/(1-alpha))`.
fn kanter_a(alpha: f64, phi: f64) -> f64 {
    let r = 1.0 / (1.0 - alpha);
    if phi <= 1e-8 {
        return alpha.powf(alpha * r) * (1.0 - alpha);
    }
    let s = phi.sin();
    if s <= 0.0 {
        return f64::INFINITY;
    }
    (alpha * phi).sin().powf(alpha * r) * ((1.0 - alpha) * phi).sin() / s.powf(r)
}

/// Law-of-iterated-logarithm constant `Gamma(1+alpha) / (alpha^alpha (1-alpha)^(1-alpha))`.
pub fn lil_constant(alpha: f64) -> f64 {
    gamma(1.0 + alpha) / (alpha.powf(alpha) * (1.0 - alpha).powf(1.0 - alpha))
}

/// Threshold prefactor `Gamma(1+alpha) / alpha^alpha` of the deviation bound.
pub fn deviation_prefactor(alpha: f64) -> f64 {
    gamma(1.0 + alpha) / alpha.powf(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::erf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Independent oracle: (1/pi) int_0^inf exp(-u^d) du by quadrature.
    fn density_at_zero_by_quadrature(d: f64) -> f64 {
        let f = |u: f64| (-u.powf(d)).exp();
        adaptive_simpson(&f, 0.0, 60.0, 1e-13) / PI
    }

    #[test]
    fn density_at_zero_values() {
        let g2 = stable_density_at_zero(2.0).unwrap();
        assert!((g2 * (2.0 * PI).sqrt() - 1.0).abs() < 1e-15);
        let g1 = stable_density_at_zero(1.0).unwrap();
        assert!((g1 - 1.0 / PI).abs() < 1e-12);
        assert!((g1 - density_at_zero_by_quadrature(1.0)).abs() < 1e-9);
        let g15 = stable_density_at_zero(1.5).unwrap();
        assert!((g15 - density_at_zero_by_quadrature(1.5)).abs() < 1e-9);
    }

    #[test]
    fn density_at_zero_domain() {
        assert!(stable_density_at_zero(0.0).is_err());
        assert!(stable_density_at_zero(2.5).is_err());
        assert!(stable_density_at_zero(f64::NAN).is_err());
    }

    #[test]
    fn moments() {
        let ml = MittagLeffler::new(0.5).unwrap();
        assert_eq!(ml.moment(0), 1.0);
        assert!((ml.moment(1) - 1.0).abs() < 1e-14);
        // 2 Gamma(3/2)^2 / Gamma(2) = pi / 2
        assert!((ml.moment(2) - PI / 2.0).abs() < 1e-13);
        for &a in &[0.1, 0.3, 0.7, 0.95] {
            let ml = MittagLeffler::new(a).unwrap();
            assert!((ml.moment(1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn order_domain() {
        assert!(MittagLeffler::new(0.0).is_err());
        assert!(MittagLeffler::new(1.0).is_err());
    }

    #[test]
    fn cdf_half_matches_erf_closed_form() {
        let ml = MittagLeffler::new(0.5).unwrap();
        assert_eq!(ml.cdf(0.0), 0.0);
        assert_eq!(ml.cdf(-3.0), 0.0);
        assert!((ml.cdf(PI.sqrt()) - 0.842_700_792_949_715).abs() < 1e-6);
        for i in 1..=50 {
            let x = i as f64 * 0.1;
            let want = erf(x / PI.sqrt());
            assert!((ml.cdf(x) - want).abs() < 1e-6, "x = {x}");
        }
        assert!(1.0 - ml.cdf(10.0) < 1e-6);
    }

    #[test]
    fn cdf_monotone() {
        for &a in &[0.2, 0.5, 0.8] {
            let ml = MittagLeffler::new(a).unwrap();
            let mut prev = 0.0;
            for i in 0..=200 {
                let v = ml.cdf(i as f64 * 0.05);
                assert!(v + 1e-12 >= prev && (0.0..=1.0).contains(&v));
                prev = v;
            }
        }
    }

    #[test]
    fn sampler_deterministic_and_positive() {
        let ml = MittagLeffler::new(0.3).unwrap();
        let a: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(7);
            (0..100).map(|_| ml.sample(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(7);
            (0..100).map(|_| ml.sample(&mut r)).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().all(|&y| y > 0.0 && y.is_finite()));
    }

    #[test]
    fn lil_constant_half() {
        assert!((lil_constant(0.5) - PI.sqrt()).abs() < 1e-12);
        assert!((deviation_prefactor(0.5) - (PI / 2.0).sqrt()).abs() < 1e-12);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ml_cdf_is_a_distribution_function(alpha in 0.05f64..0.95, x in 0.0f64..10.0, dx in 0.0f64..5.0) {
            let ml = MittagLeffler::new(alpha).unwrap();
            let (a, b) = (ml.cdf(x), ml.cdf(x + dx));
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(b >= a - 1e-9);
        }

        #[test]
        fn deviation_window_is_ordered(alpha in 0.01f64..0.99, t in 0.1f64..20.0, gamma in 1.0001f64..5.0) {
            let (lo, hi) = crate::limits::deviation_bounds(alpha, t, gamma);
            prop_assert!(0.0 < lo && lo < hi && hi < 1.0);
        }
    }
}
