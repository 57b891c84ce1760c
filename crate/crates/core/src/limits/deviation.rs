use serde::Serialize;

use super::Verdict;
use crate::distributions::deviation_prefactor;
use crate::localtime::{Normalizer, ScalingScheme};
use crate::numeric::{wilson_interval, Z95};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub n: u64,
    pub t: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// `Gamma(1+alpha)/alpha^alpha * t * a_{floor(n/t)}`.
    pub threshold: f64,
    pub exceedances: u64,
    pub paths: u64,
    pub empirical_prob: f64,
    pub interval: (f64, f64),
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `[2, (log log n)^2]`.
    pub regime: (f64, f64),
    pub verdict: Verdict,
}

/// `(exp(-gamma (1-alpha) t), exp(-(1-alpha) t / gamma))`.
pub fn deviation_bounds(alpha: f64, t: f64, gamma: f64) -> (f64, f64) {
    (
        (-gamma * (1.0 - alpha) * t).exp(),
        (-(1.0 - alpha) * t / gamma).exp(),
    )
}

/// Empirical `P(l_n >= threshold)` with a 95% Wilson interval; passes when
/// the interval meets `[lower_bound, upper_bound]`.
pub fn deviation_band(
    local_times: &[u64],
    n: u64,
    t: f64,
    gamma: f64,
    scheme: &ScalingScheme,
) -> Result<DeviationReport> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must exceed 1, got {gamma}"
        )));
    }
    if !(t > 0.0) || local_times.is_empty() || n < 3 {
        return Err(Error::InvalidArgument(
            "need t > 0, n >= 3 and at least one path".into(),
        ));
    }
    let alpha = scheme.alpha();
    let l2 = (n as f64).ln().ln();
    let regime = (2.0, l2 * l2);
    let index = ((n as f64 / t).floor() as u64).max(1);
    let norm = Normalizer::new(*scheme, index);
    let threshold = deviation_prefactor(alpha) * t * norm.a(index);
    let exceedances = local_times
        .iter()
        .filter(|&&l| l as f64 >= threshold)
        .count() as u64;
    let paths = local_times.len() as u64;
    let interval = wilson_interval(exceedances, paths, Z95);
    let (lower_bound, upper_bound) = deviation_bounds(alpha, t, gamma);
    let verdict = if t < regime.0 || t > regime.1 {
        Verdict::OutsideRegime
    } else {
        Verdict::from_bool(interval.1 >= lower_bound && interval.0 <= upper_bound)
    };
    Ok(DeviationReport {
        n,
        t,
        gamma,
        alpha,
        threshold,
        exceedances,
        paths,
        empirical_prob: exceedances as f64 / paths as f64,
        interval,
        lower_bound,
        upper_bound,
        regime,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_for_half() {
        let (lo, hi) = deviation_bounds(0.5, 4.0, 1.5);
        assert!((lo - (-3f64).exp()).abs() < 1e-15);
        assert!((lo - 0.049_787).abs() < 1e-6);
        assert!((hi - 0.263_597).abs() < 1e-6);
    }

    #[test]
    fn bounds_ordered_and_collapse_at_gamma_one() {
        for &a in &[0.1, 0.3, 0.5] {
            for &t in &[0.5, 2.0, 7.0] {
                for &g in &[1.0001, 1.5, 4.0] {
                    let (lo, hi) = deviation_bounds(a, t, g);
                    assert!(0.0 < lo && lo < hi && hi < 1.0);
                }
                let (lo, hi) = deviation_bounds(a, t, 1.0);
                assert_eq!(lo, hi);
            }
        }
    }

    #[test]
    fn threshold_value() {
        let s = ScalingScheme::lazy_walk();
        let r = deviation_band(&[0, 1000, 2000], 100_000, 4.0, 1.5, &s).unwrap();
        // a_n = pi^(-1/2) sum_{k<=n} k^(-1/2) ~ (2 sqrt(n) + zeta(1/2) + n^(-1/2)/2) / sqrt(pi);
        // the leading term alone gives the rougher 894.5.
        let zeta_half = -1.460_354_508_809_586_8;
        let n = 25_000f64;
        let a = (2.0 * n.sqrt() + zeta_half + 0.5 / n.sqrt()) / std::f64::consts::PI.sqrt();
        let want = (std::f64::consts::PI / 2.0).sqrt() * 4.0 * a;
        assert!(
            (r.threshold - want).abs() < 1e-6,
            "{} vs {want}",
            r.threshold
        );
        assert!((r.threshold - 894.5).abs() < 5.0);
        assert_eq!(r.exceedances, 2);
        assert_ne!(r.verdict, Verdict::OutsideRegime);
    }

    #[test]
    fn outside_regime_and_errors() {
        let s = ScalingScheme::lazy_walk();
        let r = deviation_band(&[0, 1], 100_000, 7.0, 1.5, &s).unwrap();
        assert_eq!(r.verdict, Verdict::OutsideRegime);
        let r = deviation_band(&[0, 1], 100_000, 1.0, 1.5, &s).unwrap();
        assert_eq!(r.verdict, Verdict::OutsideRegime);
        assert!(deviation_band(&[0, 1], 100_000, 3.0, 1.0, &s).is_err());
    }
}
