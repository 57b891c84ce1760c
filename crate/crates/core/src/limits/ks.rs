use crate::{Error, Result};

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and `cdf`.
///
/// Order-statistics sweep; tied samples share one `cdf` evaluation.
pub fn ks_statistic(samples: &[f64], cdf: &dyn Fn(f64) -> f64) -> Result<f64> {
    let weights = vec![1.0; samples.len()];
    weighted_ks_statistic(samples, &weights, cdf)
}

/// KS distance for the weighted empirical law `sum_i w_i delta_{x_i} / sum_i w_i`.
pub fn weighted_ks_statistic(
    samples: &[f64],
    weights: &[f64],
    cdf: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "KS statistic needs at least one sample".into(),
        ));
    }
    if samples.len() != weights.len() {
        return Err(Error::InvalidArgument(
            "samples and weights differ in length".into(),
        ));
    }
    if samples.iter().any(|x| x.is_nan()) || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite())
    {
        return Err(Error::InvalidArgument(
            "NaN sample or invalid weight".into(),
        ));
    }
    let total: f64 = crate::numeric::sum(weights);
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));

    let mut d = 0.0f64;
    let mut below = 0.0; // empirical mass strictly below the current value
    let mut i = 0;
    while i < order.len() {
        let x = samples[order[i]];
        let mut w = 0.0;
        while i < order.len() && samples[order[i]] == x {
            w += weights[order[i]];
            i += 1;
        }
        let f = cdf(x).clamp(0.0, 1.0);
        let lo = below / total;
        below += w;
        let hi = (below / total).min(1.0);
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform_cdf(x: f64) -> f64 {
        x.clamp(0.0, 1.0)
    }

    #[test]
    fn point_mass_at_median() {
        let s = vec![0.5; 100];
        assert!((ks_statistic(&s, &uniform_cdf).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_sample_at_top_quantile() {
        let d = ks_statistic(&[1.0], &uniform_cdf).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        assert!(!d.is_nan());
        let d = ks_statistic(&[f64::INFINITY], &|x: f64| {
            if x.is_infinite() {
                1.0
            } else {
                0.5
            }
        })
        .unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_rejected() {
        assert!(ks_statistic(&[], &uniform_cdf).is_err());
    }

    #[test]
    fn draws_from_the_law_itself() {
        // DKW: P(D > 0.02) <= 2 exp(-2 * 1e4 * 4e-4) ~ 6.7e-4
        let mut rng = crate::processes::path_rng(5);
        let s: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        assert!(ks_statistic(&s, &uniform_cdf).unwrap() < 0.02);
    }

    #[test]
    fn weights_shift_the_law() {
        let s = [0.25, 0.75];
        let d_even = weighted_ks_statistic(&s, &[1.0, 1.0], &uniform_cdf).unwrap();
        let d_skew = weighted_ks_statistic(&s, &[3.0, 1.0], &uniform_cdf).unwrap();
        assert!((d_even - 0.25).abs() < 1e-15);
        assert!((d_skew - 0.5).abs() < 1e-15);
    }
}
