use serde::Serialize;

use super::ensemble::EnsembleResult;
use super::ks::{ks_statistic, weighted_ks_statistic};
use super::Verdict;
use crate::distributions::MittagLeffler;
use crate::harness::seed_uniform;
use crate::numeric::mean;
use crate::{Error, Result};

pub const KS_TOLERANCE: f64 = 0.05;
pub const MEAN_TOLERANCE: f64 = 0.05;
pub const SECOND_MOMENT_TOLERANCE: f64 = 0.1;

/// Bounded probability densities over the path space used to reweight the
/// ensemble when probing convergence in the strong (density-weighted) sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reweighting {
    Uniform,
    /// `H = 2 u` with `u` a uniform number attached to the path seed.
    SeedLinear,
    /// `H = 1 + sign(X_1) / 2`; mean one for symmetric increments.
    FirstStepTilt,
}

impl Reweighting {
    pub const ALL: [Reweighting; 3] = [
        Reweighting::Uniform,
        Reweighting::SeedLinear,
        Reweighting::FirstStepTilt,
    ];

    pub fn weight(&self, seed: u64, first_increment: i64) -> f64 {
        match self {
            Reweighting::Uniform => 1.0,
            Reweighting::SeedLinear => 2.0 * seed_uniform(seed),
            Reweighting::FirstStepTilt => 1.0 + 0.5 * first_increment.signum() as f64,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointFit {
    pub n: u64,
    pub a_n: f64,
    pub ks: f64,
    pub mean: f64,
    pub second_moment: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReweightedFit {
    pub density: Reweighting,
    pub ks: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct MlConvergenceReport {
    pub alpha: f64,
    pub paths: usize,
    pub terminal_n: u64,
    pub target_mean: f64,
    pub target_second_moment: f64,
    pub checkpoints: Vec<CheckpointFit>,
    pub strong: Vec<ReweightedFit>,
    pub ks_tolerance: f64,
    pub mean_tolerance: f64,
    pub second_moment_tolerance: f64,
    pub verdict: Verdict,
    pub strong_verdict: Verdict,
}

impl MlConvergenceReport {
    pub fn terminal(&self) -> &CheckpointFit {
        self.checkpoints.last().expect("non-empty")
    }
}

/// Compares `l_n / a_n` with the Mittag-Leffler law at every checkpoint and,
/// at `terminal_n`, under each [`Reweighting`].
pub fn verify_ml_convergence(
    ensemble: &EnsembleResult,
    ml: &MittagLeffler,
    terminal_n: u64,
) -> Result<MlConvergenceReport> {
    let term = ensemble.checkpoint_index(terminal_n).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "terminal horizon {terminal_n} is not among the ensemble checkpoints {:?}",
            ensemble.checkpoints
        ))
    })?;
    if (ml.alpha() - ensemble.scheme.alpha()).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "law order {} does not match the scaling scheme's alpha {}",
            ml.alpha(),
            ensemble.scheme.alpha()
        )));
    }
    let cdf = |x: f64| ml.cdf(x);
    let mut checkpoints = Vec::new();
    for (j, &n) in ensemble.checkpoints.iter().enumerate().take(term + 1) {
        let v = ensemble.scaled(j);
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        checkpoints.push(CheckpointFit {
            n,
            a_n: ensemble.normalizers[j],
            ks: ks_statistic(&v, &cdf)?,
            mean: mean(&v),
            second_moment: mean(&sq),
        });
    }

    let values = ensemble.scaled(term);
    let mut strong = Vec::new();
    for density in Reweighting::ALL {
        let w: Vec<f64> = ensemble
            .seeds
            .iter()
            .zip(&ensemble.first_increments)
            .map(|(&s, &x)| density.weight(s, x))
            .collect();
        let ks = weighted_ks_statistic(&values, &w, &cdf)?;
        strong.push(ReweightedFit {
            density,
            ks,
            verdict: Verdict::from_bool(ks <= KS_TOLERANCE),
        });
    }

    let fit = checkpoints.last().unwrap();
    let target_second_moment = ml.moment(2);
    let ok = fit.ks <= KS_TOLERANCE
        && (fit.mean - 1.0).abs() <= MEAN_TOLERANCE
        && (fit.second_moment - target_second_moment).abs() <= SECOND_MOMENT_TOLERANCE;
    let strong_ok = strong.iter().all(|s| s.verdict == Verdict::Pass);
    Ok(MlConvergenceReport {
        alpha: ml.alpha(),
        paths: ensemble.path_count(),
        terminal_n,
        target_mean: 1.0,
        target_second_moment,
        checkpoints,
        strong,
        ks_tolerance: KS_TOLERANCE,
        mean_tolerance: MEAN_TOLERANCE,
        second_moment_tolerance: SECOND_MOMENT_TOLERANCE,
        verdict: Verdict::from_bool(ok),
        strong_verdict: Verdict::from_bool(strong_ok),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localtime::ScalingScheme;
    use crate::processes::{path_rng, LazyWalkGenerator, ProcessKind};

    #[test]
    fn direct_samples_calibrate_the_harness() {
        // Feed exact Y_alpha draws through the same KS path: 1e4 samples, KS < 0.02.
        let ml = MittagLeffler::new(0.5).unwrap();
        let mut rng = path_rng(77);
        let ys: Vec<f64> = (0..10_000).map(|_| ml.sample(&mut rng)).collect();
        assert!(ks_statistic(&ys, &|x| ml.cdf(x)).unwrap() < 0.02);
    }

    #[test]
    fn densities_have_unit_mean() {
        let n = 200_000u64;
        let m: f64 = (0..n)
            .map(|i| Reweighting::SeedLinear.weight(crate::harness::derive_path_seed(1, i), 0))
            .sum::<f64>()
            / n as f64;
        assert!((m - 1.0).abs() < 0.01);
        assert_eq!(Reweighting::FirstStepTilt.weight(0, -1), 0.5);
        assert_eq!(Reweighting::FirstStepTilt.weight(0, 0), 1.0);
    }

    #[test]
    fn mismatches_rejected() {
        let scheme = ScalingScheme::lazy_walk();
        let e = EnsembleResult::simulate(&LazyWalkGenerator, scheme, &[100], 4, 1).unwrap();
        let ml = MittagLeffler::new(0.5).unwrap();
        assert!(verify_ml_convergence(&e, &ml, 99).is_err());
        let wrong = MittagLeffler::new(0.3).unwrap();
        assert!(verify_ml_convergence(&e, &wrong, 100).is_err());
        assert_eq!(e.kind, ProcessKind::LazyWalk);
    }

    #[test]
    fn small_lazy_ensemble_is_close() {
        let scheme = ScalingScheme::lazy_walk();
        let e =
            EnsembleResult::simulate(&LazyWalkGenerator, scheme, &[1000, 10_000], 2000, 5).unwrap();
        let ml = MittagLeffler::new(0.5).unwrap();
        let r = verify_ml_convergence(&e, &ml, 10_000).unwrap();
        assert_eq!(r.checkpoints.len(), 2);
        assert!(r.terminal().ks < 0.06, "{}", r.terminal().ks);
        assert!((r.terminal().mean - 1.0).abs() < 0.06);
    }
}
