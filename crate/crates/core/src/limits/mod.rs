//! Statistical checks of the local-time limit theorems over ensembles of
//! paths or single long paths.
//!
//! Every check returns a serializable report carrying its estimates,
//! intervals, bounds and a [`Verdict`].

mod asclt;
mod conditions;
mod convergence;
mod deviation;
mod ensemble;
mod ks;
mod limsup;

use serde::Serialize;

use crate::{Error, Result};

pub use asclt::{
    asclt_log_average, asclt_log_average_source, asclt_variance_probe, averaged_version,
    averaged_version_of, ASCLTReport, AveragedReport, LogAverager, VarianceProbeReport,
};
pub use conditions::{
    cond1_estimate, cond2_partial_sums, second_diff_moment, Cond1Report, Cond1Row, Cond2Report,
    Cond2Row, SecondDiffReport, SecondDiffRow, ShiftFunctional, COND2_RATIO_LIMIT,
    SECOND_DIFF_RATIO_BOUND,
};
pub use convergence::{
    verify_ml_convergence, CheckpointFit, MlConvergenceReport, ReweightedFit, Reweighting,
    KS_TOLERANCE, MEAN_TOLERANCE, SECOND_MOMENT_TOLERANCE,
};
pub use deviation::{deviation_band, deviation_bounds, DeviationReport};
pub use ensemble::{for_each_step, map_paths, EnsembleResult, PathContext};
pub use ks::{ks_statistic, weighted_ks_statistic};
pub use limsup::{
    limsup_ensemble, limsup_estimate, limsup_estimate_source, LimsupReport, LimsupRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Parameters outside the range where the statement applies.
    OutsideRegime,
    /// Reported for inspection only.
    Observational,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Verdict::Fail)
    }
}

/// Bounded test function on the reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundedFn {
    Constant {
        value: f64,
    },
    /// `min(u, cap)`, bounded on the nonnegative half-line where scaled local times live.
    MinCap {
        cap: f64,
    },
    /// `u` clipped to `[lo, hi]`.
    Clip {
        lo: f64,
        hi: f64,
    },
    /// `u` itself; not bounded, rejected where boundedness is required.
    Identity,
}

impl BoundedFn {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            BoundedFn::Constant { value } => value,
            BoundedFn::MinCap { cap } => u.min(cap),
            BoundedFn::Clip { lo, hi } => u.clamp(lo, hi),
            BoundedFn::Identity => u,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match *self {
            BoundedFn::Constant { value } => value.is_finite(),
            BoundedFn::MinCap { cap } => cap.is_finite(),
            BoundedFn::Clip { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            BoundedFn::Identity => false,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, BoundedFn::Constant { .. })
    }

    pub(crate) fn require_bounded(&self, what: &str) -> Result<()> {
        if self.is_bounded() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} must be a bounded function, got {self:?}"
            )))
        }
    }
}

impl Default for BoundedFn {
    fn default() -> Self {
        BoundedFn::MinCap { cap: 2.0 }
    }
}
