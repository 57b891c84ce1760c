use serde::Serialize;

use crate::distributions::stable_density_at_zero;
use crate::limits::Verdict;
use crate::localtime::oracle::{effective_radius, law_for};
use crate::localtime::{ExactWalk, ScalingScheme};
use crate::processes::ProcessKind;
use crate::{Error, Result};

/// Largest relative residual of the fixed-exponent fit before calibration fails.
pub const CALIBRATION_RESIDUAL_LIMIT: f64 = 0.05;

/// Allowed gap between the free log-log slope and `-1/d`.
pub const EXPONENT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    pub n: u64,
    pub p0: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    pub kind: ProcessKind,
    pub horizon: usize,
    pub radius: usize,
    pub scheme: ScalingScheme,
    /// `g0 / c`, the only combination that `P(S_n = 0)` identifies.
    pub level: f64,
    /// Free least-squares slope of `log P(S_n = 0)` against `log n`, negated.
    pub fitted_exponent: f64,
    pub max_residual: f64,
    /// For finite-variance walks: `(c, g0)` from the increment variance.
    pub closed_form: Option<ScalingScheme>,
    pub closed_form_rel_diff: Option<f64>,
    pub rows: Vec<CalibrationRow>,
    pub verdict: Verdict,
}

fn stability_index(kind: &ProcessKind) -> Result<f64> {
    match kind {
        ProcessKind::LazyWalk => Ok(2.0),
        ProcessKind::HeavyTailWalk { d } => Ok(*d),
        other => Err(Error::Calibration(format!(
            "{other} is not an i.i.d. walk; supply an explicit scheme"
        ))),
    }
}

/// Window wide enough that mass leaving it essentially never returns to 0.
pub(crate) fn calibration_radius(kind: &ProcessKind, horizon: usize, d: f64) -> usize {
    let spread = (horizon as f64).powf(1.0 / d);
    effective_radius(kind, horizon, (20.0 * spread).ceil().max(256.0) as usize)
}

/// Fits `P(S_n = 0) ~ (g0 / c) n^(-1/d)` on `n in [horizon/10, horizon]`
/// from the exact law. `g0` is the density at 0 of the standard symmetric
/// stable law (characteristic function `exp(-|t|^d)`), which fixes `c`.
pub fn calibration_report(kind: &ProcessKind, horizon: usize) -> Result<CalibrationReport> {
    let d = stability_index(kind)?;
    if horizon < 20 {
        return Err(Error::Calibration(format!(
            "horizon {horizon} too short to fit (need >= 20)"
        )));
    }
    let beta = 1.0 / d;
    let radius = calibration_radius(kind, horizon, d);
    let law = law_for(kind, radius)?;
    let variance = (law.tail_below == 0.0 && law.tail_above == 0.0).then(|| {
        (0..law.probs.len())
            .map(|j| {
                let k = (law.offset + j as i64) as f64;
                k * k * law.probs[j]
            })
            .sum::<f64>()
    });
    let mut walk = ExactWalk::new(law, horizon, radius)?;
    let start = (horizon / 10).max(1) as u64;
    let mut data = Vec::new();
    while walk.advance() {
        let n = walk.step_index() as u64;
        if n >= start {
            data.push((n, walk.prob(0)));
        }
    }
    if data.iter().any(|&(_, p)| !(p > 0.0)) {
        return Err(Error::Calibration(
            "P(S_n = 0) vanished inside the fit range (periodic walk?)".into(),
        ));
    }

    let logs: Vec<(f64, f64)> = data
        .iter()
        .map(|&(n, p)| ((n as f64).ln(), p.ln()))
        .collect();
    let level = (logs
        .iter()
        .map(|&(ln_n, ln_p)| ln_p + beta * ln_n)
        .sum::<f64>()
        / logs.len() as f64)
        .exp();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|v| v.0).sum::<f64>() / k;
    let my = logs.iter().map(|v| v.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let fitted_exponent = -sxy / sxx;

    let rows: Vec<CalibrationRow> = data
        .iter()
        .map(|&(n, p0)| CalibrationRow {
            n,
            p0,
            fitted: level * (n as f64).powf(-beta),
        })
        .collect();
    let max_residual = rows
        .iter()
        .map(|r| (r.p0 / r.fitted - 1.0).abs())
        .fold(0.0, f64::max);
    if max_residual > CALIBRATION_RESIDUAL_LIMIT {
        return Err(Error::Calibration(format!(
            "relative residual {max_residual:.3} exceeds {CALIBRATION_RESIDUAL_LIMIT} for {kind} on [{start}, {horizon}]; increase the horizon"
        )));
    }
    let g0 = stable_density_at_zero(d)?;
    let scheme = ScalingScheme::new(d, g0 / level, g0)?;
    let closed_form = match (variance, d == 2.0) {
        (Some(v), true) => Some(ScalingScheme::normal(v)?),
        _ => None,
    };
    let closed_form_rel_diff =
        closed_form.map(|c| (scheme.scale_c / scheme.g0) / (c.scale_c / c.g0) - 1.0);
    let exponent_ok = (fitted_exponent - beta).abs() <= EXPONENT_TOLERANCE;
    let closed_ok = closed_form_rel_diff.is_none_or(|r| r.abs() <= 0.02);
    Ok(CalibrationReport {
        kind: *kind,
        horizon,
        radius,
        scheme,
        level,
        fitted_exponent,
        max_residual,
        closed_form,
        closed_form_rel_diff,
        rows,
        verdict: Verdict::from_bool(exponent_ok && closed_ok),
    })
}

/// The calibrated scheme for an i.i.d. walk.
pub fn calibrate(kind: &ProcessKind, horizon: usize) -> Result<ScalingScheme> {
    calibration_report(kind, horizon).map(|r| r.scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gamma;
    use crate::processes::HeavyTailGenerator;

    #[test]
    fn lazy_walk_matches_closed_form() {
        let r = calibration_report(&ProcessKind::LazyWalk, 10_000).unwrap();
        let want = 0.5f64.sqrt() * (2.0 * std::f64::consts::PI).sqrt();
        assert!((r.scheme.scale_c / r.scheme.g0 / want - 1.0).abs() < 0.02);
        assert!(r.closed_form_rel_diff.unwrap().abs() < 0.02);
        assert_eq!(r.verdict, Verdict::Pass);
        // Local CLT at n = 10^4.
        let last = r.rows.last().unwrap();
        let lclt = last.p0 * 0.5f64.sqrt() * (2.0 * std::f64::consts::PI * 1e4).sqrt();
        assert!((lclt - 1.0).abs() < 0.01, "{lclt}");
    }

    #[test]
    fn heavy_tail_exponent_and_tail_constant() {
        let d = 1.5;
        let kind = ProcessKind::HeavyTailWalk { d };
        let r = calibration_report(&kind, 2000).unwrap();
        assert!(
            (r.fitted_exponent - 1.0 / d).abs() <= 0.02,
            "{}",
            r.fitted_exponent
        );
        // Domain of attraction: P(|X| > x) ~ A x^-d gives c^d = A Gamma(1-d) cos(pi d / 2).
        let g = HeavyTailGenerator::new(d).unwrap();
        let k = 1_000_000usize;
        let a = g.abs_tail(k) * (k as f64).powf(d);
        let c = (a * gamma(1.0 - d) * (std::f64::consts::FRAC_PI_2 * d).cos()).powf(1.0 / d);
        assert!(
            (r.scheme.scale_c / c - 1.0).abs() < 0.05,
            "{} vs {c}",
            r.scheme.scale_c
        );
        // The lattice correction decays like n^-((2-d)/d); extrapolate it away.
        let short = calibrate(&kind, 500).unwrap().scale_c;
        let q = 4f64.powf((2.0 - d) / d);
        let extrapolated = (q * r.scheme.scale_c - short) / (q - 1.0);
        assert!(
            (extrapolated / c - 1.0).abs() < 0.005,
            "{extrapolated} vs {c}"
        );
    }

    #[test]
    fn non_iid_rejected() {
        assert!(matches!(
            calibrate(&ProcessKind::GaussCfPair, 100),
            Err(Error::Calibration(_))
        ));
        assert!(calibrate(&ProcessKind::LazyWalk, 5).is_err());
    }
}
