use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::calibrate::{calibration_radius, calibration_report, CalibrationReport};
use super::config::{ExperimentConfig, SchemeChoice};
use super::output::{row, Artifacts};
use super::seed::derive_path_seed;
use crate::distributions::MittagLeffler;
use crate::limits::{
    asclt_log_average_source, asclt_variance_probe, averaged_version, cond1_estimate,
    cond2_partial_sums, deviation_band, for_each_step, limsup_ensemble, map_paths,
    second_diff_moment, verify_ml_convergence, BoundedFn, EnsembleResult, ShiftFunctional, Verdict,
};
use crate::localtime::{expected_local_time_check, ScalingScheme};
use crate::numeric::geometric_grid;
use crate::processes::{ProcessGenerator, ProcessKind};
use crate::transferop::{
    density_check, eigenvalue_curve_check, resolution_doubling, tail_norm_check,
};
use crate::{Error, Result};

/// Largest single-path logarithmic-average error accepted.
pub const ASCLT_SINGLE_TOLERANCE: f64 = 0.15;
/// Largest averaged-version error accepted.
pub const ASCLT_AVERAGED_TOLERANCE: f64 = 0.1;
/// `E[l_n] / a_n` must fall in `[1 - band, 1 + band]`.
pub const EXPECTED_RATIO_BAND: f64 = 0.1;

/// One runnable experiment, selected by name from the CLI or a config file.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()>;
}

pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Simulate));
        r.register(Arc::new(VerifyMl));
        r.register(Arc::new(Deviation));
        r.register(Arc::new(Limsup));
        r.register(Arc::new(Asclt));
        r.register(Arc::new(Conditions));
        r.register(Arc::new(Spectrum));
        r.register(Arc::new(Calibrate));
        r
    }

    pub fn register(&mut self, e: Arc<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Experiment>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                kind: "experiment",
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

/// The scaling scheme a config asks for, with the calibration behind it if any.
pub fn resolve_scheme(
    cfg: &ExperimentConfig,
) -> Result<(ScalingScheme, Option<CalibrationReport>)> {
    let calibrated = || -> Result<(ScalingScheme, Option<CalibrationReport>)> {
        let r = calibration_report(&cfg.process, cfg.calibration_horizon)?;
        Ok((r.scheme, Some(r)))
    };
    match (&cfg.scheme, &cfg.process) {
        (SchemeChoice::Explicit(s), _) => Ok((*s, None)),
        (SchemeChoice::Calibrate, _) => calibrated(),
        (SchemeChoice::Auto, ProcessKind::LazyWalk) => Ok((ScalingScheme::lazy_walk(), None)),
        (SchemeChoice::Auto, ProcessKind::HeavyTailWalk { d }) if *d < 2.0 => calibrated(),
        (SchemeChoice::Auto, ProcessKind::BetaPair { beta }) if beta.fract() == 0.0 => {
            // Difference of two independent uniform digits on 0..beta.
            Ok((ScalingScheme::normal((beta * beta - 1.0) / 6.0)?, None))
        }
        (SchemeChoice::Auto, kind) => Err(Error::Config(format!(
            "no automatic scaling scheme for {kind}; set scheme = explicit with scheme_d, scale_c and g0"
        ))),
    }
}

fn setup(
    cfg: &ExperimentConfig,
    out: &mut Artifacts,
) -> Result<(Arc<dyn ProcessGenerator>, ScalingScheme)> {
    let generator = cfg.process.generator()?;
    let (scheme, calibration) = resolve_scheme(cfg)?;
    out.report("scheme", &scheme)?;
    if let Some(c) = calibration {
        out.report("calibration", &c)?;
    }
    Ok((generator, scheme))
}

fn to_usize(n: u64, what: &str) -> Result<usize> {
    usize::try_from(n)
        .map_err(|_| Error::Config(format!("{what} {n} does not fit in memory indices")))
}

struct Simulate;

#[derive(Serialize)]
struct SimulateSummary {
    process: ProcessKind,
    horizon: u64,
    paths: usize,
    checkpoints: Vec<u64>,
    mean_local_time: Vec<f64>,
}

impl Experiment for Simulate {
    fn name(&self) -> &'static str {
        "simulate"
    }

    fn about(&self) -> &'static str {
        "simulate paths and record local times at 0 at the checkpoints"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let generator = cfg.process.generator()?;
        let n = to_usize(cfg.horizon, "horizon")?;
        let cps = &cfg.checkpoints;
        if cps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        let per_path = map_paths(
            generator.as_ref(),
            n,
            cfg.paths,
            cfg.master_seed,
            |ctx, src| {
                let mut rec = Vec::with_capacity(cps.len());
                let (mut count, mut next) = (0u64, 0usize);
                for_each_step(src, n, |k, _, s| {
                    count += u64::from(s == 0);
                    while next < cps.len() && cps[next] == k {
                        rec.push(count);
                        next += 1;
                    }
                })?;
                Ok((ctx.seed, rec))
            },
        )?;
        let mut rows = Vec::with_capacity(per_path.len() * cps.len());
        for (i, (seed, rec)) in per_path.iter().enumerate() {
            for (c, l) in cps.iter().zip(rec) {
                rows.push(row(&[&i, seed, c, l]));
            }
        }
        out.csv("local_times.csv", "path,seed,n,local_time", rows);
        let first = generator.trajectory(derive_path_seed(cfg.master_seed, 0), n.min(100_000))?;
        let mut buf = Vec::new();
        first
            .write_csv(&mut buf)
            .map_err(|e| Error::io("trajectory.csv", e))?;
        out.file("trajectory.csv", buf);
        let mean_local_time = (0..cps.len())
            .map(|j| per_path.iter().map(|p| p.1[j] as f64).sum::<f64>() / per_path.len() as f64)
            .collect();
        out.report(
            "simulate",
            &SimulateSummary {
                process: cfg.process,
                horizon: cfg.horizon,
                paths: cfg.paths,
                checkpoints: cps.clone(),
                mean_local_time,
            },
        )?;
        out.verdict("simulate", Verdict::Observational);
        Ok(())
    }
}

struct VerifyMl;

impl Experiment for VerifyMl {
    fn name(&self) -> &'static str {
        "verify-ml"
    }

    fn about(&self) -> &'static str {
        "Kolmogorov-Smirnov and moment check of l_n / a_n against the Mittag-Leffler law"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let (generator, scheme) = setup(cfg, out)?;
        let ens = EnsembleResult::simulate(
            generator.as_ref(),
            scheme,
            &cfg.checkpoints,
            cfg.paths,
            cfg.master_seed,
        )?;
        let ml = MittagLeffler::new(scheme.alpha())?;
        let report = verify_ml_convergence(&ens, &ml, cfg.horizon)?;
        out.csv(
            "ml_checkpoints.csv",
            "n,a_n,ks,mean,second_moment",
            report
                .checkpoints
                .iter()
                .map(|c| row(&[&c.n, &c.a_n, &c.ks, &c.mean, &c.second_moment])),
        );
        out.csv(
            "ml_strong.csv",
            "density,ks,verdict",
            report
                .strong
                .iter()
                .map(|s| row(&[&format!("{:?}", s.density), &s.ks, &s.verdict])),
        );
        let j = ens.checkpoint_index(cfg.horizon).expect("verified above");
        let scaled = ens.scaled(j);
        out.csv(
            "ml_samples.csv",
            "path,seed,scaled_local_time",
            scaled
                .iter()
                .zip(&ens.seeds)
                .enumerate()
                .map(|(i, (u, s))| row(&[&i, s, u])),
        );
        out.verdict("ml-convergence", report.verdict);
        out.verdict("strong-form", report.strong_verdict);
        out.report("verify_ml", &report)
    }
}

struct Deviation;

impl Experiment for Deviation {
    fn name(&self) -> &'static str {
        "deviation"
    }

    fn about(&self) -> &'static str {
        "exceedance probabilities of l_n against the exponential deviation band"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let (generator, scheme) = setup(cfg, out)?;
        let ens = EnsembleResult::simulate(
            generator.as_ref(),
            scheme,
            &[cfg.horizon],
            cfg.paths,
            cfg.master_seed,
        )?;
        let lt = ens.raw(0);
        let mut reports = Vec::new();
        for &t in &cfg.t_values {
            let r = deviation_band(&lt, cfg.horizon, t, cfg.gamma, &scheme)?;
            out.verdict(format!("deviation t={t}"), r.verdict);
            reports.push(r);
        }
        out.csv(
            "deviation.csv",
            "t,threshold,exceedances,paths,empirical_prob,ci_low,ci_high,lower_bound,upper_bound,verdict",
            reports.iter().map(|r| {
                row(&[
                    &r.t,
                    &r.threshold,
                    &r.exceedances,
                    &r.paths,
                    &r.empirical_prob,
                    &r.interval.0,
                    &r.interval.1,
                    &r.lower_bound,
                    &r.upper_bound,
                    &r.verdict,
                ])
            }),
        );
        out.report("deviation", &reports)
    }
}

struct Limsup;

impl Experiment for Limsup {
    fn name(&self) -> &'static str {
        "limsup"
    }

    fn about(&self) -> &'static str {
        "running maximum of the upper-limit statistic (reported, not gated)"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let (generator, scheme) = setup(cfg, out)?;
        let cps = geometric_grid(16, cfg.limsup_horizon.max(16), 4);
        let report = limsup_ensemble(
            generator.as_ref(),
            &scheme,
            &cps,
            cfg.limsup_paths,
            cfg.master_seed,
        )?;
        out.csv(
            "limsup.csv",
            "n,local_time,statistic,running_max",
            report
                .rows
                .iter()
                .map(|r| row(&[&r.n, &r.local_time, &r.statistic, &r.running_max])),
        );
        out.verdict("limsup", report.verdict);
        out.verdict(
            "limsup running max monotone",
            Verdict::from_bool(report.is_monotone()),
        );
        out.report("limsup", &report)
    }
}

struct Asclt;

impl Experiment for Asclt {
    fn name(&self) -> &'static str {
        "asclt"
    }

    fn about(&self) -> &'static str {
        "logarithmic averages along one path, the averaged version, and the variance probe"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let (generator, scheme) = setup(cfg, out)?;
        let n = to_usize(cfg.asclt_horizon, "asclt_horizon")?;
        let mut src = generator.source(derive_path_seed(cfg.master_seed, 0), n)?;
        let single =
            asclt_log_average_source(src.as_mut(), cfg.asclt_horizon, &scheme, &cfg.x_grid)?;
        let averaged = averaged_version(
            generator.as_ref(),
            &scheme,
            &cfg.x_grid,
            cfg.averaged_horizon,
            cfg.averaged_paths,
            cfg.master_seed,
        )?;
        let probe = asclt_variance_probe(
            generator.as_ref(),
            &scheme,
            BoundedFn::default(),
            &cfg.n_list,
            cfg.probe_paths,
            cfg.master_seed,
        )?;
        out.csv(
            "asclt.csv",
            "x,single_path,averaged,reference",
            (0..cfg.x_grid.len()).map(|i| {
                row(&[
                    &single.x_grid[i],
                    &single.log_averages[i],
                    &averaged.log_averages[i],
                    &single.reference[i],
                ])
            }),
        );
        out.csv(
            "asclt_variance.csv",
            "n,mean,variance",
            (0..probe.n_list.len())
                .map(|i| row(&[&probe.n_list[i], &probe.means[i], &probe.variances[i]])),
        );
        out.verdict(
            "asclt single path",
            Verdict::from_bool(single.max_abs_error() <= ASCLT_SINGLE_TOLERANCE),
        );
        out.verdict(
            "asclt averaged version",
            Verdict::from_bool(averaged.max_abs_error() <= ASCLT_AVERAGED_TOLERANCE),
        );
        out.verdict("asclt variance probe", probe.verdict);
        out.report("asclt_single", &single)?;
        out.report("asclt_averaged", &averaged)?;
        out.report("asclt_variance_probe", &probe)
    }
}

struct Conditions;

impl Experiment for Conditions {
    fn name(&self) -> &'static str {
        "conditions"
    }

    fn about(&self) -> &'static str {
        "exact expected local time, covariance decay, potential-kernel sums, second differences"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let (generator, scheme) = setup(cfg, out)?;
        let kind = cfg.process;
        if kind.is_iid_walk() {
            let d = scheme.d;
            let radius = calibration_radius(&kind, cfg.expected_horizon, d);
            let lm = expected_local_time_check(&kind, &scheme, cfg.expected_horizon, radius)?;
            out.csv(
                "expected_local_time.csv",
                "m,expected_local_time,a_m,ratio",
                lm.checkpoints
                    .iter()
                    .map(|c| row(&[&c.0, &c.1, &c.2, &c.3])),
            );
            out.verdict(
                "expected local time",
                Verdict::from_bool((lm.ratio - 1.0).abs() <= EXPECTED_RATIO_BAND),
            );
            out.report("expected_local_time", &lm)?;

            let c2 = cond2_partial_sums(
                &kind,
                &scheme,
                &cfg.levels,
                cfg.levels_horizon,
                cfg.ratio_limit,
            )?;
            out.csv(
                "cond2.csv",
                "x,terminal,ratio,nondecreasing",
                c2.rows
                    .iter()
                    .map(|r| row(&[&r.x, &r.terminal, &r.ratio, &r.nondecreasing])),
            );
            out.verdict("potential-kernel sums", c2.verdict);
            out.report("cond2", &c2)?;
        } else {
            log::warn!("{kind} has no exact oracle; skipping expected local time and potential-kernel sums");
        }

        let c1 = cond1_estimate(
            generator.as_ref(),
            &scheme,
            BoundedFn::default(),
            ShiftFunctional::first_increment(),
            &cfg.k_list,
            cfg.cov_delta,
            cfg.cov_paths,
            cfg.master_seed,
        )?;
        out.csv(
            "cond1.csv",
            "k,covariance,std_error,envelope,within_noise",
            c1.rows.iter().map(|r| {
                row(&[
                    &r.k,
                    &r.covariance,
                    &r.std_error,
                    &r.envelope,
                    &r.within_noise,
                ])
            }),
        );
        out.verdict("covariance decay", c1.verdict);
        out.report("cond1", &c1)?;

        let sd = second_diff_moment(
            generator.as_ref(),
            &scheme,
            cfg.second_diff_k,
            &cfg.j_list,
            cfg.second_diff_paths,
            cfg.master_seed,
        )?;
        out.csv(
            "second_diff.csv",
            "j,lhs,lhs_std_error,rhs,ratio",
            sd.rows
                .iter()
                .map(|r| row(&[&r.j, &r.lhs, &r.lhs_std_error, &r.rhs, &r.ratio])),
        );
        out.verdict("second-difference moment", sd.verdict);
        out.report("second_diff", &sd)
    }
}

struct Spectrum;

impl Experiment for Spectrum {
    fn name(&self) -> &'static str {
        "spectrum"
    }

    fn about(&self) -> &'static str {
        "Ulam eigenvalue curve, tail norm, invariant density and resolution doubling"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let map = cfg.map.build()?;
        let m = cfg.resolution;
        let curve = eigenvalue_curve_check(map.clone(), m, &cfg.t_grid, cfg.d_exp)?;
        let mut buf = Vec::new();
        crate::transferop::write_curve_csv(&curve.points, &mut buf)
            .map_err(|e| Error::io("spectrum.csv", e))?;
        out.file("spectrum.csv", buf);
        out.verdict("eigenvalue curve", curve.verdict);
        out.report("curve", &curve)?;

        let tail = tail_norm_check(map.clone(), m, cfg.window, &cfg.tail_grid)?;
        let mut buf = Vec::new();
        crate::transferop::write_curve_csv(&tail.points, &mut buf)
            .map_err(|e| Error::io("spectrum_tail.csv", e))?;
        out.file("spectrum_tail.csv", buf);
        out.verdict("tail norm", tail.verdict);
        out.report("tail", &tail)?;

        if map.density_average(0.0, 1.0).is_some() {
            let dens = density_check(map.clone(), m)?;
            let mf = m as f64;
            out.csv(
                "density.csv",
                "x,ulam,exact",
                dens.density.iter().enumerate().map(|(i, h)| {
                    let exact = map
                        .density_average(i as f64 / mf, (i + 1) as f64 / mf)
                        .unwrap_or(f64::NAN);
                    row(&[&((i as f64 + 0.5) / mf), h, &exact])
                }),
            );
            out.verdict("invariant density", dens.verdict);
            out.report("density", &dens)?;
        }

        let res = resolution_doubling(map, m, 0.0)?;
        out.verdict("resolution doubling", Verdict::Observational);
        out.report("resolution", &res)
    }
}

struct Calibrate;

impl Experiment for Calibrate {
    fn name(&self) -> &'static str {
        "calibrate"
    }

    fn about(&self) -> &'static str {
        "fit B_n P(S_n = 0) -> g(0) from the exact law of an i.i.d. walk"
    }

    fn run(&self, cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<()> {
        let r = calibration_report(&cfg.process, cfg.calibration_horizon)?;
        out.csv(
            "calibration.csv",
            "n,p0,fitted",
            r.rows.iter().map(|c| row(&[&c.n, &c.p0, &c.fitted])),
        );
        out.verdict("calibration", r.verdict);
        out.report("calibration", &r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_all_subcommands() {
        let r = ExperimentRegistry::builtin();
        assert_eq!(
            r.names(),
            vec![
                "asclt",
                "calibrate",
                "conditions",
                "deviation",
                "limsup",
                "simulate",
                "spectrum",
                "verify-ml"
            ]
        );
        assert!(matches!(r.get("verify"), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn scheme_resolution() {
        let cfg = |text: &str| ExperimentConfig::load(Some(text), Vec::new(), &[]).unwrap();
        assert_eq!(
            resolve_scheme(&cfg("")).unwrap().0,
            ScalingScheme::lazy_walk()
        );
        let (s, _) = resolve_scheme(&cfg("process = beta\nbeta = 2")).unwrap();
        assert_eq!(s, ScalingScheme::lazy_walk());
        assert!(resolve_scheme(&cfg("process = gauss-cf")).is_err());
        let (s, cal) =
            resolve_scheme(&cfg("process = heavy-tail\ncalibration_horizon = 300")).unwrap();
        assert!(cal.is_some() && (s.d - 1.5).abs() < 1e-15);
        let (s, _) = resolve_scheme(&cfg(
            "process = gauss-cf\nscheme = explicit\nscheme_d = 1.8\nscale_c = 2\ng0 = 0.3",
        ))
        .unwrap();
        assert_eq!((s.d, s.scale_c, s.g0), (1.8, 2.0, 0.3));
    }
}
