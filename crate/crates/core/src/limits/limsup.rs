use serde::Serialize;

use super::ensemble::{for_each_step, map_paths};
use super::Verdict;
use crate::distributions::lil_constant;
use crate::localtime::{Normalizer, ScalingScheme};
use crate::processes::{IncrementSource, IntTrajectory, ProcessGenerator};
use crate::{Error, Result};

/// Checkpoints below this have `log log n` under 1 and are skipped.
const MIN_CHECKPOINT: u64 = 16;

#[derive(Debug, Clone, Serialize)]
pub struct LimsupRow {
    pub n: u64,
    pub local_time: u64,
    /// `l_n / (a_{floor(n/L)} L)` with `L = log log n`.
    pub statistic: f64,
    pub running_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimsupReport {
    pub alpha: f64,
    pub k_alpha: f64,
    /// 1 for a single path; for an ensemble each row holds the maximum over paths.
    pub paths: usize,
    pub rows: Vec<LimsupRow>,
    pub skipped: Vec<u64>,
    pub verdict: Verdict,
}

impl LimsupReport {
    pub fn final_max(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.running_max)
    }

    /// Running maximum never decreases.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].running_max >= w[0].running_max)
    }
}

fn split_checkpoints(checkpoints: &[u64]) -> Result<(Vec<u64>, Vec<u64>)> {
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    let (skipped, kept): (Vec<u64>, Vec<u64>) = cps.into_iter().partition(|&c| c < MIN_CHECKPOINT);
    for c in &skipped {
        log::warn!("limsup checkpoint {c} is below {MIN_CHECKPOINT}; skipped");
    }
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no limsup checkpoint at or above {MIN_CHECKPOINT}"
        )));
    }
    Ok((kept, skipped))
}

fn statistic(norm: &Normalizer, n: u64, ell: u64) -> f64 {
    let l2 = (n as f64).ln().ln();
    let idx = ((n as f64 / l2).floor() as u64).max(1);
    ell as f64 / (norm.a(idx) * l2)
}

fn scan(
    source: &mut dyn IncrementSource,
    norm: &Normalizer,
    kept: &[u64],
) -> Result<Vec<(u64, f64)>> {
    let n = *kept.last().unwrap() as usize;
    let mut out = Vec::with_capacity(kept.len());
    let mut ell = 0u64;
    let mut next = 0;
    for_each_step(source, n, |k, _, s| {
        ell += (s == 0) as u64;
        if next < kept.len() && k == kept[next] {
            out.push((ell, statistic(norm, k, ell)));
            next += 1;
        }
    })?;
    Ok(out)
}

fn assemble(
    scheme: &ScalingScheme,
    kept: Vec<u64>,
    skipped: Vec<u64>,
    paths: usize,
    vals: Vec<(u64, f64)>,
) -> LimsupReport {
    let mut running = f64::NEG_INFINITY;
    let rows = kept
        .into_iter()
        .zip(vals)
        .map(|(n, (local_time, statistic))| {
            running = running.max(statistic);
            LimsupRow {
                n,
                local_time,
                statistic,
                running_max: running,
            }
        })
        .collect();
    LimsupReport {
        alpha: scheme.alpha(),
        k_alpha: lil_constant(scheme.alpha()),
        paths,
        rows,
        skipped,
        verdict: Verdict::Observational,
    }
}

/// Running maximum of the upper-limit statistic along one path.
pub fn limsup_estimate(
    traj: &IntTrajectory,
    scheme: &ScalingScheme,
    checkpoints: &[u64],
) -> Result<LimsupReport> {
    let (kept, skipped) = split_checkpoints(checkpoints)?;
    let n = *kept.last().unwrap();
    if n as usize > traj.len() {
        return Err(Error::InvalidArgument(format!(
            "checkpoint {n} beyond trajectory length {}",
            traj.len()
        )));
    }
    let norm = Normalizer::new(*scheme, n);
    let sums = traj.partial_sums();
    let mut ell = 0u64;
    let mut next = 0;
    let mut vals = Vec::with_capacity(kept.len());
    for (i, &s) in sums[..n as usize].iter().enumerate() {
        ell += (s == 0) as u64;
        let k = i as u64 + 1;
        if k == kept[next] {
            vals.push((ell, statistic(&norm, k, ell)));
            next += 1;
        }
    }
    Ok(assemble(scheme, kept, skipped, 1, vals))
}

/// Streaming variant of [`limsup_estimate`] for paths too long to store.
pub fn limsup_estimate_source(
    source: &mut dyn IncrementSource,
    scheme: &ScalingScheme,
    checkpoints: &[u64],
) -> Result<LimsupReport> {
    let (kept, skipped) = split_checkpoints(checkpoints)?;
    let norm = Normalizer::new(*scheme, *kept.last().unwrap());
    let vals = scan(source, &norm, &kept)?;
    Ok(assemble(scheme, kept, skipped, 1, vals))
}

/// Per-checkpoint maximum of the statistic over `paths` independent paths.
pub fn limsup_ensemble(
    generator: &dyn ProcessGenerator,
    scheme: &ScalingScheme,
    checkpoints: &[u64],
    paths: usize,
    master_seed: u64,
) -> Result<LimsupReport> {
    if paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let (kept, skipped) = split_checkpoints(checkpoints)?;
    let n = *kept.last().unwrap();
    let norm = Normalizer::new(*scheme, n);
    let per_path = map_paths(generator, n as usize, paths, master_seed, |_, src| {
        scan(src, &norm, &kept)
    })?;
    let vals = (0..kept.len())
        .map(|j| {
            per_path
                .iter()
                .map(|p| p[j])
                .fold((0u64, f64::NEG_INFINITY), |acc, v| {
                    (acc.0.max(v.0), acc.1.max(v.1))
                })
        })
        .collect();
    Ok(assemble(scheme, kept, skipped, paths, vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{LazyWalkGenerator, ProcessGenerator};

    #[test]
    fn k_alpha_half_is_sqrt_pi() {
        assert!((lil_constant(0.5) - 1.772_453_850_905_516).abs() < 1e-12);
    }

    #[test]
    fn running_max_monotone_and_small_skipped() {
        let t = LazyWalkGenerator.trajectory(11, 100_000).unwrap();
        let r = limsup_estimate(
            &t,
            &ScalingScheme::lazy_walk(),
            &[4, 10, 100, 1000, 10_000, 100_000],
        )
        .unwrap();
        assert_eq!(r.skipped, vec![4, 10]);
        assert_eq!(r.rows.len(), 4);
        assert!(r.is_monotone());
        assert_eq!(r.verdict, Verdict::Observational);
    }

    #[test]
    fn streaming_matches_stored() {
        let s = ScalingScheme::lazy_walk();
        let cps = [100, 5000, 20_000];
        let t = LazyWalkGenerator.trajectory(3, 20_000).unwrap();
        let a = limsup_estimate(&t, &s, &cps).unwrap();
        let mut src = LazyWalkGenerator.source(3, 20_000).unwrap();
        let b = limsup_estimate_source(src.as_mut(), &s, &cps).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.local_time, y.local_time);
            assert_eq!(x.statistic.to_bits(), y.statistic.to_bits());
        }
    }

    #[test]
    fn all_below_threshold_rejected() {
        let t = LazyWalkGenerator.trajectory(1, 20).unwrap();
        assert!(limsup_estimate(&t, &ScalingScheme::lazy_walk(), &[3, 8]).is_err());
    }
}
