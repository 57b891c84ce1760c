use rayon::prelude::*;
use serde::Serialize;

use crate::harness::derive_path_seed;
use crate::localtime::{Normalizer, ScalingScheme};
use crate::processes::{IncrementSource, ProcessGenerator, ProcessKind};
use crate::{Error, Result};

const CHUNK: usize = 4096;

/// Streams `n` increments through `f(k, X_k, S_k)`, `k = 1..=n`.
pub fn for_each_step<F>(source: &mut dyn IncrementSource, n: usize, mut f: F) -> Result<()>
where
    F: FnMut(u64, i64, i64),
{
    let mut buf = vec![0i64; CHUNK.min(n.max(1))];
    let mut s = 0i64;
    let mut k = 0u64;
    let mut left = n;
    while left > 0 {
        let len = left.min(buf.len());
        let chunk = &mut buf[..len];
        source.fill(chunk)?;
        for &x in chunk.iter() {
            k += 1;
            s += x;
            f(k, x, s);
        }
        left -= len;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PathContext {
    pub index: usize,
    pub seed: u64,
}

/// Runs `f` on `paths` independent paths of length `n` in parallel.
///
/// Path `i` draws from `derive_path_seed(master_seed, i)` and results come
/// back in index order, so the output does not depend on the thread count.
pub fn map_paths<T, F>(
    generator: &dyn ProcessGenerator,
    n: usize,
    paths: usize,
    master_seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(PathContext, &mut dyn IncrementSource) -> Result<T> + Sync,
{
    (0..paths)
        .into_par_iter()
        .map(|index| {
            let seed = derive_path_seed(master_seed, index as u64);
            let mut source = generator.source(seed, n)?;
            f(PathContext { index, seed }, source.as_mut())
        })
        .collect()
}

/// Local times at 0 of an ensemble of paths, recorded at fixed checkpoints.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleResult {
    pub kind: ProcessKind,
    pub scheme: ScalingScheme,
    pub checkpoints: Vec<u64>,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    /// `local_times[path][j] = l_{checkpoints[j]}` for that path.
    pub local_times: Vec<Vec<u64>>,
    /// `X_1` of each path.
    pub first_increments: Vec<i64>,
    /// `a_n` at each checkpoint.
    pub normalizers: Vec<f64>,
}

impl EnsembleResult {
    pub fn simulate(
        generator: &dyn ProcessGenerator,
        scheme: ScalingScheme,
        checkpoints: &[u64],
        paths: usize,
        master_seed: u64,
    ) -> Result<Self> {
        if paths < 2 {
            return Err(Error::InvalidArgument(
                "an ensemble needs at least 2 paths".into(),
            ));
        }
        let mut checkpoints = checkpoints.to_vec();
        checkpoints.sort_unstable();
        checkpoints.dedup();
        if checkpoints.first().is_none_or(|&c| c == 0) {
            return Err(Error::InvalidArgument(
                "checkpoints must be positive and non-empty".into(),
            ));
        }
        let n = *checkpoints.last().unwrap() as usize;
        let norm = Normalizer::new(scheme, n as u64);
        let normalizers = checkpoints.iter().map(|&c| norm.a(c)).collect();

        let per_path = map_paths(generator, n, paths, master_seed, |ctx, src| {
            let mut ell = 0u64;
            let mut next = 0usize;
            let mut rec = Vec::with_capacity(checkpoints.len());
            let mut first = 0i64;
            for_each_step(src, n, |k, x, s| {
                if k == 1 {
                    first = x;
                }
                ell += (s == 0) as u64;
                if k == checkpoints[next] {
                    rec.push(ell);
                    next = (next + 1).min(checkpoints.len() - 1);
                }
            })?;
            Ok((ctx.seed, rec, first))
        })?;

        let mut seeds = Vec::with_capacity(paths);
        let mut local_times = Vec::with_capacity(paths);
        let mut first_increments = Vec::with_capacity(paths);
        for (seed, rec, first) in per_path {
            seeds.push(seed);
            local_times.push(rec);
            first_increments.push(first);
        }
        Ok(Self {
            kind: generator.kind(),
            scheme,
            checkpoints,
            master_seed,
            seeds,
            local_times,
            first_increments,
            normalizers,
        })
    }

    pub fn path_count(&self) -> usize {
        self.local_times.len()
    }

    pub fn checkpoint_index(&self, n: u64) -> Option<usize> {
        self.checkpoints.iter().position(|&c| c == n)
    }

    /// `l_n / a_n` across paths at checkpoint `j`.
    pub fn scaled(&self, j: usize) -> Vec<f64> {
        let a = self.normalizers[j];
        self.local_times.iter().map(|r| r[j] as f64 / a).collect()
    }

    /// Raw `l_n` across paths at checkpoint `j`.
    pub fn raw(&self, j: usize) -> Vec<u64> {
        self.local_times.iter().map(|r| r[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localtime::local_time;
    use crate::processes::LazyWalkGenerator;

    #[test]
    fn matches_materialized_paths() {
        let scheme = ScalingScheme::lazy_walk();
        let e =
            EnsembleResult::simulate(&LazyWalkGenerator, scheme, &[10, 100, 1000], 8, 3).unwrap();
        for (i, seed) in e.seeds.iter().enumerate() {
            let t = LazyWalkGenerator.trajectory(*seed, 1000).unwrap();
            let p = local_time(&t, 0);
            assert_eq!(e.local_times[i], vec![p.at(10), p.at(100), p.at(1000)]);
            assert_eq!(e.first_increments[i], t.increments()[0]);
        }
        assert!(e.scaled(2).iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let scheme = ScalingScheme::lazy_walk();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    EnsembleResult::simulate(&LazyWalkGenerator, scheme, &[500], 64, 9).unwrap()
                })
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a.local_times, b.local_times);
        assert_eq!(a.seeds, b.seeds);
    }

    #[test]
    fn needs_two_paths() {
        let scheme = ScalingScheme::lazy_walk();
        assert!(EnsembleResult::simulate(&LazyWalkGenerator, scheme, &[10], 1, 0).is_err());
        assert!(EnsembleResult::simulate(&LazyWalkGenerator, scheme, &[], 4, 0).is_err());
    }
}
