use rayon::prelude::*;
use serde::Serialize;

use super::ensemble::{for_each_step, map_paths};
use super::{BoundedFn, Verdict};
use crate::distributions::MittagLeffler;
use crate::harness::derive_path_seed;
use crate::localtime::{Normalizer, ScalingScheme};
use crate::numeric::{mean, variance, NeumaierSum, Z95};
use crate::processes::{IncrementSource, IntTrajectory, ProcessGenerator};
use crate::{Error, Result};

/// Paths simulated per parallel batch in [`averaged_version`].
const BATCH: usize = 64;

/// Online logarithmic average `(1/log N) sum_{k<=N} (1/k) 1{u_k <= x}` over a grid of `x`.
#[derive(Debug, Clone)]
pub struct LogAverager {
    x_grid: Vec<f64>,
    sums: Vec<NeumaierSum>,
    k: u64,
}

impl LogAverager {
    pub fn new(x_grid: &[f64]) -> Result<Self> {
        check_grid(x_grid)?;
        Ok(Self {
            x_grid: x_grid.to_vec(),
            sums: vec![NeumaierSum::new(); x_grid.len()],
            k: 0,
        })
    }

    /// Feeds the next statistic `u_k`.
    #[inline]
    pub fn push(&mut self, u: f64) {
        self.k += 1;
        let w = 1.0 / self.k as f64;
        for (s, &x) in self.sums.iter_mut().zip(&self.x_grid) {
            if u <= x {
                s.add(w);
            }
        }
    }

    /// Feeds `P(u_k <= x_j)` for every grid point instead of an indicator.
    pub fn push_probabilities(&mut self, probs: &[f64]) {
        debug_assert_eq!(probs.len(), self.sums.len());
        self.k += 1;
        let w = 1.0 / self.k as f64;
        for (s, &p) in self.sums.iter_mut().zip(probs) {
            s.add(w * p);
        }
    }

    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    /// Current averages, divided by `log k`; NaN before two steps.
    pub fn values(&self) -> Vec<f64> {
        let l = (self.k as f64).ln();
        self.sums
            .iter()
            .map(|s| if self.k >= 2 { s.value() / l } else { f64::NAN })
            .collect()
    }
}

fn check_grid(x_grid: &[f64]) -> Result<()> {
    if x_grid.is_empty() || x_grid.len() > 250 {
        return Err(Error::InvalidArgument(
            "x grid must hold 1..=250 points".into(),
        ));
    }
    if x_grid.iter().any(|x| x.is_nan()) || x_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "x grid must be sorted and free of NaN".into(),
        ));
    }
    Ok(())
}

fn reference(scheme: &ScalingScheme, x_grid: &[f64]) -> Result<Vec<f64>> {
    let ml = MittagLeffler::new(scheme.alpha())?;
    Ok(x_grid.iter().map(|&x| ml.cdf(x)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ASCLTReport {
    pub x_grid: Vec<f64>,
    pub log_averages: Vec<f64>,
    pub n: u64,
    /// Mittag-Leffler distribution function at each grid point.
    pub reference: Vec<f64>,
    pub abs_errors: Vec<f64>,
}

impl ASCLTReport {
    fn new(scheme: &ScalingScheme, avg: &LogAverager) -> Result<Self> {
        let reference = reference(scheme, avg.x_grid())?;
        let log_averages = avg.values();
        let abs_errors = log_averages
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(Self {
            x_grid: avg.x_grid().to_vec(),
            log_averages,
            n: avg.steps(),
            reference,
            abs_errors,
        })
    }

    pub fn max_abs_error(&self) -> f64 {
        self.abs_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn require_horizon(n: u64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument("log averages need N >= 2".into()));
    }
    Ok(())
}

pub fn asclt_log_average(
    traj: &IntTrajectory,
    scheme: &ScalingScheme,
    x_grid: &[f64],
) -> Result<ASCLTReport> {
    let n = traj.len() as u64;
    require_horizon(n)?;
    let norm = Normalizer::new(*scheme, n);
    let mut avg = LogAverager::new(x_grid)?;
    let mut ell = 0u64;
    for (&s, &a) in traj.partial_sums().iter().zip(norm.as_slice()) {
        ell += (s == 0) as u64;
        avg.push(ell as f64 / a);
    }
    ASCLTReport::new(scheme, &avg)
}

/// Streaming variant of [`asclt_log_average`] over the first `n` increments of `source`.
pub fn asclt_log_average_source(
    source: &mut dyn IncrementSource,
    n: u64,
    scheme: &ScalingScheme,
    x_grid: &[f64],
) -> Result<ASCLTReport> {
    require_horizon(n)?;
    let norm = Normalizer::new(*scheme, n);
    let a = norm.as_slice();
    let mut avg = LogAverager::new(x_grid)?;
    let mut ell = 0u64;
    for_each_step(source, n as usize, |k, _, s| {
        ell += (s == 0) as u64;
        avg.push(ell as f64 / a[(k - 1) as usize]);
    })?;
    ASCLTReport::new(scheme, &avg)
}

#[derive(Debug, Clone, Serialize)]
pub struct AveragedReport {
    pub x_grid: Vec<f64>,
    pub log_averages: Vec<f64>,
    pub n: u64,
    pub paths: usize,
    pub reference: Vec<f64>,
    pub abs_errors: Vec<f64>,
}

impl AveragedReport {
    pub fn max_abs_error(&self) -> f64 {
        self.abs_errors.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-step histogram over grid cells: cell `b` holds paths with
/// `x_{b-1} < u_k <= x_b`.
struct CellCounts {
    cells: usize,
    counts: Vec<u32>,
}

impl CellCounts {
    fn new(n: usize, grid_len: usize) -> Self {
        Self {
            cells: grid_len + 1,
            counts: vec![0; n * (grid_len + 1)],
        }
    }

    fn add(&mut self, cells_of_path: &[u8]) {
        for (k, &b) in cells_of_path.iter().enumerate() {
            self.counts[k * self.cells + b as usize] += 1;
        }
    }

    fn finish(
        &self,
        scheme: &ScalingScheme,
        x_grid: &[f64],
        n: u64,
        paths: usize,
    ) -> Result<AveragedReport> {
        let g = x_grid.len();
        let mut avg = LogAverager::new(x_grid)?;
        let mut probs = vec![0.0; g];
        for row in self.counts.chunks_exact(self.cells) {
            let mut below = 0u64;
            for (j, p) in probs.iter_mut().enumerate() {
                below += row[j] as u64;
                *p = below as f64 / paths as f64;
            }
            avg.push_probabilities(&probs);
        }
        let reference = reference(scheme, x_grid)?;
        let log_averages = avg.values();
        let abs_errors = log_averages
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(AveragedReport {
            x_grid: x_grid.to_vec(),
            log_averages,
            n,
            paths,
            reference,
            abs_errors,
        })
    }
}

#[inline]
fn cell_of(x_grid: &[f64], u: f64) -> u8 {
    x_grid.partition_point(|&x| x < u) as u8
}

/// Log average of the across-path probabilities `P(l_k / a_k <= x)`.
///
/// Every `k` up to `n` is kept: the ensemble is reduced to per-step counts,
/// so no subsampling is needed and the result is exact for the ensemble.
pub fn averaged_version(
    generator: &dyn ProcessGenerator,
    scheme: &ScalingScheme,
    x_grid: &[f64],
    n: u64,
    paths: usize,
    master_seed: u64,
) -> Result<AveragedReport> {
    check_grid(x_grid)?;
    require_horizon(n)?;
    if paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    let norm = Normalizer::new(*scheme, n);
    let a = norm.as_slice();
    let mut counts = CellCounts::new(n as usize, x_grid.len());
    let mut start = 0;
    while start < paths {
        let end = (start + BATCH).min(paths);
        let batch: Vec<Vec<u8>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut src =
                    generator.source(derive_path_seed(master_seed, i as u64), n as usize)?;
                let mut cells = Vec::with_capacity(n as usize);
                let mut ell = 0u64;
                for_each_step(src.as_mut(), n as usize, |k, _, s| {
                    ell += (s == 0) as u64;
                    cells.push(cell_of(x_grid, ell as f64 / a[(k - 1) as usize]));
                })?;
                Ok(cells)
            })
            .collect::<Result<_>>()?;
        for cells in &batch {
            counts.add(cells);
        }
        start = end;
    }
    counts.finish(scheme, x_grid, n, paths)
}

/// [`averaged_version`] over explicitly given trajectories of equal length.
pub fn averaged_version_of(
    trajectories: &[IntTrajectory],
    scheme: &ScalingScheme,
    x_grid: &[f64],
) -> Result<AveragedReport> {
    check_grid(x_grid)?;
    let n = trajectories.first().map_or(0, |t| t.len());
    if trajectories.iter().any(|t| t.len() != n) {
        return Err(Error::InvalidArgument(
            "trajectories differ in length".into(),
        ));
    }
    require_horizon(n as u64)?;
    let norm = Normalizer::new(*scheme, n as u64);
    let mut counts = CellCounts::new(n, x_grid.len());
    for t in trajectories {
        let mut ell = 0u64;
        let cells: Vec<u8> = t
            .partial_sums()
            .iter()
            .zip(norm.as_slice())
            .map(|(&s, &a)| {
                ell += (s == 0) as u64;
                cell_of(x_grid, ell as f64 / a)
            })
            .collect();
        counts.add(&cells);
    }
    counts.finish(scheme, x_grid, n as u64, trajectories.len())
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceProbeReport {
    pub g: BoundedFn,
    pub n_list: Vec<u64>,
    pub paths: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Estimated `Var(N_i) - Var(N_{i+1})` with its standard error, paired over paths.
    pub decreases: Vec<f64>,
    pub decrease_std_errors: Vec<f64>,
    pub verdict: Verdict,
}

/// Across-path variance of `(1/log N) sum_{k<=N} (1/k) g(l_k / a_k)` at each `N`.
///
/// Passes when every step down the list lowers the variance by more than
/// 1.96 paired standard errors (or the variance is identically zero).
pub fn asclt_variance_probe(
    generator: &dyn ProcessGenerator,
    scheme: &ScalingScheme,
    g: BoundedFn,
    n_list: &[u64],
    paths: usize,
    master_seed: u64,
) -> Result<VarianceProbeReport> {
    g.require_bounded("g")?;
    if paths < 2 {
        return Err(Error::InvalidArgument(
            "variance probe needs at least 2 paths".into(),
        ));
    }
    if n_list.len() < 3 || n_list[0] < 2 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "N list must be strictly increasing with at least 3 entries, all >= 2".into(),
        ));
    }
    let n = *n_list.last().unwrap();
    let norm = Normalizer::new(*scheme, n);
    let a = norm.as_slice();
    let per_path = map_paths(generator, n as usize, paths, master_seed, |_, src| {
        let mut acc = NeumaierSum::new();
        let mut ell = 0u64;
        let mut next = 0;
        let mut out = Vec::with_capacity(n_list.len());
        for_each_step(src, n as usize, |k, _, s| {
            ell += (s == 0) as u64;
            acc.add(g.eval(ell as f64 / a[(k - 1) as usize]) / k as f64);
            if k == n_list[next] {
                out.push(acc.value() / (k as f64).ln());
                next = (next + 1).min(n_list.len() - 1);
            }
        })?;
        Ok(out)
    })?;

    let columns: Vec<Vec<f64>> = (0..n_list.len())
        .map(|j| per_path.iter().map(|p| p[j]).collect())
        .collect();
    let means: Vec<f64> = columns.iter().map(|c| mean(c)).collect();
    let variances: Vec<f64> = columns.iter().map(|c| variance(c)).collect();
    let pf = paths as f64;
    let mut decreases = Vec::new();
    let mut decrease_std_errors = Vec::new();
    let mut ok = true;
    for i in 0..n_list.len() - 1 {
        let d: Vec<f64> = columns[i]
            .iter()
            .zip(&columns[i + 1])
            .map(|(x, y)| (x - means[i]).powi(2) - (y - means[i + 1]).powi(2))
            .collect();
        let dec = variances[i] - variances[i + 1];
        let se = (variance(&d) / pf).sqrt() * pf / (pf - 1.0);
        let zero = variances[i] == 0.0 && variances[i + 1] == 0.0;
        ok &= zero || (dec > 0.0 && dec > Z95 * se);
        decreases.push(dec);
        decrease_std_errors.push(se);
    }
    Ok(VarianceProbeReport {
        g,
        n_list: n_list.to_vec(),
        paths,
        means,
        variances,
        decreases,
        decrease_std_errors,
        verdict: Verdict::from_bool(ok),
    })
}
