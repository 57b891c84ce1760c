use std::sync::Arc;

use rand::Rng;

use super::{
    path_rng, IncrementLaw, IncrementSource, IntTrajectory, PathRng, ProcessGenerator, ProcessKind,
};
use crate::numeric::NeumaierSum;
use crate::{Error, Result};

/// Largest `|X|` held in the inverse-CDF table.
pub const HEAVY_TAIL_CUTOFF: usize = 1_000_000;

/// Symmetric integer walk with `P(X = +-k) = k^-(1+d) / (2 Z)`, `k >= 1`.
///
/// `Z` is the zeta sum at `1 + d`, taken over the table with an
/// Euler-Maclaurin remainder for `k > HEAVY_TAIL_CUTOFF`. Beyond the table
/// magnitudes are drawn from the continuous power-law tail.
#[derive(Debug, Clone)]
pub struct HeavyTailGenerator {
    d: f64,
    table: Arc<TailTable>,
}

#[derive(Debug)]
struct TailTable {
    /// `cdf[k - 1] = P(|X| <= k)`.
    cdf: Vec<f64>,
    /// `P(|X| = k)` for `k <= cutoff`.
    pmf: Vec<f64>,
}

fn zeta_tail(s: f64, k: f64) -> f64 {
    // sum_{j > k} j^-s via Euler-Maclaurin
    k.powf(1.0 - s) / (s - 1.0) - 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
}

impl HeavyTailGenerator {
    pub fn new(d: f64) -> Result<Self> {
        if !(d > 1.0 && d <= 2.0) {
            return Err(Error::Domain(format!(
                "heavy-tail walk needs d in (1, 2], got {d}"
            )));
        }
        let s = 1.0 + d;
        let k_max = HEAVY_TAIL_CUTOFF;
        let weights: Vec<f64> = (1..=k_max).map(|k| (k as f64).powf(-s)).collect();
        let head: NeumaierSum = weights.iter().rev().copied().collect();
        let z = head.value() + zeta_tail(s, k_max as f64);
        let pmf: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let mut acc = NeumaierSum::new();
        let cdf = pmf
            .iter()
            .map(|p| {
                acc.add(*p);
                acc.value()
            })
            .collect();
        Ok(Self {
            d,
            table: Arc::new(TailTable { cdf, pmf }),
        })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// `P(|X| = k)`.
    pub fn abs_prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else if k <= HEAVY_TAIL_CUTOFF {
            self.table.pmf[k - 1]
        } else {
            let t = self.table.tail_mass();
            t * ((k as f64 - 0.5) / HEAVY_TAIL_CUTOFF as f64).powf(-self.d)
                - t * ((k as f64 + 0.5) / HEAVY_TAIL_CUTOFF as f64).powf(-self.d)
        }
    }

    /// `P(|X| > k)`.
    pub fn abs_tail(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        if k >= HEAVY_TAIL_CUTOFF {
            return self.table.tail_mass() * (k as f64 / HEAVY_TAIL_CUTOFF as f64).powf(-self.d);
        }
        // Sum the small tail directly rather than subtracting from 1.
        let inner: NeumaierSum = self.table.pmf[k..].iter().rev().copied().collect();
        inner.value() + self.table.tail_mass()
    }

    /// Variance of the increment law restricted to the table.
    pub fn table_variance(&self) -> f64 {
        self.table
            .pmf
            .iter()
            .enumerate()
            .rev()
            .map(|(i, p)| {
                let k = (i + 1) as f64;
                k * k * p
            })
            .collect::<NeumaierSum>()
            .value()
    }

    fn sample_abs<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let cdf = &self.table.cdf;
        if u < *cdf.last().unwrap() {
            (cdf.partition_point(|&c| c <= u) + 1) as i64
        } else {
            let v = 1.0 - rng.random::<f64>();
            let m = (HEAVY_TAIL_CUTOFF as f64 * v.powf(-1.0 / self.d)).ceil();
            m.clamp(HEAVY_TAIL_CUTOFF as f64 + 1.0, i64::MAX as f64 / 4.0) as i64
        }
    }
}

impl TailTable {
    fn tail_mass(&self) -> f64 {
        1.0 - self.cdf.last().unwrap()
    }
}

struct HeavyTailSource {
    generator: HeavyTailGenerator,
    rng: PathRng,
}

impl IncrementSource for HeavyTailSource {
    fn fill(&mut self, out: &mut [i64]) -> Result<()> {
        for x in out.iter_mut() {
            let k = self.generator.sample_abs(&mut self.rng);
            *x = if self.rng.random::<bool>() { k } else { -k };
        }
        Ok(())
    }
}

impl ProcessGenerator for HeavyTailGenerator {
    fn kind(&self) -> ProcessKind {
        ProcessKind::HeavyTailWalk { d: self.d }
    }

    fn source(&self, seed: u64, _n: usize) -> Result<Box<dyn IncrementSource>> {
        Ok(Box::new(HeavyTailSource {
            generator: self.clone(),
            rng: path_rng(seed),
        }))
    }

    fn increment_law(&self, max_abs: usize) -> Option<IncrementLaw> {
        let r = max_abs.max(1);
        let mut probs = vec![0.0; 2 * r + 1];
        for k in 1..=r {
            let p = 0.5 * self.abs_prob(k);
            probs[r + k] = p;
            probs[r - k] = p;
        }
        let tail = 0.5 * self.abs_tail(r);
        Some(IncrementLaw {
            offset: -(r as i64),
            probs,
            tail_below: tail,
            tail_above: tail,
        })
    }
}

pub fn gen_heavy_tail_walk<R: Rng + ?Sized>(
    n: usize,
    d: f64,
    rng: &mut R,
) -> Result<IntTrajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "trajectory length must be at least 1".into(),
        ));
    }
    let g = HeavyTailGenerator::new(d)?;
    let increments = (0..n)
        .map(|_| {
            let k = g.sample_abs(rng);
            if rng.random::<bool>() {
                k
            } else {
                -k
            }
        })
        .collect();
    Ok(IntTrajectory::from_increments(increments, g.kind(), None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain() {
        assert!(HeavyTailGenerator::new(1.0).is_err());
        assert!(HeavyTailGenerator::new(2.1).is_err());
        assert!(HeavyTailGenerator::new(2.0).is_ok());
    }

    #[test]
    fn law_is_normalized_and_symmetric() {
        let g = HeavyTailGenerator::new(1.5).unwrap();
        let law = g.increment_law(50).unwrap();
        assert!((law.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(law.prob(0), 0.0);
        for k in 1..=50 {
            assert_eq!(law.prob(k), law.prob(-k));
        }
        // ratio of consecutive probabilities follows the power law
        let r = law.prob(2) / law.prob(1);
        assert!((r - 2f64.powf(-2.5)).abs() < 1e-14);
    }

    #[test]
    fn d2_variance_is_truncated_log_sum() {
        // sum_k k^2 * k^-3 / Z = H_K / zeta(3) up to the table cutoff
        let g = HeavyTailGenerator::new(2.0).unwrap();
        let direct: NeumaierSum = (1..=HEAVY_TAIL_CUTOFF)
            .rev()
            .map(|k| 1.0 / k as f64)
            .collect();
        let zeta3 = 1.202_056_903_159_594_3;
        assert!((g.table_variance() - direct.value() / zeta3).abs() < 1e-9);
    }

    #[test]
    fn tail_ratio_stable() {
        let g = HeavyTailGenerator::new(1.5).unwrap();
        let ratios: Vec<f64> = [10usize, 100, 1000]
            .iter()
            .map(|&k| g.abs_tail(k) / (k as f64).powf(-1.5))
            .collect();
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(hi / lo < 1.1, "{ratios:?}");

        let t = g.trajectory(3, 1_000_000).unwrap();
        for &k in &[10i64, 100] {
            let emp = t.increments().iter().filter(|x| x.abs() > k).count() as f64 / t.len() as f64;
            let want = g.abs_tail(k as usize);
            assert!(
                (emp / want - 1.0).abs() < 0.15,
                "k={k} emp={emp} want={want}"
            );
        }
    }

    #[test]
    fn symmetric_mean() {
        let g = HeavyTailGenerator::new(1.8).unwrap();
        let t = g.trajectory(17, 1_000_000).unwrap();
        let xs: Vec<f64> = t.increments().iter().map(|&x| x as f64).collect();
        let m = crate::numeric::mean(&xs);
        let se = (crate::numeric::variance(&xs) / xs.len() as f64).sqrt();
        assert!(m.abs() < 3.0 * se, "mean {m} se {se}");
    }
}
