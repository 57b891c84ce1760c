use std::f64::consts::LN_2;

use num_complex::Complex64;

use super::{Branch, IntervalMap, MapKind};
use crate::numeric::NeumaierSum;
use crate::{Error, Result};

/// Continued-fraction digits above this are merged into one lumped branch.
pub const GAUSS_DIGIT_CUTOFF: u64 = 10_000;

/// Digits summed explicitly when forming the phase of the lumped Gauss tail.
const GAUSS_TAIL_TERMS: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct DoublingMap {
    branches: [Branch; 2],
}

impl DoublingMap {
    pub fn new() -> Self {
        let b = |k: u64| Branch {
            lo: k as f64 / 2.0,
            hi: (k + 1) as f64 / 2.0,
            digit: k,
            lumped: false,
        };
        Self {
            branches: [b(0), b(1)],
        }
    }
}

impl Default for DoublingMap {
    fn default() -> Self {
        Self::new()
    }
}

impl IntervalMap for DoublingMap {
    fn kind(&self) -> MapKind {
        MapKind::Doubling
    }

    fn branches(&self) -> &[Branch] {
        &self.branches
    }

    fn apply(&self, branch: &Branch, x: f64) -> f64 {
        2.0 * x - branch.digit as f64
    }

    fn branch_image(&self, _branch: &Branch) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn preimage_len(&self, _branch: &Branch, c: f64, d: f64) -> f64 {
        (d - c) / 2.0
    }

    fn density_average(&self, _c: f64, _d: f64) -> Option<f64> {
        Some(1.0)
    }
}

/// The Gauss map `x -> 1/x - floor(1/x)` with digit `floor(1/x)`.
///
/// Branch `k` is `[1/(k+1), 1/k]`. Branches beyond [`GAUSS_DIGIT_CUTOFF`]
/// form one lumped piece `[0, 1/(cutoff+1)]`; each of them maps onto
/// `[0, 1]` with nearly flat density, so the piece is spread uniformly.
#[derive(Debug, Clone)]
pub struct GaussMap {
    branches: Vec<Branch>,
    cutoff: u64,
}

impl GaussMap {
    pub fn new() -> Self {
        Self::with_cutoff(GAUSS_DIGIT_CUTOFF)
    }

    pub fn with_cutoff(cutoff: u64) -> Self {
        let mut branches = Vec::with_capacity(cutoff as usize + 1);
        branches.push(Branch {
            lo: 0.0,
            hi: 1.0 / (cutoff + 1) as f64,
            digit: cutoff + 1,
            lumped: true,
        });
        for k in (1..=cutoff).rev() {
            branches.push(Branch {
                lo: 1.0 / (k + 1) as f64,
                hi: 1.0 / k as f64,
                digit: k,
                lumped: false,
            });
        }
        Self { branches, cutoff }
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }
}

impl Default for GaussMap {
    fn default() -> Self {
        Self::new()
    }
}

impl IntervalMap for GaussMap {
    fn kind(&self) -> MapKind {
        MapKind::Gauss
    }

    fn branches(&self) -> &[Branch] {
        &self.branches
    }

    fn apply(&self, branch: &Branch, x: f64) -> f64 {
        1.0 / x - branch.digit as f64
    }

    fn branch_image(&self, _branch: &Branch) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn preimage_len(&self, branch: &Branch, c: f64, d: f64) -> f64 {
        // |1/(k+c) - 1/(k+d)| without the cancellation.
        let k = branch.digit as f64;
        (d - c) / ((k + c) * (k + d))
    }

    /// For the lumped tail, the Lebesgue-weighted mean of `e^{i t k}` over `k > cutoff`.
    fn phase(&self, branch: &Branch, t: f64) -> Complex64 {
        if !branch.lumped {
            return Complex64::from_polar(1.0, t * branch.digit as f64);
        }
        if t == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let (mut re, mut im) = (NeumaierSum::new(), NeumaierSum::new());
        let last = self.cutoff + GAUSS_TAIL_TERMS;
        for k in self.cutoff + 1..=last {
            let w = 1.0 / (k as f64 * (k + 1) as f64);
            let (s, c) = (t * k as f64).sin_cos();
            re.add(w * c);
            im.add(w * s);
        }
        // Remaining mass 1/(last+1) is given the phase of the last term.
        let rest = 1.0 / (last + 1) as f64;
        let (s, c) = (t * last as f64).sin_cos();
        re.add(rest * c);
        im.add(rest * s);
        Complex64::new(re.value(), im.value()) * (self.cutoff + 1) as f64
    }

    fn density_average(&self, c: f64, d: f64) -> Option<f64> {
        Some(((1.0 + d) / (1.0 + c)).ln() / LN_2 / (d - c))
    }
}

/// The beta-transformation `x -> beta x mod 1`, `beta > 1`.
#[derive(Debug, Clone)]
pub struct BetaMap {
    beta: f64,
    branches: Vec<Branch>,
}

impl BetaMap {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() || beta > 1e6 {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in (1, 1e6], got {beta}"
            )));
        }
        let mut branches = Vec::new();
        let mut k = 0u64;
        loop {
            let lo = k as f64 / beta;
            if lo >= 1.0 {
                break;
            }
            let hi = ((k + 1) as f64 / beta).min(1.0);
            branches.push(Branch {
                lo,
                hi,
                digit: k,
                lumped: false,
            });
            k += 1;
        }
        Ok(Self { beta, branches })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl IntervalMap for BetaMap {
    fn kind(&self) -> MapKind {
        MapKind::Beta { beta: self.beta }
    }

    fn branches(&self) -> &[Branch] {
        &self.branches
    }

    fn apply(&self, branch: &Branch, x: f64) -> f64 {
        self.beta * x - branch.digit as f64
    }

    fn branch_image(&self, branch: &Branch) -> (f64, f64) {
        if branch.hi < 1.0 {
            (0.0, 1.0)
        } else {
            (0.0, (self.beta - branch.digit as f64).min(1.0))
        }
    }

    fn preimage_len(&self, _branch: &Branch, c: f64, d: f64) -> f64 {
        (d - c) / self.beta
    }

    fn density_average(&self, _c: f64, _d: f64) -> Option<f64> {
        (self.beta.fract() == 0.0).then_some(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_branches_and_mass() {
        let g = GaussMap::new();
        assert_eq!(g.branches().len(), GAUSS_DIGIT_CUTOFF as usize + 1);
        let total: NeumaierSum = g.branches().iter().map(|b| b.len()).collect();
        assert!((total.value() - 1.0).abs() < 1e-14);
        let b3 = g.branches().iter().find(|b| b.digit == 3).unwrap();
        assert!((g.apply(b3, 0.3) - (1.0 / 0.3 - 3.0)).abs() < 1e-15);
        let whole = g.preimage_len(b3, 0.0, 1.0);
        assert!((whole - (1.0 / 3.0 - 0.25)).abs() < 1e-16);
    }

    #[test]
    fn gauss_tail_phase_is_a_mean() {
        let g = GaussMap::with_cutoff(100);
        let tail = g.branches()[0];
        assert!((g.phase(&tail, 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for &t in &[0.3, 1.0, 2.5] {
            assert!(g.phase(&tail, t).norm() <= 1.0 + 1e-12);
        }
        // At t = 2 pi every digit has phase 1.
        assert!(
            (g.phase(&tail, 2.0 * std::f64::consts::PI) - Complex64::new(1.0, 0.0)).norm() < 1e-9
        );
    }

    #[test]
    fn gauss_density_average_integrates_to_one() {
        let g = GaussMap::new();
        let m = 64;
        let s: f64 = (0..m)
            .map(|i| {
                g.density_average(i as f64 / m as f64, (i + 1) as f64 / m as f64)
                    .unwrap()
                    / m as f64
            })
            .sum();
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn beta_last_branch_is_partial() {
        let b = BetaMap::new(2.5).unwrap();
        assert_eq!(b.branches().len(), 3);
        let last = b.branches()[2];
        assert_eq!(last.lo, 0.8);
        assert!((b.branch_image(&last).1 - 0.5).abs() < 1e-15);
        assert!(BetaMap::new(1.0).is_err());
        assert_eq!(BetaMap::new(3.0).unwrap().branches().len(), 3);
    }
}
