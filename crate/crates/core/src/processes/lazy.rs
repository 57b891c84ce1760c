use std::sync::OnceLock;

use rand::{Rng, RngCore};

use super::{
    path_rng, IncrementLaw, IncrementSource, IntTrajectory, ProcessGenerator, ProcessKind,
};
use crate::{Error, Result};

/// i.i.d. walk with steps -1, 0, +1 at probabilities 1/4, 1/2, 1/4.
///
/// Each step is the difference of two fair bits, which is also the digit
/// difference process of two independent doubling-map orbits.
#[derive(Debug, Clone, Copy, Default)]
pub struct LazyWalkGenerator;

fn lazy_law() -> &'static IncrementLaw {
    static LAW: OnceLock<IncrementLaw> = OnceLock::new();
    LAW.get_or_init(|| IncrementLaw {
        offset: -1,
        probs: vec![0.25, 0.5, 0.25],
        tail_below: 0.0,
        tail_above: 0.0,
    })
}

impl ProcessGenerator for LazyWalkGenerator {
    fn kind(&self) -> ProcessKind {
        ProcessKind::LazyWalk
    }

    fn source(&self, seed: u64, _n: usize) -> Result<Box<dyn IncrementSource>> {
        Ok(Box::new(BitPairSource::new(path_rng(seed))))
    }

    fn increment_law(&self, _max_abs: usize) -> Option<IncrementLaw> {
        Some(lazy_law().clone())
    }
}

/// Emits `bit_a - bit_b` using 32 steps per 64-bit draw.
pub(crate) struct BitPairSource<R> {
    rng: R,
    word: u64,
    left: u32,
}

impl<R: RngCore> BitPairSource<R> {
    pub(crate) fn new(rng: R) -> Self {
        Self {
            rng,
            word: 0,
            left: 0,
        }
    }

    #[inline]
    pub(crate) fn next_step(&mut self) -> i64 {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 32;
        }
        let w = self.word;
        self.word >>= 2;
        self.left -= 1;
        (w & 1) as i64 - ((w >> 1) & 1) as i64
    }
}

impl<R: RngCore + Send> IncrementSource for BitPairSource<R> {
    fn fill(&mut self, out: &mut [i64]) -> Result<()> {
        for x in out.iter_mut() {
            *x = self.next_step();
        }
        Ok(())
    }
}

pub fn gen_lazy_walk<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<IntTrajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "trajectory length must be at least 1".into(),
        ));
    }
    let mut src = BitPairSource::new(&mut *rng);
    let increments = (0..n).map(|_| src.next_step()).collect();
    Ok(IntTrajectory::from_increments(
        increments,
        ProcessKind::LazyWalk,
        None,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_match_law() {
        let t = LazyWalkGenerator.trajectory(12345, 1_000_000).unwrap();
        let mut counts = [0usize; 3];
        for &x in t.increments() {
            counts[(x + 1) as usize] += 1;
        }
        let n = t.len() as f64;
        for (c, p) in counts.iter().zip([0.25, 0.5, 0.25]) {
            assert!((*c as f64 / n - p).abs() < 0.002);
        }
    }

    #[test]
    fn law_is_normalized() {
        let law = LazyWalkGenerator.increment_law(1).unwrap();
        assert_eq!(law.prob(0), 0.5);
        assert_eq!(law.prob(-1), 0.25);
        assert_eq!(law.prob(2), 0.0);
        assert_eq!(law.total_mass(), 1.0);
    }

    #[test]
    fn rejects_zero_length() {
        let mut rng = path_rng(0);
        assert!(gen_lazy_walk(0, &mut rng).is_err());
        assert_eq!(gen_lazy_walk(7, &mut rng).unwrap().len(), 7);
    }
}
