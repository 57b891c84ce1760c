use rand::{Rng, RngCore};

use super::{path_rng, IncrementSource, IntTrajectory, PathRng, ProcessGenerator, ProcessKind};
use crate::{Error, Result};

/// Orbit steps discarded before digits are recorded (non-integer beta only).
pub const BETA_BURN_IN: usize = 1000;

/// Digit differences `[beta T^(i-1) x] - [beta T^(i-1) y]` of two independent
/// orbits of `T x = beta x mod 1`.
///
/// Integer `beta` is simulated exactly: the digits of a Lebesgue-uniform
/// point are i.i.d. uniform on `0..beta`, so the two digit streams are drawn
/// directly. Other values run the map in `f64` from a uniform start after a
/// burn-in; those orbits are distributional stand-ins, not true orbits.
#[derive(Debug, Clone, Copy)]
pub struct BetaPairGenerator {
    beta: f64,
}

impl BetaPairGenerator {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must exceed 1, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn integer_base(&self) -> Option<u64> {
        (self.beta.fract() == 0.0 && self.beta < 1e9).then_some(self.beta as u64)
    }
}

/// Digits `[beta T^(i-1) x]`, `i = 1..=n`, along the `f64` orbit of `x`.
pub fn beta_digits(x: f64, beta: f64, n: usize) -> Vec<i64> {
    let mut orbit = FloatOrbit { x, beta };
    (0..n).map(|_| orbit.step()).collect()
}

struct FloatOrbit {
    x: f64,
    beta: f64,
}

impl FloatOrbit {
    #[inline]
    fn step(&mut self) -> i64 {
        let y = self.beta * self.x;
        let digit = y.floor();
        self.x = y - digit;
        digit as i64
    }
}

struct IntegerDigits {
    base: u64,
    x: PathRng,
    y: PathRng,
}

impl IncrementSource for IntegerDigits {
    fn fill(&mut self, out: &mut [i64]) -> Result<()> {
        if self.base == 2 {
            // one bit per digit, 64 digits per draw
            let mut i = 0;
            while i < out.len() {
                let (mut a, mut b) = (self.x.next_u64(), self.y.next_u64());
                for slot in out[i..].iter_mut().take(64) {
                    *slot = (a & 1) as i64 - (b & 1) as i64;
                    a >>= 1;
                    b >>= 1;
                }
                i += 64;
            }
        } else {
            for slot in out.iter_mut() {
                let a = self.x.random_range(0..self.base) as i64;
                let b = self.y.random_range(0..self.base) as i64;
                *slot = a - b;
            }
        }
        Ok(())
    }
}

struct FloatPair {
    x: FloatOrbit,
    y: FloatOrbit,
    rng: PathRng,
}

impl FloatPair {
    fn new(beta: f64, mut rng: PathRng) -> Self {
        let mut x = FloatOrbit {
            x: rng.random(),
            beta,
        };
        let mut y = FloatOrbit {
            x: rng.random(),
            beta,
        };
        for _ in 0..BETA_BURN_IN {
            x.step();
            y.step();
        }
        Self { x, y, rng }
    }

    fn reseed_if_stuck(orbit: &mut FloatOrbit, rng: &mut PathRng) {
        // 0 is a fixed point that rounding can land on exactly.
        if orbit.x == 0.0 {
            orbit.x = rng.random();
        }
    }
}

impl IncrementSource for FloatPair {
    fn fill(&mut self, out: &mut [i64]) -> Result<()> {
        for slot in out.iter_mut() {
            *slot = self.x.step() - self.y.step();
            Self::reseed_if_stuck(&mut self.x, &mut self.rng);
            Self::reseed_if_stuck(&mut self.y, &mut self.rng);
        }
        Ok(())
    }
}

impl ProcessGenerator for BetaPairGenerator {
    fn kind(&self) -> ProcessKind {
        ProcessKind::BetaPair { beta: self.beta }
    }

    fn source(&self, seed: u64, _n: usize) -> Result<Box<dyn IncrementSource>> {
        match self.integer_base() {
            Some(base) => {
                let mut x = path_rng(seed);
                let mut y = path_rng(seed);
                x.set_stream(1);
                y.set_stream(2);
                Ok(Box::new(IntegerDigits { base, x, y }))
            }
            None => Ok(Box::new(FloatPair::new(self.beta, path_rng(seed)))),
        }
    }
}

pub fn gen_beta_pair<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<IntTrajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "trajectory length must be at least 1".into(),
        ));
    }
    let g = BetaPairGenerator::new(beta)?;
    let seed = rng.next_u64();
    g.trajectory(seed, n).map(|mut t| {
        t.seed = None;
        t
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    #[test]
    fn rejects_small_beta() {
        assert!(BetaPairGenerator::new(1.0).is_err());
        assert!(BetaPairGenerator::new(0.5).is_err());
        assert!(BetaPairGenerator::new(f64::NAN).is_err());
    }

    #[test]
    fn binary_digits_of_dyadic() {
        // 0.1101 in binary
        assert_eq!(beta_digits(0.8125, 2.0, 4), vec![1, 1, 0, 1]);
    }

    #[test]
    fn golden_orbits_are_admissible() {
        let mut rng = path_rng(11);
        for _ in 0..50 {
            let x: f64 = rng.random();
            let mut orbit = FloatOrbit { x, beta: GOLDEN };
            let mut prev = 0;
            for _ in 0..5000 {
                let d = orbit.step();
                assert!(d == 0 || d == 1);
                assert!(!(prev == 1 && d == 1), "consecutive ones");
                prev = d;
            }
        }
    }

    #[test]
    fn beta_two_matches_lazy_law() {
        let t = BetaPairGenerator::new(2.0)
            .unwrap()
            .trajectory(8, 400_000)
            .unwrap();
        let mut counts = [0usize; 3];
        for &x in t.increments() {
            counts[(x + 1) as usize] += 1;
        }
        let n = t.len() as f64;
        for (c, p) in counts.iter().zip([0.25, 0.5, 0.25]) {
            assert!((*c as f64 / n - p).abs() < 0.003);
        }
    }

    #[test]
    fn integer_base_three_digits() {
        let t = BetaPairGenerator::new(3.0)
            .unwrap()
            .trajectory(1, 10_000)
            .unwrap();
        assert!(t.increments().iter().all(|x| x.abs() <= 2));
    }

    #[test]
    fn float_pair_is_centered() {
        let t = BetaPairGenerator::new(GOLDEN)
            .unwrap()
            .trajectory(4, 200_000)
            .unwrap();
        assert!(t.increments().iter().all(|x| x.abs() <= 1));
        let m = t.partial_sums().last().copied().unwrap() as f64 / t.len() as f64;
        assert!(m.abs() < 0.01, "drift {m}");
    }
}
