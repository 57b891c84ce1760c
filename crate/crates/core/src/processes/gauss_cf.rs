use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore};

use super::{path_rng, IncrementSource, IntTrajectory, ProcessGenerator, ProcessKind};
use crate::{Error, Result};

/// Pair of independent Gauss-distributed points; increments are differences
/// of their continued-fraction digits.
///
/// Points are exact dyadic intervals of width `2^-P` with `P = 4n + 128`.
/// A digit is emitted only when both interval endpoints agree on it, so
/// every point of the interval (and hence the sampled real) shares it.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussCfGenerator;

fn precision_bits(n: usize) -> u64 {
    4 * n as u64 + 128
}

fn random_bits<R: RngCore + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    let words = bits.div_ceil(32) as usize;
    let mut digits: Vec<u32> = (0..words).map(|_| rng.next_u32()).collect();
    let spare = words as u64 * 32 - bits;
    if spare > 0 {
        if let Some(top) = digits.last_mut() {
            *top >>= spare;
        }
    }
    BigUint::from_slice(&digits)
}

/// Draws the numerator `M` of a dyadic cell `[M, M+1] / 2^bits` whose
/// location is Gauss-distributed, by rejection from the uniform law with
/// acceptance probability `1 / (1 + x)`.
fn gauss_cell<R: RngCore + ?Sized>(rng: &mut R, bits: u64) -> BigUint {
    let scale = BigUint::one() << bits;
    let scale_sq = BigUint::one() << (2 * bits);
    loop {
        let m = random_bits(rng, bits);
        let u = random_bits(rng, bits);
        if &u * (&scale + &m) < scale_sq {
            return m;
        }
    }
}

/// Continued-fraction digits of the rational `p / q` in `(0, 1]`, at most `max` of them.
pub fn cf_digits(p: &BigUint, q: &BigUint, max: usize) -> Vec<BigUint> {
    let mut out = Vec::new();
    let (mut p, mut q) = (p.clone(), q.clone());
    while out.len() < max && !p.is_zero() {
        let (c, r) = q.div_rem(&p);
        out.push(c);
        q = p;
        p = r;
    }
    out
}

/// First `n` continued-fraction digits shared by every point of `[lo, hi] / denom`.
///
/// Fails if the endpoints disagree before `n + 1` digits, i.e. the
/// interval is too wide to pin down `n` digits.
pub fn gauss_digits_of_interval(
    lo: &BigUint,
    hi: &BigUint,
    denom: &BigUint,
    n: usize,
) -> Result<Vec<u64>> {
    if lo.is_zero() {
        return Err(Error::Precision(
            "interval touches 0, digits undefined".into(),
        ));
    }
    let a = cf_digits(lo, denom, n + 1);
    let b = cf_digits(hi, denom, n + 1);
    let agreed = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    if a.len() <= n || b.len() <= n || agreed < n {
        return Err(Error::Precision(format!(
            "only {} of {} continued-fraction digits are determined",
            agreed.min(n),
            n
        )));
    }
    a[..n]
        .iter()
        .map(|c| {
            c.to_u64()
                .filter(|&v| v <= i64::MAX as u64)
                .ok_or_else(|| Error::Precision("continued-fraction digit exceeds 63 bits".into()))
        })
        .collect()
}

/// `n` exact Gauss-map digits of a Gauss-distributed point.
pub fn gauss_point_digits<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<u64>> {
    let bits = precision_bits(n);
    let m = gauss_cell(rng, bits);
    let denom = BigUint::one() << bits;
    let hi = &m + 1u32;
    gauss_digits_of_interval(&m, &hi, &denom, n)
}

pub fn gen_cf_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<IntTrajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "trajectory length must be at least 1".into(),
        ));
    }
    let increments = pair_increments(n, rng)?;
    Ok(IntTrajectory::from_increments(
        increments,
        ProcessKind::GaussCfPair,
        None,
    ))
}

fn pair_increments<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<i64>> {
    let x = gauss_point_digits(n, rng)?;
    let y = gauss_point_digits(n, rng)?;
    Ok(x.iter()
        .zip(&y)
        .map(|(&a, &b)| a as i64 - b as i64)
        .collect())
}

struct Precomputed {
    increments: Vec<i64>,
    pos: usize,
}

impl IncrementSource for Precomputed {
    fn fill(&mut self, out: &mut [i64]) -> Result<()> {
        let end = self.pos + out.len();
        if end > self.increments.len() {
            return Err(Error::Precision(format!(
                "requested {} digits from a source sized for {}",
                end,
                self.increments.len()
            )));
        }
        out.copy_from_slice(&self.increments[self.pos..end]);
        self.pos = end;
        Ok(())
    }
}

impl ProcessGenerator for GaussCfGenerator {
    fn kind(&self) -> ProcessKind {
        ProcessKind::GaussCfPair
    }

    fn source(&self, seed: u64, n: usize) -> Result<Box<dyn IncrementSource>> {
        let mut rng = path_rng(seed);
        Ok(Box::new(Precomputed {
            increments: pair_increments(n, &mut rng)?,
            pos: 0,
        }))
    }
}
