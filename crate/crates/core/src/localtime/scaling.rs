use serde::{Deserialize, Serialize};

use crate::distributions::stable_density_at_zero;
use crate::numeric::NeumaierSum;
use crate::{Error, Result};

/// `B_n = scale_c * n^beta_exp` and `a_n = g0 * sum_{k<=n} 1/B_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingScheme {
    pub d: f64,
    pub beta_exp: f64,
    pub scale_c: f64,
    pub g0: f64,
}

impl ScalingScheme {
    pub fn new(d: f64, scale_c: f64, g0: f64) -> Result<Self> {
        if !(d > 1.0 && d <= 2.0) {
            return Err(Error::Domain(format!(
                "scaling exponent 1/d must lie in [1/2, 1); got d = {d}"
            )));
        }
        if !(scale_c > 0.0 && scale_c.is_finite()) {
            return Err(Error::Domain(format!(
                "scale constant must be positive, got {scale_c}"
            )));
        }
        if !(g0 > 0.0 && g0.is_finite()) {
            return Err(Error::Domain(format!("g(0) must be positive, got {g0}")));
        }
        Ok(Self {
            d,
            beta_exp: 1.0 / d,
            scale_c,
            g0,
        })
    }

    /// Finite-variance walk with increment variance `sigma2`: `B_n = sigma sqrt(n)`,
    /// `g0 = 1/sqrt(2 pi)`.
    pub fn normal(sigma2: f64) -> Result<Self> {
        Self::new(2.0, sigma2.sqrt(), stable_density_at_zero(2.0)?)
    }

    /// The lazy walk: variance 1/2.
    pub fn lazy_walk() -> Self {
        Self::normal(0.5).expect("valid constants")
    }

    /// `alpha = 1 - beta`, the Mittag-Leffler order.
    pub fn alpha(&self) -> f64 {
        1.0 - self.beta_exp
    }

    pub fn b(&self, k: u64) -> f64 {
        let k = k as f64;
        if self.beta_exp == 0.5 {
            self.scale_c * k.sqrt()
        } else {
            self.scale_c * k.powf(self.beta_exp)
        }
    }
}

/// `a_n` by direct summation.
pub fn normalizer(scheme: &ScalingScheme, n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "normalizer index must be at least 1".into(),
        ));
    }
    let s: NeumaierSum = (1..=n).map(|k| 1.0 / scheme.b(k)).collect();
    Ok(scheme.g0 * s.value())
}

/// Cached prefix sums of `a_n` for `1 <= n <= max_n`.
#[derive(Debug, Clone)]
pub struct Normalizer {
    scheme: ScalingScheme,
    prefix: Vec<f64>,
}

impl Normalizer {
    pub fn new(scheme: ScalingScheme, max_n: u64) -> Self {
        let mut acc = NeumaierSum::new();
        let prefix = (1..=max_n.max(1))
            .map(|k| {
                acc.add(1.0 / scheme.b(k));
                scheme.g0 * acc.value()
            })
            .collect();
        Self { scheme, prefix }
    }

    pub fn scheme(&self) -> &ScalingScheme {
        &self.scheme
    }

    pub fn max_n(&self) -> u64 {
        self.prefix.len() as u64
    }

    /// `a_n`; panics if `n` is 0 or beyond the cache.
    #[inline]
    pub fn a(&self, n: u64) -> f64 {
        self.prefix[(n - 1) as usize]
    }

    pub fn try_a(&self, n: u64) -> Result<f64> {
        if n < 1 || n > self.max_n() {
            return Err(Error::InvalidArgument(format!(
                "normalizer index {n} outside cached range 1..={}",
                self.max_n()
            )));
        }
        Ok(self.a(n))
    }

    /// `a` at a real argument `u >= 1`, read as `a_floor(u)`.
    pub fn a_real(&self, u: f64) -> Result<f64> {
        if !(u >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "normalizer argument {u} below 1"
            )));
        }
        self.try_a(u.floor() as u64)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.prefix
    }
}
