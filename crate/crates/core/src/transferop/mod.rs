//! Ulam discretization of transfer operators of piecewise-monotone interval
//! maps, twisted by a digit function `phi`, and the spectral checks built on
//! it.
//!
//! `P_t f = P_T(e^{i t phi} f)` is approximated by a sparse complex matrix on
//! `m` uniform cells. Densities are row vectors and the matrix acts on the
//! right, so at `t = 0` it is row-stochastic.

mod maps;
mod spectral;
mod ulam;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use maps::{BetaMap, DoublingMap, GaussMap, GAUSS_DIGIT_CUTOFF};
pub use spectral::{
    density_check, eigenvalue_curve_check, leading_eigenvalue, resolution_doubling,
    right_eigenvector, second_eigenvalue_modulus, symmetric_grid, tail_norm_check, write_curve_csv,
    DensityReport, Eigenpair, ResolutionReport, SecondEigenvalue, SpectralPoint, SpectralSummary,
    TailNormReport, POWER_ITERATION_CAP, POWER_ITERATION_TOL,
};
pub use ulam::{perturbed_matrix, ulam_discretize, UlamOperator};

/// One monotone branch of an interval map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    /// Value of `phi` on the branch.
    pub digit: u64,
    /// The branch stands for many small branches whose union is spread
    /// uniformly over `[0, 1]`.
    pub lumped: bool,
}

impl Branch {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

/// A piecewise-monotone map of `[0, 1]` with closed-form inverse branches.
pub trait IntervalMap: Send + Sync + fmt::Debug {
    fn kind(&self) -> MapKind;

    /// Branches sorted by `lo`, tiling `[0, 1]`.
    fn branches(&self) -> &[Branch];

    /// `T` on `branch`.
    fn apply(&self, branch: &Branch, x: f64) -> f64;

    /// Exact image of the whole branch.
    fn branch_image(&self, branch: &Branch) -> (f64, f64);

    /// Lebesgue measure of `{x in branch : T x in [c, d]}` for `[c, d]` inside the image.
    fn preimage_len(&self, branch: &Branch, c: f64, d: f64) -> f64;

    /// `e^{i t phi}` on the branch.
    fn phase(&self, branch: &Branch, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t * branch.digit as f64)
    }

    /// Average of the invariant density over `[c, d]`, when known in closed form.
    fn density_average(&self, _c: f64, _d: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "kebab-case")]
pub enum MapKind {
    /// `x -> 2x mod 1`, `phi` = first binary digit.
    Doubling,
    /// `x -> 1/x mod 1`, `phi` = continued-fraction digit.
    Gauss,
    /// `x -> beta x mod 1`, `phi = floor(beta x)`.
    Beta { beta: f64 },
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::Doubling => "doubling",
            MapKind::Gauss => "gauss",
            MapKind::Beta { .. } => "beta",
        }
    }

    pub fn build(&self) -> Result<Arc<dyn IntervalMap>> {
        MapRegistry::builtin().build(self)
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKind::Beta { beta } => write!(f, "beta({beta})"),
            other => f.write_str(other.name()),
        }
    }
}

type MapConstructor = fn(Option<f64>) -> Result<Arc<dyn IntervalMap>>;

/// Interval maps by name.
pub struct MapRegistry {
    ctors: BTreeMap<&'static str, MapConstructor>,
}

impl MapRegistry {
    pub fn builtin() -> Self {
        let mut r = Self {
            ctors: BTreeMap::new(),
        };
        r.register("doubling", |_| Ok(Arc::new(DoublingMap::new())));
        r.register("gauss", |_| Ok(Arc::new(GaussMap::new())));
        r.register("beta", |beta| {
            let beta = beta
                .ok_or_else(|| Error::InvalidArgument("beta map needs a beta parameter".into()))?;
            Ok(Arc::new(BetaMap::new(beta)?))
        });
        r
    }

    pub fn register(&mut self, name: &'static str, ctor: MapConstructor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ctors.keys().copied().collect()
    }

    pub fn create(&self, name: &str, beta: Option<f64>) -> Result<Arc<dyn IntervalMap>> {
        let ctor = self.ctors.get(name).ok_or_else(|| Error::UnknownName {
            kind: "interval map",
            name: name.to_string(),
            known: self.names().join(", "),
        })?;
        ctor(beta)
    }

    pub fn build(&self, kind: &MapKind) -> Result<Arc<dyn IntervalMap>> {
        let beta = match kind {
            MapKind::Beta { beta } => Some(*beta),
            _ => None,
        };
        self.create(kind.name(), beta)
    }
}
