use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::ulam::{perturbed_matrix, ulam_discretize, UlamOperator};
use super::{IntervalMap, MapKind};
use crate::harness::splitmix64_finalize;
use crate::limits::Verdict;
use crate::{Error, Result};

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_CAP: usize = 100_000;

/// Iterations spent estimating the second eigenvalue before falling back to an average.
const DEFLATION_CAP: usize = 20_000;
const TAIL_MARGIN: f64 = 1e-3;
const DENSITY_TOLERANCE: f64 = 1e-3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(x: &mut [Complex64], s: f64) {
    x.iter_mut().for_each(|v| *v *= s);
}

/// Bilinear (unconjugated) product, pairing left with right eigenvectors.
fn bilinear(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: Complex64,
    pub vector: Vec<Complex64>,
    pub iterations: usize,
}

fn power_iterate<F>(start: Vec<Complex64>, apply: F) -> Result<Eigenpair>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let mut x = start;
    let nx = norm(&x);
    scale(&mut x, 1.0 / nx);
    let mut y = vec![ZERO; x.len()];
    let mut prev: Option<Complex64> = None;
    let mut change = f64::INFINITY;
    for it in 1..=POWER_ITERATION_CAP {
        apply(&x, &mut y);
        let ny = norm(&y);
        if !(ny > f64::MIN_POSITIVE) {
            // The iterate collapsed: the start vector lies in a nilpotent part.
            return Ok(Eigenpair {
                lambda: ZERO,
                vector: x,
                iterations: it,
            });
        }
        let lambda: Complex64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        std::mem::swap(&mut x, &mut y);
        scale(&mut x, 1.0 / ny);
        if let Some(p) = prev {
            change = (lambda - p).norm();
            if change < POWER_ITERATION_TOL {
                return Ok(Eigenpair {
                    lambda,
                    vector: x,
                    iterations: it,
                });
            }
        }
        prev = Some(lambda);
    }
    Err(Error::NonConvergence {
        iterations: POWER_ITERATION_CAP,
        last_change: change,
    })
}

/// Dominant eigenvalue and left eigenvector (a density) of the operator,
/// started from the Lebesgue density.
pub fn leading_eigenvalue(op: &UlamOperator) -> Result<Eigenpair> {
    let start = vec![Complex64::new(1.0, 0.0); op.resolution()];
    power_iterate(start, |x, y| op.apply_left(x, y))
}

/// Dominant right eigenvector, used to deflate the left iteration.
pub fn right_eigenvector(op: &UlamOperator) -> Result<Eigenpair> {
    let start = vec![Complex64::new(1.0, 0.0); op.resolution()];
    power_iterate(start, |x, y| op.apply_right(x, y))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SecondEigenvalue {
    pub modulus: f64,
    pub iterations: usize,
    /// False when the growth rate kept oscillating (a complex pair) and
    /// the reported modulus is a long-run geometric average.
    pub converged: bool,
}

/// Modulus of the second eigenvalue: growth rate of the left iteration
/// with the leading spectral projection removed at every step.
pub fn second_eigenvalue_modulus(
    op: &UlamOperator,
    left: &Eigenpair,
    right: &Eigenpair,
) -> Result<SecondEigenvalue> {
    let m = op.resolution();
    if left.lambda == ZERO {
        return Ok(SecondEigenvalue {
            modulus: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let (u, v) = (&left.vector, &right.vector);
    let uv = bilinear(u, v);
    if uv.norm() < 1e-12 {
        return Err(Error::Precision(
            "left and right eigenvectors are nearly orthogonal".into(),
        ));
    }
    let deflate = |x: &mut [Complex64]| {
        let c = bilinear(x, v) / uv;
        for (xi, ui) in x.iter_mut().zip(u) {
            *xi -= c * ui;
        }
    };
    let mut x: Vec<Complex64> = (0..m as u64)
        .map(|i| {
            let r = splitmix64_finalize(i ^ 0x5851_F42D_4C95_7F2D);
            Complex64::new((r >> 11) as f64 / (1u64 << 53) as f64 - 0.5, 0.0)
        })
        .collect();
    deflate(&mut x);
    let nx = norm(&x);
    scale(&mut x, 1.0 / nx);
    let mut y = vec![ZERO; m];
    let mut logs: Vec<f64> = Vec::new();
    let mut prev_est = f64::NAN;
    for it in 1..=DEFLATION_CAP {
        op.apply_left(&x, &mut y);
        deflate(&mut y);
        let ny = norm(&y);
        if !(ny > f64::MIN_POSITIVE) {
            return Ok(SecondEigenvalue {
                modulus: 0.0,
                iterations: it,
                converged: true,
            });
        }
        std::mem::swap(&mut x, &mut y);
        scale(&mut x, 1.0 / ny);
        logs.push(ny.ln());
        if logs.len() >= 2 {
            let n = logs.len();
            let est = ((logs[n - 1] + logs[n - 2]) / 2.0).exp();
            if (est - prev_est).abs() < POWER_ITERATION_TOL {
                return Ok(SecondEigenvalue {
                    modulus: est,
                    iterations: it,
                    converged: true,
                });
            }
            prev_est = est;
        }
    }
    let half = &logs[logs.len() / 2..];
    Ok(SecondEigenvalue {
        modulus: (half.iter().sum::<f64>() / half.len() as f64).exp(),
        iterations: DEFLATION_CAP,
        converged: false,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralPoint {
    pub t: f64,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub abs_lambda: f64,
    pub second_abs: f64,
}

impl SpectralPoint {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.re_lambda, self.im_lambda)
    }
}

fn spectral_point(op0: &UlamOperator, t: f64) -> Result<SpectralPoint> {
    let op = perturbed_matrix(op0, t)?;
    let left = leading_eigenvalue(&op)?;
    let second = if left.lambda == ZERO {
        0.0
    } else {
        let right = right_eigenvector(&op)?;
        second_eigenvalue_modulus(&op, &left, &right)?.modulus
    };
    Ok(SpectralPoint {
        t,
        re_lambda: left.lambda.re,
        im_lambda: left.lambda.im,
        abs_lambda: left.lambda.norm(),
        second_abs: second,
    })
}

/// `2n + 1` evenly spaced points on `[-delta, delta]`.
pub fn symmetric_grid(delta: f64, n: usize) -> Vec<f64> {
    (0..=2 * n)
        .map(|i| delta * (i as f64 - n as f64) / n.max(1) as f64)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    pub map: MapKind,
    pub m: usize,
    pub d_exp: f64,
    pub delta: f64,
    pub points: Vec<SpectralPoint>,
    /// Leading eigenvalue at `t = 0`.
    pub lambda_zero: (f64, f64),
    /// `1 - |second eigenvalue|` at `t = 0`.
    pub gap: f64,
    /// Largest second-eigenvalue modulus on the grid.
    pub theta1: f64,
    /// Largest `K` with `|lambda_t| <= 1 - K |t|^d` on the grid.
    pub k_bound: f64,
    pub verdict: Verdict,
}

/// Leading-eigenvalue curve over a symmetric grid and the constants of the
/// small-`t` expansion.
pub fn eigenvalue_curve_check(
    map: Arc<dyn IntervalMap>,
    m: usize,
    t_grid: &[f64],
    d_exp: f64,
) -> Result<SpectralSummary> {
    if t_grid.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "eigenvalue curve fit needs at least 8 grid points, got {}",
            t_grid.len()
        )));
    }
    if t_grid.iter().any(|t| !t.is_finite())
        || !t_grid
            .iter()
            .all(|&t| t_grid.iter().any(|&s| (s + t).abs() <= 1e-12))
    {
        return Err(Error::InvalidArgument(
            "t grid must be finite and symmetric about 0".into(),
        ));
    }
    if !(d_exp > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "exponent d must be positive, got {d_exp}"
        )));
    }
    let op0 = ulam_discretize(map.clone(), m)?;
    let points: Vec<SpectralPoint> = t_grid
        .par_iter()
        .map(|&t| spectral_point(&op0, t))
        .collect::<Result<_>>()?;
    let zero = match points.iter().find(|p| p.t == 0.0) {
        Some(p) => p.clone(),
        None => spectral_point(&op0, 0.0)?,
    };
    let k_bound = points
        .iter()
        .filter(|p| p.t != 0.0)
        .map(|p| (1.0 - p.abs_lambda) / p.t.abs().powf(d_exp))
        .fold(f64::INFINITY, f64::min);
    let theta1 = points.iter().map(|p| p.second_abs).fold(0.0, f64::max);
    let delta = t_grid.iter().map(|t| t.abs()).fold(0.0, f64::max);
    Ok(SpectralSummary {
        map: map.kind(),
        m,
        d_exp,
        delta,
        lambda_zero: (zero.re_lambda, zero.im_lambda),
        gap: 1.0 - zero.second_abs,
        theta1,
        k_bound,
        verdict: Verdict::from_bool(k_bound > 0.0 && theta1 < 1.0),
        points,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailNormReport {
    pub map: MapKind,
    pub m: usize,
    pub delta: f64,
    pub points: Vec<SpectralPoint>,
    /// Largest spectral-radius estimate over the grid.
    pub theta2: f64,
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Spectral radius of `P_t` for `delta < |t| <= pi`.
pub fn tail_norm_check(
    map: Arc<dyn IntervalMap>,
    m: usize,
    delta: f64,
    t_grid: &[f64],
) -> Result<TailNormReport> {
    let pi = std::f64::consts::PI;
    if t_grid.is_empty()
        || t_grid
            .iter()
            .any(|t| !(t.abs() > delta && t.abs() <= pi + 1e-12))
    {
        return Err(Error::InvalidArgument(format!(
            "tail grid must be non-empty and lie in {delta} < |t| <= pi"
        )));
    }
    let op0 = ulam_discretize(map.clone(), m)?;
    let points: Vec<SpectralPoint> = t_grid
        .par_iter()
        .map(|&t| {
            let op = perturbed_matrix(&op0, t)?;
            let l = leading_eigenvalue(&op)?.lambda;
            Ok(SpectralPoint {
                t,
                re_lambda: l.re,
                im_lambda: l.im,
                abs_lambda: l.norm(),
                second_abs: f64::NAN,
            })
        })
        .collect::<Result<_>>()?;
    let theta2 = points.iter().map(|p| p.abs_lambda).fold(0.0, f64::max);
    let threshold = 1.0 - TAIL_MARGIN;
    Ok(TailNormReport {
        map: map.kind(),
        m,
        delta,
        points,
        theta2,
        threshold,
        verdict: Verdict::from_bool(theta2 < threshold),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub map: MapKind,
    pub m: usize,
    pub sup_error: f64,
    pub tolerance: f64,
    /// Cell values of the normalized leading eigenvector.
    #[serde(skip)]
    pub density: Vec<f64>,
    pub verdict: Verdict,
}

/// Leading eigenvector (mean-one normalized) against the exact invariant
/// density averaged over each cell.
pub fn density_check(map: Arc<dyn IntervalMap>, m: usize) -> Result<DensityReport> {
    let op = ulam_discretize(map.clone(), m)?;
    let lead = leading_eigenvalue(&op)?;
    let total: f64 = lead.vector.iter().map(|v| v.re).sum();
    let density: Vec<f64> = lead
        .vector
        .iter()
        .map(|v| v.re * m as f64 / total)
        .collect();
    let mf = m as f64;
    let mut sup_error = 0.0f64;
    for (i, &h) in density.iter().enumerate() {
        let want = map
            .density_average(i as f64 / mf, (i + 1) as f64 / mf)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "{} has no closed-form invariant density",
                    map.kind()
                ))
            })?;
        sup_error = sup_error.max((h - want).abs());
    }
    Ok(DensityReport {
        map: map.kind(),
        m,
        sup_error,
        tolerance: DENSITY_TOLERANCE,
        density,
        verdict: Verdict::from_bool(sup_error < DENSITY_TOLERANCE),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionReport {
    pub map: MapKind,
    pub t: f64,
    pub m: usize,
    pub lambda_m: (f64, f64),
    pub lambda_2m: (f64, f64),
    pub leading_shift: f64,
    pub second_m: f64,
    pub second_2m: f64,
    /// `2 s(2m) - s(m)`, removing a `1/m` error term.
    pub second_extrapolated: f64,
}

/// Leading and second eigenvalues at resolutions `m` and `2m`.
pub fn resolution_doubling(
    map: Arc<dyn IntervalMap>,
    m: usize,
    t: f64,
) -> Result<ResolutionReport> {
    let at = |res: usize| -> Result<SpectralPoint> {
        let op0 = ulam_discretize(map.clone(), res)?;
        spectral_point(&op0, t)
    };
    let a = at(m)?;
    let b = at(2 * m)?;
    Ok(ResolutionReport {
        map: map.kind(),
        t,
        m,
        lambda_m: (a.re_lambda, a.im_lambda),
        lambda_2m: (b.re_lambda, b.im_lambda),
        leading_shift: (a.lambda() - b.lambda()).norm(),
        second_m: a.second_abs,
        second_2m: b.second_abs,
        second_extrapolated: 2.0 * b.second_abs - a.second_abs,
    })
}

/// CSV with header `t,re_lambda,im_lambda,abs_lambda,second_abs`.
pub fn write_curve_csv<W: Write>(points: &[SpectralPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "t,re_lambda,im_lambda,abs_lambda,second_abs")?;
    for p in points {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.t, p.re_lambda, p.im_lambda, p.abs_lambda, p.second_abs
        )?;
    }
    Ok(())
}
