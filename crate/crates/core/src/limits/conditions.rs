use serde::Serialize;

use super::ensemble::{for_each_step, map_paths};
use super::{BoundedFn, Verdict};
use crate::localtime::oracle::{effective_radius, law_for, ExactWalk};
use crate::localtime::{Normalizer, ScalingScheme};
use crate::numeric::{covariance, mean, variance, NeumaierSum};
use crate::processes::{ProcessGenerator, ProcessKind};
use crate::{Error, Result};

/// `F(omega) = f(X_1 + ... + X_window)`, evaluated on the path shifted by `2k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftFunctional {
    pub window: usize,
    pub f: BoundedFn,
}

impl ShiftFunctional {
    /// The first increment after the shift, clipped to `[-1, 1]`.
    pub fn first_increment() -> Self {
        Self {
            window: 1,
            f: BoundedFn::Clip { lo: -1.0, hi: 1.0 },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Cond1Row {
    pub k: u64,
    pub covariance: f64,
    pub std_error: f64,
    pub envelope: f64,
    /// `|cov| <= 3 se`.
    pub within_noise: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cond1Report {
    pub g: BoundedFn,
    pub functional: ShiftFunctional,
    pub delta: f64,
    pub paths: usize,
    /// Envelope constant fitted at the first `k`.
    pub envelope_c: f64,
    pub rows: Vec<Cond1Row>,
    pub verdict: Verdict,
}

fn loglog_power(k: u64, delta: f64) -> f64 {
    (k as f64).ln().ln().powf(-1.0 - delta)
}

/// Covariance between `g(l_k / a_k)` and `F` on the `2k`-shifted path.
///
/// `C` is fitted at the first `k` as `(|cov| + 3 se) (log log k)^(1+delta)`,
/// then every later `k` must satisfy `|cov| - 3 se <= C (log log k)^(-1-delta)`.
#[allow(clippy::too_many_arguments)]
pub fn cond1_estimate(
    generator: &dyn ProcessGenerator,
    scheme: &ScalingScheme,
    g: BoundedFn,
    functional: ShiftFunctional,
    k_list: &[u64],
    delta: f64,
    paths: usize,
    master_seed: u64,
) -> Result<Cond1Report> {
    g.require_bounded("g")?;
    functional.f.require_bounded("F")?;
    if functional.window == 0 {
        return Err(Error::InvalidArgument(
            "shift functional window must be positive".into(),
        ));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if paths < 2 {
        return Err(Error::InvalidArgument(
            "covariance needs at least 2 paths".into(),
        ));
    }
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] < 16 {
        return Err(Error::InvalidArgument(
            "k list must be non-empty with every k >= 16".into(),
        ));
    }
    let kmax = *ks.last().unwrap();
    let n = 2 * kmax as usize + functional.window;
    let norm = Normalizer::new(*scheme, kmax);
    let w = functional.window as u64;

    let per_path = map_paths(generator, n, paths, master_seed, |_, src| {
        let mut gs = Vec::with_capacity(ks.len());
        let mut fs = vec![0.0; ks.len()];
        // Partial sum at 2k for each k, to difference against S_{2k+window}.
        let mut base = vec![0i64; ks.len()];
        let mut ell = 0u64;
        let mut next_g = 0;
        for_each_step(src, n, |step, _, s| {
            ell += (s == 0) as u64;
            if next_g < ks.len() && step == ks[next_g] {
                gs.push(g.eval(ell as f64 / norm.a(step)));
                next_g += 1;
            }
            for (j, &k) in ks.iter().enumerate() {
                if step == 2 * k {
                    base[j] = s;
                } else if step == 2 * k + w {
                    fs[j] = functional.f.eval((s - base[j]) as f64);
                }
            }
        })?;
        Ok((gs, fs))
    })?;

    let pf = paths as f64;
    let mut rows = Vec::with_capacity(ks.len());
    for (j, &k) in ks.iter().enumerate() {
        let a: Vec<f64> = per_path.iter().map(|p| p.0[j]).collect();
        let b: Vec<f64> = per_path.iter().map(|p| p.1[j]).collect();
        let cov = covariance(&a, &b);
        let (ma, mb) = (mean(&a), mean(&b));
        let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let se = (variance(&prods) / pf).sqrt();
        rows.push(Cond1Row {
            k,
            covariance: cov,
            std_error: se,
            envelope: 0.0,
            within_noise: cov.abs() <= 3.0 * se,
        });
    }
    let envelope_c =
        (rows[0].covariance.abs() + 3.0 * rows[0].std_error) / loglog_power(ks[0], delta);
    let mut ok = true;
    for r in rows.iter_mut() {
        r.envelope = envelope_c * loglog_power(r.k, delta);
        ok &= r.covariance.abs() - 3.0 * r.std_error <= r.envelope;
    }
    Ok(Cond1Report {
        g,
        functional,
        delta,
        paths,
        envelope_c,
        rows,
        verdict: Verdict::from_bool(ok),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Cond2Row {
    pub x: i64,
    /// `sum_{n<=N} |P(S_n = x) - P(S_n = 0)|` for `N = 1..=horizon`.
    #[serde(skip)]
    pub partial_sums: Vec<f64>,
    pub terminal: f64,
    /// `terminal / (K (1 + |x|^exponent))`.
    pub ratio: f64,
    pub nondecreasing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cond2Report {
    pub kind: ProcessKind,
    pub horizon: u64,
    pub exponent: f64,
    /// Fitted on `x = 1` and frozen.
    pub k_fitted: f64,
    pub ratio_limit: f64,
    pub rows: Vec<Cond2Row>,
    pub verdict: Verdict,
}

pub const COND2_RATIO_LIMIT: f64 = 1.5;

/// Exact partial sums of `|P(S_n = x) - P(S_n = 0)|` from the convolution oracle.
pub fn cond2_partial_sums(
    kind: &ProcessKind,
    scheme: &ScalingScheme,
    xs: &[i64],
    horizon: usize,
    ratio_limit: f64,
) -> Result<Cond2Report> {
    if horizon == 0 || xs.is_empty() {
        return Err(Error::InvalidArgument(
            "need a positive horizon and at least one level".into(),
        ));
    }
    let reach = xs.iter().map(|x| x.unsigned_abs()).max().unwrap().max(1) as usize;
    // Wide enough that no mass can re-enter the window before the horizon.
    let radius = effective_radius(kind, horizon, horizon.max(reach)).max(reach);
    let mut walk = ExactWalk::new(law_for(kind, radius)?, horizon, radius)?;
    let mut levels: Vec<i64> = xs.to_vec();
    if !levels.contains(&1) {
        levels.push(1);
    }
    let mut acc = vec![NeumaierSum::new(); levels.len()];
    let mut seqs = vec![Vec::with_capacity(horizon); levels.len()];
    while walk.advance() {
        let p0 = walk.prob(0);
        for (j, &x) in levels.iter().enumerate() {
            acc[j].add((walk.prob(x) - p0).abs());
            seqs[j].push(acc[j].value());
        }
    }
    let exponent = scheme.alpha() / (1.0 - scheme.alpha());
    let envelope = |x: i64| 1.0 + (x.unsigned_abs() as f64).powf(exponent);
    let one = levels.iter().position(|&x| x == 1).unwrap();
    let k_fitted = seqs[one].last().unwrap() / envelope(1);

    let mut rows = Vec::new();
    let mut ok = true;
    for (j, &x) in levels.iter().enumerate() {
        if j >= xs.len() {
            break;
        }
        let terminal = *seqs[j].last().unwrap();
        let ratio = terminal / (k_fitted * envelope(x));
        let nondecreasing = seqs[j].windows(2).all(|w| w[1] >= w[0]);
        ok &= ratio <= ratio_limit;
        rows.push(Cond2Row {
            x,
            partial_sums: std::mem::take(&mut seqs[j]),
            terminal,
            ratio,
            nondecreasing,
        });
    }
    Ok(Cond2Report {
        kind: *kind,
        horizon: horizon as u64,
        exponent,
        k_fitted,
        ratio_limit,
        rows,
        verdict: Verdict::from_bool(ok),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondDiffRow {
    pub j: u64,
    /// `E(l_j - l(j,y) - l_{2k} + l(2k,y))^2` with `y = S_{2k}`.
    pub lhs: f64,
    pub lhs_std_error: f64,
    /// `a_j E|S_{2k}|^exponent`.
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondDiffReport {
    pub k: u64,
    pub exponent: f64,
    pub paths: usize,
    pub rows: Vec<SecondDiffRow>,
    /// Largest over smallest ratio across `j`.
    pub ratio_spread: f64,
    pub ratio_bound: f64,
    pub verdict: Verdict,
}

pub const SECOND_DIFF_RATIO_BOUND: f64 = 10.0;

/// Monte-Carlo second moment of the local-time difference between levels
/// `0` and `S_{2k}` accumulated after time `2k`.
pub fn second_diff_moment(
    generator: &dyn ProcessGenerator,
    scheme: &ScalingScheme,
    k: u64,
    j_list: &[u64],
    paths: usize,
    master_seed: u64,
) -> Result<SecondDiffReport> {
    let mut js = j_list.to_vec();
    js.sort_unstable();
    js.dedup();
    if k == 0 || js.is_empty() || js[0] <= 2 * k {
        return Err(Error::InvalidArgument(format!(
            "every j must exceed 2k = {}",
            2 * k
        )));
    }
    if paths < 2 {
        return Err(Error::InvalidArgument("need at least 2 paths".into()));
    }
    let jmax = *js.last().unwrap();
    let exponent = scheme.alpha() / (1.0 - scheme.alpha());
    let per_path = map_paths(generator, jmax as usize, paths, master_seed, |_, src| {
        let mut y = 0i64;
        let mut diff = 0i64;
        let mut next = 0;
        let mut out = Vec::with_capacity(js.len());
        for_each_step(src, jmax as usize, |step, _, s| {
            if step == 2 * k {
                y = s;
            } else if step > 2 * k && y != 0 {
                diff += (s == 0) as i64 - (s == y) as i64;
            }
            if next < js.len() && step == js[next] {
                out.push(diff as f64);
                next += 1;
            }
        })?;
        Ok(((y.unsigned_abs() as f64).powf(exponent), out))
    })?;

    let norm = Normalizer::new(*scheme, jmax);
    let budget = mean(&per_path.iter().map(|p| p.0).collect::<Vec<_>>());
    let pf = paths as f64;
    let rows: Vec<SecondDiffRow> = js
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let sq: Vec<f64> = per_path.iter().map(|p| p.1[i] * p.1[i]).collect();
            let lhs = mean(&sq);
            let rhs = norm.a(j) * budget;
            SecondDiffRow {
                j,
                lhs,
                lhs_std_error: (variance(&sq) / pf).sqrt(),
                rhs,
                ratio: lhs / rhs,
            }
        })
        .collect();
    let max = rows
        .iter()
        .map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let ratio_spread = max / min;
    let ok = max <= SECOND_DIFF_RATIO_BOUND && (rows.len() < 2 || ratio_spread <= 2.0);
    Ok(SecondDiffReport {
        k,
        exponent,
        paths,
        rows,
        ratio_spread,
        ratio_bound: SECOND_DIFF_RATIO_BOUND,
        verdict: Verdict::from_bool(ok),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::LazyWalkGenerator;

    #[test]
    fn constant_functions_give_zero_covariance() {
        let s = ScalingScheme::lazy_walk();
        let c = BoundedFn::Constant { value: 1.0 };
        let r = cond1_estimate(
            &LazyWalkGenerator,
            &s,
            BoundedFn::default(),
            ShiftFunctional { window: 3, f: c },
            &[20, 40],
            0.1,
            50,
            1,
        )
        .unwrap();
        assert!(r.rows.iter().all(|r| r.covariance == 0.0));
        let r = cond1_estimate(
            &LazyWalkGenerator,
            &s,
            c,
            ShiftFunctional::first_increment(),
            &[20, 40],
            0.1,
            50,
            1,
        )
        .unwrap();
        assert!(r.rows.iter().all(|r| r.covariance == 0.0));
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn unbounded_rejected() {
        let s = ScalingScheme::lazy_walk();
        let f = ShiftFunctional {
            window: 1,
            f: BoundedFn::Identity,
        };
        assert!(cond1_estimate(
            &LazyWalkGenerator,
            &s,
            BoundedFn::default(),
            f,
            &[20],
            0.1,
            10,
            1
        )
        .is_err());
        assert!(cond1_estimate(
            &LazyWalkGenerator,
            &s,
            BoundedFn::Identity,
            ShiftFunctional::first_increment(),
            &[20],
            0.1,
            10,
            1
        )
        .is_err());
    }

    #[test]
    fn independent_future_has_no_covariance() {
        let s = ScalingScheme::lazy_walk();
        let r = cond1_estimate(
            &LazyWalkGenerator,
            &s,
            BoundedFn::default(),
            ShiftFunctional::first_increment(),
            &[100, 1000, 10_000],
            0.1,
            2000,
            17,
        )
        .unwrap();
        assert!(r.rows.last().unwrap().within_noise, "{:?}", r.rows);
    }

    #[test]
    fn cond2_small_cases() {
        let s = ScalingScheme::lazy_walk();
        let r =
            cond2_partial_sums(&ProcessKind::LazyWalk, &s, &[0, 1], 1, COND2_RATIO_LIMIT).unwrap();
        assert_eq!(r.rows[0].terminal, 0.0);
        assert!((r.rows[1].terminal - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cond2_lazy_nondecreasing_and_fit() {
        let s = ScalingScheme::lazy_walk();
        let r = cond2_partial_sums(&ProcessKind::LazyWalk, &s, &[2, 3], 2000, COND2_RATIO_LIMIT)
            .unwrap();
        assert!(r.rows.iter().all(|r| r.nondecreasing));
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.exponent, 1.0);
        assert!(cond2_partial_sums(&ProcessKind::GaussCfPair, &s, &[1], 10, 1.5).is_err());
    }

    #[test]
    fn second_diff_matches_four_term_formula() {
        use crate::harness::derive_path_seed;
        use crate::localtime::local_time;
        let s = ScalingScheme::lazy_walk();
        let (k, j, paths) = (5u64, 400u64, 300usize);
        let r = second_diff_moment(&LazyWalkGenerator, &s, k, &[j], paths, 4).unwrap();
        let mut sq = 0.0;
        let mut budget = 0.0;
        for i in 0..paths {
            let t = LazyWalkGenerator
                .trajectory(derive_path_seed(4, i as u64), j as usize)
                .unwrap();
            let y = t.partial_sums()[2 * k as usize - 1];
            let (l0, ly) = (local_time(&t, 0), local_time(&t, y));
            let d =
                l0.at(j as usize) as f64 - ly.at(j as usize) as f64 - l0.at(2 * k as usize) as f64
                    + ly.at(2 * k as usize) as f64;
            if y == 0 {
                assert_eq!(d, 0.0);
            }
            sq += d * d;
            budget += y.abs() as f64;
        }
        assert!((r.rows[0].lhs - sq / paths as f64).abs() < 1e-12);
        let rhs = Normalizer::new(s, j).a(j) * budget / paths as f64;
        assert!((r.rows[0].rhs - rhs).abs() < 1e-9 * rhs);
        assert!(second_diff_moment(&LazyWalkGenerator, &s, 5, &[10], 10, 1).is_err());
    }
}
