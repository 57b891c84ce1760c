use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use super::scaling::{Normalizer, ScalingScheme};
use crate::numeric::{geometric_grid, NeumaierSum};
use crate::processes::{IncrementLaw, ProcessKind};
use crate::{Error, Result};

/// Upper bound on `horizon * radius` for the dynamic-programming oracle.
pub const EXACT_CELL_LIMIT: u128 = 1_000_000_000;

/// Laws with at most this many support points are convolved directly.
const DIRECT_TAPS: usize = 65;

/// Exact law of `S_m` on the window `|x| <= radius`, advanced one step at a time.
///
/// Mass that leaves the window is kept in two overflow cells and never
/// returns, so `P(S_m = x)` is exact for every `x` in the window whenever
/// the walk cannot jump back in from outside (always true when
/// `radius >= m * max|X|`) and otherwise a lower bound.
pub struct ExactWalk {
    law: IncrementLaw,
    radius: usize,
    horizon: usize,
    m: usize,
    row: Vec<f64>,
    below: f64,
    above: f64,
    scratch: Vec<f64>,
    fft: Option<FftConvolver>,
}

struct FftConvolver {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl ExactWalk {
    pub fn new(law: IncrementLaw, horizon: usize, radius: usize) -> Result<Self> {
        let cells = horizon as u128 * radius.max(1) as u128;
        if cells > EXACT_CELL_LIMIT {
            return Err(Error::OracleGuard {
                cells,
                limit: EXACT_CELL_LIMIT,
            });
        }
        let window = 2 * radius + 1;
        let reach = law
            .offset
            .unsigned_abs()
            .max(law.max_value().unsigned_abs()) as usize;
        let has_tails = law.tail_below > 0.0 || law.tail_above > 0.0;
        if has_tails && reach < 2 * radius {
            return Err(Error::InvalidArgument(format!(
                "increment law stored to |k| <= {reach} but the window needs {}",
                2 * radius
            )));
        }
        let mut row = vec![0.0; window];
        row[radius] = 1.0;
        let fft = (law.probs.len() > DIRECT_TAPS).then(|| FftConvolver::new(&law, window));
        Ok(Self {
            law,
            radius,
            horizon,
            m: 0,
            row,
            below: 0.0,
            above: 0.0,
            scratch: vec![0.0; window],
            fft,
        })
    }

    pub fn step_index(&self) -> usize {
        self.m
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// `P(S_m = x)` for the current `m`; zero outside the window.
    pub fn prob(&self, x: i64) -> f64 {
        let idx = x + self.radius as i64;
        if idx < 0 || idx as usize >= self.row.len() {
            0.0
        } else {
            self.row[idx as usize]
        }
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }

    /// Mass that has left the window below and above.
    pub fn overflow(&self) -> (f64, f64) {
        (self.below, self.above)
    }

    pub fn total_mass(&self) -> f64 {
        let mut s: NeumaierSum = self.row.iter().copied().collect();
        s.add(self.below);
        s.add(self.above);
        s.value()
    }

    /// Moves from `S_m` to `S_{m+1}`; returns false once the horizon is reached.
    pub fn advance(&mut self) -> bool {
        if self.m >= self.horizon {
            return false;
        }
        let inside: f64 = self.row.iter().copied().collect::<NeumaierSum>().value();
        let r = self.radius as i64;
        let (mut out_below, mut out_above) = (NeumaierSum::new(), NeumaierSum::new());
        out_below.add(inside * self.law.tail_below);
        out_above.add(inside * self.law.tail_above);

        match self.fft.as_mut() {
            None => {
                self.scratch.iter_mut().for_each(|v| *v = 0.0);
                for (j, &p) in self.law.probs.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let k = self.law.offset + j as i64;
                    for (i, &q) in self.row.iter().enumerate() {
                        if q == 0.0 {
                            continue;
                        }
                        let target = i as i64 + k;
                        if target < 0 {
                            out_below.add(q * p);
                        } else if target > 2 * r {
                            out_above.add(q * p);
                        } else {
                            self.scratch[target as usize] += q * p;
                        }
                    }
                }
            }
            Some(conv) => {
                self.scratch.iter_mut().for_each(|v| *v = 0.0);
                let full = conv.convolve(&self.row);
                // full[o] sits at x = o - r + offset
                for (o, &v) in full.iter().enumerate() {
                    let v = v.max(0.0);
                    let target = o as i64 + self.law.offset;
                    if target < 0 {
                        out_below.add(v);
                    } else if target > 2 * r {
                        out_above.add(v);
                    } else {
                        self.scratch[target as usize] = v;
                    }
                }
            }
        }
        std::mem::swap(&mut self.row, &mut self.scratch);
        self.below += out_below.value();
        self.above += out_above.value();
        self.m += 1;
        true
    }
}

impl FftConvolver {
    fn new(law: &IncrementLaw, window: usize) -> Self {
        let size = (window + law.probs.len() - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for (j, &p) in law.probs.iter().enumerate() {
            kernel[j] = Complex64::new(p, 0.0);
        }
        forward.process(&mut kernel);
        Self {
            size,
            forward,
            inverse,
            kernel,
            buf: vec![Complex64::new(0.0, 0.0); size],
        }
    }

    /// Linear convolution of `row` with the kernel; index `o = i + j`.
    fn convolve(&mut self, row: &[f64]) -> Vec<f64> {
        self.buf
            .iter_mut()
            .for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (c, &v) in self.buf.iter_mut().zip(row) {
            c.re = v;
        }
        self.forward.process(&mut self.buf);
        for (c, k) in self.buf.iter_mut().zip(&self.kernel) {
            *c *= k;
        }
        self.inverse.process(&mut self.buf);
        let scale = 1.0 / self.size as f64;
        self.buf.iter().map(|c| c.re * scale).collect()
    }
}

/// All rows `P(S_m = x)`, `1 <= m <= n`, `|x| <= radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactWalkTable {
    pub radius: usize,
    /// `rows[m - 1][x + radius]`.
    pub rows: Vec<Vec<f64>>,
    /// `(below, above)` overflow mass per row.
    pub overflow: Vec<(f64, f64)>,
}

impl ExactWalkTable {
    pub fn prob(&self, m: usize, x: i64) -> f64 {
        let idx = x + self.radius as i64;
        if m == 0 || m > self.rows.len() || idx < 0 || idx as usize > 2 * self.radius {
            return 0.0;
        }
        self.rows[m - 1][idx as usize]
    }

    /// CSV with header `m,x,prob`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,x,prob")?;
        for (m, row) in self.rows.iter().enumerate() {
            for (i, p) in row.iter().enumerate() {
                writeln!(w, "{},{},{:.16e}", m + 1, i as i64 - self.radius as i64, p)?;
            }
        }
        Ok(())
    }
}

/// Increment law for an i.i.d. walk kind, stored wide enough for `radius`.
pub(crate) fn law_for(kind: &ProcessKind, radius: usize) -> Result<IncrementLaw> {
    if !kind.is_iid_walk() {
        return Err(Error::InvalidArgument(format!(
            "exact oracle needs an i.i.d. walk, got {kind}"
        )));
    }
    kind.generator()?
        .increment_law(2 * radius.max(1))
        .ok_or_else(|| Error::InvalidArgument(format!("{kind} has no exact increment law")))
}

/// Effective window: the lazy walk cannot leave `|x| <= m`.
pub(crate) fn effective_radius(kind: &ProcessKind, horizon: usize, radius: usize) -> usize {
    match kind {
        ProcessKind::LazyWalk => radius.min(horizon).max(1),
        _ => radius.max(1),
    }
}

pub fn exact_walk_distribution(
    kind: &ProcessKind,
    n: usize,
    support_radius: usize,
) -> Result<ExactWalkTable> {
    let radius = effective_radius(kind, n, support_radius);
    let mut walk = ExactWalk::new(law_for(kind, radius)?, n, radius)?;
    let mut rows = Vec::with_capacity(n);
    let mut overflow = Vec::with_capacity(n);
    while walk.advance() {
        rows.push(walk.row().to_vec());
        overflow.push(walk.overflow());
    }
    Ok(ExactWalkTable {
        radius,
        rows,
        overflow,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpectedLocalTimeReport {
    pub n: u64,
    pub expected_local_time: f64,
    pub a_n: f64,
    pub ratio: f64,
    /// `(m, E[l_m], a_m, E[l_m]/a_m)` at logarithmically spaced `m`.
    pub checkpoints: Vec<(u64, f64, f64, f64)>,
    /// Whether the ratio moves monotonically toward 1 over the checkpoints.
    pub monotone_toward_one: bool,
}

/// `E[l_n] = sum_{i<=n} P(S_i = 0)` from the exact oracle, against `a_n`.
pub fn expected_local_time_check(
    kind: &ProcessKind,
    scheme: &ScalingScheme,
    n: usize,
    support_radius: usize,
) -> Result<ExpectedLocalTimeReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let radius = effective_radius(kind, n, support_radius);
    let mut walk = ExactWalk::new(law_for(kind, radius)?, n, radius)?;
    let norm = Normalizer::new(*scheme, n as u64);
    let grid = geometric_grid(1, n as u64, 5);
    let mut next = 0;
    let mut acc = NeumaierSum::new();
    let mut checkpoints = Vec::new();
    while walk.advance() {
        acc.add(walk.prob(0));
        let m = walk.step_index() as u64;
        if next < grid.len() && grid[next] == m {
            let a = norm.a(m);
            checkpoints.push((m, acc.value(), a, acc.value() / a));
            next += 1;
        }
    }
    let a_n = norm.a(n as u64);
    let distances: Vec<f64> = checkpoints.iter().map(|c| (c.3 - 1.0).abs()).collect();
    let monotone_toward_one = distances.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(ExpectedLocalTimeReport {
        n: n as u64,
        expected_local_time: acc.value(),
        a_n,
        ratio: acc.value() / a_n,
        checkpoints,
        monotone_toward_one,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ln_gamma;

    // Independent closed form: the lazy walk at time m is half a simple walk at
    // time 2m, so P(S_m = x) = C(2m, m + x) / 4^m.
    fn lazy_closed_form(m: u64, x: i64) -> f64 {
        let k = m as i64 + x;
        if k < 0 || k > 2 * m as i64 {
            return 0.0;
        }
        let m2 = 2.0 * m as f64;
        (ln_gamma(m2 + 1.0)
            - ln_gamma(k as f64 + 1.0)
            - ln_gamma(m2 - k as f64 + 1.0)
            - m2 * 2f64.ln())
        .exp()
    }

    #[test]
    fn lazy_small_cases() {
        let t = exact_walk_distribution(&ProcessKind::LazyWalk, 2, 5).unwrap();
        assert_eq!(t.prob(1, 0), 0.5);
        assert_eq!(t.prob(2, 0), 3.0 / 8.0);
        assert_eq!(t.prob(2, 2), 1.0 / 16.0);
    }

    #[test]
    fn lazy_matches_binomial_closed_form() {
        let mut walk =
            ExactWalk::new(law_for(&ProcessKind::LazyWalk, 1000).unwrap(), 1000, 1000).unwrap();
        while walk.advance() {
            let m = walk.step_index() as u64;
            if [10, 100, 1000].contains(&m) {
                for x in [0i64, 1, 3, 17] {
                    let want = lazy_closed_form(m, x);
                    if want == 0.0 {
                        assert_eq!(walk.prob(x), 0.0);
                        continue;
                    }
                    assert!(
                        (walk.prob(x) / want - 1.0).abs() < 1e-10,
                        "m={m} x={x} {} {want}",
                        walk.prob(x)
                    );
                }
            }
        }
    }

    #[test]
    fn rows_conserve_mass() {
        let t = exact_walk_distribution(&ProcessKind::LazyWalk, 300, 20).unwrap();
        for (row, (lo, hi)) in t.rows.iter().zip(&t.overflow) {
            let s = crate::numeric::sum(row) + lo + hi;
            assert!((s - 1.0).abs() < 1e-12);
        }
        let ht = ProcessKind::HeavyTailWalk { d: 1.5 };
        let mut walk = ExactWalk::new(law_for(&ht, 300).unwrap(), 60, 300).unwrap();
        while walk.advance() {
            assert!((walk.total_mass() - 1.0).abs() < 1e-12);
        }
        let (lo, hi) = walk.overflow();
        assert!((lo - hi).abs() < 1e-9);
        assert!(lo > 0.0);
    }

    #[test]
    fn heavy_tail_fft_matches_direct_convolution() {
        // two steps by hand: P(S_2 = 0) = sum_k P(X = k) P(X = -k)
        let ht = ProcessKind::HeavyTailWalk { d: 1.7 };
        let radius = 200;
        let law = law_for(&ht, radius).unwrap();
        let mut walk = ExactWalk::new(law.clone(), 2, radius).unwrap();
        walk.advance();
        walk.advance();
        let direct: f64 = (-400i64..=400).map(|k| law.prob(k) * law.prob(-k)).sum();
        // jumps beyond |k| = 400 can also return to 0, but their mass is below 1e-8
        assert!((walk.prob(0) - direct).abs() < 1e-8);
    }

    #[test]
    fn guard_and_kind_errors() {
        assert!(matches!(
            ExactWalk::new(
                law_for(&ProcessKind::LazyWalk, 1).unwrap(),
                2_000_000,
                1_000_000
            ),
            Err(Error::OracleGuard { .. })
        ));
        assert!(exact_walk_distribution(&ProcessKind::GaussCfPair, 10, 10).is_err());
    }

    #[test]
    fn expected_local_time_small_and_large() {
        let s = ScalingScheme::lazy_walk();
        let r = expected_local_time_check(&ProcessKind::LazyWalk, &s, 2, 10).unwrap();
        assert!((r.expected_local_time - 7.0 / 8.0).abs() < 1e-15);
        let r = expected_local_time_check(&ProcessKind::LazyWalk, &s, 10_000, 10_000).unwrap();
        assert!(r.ratio > 0.9 && r.ratio < 1.1, "{}", r.ratio);
    }

    #[test]
    fn csv_dump() {
        let t = exact_walk_distribution(&ProcessKind::LazyWalk, 1, 1).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("m,x,prob\n1,-1,2.5000000000000000e-1\n"));
    }
}
