use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{IntervalMap, MapKind};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sparse Ulam matrix of `P_t` on `m` uniform cells (CSR layout).
///
/// Entry `(i, j)` is the fraction of cell `i` that `T` sends into cell `j`,
/// each contribution multiplied by `e^{i t phi}` of its branch.
#[derive(Clone)]
pub struct UlamOperator {
    map: Arc<dyn IntervalMap>,
    m: usize,
    t: f64,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<Complex64>,
}

impl fmt::Debug for UlamOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UlamOperator")
            .field("map", &self.map.kind())
            .field("m", &self.m)
            .field("t", &self.t)
            .field("nnz", &self.vals.len())
            .finish()
    }
}

pub fn ulam_discretize(map: Arc<dyn IntervalMap>, m: usize) -> Result<UlamOperator> {
    UlamOperator::assemble(map, m, 0.0)
}

/// The same discretization twisted by `e^{i t phi}`.
pub fn perturbed_matrix(op: &UlamOperator, t: f64) -> Result<UlamOperator> {
    if t == op.t {
        return Ok(op.clone());
    }
    UlamOperator::assemble(op.map.clone(), op.m, t)
}

impl UlamOperator {
    pub fn assemble(map: Arc<dyn IntervalMap>, m: usize, t: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "Ulam resolution must be at least 2, got {m}"
            )));
        }
        if m > u32::MAX as usize || !t.is_finite() {
            return Err(Error::InvalidArgument(
                "resolution too large or t not finite".into(),
            ));
        }
        let branches = map.branches();
        let phases: Vec<Complex64> = branches.iter().map(|b| map.phase(b, t)).collect();
        let mf = m as f64;

        let rows: Vec<Vec<(u32, Complex64)>> = (0..m)
            .into_par_iter()
            .map_init(
                || vec![ZERO; m],
                |acc, i| {
                    let x0 = i as f64 / mf;
                    let x1 = (i + 1) as f64 / mf;
                    let (mut jmin, mut jmax) = (m, 0usize);
                    let first = branches.partition_point(|b| b.hi <= x0);
                    for (bi, b) in branches.iter().enumerate().skip(first) {
                        if b.lo >= x1 {
                            break;
                        }
                        let a = x0.max(b.lo);
                        let c = x1.min(b.hi);
                        if c <= a {
                            continue;
                        }
                        let ph = phases[bi];
                        if b.lumped {
                            // Fraction (c - a) m of the cell, spread evenly over m targets.
                            let share = c - a;
                            for v in acc.iter_mut() {
                                *v += ph * share;
                            }
                            jmin = 0;
                            jmax = m;
                            continue;
                        }
                        let (ylo, yhi) = if a == b.lo && c == b.hi {
                            map.branch_image(b)
                        } else {
                            let (p, q) = (map.apply(b, a), map.apply(b, c));
                            (p.min(q).clamp(0.0, 1.0), p.max(q).clamp(0.0, 1.0))
                        };
                        if yhi <= ylo {
                            continue;
                        }
                        let j0 = ((ylo * mf).floor() as usize).min(m - 1);
                        let j1 = ((yhi * mf).ceil() as usize).clamp(j0 + 1, m);
                        for (j, v) in acc.iter_mut().enumerate().take(j1).skip(j0) {
                            let lo = ylo.max(j as f64 / mf);
                            let hi = yhi.min((j + 1) as f64 / mf);
                            if hi > lo {
                                *v += ph * (map.preimage_len(b, lo, hi) * mf);
                            }
                        }
                        jmin = jmin.min(j0);
                        jmax = jmax.max(j1);
                    }
                    let mut row = Vec::new();
                    if jmin < jmax {
                        for (j, v) in acc[jmin..jmax].iter_mut().enumerate() {
                            if *v != ZERO {
                                row.push(((jmin + j) as u32, *v));
                            }
                            *v = ZERO;
                        }
                    }
                    row
                },
            )
            .collect();

        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            map,
            m,
            t,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn map(&self) -> &Arc<dyn IntervalMap> {
        &self.map
    }

    pub fn map_kind(&self) -> MapKind {
        self.map.kind()
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .map(|&j| j as usize)
            .zip(self.vals[r].iter().copied())
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => ZERO,
        }
    }

    pub fn row_sums(&self) -> Vec<Complex64> {
        (0..self.m)
            .map(|i| self.row(i).map(|(_, v)| v).sum())
            .collect()
    }

    /// `y = x P`: pushes a density (row vector) forward.
    pub fn apply_left(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        for (i, &xi) in x.iter().enumerate() {
            if xi == ZERO {
                continue;
            }
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[p] as usize] += xi * self.vals[p];
            }
        }
    }

    /// `y = P x`.
    pub fn apply_right(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p] as usize];
            }
            *yi = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transferop::{BetaMap, DoublingMap, GaussMap};

    fn doubling(m: usize) -> UlamOperator {
        ulam_discretize(Arc::new(DoublingMap::new()), m).unwrap()
    }

    #[test]
    fn doubling_two_cells_all_half() {
        let op = doubling(2);
        for i in 0..2 {
            for j in 0..2 {
                assert!((op.entry(i, j) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
            }
        }
        assert!(ulam_discretize(Arc::new(DoublingMap::new()), 1).is_err());
    }

    #[test]
    fn stochastic_nonnegative_real_at_zero() {
        let maps: Vec<Arc<dyn IntervalMap>> = vec![
            Arc::new(DoublingMap::new()),
            Arc::new(GaussMap::new()),
            Arc::new(BetaMap::new(1.618_033_988_749_895).unwrap()),
            Arc::new(BetaMap::new(3.0).unwrap()),
        ];
        for map in maps {
            for m in [7usize, 64, 1000] {
                let op = ulam_discretize(map.clone(), m).unwrap();
                for s in op.row_sums() {
                    assert!(
                        (s.re - 1.0).abs() < 1e-12 && s.im == 0.0,
                        "{:?} m={m} {s}",
                        map.kind()
                    );
                }
                assert!(op.vals.iter().all(|v| v.re >= 0.0 && v.im == 0.0));
            }
        }
    }

    #[test]
    fn twisted_entries_dominated() {
        for map in [
            Arc::new(GaussMap::new()) as Arc<dyn IntervalMap>,
            Arc::new(BetaMap::new(2.5).unwrap()),
        ] {
            let op = ulam_discretize(map, 200).unwrap();
            let pt = perturbed_matrix(&op, 0.9).unwrap();
            assert_eq!(pt.row_ptr, op.row_ptr);
            for (a, b) in pt.vals.iter().zip(&op.vals) {
                assert!(a.norm() <= b.re + 1e-14);
            }
            let same = perturbed_matrix(&op, 0.0).unwrap();
            assert_eq!(same.vals, op.vals);
        }
    }

    #[test]
    fn doubling_constant_is_left_eigenvector() {
        let op = doubling(64);
        for &t in &[0.0, 0.5, 2.0, std::f64::consts::PI] {
            let pt = perturbed_matrix(&op, t).unwrap();
            let ones = vec![Complex64::new(1.0, 0.0); 64];
            let mut y = vec![ZERO; 64];
            pt.apply_left(&ones, &mut y);
            let want = (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, t)) / 2.0;
            assert!(y.iter().all(|v| (v - want).norm() < 1e-14));
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::transferop::BetaMap;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn beta_ulam_is_stochastic_and_twist_contracts(beta in 1.01f64..6.0, m in 2usize..300, t in -4.0f64..4.0) {
            let op = ulam_discretize(Arc::new(BetaMap::new(beta).unwrap()), m).unwrap();
            for s in op.row_sums() {
                prop_assert!((s.re - 1.0).abs() < 1e-12);
            }
            let pt = perturbed_matrix(&op, t).unwrap();
            for (a, b) in pt.vals.iter().zip(&op.vals) {
                prop_assert!(a.norm() <= b.re + 1e-14);
            }
        }
    }
}
