//! Local times, the scaling sequences `B_n` and `a_n`, and exact small-horizon
//! distribution oracles for i.i.d. walks.

pub(crate) mod oracle;
mod scaling;

use std::io::Write;

use crate::processes::IntTrajectory;

pub use oracle::{
    exact_walk_distribution, expected_local_time_check, ExactWalk, ExactWalkTable,
    ExpectedLocalTimeReport, EXACT_CELL_LIMIT,
};
pub use scaling::{normalizer, Normalizer, ScalingScheme};

/// `counts[k-1] = #{ i <= k : S_i = level }` and the times at which it increments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalTimeProfile {
    pub level: i64,
    pub counts: Vec<u64>,
    /// 1-based indices `i` with `S_i = level`, increasing.
    pub return_times: Vec<usize>,
}

impl LocalTimeProfile {
    /// `l(n, level)` for the full path.
    pub fn terminal(&self) -> u64 {
        self.counts.last().copied().unwrap_or(0)
    }

    /// `l(k, level)`; `k = 0` gives 0 since counting starts at `i = 1`.
    pub fn at(&self, k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            self.counts[k - 1]
        }
    }

    /// CSV with header `step,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "step,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, c)?;
        }
        Ok(())
    }
}

pub fn local_time(traj: &IntTrajectory, level: i64) -> LocalTimeProfile {
    let mut count = 0u64;
    let mut counts = Vec::with_capacity(traj.len());
    let mut return_times = Vec::new();
    for (i, &s) in traj.partial_sums().iter().enumerate() {
        if s == level {
            count += 1;
            return_times.push(i + 1);
        }
        counts.push(count);
    }
    LocalTimeProfile {
        level,
        counts,
        return_times,
    }
}

/// `l(n, x)` for every level visited by the path.
pub fn occupation_counts(traj: &IntTrajectory) -> std::collections::BTreeMap<i64, u64> {
    let mut m = std::collections::BTreeMap::new();
    for &s in traj.partial_sums() {
        *m.entry(s).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{skew_product_trajectory, ProcessKind, ProcessSpec};
    use proptest::prelude::*;

    fn path(xs: &[i64]) -> IntTrajectory {
        IntTrajectory::from_increments(xs.to_vec(), ProcessKind::LazyWalk, None)
    }

    #[test]
    fn alternating_examples() {
        let t = path(&[1, -1, 1, -1]);
        let p0 = local_time(&t, 0);
        assert_eq!(p0.counts, vec![0, 1, 1, 2]);
        assert_eq!(p0.return_times, vec![2, 4]);
        assert_eq!(local_time(&t, 1).counts, vec![1, 1, 2, 2]);
        let p5 = local_time(&t, 5);
        assert_eq!(p5.counts, vec![0, 0, 0, 0]);
        assert!(p5.return_times.is_empty());
        assert_eq!(p0.at(0), 0);
    }

    #[test]
    fn csv_dump() {
        let mut buf = Vec::new();
        local_time(&path(&[0, 1]), 0).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,count\n1,1\n2,1\n");
    }

    proptest! {
        #[test]
        fn profile_invariants(xs in prop::collection::vec(-2i64..=2, 1..300), level in -3i64..=3) {
            let t = path(&xs);
            let p = local_time(&t, level);
            let mut prev = 0;
            for (k, &c) in p.counts.iter().enumerate() {
                let step = c - prev;
                prop_assert!(step <= 1);
                prop_assert_eq!(step == 1, t.partial_sums()[k] == level);
                prev = c;
            }
            for (j, &r) in p.return_times.iter().enumerate() {
                prop_assert_eq!(p.at(r), j as u64 + 1);
            }
            let total: u64 = occupation_counts(&t).values().sum();
            prop_assert_eq!(total, t.len() as u64);
            if level == 0 {
                let skew = skew_product_trajectory(&t);
                for k in 0..=t.len() {
                    prop_assert_eq!(skew.visits_through(k) as u64, p.at(k));
                }
            }
        }
    }

    #[test]
    fn skew_identity_on_generated_paths() {
        for seed in 0..5 {
            let t = ProcessSpec::new(ProcessKind::LazyWalk, seed)
                .generate(5000)
                .unwrap();
            let skew = skew_product_trajectory(&t);
            let p = local_time(&t, 0);
            assert_eq!(skew.total_visits() as u64, p.terminal());
        }
    }
}
