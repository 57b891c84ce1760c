use super::IntTrajectory;

/// Fiber coordinate of the skew product `(w, m) -> (T w, m + X_1(w))`
/// started on the zero fiber, with the visits to that fiber marked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkewTrack {
    /// `fibers[k - 1]` is the fiber after `k` steps, i.e. `S_k`.
    pub fibers: Vec<i64>,
    pub at_zero: Vec<bool>,
}

impl SkewTrack {
    /// Visits to the zero fiber among steps `1..=k`.
    pub fn visits_through(&self, k: usize) -> usize {
        self.at_zero[..k].iter().filter(|&&v| v).count()
    }

    pub fn total_visits(&self) -> usize {
        self.visits_through(self.at_zero.len())
    }
}

pub fn skew_product_trajectory(traj: &IntTrajectory) -> SkewTrack {
    let mut fiber = 0i64;
    let mut fibers = Vec::with_capacity(traj.len());
    let mut at_zero = Vec::with_capacity(traj.len());
    for &x in traj.increments() {
        fiber += x;
        fibers.push(fiber);
        at_zero.push(fiber == 0);
    }
    SkewTrack { fibers, at_zero }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::ProcessKind;

    #[test]
    fn alternating_path() {
        let t = IntTrajectory::from_increments(vec![1, -1, 1, -1], ProcessKind::LazyWalk, None);
        let s = skew_product_trajectory(&t);
        assert_eq!(s.fibers, vec![1, 0, 1, 0]);
        assert_eq!(s.total_visits(), 2);
        assert_eq!(s.visits_through(0), 0);
        assert_eq!(s.visits_through(1), 0);
    }
}
