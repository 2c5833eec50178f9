//! Discrete Fréchet distance between pose sequences.
//!
//! Uses the Eiter–Mannila recurrence
//! `c(i,j) = max(d(i,j), min(c(i-1,j), c(i,j-1), c(i-1,j-1)))` and recovers a
//! coupling that attains the optimum by backtracking, preferring diagonal
//! steps, then steps that advance only `P`, then steps that advance only `Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{task_distance, MetricWeights, TaskPose};

/// Monotone, contiguous pairing of indices into two sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    pub steps: Vec<(usize, usize)>,
}

impl Coupling {
    pub fn validate(&self, p_len: usize, q_len: usize) -> Result<()> {
        let bad = |why: &str| Err(Error::input(format!("invalid coupling: {why}")));
        let (Some(first), Some(last)) = (self.steps.first(), self.steps.last()) else {
            return bad("empty");
        };
        if *first != (0, 0) {
            return bad("does not start at (0, 0)");
        }
        if p_len == 0 || q_len == 0 || *last != (p_len - 1, q_len - 1) {
            return bad("does not end at the last pair");
        }
        for w in self.steps.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return bad("steps must advance one or both indices by exactly one");
            }
        }
        Ok(())
    }
}

fn check_nonempty(p: &[TaskPose], q: &[TaskPose]) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::input("discrete Fréchet distance needs nonempty sequences"));
    }
    Ok(())
}

/// Discrete Fréchet distance and an optimal coupling.
pub fn discrete_frechet(p: &[TaskPose], q: &[TaskPose], w: &MetricWeights) -> Result<(f64, Coupling)> {
    check_nonempty(p, q)?;
    let (n, m) = (p.len(), q.len());
    let mut c = vec![0.0f64; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let d = task_distance(&p[i], &q[j], w);
            let prev = match (i, j) {
                (0, 0) => f64::NEG_INFINITY,
                (0, _) => c[at(0, j - 1)],
                (_, 0) => c[at(i - 1, 0)],
                _ => c[at(i - 1, j - 1)].min(c[at(i - 1, j)]).min(c[at(i, j - 1)]),
            };
            c[at(i, j)] = d.max(prev);
        }
    }
    let mut steps = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n - 1, m - 1);
    steps.push((i, j));
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = c[at(i - 1, j - 1)];
            let adv_p = c[at(i - 1, j)];
            let adv_q = c[at(i, j - 1)];
            if diag <= adv_p && diag <= adv_q {
                (i - 1, j - 1)
            } else if adv_p <= adv_q {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        steps.push((i, j));
    }
    steps.reverse();
    Ok((c[at(n - 1, m - 1)], Coupling { steps }))
}

/// Cost only, in O(|Q|) memory.
pub fn discrete_frechet_cost(p: &[TaskPose], q: &[TaskPose], w: &MetricWeights) -> Result<f64> {
    check_nonempty(p, q)?;
    let m = q.len();
    let mut row = vec![0.0f64; m];
    for (i, pi) in p.iter().enumerate() {
        let mut left = f64::NEG_INFINITY;
        let mut diag = f64::NEG_INFINITY;
        for j in 0..m {
            let up = row[j];
            let prev = match (i, j) {
                (0, 0) => f64::NEG_INFINITY,
                (0, _) => left,
                (_, 0) => up,
                _ => diag.min(up).min(left),
            };
            let v = task_distance(pi, &q[j], w).max(prev);
            diag = up;
            row[j] = v;
            left = v;
        }
    }
    Ok(row[m - 1])
}

/// Coupling step with the largest pose distance; ties go to the smallest
/// `i`, then the smallest `j`.
pub fn bottleneck_index(witness: &Coupling, p: &[TaskPose], q: &[TaskPose], w: &MetricWeights) -> Result<(usize, usize)> {
    witness.validate(p.len(), q.len())?;
    let mut best = witness.steps[0];
    let mut best_d = task_distance(&p[best.0], &q[best.1], w);
    for &(i, j) in &witness.steps[1..] {
        let d = task_distance(&p[i], &q[j], w);
        if d > best_d || (d == best_d && (i, j) < best) {
            best = (i, j);
            best_d = d;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn poses(xy: &[(f64, f64)]) -> Vec<TaskPose> {
        xy.iter().map(|&(x, y)| TaskPose::new(x, y, 0.0)).collect()
    }

    /// Minimum over every monotone coupling, by explicit recursion.
    fn enumerate_min(p: &[TaskPose], q: &[TaskPose], w: &MetricWeights) -> f64 {
        fn go(p: &[TaskPose], q: &[TaskPose], w: &MetricWeights, i: usize, j: usize, acc: f64) -> f64 {
            let acc = acc.max(task_distance(&p[i], &q[j], w));
            if i + 1 == p.len() && j + 1 == q.len() {
                return acc;
            }
            let mut best = f64::INFINITY;
            if i + 1 < p.len() {
                best = best.min(go(p, q, w, i + 1, j, acc));
            }
            if j + 1 < q.len() {
                best = best.min(go(p, q, w, i, j + 1, acc));
            }
            if i + 1 < p.len() && j + 1 < q.len() {
                best = best.min(go(p, q, w, i + 1, j + 1, acc));
            }
            best
        }
        go(p, q, w, 0, 0, f64::NEG_INFINITY)
    }

    #[test]
    fn identical_curves() {
        let p = poses(&[(0.0, 0.0), (1.0, 0.5), (2.0, 0.0)]);
        let (c, wit) = discrete_frechet(&p, &p, &MetricWeights::default()).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(wit.steps, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(bottleneck_index(&wit, &p, &p, &MetricWeights::default()).unwrap(), (0, 0));
    }

    #[test]
    fn shifted_line() {
        let p = poses(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let q = poses(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]);
        let (c, _) = discrete_frechet(&p, &q, &MetricWeights::default()).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn sqrt5_example_and_bottleneck() {
        let w = MetricWeights { w_rot: 3.7 };
        let p = poses(&[(0.0, 0.0), (2.0, 0.0)]);
        let q = poses(&[(0.0, 1.0), (1.0, 2.0), (2.0, 1.0)]);
        let oracle = enumerate_min(&p, &q, &w);
        let (c, wit) = discrete_frechet(&p, &q, &w).unwrap();
        assert_eq!(c, oracle);
        assert!((c - 2.2360679).abs() < 1e-7);
        let (i, j) = bottleneck_index(&wit, &p, &q, &w).unwrap();
        assert_eq!(q[j], TaskPose::new(1.0, 2.0, 0.0));
        assert_eq!((i, j), (0, 1));
    }

    #[test]
    fn single_points() {
        let p = poses(&[(0.0, 0.0)]);
        let q = poses(&[(3.0, 4.0)]);
        let w = MetricWeights::default();
        let (c, wit) = discrete_frechet(&p, &q, &w).unwrap();
        assert_eq!(c, 5.0);
        assert_eq!(bottleneck_index(&wit, &p, &q, &w).unwrap(), (0, 0));
        assert!(discrete_frechet(&[], &q, &w).is_err());
    }

    #[test]
    fn invalid_coupling_rejected() {
        let p = poses(&[(0.0, 0.0), (1.0, 0.0)]);
        let w = MetricWeights::default();
        let skip = Coupling { steps: vec![(0, 0), (1, 2)] };
        assert!(bottleneck_index(&skip, &p, &poses(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]), &w).is_err());
        let short = Coupling { steps: vec![(0, 0)] };
        assert!(bottleneck_index(&short, &p, &p, &w).is_err());
    }

    #[test]
    fn dp_matches_enumeration_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let w = MetricWeights::default();
        for _ in 0..300 {
            let gen = |rng: &mut ChaCha8Rng| -> Vec<TaskPose> {
                let n = rng.gen_range(1..=6);
                (0..n)
                    .map(|_| TaskPose::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-PI..PI)))
                    .collect()
            };
            let p = gen(&mut rng);
            let q = gen(&mut rng);
            let (c, wit) = discrete_frechet(&p, &q, &w).unwrap();
            assert_eq!(c, enumerate_min(&p, &q, &w));
            assert_eq!(c, discrete_frechet_cost(&p, &q, &w).unwrap());
            let (c_rev, _) = discrete_frechet(&q, &p, &w).unwrap();
            assert!((c - c_rev).abs() < 1e-12);
            let lb = task_distance(&p[0], &q[0], &w).max(task_distance(p.last().unwrap(), q.last().unwrap(), &w));
            assert!(c >= lb);
            wit.validate(p.len(), q.len()).unwrap();
            let attained = wit.steps.iter().map(|&(i, j)| task_distance(&p[i], &q[j], &w)).fold(0.0, f64::max);
            assert_eq!(attained, c);
        }
    }
}
