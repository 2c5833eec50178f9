//! Randomised properties checked against independent oracles.

use std::f64::consts::PI;

use frechet_follow::frechet::{bottleneck_index, discrete_frechet};
use frechet_follow::geometry::{angle_diff, subdivide, task_distance, MetricWeights, Polyline, TaskPose};
use frechet_follow::io::{parse_scenario, scenario_to_string};
use frechet_follow::kinematics::{sample_ik, ArmModel, IkOptions};
use frechet_follow::layered_graph::{build, BuildOptions, Status};
use frechet_follow::product_search::ProductGraph;
use frechet_follow::scenario_gen::{generate, GenOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pose() -> impl Strategy<Value = TaskPose> {
    (-3.0..3.0f64, -3.0..3.0f64, -PI..PI).prop_map(|(x, y, t)| TaskPose::new(x, y, t))
}

fn poses(max: usize) -> impl Strategy<Value = Vec<TaskPose>> {
    prop::collection::vec(pose(), 1..=max)
}

/// Decides "Fréchet distance <= eps" by reachability over the free cells.
fn frechet_at_most(p: &[TaskPose], q: &[TaskPose], w: &MetricWeights, eps: f64) -> bool {
    let free = |i: usize, j: usize| task_distance(&p[i], &q[j], w) <= eps;
    let mut reach = vec![vec![false; q.len()]; p.len()];
    for i in 0..p.len() {
        for j in 0..q.len() {
            let from_prev = (i == 0 && j == 0)
                || (i > 0 && reach[i - 1][j])
                || (j > 0 && reach[i][j - 1])
                || (i > 0 && j > 0 && reach[i - 1][j - 1]);
            reach[i][j] = from_prev && free(i, j);
        }
    }
    reach[p.len() - 1][q.len() - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn angle_diff_is_a_symmetric_circle_distance(a in -20.0..20.0f64, b in -20.0..20.0f64) {
        let d = angle_diff(a, b);
        prop_assert!((0.0..=PI).contains(&d));
        prop_assert_eq!(d, angle_diff(b, a));
        prop_assert!((angle_diff(a, b + 2.0 * PI) - d).abs() < 1e-9);
    }

    #[test]
    fn frechet_is_the_smallest_feasible_leash(p in poses(7), q in poses(7), w_rot in 0.0..1.0f64) {
        let w = MetricWeights { w_rot };
        let (cost, coupling) = discrete_frechet(&p, &q, &w).unwrap();
        // The decision procedure accepts the cost and rejects anything smaller.
        prop_assert!(frechet_at_most(&p, &q, &w, cost));
        let below = cost - 1e-12 * cost.max(1.0);
        prop_assert!(cost == 0.0 || !frechet_at_most(&p, &q, &w, below));
        // The witness coupling attains the cost at its bottleneck.
        coupling.validate(p.len(), q.len()).unwrap();
        let (i, j) = bottleneck_index(&coupling, &p, &q, &w).unwrap();
        prop_assert_eq!(task_distance(&p[i], &q[j], &w), cost);
    }

    #[test]
    fn frechet_symmetry_and_bounds(p in poses(8), q in poses(8)) {
        let w = MetricWeights::default();
        let (pq, _) = discrete_frechet(&p, &q, &w).unwrap();
        let (qp, _) = discrete_frechet(&q, &p, &w).unwrap();
        prop_assert_eq!(pq, qp);
        let ends = task_distance(&p[0], &q[0], &w).max(task_distance(p.last().unwrap(), q.last().unwrap(), &w));
        prop_assert!(pq >= ends);
        let all_pairs = p.iter().flat_map(|a| q.iter().map(move |b| (a, b))).map(|(a, b)| task_distance(a, b, &w)).fold(0.0, f64::max);
        prop_assert!(pq <= all_pairs);
        prop_assert_eq!(discrete_frechet(&p, &p, &w).unwrap().0, 0.0);
    }

    #[test]
    fn subdividing_a_polyline_keeps_its_vertices(p in prop::collection::vec(pose(), 2..6), r in 0usize..6) {
        let poly = Polyline::new(p.clone()).unwrap();
        let sub = subdivide(&poly, r);
        prop_assert_eq!(sub.len(), (p.len() - 1) * (r + 1) + 1);
        for (k, v) in p.iter().enumerate() {
            prop_assert_eq!(sub.points()[k * (r + 1)], *v);
        }
    }

    #[test]
    fn ik_solutions_reproduce_their_target(seed in any::<u64>(), r in 0.3..3.9f64, phi in -PI..PI, theta in -PI..PI) {
        let arm = ArmModel::unlimited(vec![1.0; 4]).unwrap();
        let target = TaskPose::new(r * phi.cos(), r * phi.sin(), theta);
        let unit = MetricWeights { w_rot: 1.0 };
        let sols = sample_ik(&arm, &target, 6, &mut ChaCha8Rng::seed_from_u64(seed));
        for q in &sols {
            prop_assert!(task_distance(&arm.fk(q).unwrap(), &target, &unit) <= 1e-9);
            prop_assert!(arm.within_limits(q));
        }
        for (a, q) in sols.iter().enumerate() {
            for b in &sols[a + 1..] {
                prop_assert!(q.distance(b) > IkOptions::default().distinct_threshold);
            }
        }
    }

    #[test]
    fn targets_beyond_reach_have_no_ik(seed in any::<u64>(), extra in 1e-6..3.0f64, phi in -PI..PI, theta in -PI..PI) {
        let arm = ArmModel::unlimited(vec![1.0, 0.7, 0.5, 0.3]).unwrap();
        let r = arm.reach() + extra;
        let target = TaskPose::new(r * phi.cos(), r * phi.sin(), theta);
        prop_assert!(sample_ik(&arm, &target, 4, &mut ChaCha8Rng::seed_from_u64(seed)).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scenarios_survive_a_json_round_trip(seed in any::<u64>()) {
        let sc = generate(1, seed, &GenOptions::default()).unwrap().remove(0);
        let text = scenario_to_string(&sc);
        let back = parse_scenario(&text, "memory").unwrap();
        prop_assert_eq!(&back, &sc);
        prop_assert_eq!(scenario_to_string(&back), text);
    }

    #[test]
    fn blocking_never_lowers_the_bottleneck(seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..5)) {
        let arm = ArmModel::unlimited(vec![1.0; 4]).unwrap();
        let line = Polyline::new(vec![TaskPose::new(2.0, -1.0, 0.0), TaskPose::new(2.0, 1.0, 0.0)]).unwrap();
        let (mut lg, rg) = build(&line, 3, 3, &arm, &mut ChaCha8Rng::seed_from_u64(seed), &BuildOptions::default()).unwrap();
        let w = MetricWeights::default();
        let mut pg = ProductGraph::build(&lg, &rg, &arm, &w).unwrap();
        let mut prev = pg.bottleneck_search().map_or(f64::INFINITY, |r| r.bottleneck_cost);
        for pick in picks {
            let live: Vec<_> = lg.edges().map(|e| e.id).collect();
            let report = lg.set_edge_status(live[pick.index(live.len())], Status::Blocked);
            pg.apply_change(&report, &lg, &rg).unwrap();
            let now = pg.bottleneck_search().map_or(f64::INFINITY, |r| r.bottleneck_cost);
            prop_assert!(now >= prev);
            let fresh = ProductGraph::build(&lg, &rg, &arm, &w).unwrap().bottleneck_search().map_or(f64::INFINITY, |r| r.bottleneck_cost);
            prop_assert_eq!(now, fresh);
            prev = now;
        }
    }

    #[test]
    fn mixed_mutations_match_a_rebuild(seed in any::<u64>(), ops in prop::collection::vec((0u8..5, any::<prop::sample::Index>()), 1..6)) {
        let arm = ArmModel::unlimited(vec![1.0; 4]).unwrap();
        let line = Polyline::new(vec![TaskPose::new(2.0, -1.0, 0.3), TaskPose::new(1.5, 1.0, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut lg, mut rg) = build(&line, 2, 2, &arm, &mut rng, &BuildOptions { initial_resolution: 0, ..Default::default() }).unwrap();
        let w = MetricWeights::default();
        let ik = IkOptions::default();
        let mut pg = ProductGraph::build(&lg, &rg, &arm, &w).unwrap();
        pg.bottleneck_search();
        for (op, pick) in ops {
            let live: Vec<_> = lg.edges().map(|e| e.id).collect();
            let report = match op {
                0 => lg.add_ik_samples(pick.index(lg.layers().len()), 1, &arm, &mut rng, &ik).unwrap(),
                1 => lg.add_layer(&mut rg, 0.1 + 0.8 * pick.index(1000) as f64 / 1000.0, 1, &arm, &mut rng, &ik).unwrap(),
                2 => lg.refine_edge(live[pick.index(live.len())]).unwrap(),
                3 => rg.refine_segment(pick.index(rg.segments().len())).unwrap(),
                _ => lg.set_edge_status(live[pick.index(live.len())], Status::Blocked),
            };
            pg.apply_change(&report, &lg, &rg).unwrap();
            let mut fresh = ProductGraph::build(&lg, &rg, &arm, &w).unwrap();
            prop_assert_eq!(pg.bottleneck_search(), fresh.bottleneck_search());
            prop_assert_eq!(pg.vertex_costs(), fresh.vertex_costs());
            prop_assert_eq!(pg.edge_keys(), fresh.edge_keys());
        }
    }
}
