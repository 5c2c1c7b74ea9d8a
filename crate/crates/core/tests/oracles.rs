use std::collections::VecDeque;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use dpg_core::advice::{mix_policies, Distribution};
use dpg_core::envs::{canonical_map, optimal_macro, GridMap, Macro};
use dpg_core::mdp::{discounted_returns, SimRng};
use dpg_core::numerics::{accumulate_step, Gradients, NetShape, PolicyNet};

fn bfs(map: &GridMap, from: usize) -> Vec<Option<usize>> {
    let (h, w) = (map.height() as i64, map.width() as i64);
    let mut dist = vec![None; map.cell_count()];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        let (r, col) = map.position(c);
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as i64 + dr, col as i64 + dc);
            if nr < 0 || nc < 0 || nr >= h || nc >= w {
                continue;
            }
            let n = map.index(nr as usize, nc as usize);
            if !map.is_wall(n) && dist[n].is_none() {
                dist[n] = Some(dist[c].unwrap() + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

fn adjacent(map: &GridMap, a: usize, b: usize) -> bool {
    let ((ra, ca), (rb, cb)) = (map.position(a), map.position(b));
    ra.abs_diff(rb) + ca.abs_diff(cb) == 1
}

#[test]
fn macro_paths_are_shortest_in_room_walks() {
    let map = canonical_map();
    for m in Macro::ALL {
        let target = map.macro_target(m).unwrap();
        let from_target = bfs(&map, target);
        for c in (0..map.cell_count()).filter(|&c| !map.is_wall(c)) {
            let Some(path) = map.macro_path(c, m) else {
                assert!(!map.is_defined(c, m));
                continue;
            };
            assert!(map.is_defined(c, m));
            assert_eq!(map.macro_distance(c, m), Some(path.len()));
            if c == target {
                assert!(path.is_empty());
                continue;
            }
            assert_eq!(*path.last().unwrap(), target, "{m:?} from {c}");
            let mut prev = c;
            for &p in &path {
                assert!(!map.is_wall(p) && adjacent(&map, prev, p));
                prev = p;
            }
            assert!(path.len() >= from_target[c].unwrap());
            let home = map.rooms_at(c);
            for &p in &path[..path.len() - 1] {
                assert!(
                    map.rooms_at(p).iter().any(|r| home.contains(r)),
                    "{m:?} from {c} leaves its room"
                );
            }
        }
    }
}

#[test]
fn optimal_macros_follow_shortest_paths_from_every_cell() {
    let map = canonical_map();
    let to_goal = bfs(&map, map.goal());
    for c in (0..map.cell_count()).filter(|&c| !map.is_wall(c)) {
        assert_eq!(map.goal_distance(c), to_goal[c]);
        let mut cur = c;
        let mut steps = 0;
        let mut decisions = 0;
        while cur != map.goal() {
            let path = map
                .macro_path(cur, optimal_macro(&map, cur))
                .expect("optimal macro is defined");
            assert!(!path.is_empty());
            steps += path.len();
            cur = *path.last().unwrap();
            decisions += 1;
            assert!(decisions <= 10);
        }
        assert_eq!(Some(steps), to_goal[c], "from cell {c}");
    }
}

proptest! {
    #[test]
    fn returns_satisfy_the_backward_recursion(
        rewards in proptest::collection::vec(-100.0f64..100.0, 1..40),
        gamma in 0.0f64..=1.0,
    ) {
        let g = discounted_returns(&rewards, gamma).unwrap();
        let n = rewards.len();
        prop_assert!((g[n - 1] - rewards[n - 1]).abs() < 1e-12);
        for t in 0..n - 1 {
            prop_assert!((g[t] - (rewards[t] + gamma * g[t + 1])).abs() < 1e-9);
        }
        // Forward sum Σ γ^(τ-t) r_τ.
        for t in 0..n {
            let direct: f64 = (t..n).map(|tau| gamma.powi((tau - t) as i32) * rewards[tau]).sum();
            prop_assert!((g[t] - direct).abs() < 1e-8);
        }
    }

    #[test]
    fn mixing_is_normalized_and_respects_identities(
        w in proptest::collection::vec(0.0f64..1.0, 2..8),
        v in proptest::collection::vec(0.0f64..1.0, 2..8),
        pick in any::<prop::sample::Index>(),
    ) {
        let n = w.len().min(v.len());
        prop_assume!(w[..n].iter().sum::<f64>() > 0.0 && v[..n].iter().sum::<f64>() > 0.0);
        let p = Distribution::from_weights(w[..n].to_vec()).unwrap();
        let q = Distribution::from_weights(v[..n].to_vec()).unwrap();
        let u = mix_policies(&p, &Distribution::uniform(n)).unwrap();
        for (a, b) in u.probs().iter().zip(p.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let a = pick.index(n);
        let forced = mix_policies(&p, &Distribution::one_hot(n, a));
        if p.prob(a) > 0.0 {
            let target = Distribution::one_hot(n, a);
            let forced = forced.unwrap();
            prop_assert_eq!(forced.probs(), target.probs());
        } else {
            prop_assert!(forced.is_err());
        }
        if let Ok(m) = mix_policies(&p, &q) {
            prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..n {
                let expected = p.prob(i) * q.prob(i);
                prop_assert_eq!(m.prob(i) == 0.0, expected == 0.0);
            }
        }
    }

    #[test]
    fn forward_outputs_a_distribution_supported_by_the_advice(
        seed in any::<u64>(),
        input in 1usize..6,
        hidden in 1usize..8,
        actions in 2usize..6,
        zeroed in any::<prop::sample::Index>(),
    ) {
        let mut rng = SimRng::seed_from_u64(seed);
        let net = PolicyNet::new(NetShape::new(input, hidden, actions), &mut rng);
        let s: Vec<f64> = (0..input).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut advice: Vec<f64> = (0..actions).map(|_| rng.random_range(0.01..1.0)).collect();
        let z = zeroed.index(actions);
        advice[z] = 0.0;
        let y = net.forward_weights(&s, &advice).unwrap().output;
        prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(y.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert_eq!(y[z], 0.0);
    }

    #[test]
    fn step_gradient_matches_finite_differences(
        seed in any::<u64>(),
        input in 1usize..4,
        hidden in 1usize..5,
        actions in 2usize..4,
        weight in -3.0f64..3.0,
    ) {
        let shape = NetShape::new(input, hidden, actions);
        let mut rng = SimRng::seed_from_u64(seed);
        let mut net = PolicyNet::new(shape, &mut rng);
        for p in net.params_mut().iter_mut() {
            *p = rng.random_range(-1.0..1.0);
        }
        let s: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
        let advice: Vec<f64> = (0..actions).map(|_| rng.random_range(0.1..1.0)).collect();
        let action = rng.random_range(0..actions);
        let mut g = Gradients::zeros(&shape);
        accumulate_step(&net, &s, &advice, action, weight, &mut g).unwrap();
        let f = |net: &PolicyNet| -weight * net.forward_weights(&s, &advice).unwrap().output[action].ln();
        let h = 1e-5;
        for (k, a) in g.iter().copied().enumerate() {
            let orig = *net.params().iter().nth(k).unwrap();
            *net.params_mut().iter_mut().nth(k).unwrap() = orig + h;
            let up = f(&net);
            *net.params_mut().iter_mut().nth(k).unwrap() = orig - h;
            let down = f(&net);
            *net.params_mut().iter_mut().nth(k).unwrap() = orig;
            let n = (up - down) / (2.0 * h);
            prop_assert!((a - n).abs() / a.abs().max(n.abs()).max(1e-6) < 1e-4, "param {k}: {a} vs {n}");
        }
    }
}
