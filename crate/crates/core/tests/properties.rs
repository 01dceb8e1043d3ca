mod common;

use proptest::prelude::*;
use rand::Rng;

use hexflow_core::anisotropy::{phi, phi_dual, wulff_vertex};
use hexflow_core::chfield::{minimal_field, solve, verify_balance};
use hexflow_core::flow::{
    delta_bounds, evolve, heights_between, reconstruct, step_unbounded, FlowOptions, FlowState,
};
use hexflow_core::network::{conical_cover_exists, facets_hit, is_conical_critical, partition_graphs};
use hexflow_core::scenarios::{hexagon_four_halflines, wulff_hexagon};
use hexflow_core::{Network, Vec2, SQRT3};

fn vec2() -> impl Strategy<Value = Vec2> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

/// CH values admissible on a half-line with tangent `tau`: the Wulff vertices
/// maximizing v·ν for its normal ν. One vertex, or the two ends of a facet.
fn ch_values(tau: Vec2) -> Vec<Vec2> {
    let nu = tau.rot90();
    let best = (0..6).map(|j| wulff_vertex(j).dot(nu)).fold(f64::NEG_INFINITY, f64::max);
    (0..6).map(wulff_vertex).filter(|v| v.dot(nu) >= best - 1e-9).collect()
}

/// Whether 0 lies in the Minkowski sum of the given points and segments, by
/// the support function of the zonotope at its edge normals.
fn zero_in_sum(sets: &[&Vec<Vec2>]) -> bool {
    let center = sets.iter().fold(Vec2::ZERO, |s, c| s + c[0]);
    let gens: Vec<Vec2> = sets.iter().filter(|c| c.len() == 2).map(|c| c[1] - c[0]).collect();
    if gens.is_empty() {
        return center.norm() <= 1e-9;
    }
    gens.iter().flat_map(|g| [g.rot90(), g.rot_m90(), *g, -*g]).all(|w| {
        let reach: f64 = gens.iter().map(|g| w.dot(*g).max(0.0)).sum();
        w.dot(-center) <= reach + 1e-9
    })
}

/// Brute force: some partition of the rays into balanced pairs and triples.
fn conical_oracle(sets: &[Vec<Vec2>]) -> bool {
    fn go(sets: &[Vec<Vec2>], used: &mut Vec<bool>) -> bool {
        let Some(i) = used.iter().position(|u| !u) else {
            return true;
        };
        used[i] = true;
        let n = sets.len();
        for j in i + 1..n {
            if used[j] {
                continue;
            }
            used[j] = true;
            if zero_in_sum(&[&sets[i], &sets[j]]) && go(sets, used) {
                return true;
            }
            for k in j + 1..n {
                if !used[k] && zero_in_sum(&[&sets[i], &sets[j], &sets[k]]) {
                    used[k] = true;
                    if go(sets, used) {
                        return true;
                    }
                    used[k] = false;
                }
            }
            used[j] = false;
        }
        used[i] = false;
        false
    }
    go(sets, &mut vec![false; sets.len()])
}

fn rotation(deg: f64) -> [[f64; 2]; 2] {
    let (s, c) = deg.to_radians().sin_cos();
    [[c, -s], [s, c]]
}

fn kappas(net: &Network) -> Vec<f64> {
    minimal_field(net).expect("field exists").kappa
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn young_inequality(v in vec2(), w in vec2()) {
        prop_assert!(v.dot(w) <= phi(v) * phi_dual(w) + 1e-12);
    }

    #[test]
    fn norms_are_positively_homogeneous(v in vec2(), s in 0.01..10.0f64) {
        prop_assert!((phi(v * s) - s * phi(v)).abs() <= 1e-12 * (1.0 + s * phi(v)));
        prop_assert!((phi_dual(v * s) - s * phi_dual(v)).abs() <= 1e-12 * (1.0 + s * phi_dual(v)));
        prop_assert!((phi(v * -1.0) - phi(v)).abs() <= 1e-12);
    }

    #[test]
    fn conical_criticality_matches_brute_force(steps in proptest::collection::btree_set(0usize..24, 2..7)) {
        let mut net = Network::new();
        let o = net.add_vertex("O", Vec2::ZERO);
        for (i, s) in steps.iter().enumerate() {
            net.add_halfline(format!("L{i}"), o, Vec2::polar_deg(15.0 * *s as f64), format!("L{i}"));
        }
        let sets: Vec<Vec<usize>> = (0..net.edges.len()).map(|e| facets_hit(net.tangent(e))).collect();
        let fast = is_conical_critical(&net).unwrap();
        prop_assert_eq!(fast, conical_cover_exists(&sets));
        let values: Vec<Vec<Vec2>> = (0..net.edges.len()).map(|e| ch_values(net.tangent(e))).collect();
        prop_assert_eq!(fast, conical_oracle(&values), "rays {:?}", steps);
    }

    #[test]
    fn partition_covers_each_edge_once(seed in any::<u64>()) {
        let net = common::random_simple_network(&mut common::rng(seed));
        let mut seen = vec![0; net.edges.len()];
        for g in partition_graphs(&net) {
            for e in g.edges {
                seen[e] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn linear_system_is_spd_and_inverse_positive(seed in any::<u64>(), n in 1usize..7) {
        let prog = common::random_program(&mut common::rng(seed), n);
        let vars: Vec<usize> = (0..n).collect();
        let (m, _) = prog.linear_system(&vars);
        prop_assert!((&m - m.transpose()).amax() <= 1e-15);
        prop_assert!(m.clone().cholesky().is_some());
        let inv = m.try_inverse().expect("invertible");
        prop_assert!(inv.iter().all(|x| *x >= -1e-12));
    }

    #[test]
    fn solver_matches_descent_oracle(seed in any::<u64>(), n in 1usize..4) {
        let prog = common::random_program(&mut common::rng(seed), n);
        let x = solve(&prog).expect("program solves").x;
        let oracle = common::coordinate_descent(&prog, common::grid_minimizer(&prog, 30));
        for k in 0..n {
            prop_assert!((x[k] - oracle[k]).abs() <= 1e-6, "{:?} vs {:?}", x, oracle);
        }
        prop_assert!(prog.objective(&x) <= prog.objective(&oracle) + 1e-12);
    }

    #[test]
    fn curvature_scales_inversely(seed in any::<u64>(), s in 0.2..5.0f64) {
        let net = common::random_simple_network(&mut common::rng(seed));
        let k = kappas(&net);
        let ks = kappas(&net.scaled(s));
        for (a, b) in k.iter().zip(&ks) {
            prop_assert!((a / s - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn curvature_is_invariant_under_hexagonal_symmetries(seed in any::<u64>(), turns in 0usize..6, shift in vec2()) {
        let net = common::random_simple_network(&mut common::rng(seed));
        let k = kappas(&net);
        let moved = net.transformed(rotation(60.0 * turns as f64), shift);
        for (a, b) in k.iter().zip(&kappas(&moved)) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let mirrored = net.transformed([[1.0, 0.0], [0.0, -1.0]], shift);
        for (a, b) in k.iter().zip(&kappas(&mirrored)) {
            prop_assert!((a - b).abs() <= 1e-10, "{:?}", k);
        }
    }

    #[test]
    fn fields_balance_at_junctions(seed in any::<u64>()) {
        let net = common::random_simple_network(&mut common::rng(seed));
        let field = minimal_field(&net).expect("field exists");
        prop_assert!(verify_balance(&net, &field).unwrap().is_empty());
    }

    #[test]
    fn reconstruct_round_trips_flow_heights(seed in any::<u64>(), frac in 0.01..0.5f64) {
        let net = common::random_simple_network(&mut common::rng(seed));
        let zero = vec![0.0; net.edges.len()];
        prop_assert_eq!(&reconstruct(&net, &zero).unwrap().vertices, &net.vertices);

        let (d1, d2) = delta_bounds(&net);
        let delta = d1.min(d2);
        let Ok(stepped) = step_unbounded(&FlowState::new(&net, 0.0), frac * delta * delta) else {
            return Ok(());
        };
        let h: Vec<f64> = heights_between(&net, &stepped.network)
            .into_iter()
            .zip(&net.edges)
            .map(|(h, e)| if e.is_halfline() { 0.0 } else { h })
            .collect();
        let back = reconstruct(&net, &h).unwrap();
        for (a, b) in back.vertices.iter().zip(&stepped.network.vertices) {
            prop_assert!(a.pos.dist(b.pos) <= 1e-12);
        }
    }

    #[test]
    fn vertex_displacement_formula(u1 in -1.0..1.0f64, u2 in -1.0..1.0f64) {
        let hex = wulff_hexagon(1.0);
        let (d1, d2) = delta_bounds(&hex);
        let (h1, h2) = (u1 * d1.min(d2), u2 * d1.min(d2));
        let mut h = vec![0.0; 6];
        h[0] = h1;
        h[1] = h2;
        let moved = reconstruct(&hex, &h).unwrap();
        let got = moved.vertices[1].pos.dist(hex.vertices[1].pos);
        let want = 2.0 / SQRT3 * (h1 * h1 + h2 * h2 - h1 * h2).sqrt();
        prop_assert!((got - want).abs() <= 1e-12);
    }

    #[test]
    fn rebasing_does_not_change_the_flow(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let net = hexflow_core::scenarios::wulff_hexagon(rng.gen_range(0.5..2.0));
        let dt = 0.01 * net.min_segment_length().powi(2);
        let start = FlowState::new(&net, 0.0);
        let once = step_unbounded(&start, dt).unwrap();
        let plain = step_unbounded(&once, dt).unwrap();
        let mut rebased = once.clone();
        rebased.rebase();
        let rebased = step_unbounded(&rebased, dt).unwrap();
        for (a, b) in plain.network.vertices.iter().zip(&rebased.network.vertices) {
            prop_assert!(a.pos.dist(b.pos) <= 1e-12);
        }
        for (a, b) in plain.heights().iter().zip(&rebased.heights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flow_keeps_mirror_symmetry(a0 in 0.5..2.0f64, b0 in 0.5..2.0f64) {
        let net = hexagon_four_halflines(a0, b0);
        let opts = FlowOptions { sample_interval: Some(0.02), ..FlowOptions::default() };
        let traj = evolve(&net, 1.0, &opts).unwrap();
        let t_collapse = traj.first_collapse().map_or(f64::INFINITY, |e| e.t);
        for s in traj.first_epoch().iter().filter(|s| s.t < t_collapse) {
            prop_assert!(common::mirror_gap(&s.network, Vec2::ZERO, Vec2::new(1.0, 0.0)) <= 1e-9);
            prop_assert!(common::mirror_gap(&s.network, Vec2::ZERO, Vec2::new(0.0, 1.0)) <= 1e-9);
        }
    }
}

#[test]
fn rk4_is_fourth_order_on_the_wulff_hexagon() {
    let t_end: f64 = 0.3;
    let exact = (1.0 - 8.0 * t_end / 3.0).sqrt();
    let err = |n: usize| {
        let dt = t_end / n as f64;
        let mut state = FlowState::new(&wulff_hexagon(1.0), 0.0);
        for _ in 0..n {
            state = step_unbounded(&state, dt).unwrap();
            state.rebase();
        }
        (state.network.length(0) - exact).abs()
    };
    let (e1, e2, e3) = (err(10), err(20), err(40));
    let r1 = e1 / e2;
    let r2 = e2 / e3;
    assert!(r1 > 12.0 && r2 > 12.0, "ratios {r1} {r2}");
}

