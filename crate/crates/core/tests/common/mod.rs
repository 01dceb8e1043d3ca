#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hexflow_core::anisotropy::hex_direction;
use hexflow_core::chfield::CHProgram;
use hexflow_core::{Network, Vec2, D};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Side lengths of a hexagon with sides along 0°, 60°, …, 300° that closes.
pub fn random_sides(rng: &mut impl Rng) -> [f64; 6] {
    loop {
        let l: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.3..2.0));
        let l4 = l[0] + l[1] - l[3];
        let l5 = l[1] + l[2] - l4;
        if l4 > 0.2 && l5 > 0.2 {
            return [l[0], l[1], l[2], l[3], l4, l5];
        }
    }
}

/// Counterclockwise hexagon P0..P5 starting at the origin; bit k of `mask`
/// puts a half-line at P_k pointing away from the hexagon.
pub fn hexagon_with_halflines(sides: [f64; 6], mask: u8) -> Network {
    let mut net = Network::new();
    let mut p = Vec2::ZERO;
    for (k, l) in sides.iter().enumerate() {
        net.add_vertex(format!("P{k}"), p);
        p = p + hex_direction(k) * *l;
    }
    for k in 0..6 {
        net.add_segment(format!("S{k}"), k, (k + 1) % 6, format!("S{k}"));
    }
    for k in 0..6 {
        if mask & (1 << k) != 0 {
            net.add_halfline(format!("H{k}"), k, hex_direction((k + 4) % 6), format!("H{k}"));
        }
    }
    net.relabel_curves();
    net
}

/// Random hexagon with at least one triple junction.
pub fn random_simple_network(rng: &mut impl Rng) -> Network {
    let sides = random_sides(rng);
    let mask = rng.gen_range(1..64u8);
    hexagon_with_halflines(sides, mask)
}

/// Random program on `n` variables; every variable has a positive a or b
/// term so the minimizer is unique.
pub fn random_program(rng: &mut impl Rng, n: usize) -> CHProgram {
    let mut coef = |p_zero: f64| if rng.gen_bool(p_zero) { 0.0 } else { rng.gen_range(0.05..2.0) };
    let mut a: Vec<f64> = (0..n).map(|_| coef(0.4)).collect();
    let b: Vec<f64> = (0..n).map(|_| coef(0.4)).collect();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = coef(0.5);
            c[i][j] = w;
            c[j][i] = w;
        }
    }
    for k in 0..n {
        if a[k] == 0.0 && b[k] == 0.0 {
            a[k] = 0.5;
        }
    }
    CHProgram::from_coefficients(a, b, c)
}

/// Best point of a uniform grid with `points` nodes per axis on [0, d]^n.
pub fn grid_minimizer(prog: &CHProgram, points: usize) -> Vec<f64> {
    let n = prog.n_vars();
    let node = |i: usize| D * i as f64 / (points - 1) as f64;
    let mut idx = vec![0usize; n];
    let mut best = (f64::INFINITY, vec![0.0; n]);
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| node(i)).collect();
        let f = prog.objective(&x);
        if f < best.0 {
            best = (f, x);
        }
        let mut k = 0;
        loop {
            if k == n {
                return best.1;
            }
            idx[k] += 1;
            if idx[k] < points {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Projected coordinate descent on [0, d]^n from `x`.
pub fn coordinate_descent(prog: &CHProgram, mut x: Vec<f64>) -> Vec<f64> {
    let n = prog.n_vars();
    for _ in 0..1_000_000 {
        let mut change: f64 = 0.0;
        for k in 0..n {
            let coupling: f64 = (0..n).filter(|&l| l != k).map(|l| prog.c[k][l]).sum();
            let pull: f64 = (0..n).filter(|&l| l != k).map(|l| prog.c[k][l] * x[l]).sum();
            let denom = prog.a[k] + prog.b[k] + coupling;
            let xk = ((prog.b[k] * D + pull) / denom).clamp(0.0, D);
            change = change.max((xk - x[k]).abs());
            x[k] = xk;
        }
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// Largest distance from a vertex mirrored in the line through `origin`
/// along `axis` to the nearest vertex, relative to the diameter.
pub fn mirror_gap(net: &Network, origin: Vec2, axis: Vec2) -> f64 {
    let axis = axis.normalized();
    let diam = net.diameter().max(1e-300);
    net.vertices
        .iter()
        .map(|v| {
            let r = v.pos - origin;
            let m = origin + axis * (2.0 * r.dot(axis)) - r;
            net.vertices.iter().map(|w| w.pos.dist(m)).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        / diam
}
