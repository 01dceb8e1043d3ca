//! Inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hexflow_core::chfield::CHProgram;
use hexflow_core::scenarios::triod_staircase;
use hexflow_core::Network;

/// A random coupled program on `n` variables; every pair is coupled so the
/// whole program is one cluster.
pub fn random_program(n: usize, seed: u64) -> CHProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let b = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.gen_range(0.1..1.0);
            c[i][j] = w;
            c[j][i] = w;
        }
    }
    CHProgram::from_coefficients(a, b, c)
}

/// A staircase of 120-degree triods with `steps` junctions.
pub fn staircase(steps: usize) -> Network {
    triod_staircase(steps, 1.0)
}
