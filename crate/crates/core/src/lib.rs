//! Crystalline curvature flow of polygonal networks with a hexagonal anisotropy.

pub mod anisotropy;
pub mod chfield;
pub mod flow;
pub mod network;
pub mod render;
pub mod scenarios;
pub mod shrinker;

pub use anisotropy::{FacetIndex, HexAnisotropy, Vec2, D, SQRT3};
pub use network::{Edge, EdgeEnd, Network, NetworkError, Vertex};

/// Formats `x` with six significant digits, switching to exponent notation
/// outside [1e-4, 1e6).
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}
