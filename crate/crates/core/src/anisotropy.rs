//! The regular hexagonal anisotropy: φ, its dual φ°, the Wulff hexagon and
//! the Cahn–Hoffman parametrization of its facets.
//!
//! The Wulff shape B^φ is the hexagon circumscribed to the unit circle with
//! two horizontal facets. Facet `k` has outer normal `u_k` at angle
//! 30° + 60°k and runs between the Wulff vertices `v_k` and `v_{k+1}`, where
//! `v_j` sits at angle 60°j with |v_j| = 2/√3.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use thiserror::Error;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Euclidean side length of the unit Wulff hexagon, 2/√3.
pub const D: f64 = 2.0 / SQRT3;
/// Default angular tolerance (radians) for facet matching.
pub const ANGLE_TOL: f64 = 1e-9;

pub type FacetIndex = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnisotropyError {
    #[error("direction ({0}, {1}) is not parallel to a facet of the Wulff shape")]
    NonAdmissibleDirection(f64, f64),
    #[error("facet parameter {0} outside [0, 2/sqrt(3)]")]
    ParamOutOfRange(f64),
    #[error("facet index {0} out of range")]
    BadFacet(usize),
    #[error("chain contains an unbounded edge")]
    UnboundedEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at `deg` degrees.
    pub fn polar_deg(deg: f64) -> Self {
        let r = deg.to_radians();
        Vec2::new(r.cos(), r.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counterclockwise rotation by 90°.
    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Clockwise rotation by 90°.
    pub fn rot_m90(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn rotate_deg(self, deg: f64) -> Vec2 {
        let (s, c) = deg.to_radians().sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle_deg(self) -> f64 {
        self.y.atan2(self.x).to_degrees()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Outer unit normal of facet `k` (angle 30° + 60°k). Exact table values.
pub fn facet_normal(k: FacetIndex) -> Vec2 {
    const H: f64 = SQRT3 / 2.0;
    match k % 6 {
        0 => Vec2::new(H, 0.5),
        1 => Vec2::new(0.0, 1.0),
        2 => Vec2::new(-H, 0.5),
        3 => Vec2::new(-H, -0.5),
        4 => Vec2::new(0.0, -1.0),
        _ => Vec2::new(H, -0.5),
    }
}

/// Wulff vertex `v_j` at angle 60°j, |v_j| = 2/√3.
pub fn wulff_vertex(j: usize) -> Vec2 {
    const R: f64 = 1.0 / SQRT3;
    match j % 6 {
        0 => Vec2::new(D, 0.0),
        1 => Vec2::new(R, 1.0),
        2 => Vec2::new(-R, 1.0),
        3 => Vec2::new(-D, 0.0),
        4 => Vec2::new(-R, -1.0),
        _ => Vec2::new(R, -1.0),
    }
}

/// Unit direction at angle 60°j. Every admissible edge points along one of these.
pub fn hex_direction(j: usize) -> Vec2 {
    wulff_vertex(j) * (SQRT3 / 2.0)
}

/// Facet tangent `t_k`, the clockwise rotation of `u_k`; it equals the unit
/// tangent of any edge whose normal is `u_k`.
pub fn facet_tangent(k: FacetIndex) -> Vec2 {
    facet_normal(k).rot_m90()
}

/// Endpoint `V_k^-` of facet `k`, the origin of the CH parameter.
pub fn facet_start(k: FacetIndex) -> Vec2 {
    wulff_vertex(k + 1)
}

/// Endpoint `V_k^+ = V_k^- + d t_k`.
pub fn facet_end(k: FacetIndex) -> Vec2 {
    wulff_vertex(k)
}

pub fn phi(v: Vec2) -> f64 {
    (0..6).map(|k| v.dot(facet_normal(k))).fold(f64::NEG_INFINITY, f64::max)
}

pub fn phi_dual(v: Vec2) -> f64 {
    (0..6).map(|j| v.dot(wulff_vertex(j))).fold(f64::NEG_INFINITY, f64::max)
}

/// Index of the facet whose outer normal is within `tol_angle` of `nu`.
pub fn facet_of_normal(nu: Vec2, tol_angle: f64) -> Result<FacetIndex, AnisotropyError> {
    let a = nu.y.atan2(nu.x).to_degrees();
    let k = ((a - 30.0) / 60.0).round().rem_euclid(6.0) as usize;
    let dev = facet_normal(k).cross(nu).atan2(facet_normal(k).dot(nu)).abs();
    if dev <= tol_angle {
        Ok(k)
    } else {
        Err(AnisotropyError::NonAdmissibleDirection(nu.x, nu.y))
    }
}

/// Index `j` of the hexagonal direction (angle 60°j) within `tol_angle` of `dir`.
pub fn direction_index(dir: Vec2, tol_angle: f64) -> Result<usize, AnisotropyError> {
    let a = dir.y.atan2(dir.x).to_degrees();
    let j = (a / 60.0).round().rem_euclid(6.0) as usize;
    let h = hex_direction(j);
    let dev = h.cross(dir).atan2(h.dot(dir)).abs();
    if dev <= tol_angle {
        Ok(j)
    } else {
        Err(AnisotropyError::NonAdmissibleDirection(dir.x, dir.y))
    }
}

/// The point `V_k^- + s t_k` of facet `k`.
pub fn ch_point(k: FacetIndex, s: f64) -> Result<Vec2, AnisotropyError> {
    if k > 5 {
        return Err(AnisotropyError::BadFacet(k));
    }
    if !(-1e-12..=D + 1e-12).contains(&s) {
        return Err(AnisotropyError::ParamOutOfRange(s));
    }
    Ok(facet_start(k) + facet_tangent(k) * s)
}

/// Inverse of [`ch_point`]: the parameter of `n` projected on facet `k`.
pub fn ch_param(k: FacetIndex, n: Vec2) -> f64 {
    (n - facet_start(k)).dot(facet_tangent(k))
}

/// A piece of a polygonal chain.
#[derive(Debug, Clone, Copy)]
pub enum Piece {
    Segment(Vec2, Vec2),
    HalfLine(Vec2, Vec2),
}

/// φ-length Σ φ°(ν_i)|S_i| of a chain; rejects half-lines.
pub fn phi_length(chain: &[Piece]) -> Result<f64, AnisotropyError> {
    let mut total = 0.0;
    for p in chain {
        match *p {
            Piece::Segment(a, b) => {
                let t = b - a;
                let len = t.norm();
                if len > 0.0 {
                    total += phi_dual((t * (1.0 / len)).rot90()) * len;
                }
            }
            Piece::HalfLine(..) => return Err(AnisotropyError::UnboundedEdge),
        }
    }
    Ok(total)
}

/// The constant tables of the anisotropy, for callers that want them as data.
#[derive(Debug, Clone, Serialize)]
pub struct HexAnisotropy {
    pub facet_normals: [Vec2; 6],
    pub wulff_vertices: [Vec2; 6],
    pub side_length: f64,
    pub frank_vertices: [Vec2; 6],
}

impl HexAnisotropy {
    pub fn new() -> Self {
        let normals = std::array::from_fn(facet_normal);
        HexAnisotropy {
            facet_normals: normals,
            wulff_vertices: std::array::from_fn(wulff_vertex),
            side_length: D,
            frank_vertices: normals,
        }
    }

    pub fn phi(&self, v: Vec2) -> f64 {
        phi(v)
    }

    pub fn phi_dual(&self, v: Vec2) -> f64 {
        phi_dual(v)
    }
}

impl Default for HexAnisotropy {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn phi_examples() {
        assert!(close(phi(Vec2::new(D, 0.0)), 1.0));
        assert!(close(phi(Vec2::new(0.0, 1.0)), 1.0));
        assert!(close(phi(Vec2::new(1.0, 1.0)), (SQRT3 + 1.0) / 2.0));
    }

    #[test]
    fn phi_dual_examples() {
        assert!(close(phi_dual(Vec2::new(0.0, 1.0)), 1.0));
        assert!(close(phi_dual(Vec2::new(1.0, 0.0)), D));
        assert!(close(phi_dual(facet_normal(0)), 1.0));
    }

    #[test]
    fn facet_lookup() {
        assert_eq!(facet_of_normal(Vec2::new(0.0, 1.0), ANGLE_TOL), Ok(1));
        assert_eq!(facet_of_normal(Vec2::new(SQRT3 / 2.0, 0.5), ANGLE_TOL), Ok(0));
        assert!(matches!(
            facet_of_normal(Vec2::new(1.0, 0.0), ANGLE_TOL),
            Err(AnisotropyError::NonAdmissibleDirection(..))
        ));
    }

    #[test]
    fn facet_tables_consistent() {
        for k in 0..6 {
            let u = facet_normal(k);
            assert!(close(u.norm(), 1.0));
            assert!(close(facet_start(k).dot(u), 1.0));
            assert!(close(facet_end(k).dot(u), 1.0));
            assert!(close(facet_start(k).dist(facet_end(k)), D));
            let t = (facet_end(k) - facet_start(k)) * (1.0 / D);
            assert!(t.dist(facet_tangent(k)) < 1e-12);
            // tangent of an edge with normal u_k is rot(-90) u_k
            assert!(t.rot90().dist(u) < 1e-12);
        }
    }

    #[test]
    fn ch_point_round_trip_and_midpoint() {
        let k = 1;
        assert!(ch_point(k, D / 2.0).unwrap().dist(Vec2::new(0.0, 1.0)) < 1e-12);
        // s = 0 is V^-, the vertex reached from the tangent's tail
        assert!(ch_point(k, 0.0).unwrap().dist(Vec2::new(-1.0 / SQRT3, 1.0)) < 1e-12);
        for s in [0.0, D / 3.0, D] {
            assert!(close(ch_param(k, ch_point(k, s).unwrap()), s));
        }
        assert!(matches!(ch_point(k, 2.0), Err(AnisotropyError::ParamOutOfRange(_))));
    }

    #[test]
    fn phi_length_examples() {
        let seg = Piece::Segment(Vec2::ZERO, hex_direction(0) * 3.0);
        assert!(close(phi_length(&[seg]).unwrap(), 3.0));
        let hl = Piece::HalfLine(Vec2::ZERO, hex_direction(0));
        assert_eq!(phi_length(&[hl]), Err(AnisotropyError::UnboundedEdge));
    }

    #[test]
    fn triangle_identities() {
        // [AB] and [BC] parallel to adjacent facets: the φ-length of the
        // chord equals the sum of the two.
        let a = Vec2::ZERO;
        let b = a + hex_direction(0) * 1.3;
        let c = b + hex_direction(1) * 0.7;
        let lhs = phi_length(&[Piece::Segment(a, c)]).unwrap();
        let rhs = phi_length(&[Piece::Segment(a, b), Piece::Segment(b, c)]).unwrap();
        assert!(close(lhs, rhs));

        // equilateral triangle with sides on three non-adjacent facets:
        // ℓ_φ([CX]) = ℓ_φ([AB]) for any X on [AB]
        let a = Vec2::ZERO;
        let b = hex_direction(0) * 2.0;
        let c = hex_direction(1) * 2.0;
        let ab = phi_length(&[Piece::Segment(a, b)]).unwrap();
        for lambda in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let x = a + (b - a) * lambda;
            let cx = phi_length(&[Piece::Segment(c, x)]).unwrap();
            assert!(close(cx, ab), "lambda {lambda}: {cx} vs {ab}");
        }
    }
}
