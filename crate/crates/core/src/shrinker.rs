//! Homothetically shrinking networks made of one hexagon plus half-lines.
//!
//! Interior-center configurations are described by the set of hexagon
//! vertices A1..A6 carrying a half-line. Every half-line lies on a line through
//! the homothety center O, so it bisects the 120° angle at its vertex. The
//! unknowns are ω = sin(60°+θ)/sin θ, where θ is the angle at a vertex between
//! the diagonal towards O and one of the two sides. Unbarred ω₂, ω₃, ω₄ are
//! taken at A2, A3, A4 against the following side, barred ω̄₂, ω̄₃ at A6, A5
//! against the preceding side. A half-line at a vertex forces its ω to 1.
//!
//! With h the distance from O to S1 and a = |S1|, the heights of S1..S6 are
//! h·g and the side lengths a·f, where
//!
//! g = (1, 1/ω₂, 1/(ω₂ω₃), 1/(ω̄₂ω̄₃), 1/ω̄₂, 1),
//! f = (1, (ω₂ω₃−ω₃+1)/ω₃, (ω₃ω₄−ω₄+1)/(ω₃ω₄), (ω̄₃+ω₄−1)/(ω₃ω₄),
//!      (ω̄₂ω̄₃−ω̄₃+1)/(ω₃ω₄), ω₂/ω̄₂).
//!
//! The network shrinks homothetically iff γᵢ = cᵢ/(fᵢgᵢ) is the same for all
//! six sides, cᵢ = −κᵢ·aᵢ being the curvature coefficient of side i.

use crate::anisotropy::{direction_index, hex_direction, Vec2, SQRT3};
use crate::flow::{evolve, homothety_check, normal_speeds, FlowError, FlowOptions};
use crate::network::Network;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShrinkerError {
    #[error("hexagon does not close: gap {gap}")]
    ClosureFailure { gap: f64 },
    #[error("side {side} has non-positive length {length}")]
    NonPositiveSide { side: usize, length: f64 },
    #[error("half-line at A{vertex} does not point along a facet direction")]
    HalflineDirection { vertex: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// ω = sin(60°+θ)/sin θ.
pub fn omega_of_theta(theta_deg: f64) -> f64 {
    let t = theta_deg.to_radians();
    (t + std::f64::consts::FRAC_PI_3).sin() / t.sin()
}

/// Inverse of [`omega_of_theta`] on (0°, 120°): cot θ = (2ω−1)/√3.
pub fn theta_of_omega(omega: f64) -> f64 {
    SQRT3.atan2(2.0 * omega - 1.0).to_degrees()
}

// ---------------------------------------------------------------------------
// Configurations

/// Set of hexagon vertices carrying a half-line; bit i stands for A(i+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InteriorConfig {
    mask: u8,
}

impl InteriorConfig {
    /// From zero-based vertex indices (0 is A1).
    pub fn new(vertices: &[usize]) -> Result<Self, ShrinkerError> {
        let mut mask = 0u8;
        for &v in vertices {
            if v >= 6 {
                return Err(ShrinkerError::InvalidConfig(format!("vertex index {v} out of range")));
            }
            mask |= 1 << v;
        }
        if mask == 0 {
            return Err(ShrinkerError::InvalidConfig("no half-lines".into()));
        }
        Ok(InteriorConfig { mask })
    }

    /// Parses labels like `A1,A3`.
    pub fn parse(text: &str) -> Result<Self, ShrinkerError> {
        let mut out = Vec::new();
        for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let digits = tok.trim_start_matches(['A', 'a']);
            let k: usize = digits
                .parse()
                .map_err(|_| ShrinkerError::InvalidConfig(format!("bad vertex label {tok:?}")))?;
            if !(1..=6).contains(&k) {
                return Err(ShrinkerError::InvalidConfig(format!("bad vertex label {tok:?}")));
            }
            out.push(k - 1);
        }
        Self::new(&out)
    }

    pub fn has(&self, v: usize) -> bool {
        self.mask & (1 << (v % 6)) != 0
    }

    pub fn vertices(&self) -> Vec<usize> {
        (0..6).filter(|&v| self.has(v)).collect()
    }

    pub fn count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn label(&self) -> String {
        self.vertices().iter().map(|v| format!("A{}", v + 1)).collect::<Vec<_>>().join(",")
    }

    /// Image under v ↦ (±v + r) mod 6.
    fn mapped(&self, r: usize, mirror: bool) -> InteriorConfig {
        let mut mask = 0u8;
        for v in self.vertices() {
            let w = if mirror { (6 + r - v) % 6 } else { (v + r) % 6 };
            mask |= 1 << w;
        }
        InteriorConfig { mask }
    }

    /// Representative of the orbit under the symmetries of the hexagon: the
    /// image whose sorted vertex list is lexicographically smallest. It always
    /// contains A1.
    pub fn canonical(&self) -> InteriorConfig {
        let mut best = *self;
        for r in 0..6 {
            for mirror in [false, true] {
                let c = self.mapped(r, mirror);
                if c.vertices() < best.vertices() {
                    best = c;
                }
            }
        }
        best
    }

    /// Canonical representatives of all twelve orbits, by size then pattern.
    pub fn orbits() -> Vec<InteriorConfig> {
        let mut reps: Vec<InteriorConfig> =
            (1u8..64).map(|m| InteriorConfig { mask: m }.canonical()).collect();
        reps.sort_by_key(|c| (c.count(), c.vertices()));
        reps.dedup();
        reps
    }
}

// ---------------------------------------------------------------------------
// ω variables

/// Index of each unknown in the full vector (ω₂, ω₃, ω₄, ω̄₂, ω̄₃).
const W2: usize = 0;
const W3: usize = 1;
const W4: usize = 2;
const WB2: usize = 3;
const WB3: usize = 4;

/// Hexagon vertex (zero-based) whose angle each unknown encodes.
const UNKNOWN_VERTEX: [usize; 5] = [1, 2, 3, 5, 4];
const UNKNOWN_NAMES: [&str; 5] = ["w2", "w3", "w4", "wb2", "wb3"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaState {
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub wb2: f64,
    pub wb3: f64,
    pub wb4: f64,
}

impl OmegaState {
    fn from_full(w: &[f64; 5]) -> Self {
        OmegaState { w2: w[W2], w3: w[W3], w4: w[W4], wb2: w[WB2], wb3: w[WB3], wb4: 1.0 / w[W4] }
    }

    fn full(&self) -> [f64; 5] {
        [self.w2, self.w3, self.w4, self.wb2, self.wb3]
    }

    /// The three identities among the angles; all vanish on a closed hexagon.
    pub fn identity_residuals(&self) -> [f64; 3] {
        [
            self.w4 * self.wb4 - 1.0,
            self.wb3 * self.wb2 - self.w4 * self.w3 * self.w2,
            self.w3 * self.w2 - self.wb4 * self.wb3 * self.wb2,
        ]
    }

    /// Heights of S1..S6 in units of the height of S1.
    pub fn heights(&self) -> [f64; 6] {
        height_factors(&self.full())
    }

    /// Side lengths of S1..S6 in units of |S1|.
    pub fn sides(&self) -> [f64; 6] {
        side_factors(&self.full())
    }

    /// Angles θ₁..θ₄ at A1..A4 against the following side.
    pub fn theta(&self) -> [f64; 4] {
        [60.0, theta_of_omega(self.w2), theta_of_omega(self.w3), theta_of_omega(self.w4)]
    }

    /// Angles θ̄₁..θ̄₄ at A1, A6, A5, A4 against the preceding side.
    pub fn theta_bar(&self) -> [f64; 4] {
        [60.0, theta_of_omega(self.wb2), theta_of_omega(self.wb3), theta_of_omega(self.wb4)]
    }
}

fn height_factors(w: &[f64; 5]) -> [f64; 6] {
    [1.0, 1.0 / w[W2], 1.0 / (w[W2] * w[W3]), 1.0 / (w[WB2] * w[WB3]), 1.0 / w[WB2], 1.0]
}

fn side_factors(w: &[f64; 5]) -> [f64; 6] {
    let (w2, w3, w4, wb2, wb3) = (w[W2], w[W3], w[W4], w[WB2], w[WB3]);
    [
        1.0,
        (w2 * w3 - w3 + 1.0) / w3,
        (w3 * w4 - w4 + 1.0) / (w3 * w4),
        (wb3 + w4 - 1.0) / (w3 * w4),
        (wb2 * wb3 - wb3 + 1.0) / (w3 * w4),
        w2 / wb2,
    ]
}

/// Curvature coefficients cᵢ = −κᵢaᵢ. Sides joined through half-line vertices
/// share the facet gap 2/√3 in proportion to their lengths.
pub fn curvature_coefficients(config: InteriorConfig, sides: &[f64; 6]) -> [f64; 6] {
    let mut c = [0.0; 6];
    if config.count() == 6 {
        return c;
    }
    // side i runs from A(i+1) to A(i+2); it is linked to side i+1 iff A(i+2) has a half-line
    let start = (0..6).find(|&i| !config.has(i)).expect("some simple vertex");
    let mut run: Vec<usize> = Vec::new();
    for k in 0..6 {
        let i = (start + k) % 6;
        run.push(i);
        if !config.has(i + 1) {
            let total: f64 = run.iter().map(|&j| sides[j]).sum();
            for &j in &run {
                c[j] = 2.0 / SQRT3 * sides[j] / total;
            }
            run.clear();
        }
    }
    c
}

/// γᵢ = cᵢ/(fᵢgᵢ) for the full ω vector.
fn gammas(config: InteriorConfig, w: &[f64; 5]) -> [f64; 6] {
    let f = side_factors(w);
    let g = height_factors(w);
    let c = curvature_coefficients(config, &f);
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = c[i] / (f[i] * g[i]);
    }
    out
}

// ---------------------------------------------------------------------------
// Residual system

/// The γ-equalities and angle identities over the unknowns left free after
/// forcing ω = 1 at half-line vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSystem {
    pub config: InteriorConfig,
    /// Indices into (ω₂, ω₃, ω₄, ω̄₂, ω̄₃) of the free unknowns.
    pub free: Vec<usize>,
    pub fd_step: f64,
}

pub fn build_residuals(config: InteriorConfig) -> ResidualSystem {
    let free = (0..5).filter(|&u| !config.has(UNKNOWN_VERTEX[u])).collect();
    ResidualSystem { config, free, fd_step: 1e-7 }
}

impl ResidualSystem {
    pub fn dims(&self) -> usize {
        self.free.len()
    }

    pub fn unknown_names(&self) -> Vec<&'static str> {
        self.free.iter().map(|&u| UNKNOWN_NAMES[u]).collect()
    }

    pub fn full(&self, x: &[f64]) -> [f64; 5] {
        let mut w = [1.0; 5];
        for (k, &u) in self.free.iter().enumerate() {
            w[u] = x[k];
        }
        w
    }

    /// ln γ₁ − ln γ₂, …, ln γ₅ − ln γ₆ followed by the two independent angle
    /// identities, also as log ratios. Plain differences vanish spuriously as
    /// ω₂, ω̄₂ → 0, where every γ tends to zero.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let w = self.full(x);
        let g = gammas(self.config, &w);
        let ln = |v: f64| if v > 0.0 { v.ln() } else { f64::NAN };
        let mut r: Vec<f64> = (0..5).map(|i| ln(g[i]) - ln(g[i + 1])).collect();
        r.push(ln(w[WB3] * w[WB2]) - ln(w[W4] * w[W3] * w[W2]));
        r.push(ln(w[W3] * w[W2]) - ln(w[WB3] * w[WB2] / w[W4]));
        r
    }

    /// Forward-difference Jacobian.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let r0 = self.eval(x);
        let mut j = DMatrix::zeros(r0.len(), x.len());
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            let h = self.fd_step * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let r1 = self.eval(&xp);
            xp[k] = x[k];
            for i in 0..r0.len() {
                j[(i, k)] = (r1[i] - r0[i]) / h;
            }
        }
        j
    }
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn sq_norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub const ACCEPT_RESIDUAL: f64 = 1e-12;
const DEDUP_TOL: f64 = 1e-8;
const OMEGA_MIN: f64 = 1e-6;
const OMEGA_MAX: f64 = 1e6;
const START_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Damped Gauss–Newton with Armijo backtracking, keeping every unknown positive.
fn newton(sys: &ResidualSystem, x0: &[f64]) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut r = sys.eval(&x);
    if !r.iter().all(|v| v.is_finite()) {
        return None;
    }
    for _ in 0..200 {
        if inf_norm(&r) <= 1e-14 {
            break;
        }
        let j = sys.jacobian(&x);
        if !j.iter().all(|v| v.is_finite()) {
            return None;
        }
        let rhs = -DVector::from_vec(r.clone());
        let delta = j.clone().svd(true, true).solve(&rhs, 1e-14).ok()?;
        let phi = sq_norm(&r);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + t * d).collect();
            if cand.iter().all(|v| *v > 0.0 && v.is_finite()) {
                let rc = sys.eval(&cand);
                if rc.iter().all(|v| v.is_finite()) && sq_norm(&rc) <= (1.0 - 1e-4 * t) * phi {
                    accepted = Some((cand, rc));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((c, rc)) => {
                x = c;
                r = rc;
            }
            None => break,
        }
    }
    (inf_norm(&r) <= ACCEPT_RESIDUAL).then_some(x)
}

/// Every positive root with positive side lengths, deduplicated.
pub fn solve_all(config: InteriorConfig) -> Vec<OmegaState> {
    let sys = build_residuals(config);
    let n = sys.dims();
    let mut roots: Vec<Vec<f64>> = Vec::new();
    let mut push = |x: Vec<f64>| {
        let w = sys.full(&x);
        // roots escaping to the boundary are limits of degenerate hexagons
        if w.iter().any(|v| !(OMEGA_MIN..=OMEGA_MAX).contains(v)) || side_factors(&w).iter().any(|s| *s <= 0.0) {
            return;
        }
        if !roots.iter().any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= DEDUP_TOL)) {
            roots.push(x);
        }
    };
    if n == 0 {
        if inf_norm(&sys.eval(&[])) <= ACCEPT_RESIDUAL {
            push(Vec::new());
        }
    } else {
        let total = START_GRID.len().pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let x0: Vec<f64> = (0..n)
                .map(|_| {
                    let v = START_GRID[c % START_GRID.len()];
                    c /= START_GRID.len();
                    v
                })
                .collect();
            if let Some(x) = newton(&sys, &x0) {
                push(x);
            }
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
    roots.into_iter().map(|x| OmegaState::from_full(&sys.full(&x))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkerSolution {
    pub config: String,
    pub omega: OmegaState,
    /// θ₁..θ₄ in degrees.
    pub theta: [f64; 4],
    /// θ̄₁..θ̄₄ in degrees.
    pub theta_bar: [f64; 4],
    /// Side lengths of S1..S6 in units of a = |S1|.
    pub sides: [f64; 6],
    /// |OA1| / |OA4|.
    pub center_ratio: f64,
    /// Shrink coefficient in r(t)² = 1 − λt/a², measured on the realized network.
    pub lambda: f64,
    /// Collapse time for a = 1.
    pub collapse_time: f64,
}

/// The positive root of the γ-system, if any, with its geometry.
pub fn solve_config(config: InteriorConfig) -> Option<ShrinkerSolution> {
    let omega = solve_all(config).into_iter().next()?;
    let net = realize(config, &omega, 1.0).ok()?;
    let lambda = measured_lambda(&net, Vec2::ZERO, 1.0).ok()?.mean;
    let a1 = net.vertices[0].pos.norm();
    let a4 = net.vertices[3].pos.norm();
    Some(ShrinkerSolution {
        config: config.label(),
        theta: omega.theta(),
        theta_bar: omega.theta_bar(),
        sides: omega.sides(),
        center_ratio: a1 / a4,
        lambda,
        collapse_time: if lambda > 0.0 { 1.0 / lambda } else { f64::INFINITY },
        omega,
    })
}

// ---------------------------------------------------------------------------
// Realization

/// Hexagon A1..A6 (counterclockwise, A1 on the negative x-axis, O at the
/// origin) with |S1| = a0 and a half-line from O outward at each configured
/// vertex.
pub fn realize(config: InteriorConfig, omega: &OmegaState, a0: f64) -> Result<Network, ShrinkerError> {
    let sides = omega.sides();
    for (i, s) in sides.iter().enumerate() {
        if *s <= 0.0 {
            return Err(ShrinkerError::NonPositiveSide { side: i + 1, length: *s });
        }
    }
    // |OA1| = 2h/√3 with h = (√3/2)·a0·ω₂
    let mut pts = vec![Vec2::new(-a0 * omega.w2, 0.0)];
    for (i, s) in sides.iter().enumerate() {
        let p = pts[i] + hex_direction((5 + i) % 6) * (a0 * s);
        pts.push(p);
    }
    let gap = pts[6].dist(pts[0]);
    if gap > 1e-9 * a0 {
        return Err(ShrinkerError::ClosureFailure { gap });
    }
    pts.pop();
    let mut net = Network::new();
    for (i, p) in pts.iter().enumerate() {
        net.add_vertex(format!("A{}", i + 1), *p);
    }
    for i in 0..6 {
        net.add_segment(format!("S{}", i + 1), i, (i + 1) % 6, format!("S{}", i + 1));
    }
    for v in config.vertices() {
        let j = direction_index(pts[v], 1e-6).map_err(|_| ShrinkerError::HalflineDirection { vertex: v + 1 })?;
        net.add_halfline(format!("H{}", v + 1), v, hex_direction(j), format!("H{}", v + 1));
    }
    net.relabel_curves();
    Ok(net)
}

/// Network of a solution at scale a0.
pub fn shrinker_network(solution: &ShrinkerSolution, a0: f64) -> Result<Network, ShrinkerError> {
    let config = InteriorConfig::parse(&solution.config)?;
    realize(config, &solution.omega, a0)
}

/// Regular hexagon of side a0 centered at the origin with the given half-lines.
pub fn regular_realization(config: InteriorConfig, a0: f64) -> Network {
    let ones = OmegaState::from_full(&[1.0; 5]);
    realize(config, &ones, a0).expect("regular hexagon closes")
}

// ---------------------------------------------------------------------------
// Vertex-centered family

/// Networks whose homothety center is the hexagon vertex A1 = O. In all of
/// them a half-line from A4 runs along the diagonal A1A4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexCase {
    /// Two half-lines at A1 extending S1 and S6 backwards.
    Extensions,
    /// Half-lines at A1 along the extension of S1 and along the bisector.
    ExtensionAndBisector,
    /// `Extensions` plus a half-line at A2 continuing S1.
    ExtensionsPlusOne,
    /// `Extensions` plus half-lines at A2 and A6 continuing S1 and S6.
    ExtensionsPlusTwo,
    /// One half-line at A1 extending S6.
    SingleExtension,
}

impl VertexCase {
    pub const ALL: [VertexCase; 5] = [
        VertexCase::Extensions,
        VertexCase::ExtensionAndBisector,
        VertexCase::ExtensionsPlusOne,
        VertexCase::ExtensionsPlusTwo,
        VertexCase::SingleExtension,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VertexCase::Extensions => "vertex: two extensions",
            VertexCase::ExtensionAndBisector => "vertex: extension + bisector",
            VertexCase::ExtensionsPlusOne => "vertex: two extensions + one",
            VertexCase::ExtensionsPlusTwo => "vertex: two extensions + two",
            VertexCase::SingleExtension => "vertex: one extension",
        }
    }

    /// Expected outcome from the classification of simple shrinkers.
    pub fn expected(&self) -> Status {
        match self {
            VertexCase::Extensions | VertexCase::ExtensionsPlusOne | VertexCase::ExtensionsPlusTwo => Status::Yes,
            VertexCase::ExtensionAndBisector | VertexCase::SingleExtension => Status::No,
        }
    }

    /// (vertex index, direction index) of every half-line.
    fn halflines(&self) -> Vec<(usize, usize)> {
        let mut h = vec![(3, 0)];
        match self {
            VertexCase::Extensions => h.extend([(0, 2), (0, 4)]),
            VertexCase::ExtensionAndBisector => h.extend([(0, 2), (0, 3)]),
            VertexCase::ExtensionsPlusOne => h.extend([(0, 2), (0, 4), (1, 5)]),
            VertexCase::ExtensionsPlusTwo => h.extend([(0, 2), (0, 4), (1, 5), (5, 1)]),
            VertexCase::SingleExtension => h.push((0, 4)),
        }
        h
    }

    /// Regular hexagon of side a0 with A1 at the origin and A4 at (2a0, 0).
    pub fn network(&self, a0: f64) -> Network {
        let mut net = Network::new();
        let mut p = Vec2::ZERO;
        for i in 0..6 {
            net.add_vertex(format!("A{}", i + 1), p);
            p = p + hex_direction((5 + i) % 6) * a0;
        }
        for i in 0..6 {
            net.add_segment(format!("S{}", i + 1), i, (i + 1) % 6, format!("S{}", i + 1));
        }
        for (k, (v, j)) in self.halflines().into_iter().enumerate() {
            net.add_halfline(format!("H{}", k + 1), v, hex_direction(j), format!("H{}", k + 1));
        }
        net.relabel_curves();
        net
    }
}

// ---------------------------------------------------------------------------
// Shrink rate

/// Per-segment shrink coefficients λᵢ = −2a0²·vᵢ/pᵢ, where vᵢ is the normal
/// speed and pᵢ the signed distance of the segment line from the center along
/// the same normal. Segments through the center are skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaReport {
    pub per_segment: Vec<Option<f64>>,
    pub mean: f64,
    /// Largest deviation from the mean, relative to it.
    pub spread: f64,
    /// Segments through the center whose speed is nonzero.
    pub moving_through_center: usize,
}

pub fn measured_lambda(net: &Network, center: Vec2, a0: f64) -> Result<LambdaReport, ShrinkerError> {
    let (speeds, _) = normal_speeds(net)?;
    let scale = net.diameter().max(1.0);
    let mut per = Vec::new();
    let mut moving = 0;
    for e in 0..net.edges.len() {
        if !net.edges[e].is_segment() {
            per.push(None);
            continue;
        }
        let p = (net.vertices[net.edges[e].from].pos - center).dot(net.normal(e));
        if p.abs() <= 1e-12 * scale {
            if speeds[e].abs() > 1e-12 {
                moving += 1;
            }
            per.push(None);
        } else {
            per.push(Some(-2.0 * a0 * a0 * speeds[e] / p));
        }
    }
    let vals: Vec<f64> = per.iter().flatten().copied().collect();
    let mean = if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 };
    let spread = if mean != 0.0 { vals.iter().map(|v| ((v - mean) / mean).abs()).fold(0.0, f64::max) } else { 0.0 };
    Ok(LambdaReport { per_segment: per, mean, spread, moving_through_center: moving })
}

// ---------------------------------------------------------------------------
// Flow cross-check

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowVerification {
    pub homothetic: bool,
    pub residual: f64,
    /// λ fitted from the slope of r(t)² against t.
    pub lambda_fit: f64,
    pub lambda_predicted: f64,
    pub horizon: f64,
    /// Set when the flow contradicts the prediction or fails.
    pub discrepancy: Option<String>,
}

pub const HOMOTHETY_TOL: f64 = 1e-5;

/// Evolves `net` up to `horizon_fraction` of the predicted collapse time and
/// checks that it shrinks homothetically about `center` at rate `lambda`.
pub fn verify_by_flow(
    net: &Network,
    center: Vec2,
    a0: f64,
    lambda: f64,
    horizon_fraction: f64,
) -> Result<FlowVerification, ShrinkerError> {
    if !(lambda > 0.0) {
        return Err(ShrinkerError::InvalidConfig(format!("shrink coefficient {lambda} is not positive")));
    }
    let horizon = horizon_fraction * a0 * a0 / lambda;
    let opts = FlowOptions { eta: 0.05, sample_interval: Some(horizon / 40.0), ..FlowOptions::default() };
    let traj = match evolve(net, horizon, &opts) {
        Ok(t) => t,
        Err(e) => {
            return Ok(FlowVerification {
                homothetic: false,
                residual: f64::NAN,
                lambda_fit: f64::NAN,
                lambda_predicted: lambda,
                horizon,
                discrepancy: Some(format!("flow failed: {e}")),
            })
        }
    };
    let report = homothety_check(&traj, center, HOMOTHETY_TOL)?;
    let lambda_fit = -report.slope * a0 * a0;
    let mut discrepancy = None;
    if !report.is_homothetic {
        discrepancy = Some(format!("not homothetic about the center (residual {:.3e})", report.residual));
    } else if ((lambda_fit - lambda) / lambda).abs() > 1e-4 {
        discrepancy = Some(format!("fitted λ {lambda_fit:.8} differs from predicted {lambda:.8}"));
    }
    Ok(FlowVerification {
        homothetic: report.is_homothetic,
        residual: report.residual,
        lambda_fit,
        lambda_predicted: lambda,
        horizon,
        discrepancy,
    })
}

/// Flow check of an interior configuration: the solved hexagon if there is
/// one, otherwise the regular hexagon with the same half-lines.
pub fn verify_config(config: InteriorConfig, a0: f64, horizon_fraction: f64) -> Result<FlowVerification, ShrinkerError> {
    let net = match solve_config(config) {
        Some(sol) => shrinker_network(&sol, a0)?,
        None => regular_realization(config, a0),
    };
    let lam = measured_lambda(&net, Vec2::ZERO, a0)?;
    let lambda = lam.per_segment.iter().flatten().copied().fold(0.0, f64::max);
    verify_by_flow(&net, Vec2::ZERO, a0, lambda, horizon_fraction)
}

/// Flow check of a vertex-centered network, at the fastest per-segment rate.
pub fn verify_vertex_case(case: VertexCase, a0: f64, horizon_fraction: f64) -> Result<FlowVerification, ShrinkerError> {
    let net = case.network(a0);
    let lambda = match measured_lambda(&net, Vec2::ZERO, a0) {
        Ok(l) => l.per_segment.iter().flatten().copied().fold(0.0, f64::max),
        Err(e) => {
            return Ok(FlowVerification {
                homothetic: false,
                residual: f64::NAN,
                lambda_fit: f64::NAN,
                lambda_predicted: f64::NAN,
                horizon: 0.0,
                discrepancy: Some(format!("flow failed: {e}")),
            })
        }
    };
    verify_by_flow(&net, Vec2::ZERO, a0, lambda, horizon_fraction)
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Yes,
    No,
    Stationary,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Yes => "YES",
            Status::No => "NO",
            Status::Stationary => "STATIONARY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationRow {
    pub name: String,
    pub center: &'static str,
    pub halflines: String,
    pub status: Status,
    pub solution: Option<ShrinkerSolution>,
    /// Shrink coefficient measured on the network (mean over segments).
    pub lambda: Option<f64>,
    /// Relative spread of the per-segment shrink coefficients.
    pub lambda_spread: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationTable {
    pub rows: Vec<ClassificationRow>,
}

fn orbit_name(config: InteriorConfig) -> String {
    let v = config.vertices();
    let n = v.len();
    let pattern = match (n, v.as_slice()) {
        (1, _) => "single",
        (2, [0, 1]) => "adjacent",
        (2, [0, 2]) => "one apart",
        (2, [0, 3]) => "opposite",
        (3, [0, 1, 2]) => "consecutive",
        (3, [0, 1, 3]) => "pair + one",
        (3, [0, 2, 4]) => "alternating",
        (4, [0, 1, 2, 3]) => "consecutive",
        (4, [0, 1, 2, 4]) => "three + one",
        (4, [0, 1, 3, 4]) => "two pairs",
        (5, _) => "all but one",
        _ => "all",
    };
    format!("{n} half-line{}: {pattern}", if n == 1 { "" } else { "s" })
}

pub fn classify_all() -> ClassificationTable {
    let mut rows = Vec::new();
    for config in InteriorConfig::orbits() {
        let name = orbit_name(config);
        if config.count() == 6 {
            rows.push(ClassificationRow {
                name,
                center: "interior",
                halflines: config.label(),
                status: Status::Stationary,
                solution: None,
                lambda: Some(0.0),
                lambda_spread: None,
                note: Some("admits a locally constant CH field".into()),
            });
            continue;
        }
        let sol = solve_config(config);
        let (status, lambda, spread, note) = match &sol {
            Some(s) => {
                let net = shrinker_network(s, 1.0).ok();
                let rep = net.and_then(|n| measured_lambda(&n, Vec2::ZERO, 1.0).ok());
                (Status::Yes, Some(s.lambda), rep.map(|r| r.spread), None)
            }
            None => (Status::No, None, None, Some("no positive root".to_string())),
        };
        rows.push(ClassificationRow {
            name,
            center: "interior",
            halflines: config.label(),
            status,
            solution: sol,
            lambda,
            lambda_spread: spread,
            note,
        });
    }
    for case in VertexCase::ALL {
        let net = case.network(1.0);
        let rep = measured_lambda(&net, Vec2::ZERO, 1.0);
        let halflines = case
            .halflines()
            .iter()
            .map(|(v, j)| format!("A{}@{}", v + 1, 60 * j))
            .collect::<Vec<_>>()
            .join(",");
        let (lambda, spread, note) = match rep {
            Ok(r) => {
                let note = if r.spread > 1e-9 || r.moving_through_center > 0 {
                    Some(format!("per-segment rates differ (spread {:.3e})", r.spread))
                } else {
                    None
                };
                (Some(r.mean), Some(r.spread), note)
            }
            Err(e) => (None, None, Some(e.to_string())),
        };
        rows.push(ClassificationRow {
            name: case.name().into(),
            center: "vertex",
            halflines,
            status: case.expected(),
            solution: None,
            lambda,
            lambda_spread: spread,
            note,
        });
    }
    ClassificationTable { rows }
}

impl ClassificationTable {
    pub fn yes_count(&self) -> usize {
        self.rows.iter().filter(|r| r.status == Status::Yes).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<30} {:<8} {:<32} {:<10} {:>10}  sides", "configuration", "center", "half-lines", "status", "lambda");
        for r in &self.rows {
            let lambda = r.lambda.map_or("-".to_string(), crate::fmt_sig);
            let sides = r.solution.as_ref().map_or("-".to_string(), |s| {
                s.sides.iter().map(|x| crate::fmt_sig(*x)).collect::<Vec<_>>().join(" ")
            });
            let _ = writeln!(
                out,
                "{:<30} {:<8} {:<32} {:<10} {:>10}  {}",
                r.name,
                r.center,
                r.halflines,
                r.status.as_str(),
                lambda,
                sides
            );
        }
        let _ = writeln!(out, "shrinkers: {}", self.yes_count());
        out
    }
}
