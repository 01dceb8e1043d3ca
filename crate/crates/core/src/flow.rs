//! Crystalline curvature flow h' = −κ on parallel networks.
//!
//! The state is a reference network plus one signed height per edge: every
//! edge line is translated by h along its normal and vertices are recovered
//! by intersecting the translated lines. The reference is re-based onto the
//! current network whenever heights grow past a fraction of the bound below
//! which reconstruction is guaranteed to succeed.

use crate::anisotropy::{direction_index, facet_normal, hex_direction, Vec2, SQRT3};
use crate::chfield::{evolvable_with, is_critical, minimal_field, ChFieldError, MinimalCHField};
use crate::network::{validate_admissible, EdgeEnd, Network, UnionFind};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("height {h} of edge {edge} exceeds the reconstruction bound {bound}")]
    HeightBoundViolation { edge: String, h: f64, bound: f64 },
    #[error("translated lines at vertex {vertex} are not concurrent (residual {residual})")]
    CompatibilityViolation { vertex: String, residual: f64 },
    #[error("segment {0} degenerates")]
    Degenerate(String),
    #[error("network is not evolvable: an edge at a non-120 junction has nonzero curvature")]
    NotEvolvable,
    #[error("network is not admissible: {0}")]
    NotAdmissible(String),
    #[error("time step {dt} exceeds the bound {max}")]
    StepTooLarge { dt: f64, max: f64 },
    #[error("horizon must be positive")]
    InvalidHorizon,
    #[error("height vector has {got} entries, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("trajectory has too few samples ({0})")]
    NoSamples(usize),
    #[error(transparent)]
    Field(#[from] ChFieldError),
}

impl FlowError {
    /// Errors a smaller time step can fix.
    fn is_step_failure(&self) -> bool {
        matches!(
            self,
            FlowError::HeightBoundViolation { .. } | FlowError::CompatibilityViolation { .. } | FlowError::Degenerate(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowOptions {
    /// Step-size safety factor.
    pub eta: f64,
    /// Collapse threshold relative to the initial minimal segment length.
    pub eps_len_rel: f64,
    /// Re-base once max |h| exceeds this fraction of min(Δ₁, Δ₂).
    pub rebase_frac: f64,
    pub max_steps: usize,
    pub max_restarts: usize,
    /// Stop as singular once a speed-limited step falls below this times L0min².
    pub min_dt_rel: f64,
    /// Record samples on this time grid instead of after every step.
    pub sample_interval: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            eta: 0.1,
            eps_len_rel: 1e-8,
            rebase_frac: 0.5,
            max_steps: 1_000_000,
            max_restarts: 16,
            min_dt_rel: 1e-7,
            sample_interval: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Geometry helpers

fn point_edge_distance(net: &Network, x: Vec2, e: usize) -> f64 {
    let edge = &net.edges[e];
    let p = net.vertices[edge.from].pos;
    let (r, len) = match edge.end {
        EdgeEnd::Vertex(t) => {
            let d = net.vertices[t].pos - p;
            let l = d.norm();
            (d * (1.0 / l), l)
        }
        EdgeEnd::Direction(d) => (d, f64::INFINITY),
    };
    let t = (x - p).dot(r).clamp(0.0, len);
    x.dist(p + r * t)
}

fn edges_cross(net: &Network, a: usize, b: usize) -> bool {
    let seg = |e: usize| {
        let edge = &net.edges[e];
        let p = net.vertices[edge.from].pos;
        match edge.end {
            EdgeEnd::Vertex(t) => (p, net.vertices[t].pos - p, 1.0),
            EdgeEnd::Direction(d) => (p, d, f64::INFINITY),
        }
    };
    let (p, r, lp) = seg(a);
    let (q, s, lq) = seg(b);
    let den = r.cross(s);
    if den == 0.0 {
        return false;
    }
    let t = (q - p).cross(s) / den;
    let u = (q - p).cross(r) / den;
    (0.0..=lp).contains(&t) && (0.0..=lq).contains(&u)
}

/// Euclidean distance between two edges.
pub fn edge_distance(net: &Network, a: usize, b: usize) -> f64 {
    if edges_cross(net, a, b) {
        return 0.0;
    }
    let ends = |e: usize| {
        let edge = &net.edges[e];
        let mut v = vec![net.vertices[edge.from].pos];
        if let Some(t) = edge.to() {
            v.push(net.vertices[t].pos);
        }
        v
    };
    let da = ends(a).into_iter().map(|x| point_edge_distance(net, x, b)).fold(f64::INFINITY, f64::min);
    let db = ends(b).into_iter().map(|x| point_edge_distance(net, x, a)).fold(f64::INFINITY, f64::min);
    da.min(db)
}

/// Reconstruction bounds (Δ₁, Δ₂): a third of the shortest segment over √3,
/// and a sixth of the smallest distance between edges without common vertices.
pub fn delta_bounds(net: &Network) -> (f64, f64) {
    let d1 = net.min_segment_length() / (3.0 * SQRT3);
    let mut d2 = f64::INFINITY;
    for a in 0..net.edges.len() {
        let ea = &net.edges[a];
        for b in a + 1..net.edges.len() {
            let eb = &net.edges[b];
            let touch = [Some(ea.from), ea.to()]
                .iter()
                .flatten()
                .any(|v| eb.from == *v || eb.to() == Some(*v));
            if !touch {
                d2 = d2.min(edge_distance(net, a, b));
            }
        }
    }
    (d1, d2 / 6.0)
}

/// Least-squares point on the lines ν·X = c; falls back to projecting `x0`
/// onto the first line when the lines are parallel.
fn intersect_lines(lines: &[(Vec2, f64)], x0: Vec2) -> (Vec2, f64) {
    let (mut m00, mut m01, mut m11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(n, c) in lines {
        m00 += n.x * n.x;
        m01 += n.x * n.y;
        m11 += n.y * n.y;
        r0 += n.x * c;
        r1 += n.y * c;
    }
    let det = m00 * m11 - m01 * m01;
    let x = if det > 1e-6 * (m00 + m11) * (m00 + m11) {
        Vec2::new((m11 * r0 - m01 * r1) / det, (m00 * r1 - m01 * r0) / det)
    } else {
        let (n, c) = lines[0];
        x0 + n * (c - n.dot(x0))
    };
    let res = lines.iter().map(|&(n, c)| (n.dot(x) - c).abs()).fold(0.0, f64::max);
    (x, res)
}

/// Facet normals of the edges, falling back to the measured normal for
/// non-admissible edges.
fn exact_normals(net: &Network) -> Vec<Vec2> {
    (0..net.edges.len())
        .map(|e| net.facet_of(e).map_or_else(|| net.normal(e), facet_normal))
        .collect()
}

fn place_vertices(reference: &Network, h: &[f64]) -> Result<Network, FlowError> {
    if h.len() != reference.edges.len() {
        return Err(FlowError::LengthMismatch { got: h.len(), expected: reference.edges.len() });
    }
    if h.iter().all(|x| *x == 0.0) {
        return Ok(reference.clone());
    }
    let normals = exact_normals(reference);
    let offsets: Vec<f64> = (0..reference.edges.len())
        .map(|e| normals[e].dot(reference.vertices[reference.edges[e].from].pos) + h[e])
        .collect();
    let tol = 1e-10 * reference.diameter().max(1.0);
    let mut out = reference.clone();
    for (v, list) in reference.incidence().iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let lines: Vec<(Vec2, f64)> = list.iter().map(|i| (normals[i.edge], offsets[i.edge])).collect();
        let (x, res) = intersect_lines(&lines, reference.vertices[v].pos);
        if res > tol {
            return Err(FlowError::CompatibilityViolation { vertex: reference.vertices[v].id.clone(), residual: res });
        }
        out.vertices[v].pos = x;
    }
    for e in reference.segment_indices() {
        let to = reference.edges[e].to().expect("segment");
        let d = out.vertices[to].pos - out.vertices[reference.edges[e].from].pos;
        if d.dot(reference.tangent(e)) <= 0.0 {
            return Err(FlowError::Degenerate(reference.edges[e].id.clone()));
        }
    }
    Ok(out)
}

/// Parallel network at signed heights `h` from `reference`.
pub fn reconstruct(reference: &Network, h: &[f64]) -> Result<Network, FlowError> {
    let (d1, d2) = delta_bounds(reference);
    let bound = d1.min(d2);
    for (e, &he) in h.iter().enumerate().take(reference.edges.len()) {
        let limit = if reference.edges[e].is_halfline() { 0.0 } else { bound };
        if he.abs() > limit {
            return Err(FlowError::HeightBoundViolation { edge: reference.edges[e].id.clone(), h: he, bound: limit });
        }
    }
    place_vertices(reference, h)
}

/// Signed heights of `net` over a parallel `reference` with the same topology.
pub fn heights_between(reference: &Network, net: &Network) -> Vec<f64> {
    let normals = exact_normals(reference);
    (0..reference.edges.len())
        .map(|e| {
            let v = reference.edges[e].from;
            normals[e].dot(net.vertices[v].pos - reference.vertices[v].pos)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Velocities

/// Normal speeds h' = −κ of the current network together with its field.
pub fn normal_speeds(net: &Network) -> Result<(Vec<f64>, MinimalCHField), FlowError> {
    let field = minimal_field(net)?;
    if !evolvable_with(net, &field)? {
        return Err(FlowError::NotEvolvable);
    }
    let v = field.kappa.iter().map(|k| if *k == 0.0 { 0.0 } else { -k }).collect();
    Ok((v, field))
}

/// Vertex velocities induced by per-edge normal speeds.
pub fn vertex_velocities(net: &Network, speeds: &[f64]) -> Vec<Vec2> {
    let normals = exact_normals(net);
    net.incidence()
        .iter()
        .map(|list| {
            if list.is_empty() {
                return Vec2::ZERO;
            }
            let lines: Vec<(Vec2, f64)> = list.iter().map(|i| (normals[i.edge], speeds[i.edge])).collect();
            intersect_lines(&lines, Vec2::ZERO).0
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub reference: Network,
    /// Heights relative to `reference`.
    pub h: Vec<f64>,
    pub network: Network,
    /// Heights of `reference` over the network the flow started from.
    pub base_h: Vec<f64>,
    delta: f64,
}

impl FlowState {
    pub fn new(net: &Network, t: f64) -> Self {
        let (d1, d2) = delta_bounds(net);
        FlowState {
            t,
            reference: net.clone(),
            h: vec![0.0; net.edges.len()],
            network: net.clone(),
            base_h: vec![0.0; net.edges.len()],
            delta: d1.min(d2),
        }
    }

    /// Heights over the starting network.
    pub fn heights(&self) -> Vec<f64> {
        self.base_h.iter().zip(&self.h).map(|(a, b)| a + b).collect()
    }

    pub fn rebase(&mut self) {
        for (b, h) in self.base_h.iter_mut().zip(&mut self.h) {
            *b += *h;
            *h = 0.0;
        }
        self.reference = self.network.clone();
        let (d1, d2) = delta_bounds(&self.reference);
        self.delta = d1.min(d2);
    }

    fn max_abs_h(&self) -> f64 {
        self.h.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn velocities(state: &FlowState) -> Result<Vec<f64>, FlowError> {
    Ok(normal_speeds(&state.network)?.0)
}

// Returns the step bound and whether the speed term is far below the time
// to the next segment collapse (a thin region with blowing-up speeds).
fn step_bound(net: &Network, speeds: &[f64], eta: f64) -> (f64, bool) {
    let vel = vertex_velocities(net, speeds);
    let vmax = vel.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if vmax == 0.0 {
        return (f64::INFINITY, false);
    }
    let by_speed = net.min_segment_length() / vmax;
    let mut by_rate = f64::INFINITY;
    for e in net.segment_indices() {
        let to = net.edges[e].to().expect("segment");
        let rate = (vel[to] - vel[net.edges[e].from]).dot(net.tangent(e));
        if rate < 0.0 {
            by_rate = by_rate.min(net.length(e) / -rate);
        }
    }
    let c = eta * (SQRT3 / 6.0);
    (c * by_speed.min(by_rate), by_speed < 0.05 * by_rate)
}

fn max_dt_for(net: &Network, speeds: &[f64], eta: f64) -> f64 {
    step_bound(net, speeds, eta).0
}

/// Largest admissible step from the current state.
pub fn max_dt(state: &FlowState, eta: f64) -> Result<f64, FlowError> {
    let speeds = velocities(state)?;
    Ok(max_dt_for(&state.network, &speeds, eta))
}

fn stage(reference: &Network, h: &[f64]) -> Result<Vec<f64>, FlowError> {
    let net = place_vertices(reference, h)?;
    Ok(normal_speeds(&net)?.0)
}

fn rk4(state: &FlowState, dt: f64, k1: &[f64]) -> Result<FlowState, FlowError> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { state.h.iter().zip(k).map(|(h, k)| h + a * k).collect() };
    let k2 = stage(&state.reference, &axpy(dt / 2.0, k1))?;
    let k3 = stage(&state.reference, &axpy(dt / 2.0, &k2))?;
    let k4 = stage(&state.reference, &axpy(dt, &k3))?;
    let h: Vec<f64> = (0..state.h.len())
        .map(|i| state.h[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    for (e, he) in h.iter().enumerate() {
        if he.abs() > state.delta && state.reference.edges[e].is_segment() {
            return Err(FlowError::HeightBoundViolation {
                edge: state.reference.edges[e].id.clone(),
                h: *he,
                bound: state.delta,
            });
        }
    }
    let network = place_vertices(&state.reference, &h)?;
    Ok(FlowState {
        t: state.t + dt,
        reference: state.reference.clone(),
        h,
        network,
        base_h: state.base_h.clone(),
        delta: state.delta,
    })
}

/// One classical RK4 step with curvatures re-solved at every stage.
pub fn step(state: &FlowState, dt: f64, opts: &FlowOptions) -> Result<FlowState, FlowError> {
    let k1 = velocities(state)?;
    let max = max_dt_for(&state.network, &k1, opts.eta);
    if !(dt > 0.0) || dt > max * (1.0 + 1e-12) {
        return Err(FlowError::StepTooLarge { dt, max });
    }
    let mut next = rk4(state, dt, &k1)?;
    if next.max_abs_h() > opts.rebase_frac * next.delta {
        next.rebase();
    }
    Ok(next)
}

/// Fixed-size RK4 step without the step-size bound, for convergence studies.
pub fn step_unbounded(state: &FlowState, dt: f64) -> Result<FlowState, FlowError> {
    let k1 = velocities(state)?;
    rk4(state, dt, &k1)
}

// ---------------------------------------------------------------------------
// Trajectories

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    /// Number of restarts before this sample.
    pub epoch: usize,
    #[serde(skip)]
    pub network: Network,
    pub lengths: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Heights over the network this epoch started from.
    pub heights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Collapse,
    Restart,
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Vanished,
    HigherMultiplicity,
    NotAdmissible,
    Critical,
    NotEvolvable,
    MaxSteps,
    Singular,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon reached",
            Termination::Vanished => "vanished",
            Termination::HigherMultiplicity => "higher multiplicity",
            Termination::NotAdmissible => "limit not admissible",
            Termination::Critical => "critical",
            Termination::NotEvolvable => "not evolvable",
            Termination::MaxSteps => "step limit reached",
            Termination::Singular => "speed blow-up",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub termination: Option<Termination>,
    pub detail: String,
    /// Largest edge multiplicity of the limit network (collapse events).
    pub max_multiplicity: u32,
    /// Criticality of the limit network, when it could be decided.
    pub critical: Option<bool>,
    #[serde(skip)]
    pub limit: Option<Network>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn termination(&self) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == EventKind::Terminate)
    }

    pub fn first_collapse(&self) -> Option<&Event> {
        self.events.iter().find(|e| e.kind == EventKind::Collapse)
    }

    /// Samples taken before the first event.
    pub fn first_epoch(&self) -> Vec<&Sample> {
        let t_end = self.events.first().map_or(f64::INFINITY, |e| e.t);
        self.samples.iter().filter(|s| s.epoch == 0 && s.t < t_end).collect()
    }
}

fn sample_of(state: &FlowState, epoch: usize, kappa: &[f64]) -> Sample {
    let net = &state.network;
    Sample {
        t: state.t,
        epoch,
        network: net.clone(),
        lengths: (0..net.edges.len()).map(|e| net.length(e)).collect(),
        kappa: kappa.to_vec(),
        heights: state.heights(),
    }
}

fn event(t: f64, kind: EventKind, termination: Option<Termination>, detail: impl Into<String>) -> Event {
    Event { t, kind, termination, detail: detail.into(), max_multiplicity: 1, critical: None, limit: None }
}

fn kappa_of(speeds: &[f64]) -> Vec<f64> {
    speeds.iter().map(|v| if *v == 0.0 { 0.0 } else { -v }).collect()
}

pub fn evolve(net: &Network, horizon: f64, opts: &FlowOptions) -> Result<Trajectory, FlowError> {
    if !(horizon > 0.0) {
        return Err(FlowError::InvalidHorizon);
    }
    let report = validate_admissible(net);
    if let Some(v) = report.violations.first() {
        return Err(FlowError::NotAdmissible(v.to_string()));
    }
    let mut traj = Trajectory::default();
    let mut state = FlowState::new(net, 0.0);
    let mut eps_len = opts.eps_len_rel * net.min_segment_length();
    let mut dt_floor = opts.min_dt_rel * net.min_segment_length().powi(2);
    let mut epoch = 0;
    let mut steps = 0;
    let mut next_sample = opts.sample_interval.map(|s| s.min(horizon));
    let (speeds, _) = normal_speeds(&state.network)?;
    traj.samples.push(sample_of(&state, epoch, &kappa_of(&speeds)));

    loop {
        if state.t >= horizon {
            traj.events.push(event(state.t, EventKind::Terminate, Some(Termination::Horizon), ""));
            break;
        }
        let k1 = match normal_speeds(&state.network) {
            Ok((k, _)) => k,
            Err(FlowError::NotEvolvable) => {
                traj.events.push(event(state.t, EventKind::Terminate, Some(Termination::NotEvolvable), ""));
                break;
            }
            Err(e) => return Err(e),
        };
        let kappa = kappa_of(&k1);
        let (bound, speed_limited) = step_bound(&state.network, &k1, opts.eta);
        if speed_limited && bound < dt_floor {
            let vmax = k1.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            traj.events.push(event(state.t, EventKind::Terminate, Some(Termination::Singular), format!(
                "step {bound:.3e} below floor, max normal speed {vmax:.3e}"
            )));
            break;
        }
        if bound.is_infinite() {
            // nothing moves: the network is stationary up to the horizon
            let interval = opts.sample_interval.unwrap_or(horizon);
            while state.t < horizon {
                state.t = next_sample.unwrap_or(horizon).min(horizon);
                next_sample = Some(state.t + interval);
                traj.samples.push(sample_of(&state, epoch, &kappa));
            }
            continue;
        }
        let mut dt = bound.min(horizon - state.t);
        let mut on_grid = false;
        if let Some(ns) = next_sample {
            if ns - state.t <= dt {
                dt = ns - state.t;
                on_grid = true;
            }
        }
        let mut tries = 0;
        let next = loop {
            match rk4(&state, dt, &k1) {
                Ok(s) => break s,
                Err(e) if e.is_step_failure() && tries < 60 => {
                    dt /= 2.0;
                    tries += 1;
                    on_grid = false;
                }
                Err(e) => return Err(e),
            }
        };
        state = next;
        if state.max_abs_h() > opts.rebase_frac * state.delta {
            state.rebase();
        }
        steps += 1;
        let collapsed = state.network.min_segment_length() <= eps_len;
        if opts.sample_interval.is_none() || on_grid || collapsed || state.t >= horizon {
            let kappa_now = if collapsed {
                kappa.clone()
            } else {
                normal_speeds(&state.network).map(|(k, _)| kappa_of(&k)).unwrap_or(kappa.clone())
            };
            traj.samples.push(sample_of(&state, epoch, &kappa_now));
            if on_grid {
                if let (Some(ns), Some(iv)) = (next_sample, opts.sample_interval) {
                    next_sample = Some((ns + iv).min(horizon));
                }
            }
        }
        if collapsed {
            traj.events.push(event(state.t, EventKind::Collapse, None, format!(
                "min segment length {:.3e}",
                state.network.min_segment_length()
            )));
            let limit = collapse_limit(&state, eps_len);
            let max_mult = limit.edges.iter().map(|e| e.multiplicity).max().unwrap_or(0);
            if let Some(c) = traj.events.last_mut() {
                c.max_multiplicity = max_mult;
                c.limit = Some(limit.clone());
            }
            let outcome = classify_limit(&limit);
            match outcome {
                LimitOutcome::Restart => {
                    if epoch >= opts.max_restarts {
                        traj.events.push(event(state.t, EventKind::Terminate, Some(Termination::MaxSteps), "restart limit"));
                        break;
                    }
                    epoch += 1;
                    let mut ev = event(state.t, EventKind::Restart, None, "");
                    ev.critical = Some(false);
                    ev.limit = Some(limit.clone());
                    traj.events.push(ev);
                    state = FlowState::new(&limit, state.t);
                    eps_len = opts.eps_len_rel * limit.min_segment_length();
                    dt_floor = opts.min_dt_rel * limit.min_segment_length().powi(2);
                    let (k, _) = normal_speeds(&limit)?;
                    traj.samples.push(sample_of(&state, epoch, &kappa_of(&k)));
                }
                LimitOutcome::Terminate(reason, critical, detail) => {
                    let mut ev = event(state.t, EventKind::Terminate, Some(reason), detail);
                    ev.critical = critical;
                    ev.max_multiplicity = max_mult;
                    ev.limit = Some(limit);
                    traj.events.push(ev);
                    break;
                }
            }
        }
        if steps >= opts.max_steps {
            traj.events.push(event(state.t, EventKind::Terminate, Some(Termination::MaxSteps), ""));
            break;
        }
    }
    Ok(traj)
}

enum LimitOutcome {
    Restart,
    Terminate(Termination, Option<bool>, String),
}

fn classify_limit(limit: &Network) -> LimitOutcome {
    if limit.edges.is_empty() {
        return LimitOutcome::Terminate(Termination::Vanished, None, String::new());
    }
    if limit.edges.iter().all(|e| e.is_halfline()) && !validate_admissible(limit).is_valid() {
        // the bounded part shrank to a point that is not a junction of its own
        return LimitOutcome::Terminate(Termination::Vanished, None, "only half-lines remain".into());
    }
    if limit.edges.iter().any(|e| e.multiplicity > 1) {
        let critical = is_critical(limit).ok();
        return LimitOutcome::Terminate(Termination::HigherMultiplicity, critical, String::new());
    }
    let report = validate_admissible(limit);
    if let Some(v) = report.violations.first() {
        return LimitOutcome::Terminate(Termination::NotAdmissible, None, v.to_string());
    }
    let field = match minimal_field(limit) {
        Ok(f) => f,
        Err(e) => return LimitOutcome::Terminate(Termination::NotEvolvable, Some(false), e.to_string()),
    };
    if is_critical(limit).unwrap_or(false) {
        return LimitOutcome::Terminate(Termination::Critical, Some(true), String::new());
    }
    match evolvable_with(limit, &field) {
        Ok(true) => LimitOutcome::Restart,
        _ => LimitOutcome::Terminate(Termination::NotEvolvable, Some(false), String::new()),
    }
}

/// Limit network at a collapse: segments of length ≤ 4·eps_len are contracted
/// and coincident edges are merged into one edge carrying the summed
/// multiplicity. Vertices are first moved linearly to the moment the shortest
/// segment vanishes, which keeps every edge exactly parallel to its facet;
/// merged vertices then sit at the average of their members.
pub fn collapse_limit(state: &FlowState, eps_len: f64) -> Network {
    let thr = 4.0 * eps_len;
    let short: Vec<usize> = state.network.segment_indices().filter(|&e| state.network.length(e) <= thr).collect();
    if short.is_empty() {
        return state.network.clone();
    }
    let net = &extrapolated(&state.network, &short);
    let nv = net.vertices.len();
    let mut uf = UnionFind::new(nv);
    let mut contracted = vec![false; net.edges.len()];
    for &e in &short {
        uf.union(net.edges[e].from, net.edges[e].to().expect("segment"));
        contracted[e] = true;
    }
    let mut sum: HashMap<usize, (Vec2, usize)> = HashMap::new();
    for v in 0..nv {
        let r = uf.find(v);
        let entry = sum.entry(r).or_insert((Vec2::ZERO, 0));
        entry.0 += net.vertices[v].pos;
        entry.1 += 1;
    }
    let mut out = Network::new();
    let mut new_index: HashMap<usize, usize> = HashMap::new();
    for v in 0..nv {
        let r = uf.find(v);
        if r == v {
            let (s, n) = sum[&r];
            new_index.insert(r, out.add_vertex(net.vertices[v].id.clone(), s * (1.0 / n as f64)));
        }
    }
    // key: segment by unordered vertex pair, half-line by start and direction
    let mut seen: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for (e, edge) in net.edges.iter().enumerate() {
        if contracted[e] {
            continue;
        }
        let from = new_index[&uf.find(edge.from)];
        let key = match edge.end {
            EdgeEnd::Vertex(t) => {
                let to = new_index[&uf.find(t)];
                if to == from {
                    continue;
                }
                (from.min(to), from.max(to), usize::MAX)
            }
            EdgeEnd::Direction(d) => (from, usize::MAX, direction_index(d, 1e-6).unwrap_or(usize::MAX - 1)),
        };
        if let Some(&k) = seen.get(&key) {
            out.edges[k].multiplicity += edge.multiplicity;
            continue;
        }
        let idx = match edge.end {
            EdgeEnd::Vertex(t) => out.add_segment(edge.id.clone(), from, new_index[&uf.find(t)], edge.curve.clone()),
            EdgeEnd::Direction(d) => out.add_halfline(edge.id.clone(), from, d, edge.curve.clone()),
        };
        out.edges[idx].multiplicity = edge.multiplicity;
        seen.insert(key, idx);
    }
    snap_directions(&mut out);
    let used: Vec<bool> = out.incidence().iter().map(|l| !l.is_empty()).collect();
    if used.iter().any(|u| !u) {
        out = drop_vertices(&out, &used);
    }
    out.relabel_curves();
    out
}

/// Moves every vertex along its velocity up to the vanishing time of the
/// shortest shrinking segment among `short`.
fn extrapolated(net: &Network, short: &[usize]) -> Network {
    let Ok((speeds, _)) = normal_speeds(net) else {
        return net.clone();
    };
    let vel = vertex_velocities(net, &speeds);
    let mut dt = f64::INFINITY;
    for &e in short {
        let to = net.edges[e].to().expect("segment");
        let rate = (vel[to] - vel[net.edges[e].from]).dot(net.tangent(e));
        if rate < 0.0 {
            dt = dt.min(net.length(e) / -rate);
        }
    }
    if !dt.is_finite() {
        return net.clone();
    }
    let mut out = net.clone();
    for (v, vert) in out.vertices.iter_mut().enumerate() {
        vert.pos += vel[v] * dt;
    }
    out
}

/// Restore exact half-line directions after merging.
fn snap_directions(net: &mut Network) {
    for e in 0..net.edges.len() {
        if let EdgeEnd::Direction(d) = net.edges[e].end {
            if let Ok(j) = direction_index(d, 1e-6) {
                net.edges[e].end = EdgeEnd::Direction(hex_direction(j));
            }
        }
    }
}

fn drop_vertices(net: &Network, keep: &[bool]) -> Network {
    let mut out = Network::new();
    let mut map = vec![usize::MAX; net.vertices.len()];
    for (v, vert) in net.vertices.iter().enumerate() {
        if keep[v] {
            map[v] = out.add_vertex(vert.id.clone(), vert.pos);
        }
    }
    for e in &net.edges {
        let mut e2 = e.clone();
        e2.from = map[e.from];
        if let EdgeEnd::Vertex(t) = e.end {
            e2.end = EdgeEnd::Vertex(map[t]);
        }
        out.edges.push(e2);
    }
    out
}

// ---------------------------------------------------------------------------
// Homothety

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomothetyReport {
    pub is_homothetic: bool,
    pub times: Vec<f64>,
    pub r_fit: Vec<f64>,
    /// Largest vertex deviation from r(t)·reference, over the reference diameter.
    pub residual: f64,
    /// Least-squares slope of r² against t.
    pub slope: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn homothety_check(traj: &Trajectory, center: Vec2, tol: f64) -> Result<HomothetyReport, FlowError> {
    let samples = traj.first_epoch();
    if samples.len() < 10 {
        return Err(FlowError::NoSamples(samples.len()));
    }
    let reference = &samples[0].network;
    let diam = reference.diameter().max(f64::MIN_POSITIVE);
    let rel: Vec<Vec2> = reference.vertices.iter().map(|v| v.pos - center).collect();
    let mut times = Vec::new();
    let mut rs = Vec::new();
    let mut residual: f64 = 0.0;
    for s in &samples {
        let ratios: Vec<f64> = s
            .network
            .vertices
            .iter()
            .zip(&rel)
            .filter(|(_, r0)| r0.norm() > 1e-12 * diam)
            .map(|(v, r0)| (v.pos - center).norm() / r0.norm())
            .collect();
        let r = if ratios.is_empty() { 1.0 } else { median(ratios) };
        for (v, r0) in s.network.vertices.iter().zip(&rel) {
            residual = residual.max((v.pos - center - *r0 * r).norm() / diam);
        }
        times.push(s.t);
        rs.push(r);
    }
    let decreasing = rs.windows(2).all(|w| w[1] < w[0]);
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let ym = rs.iter().map(|r| r * r).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, r) in times.iter().zip(&rs) {
        sxy += (t - tm) * (r * r - ym);
        sxx += (t - tm) * (t - tm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(HomothetyReport { is_homothetic: decreasing && residual <= tol, times, r_fit: rs, residual, slope })
}

/// CSV with one row per sample and edge: t, edge id, length, kappa, h.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,edge,length,kappa,h\n");
    for s in &traj.samples {
        for (e, edge) in s.network.edges.iter().enumerate() {
            out.push_str(&format!(
                "{:.12e},{},{:.12e},{:.12e},{:.12e}\n",
                s.t, edge.id, s.lengths[e], s.kappa[e], s.heights[e]
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    fn hexagon(r: f64) -> Network {
        let mut n = Network::new();
        let v: Vec<usize> = (0..6).map(|j| n.add_vertex(format!("A{j}"), hex_direction(j) * r)).collect();
        for j in 0..6 {
            n.add_segment(format!("S{j}"), v[j], v[(j + 1) % 6], "G");
        }
        n
    }

    #[test]
    fn zero_heights_reproduce_reference() {
        let h = hexagon(1.0);
        let r = reconstruct(&h, &[0.0; 6]).unwrap();
        for (a, b) in h.vertices.iter().zip(&r.vertices) {
            assert_eq!(a.pos, b.pos);
        }
    }

    #[test]
    fn single_rk4_step_on_wulff_hexagon() {
        let h = hexagon(1.0);
        let s = FlowState::new(&h, 0.0);
        let dt = 1e-4;
        let next = step(&s, dt, &FlowOptions::default()).unwrap();
        let r = next.network.length(0);
        assert!((r - (1.0 - 8.0 / 3.0 * dt).sqrt()).abs() < 1e-12, "{r}");
    }

    #[test]
    fn oversized_step_rejected() {
        let h = hexagon(1.0);
        let s = FlowState::new(&h, 0.0);
        assert!(matches!(step(&s, 1.0, &FlowOptions::default()), Err(FlowError::StepTooLarge { .. })));
    }

    #[test]
    fn wulff_hexagon_vanishes() {
        let traj = evolve(&hexagon(1.0), 1.0, &FlowOptions::default()).unwrap();
        let end = traj.termination().unwrap();
        assert_eq!(end.termination, Some(Termination::Vanished));
        assert!((end.t - 0.375).abs() < 1e-6, "{}", end.t);
    }

    #[test]
    fn no_short_segments_is_identity() {
        let h = hexagon(1.0);
        let s = FlowState::new(&h, 0.0);
        assert_eq!(collapse_limit(&s, 1e-8), h);
    }
}
