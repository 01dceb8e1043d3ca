//! Oriented polygonal networks: data model, JSON format, admissibility checks
//! and junction bookkeeping.
//!
//! Orientation convention: the tangent τ of an edge points from `from` to
//! `to` (or along `dir` for a half-line) and the normal is ν = rot90(τ),
//! counterclockwise.

use crate::anisotropy::{self, direction_index, facet_of_normal, FacetIndex, Vec2, ANGLE_TOL};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("junction at vertex {0} has degree {1} > 6")]
    UnsupportedJunction(String, usize),
    #[error("network is not admissible: {0}")]
    NotAdmissible(String),
    #[error("network is not conical")]
    NotConical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub pos: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeEnd {
    /// Segment ending at a vertex index.
    Vertex(usize),
    /// Half-line with unit direction.
    Direction(Vec2),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub end: EdgeEnd,
    pub curve: String,
    pub multiplicity: u32,
}

impl Edge {
    pub fn is_segment(&self) -> bool {
        matches!(self.end, EdgeEnd::Vertex(_))
    }

    pub fn is_halfline(&self) -> bool {
        !self.is_segment()
    }

    pub fn to(&self) -> Option<usize> {
        match self.end {
            EdgeEnd::Vertex(v) => Some(v),
            EdgeEnd::Direction(_) => None,
        }
    }
}

/// One edge end at a vertex. `sigma` is 0 when the edge leaves the vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    pub edge: usize,
    pub sigma: u8,
    /// Unit direction of the edge as seen from the vertex.
    pub ray: Vec2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self, id: impl Into<String>, pos: Vec2) -> usize {
        self.vertices.push(Vertex { id: id.into(), pos });
        self.vertices.len() - 1
    }

    pub fn add_segment(&mut self, id: impl Into<String>, from: usize, to: usize, curve: impl Into<String>) -> usize {
        self.edges.push(Edge {
            id: id.into(),
            from,
            end: EdgeEnd::Vertex(to),
            curve: curve.into(),
            multiplicity: 1,
        });
        self.edges.len() - 1
    }

    pub fn add_halfline(&mut self, id: impl Into<String>, from: usize, dir: Vec2, curve: impl Into<String>) -> usize {
        self.edges.push(Edge {
            id: id.into(),
            from,
            end: EdgeEnd::Direction(dir),
            curve: curve.into(),
            multiplicity: 1,
        });
        self.edges.len() - 1
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn tangent(&self, e: usize) -> Vec2 {
        let edge = &self.edges[e];
        match edge.end {
            EdgeEnd::Vertex(to) => (self.vertices[to].pos - self.vertices[edge.from].pos).normalized(),
            EdgeEnd::Direction(d) => d,
        }
    }

    pub fn normal(&self, e: usize) -> Vec2 {
        self.tangent(e).rot90()
    }

    /// Euclidean length; infinite for half-lines.
    pub fn length(&self, e: usize) -> f64 {
        let edge = &self.edges[e];
        match edge.end {
            EdgeEnd::Vertex(to) => self.vertices[to].pos.dist(self.vertices[edge.from].pos),
            EdgeEnd::Direction(_) => f64::INFINITY,
        }
    }

    pub fn segment_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].is_segment())
    }

    pub fn min_segment_length(&self) -> f64 {
        self.segment_indices().map(|e| self.length(e)).fold(f64::INFINITY, f64::min)
    }

    /// Edge ends at every vertex.
    pub fn incidence(&self) -> Vec<Vec<Incidence>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for (i, e) in self.edges.iter().enumerate() {
            let t = self.tangent(i);
            inc[e.from].push(Incidence { edge: i, sigma: 0, ray: t });
            if let Some(to) = e.to() {
                inc[to].push(Incidence { edge: i, sigma: 1, ray: -t });
            }
        }
        inc
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.incidence().iter().map(|v| v.len()).collect()
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.pos.x), lo.y.min(v.pos.y));
            hi = Vec2::new(hi.x.max(v.pos.x), hi.y.max(v.pos.y));
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.bbox();
        lo.dist(hi)
    }

    /// Tolerance used to decide that two points coincide.
    pub fn point_tol(&self) -> f64 {
        let d = self.diameter();
        1e-9 * if d > 0.0 { d } else { 1.0 }
    }

    /// Angular tolerance for edge `e`: a segment's direction is only known up to
    /// the point tolerance at both ends.
    pub fn direction_tol(&self, e: usize) -> f64 {
        let l = self.length(e);
        if l.is_finite() {
            ANGLE_TOL.max(2.0 * self.point_tol() / l)
        } else {
            ANGLE_TOL
        }
    }

    pub fn facet_of(&self, e: usize) -> Option<FacetIndex> {
        facet_of_normal(self.normal(e), self.direction_tol(e)).ok()
    }

    /// Image under a linear map `m` (row-major 2x2) followed by a translation.
    pub fn transformed(&self, m: [[f64; 2]; 2], shift: Vec2) -> Network {
        let apply = |p: Vec2| Vec2::new(m[0][0] * p.x + m[0][1] * p.y, m[1][0] * p.x + m[1][1] * p.y);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let mut out = self.clone();
        for v in &mut out.vertices {
            v.pos = apply(v.pos) + shift;
        }
        for e in &mut out.edges {
            if let EdgeEnd::Direction(d) = e.end {
                let img = apply(d);
                e.end = EdgeEnd::Direction(img * (1.0 / img.norm()));
            }
        }
        // a reflection reverses orientation; flip edges so normals keep
        // pointing to the image of the old normal side
        if det < 0.0 {
            out = out.reversed_segments();
        }
        out
    }

    /// Swap `from`/`to` of every segment (half-lines keep their direction).
    pub fn reversed_segments(&self) -> Network {
        let mut out = self.clone();
        for e in &mut out.edges {
            if let EdgeEnd::Vertex(to) = e.end {
                e.end = EdgeEnd::Vertex(e.from);
                e.from = to;
            }
        }
        out
    }

    pub fn scaled(&self, lambda: f64) -> Network {
        self.transformed([[lambda, 0.0], [0.0, lambda]], Vec2::ZERO)
    }

    /// Rename curve tokens so that edges meeting at a degree-2 vertex share one.
    pub fn relabel_curves(&mut self) {
        let n = self.edges.len();
        let mut uf = UnionFind::new(n);
        for inc in self.incidence() {
            if inc.len() == 2 {
                uf.union(inc[0].edge, inc[1].edge);
            }
        }
        let mut name: HashMap<usize, String> = HashMap::new();
        for e in 0..n {
            let r = uf.find(e);
            let cand = &self.edges[e].curve;
            let entry = name.entry(r).or_insert_with(|| cand.clone());
            if cand < entry {
                *entry = cand.clone();
            }
        }
        for e in 0..n {
            let r = uf.find(e);
            self.edges[e].curve = name[&r].clone();
        }
    }
}

/// Disjoint-set forest over `0..n`.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DocMeta {
    pub source: Option<String>,
    pub scenario: Option<ScenarioRef>,
}

#[derive(Serialize, Deserialize)]
struct VertexDoc {
    id: String,
    pos: [f64; 2],
}

fn is_one(m: &u32) -> bool {
    *m == 1
}

fn one() -> u32 {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum EdgeDoc {
    Segment {
        id: String,
        from: String,
        to: String,
        curve: String,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        multiplicity: u32,
    },
    Halfline {
        id: String,
        from: String,
        dir: [f64; 2],
        curve: String,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        multiplicity: u32,
    },
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<ScenarioRef>,
    vertices: Vec<VertexDoc>,
    edges: Vec<EdgeDoc>,
}

pub fn parse(text: &str) -> Result<Network, NetworkError> {
    parse_document(text).map(|(n, _)| n)
}

pub fn parse_document(text: &str) -> Result<(Network, DocMeta), NetworkError> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| NetworkError::Schema(e.to_string()))?;
    let mut net = Network::new();
    let mut vids: HashMap<String, usize> = HashMap::new();
    for v in doc.vertices {
        if vids.contains_key(&v.id) {
            return Err(NetworkError::DuplicateId(v.id));
        }
        let pos = Vec2::new(v.pos[0], v.pos[1]);
        if !pos.is_finite() {
            return Err(NetworkError::Schema(format!("vertex {} has a non-finite position", v.id)));
        }
        vids.insert(v.id.clone(), net.add_vertex(v.id, pos));
    }
    let lookup = |id: &str, owner: &str| {
        vids.get(id)
            .copied()
            .ok_or_else(|| NetworkError::DanglingReference(format!("edge {owner} refers to vertex {id}")))
    };
    let mut eids = HashSet::new();
    for e in doc.edges {
        let (id, from, end, curve, mult) = match e {
            EdgeDoc::Segment { id, from, to, curve, multiplicity } => {
                let f = lookup(&from, &id)?;
                let t = lookup(&to, &id)?;
                if f == t {
                    return Err(NetworkError::Schema(format!("segment {id} starts and ends at {from}")));
                }
                if net.vertices[f].pos == net.vertices[t].pos {
                    return Err(NetworkError::Schema(format!("segment {id} has zero length")));
                }
                (id, f, EdgeEnd::Vertex(t), curve, multiplicity)
            }
            EdgeDoc::Halfline { id, from, dir, curve, multiplicity } => {
                let f = lookup(&from, &id)?;
                let d = Vec2::new(dir[0], dir[1]);
                if !d.is_finite() || (d.norm() - 1.0).abs() > 1e-9 {
                    return Err(NetworkError::Schema(format!("half-line {id} direction is not a unit vector")));
                }
                (id, f, EdgeEnd::Direction(d), curve, multiplicity)
            }
        };
        if !eids.insert(id.clone()) {
            return Err(NetworkError::DuplicateId(id));
        }
        if mult == 0 {
            return Err(NetworkError::Schema(format!("edge {id} has multiplicity 0")));
        }
        net.edges.push(Edge { id, from, end, curve, multiplicity: mult });
    }
    Ok((net, DocMeta { source: doc.source, scenario: doc.scenario }))
}

pub fn serialize(net: &Network) -> String {
    serialize_document(net, &DocMeta::default())
}

pub fn serialize_document(net: &Network, meta: &DocMeta) -> String {
    let doc = NetworkDoc {
        source: meta.source.clone(),
        scenario: meta.scenario.clone(),
        vertices: net
            .vertices
            .iter()
            .map(|v| VertexDoc { id: v.id.clone(), pos: [v.pos.x, v.pos.y] })
            .collect(),
        edges: net
            .edges
            .iter()
            .map(|e| match e.end {
                EdgeEnd::Vertex(t) => EdgeDoc::Segment {
                    id: e.id.clone(),
                    from: net.vertices[e.from].id.clone(),
                    to: net.vertices[t].id.clone(),
                    curve: e.curve.clone(),
                    multiplicity: e.multiplicity,
                },
                EdgeEnd::Direction(d) => EdgeDoc::Halfline {
                    id: e.id.clone(),
                    from: net.vertices[e.from].id.clone(),
                    dir: [d.x, d.y],
                    curve: e.curve.clone(),
                    multiplicity: e.multiplicity,
                },
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("network serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFacetDirection { edge: String },
    SimpleVertexAngle { vertex: String, angle_deg: f64 },
    SimpleVertexOrientation { vertex: String },
    CurveBreak { vertex: String },
    FreeEndpoint { vertex: String },
    IsolatedVertex { vertex: String },
    CoincidentVertices { a: String, b: String },
    DegreeTooHigh { vertex: String, degree: usize },
    Overlap { a: String, b: String },
    Disconnected { components: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonFacetDirection { edge } => write!(f, "edge {edge}: direction not parallel to a facet"),
            Violation::SimpleVertexAngle { vertex, angle_deg } => {
                write!(f, "vertex {vertex}: simple vertex angle {angle_deg:.6} deg (expected 120)")
            }
            Violation::SimpleVertexOrientation { vertex } => {
                write!(f, "vertex {vertex}: edges of a simple vertex are not consistently oriented")
            }
            Violation::CurveBreak { vertex } => write!(f, "vertex {vertex}: simple vertex joins two different curves"),
            Violation::FreeEndpoint { vertex } => write!(f, "vertex {vertex}: free endpoint"),
            Violation::IsolatedVertex { vertex } => write!(f, "vertex {vertex}: isolated vertex"),
            Violation::CoincidentVertices { a, b } => write!(f, "vertices {a} and {b} coincide"),
            Violation::DegreeTooHigh { vertex, degree } => write!(f, "vertex {vertex}: degree {degree} > 6"),
            Violation::Overlap { a, b } => write!(f, "edges {a} and {b} intersect away from a common vertex"),
            Violation::Disconnected { components } => write!(f, "network has {components} connected components"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Facet index of each edge normal (None if not admissible).
    pub facets: Vec<Option<FacetIndex>>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Signed angle in degrees from `a` to `b`, in (-180, 180].
fn turn_deg(a: Vec2, b: Vec2) -> f64 {
    a.cross(b).atan2(a.dot(b)).to_degrees()
}

pub fn validate_admissible(net: &Network) -> ValidationReport {
    let mut violations = Vec::new();
    let facets: Vec<Option<FacetIndex>> = (0..net.edges.len()).map(|e| net.facet_of(e)).collect();
    for (e, f) in facets.iter().enumerate() {
        if f.is_none() {
            violations.push(Violation::NonFacetDirection { edge: net.edges[e].id.clone() });
        }
    }
    let inc = net.incidence();
    for (v, list) in inc.iter().enumerate() {
        let id = net.vertices[v].id.clone();
        let tol_deg = list.iter().map(|i| net.direction_tol(i.edge)).fold(ANGLE_TOL, f64::max).to_degrees();
        match list.len() {
            0 => violations.push(Violation::IsolatedVertex { vertex: id }),
            1 => violations.push(Violation::FreeEndpoint { vertex: id }),
            2 => {
                let (a, b) = (list[0], list[1]);
                let ang = turn_deg(a.ray, b.ray).abs();
                let both_half = net.edges[a.edge].is_halfline() && net.edges[b.edge].is_halfline();
                if both_half && (ang - 180.0).abs() <= tol_deg {
                    // a straight line split into two half-lines
                } else if (ang - 120.0).abs() > tol_deg {
                    violations.push(Violation::SimpleVertexAngle { vertex: id, angle_deg: ang });
                } else {
                    if a.sigma == b.sigma {
                        violations.push(Violation::SimpleVertexOrientation { vertex: id.clone() });
                    }
                    if net.edges[a.edge].curve != net.edges[b.edge].curve {
                        violations.push(Violation::CurveBreak { vertex: id });
                    }
                }
            }
            d if d > 6 => violations.push(Violation::DegreeTooHigh { vertex: id, degree: d }),
            _ => {}
        }
    }
    let tol = net.point_tol();
    for a in 0..net.vertices.len() {
        for b in a + 1..net.vertices.len() {
            if net.vertices[a].pos.dist(net.vertices[b].pos) <= tol {
                violations.push(Violation::CoincidentVertices {
                    a: net.vertices[a].id.clone(),
                    b: net.vertices[b].id.clone(),
                });
            }
        }
    }
    for a in 0..net.edges.len() {
        for b in a + 1..net.edges.len() {
            if edges_overlap(net, a, b, tol) {
                violations.push(Violation::Overlap {
                    a: net.edges[a].id.clone(),
                    b: net.edges[b].id.clone(),
                });
            }
        }
    }
    let comps = vertex_components(net);
    if comps > 1 {
        violations.push(Violation::Disconnected { components: comps });
    }
    ValidationReport { facets, violations }
}

fn vertex_components(net: &Network) -> usize {
    let mut uf = UnionFind::new(net.vertices.len());
    for e in &net.edges {
        if let Some(t) = e.to() {
            uf.union(e.from, t);
        }
    }
    let roots: HashSet<usize> = (0..net.vertices.len()).map(|v| uf.find(v)).collect();
    roots.len()
}

/// Parametrized edge p + t r with t in [0, tmax].
fn edge_param(net: &Network, e: usize) -> (Vec2, Vec2, f64) {
    let edge = &net.edges[e];
    let p = net.vertices[edge.from].pos;
    match edge.end {
        EdgeEnd::Vertex(t) => {
            let d = net.vertices[t].pos - p;
            let l = d.norm();
            (p, d * (1.0 / l), l)
        }
        EdgeEnd::Direction(d) => (p, d, f64::INFINITY),
    }
}

/// Whether two edges meet anywhere other than at a shared endpoint.
fn edges_overlap(net: &Network, a: usize, b: usize, tol: f64) -> bool {
    let (p, r, lp) = edge_param(net, a);
    let (q, s, lq) = edge_param(net, b);
    let ea = &net.edges[a];
    let eb = &net.edges[b];
    let ends_a: Vec<usize> = std::iter::once(ea.from).chain(ea.to()).collect();
    let ends_b: Vec<usize> = std::iter::once(eb.from).chain(eb.to()).collect();
    let shared: Vec<usize> = ends_a.iter().copied().filter(|v| ends_b.contains(v)).collect();
    let den = r.cross(s);
    if den.abs() < 1e-12 {
        // parallel: overlap only if collinear with overlapping interiors
        if (q - p).cross(r).abs() > tol {
            return false;
        }
        let t0 = (q - p).dot(r);
        let t1 = if lq.is_finite() { t0 + lq * s.dot(r) } else if s.dot(r) > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        let (lo, hi) = (t0.min(t1), t0.max(t1));
        let overlap = hi.min(lp) - lo.max(0.0);
        return overlap > tol;
    }
    if shared.len() == 2 {
        // two distinct non-parallel segments with the same endpoints cannot exist
        return false;
    }
    let w = q - p;
    let t = w.cross(s) / den;
    let u = w.cross(r) / den;
    let inside = |x: f64, l: f64| x >= -tol && x <= l + tol;
    if !(inside(t, lp) && inside(u, lq)) {
        return false;
    }
    if let Some(&v) = shared.first() {
        // non-parallel lines through a shared vertex meet only there
        let x = p + r * t;
        return x.dist(net.vertices[v].pos) > tol;
    }
    true
}

// ---------------------------------------------------------------------------
// Junctions

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JunctionKind {
    Triple120,
    TripleOther,
    W,
    Psi,
    X,
    Five,
    Six,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncidentEdge {
    pub edge: usize,
    pub sigma: u8,
    /// Direction index j of the outward ray (angle 60°j).
    pub ray: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JunctionInfo {
    pub vertex: usize,
    pub degree: usize,
    /// Incident edges sorted counterclockwise by ray direction.
    pub incident: Vec<IncidentEdge>,
    /// Counterclockwise gaps between consecutive rays, in degrees.
    pub gaps_deg: Vec<f64>,
    pub kind: JunctionKind,
}

impl JunctionInfo {
    pub fn is_120(&self) -> bool {
        self.kind == JunctionKind::Triple120
    }
}

pub fn classify_junctions(net: &Network) -> Result<Vec<JunctionInfo>, NetworkError> {
    let inc = net.incidence();
    let mut out = Vec::new();
    for (v, list) in inc.iter().enumerate() {
        let m = list.len();
        if m < 3 {
            continue;
        }
        if m > 6 {
            return Err(NetworkError::UnsupportedJunction(net.vertices[v].id.clone(), m));
        }
        let mut incident = Vec::with_capacity(m);
        for i in list {
            let ray = direction_index(i.ray, net.direction_tol(i.edge)).map_err(|_| {
                NetworkError::NotAdmissible(format!("edge {} is not parallel to a facet", net.edges[i.edge].id))
            })?;
            incident.push(IncidentEdge { edge: i.edge, sigma: i.sigma, ray });
        }
        incident.sort_by_key(|x| x.ray);
        for w in incident.windows(2) {
            if w[0].ray == w[1].ray {
                return Err(NetworkError::NotAdmissible(format!(
                    "edges {} and {} overlap at vertex {}",
                    net.edges[w[0].edge].id, net.edges[w[1].edge].id, net.vertices[v].id
                )));
            }
        }
        let gaps: Vec<usize> = (0..m)
            .map(|i| (incident[(i + 1) % m].ray + 6 - incident[i].ray - 1) % 6 + 1)
            .collect();
        let kind = match m {
            3 if gaps.iter().all(|&g| g == 2) => JunctionKind::Triple120,
            3 => JunctionKind::TripleOther,
            4 => {
                let present: Vec<usize> = incident.iter().map(|x| x.ray).collect();
                let missing: Vec<usize> = (0..6).filter(|j| !present.contains(j)).collect();
                match (missing[1] - missing[0]).min(6 - (missing[1] - missing[0])) {
                    1 => JunctionKind::W,
                    2 => JunctionKind::Psi,
                    _ => JunctionKind::X,
                }
            }
            5 => JunctionKind::Five,
            _ => JunctionKind::Six,
        };
        out.push(JunctionInfo {
            vertex: v,
            degree: m,
            incident,
            gaps_deg: gaps.iter().map(|&g| 60.0 * g as f64).collect(),
            kind,
        });
    }
    Ok(out)
}

pub fn is_simple(net: &Network) -> Result<bool, NetworkError> {
    Ok(classify_junctions(net)?.iter().all(|j| j.is_120()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subgraph {
    pub edges: Vec<usize>,
    pub junctions: Vec<usize>,
}

/// Connected pieces of the network after cutting at every vertex of degree ≤ 2.
pub fn partition_graphs(net: &Network) -> Vec<Subgraph> {
    let inc = net.incidence();
    let mut uf = UnionFind::new(net.edges.len());
    for list in &inc {
        if list.len() >= 3 {
            for w in list.windows(2) {
                uf.union(w[0].edge, w[1].edge);
            }
        }
    }
    let mut groups: BTreeMap<usize, Subgraph> = BTreeMap::new();
    for e in 0..net.edges.len() {
        let r = uf.find(e);
        groups.entry(r).or_insert_with(|| Subgraph { edges: Vec::new(), junctions: Vec::new() }).edges.push(e);
    }
    for (v, list) in inc.iter().enumerate() {
        if list.len() >= 3 {
            let r = uf.find(list[0].edge);
            groups.get_mut(&r).expect("group exists").junctions.push(v);
        }
    }
    groups.into_values().collect()
}

// ---------------------------------------------------------------------------
// Conical networks

/// Facets of the Wulff hexagon met by a ray from its center in direction `dir`:
/// two facets when the ray passes through a Wulff vertex, one otherwise.
pub fn facets_hit(dir: Vec2) -> Vec<FacetIndex> {
    let a = dir.angle_deg().rem_euclid(360.0);
    let q = a / 60.0;
    let j = q.round();
    if (q - j).abs() * 60.0 <= ANGLE_TOL.to_degrees() {
        let j = (j as usize) % 6;
        vec![(j + 5) % 6, j]
    } else {
        vec![(q.floor() as usize) % 6]
    }
}

pub fn triplet_ok(a: &[FacetIndex], b: &[FacetIndex], c: &[FacetIndex]) -> bool {
    for &x in a {
        for &y in b {
            for &z in c {
                let mut s = [x, y, z];
                s.sort();
                if s == [0, 2, 4] || s == [1, 3, 5] {
                    return true;
                }
            }
        }
    }
    false
}

pub fn doublet_ok(a: &[FacetIndex], b: &[FacetIndex]) -> bool {
    a.iter().any(|&x| b.iter().any(|&y| (x + 3) % 6 == y))
}

fn cover(sets: &[Vec<FacetIndex>], used: &mut [bool]) -> bool {
    let Some(i) = used.iter().position(|u| !u) else {
        return true;
    };
    used[i] = true;
    let n = sets.len();
    for j in i + 1..n {
        if used[j] {
            continue;
        }
        if doublet_ok(&sets[i], &sets[j]) {
            used[j] = true;
            if cover(sets, used) {
                return true;
            }
            used[j] = false;
        }
        for k in j + 1..n {
            if used[k] || !triplet_ok(&sets[i], &sets[j], &sets[k]) {
                continue;
            }
            used[j] = true;
            used[k] = true;
            if cover(sets, used) {
                return true;
            }
            used[j] = false;
            used[k] = false;
        }
    }
    used[i] = false;
    false
}

/// Criticality of a conical network via a partition of its half-lines into
/// triplets meeting three non-adjacent facets and doublets meeting two
/// opposite facets.
pub fn is_conical_critical(net: &Network) -> Result<bool, NetworkError> {
    if net.edges.is_empty() || net.edges.iter().any(|e| e.is_segment()) {
        return Err(NetworkError::NotConical);
    }
    let apex = net.edges[0].from;
    if net.edges.iter().any(|e| e.from != apex) {
        return Err(NetworkError::NotConical);
    }
    let sets: Vec<Vec<FacetIndex>> = (0..net.edges.len()).map(|e| facets_hit(net.tangent(e))).collect();
    Ok(conical_cover_exists(&sets))
}

pub fn conical_cover_exists(sets: &[Vec<FacetIndex>]) -> bool {
    let mut used = vec![false; sets.len()];
    !sets.is_empty() && cover(sets, &mut used)
}

/// The constant CH value of a chain, if one exists: the chain's normals must
/// lie on at most two facets, and two facets must be adjacent.
pub fn constant_ch_value(net: &Network, chain: &[usize]) -> Option<Vec2> {
    let mut ks: Vec<FacetIndex> = Vec::new();
    for &e in chain {
        let k = net.facet_of(e)?;
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    match ks.as_slice() {
        [] => None,
        [k] => Some(anisotropy::ch_point(*k, anisotropy::D / 2.0).ok()?),
        [a, b] => {
            if (a + 1) % 6 == *b {
                Some(anisotropy::wulff_vertex(*b))
            } else if (b + 1) % 6 == *a {
                Some(anisotropy::wulff_vertex(*a))
            } else {
                None
            }
        }
        _ => None,
    }
}

pub fn has_constant_ch_chain(net: &Network, chain: &[usize]) -> bool {
    constant_ch_value(net, chain).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::hex_direction;

    fn triod() -> Network {
        let mut n = Network::new();
        let o = n.add_vertex("O", Vec2::ZERO);
        for (i, j) in [0usize, 2, 4].iter().enumerate() {
            n.add_halfline(format!("L{i}"), o, hex_direction(*j), format!("G{i}"));
        }
        n
    }

    fn hexagon(r: f64) -> Network {
        let mut n = Network::new();
        let v: Vec<usize> = (0..6).map(|j| n.add_vertex(format!("A{j}"), hex_direction(j) * r)).collect();
        for j in 0..6 {
            n.add_segment(format!("S{j}"), v[j], v[(j + 1) % 6], "G");
        }
        n
    }

    #[test]
    fn triod_parses_with_one_triple_junction() {
        let text = serialize(&triod());
        let n = parse(&text).unwrap();
        let j = classify_junctions(&n).unwrap();
        assert_eq!(j.len(), 1);
        assert_eq!(j[0].degree, 3);
        assert!(j[0].is_120());
        assert_eq!(serialize(&n), text);
    }

    #[test]
    fn parse_errors() {
        let bad = r#"{"vertices":[{"id":"A","pos":[0,0]}],"edges":[{"id":"S","kind":"segment","from":"A","to":"A","curve":"G"}]}"#;
        assert!(matches!(parse(bad), Err(NetworkError::Schema(_))));
        let dangling = r#"{"vertices":[{"id":"A","pos":[0,0]}],"edges":[{"id":"S","kind":"segment","from":"A","to":"B","curve":"G"}]}"#;
        assert!(matches!(parse(dangling), Err(NetworkError::DanglingReference(_))));
        let dup = r#"{"vertices":[{"id":"A","pos":[0,0]},{"id":"A","pos":[1,0]}],"edges":[]}"#;
        assert!(matches!(parse(dup), Err(NetworkError::DuplicateId(_))));
        assert!(matches!(parse("{"), Err(NetworkError::Schema(_))));
    }

    #[test]
    fn hexagon_valid_and_partitioned() {
        let h = hexagon(1.0);
        let rep = validate_admissible(&h);
        assert!(rep.is_valid(), "{:?}", rep.violations);
        let mut f: Vec<_> = rep.facets.iter().map(|f| f.unwrap()).collect();
        f.sort();
        assert_eq!(f, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(partition_graphs(&h).len(), 6);
        assert!(is_simple(&h).unwrap());
    }

    #[test]
    fn hexagon_with_right_angle_rejected() {
        let mut h = hexagon(1.0);
        // move A1 so that the angle at A1 becomes 90 degrees
        h.vertices[1].pos = Vec2::new(1.0, 1.0);
        h.vertices[0].pos = Vec2::new(1.0, 0.0);
        h.vertices[2].pos = Vec2::new(0.0, 1.0);
        let rep = validate_admissible(&h);
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::SimpleVertexAngle { .. })));
    }

    #[test]
    fn triod_is_one_subgraph_and_critical() {
        let t = triod();
        assert_eq!(partition_graphs(&t).len(), 1);
        assert!(is_conical_critical(&t).unwrap());
    }

    #[test]
    fn adjacent_triod_not_critical() {
        let mut n = Network::new();
        let o = n.add_vertex("O", Vec2::ZERO);
        for j in 0..3 {
            n.add_halfline(format!("L{j}"), o, hex_direction(j), format!("G{j}"));
        }
        let j = classify_junctions(&n).unwrap();
        assert_eq!(j[0].kind, JunctionKind::TripleOther);
        assert!(!is_conical_critical(&n).unwrap());
    }

    #[test]
    fn ten_halfline_cone_critical() {
        let mut n = Network::new();
        let o = n.add_vertex("O", Vec2::ZERO);
        for (i, a) in [10.0, 50.0, 70.0, 100.0, 130.0, 200.0, 230.0, 250.0, 280.0, 330.0].iter().enumerate() {
            n.add_halfline(format!("L{}", i + 1), o, Vec2::polar_deg(*a), format!("G{i}"));
        }
        assert!(is_conical_critical(&n).unwrap());
    }

    #[test]
    fn four_junction_types() {
        let cone = |dirs: &[usize]| {
            let mut n = Network::new();
            let o = n.add_vertex("O", Vec2::ZERO);
            for &j in dirs {
                n.add_halfline(format!("L{j}"), o, hex_direction(j), format!("G{j}"));
            }
            classify_junctions(&n).unwrap()[0].kind
        };
        assert_eq!(cone(&[0, 1, 2, 3]), JunctionKind::W);
        assert_eq!(cone(&[0, 2, 3, 4]), JunctionKind::Psi);
        assert_eq!(cone(&[0, 1, 3, 4]), JunctionKind::X);
    }

    #[test]
    fn constant_chain() {
        // zigzag alternating two directions 60 degrees apart
        let mut n = Network::new();
        let mut p = Vec2::ZERO;
        let mut prev = n.add_vertex("P0", p);
        for i in 0..6 {
            p = p + hex_direction(i % 2);
            let v = n.add_vertex(format!("P{}", i + 1), p);
            n.add_segment(format!("S{i}"), prev, v, "G");
            prev = v;
        }
        let all: Vec<usize> = (0..6).collect();
        assert!(has_constant_ch_chain(&n, &all));
        assert!(has_constant_ch_chain(&n, &[0]));
        let h = hexagon(1.0);
        assert!(!has_constant_ch_chain(&h, &[0, 1, 2]));
    }

    #[test]
    fn straight_line_is_simple() {
        let mut n = Network::new();
        let o = n.add_vertex("O", Vec2::ZERO);
        n.add_halfline("L0", o, hex_direction(0), "G");
        n.add_halfline("L1", o, hex_direction(3), "G");
        assert!(validate_admissible(&n).is_valid());
        assert!(is_simple(&n).unwrap());
    }
}
