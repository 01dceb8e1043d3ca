//! Minimal Cahn–Hoffman fields and crystalline curvature.
//!
//! Every edge end carries a parameter s ∈ [0, d] locating N on the facet of the
//! edge normal (see [`anisotropy::ch_point`]). At a vertex the outward-signed
//! value (−1)^σ N lies on facet `ray + 1`, and its parameter on that facet is
//! the same s, so junction constraints can be written without caring about
//! edge orientation.

use crate::anisotropy::{ch_param, wulff_vertex, FacetIndex, Vec2, D};
use crate::network::{classify_junctions, JunctionInfo, JunctionKind, Network, NetworkError, UnionFind};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChFieldError {
    #[error("no Cahn-Hoffman field exists at junction {0}")]
    NoCHField(String),
    #[error("network is not admissible: {0}")]
    NotAdmissible(String),
    #[error("singular linear system")]
    SingularSystem,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EndValue {
    Var(usize),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JunctionClass {
    Ic,
    Bc,
}

/// ψ(x) = Σ a_k x_k² + Σ b_k (d − x_k)² + Σ_{k<l} c_kl (x_k − x_l)², plus the
/// network bookkeeping needed to turn a minimizer back into a field.
#[derive(Debug, Clone, PartialEq)]
pub struct CHProgram {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    /// Vertex carrying each variable (None for programs built from coefficients).
    pub var_vertex: Vec<Option<usize>>,
    /// Per edge: value at the `from` end and at the `to` end.
    pub ends: Vec<[Option<EndValue>; 2]>,
    pub facets: Vec<FacetIndex>,
    pub lengths: Vec<f64>,
}

impl CHProgram {
    pub fn from_coefficients(a: Vec<f64>, b: Vec<f64>, c: Vec<Vec<f64>>) -> Self {
        let n = a.len();
        assert!(b.len() == n && c.len() == n && c.iter().all(|r| r.len() == n));
        CHProgram {
            a,
            b,
            c,
            var_vertex: vec![None; n],
            ends: Vec::new(),
            facets: Vec::new(),
            lengths: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.a.len()
    }

    fn new_var(&mut self, vertex: usize) -> usize {
        self.a.push(0.0);
        self.b.push(0.0);
        for row in &mut self.c {
            row.push(0.0);
        }
        self.c.push(vec![0.0; self.a.len()]);
        self.var_vertex.push(Some(vertex));
        self.a.len() - 1
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.n_vars();
        let mut s = 0.0;
        for k in 0..n {
            s += self.a[k] * x[k] * x[k] + self.b[k] * (D - x[k]) * (D - x[k]);
            for l in k + 1..n {
                s += self.c[k][l] * (x[k] - x[l]) * (x[k] - x[l]);
            }
        }
        s
    }

    /// Connected components of the coupling graph.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let n = self.n_vars();
        let mut uf = UnionFind::new(n);
        for k in 0..n {
            for l in k + 1..n {
                if self.c[k][l] > 0.0 {
                    uf.union(k, l);
                }
            }
        }
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut root_slot = vec![usize::MAX; n];
        for k in 0..n {
            let r = uf.find(k);
            if root_slot[r] == usize::MAX {
                root_slot[r] = out.len();
                out.push(Vec::new());
            }
            out[root_slot[r]].push(k);
        }
        out
    }

    /// Hessian/2 and right-hand side of ∇ψ = 0 restricted to `vars`.
    pub fn linear_system(&self, vars: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let m = vars.len();
        let mut a = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (i, &k) in vars.iter().enumerate() {
            let coupling: f64 = self.c[k].iter().sum();
            a[(i, i)] = self.a[k] + self.b[k] + coupling;
            rhs[i] = self.b[k] * D;
            for (j, &l) in vars.iter().enumerate() {
                if j != i {
                    a[(i, j)] = -self.c[k][l];
                }
            }
        }
        (a, rhs)
    }
}

fn snap(s: f64) -> f64 {
    if s.abs() < 1e-9 {
        0.0
    } else if (s - D).abs() < 1e-9 {
        D
    } else {
        s
    }
}

/// Wulff vertex shared by two adjacent facets.
fn shared_vertex(k1: FacetIndex, k2: FacetIndex) -> Option<Vec2> {
    if (k1 + 1) % 6 == k2 {
        Some(wulff_vertex(k2))
    } else if (k2 + 1) % 6 == k1 {
        Some(wulff_vertex(k1))
    } else {
        None
    }
}

pub fn assemble(net: &Network) -> Result<CHProgram, ChFieldError> {
    let ne = net.edges.len();
    let mut facets = Vec::with_capacity(ne);
    for e in 0..ne {
        let k = net
            .facet_of(e)
            .ok_or_else(|| ChFieldError::NotAdmissible(format!("edge {} is not parallel to a facet", net.edges[e].id)))?;
        facets.push(k);
    }
    let mut prog = CHProgram {
        a: Vec::new(),
        b: Vec::new(),
        c: Vec::new(),
        var_vertex: Vec::new(),
        ends: vec![[None, None]; ne],
        facets,
        lengths: (0..ne).map(|e| net.length(e)).collect(),
    };

    let inc = net.incidence();
    for (v, list) in inc.iter().enumerate() {
        let vid = &net.vertices[v].id;
        match list.len() {
            0 => return Err(ChFieldError::NotAdmissible(format!("vertex {vid} is isolated"))),
            1 => return Err(ChFieldError::NotAdmissible(format!("vertex {vid} is a free endpoint"))),
            2 => {
                let (p, q) = (list[0], list[1]);
                let straight = p.ray.dot(q.ray) < -1.0 + 1e-12;
                if straight && net.edges[p.edge].is_halfline() && net.edges[q.edge].is_halfline() {
                    prog.ends[p.edge][p.sigma as usize] = Some(EndValue::Fixed(D / 2.0));
                    prog.ends[q.edge][q.sigma as usize] = Some(EndValue::Fixed(D / 2.0));
                    continue;
                }
                if p.sigma == q.sigma {
                    return Err(ChFieldError::NotAdmissible(format!("vertex {vid}: inconsistent orientation")));
                }
                let (kp, kq) = (prog.facets[p.edge], prog.facets[q.edge]);
                let w = shared_vertex(kp, kq)
                    .ok_or_else(|| ChFieldError::NotAdmissible(format!("vertex {vid}: angle is not 120 degrees")))?;
                prog.ends[p.edge][p.sigma as usize] = Some(EndValue::Fixed(snap(ch_param(kp, w))));
                prog.ends[q.edge][q.sigma as usize] = Some(EndValue::Fixed(snap(ch_param(kq, w))));
            }
            _ => {}
        }
    }

    let junctions = classify_junctions(net)?;
    for j in &junctions {
        match j.kind {
            JunctionKind::Triple120 => {
                let k = prog.new_var(j.vertex);
                for ie in &j.incident {
                    prog.ends[ie.edge][ie.sigma as usize] = Some(EndValue::Var(k));
                }
            }
            JunctionKind::W | JunctionKind::Psi | JunctionKind::X => {
                for (ia, ib) in [(0usize, 2usize), (1, 3)] {
                    let (ea, eb) = (j.incident[ia], j.incident[ib]);
                    let fa = (ea.ray + 1) % 6;
                    let fb = (eb.ray + 1) % 6;
                    let fb_opp = (fb + 3) % 6;
                    if fb_opp == fa {
                        let k = prog.new_var(j.vertex);
                        prog.ends[ea.edge][ea.sigma as usize] = Some(EndValue::Var(k));
                        prog.ends[eb.edge][eb.sigma as usize] = Some(EndValue::Var(k));
                    } else {
                        let w = shared_vertex(fa, fb_opp)
                            .ok_or_else(|| ChFieldError::NoCHField(net.vertices[j.vertex].id.clone()))?;
                        prog.ends[ea.edge][ea.sigma as usize] = Some(EndValue::Fixed(snap(ch_param(fa, w))));
                        prog.ends[eb.edge][eb.sigma as usize] = Some(EndValue::Fixed(snap(ch_param(fb, -w))));
                    }
                }
            }
            JunctionKind::TripleOther | JunctionKind::Five | JunctionKind::Six => {
                let choice = pinned_assignment(&prog, j)
                    .ok_or_else(|| ChFieldError::NoCHField(net.vertices[j.vertex].id.clone()))?;
                for (ie, s) in j.incident.iter().zip(choice) {
                    prog.ends[ie.edge][ie.sigma as usize] = Some(EndValue::Fixed(s));
                }
            }
        }
    }

    for e in 0..ne {
        let edge = &net.edges[e];
        let [from, to] = prog.ends[e];
        let from = from.ok_or_else(|| ChFieldError::NotAdmissible(format!("edge {}: start has no CH value", edge.id)))?;
        if edge.is_halfline() {
            continue;
        }
        let to = to.ok_or_else(|| ChFieldError::NotAdmissible(format!("edge {}: end has no CH value", edge.id)))?;
        let w = 1.0 / prog.lengths[e];
        match (from, to) {
            (EndValue::Var(k), EndValue::Var(l)) if k != l => {
                prog.c[k][l] += w;
                prog.c[l][k] += w;
            }
            (EndValue::Var(k), EndValue::Fixed(s)) | (EndValue::Fixed(s), EndValue::Var(k)) => {
                if s == 0.0 {
                    prog.a[k] += w;
                } else if s == D {
                    prog.b[k] += w;
                } else {
                    return Err(ChFieldError::NotAdmissible(format!(
                        "edge {}: forced value is not a Wulff vertex",
                        edge.id
                    )));
                }
            }
            _ => {}
        }
    }
    Ok(prog)
}

/// Balanced choice of Wulff vertices at a junction whose values are all pinned.
/// Among balanced choices the one closest to already-fixed far ends wins.
fn pinned_assignment(prog: &CHProgram, j: &JunctionInfo) -> Option<Vec<f64>> {
    let m = j.incident.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..(1u32 << m) {
        let mut sum = Vec2::ZERO;
        let mut s = Vec::with_capacity(m);
        for (i, ie) in j.incident.iter().enumerate() {
            let f = (ie.ray + 1) % 6;
            if mask & (1 << i) != 0 {
                sum += wulff_vertex(f);
                s.push(D);
            } else {
                sum += wulff_vertex(f + 1);
                s.push(0.0);
            }
        }
        if sum.norm() > 1e-9 {
            continue;
        }
        let mut cost = 0.0;
        for (ie, &si) in j.incident.iter().zip(&s) {
            let other = 1 - ie.sigma as usize;
            if let Some(EndValue::Fixed(so)) = prog.ends[ie.edge][other] {
                let l = prog.lengths[ie.edge];
                if l.is_finite() {
                    cost += (si - so) * (si - so) / l;
                }
            }
        }
        if best.as_ref().map_or(true, |(c, _)| cost < *c - 1e-15) {
            best = Some((cost, s));
        }
    }
    best.map(|(_, s)| s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub vars: Vec<usize>,
    pub class: JunctionClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalCHField {
    pub x: Vec<f64>,
    pub var_class: Vec<JunctionClass>,
    pub var_vertex: Vec<Option<usize>>,
    pub clusters: Vec<Cluster>,
    pub facets: Vec<FacetIndex>,
    /// CH parameter at the start of each edge.
    pub s_from: Vec<f64>,
    /// CH parameter at the end of each segment (None for half-lines).
    pub s_to: Vec<Option<f64>>,
    pub kappa: Vec<f64>,
    /// Edge touches a junction variable of a bc cluster.
    pub edge_bc: Vec<bool>,
}

impl MinimalCHField {
    /// N at the start (`sigma = 0`) or end (`sigma = 1`) of edge `e`.
    pub fn n_at(&self, e: usize, sigma: u8) -> Vec2 {
        let s = if sigma == 0 { self.s_from[e] } else { self.s_to[e].unwrap_or(self.s_from[e]) };
        ch_point_unchecked(self.facets[e], s)
    }
}

fn ch_point_unchecked(k: FacetIndex, s: f64) -> Vec2 {
    crate::anisotropy::facet_start(k) + crate::anisotropy::facet_tangent(k) * s
}

pub fn solve(prog: &CHProgram) -> Result<MinimalCHField, ChFieldError> {
    let n = prog.n_vars();
    let mut x = vec![0.0; n];
    let mut var_class = vec![JunctionClass::Bc; n];
    let mut clusters = Vec::new();
    for vars in prog.clusters() {
        let sa: f64 = vars.iter().map(|&k| prog.a[k]).sum();
        let sb: f64 = vars.iter().map(|&k| prog.b[k]).sum();
        let class = if sa == 0.0 && sb == 0.0 {
            vars.iter().for_each(|&k| x[k] = D / 2.0);
            JunctionClass::Bc
        } else if sa == 0.0 {
            vars.iter().for_each(|&k| x[k] = D);
            JunctionClass::Bc
        } else if sb == 0.0 {
            vars.iter().for_each(|&k| x[k] = 0.0);
            JunctionClass::Bc
        } else {
            let (a, rhs) = prog.linear_system(&vars);
            let chol = a.cholesky().ok_or(ChFieldError::SingularSystem)?;
            let sol = chol.solve(&rhs);
            for (i, &k) in vars.iter().enumerate() {
                x[k] = sol[i];
            }
            JunctionClass::Ic
        };
        for &k in &vars {
            var_class[k] = class;
        }
        clusters.push(Cluster { vars, class });
    }

    let ne = prog.ends.len();
    let value = |v: EndValue| match v {
        EndValue::Var(k) => x[k],
        EndValue::Fixed(s) => s,
    };
    let mut s_from = Vec::with_capacity(ne);
    let mut s_to = Vec::with_capacity(ne);
    let mut kappa = Vec::with_capacity(ne);
    let mut edge_bc = Vec::with_capacity(ne);
    for e in 0..ne {
        let [from, to] = prog.ends[e];
        let from = from.expect("assembled program assigns every start");
        let sf = value(from);
        s_from.push(sf);
        let st = to.map(value);
        s_to.push(st);
        kappa.push(match st {
            Some(st) => (st - sf) / prog.lengths[e],
            None => 0.0,
        });
        let is_bc = |v: Option<EndValue>| matches!(v, Some(EndValue::Var(k)) if var_class[k] == JunctionClass::Bc);
        edge_bc.push(is_bc(Some(from)) || is_bc(to));
    }
    Ok(MinimalCHField {
        x,
        var_class,
        var_vertex: prog.var_vertex.clone(),
        clusters,
        facets: prog.facets.clone(),
        s_from,
        s_to,
        kappa,
        edge_bc,
    })
}

pub fn minimal_field(net: &Network) -> Result<MinimalCHField, ChFieldError> {
    solve(&assemble(net)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCurvature {
    pub id: String,
    pub kappa: f64,
    pub facet: FacetIndex,
    pub bc_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JunctionResidual {
    pub vertex: String,
    pub kind: JunctionKind,
    pub class: Option<JunctionClass>,
    pub vector_residual: f64,
    pub kappa_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub edges: Vec<EdgeCurvature>,
    pub junctions: Vec<JunctionResidual>,
}

impl CurvatureReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn junction_residuals(field: &MinimalCHField, j: &JunctionInfo) -> (f64, f64, Option<JunctionClass>) {
    let mut vec_sum = Vec2::ZERO;
    let mut kap_sum = 0.0;
    for ie in &j.incident {
        let n = field.n_at(ie.edge, ie.sigma);
        let sign = if ie.sigma == 0 { 1.0 } else { -1.0 };
        vec_sum += n * sign;
        kap_sum += field.kappa[ie.edge] * sign;
    }
    let class = field
        .var_vertex
        .iter()
        .position(|v| *v == Some(j.vertex))
        .map(|k| field.var_class[k]);
    (vec_sum.norm(), kap_sum.abs(), class)
}

pub fn curvatures(net: &Network, field: &MinimalCHField) -> Result<CurvatureReport, ChFieldError> {
    let edges = (0..net.edges.len())
        .map(|e| EdgeCurvature {
            id: net.edges[e].id.clone(),
            kappa: field.kappa[e],
            facet: field.facets[e],
            bc_flag: field.edge_bc[e],
        })
        .collect();
    let junctions = classify_junctions(net)?
        .iter()
        .map(|j| {
            let (vr, kr, class) = junction_residuals(field, j);
            JunctionResidual {
                vertex: net.vertices[j.vertex].id.clone(),
                kind: j.kind,
                class,
                vector_residual: vr,
                kappa_residual: kr,
            }
        })
        .collect();
    Ok(CurvatureReport { edges, junctions })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BalanceViolation {
    Vector { vertex: String, residual: f64 },
    Curvature { vertex: String, residual: f64 },
}

pub fn verify_balance(net: &Network, field: &MinimalCHField) -> Result<Vec<BalanceViolation>, ChFieldError> {
    let mut out = Vec::new();
    for j in classify_junctions(net)? {
        let (vr, kr, class) = junction_residuals(field, &j);
        let vid = net.vertices[j.vertex].id.clone();
        if vr > 1e-10 {
            out.push(BalanceViolation::Vector { vertex: vid.clone(), residual: vr });
        }
        if j.is_120() && class == Some(JunctionClass::Ic) && kr > 1e-10 {
            out.push(BalanceViolation::Curvature { vertex: vid, residual: kr });
        }
    }
    Ok(out)
}

/// κ counts as zero when the CH gap across the segment is below this.
const FLAT_TOL: f64 = 1e-12;

fn is_flat(field: &MinimalCHField, e: usize) -> bool {
    match field.s_to[e] {
        Some(st) => (st - field.s_from[e]).abs() <= FLAT_TOL,
        None => true,
    }
}

/// A CH field exists and its divergence vanishes on every edge.
pub fn is_critical(net: &Network) -> Result<bool, ChFieldError> {
    let field = minimal_field(net)?;
    Ok((0..net.edges.len()).all(|e| is_flat(&field, e)))
}

/// Every edge at a junction other than a 120° triple junction has zero curvature.
pub fn is_simple_with_multiple_junctions(net: &Network) -> Result<bool, ChFieldError> {
    let field = minimal_field(net)?;
    evolvable_with(net, &field)
}

pub fn evolvable_with(net: &Network, field: &MinimalCHField) -> Result<bool, ChFieldError> {
    for j in classify_junctions(net)? {
        if j.is_120() {
            continue;
        }
        if j.incident.iter().any(|ie| !is_flat(field, ie.edge)) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anisotropy::{hex_direction, SQRT3};

    fn hexagon(r: f64) -> Network {
        let mut n = Network::new();
        let v: Vec<usize> = (0..6).map(|j| n.add_vertex(format!("A{j}"), hex_direction(j) * r)).collect();
        for j in 0..6 {
            n.add_segment(format!("S{j}"), v[j], v[(j + 1) % 6], "G");
        }
        n
    }

    #[test]
    fn hexagon_has_no_variables_and_negative_curvature() {
        let h = hexagon(2.0);
        let p = assemble(&h).unwrap();
        assert_eq!(p.n_vars(), 0);
        let f = solve(&p).unwrap();
        for k in &f.kappa {
            assert!((k + 2.0 / (SQRT3 * 2.0)).abs() < 1e-14);
        }
        assert!(!is_critical(&h).unwrap());
    }

    #[test]
    fn triod_is_flat_bc() {
        let mut n = Network::new();
        let o = n.add_vertex("O", Vec2::ZERO);
        for j in [0, 2, 4] {
            n.add_halfline(format!("L{j}"), o, hex_direction(j), format!("G{j}"));
        }
        let p = assemble(&n).unwrap();
        assert_eq!(p.n_vars(), 1);
        assert_eq!((p.a[0], p.b[0]), (0.0, 0.0));
        let f = solve(&p).unwrap();
        assert_eq!(f.var_class[0], JunctionClass::Bc);
        assert!((f.x[0] - D / 2.0).abs() < 1e-15);
        assert!(verify_balance(&n, &f).unwrap().is_empty());
        assert!(is_critical(&n).unwrap());
    }

    #[test]
    fn adjacent_triod_has_no_field() {
        let mut n = Network::new();
        let o = n.add_vertex("O", Vec2::ZERO);
        for j in 0..3 {
            n.add_halfline(format!("L{j}"), o, hex_direction(j), format!("G{j}"));
        }
        assert!(matches!(assemble(&n), Err(ChFieldError::NoCHField(_))));
    }

    #[test]
    fn all_b_zero_goes_to_zero() {
        let p = CHProgram::from_coefficients(vec![1.0, 2.0], vec![0.0, 0.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = solve(&p).unwrap();
        assert_eq!(f.x, vec![0.0, 0.0]);
        assert_eq!(f.clusters[0].class, JunctionClass::Bc);
    }

    #[test]
    fn perturbed_endpoint_breaks_vector_balance() {
        // triod with one segment arm so the perturbed value is visible
        let mut n = Network::new();
        let o = n.add_vertex("O", Vec2::ZERO);
        let p = n.add_vertex("P", hex_direction(0));
        n.add_segment("S0", o, p, "G0");
        n.add_halfline("L0", p, hex_direction(1), "G0");
        n.add_halfline("L2", o, hex_direction(2), "G2");
        n.add_halfline("L4", o, hex_direction(4), "G4");
        let mut f = minimal_field(&n).unwrap();
        assert!(verify_balance(&n, &f).unwrap().is_empty());
        f.s_from[0] += 0.01;
        let v = verify_balance(&n, &f).unwrap();
        assert!(matches!(v.as_slice(), [BalanceViolation::Vector { .. }]));
    }
}
