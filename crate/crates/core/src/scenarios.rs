//! Parametrized builders for the example networks, and the catalog the
//! fixture files are generated from.

use crate::anisotropy::{hex_direction, Vec2, SQRT3};
use crate::network::{DocMeta, Network, ScenarioRef};
use crate::shrinker::{regular_realization, shrinker_network, solve_config, InteriorConfig, VertexCase};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    Unknown(String),
    #[error("scenario {scenario}: unknown parameter {param:?}")]
    UnknownParam { scenario: String, param: String },
    #[error("scenario {scenario}: {msg}")]
    BadParams { scenario: String, msg: String },
}

fn u(j: usize) -> Vec2 {
    hex_direction(j % 6)
}

/// Regular hexagon of side `r` centered at the origin, oriented counterclockwise.
pub fn wulff_hexagon(r: f64) -> Network {
    let mut net = Network::new();
    for j in 0..6 {
        net.add_vertex(format!("V{j}"), u(j) * r);
    }
    for j in 0..6 {
        net.add_segment(format!("E{j}"), j, (j + 1) % 6, "hexagon");
    }
    net
}

/// Half-lines from the origin along the given direction indices.
pub fn cone(rays: &[usize]) -> Network {
    let mut net = Network::new();
    let o = net.add_vertex("O", Vec2::ZERO);
    for (i, &j) in rays.iter().enumerate() {
        net.add_halfline(format!("L{}", i + 1), o, u(j), format!("L{}", i + 1));
    }
    net
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Turn {
    Left,
    Right,
}

/// Adds a chain leaving junction `j` along `ray`: a segment of length `len`
/// ending with the given turn, then short segments steering towards the
/// radial direction of the chain's end, then a half-line.
fn add_chain(net: &mut Network, j: usize, ray: usize, len: f64, turn: Turn, jog: f64, name: &str) {
    let mut from = j;
    let mut pos = net.vertices[j].pos + u(ray) * len;
    let mut k = 0;
    let mut p = net.add_vertex(format!("{name}_p{k}"), pos);
    net.add_segment(format!("{name}_s{k}"), from, p, name);
    let mut dir = match turn {
        Turn::Left => (ray + 1) % 6,
        Turn::Right => (ray + 5) % 6,
    };
    let target = ((pos.angle_deg() / 60.0).round() as i64).rem_euclid(6) as usize;
    while dir != target {
        from = p;
        k += 1;
        pos = pos + u(dir) * jog;
        p = net.add_vertex(format!("{name}_p{k}"), pos);
        net.add_segment(format!("{name}_s{k}"), from, p, name);
        let ccw = (target + 6 - dir) % 6;
        dir = if ccw <= 3 { (dir + 1) % 6 } else { (dir + 5) % 6 };
    }
    net.add_halfline(format!("{name}_h"), p, u(dir), name);
}

/// Quadruple junction at the origin whose four unit arms end at triple
/// junctions; the other chains there have length 1 − ε. The minimal CH field
/// gives the opposite arm pairs different curvatures, so the junction would
/// split immediately.
///
/// Arms: `arm_e` O→(1,0), `arm_ne` O→u(60°), `arm_w` u(180°)→O, `arm_sw` O→u(240°).
pub fn split_prone_quadruple(eps: f64) -> Network {
    let mut net = Network::new();
    let o = net.add_vertex("O", Vec2::ZERO);
    let e = net.add_vertex("J_e", u(0));
    let ne = net.add_vertex("J_ne", u(1));
    let w = net.add_vertex("J_w", u(3));
    let sw = net.add_vertex("J_sw", u(4));
    net.add_segment("arm_e", o, e, "arm_e");
    net.add_segment("arm_ne", o, ne, "arm_ne");
    net.add_segment("arm_w", w, o, "arm_w");
    net.add_segment("arm_sw", o, sw, "arm_sw");
    let len = 1.0 - eps;
    let jog = eps / 2.0;
    add_chain(&mut net, e, 5, len, Turn::Left, jog, "e_lo");
    add_chain(&mut net, e, 1, len, Turn::Right, jog, "e_hi");
    add_chain(&mut net, ne, 0, len, Turn::Right, jog, "ne_r");
    add_chain(&mut net, ne, 2, len, Turn::Right, jog, "ne_l");
    add_chain(&mut net, w, 2, len, Turn::Left, jog, "w_up");
    net.add_halfline("w_h", w, u(4), "w_h");
    add_chain(&mut net, sw, 3, len, Turn::Left, jog, "sw_l");
    add_chain(&mut net, sw, 5, len, Turn::Left, jog, "sw_r");
    net
}

/// X-type quadruple junction with four arms of length `a` turning into
/// horizontal half-lines. Critical.
pub fn x_junction_arms(a: f64) -> Network {
    let mut net = Network::new();
    let o = net.add_vertex("O", Vec2::ZERO);
    for (i, (ray, out)) in [(1usize, 0usize), (2, 3), (4, 3), (5, 0)].into_iter().enumerate() {
        let p = net.add_vertex(format!("P{}", i + 1), u(ray) * a);
        let c = format!("C{}", i + 1);
        net.add_segment(format!("arm{}", i + 1), o, p, c.clone());
        net.add_halfline(format!("H{}", i + 1), p, u(out), c);
    }
    net
}

/// The X junction of [`x_junction_arms`] split into two triple junctions at
/// (±x, 0) joined by a horizontal segment.
pub fn split_x_junction(a: f64, x: f64) -> Network {
    let mut net = Network::new();
    let l = net.add_vertex("J_l", Vec2::new(-x, 0.0));
    let r = net.add_vertex("J_r", Vec2::new(x, 0.0));
    net.add_segment("bridge", l, r, "bridge");
    for (i, (j, ray, out)) in [(r, 1usize, 0usize), (l, 2, 3), (l, 4, 3), (r, 5, 0)].into_iter().enumerate() {
        let p = net.add_vertex(format!("P{}", i + 1), net.vertices[j].pos + u(ray) * a);
        let c = format!("C{}", i + 1);
        net.add_segment(format!("arm{}", i + 1), j, p, c.clone());
        net.add_halfline(format!("H{}", i + 1), p, u(out), c);
    }
    net
}

/// Hexagon symmetric about both axes with horizontal sides `b0`, lateral
/// sides `a0`, and a half-line leaving each end of the horizontal sides.
pub fn hexagon_four_halflines(a0: f64, b0: f64) -> Network {
    let h = a0 * SQRT3 / 2.0;
    let pts = [
        ("R", Vec2::new(b0 / 2.0 + a0 / 2.0, 0.0)),
        ("TR", Vec2::new(b0 / 2.0, h)),
        ("TL", Vec2::new(-b0 / 2.0, h)),
        ("L", Vec2::new(-b0 / 2.0 - a0 / 2.0, 0.0)),
        ("BL", Vec2::new(-b0 / 2.0, -h)),
        ("BR", Vec2::new(b0 / 2.0, -h)),
    ];
    let mut net = Network::new();
    for (id, p) in pts {
        net.add_vertex(id, p);
    }
    let names = ["right_up", "top", "left_up", "left_down", "bottom", "right_down"];
    for (i, n) in names.iter().enumerate() {
        net.add_segment(*n, i, (i + 1) % 6, *n);
    }
    for (v, j) in [(1usize, 1usize), (2, 2), (4, 4), (5, 5)] {
        net.add_halfline(format!("H_{}", pts[v].0), v, u(j), format!("H_{}", pts[v].0));
    }
    net.relabel_curves();
    net
}

/// Hexagon with sides a, b, c, a, b, c along 0°, 60°, …, 300° from the origin
/// and two opposite half-lines, at the origin (240°) and at the far vertex
/// after the first c side (60°).
pub fn hexagon_two_halflines(a0: f64, b0: f64, c0: f64) -> Network {
    let lens = [a0, b0, c0, a0, b0, c0];
    let names = ["a1", "b1", "c1", "a2", "b2", "c2"];
    let mut net = Network::new();
    let mut p = Vec2::ZERO;
    for i in 0..6 {
        net.add_vertex(format!("V{i}"), p);
        p = p + u(i) * lens[i];
    }
    for i in 0..6 {
        net.add_segment(names[i], i, (i + 1) % 6, names[i]);
    }
    net.add_halfline("H0", 0, u(4), "H0");
    net.add_halfline("H3", 3, u(1), "H3");
    net.relabel_curves();
    net
}

/// Network with a six-, five-, four- and triple junction on the x-axis at
/// 0, L, 2L, 3L. Two segments of length ℓ < L leave the sextuple junction
/// at ±60° and turn into half-lines.
pub fn multi_junction(l_big: f64, l_small: f64) -> Network {
    let mut net = Network::new();
    let j6 = net.add_vertex("J6", Vec2::ZERO);
    let j5 = net.add_vertex("J5", Vec2::new(l_big, 0.0));
    let j4 = net.add_vertex("J4", Vec2::new(2.0 * l_big, 0.0));
    let j3 = net.add_vertex("J3", Vec2::new(3.0 * l_big, 0.0));
    net.add_segment("s65", j6, j5, "s65");
    net.add_segment("s54", j5, j4, "s54");
    net.add_segment("s43", j4, j3, "s43");
    for j in [2usize, 3, 4] {
        net.add_halfline(format!("J6_h{}", 60 * j), j6, u(j), format!("J6_h{}", 60 * j));
    }
    let up = net.add_vertex("P_up", u(1) * l_small);
    net.add_segment("s6_up", j6, up, "c_up");
    net.add_halfline("h_up", up, u(2), "c_up");
    let dn = net.add_vertex("P_dn", u(5) * l_small);
    net.add_segment("s6_dn", j6, dn, "c_dn");
    net.add_halfline("h_dn", dn, u(4), "c_dn");
    for (v, name, rays) in [(j5, "J5", &[1usize, 2, 5][..]), (j4, "J4", &[1, 5][..]), (j3, "J3", &[1, 5][..])] {
        for &j in rays {
            net.add_halfline(format!("{name}_h{}", 60 * j), v, u(j), format!("{name}_h{}", 60 * j));
        }
    }
    net
}

/// Hexagon between two X-type quadruple junctions on the x-axis. The upper
/// lateral sides have length `p`, the lower ones `q`, and the top side `w`.
pub fn quadruple_hexagon(p: f64, q: f64, w: f64) -> Network {
    let width = p + w;
    let bottom = width - q;
    let mut net = Network::new();
    let qr = net.add_vertex("Q_r", Vec2::new(width, 0.0));
    let tr = net.add_vertex("T_r", Vec2::new(width, 0.0) + u(2) * p);
    let tl = net.add_vertex("T_l", u(1) * p);
    let ql = net.add_vertex("Q_l", Vec2::ZERO);
    let bl = net.add_vertex("B_l", u(5) * q);
    let br = net.add_vertex("B_r", u(5) * q + u(0) * bottom);
    let ring = [qr, tr, tl, ql, bl, br];
    let names = ["up_r", "top", "up_l", "down_l", "bottom", "down_r"];
    for i in 0..6 {
        net.add_segment(names[i], ring[i], ring[(i + 1) % 6], names[i]);
    }
    for (v, j, id) in [(ql, 2usize, "Ql_h120"), (ql, 4, "Ql_h240"), (qr, 1, "Qr_h60"), (qr, 5, "Qr_h300")] {
        net.add_halfline(id, v, u(j), id);
    }
    net.relabel_curves();
    net
}

/// 120° triod whose eastern leg is a staircase of `steps` segments of length
/// `len`, alternating between 0° and 60°, ending in a half-line.
pub fn triod_staircase(steps: usize, len: f64) -> Network {
    let mut net = Network::new();
    let o = net.add_vertex("O", Vec2::ZERO);
    net.add_halfline("L120", o, u(2), "L120");
    net.add_halfline("L240", o, u(4), "L240");
    let mut prev = o;
    let mut pos = Vec2::ZERO;
    for k in 0..steps {
        pos = pos + u(k % 2) * len;
        let v = net.add_vertex(format!("P{}", k + 1), pos);
        net.add_segment(format!("step{}", k + 1), prev, v, "stairs");
        prev = v;
    }
    net.add_halfline("stairs_h", prev, u(steps % 2), "stairs");
    net
}

// ---------------------------------------------------------------------------
// Catalog

pub type Params = BTreeMap<String, f64>;

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    build: fn(&Params) -> Result<Network, String>,
}

impl Scenario {
    pub fn params(&self, overrides: &Params) -> Result<Params, ScenarioError> {
        let mut p: Params = self.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            if !p.contains_key(k) {
                return Err(ScenarioError::UnknownParam { scenario: self.name.into(), param: k.clone() });
            }
            p.insert(k.clone(), *v);
        }
        Ok(p)
    }

    pub fn build(&self, overrides: &Params) -> Result<Network, ScenarioError> {
        let p = self.params(overrides)?;
        (self.build)(&p).map_err(|msg| ScenarioError::BadParams { scenario: self.name.into(), msg })
    }

    /// Document metadata recording how a network was built.
    pub fn meta(&self, overrides: &Params) -> Result<DocMeta, ScenarioError> {
        Ok(DocMeta {
            source: Some(self.description.to_string()),
            scenario: Some(ScenarioRef { name: self.name.to_string(), params: self.params(overrides)? }),
        })
    }
}

fn positive(p: &Params, keys: &[&str]) -> Result<(), String> {
    for k in keys {
        if !(p[*k] > 0.0) {
            return Err(format!("{k} must be positive"));
        }
    }
    Ok(())
}

fn interior_shrinker(label: &str, a0: f64) -> Result<Network, String> {
    let config = InteriorConfig::parse(label).map_err(|e| e.to_string())?;
    if config.count() == 6 {
        return Ok(regular_realization(config, a0));
    }
    let sol = solve_config(config).ok_or_else(|| format!("{label} has no shrinker"))?;
    shrinker_network(&sol, a0).map_err(|e| e.to_string())
}

macro_rules! cone_entry {
    ($name:literal, $desc:literal, [$($r:expr),*]) => {
        Scenario { name: $name, description: $desc, defaults: &[], build: |_| Ok(cone(&[$($r),*])) }
    };
}

pub fn catalog() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "wulff_hexagon",
            description: "regular hexagon of side r, shrinking self-similarly",
            defaults: &[("r", 1.0)],
            build: |p| {
                positive(p, &["r"])?;
                Ok(wulff_hexagon(p["r"]))
            },
        },
        cone_entry!("adjacent_triod", "triod along three consecutive directions; admits no CH field", [0, 1, 2]),
        cone_entry!("triod120", "120-degree conical triod", [0, 2, 4]),
        cone_entry!("skew_triod", "conical triod at 0, 60 and 180 degrees", [0, 1, 3]),
        cone_entry!("cone_w", "W-shaped quadruple cone", [0, 1, 2, 3]),
        cone_entry!("cone_psi", "psi-shaped quadruple cone", [0, 2, 3, 4]),
        cone_entry!("cone_x", "X-shaped quadruple cone", [0, 1, 3, 4]),
        cone_entry!("cone_five", "cone of five half-lines", [0, 1, 2, 3, 4]),
        cone_entry!("cone_six", "cone of six half-lines", [0, 1, 2, 3, 4, 5]),
        Scenario {
            name: "split_prone_quadruple",
            description: "quadruple junction whose opposite arms get different curvatures",
            defaults: &[("eps", 0.1)],
            build: |p| {
                let e = p["eps"];
                if !(e > 0.0 && e < 1.0) {
                    return Err("eps must lie in (0, 1)".into());
                }
                Ok(split_prone_quadruple(e))
            },
        },
        Scenario {
            name: "x_junction_arms",
            description: "critical X junction with arms of length a turning into horizontal half-lines",
            defaults: &[("a", 1.0)],
            build: |p| {
                positive(p, &["a"])?;
                Ok(x_junction_arms(p["a"]))
            },
        },
        Scenario {
            name: "split_x_junction",
            description: "X junction split into two triple junctions at distance 2x",
            defaults: &[("a", 1.0), ("x", 0.25)],
            build: |p| {
                positive(p, &["a", "x"])?;
                Ok(split_x_junction(p["a"], p["x"]))
            },
        },
        Scenario {
            name: "hexagon_four_halflines",
            description: "hexagon with half-lines at the ends of its horizontal sides, b0 > a0",
            defaults: &[("a0", 1.0), ("b0", 2.0)],
            build: |p| {
                positive(p, &["a0", "b0"])?;
                Ok(hexagon_four_halflines(p["a0"], p["b0"]))
            },
        },
        Scenario {
            name: "hexagon_four_halflines_short",
            description: "hexagon with half-lines at the ends of its horizontal sides, b0 < a0",
            defaults: &[("a0", 2.0), ("b0", 1.0)],
            build: |p| {
                positive(p, &["a0", "b0"])?;
                Ok(hexagon_four_halflines(p["a0"], p["b0"]))
            },
        },
        Scenario {
            name: "hexagon_four_halflines_equal",
            description: "regular hexagon with four half-lines in X position",
            defaults: &[("a0", 1.0), ("b0", 1.0)],
            build: |p| {
                positive(p, &["a0", "b0"])?;
                Ok(hexagon_four_halflines(p["a0"], p["b0"]))
            },
        },
        Scenario {
            name: "hexagon_two_halflines",
            description: "hexagon with opposite sides equal and two opposite half-lines",
            defaults: &[("a0", 2.0), ("b0", 1.0), ("c0", 1.0)],
            build: |p| {
                positive(p, &["a0", "b0", "c0"])?;
                Ok(hexagon_two_halflines(p["a0"], p["b0"], p["c0"]))
            },
        },
        Scenario {
            name: "hexagon_two_halflines_symmetric",
            description: "hexagon with two opposite half-lines and a = c; vanishes into a line",
            defaults: &[("a0", 1.0), ("b0", 1.0), ("c0", 1.0)],
            build: |p| {
                positive(p, &["a0", "b0", "c0"])?;
                Ok(hexagon_two_halflines(p["a0"], p["b0"], p["c0"]))
            },
        },
        Scenario {
            name: "multi_junction",
            description: "admissible network with junctions of degree 6, 5, 4 and 3",
            defaults: &[("l_big", 2.0), ("l_small", 1.0)],
            build: |p| {
                positive(p, &["l_big", "l_small"])?;
                if p["l_small"] >= p["l_big"] {
                    return Err("l_small must be smaller than l_big".into());
                }
                Ok(multi_junction(p["l_big"], p["l_small"]))
            },
        },
        Scenario {
            name: "quadruple_hexagon",
            description: "hexagon between two quadruple junctions, symmetric about both axes",
            defaults: &[("p", 1.0), ("q", 1.0), ("w", 1.0)],
            build: |p| {
                positive(p, &["p", "q", "w"])?;
                if p["q"] >= p["p"] + p["w"] {
                    return Err("q must be smaller than p + w".into());
                }
                Ok(quadruple_hexagon(p["p"], p["q"], p["w"]))
            },
        },
        Scenario {
            name: "quadruple_hexagon_uneven",
            description: "hexagon between two quadruple junctions with shorter upper laterals",
            defaults: &[("p", 0.5), ("q", 1.0), ("w", 1.0)],
            build: |p| {
                positive(p, &["p", "q", "w"])?;
                if p["q"] >= p["p"] + p["w"] {
                    return Err("q must be smaller than p + w".into());
                }
                Ok(quadruple_hexagon(p["p"], p["q"], p["w"]))
            },
        },
        Scenario {
            name: "triod_staircase",
            description: "120-degree triod with one leg replaced by a staircase carrying a constant CH field",
            defaults: &[("steps", 4.0), ("len", 0.5)],
            build: |p| {
                positive(p, &["steps", "len"])?;
                Ok(triod_staircase(p["steps"].round() as usize, p["len"]))
            },
        },
        Scenario {
            name: "shrinker_spoon",
            description: "self-shrinker: hexagon with one half-line",
            defaults: &[("a0", 1.0)],
            build: |p| interior_shrinker("A1", p["a0"]),
        },
        Scenario {
            name: "shrinker_adjacent_pair",
            description: "self-shrinker: hexagon with half-lines at two adjacent vertices",
            defaults: &[("a0", 1.0)],
            build: |p| interior_shrinker("A1,A2", p["a0"]),
        },
        Scenario {
            name: "shrinker_alternating",
            description: "self-shrinker: regular hexagon with half-lines at alternate vertices",
            defaults: &[("a0", 1.0)],
            build: |p| interior_shrinker("A1,A3,A5", p["a0"]),
        },
        Scenario {
            name: "shrinker_two_pairs",
            description: "self-shrinker: regular hexagon with four half-lines in X position",
            defaults: &[("a0", 1.0)],
            build: |p| interior_shrinker("A1,A2,A4,A5", p["a0"]),
        },
        Scenario {
            name: "shrinker_five",
            description: "self-shrinker: regular hexagon with five half-lines",
            defaults: &[("a0", 1.0)],
            build: |p| interior_shrinker("A1,A2,A3,A4,A5", p["a0"]),
        },
        Scenario {
            name: "hexagon_six_halflines",
            description: "regular hexagon with a half-line at every vertex; critical",
            defaults: &[("a0", 1.0)],
            build: |p| interior_shrinker("A1,A2,A3,A4,A5,A6", p["a0"]),
        },
        Scenario {
            name: "hexagon_opposite_pair",
            description: "regular hexagon with half-lines at two opposite vertices; not a shrinker",
            defaults: &[("a0", 1.0)],
            build: |p| {
                let c = InteriorConfig::parse("A1,A4").map_err(|e| e.to_string())?;
                Ok(regular_realization(c, p["a0"]))
            },
        },
        Scenario {
            name: "vertex_center_extensions",
            description: "regular hexagon with two half-lines extending the sides at one vertex and one along the long diagonal",
            defaults: &[("a0", 1.0)],
            build: |p| Ok(VertexCase::Extensions.network(p["a0"])),
        },
    ]
}

pub fn find(name: &str) -> Result<Scenario, ScenarioError> {
    catalog().into_iter().find(|s| s.name == name).ok_or_else(|| ScenarioError::Unknown(name.to_string()))
}

/// Rebuilds the network a document was generated from.
pub fn rebuild(meta: &DocMeta) -> Option<Result<Network, ScenarioError>> {
    let sref = meta.scenario.as_ref()?;
    Some(find(&sref.name).and_then(|s| s.build(&sref.params)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate_admissible;

    #[test]
    fn catalog_networks_validate() {
        for s in catalog() {
            let net = s.build(&Params::new()).unwrap();
            let rep = validate_admissible(&net);
            assert!(rep.is_valid(), "{}: {:?}", s.name, rep.violations);
        }
    }

    #[test]
    fn split_prone_quadruple_validates_across_eps() {
        for eps in [0.1, 0.5, 0.9] {
            let rep = validate_admissible(&split_prone_quadruple(eps));
            assert!(rep.is_valid(), "eps {eps}: {:?}", rep.violations);
        }
    }

    #[test]
    fn unknown_param_rejected() {
        let s = find("wulff_hexagon").unwrap();
        let mut p = Params::new();
        p.insert("zz".into(), 1.0);
        assert!(s.build(&p).is_err());
    }
}
