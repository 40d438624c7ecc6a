//! Parent meshes: structured generators, text import/export, validation and
//! point-in-domain queries.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::shape::{self, ElementShape, Geometry, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    pub coords: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: usize,
    pub shape: ElementShape,
    pub nodes: Vec<usize>,
    /// Material region tag; 0 is the background matrix.
    pub region: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    Dirichlet,
    Traction,
}

impl BoundaryKind {
    pub fn token(self) -> &'static str {
        match self {
            BoundaryKind::Dirichlet => "dir",
            BoundaryKind::Traction => "trac",
        }
    }
}

/// Boundary edge; nodes are ordered [start, end] or [start, end, mid].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    pub nodes: Vec<usize>,
    pub kind: BoundaryKind,
    pub normal: Vec2,
}

/// Geometric description of the material domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Rect { lo: Vec2, hi: Vec2 },
    /// Faceted annulus; `inner` and `outer` are the CCW mesh boundary polygons.
    Annulus { center: Vec2, r_in: f64, r_out: f64, inner: Vec<Vec2>, outer: Vec<Vec2> },
    /// Single CCW boundary loop recovered from an imported mesh.
    Polygon { outer: Vec<Vec2>, convex: bool },
    /// No closed-form description; containment is decided element by element.
    ElementWalk,
}

/// A tagged convex sub-region (e.g. an inclusion) with its CCW boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Subregion {
    pub id: usize,
    pub boundary: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParentMesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub boundary: Vec<BoundarySegment>,
    pub domain: Domain,
    pub subregions: Vec<Subregion>,
}

fn edge_normal(a: Vec2, b: Vec2) -> Vec2 {
    let e = [b[0] - a[0], b[1] - a[1]];
    let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
    [e[1] / len, -e[0] / len]
}

impl ParentMesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn coords(&self, node: usize) -> Vec2 {
        self.nodes[node].coords
    }

    pub fn geometry(&self, element: usize) -> Geometry {
        let el = &self.elements[element];
        let nc = el.shape.corner_count();
        let mut c = [[0.0; 2]; 4];
        for (k, &n) in el.nodes[..nc].iter().enumerate() {
            c[k] = self.nodes[n].coords;
        }
        Geometry::new(&c[..nc])
    }

    pub fn area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.geometry(e).area()).sum()
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for n in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(n.coords[k]);
                hi[k] = hi[k].max(n.coords[k]);
            }
        }
        (lo, hi)
    }

    pub fn mean_element_diameter(&self) -> f64 {
        let n = self.elements.len().max(1) as f64;
        (0..self.elements.len()).map(|e| self.geometry(e).diameter()).sum::<f64>() / n
    }

    /// Polynomial order shared by all elements, if uniform.
    pub fn order(&self) -> Option<usize> {
        let first = self.elements.first()?.shape.order();
        self.elements.iter().all(|e| e.shape.order() == first).then_some(first)
    }

    /// Closed-domain membership test.
    pub fn point_in_domain(&self, x: Vec2) -> bool {
        match &self.domain {
            Domain::Rect { lo, hi } => x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1],
            Domain::Annulus { inner, outer, .. } => {
                point_in_polygon(outer, x) && !point_strictly_in_polygon(inner, x)
            }
            Domain::Polygon { outer, .. } => point_in_polygon(outer, x),
            Domain::ElementWalk => (0..self.elements.len()).any(|e| self.geometry(e).outside_distance(x) <= 0.0),
        }
    }

    /// Boundary of the domain as a single convex CCW polygon, when it is one.
    pub fn convex_boundary(&self) -> Option<Vec<Vec2>> {
        match &self.domain {
            Domain::Rect { lo, hi } => Some(vec![*lo, [hi[0], lo[1]], *hi, [lo[0], hi[1]]]),
            Domain::Polygon { outer, convex: true } => Some(outer.clone()),
            _ => None,
        }
    }

    pub fn subregion(&self, id: usize) -> Option<&Subregion> {
        self.subregions.iter().find(|s| s.id == id)
    }

    /// Retag every boundary segment whose midpoint satisfies `pred`.
    pub fn set_boundary_kind(&mut self, kind: BoundaryKind, pred: impl Fn(Vec2) -> bool) {
        for seg in &mut self.boundary {
            let a = self.nodes[seg.nodes[0]].coords;
            let b = self.nodes[seg.nodes[1]].coords;
            if pred([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]) {
                seg.kind = kind;
            }
        }
    }

    /// Check every structural invariant; errors carry 1-based pseudo line numbers
    /// (node, element and boundary lines numbered consecutively after the header).
    pub fn validate(&self) -> Result<()> {
        let n_nodes = self.nodes.len();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::invalid(format!("node ids must be dense: found {} at position {i}", n.id)));
            }
            if !n.coords[0].is_finite() || !n.coords[1].is_finite() {
                return Err(Error::invalid(format!("node {i} has non-finite coordinates")));
            }
        }
        for (i, el) in self.elements.iter().enumerate() {
            let line = 2 + n_nodes + i;
            if el.id != i {
                return Err(Error::invalid(format!("element ids must be dense: found {} at position {i}", el.id)));
            }
            check_element(el, &self.nodes, line)?;
        }
        let edges = self.edge_use_counts();
        for (i, seg) in self.boundary.iter().enumerate() {
            let line = 2 + n_nodes + self.elements.len() + i;
            if seg.nodes.len() != 2 && seg.nodes.len() != 3 {
                return Err(Error::Parse { line, message: "boundary segment needs 2 or 3 nodes".into() });
            }
            if let Some(&bad) = seg.nodes.iter().find(|&&n| n >= n_nodes) {
                return Err(Error::Parse { line, message: format!("unknown node {bad}") });
            }
            let key = edge_key(seg.nodes[0], seg.nodes[1]);
            let uses = edges.get(&key).copied().unwrap_or(0);
            if uses != 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("boundary edge {}-{} is shared by {uses} elements", seg.nodes[0], seg.nodes[1]),
                });
            }
            let len = (seg.normal[0].powi(2) + seg.normal[1].powi(2)).sqrt();
            if (len - 1.0).abs() > 1e-12 {
                return Err(Error::Parse { line, message: format!("normal has length {len}") });
            }
        }
        Ok(())
    }

    fn edge_use_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for el in &self.elements {
            let nc = el.shape.corner_count();
            for k in 0..nc {
                *edges.entry(edge_key(el.nodes[k], el.nodes[(k + 1) % nc])).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Closed loops of element edges used by exactly one element, each
    /// oriented with the material on its left.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let counts = self.edge_use_counts();
        let mut next: HashMap<usize, usize> = HashMap::new();
        for el in &self.elements {
            let nc = el.shape.corner_count();
            for k in 0..nc {
                let (a, b) = (el.nodes[k], el.nodes[(k + 1) % nc]);
                if counts[&edge_key(a, b)] == 1 {
                    next.insert(a, b);
                }
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut seen = std::collections::HashSet::new();
        let mut loops = Vec::new();
        for s in starts {
            if seen.contains(&s) {
                continue;
            }
            let mut lp = vec![s];
            seen.insert(s);
            let mut cur = next[&s];
            while cur != s {
                if !seen.insert(cur) {
                    break;
                }
                lp.push(cur);
                match next.get(&cur) {
                    Some(&n) => cur = n,
                    None => break,
                }
            }
            loops.push(lp);
        }
        loops
    }

    /// Serialize to the line-oriented mesh text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes {} elements {} boundaries {}", self.nodes.len(), self.elements.len(), self.boundary.len());
        for n in &self.nodes {
            let _ = writeln!(s, "{} {:?} {:?}", n.id, n.coords[0], n.coords[1]);
        }
        for el in &self.elements {
            let _ = write!(s, "{} {}", el.id, el.shape.token());
            for n in &el.nodes {
                let _ = write!(s, " {n}");
            }
            s.push('\n');
        }
        for seg in &self.boundary {
            let _ = write!(s, "{}", seg.kind.token());
            for n in &seg.nodes {
                let _ = write!(s, " {n}");
            }
            let _ = writeln!(s, " {:?} {:?}", seg.normal[0], seg.normal[1]);
        }
        s
    }

    /// Parse and validate the mesh text format.
    pub fn from_text(text: &str) -> Result<Self> {
        import_mesh(text)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn check_element(el: &Element, nodes: &[Node], line: usize) -> Result<()> {
    if el.nodes.len() != el.shape.node_count() {
        return Err(Error::Parse {
            line,
            message: format!("{} element needs {} nodes, got {}", el.shape.token(), el.shape.node_count(), el.nodes.len()),
        });
    }
    if let Some(&bad) = el.nodes.iter().find(|&&n| n >= nodes.len()) {
        return Err(Error::Parse { line, message: format!("unknown node {bad}") });
    }
    let nc = el.shape.corner_count();
    let corners: Vec<Vec2> = el.nodes[..nc].iter().map(|&n| nodes[n].coords).collect();
    let geom = Geometry::new(&corners);
    let probes: &[Vec2] = if geom.quad {
        &[[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [0.0, 0.0]]
    } else {
        &[[1.0 / 3.0, 1.0 / 3.0]]
    };
    for &p in probes {
        let det = geom.det(p);
        if !(det > 0.0) {
            return Err(Error::InvertedElement { element: el.id, line, det });
        }
    }
    // higher-order nodes must sit where the straight-edged map puts them
    let diam = geom.diameter();
    for (k, r) in el.shape.reference_nodes().iter().enumerate().skip(nc) {
        let expect = geom.map(*r);
        if shape::dist(expect, nodes[el.nodes[k]].coords) > 1e-9 * diam {
            return Err(Error::Parse { line, message: format!("node {} is off its straight-edge position", el.nodes[k]) });
        }
    }
    Ok(())
}

/// Closed point-in-polygon test (boundary counts as inside).
pub fn point_in_polygon(poly: &[Vec2], x: Vec2) -> bool {
    if on_polygon_boundary(poly, x) {
        return true;
    }
    winding_inside(poly, x)
}

fn point_strictly_in_polygon(poly: &[Vec2], x: Vec2) -> bool {
    !on_polygon_boundary(poly, x) && winding_inside(poly, x)
}

fn on_polygon_boundary(poly: &[Vec2], x: Vec2) -> bool {
    let n = poly.len();
    (0..n).any(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
        let scale = shape::dist(a, b).max(f64::MIN_POSITIVE);
        cross.abs() <= 1e-14 * scale
            && x[0] >= a[0].min(b[0]) - 1e-15
            && x[0] <= a[0].max(b[0]) + 1e-15
            && x[1] >= a[1].min(b[1]) - 1e-15
            && x[1] <= a[1].max(b[1]) + 1e-15
    })
}

fn winding_inside(poly: &[Vec2], x: Vec2) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let t = (x[1] - a[1]) / (b[1] - a[1]);
            if x[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

fn is_convex_ccw(poly: &[Vec2]) -> bool {
    let n = poly.len();
    n >= 3
        && (0..n).all(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            let c = poly[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            cross >= -1e-12 * shape::dist(a, b) * shape::dist(b, c)
        })
}

/// Uniform lx × ly grid of Quad4 (order 1) or Quad9 (order 2) elements with
/// all four sides tagged Dirichlet.
pub fn build_structured_quad_mesh(lx: f64, ly: f64, mx: usize, my: usize, order: usize) -> Result<ParentMesh> {
    if mx == 0 || my == 0 {
        return Err(Error::invalid("mesh counts must be at least 1"));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::invalid("domain lengths must be positive"));
    }
    let shape = ElementShape::from_family(true, order)?;
    let (ni, nj) = (mx * order, my * order);
    let id = |i: usize, j: usize| j * (ni + 1) + i;
    let mut nodes = Vec::with_capacity((ni + 1) * (nj + 1));
    for j in 0..=nj {
        for i in 0..=ni {
            let x = if i == ni { lx } else { lx * i as f64 / ni as f64 };
            let y = if j == nj { ly } else { ly * j as f64 / nj as f64 };
            nodes.push(Node { id: id(i, j), coords: [x, y] });
        }
    }
    let o = order;
    let mut elements = Vec::with_capacity(mx * my);
    for ey in 0..my {
        for ex in 0..mx {
            let (i0, j0) = (ex * o, ey * o);
            let mut conn = vec![id(i0, j0), id(i0 + o, j0), id(i0 + o, j0 + o), id(i0, j0 + o)];
            if o == 2 {
                conn.extend([id(i0 + 1, j0), id(i0 + 2, j0 + 1), id(i0 + 1, j0 + 2), id(i0, j0 + 1), id(i0 + 1, j0 + 1)]);
            }
            elements.push(Element { id: elements.len(), shape, nodes: conn, region: 0 });
        }
    }
    let mut boundary = Vec::new();
    let mut seg = |a: usize, b: usize, m: usize, normal: Vec2| {
        let mut n = vec![a, b];
        if o == 2 {
            n.push(m);
        }
        boundary.push(BoundarySegment { nodes: n, kind: BoundaryKind::Dirichlet, normal });
    };
    for ex in 0..mx {
        let i0 = ex * o;
        seg(id(i0, 0), id(i0 + o, 0), id(i0 + 1, 0), [0.0, -1.0]);
    }
    for ey in 0..my {
        let j0 = ey * o;
        seg(id(ni, j0), id(ni, j0 + o), id(ni, j0 + 1), [1.0, 0.0]);
    }
    for ex in (0..mx).rev() {
        let i0 = ex * o;
        seg(id(i0 + o, nj), id(i0, nj), id(i0 + 1, nj), [0.0, 1.0]);
    }
    for ey in (0..my).rev() {
        let j0 = ey * o;
        seg(id(0, j0 + o), id(0, j0), id(0, j0 + 1), [-1.0, 0.0]);
    }
    Ok(ParentMesh {
        nodes,
        elements,
        boundary,
        domain: Domain::Rect { lo: [0.0, 0.0], hi: [lx, ly] },
        subregions: Vec::new(),
    })
}

fn ring_point(center: Vec2, r: f64, j: usize, n: usize) -> Vec2 {
    let t = 2.0 * PI * j as f64 / n as f64;
    [center[0] + r * t.cos(), center[1] + r * t.sin()]
}

/// Structured polar annulus centred at the origin, each cell split into two
/// Tri3. Inner ring is Dirichlet, outer ring Traction.
pub fn build_annulus_mesh(r_in: f64, r_out: f64, n_radial: usize, n_angular: usize) -> Result<ParentMesh> {
    if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
        return Err(Error::invalid(format!("annulus needs 0 < r_in < r_out, got {r_in}, {r_out}")));
    }
    if n_radial == 0 || n_angular < 3 {
        return Err(Error::invalid("annulus needs n_radial >= 1 and n_angular >= 3"));
    }
    let center = [0.0, 0.0];
    let na = n_angular;
    let id = |k: usize, j: usize| k * na + (j % na);
    let mut nodes = Vec::with_capacity((n_radial + 1) * na);
    for k in 0..=n_radial {
        let r = if k == n_radial { r_out } else { r_in + (r_out - r_in) * k as f64 / n_radial as f64 };
        for j in 0..na {
            nodes.push(Node { id: id(k, j), coords: ring_point(center, r, j, na) });
        }
    }
    let mut elements = Vec::with_capacity(2 * n_radial * na);
    for k in 0..n_radial {
        for j in 0..na {
            let (a, b, c, d) = (id(k, j), id(k, j + 1), id(k + 1, j + 1), id(k + 1, j));
            for tri in [[a, d, c], [a, c, b]] {
                elements.push(Element { id: elements.len(), shape: ElementShape::Tri3, nodes: tri.to_vec(), region: 0 });
            }
        }
    }
    let mut boundary = Vec::with_capacity(2 * na);
    for j in 0..na {
        let (a, b) = (id(n_radial, j), id(n_radial, j + 1));
        boundary.push(BoundarySegment {
            nodes: vec![a, b],
            kind: BoundaryKind::Traction,
            normal: edge_normal(nodes[a].coords, nodes[b].coords),
        });
    }
    for j in (0..na).rev() {
        let (a, b) = (id(0, j + 1), id(0, j));
        boundary.push(BoundarySegment {
            nodes: vec![a, b],
            kind: BoundaryKind::Dirichlet,
            normal: edge_normal(nodes[a].coords, nodes[b].coords),
        });
    }
    let inner = (0..na).map(|j| nodes[id(0, j)].coords).collect();
    let outer = (0..na).map(|j| nodes[id(n_radial, j)].coords).collect();
    Ok(ParentMesh {
        nodes,
        elements,
        boundary,
        domain: Domain::Annulus { center, r_in, r_out, inner, outer },
        subregions: Vec::new(),
    })
}

/// Point where the ray from the square centre at angle index `j` (of `n`,
/// a multiple of 8) meets the square boundary; corners are hit exactly.
fn square_ray_point(side: f64, j: usize, n: usize) -> Vec2 {
    let half = 0.5 * side;
    let eighth = n / 8;
    let t = 2.0 * PI * j as f64 / n as f64;
    // octant 0 starts at angle 0 on the right side
    let oct = (j / eighth) % 8;
    let k = j % eighth;
    let tan = if k == 0 { 0.0 } else { t.tan() };
    let cot = if k == 0 { 0.0 } else { 1.0 / t.tan() };
    match (oct, k) {
        (1, 0) => [side, side],
        (3, 0) => [0.0, side],
        (5, 0) => [0.0, 0.0],
        (7, 0) => [side, 0.0],
        (0, _) | (7, _) => [side, half + half * tan],
        (1, _) | (2, _) => [half + half * cot, side],
        (3, _) | (4, _) => [0.0, half - half * tan],
        _ => [half - half * cot, 0.0],
    }
}

/// Square [0, side]² with a centred polar disc of radius `radius` (region 1)
/// blended radially into the square boundary (region 0). All outer edges are
/// Dirichlet. `n_angular` must be a multiple of 8.
pub fn build_inclusion_mesh(
    side: f64,
    radius: f64,
    n_core_rings: usize,
    n_angular: usize,
    n_outer_layers: usize,
) -> Result<ParentMesh> {
    if !(side > 0.0 && radius > 0.0 && radius < 0.5 * side) {
        return Err(Error::invalid("inclusion must lie strictly inside the square"));
    }
    if n_angular == 0 || n_angular % 8 != 0 || n_core_rings == 0 || n_outer_layers == 0 {
        return Err(Error::invalid("inclusion mesh needs n_angular a positive multiple of 8 and non-zero ring counts"));
    }
    let c = [0.5 * side, 0.5 * side];
    let na = n_angular;
    let ring = |k: usize, j: usize| 1 + (k - 1) * na + (j % na);
    let mut nodes = vec![Node { id: 0, coords: c }];
    for k in 1..=n_core_rings {
        let r = if k == n_core_rings { radius } else { radius * k as f64 / n_core_rings as f64 };
        for j in 0..na {
            nodes.push(Node { id: nodes.len(), coords: ring_point(c, r, j, na) });
        }
    }
    for k in 1..=n_outer_layers {
        let s = k as f64 / n_outer_layers as f64;
        for j in 0..na {
            let p = ring_point(c, radius, j, na);
            let q = square_ray_point(side, j, na);
            let coords = if k == n_outer_layers { q } else { [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])] };
            nodes.push(Node { id: nodes.len(), coords });
        }
    }
    let mut elements = Vec::new();
    let push = |nodes3: [usize; 3], region: usize, elements: &mut Vec<Element>| {
        elements.push(Element { id: elements.len(), shape: ElementShape::Tri3, nodes: nodes3.to_vec(), region });
    };
    for j in 0..na {
        push([0, ring(1, j), ring(1, j + 1)], 1, &mut elements);
    }
    let total = n_core_rings + n_outer_layers;
    for k in 1..total {
        let region = usize::from(k < n_core_rings);
        for j in 0..na {
            let (a, b, cc, d) = (ring(k, j), ring(k, j + 1), ring(k + 1, j + 1), ring(k + 1, j));
            push([a, d, cc], region, &mut elements);
            push([a, cc, b], region, &mut elements);
        }
    }
    let mut boundary = Vec::with_capacity(na);
    for j in 0..na {
        let (a, b) = (ring(total, j), ring(total, j + 1));
        boundary.push(BoundarySegment {
            nodes: vec![a, b],
            kind: BoundaryKind::Dirichlet,
            normal: edge_normal(nodes[a].coords, nodes[b].coords),
        });
    }
    let disc = (0..na).map(|j| nodes[ring(n_core_rings, j)].coords).collect();
    Ok(ParentMesh {
        nodes,
        elements,
        boundary,
        domain: Domain::Rect { lo: [0.0, 0.0], hi: [side, side] },
        subregions: vec![Subregion { id: 1, boundary: disc }],
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Iterator for Lines<'a> {
    type Item = (usize, Vec<&'a str>);
    fn next(&mut self) -> Option<Self::Item> {
        for (i, raw) in self.inner.by_ref() {
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<&str> = content.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((i + 1, toks));
            }
        }
        None
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, message: format!("bad {what} '{tok}'") })
}

/// Parse the mesh text format and check all invariants.
pub fn import_mesh(text: &str) -> Result<ParentMesh> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty mesh file".into() })?;
    if header.len() != 6 || header[0] != "nodes" || header[2] != "elements" || header[4] != "boundaries" {
        return Err(Error::Parse { line: hline, message: "expected 'nodes N elements M boundaries B'".into() });
    }
    let nn: usize = parse_num(header[1], hline, "node count")?;
    let ne: usize = parse_num(header[3], hline, "element count")?;
    let nb: usize = parse_num(header[5], hline, "boundary count")?;

    let mut nodes: Vec<Option<Node>> = vec![None; nn];
    for _ in 0..nn {
        let (line, t) = lines.next().ok_or(Error::Parse { line: hline, message: "missing node lines".into() })?;
        if t.len() != 3 {
            return Err(Error::Parse { line, message: "node line needs 'id x y'".into() });
        }
        let id: usize = parse_num(t[0], line, "node id")?;
        let x: f64 = parse_num(t[1], line, "coordinate")?;
        let y: f64 = parse_num(t[2], line, "coordinate")?;
        if id >= nn || nodes[id].is_some() {
            return Err(Error::Parse { line, message: format!("node id {id} is out of range or repeated") });
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Parse { line, message: "non-finite coordinate".into() });
        }
        nodes[id] = Some(Node { id, coords: [x, y] });
    }
    let nodes: Vec<Node> = nodes.into_iter().map(|n| n.expect("all ids filled")).collect();

    let mut elements: Vec<Option<(Element, usize)>> = vec![None; ne];
    for _ in 0..ne {
        let (line, t) = lines.next().ok_or(Error::Parse { line: hline, message: "missing element lines".into() })?;
        if t.len() < 2 {
            return Err(Error::Parse { line, message: "element line needs 'id shape nodes...'".into() });
        }
        let id: usize = parse_num(t[0], line, "element id")?;
        let shape = ElementShape::from_token(t[1])
            .ok_or_else(|| Error::Parse { line, message: format!("unknown shape '{}'", t[1]) })?;
        let conn = t[2..].iter().map(|s| parse_num::<usize>(s, line, "node id")).collect::<Result<Vec<_>>>()?;
        if id >= ne || elements[id].is_some() {
            return Err(Error::Parse { line, message: format!("element id {id} is out of range or repeated") });
        }
        let el = Element { id, shape, nodes: conn, region: 0 };
        check_element(&el, &nodes, line)?;
        elements[id] = Some((el, line));
    }
    let elements: Vec<Element> = elements.into_iter().map(|e| e.expect("all ids filled").0).collect();

    let mut boundary = Vec::with_capacity(nb);
    let mut seg_lines = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, t) = lines.next().ok_or(Error::Parse { line: hline, message: "missing boundary lines".into() })?;
        if t.len() != 5 && t.len() != 6 {
            return Err(Error::Parse { line, message: "boundary line needs 'kind n0 n1 [n2] nx ny'".into() });
        }
        let kind = match t[0] {
            "dir" => BoundaryKind::Dirichlet,
            "trac" => BoundaryKind::Traction,
            other => return Err(Error::Parse { line, message: format!("unknown boundary kind '{other}'") }),
        };
        let k = t.len() - 2;
        let ids = t[1..k].iter().map(|s| parse_num::<usize>(s, line, "node id")).collect::<Result<Vec<_>>>()?;
        let mut normal: Vec2 = [parse_num(t[k], line, "normal")?, parse_num(t[k + 1], line, "normal")?];
        let len = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
        if !((len - 1.0).abs() <= 1e-6) {
            return Err(Error::Parse { line, message: format!("normal must be a unit vector, length {len}") });
        }
        normal = [normal[0] / len, normal[1] / len];
        boundary.push(BoundarySegment { nodes: ids, kind, normal });
        seg_lines.push(line);
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, message: "unexpected trailing content".into() });
    }

    let mut mesh = ParentMesh { nodes, elements, boundary, domain: Domain::ElementWalk, subregions: Vec::new() };
    // re-run segment checks with real line numbers
    let edges = mesh.edge_use_counts();
    for (seg, &line) in mesh.boundary.iter().zip(&seg_lines) {
        if let Some(&bad) = seg.nodes.iter().find(|&&n| n >= nn) {
            return Err(Error::Parse { line, message: format!("unknown node {bad}") });
        }
        if edges.get(&edge_key(seg.nodes[0], seg.nodes[1])).copied().unwrap_or(0) != 1 {
            return Err(Error::Parse { line, message: "boundary segment is not an edge of exactly one element".into() });
        }
    }
    let loops = mesh.boundary_loops();
    if loops.len() == 1 {
        let outer: Vec<Vec2> = loops[0].iter().map(|&n| mesh.nodes[n].coords).collect();
        let convex = is_convex_ccw(&outer);
        mesh.domain = Domain::Polygon { outer, convex };
    }
    Ok(mesh)
}
