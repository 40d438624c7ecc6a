//! Child meshes of truncated horizons and their quadrature points.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, TruncatedRegion};
use crate::quadrature::{gauss_jacobi, gauss_legendre, triangle_rule, QuadratureRule};
use crate::shape::{self, ElementShape, Geometry, Vec2};

/// A straight-edged child cell; only the first `shape.corner_count()` node
/// slots are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildElement {
    pub shape: ElementShape,
    pub nodes: [usize; 4],
}

/// A 1D child element on a coordinate line: coordinate `axis` runs over
/// [t0, t1] while the other coordinate stays at `fixed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildSegment {
    pub axis: usize,
    pub fixed: f64,
    pub t0: f64,
    pub t1: f64,
}

impl ChildSegment {
    fn point(&self, t: f64) -> Vec2 {
        if self.axis == 0 {
            [t, self.fixed]
        } else {
            [self.fixed, t]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChildMesh {
    /// (parent element, parent Gauss point) this mesh belongs to.
    pub owner: (usize, usize),
    pub nodes: Vec<Vec2>,
    pub elements: Vec<ChildElement>,
    pub segments: Vec<ChildSegment>,
    /// Point whose coordinate lines are kept on element edges.
    pub split_point: Option<Vec2>,
    pub avg_element_size: f64,
}

impl ChildMesh {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty() && self.segments.is_empty()
    }

    pub fn geometry(&self, e: usize) -> Geometry {
        let el = &self.elements[e];
        let nc = el.shape.corner_count();
        let mut c = [[0.0; 2]; 4];
        for k in 0..nc {
            c[k] = self.nodes[el.nodes[k]];
        }
        Geometry::new(&c[..nc])
    }

    pub fn area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.geometry(e).area()).sum()
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.t1 - s.t0).sum()
    }

    /// Mesh text dump (2D cells only; segments are listed as comments).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# child mesh of element {} gauss point {}", self.owner.0, self.owner.1);
        for seg in &self.segments {
            let (a, b) = (seg.point(seg.t0), seg.point(seg.t1));
            let _ = writeln!(s, "# segment {:?} {:?} {:?} {:?}", a[0], a[1], b[0], b[1]);
        }
        let _ = writeln!(s, "nodes {} elements {} boundaries 0", self.nodes.len(), self.elements.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {:?} {:?}", p[0], p[1]);
        }
        for (i, el) in self.elements.iter().enumerate() {
            let _ = write!(s, "{i} {}", el.shape.token());
            for n in &el.nodes[..el.shape.corner_count()] {
                let _ = write!(s, " {n}");
            }
            s.push('\n');
        }
        s
    }

    fn finish(mut self) -> Self {
        let n = self.elements.len() + self.segments.len();
        if n > 0 {
            let total: f64 = (0..self.elements.len()).map(|e| self.geometry(e).max_edge()).sum::<f64>()
                + self.segments.iter().map(|s| s.t1 - s.t0).sum::<f64>();
            self.avg_element_size = total / n as f64;
        }
        self
    }
}

fn divisions(len: f64, target: f64) -> usize {
    ((len / target).round() as usize).max(1)
}

/// Breakpoints of [lo, hi], split at `p` when it lies strictly inside.
fn axis_breaks(lo: f64, hi: f64, p: Option<f64>, target: f64) -> Vec<f64> {
    let pieces: Vec<(f64, f64)> = match p {
        Some(p) if p > lo && p < hi => vec![(lo, p), (p, hi)],
        _ => vec![(lo, hi)],
    };
    let mut out = vec![lo];
    for (a, b) in pieces {
        let n = divisions(b - a, target);
        for k in 1..n {
            out.push(a + (b - a) * k as f64 / n as f64);
        }
        out.push(b);
    }
    out
}

/// Discretize a truncated horizon with elements of roughly `target_size`.
///
/// Rectangles become structured grids (split into quadrants at `split_point`
/// when given); polygons are fanned from `split_point` (or their centroid)
/// into radial bands; legs are split at the split point.
pub fn mesh_child(region: &TruncatedRegion, split_point: Option<Vec2>, target_size: f64) -> Result<ChildMesh> {
    if !(target_size > 0.0) {
        return Err(Error::invalid("child element size must be positive"));
    }
    let mut cm = ChildMesh { split_point, ..Default::default() };
    match region {
        TruncatedRegion::Rect { lo, hi } => {
            if region.area() < 1e-14 {
                return Ok(cm);
            }
            let xs = axis_breaks(lo[0], hi[0], split_point.map(|p| p[0]), target_size);
            let ys = axis_breaks(lo[1], hi[1], split_point.map(|p| p[1]), target_size);
            let nx = xs.len();
            cm.nodes.reserve(nx * ys.len());
            for &y in &ys {
                for &x in &xs {
                    cm.nodes.push([x, y]);
                }
            }
            for j in 0..ys.len() - 1 {
                for i in 0..nx - 1 {
                    let a = j * nx + i;
                    cm.elements.push(ChildElement { shape: ElementShape::Quad4, nodes: [a, a + 1, a + 1 + nx, a + nx] });
                }
            }
        }
        TruncatedRegion::Polygon { vertices, .. } => {
            if vertices.len() < 3 || region.area() < 1e-14 {
                return Ok(cm);
            }
            let c = split_point.unwrap_or_else(|| centroid(vertices));
            fan_mesh(&mut cm, vertices, c, target_size);
        }
        TruncatedRegion::Segments(legs) => {
            for leg in legs {
                let c = split_point.map(|p| p[leg.axis]);
                let breaks = axis_breaks(leg.lo, leg.hi, c, target_size);
                if leg.length() <= 0.0 {
                    continue;
                }
                for w in breaks.windows(2) {
                    cm.segments.push(ChildSegment { axis: leg.axis, fixed: leg.fixed, t0: w[0], t1: w[1] });
                }
            }
        }
    }
    Ok(cm.finish())
}

fn centroid(v: &[Vec2]) -> Vec2 {
    let n = v.len() as f64;
    [v.iter().map(|p| p[0]).sum::<f64>() / n, v.iter().map(|p| p[1]).sum::<f64>() / n]
}

fn lerp(a: Vec2, b: Vec2, t: f64) -> Vec2 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn fan_mesh(cm: &mut ChildMesh, poly: &[Vec2], c: Vec2, target: f64) {
    let reach = poly.iter().map(|&p| shape::dist(p, c)).fold(0.0, f64::max);
    let bands = ((reach / target).ceil() as usize).max(1);
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let tri_area = 0.5 * ((a[0] - c[0]) * (b[1] - c[1]) - (a[1] - c[1]) * (b[0] - c[0]));
        if tri_area <= 1e-14 * reach * reach {
            continue;
        }
        let chord = shape::dist(a, b);
        let on_chord = |t: f64, u: f64| lerp(c, lerp(a, b, u), t);
        for k in 0..bands {
            let t0 = k as f64 / bands as f64;
            let t1 = (k + 1) as f64 / bands as f64;
            let m = ((t1 * chord / target).ceil() as usize).max(1);
            for s in 0..m {
                let u0 = s as f64 / m as f64;
                let u1 = (s + 1) as f64 / m as f64;
                let base = cm.nodes.len();
                if k == 0 {
                    cm.nodes.extend([c, on_chord(t1, u0), on_chord(t1, u1)]);
                    cm.elements.push(ChildElement { shape: ElementShape::Tri3, nodes: [base, base + 1, base + 2, 0] });
                } else {
                    cm.nodes.extend([on_chord(t0, u0), on_chord(t1, u0), on_chord(t1, u1), on_chord(t0, u1)]);
                    cm.elements.push(ChildElement { shape: ElementShape::Quad4, nodes: [base, base + 1, base + 2, base + 3] });
                }
            }
        }
    }
}

/// Rule sizes used on child elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChildRuleSizes {
    /// Gauss-Legendre points per direction on quads and segments; 0 defers
    /// to `for_order` of the parent element order.
    pub legendre: usize,
    /// Gauss-Jacobi points per singular direction.
    pub jacobi: usize,
    /// Symmetric triangle rule order.
    pub triangle_order: usize,
}

impl Default for ChildRuleSizes {
    fn default() -> Self {
        ChildRuleSizes::for_order(1)
    }
}

impl ChildRuleSizes {
    /// Defaults for parent elements of the given order: order + 2 Legendre points.
    pub fn for_order(order: usize) -> Self {
        ChildRuleSizes { legendre: order + 2, jacobi: 3, triangle_order: 2 }
    }

    /// Replace an unset (zero) Legendre size by the default for `order`.
    pub fn resolved(self, order: usize) -> Self {
        if self.legendre == 0 {
            ChildRuleSizes { legendre: Self::for_order(order).legendre, ..self }
        } else {
            self
        }
    }
}

/// Pre-built rules for one kernel.
#[derive(Debug, Clone)]
pub struct ChildRules {
    legendre: QuadratureRule,
    jacobi: Option<QuadratureRule>,
    triangle: QuadratureRule,
    alpha: Option<f64>,
}

impl ChildRules {
    pub fn new(sizes: ChildRuleSizes, kernel: &KernelSpec) -> Result<Self> {
        let alpha = kernel.alpha();
        Ok(ChildRules {
            legendre: gauss_legendre(sizes.legendre)?,
            jacobi: alpha.map(|a| gauss_jacobi(sizes.jacobi, a)).transpose()?,
            triangle: triangle_rule(sizes.triangle_order)?,
            alpha,
        })
    }
}

/// A child quadrature point with its combined weight. For singular kernels
/// the |Δ|^-α factors are already inside `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildPoint {
    pub x: Vec2,
    pub weight: f64,
}

/// 1D points and weights over [a, b] for the singular coordinate `s`,
/// appended to `out`.
fn singular_axis(a: f64, b: f64, s: f64, alpha: f64, rules: &ChildRules, out: &mut Vec<(f64, f64)>) -> bool {
    let h = b - a;
    let tol = 1e-12 * h.abs().max(s.abs()).max(1.0);
    out.clear();
    if s > a + tol && s < b - tol {
        return false;
    }
    let near_a = (s - a).abs() <= tol;
    let near_b = (s - b).abs() <= tol;
    if near_a || near_b {
        let jac = rules.jacobi.as_ref().expect("singular kernels carry a Jacobi rule");
        let scale = (0.5 * h).powf(1.0 - alpha);
        for (p, w) in jac.points.iter().zip(&jac.weights) {
            let d = 0.5 * h * (1.0 - p[0]);
            let x = if near_a { a + d } else { b - d };
            out.push((x, w * scale));
        }
    } else {
        for (p, w) in rules.legendre.points.iter().zip(&rules.legendre.weights) {
            let x = 0.5 * (a + b) + 0.5 * h * p[0];
            out.push((x, 0.5 * h * w * (x - s).abs().powf(-alpha)));
        }
    }
    true
}

/// Quadrature points over a child mesh, appended to `out`.
pub fn child_quadrature_points(cm: &ChildMesh, kernel: &KernelSpec, rules: &ChildRules, out: &mut Vec<ChildPoint>) -> Result<()> {
    out.clear();
    if !kernel.is_singular() {
        for e in 0..cm.elements.len() {
            let geom = cm.geometry(e);
            if geom.quad {
                let r = &rules.legendre;
                for (pj, wj) in r.points.iter().zip(&r.weights) {
                    for (pi, wi) in r.points.iter().zip(&r.weights) {
                        let xi = [pi[0], pj[0]];
                        out.push(ChildPoint { x: geom.map(xi), weight: wi * wj * geom.det(xi) });
                    }
                }
            } else {
                let det = 2.0 * geom.area();
                for (p, w) in rules.triangle.points.iter().zip(&rules.triangle.weights) {
                    out.push(ChildPoint { x: geom.map(*p), weight: w * det });
                }
            }
        }
        for seg in &cm.segments {
            let h = seg.t1 - seg.t0;
            for (p, w) in rules.legendre.points.iter().zip(&rules.legendre.weights) {
                out.push(ChildPoint { x: seg.point(seg.t0 + 0.5 * h * (1.0 + p[0])), weight: 0.5 * h * w });
            }
        }
        return Ok(());
    }

    let alpha = rules.alpha.expect("singular kernels carry an order");
    let s = cm.split_point.ok_or(Error::Alignment { element: 0 })?;
    let mut ax = Vec::with_capacity(8);
    let mut ay = Vec::with_capacity(8);
    for e in 0..cm.elements.len() {
        let geom = cm.geometry(e);
        let c = geom.corners;
        let axis_aligned = geom.quad && c[0][1] == c[1][1] && c[1][0] == c[2][0] && c[2][1] == c[3][1] && c[3][0] == c[0][0];
        if !axis_aligned {
            return Err(Error::Alignment { element: e });
        }
        let (lo, hi) = geom.bbox();
        if !singular_axis(lo[0], hi[0], s[0], alpha, rules, &mut ax) || !singular_axis(lo[1], hi[1], s[1], alpha, rules, &mut ay) {
            return Err(Error::Alignment { element: e });
        }
        for &(y, wy) in &ay {
            for &(x, wx) in &ax {
                out.push(ChildPoint { x: [x, y], weight: wx * wy });
            }
        }
    }
    for (i, seg) in cm.segments.iter().enumerate() {
        if !singular_axis(seg.t0, seg.t1, s[seg.axis], alpha, rules, &mut ax) {
            return Err(Error::Alignment { element: cm.elements.len() + i });
        }
        for &(t, w) in &ax {
            out.push(ChildPoint { x: seg.point(t), weight: w });
        }
    }
    Ok(())
}
