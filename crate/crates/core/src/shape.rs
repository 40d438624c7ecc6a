//! Lagrange shape functions and the (always affine/bilinear) element geometry map.
//!
//! Displacements are interpolated with the full node set of an element (Ψ),
//! while geometry only ever uses the corner nodes (Φ): Quad9 and Tri6
//! elements have straight edges and interior nodes at the bilinear positions.

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

pub const MAX_NODES: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementShape {
    Quad4,
    Quad9,
    Tri3,
    Tri6,
}

impl ElementShape {
    pub fn node_count(self) -> usize {
        match self {
            ElementShape::Quad4 => 4,
            ElementShape::Quad9 => 9,
            ElementShape::Tri3 => 3,
            ElementShape::Tri6 => 6,
        }
    }

    pub fn corner_count(self) -> usize {
        if self.is_quad() {
            4
        } else {
            3
        }
    }

    pub fn is_quad(self) -> bool {
        matches!(self, ElementShape::Quad4 | ElementShape::Quad9)
    }

    /// Polynomial order of the displacement interpolation.
    pub fn order(self) -> usize {
        match self {
            ElementShape::Quad4 | ElementShape::Tri3 => 1,
            ElementShape::Quad9 | ElementShape::Tri6 => 2,
        }
    }

    pub fn from_family(quad: bool, order: usize) -> Result<Self> {
        match (quad, order) {
            (true, 1) => Ok(ElementShape::Quad4),
            (true, 2) => Ok(ElementShape::Quad9),
            (false, 1) => Ok(ElementShape::Tri3),
            (false, 2) => Ok(ElementShape::Tri6),
            _ => Err(Error::invalid(format!("unsupported element order {order}"))),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            ElementShape::Quad4 => "q4",
            ElementShape::Quad9 => "q9",
            ElementShape::Tri3 => "t3",
            ElementShape::Tri6 => "t6",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "q4" => Some(ElementShape::Quad4),
            "q9" => Some(ElementShape::Quad9),
            "t3" => Some(ElementShape::Tri3),
            "t6" => Some(ElementShape::Tri6),
            _ => None,
        }
    }

    /// Reference coordinates of the element nodes.
    pub fn reference_nodes(self) -> &'static [Vec2] {
        match self {
            ElementShape::Quad4 => &QUAD_NODES[..4],
            ElementShape::Quad9 => &QUAD_NODES,
            ElementShape::Tri3 => &TRI_NODES[..3],
            ElementShape::Tri6 => &TRI_NODES,
        }
    }
}

const QUAD_NODES: [Vec2; 9] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
    [0.0, 0.0],
];

const TRI_NODES: [Vec2; 6] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];

/// Shape function values and reference gradients at one point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub n: usize,
    pub values: [f64; MAX_NODES],
    pub grads: [Vec2; MAX_NODES],
}

fn quad_1d(order: usize, node: f64, t: f64) -> (f64, f64) {
    if order == 1 {
        (0.5 * (1.0 + node * t), 0.5 * node)
    } else if node < -0.5 {
        (0.5 * t * (t - 1.0), t - 0.5)
    } else if node > 0.5 {
        (0.5 * t * (t + 1.0), t + 0.5)
    } else {
        (1.0 - t * t, -2.0 * t)
    }
}

/// Evaluate Ψ and ∇_ξΨ for `shape` at reference point `xi`.
pub fn eval(shape: ElementShape, xi: Vec2) -> ShapeEval {
    let mut out = ShapeEval { n: shape.node_count(), values: [0.0; MAX_NODES], grads: [[0.0; 2]; MAX_NODES] };
    match shape {
        ElementShape::Quad4 | ElementShape::Quad9 => {
            let order = shape.order();
            for (i, node) in shape.reference_nodes().iter().enumerate() {
                let (fx, dfx) = quad_1d(order, node[0], xi[0]);
                let (fy, dfy) = quad_1d(order, node[1], xi[1]);
                out.values[i] = fx * fy;
                out.grads[i] = [dfx * fy, fx * dfy];
            }
        }
        ElementShape::Tri3 => {
            out.values[..3].copy_from_slice(&[1.0 - xi[0] - xi[1], xi[0], xi[1]]);
            out.grads[..3].copy_from_slice(&[[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
        }
        ElementShape::Tri6 => {
            let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
            let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            for i in 0..3 {
                out.values[i] = l[i] * (2.0 * l[i] - 1.0);
                let c = 4.0 * l[i] - 1.0;
                out.grads[i] = [c * dl[i][0], c * dl[i][1]];
            }
            for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                out.values[3 + k] = 4.0 * l[a] * l[b];
                out.grads[3 + k] = [
                    4.0 * (dl[a][0] * l[b] + l[a] * dl[b][0]),
                    4.0 * (dl[a][1] * l[b] + l[a] * dl[b][1]),
                ];
            }
        }
    }
    out
}

/// Straight-edged element geometry defined by its corners (3 or 4, CCW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub quad: bool,
    pub corners: [Vec2; 4],
}

impl Geometry {
    pub fn new(corners: &[Vec2]) -> Self {
        let mut c = [[0.0; 2]; 4];
        c[..corners.len()].copy_from_slice(corners);
        Geometry { quad: corners.len() == 4, corners: c }
    }

    pub fn corners(&self) -> &[Vec2] {
        if self.quad {
            &self.corners
        } else {
            &self.corners[..3]
        }
    }

    fn linear_shape(&self) -> ElementShape {
        if self.quad {
            ElementShape::Quad4
        } else {
            ElementShape::Tri3
        }
    }

    pub fn map(&self, xi: Vec2) -> Vec2 {
        let s = eval(self.linear_shape(), xi);
        let mut x = [0.0; 2];
        for (i, c) in self.corners().iter().enumerate() {
            x[0] += s.values[i] * c[0];
            x[1] += s.values[i] * c[1];
        }
        x
    }

    /// J[i][j] = ∂x_i/∂ξ_j.
    pub fn jacobian(&self, xi: Vec2) -> [[f64; 2]; 2] {
        let s = eval(self.linear_shape(), xi);
        let mut j = [[0.0; 2]; 2];
        for (i, c) in self.corners().iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += c[a] * s.grads[i][b];
                }
            }
        }
        j
    }

    pub fn det(&self, xi: Vec2) -> f64 {
        let j = self.jacobian(xi);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Reference-cell centroid.
    pub fn reference_center(&self) -> Vec2 {
        if self.quad {
            [0.0, 0.0]
        } else {
            [1.0 / 3.0, 1.0 / 3.0]
        }
    }

    /// Physical area (exact for straight-edged cells).
    pub fn area(&self) -> f64 {
        polygon_area(self.corners())
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in self.corners() {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    }

    pub fn diameter(&self) -> f64 {
        let c = self.corners();
        let mut d: f64 = 0.0;
        for i in 0..c.len() {
            for j in i + 1..c.len() {
                d = d.max(dist(c[i], c[j]));
            }
        }
        d
    }

    /// Longest edge.
    pub fn max_edge(&self) -> f64 {
        let c = self.corners();
        (0..c.len()).map(|i| dist(c[i], c[(i + 1) % c.len()])).fold(0.0, f64::max)
    }

    /// Signed distance by which `x` lies outside the closed (convex) cell;
    /// non-positive when inside.
    pub fn outside_distance(&self, x: Vec2) -> f64 {
        let c = self.corners();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..c.len() {
            let a = c[i];
            let b = c[(i + 1) % c.len()];
            let e = [b[0] - a[0], b[1] - a[1]];
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            // outward normal of a CCW edge is (e_y, -e_x)
            let d = ((x[0] - a[0]) * e[1] - (x[1] - a[1]) * e[0]) / len;
            worst = worst.max(d);
        }
        worst
    }
}

pub fn dist(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Shoelace area, positive for CCW vertex order.
pub fn polygon_area(v: &[Vec2]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = v[i];
        let b = v[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// 2x2 inverse; returns None when singular.
pub fn inv2(m: [[f64; 2]; 2]) -> Option<([[f64; 2]; 2], f64)> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]], det))
}

/// Physical gradients ∇_x Ψ at reference point `xi` together with |J|.
pub fn physical_gradients(shape: ElementShape, geom: &Geometry, xi: Vec2) -> (ShapeEval, [Vec2; MAX_NODES], f64) {
    let s = eval(shape, xi);
    let j = geom.jacobian(xi);
    let (jinv, det) = inv2(j).unwrap_or(([[0.0; 2]; 2], 0.0));
    let mut g = [[0.0; 2]; MAX_NODES];
    for i in 0..s.n {
        // ∇_x N = J^{-T} ∇_ξ N
        g[i] = [
            jinv[0][0] * s.grads[i][0] + jinv[1][0] * s.grads[i][1],
            jinv[0][1] * s.grads[i][0] + jinv[1][1] * s.grads[i][1],
        ];
    }
    (s, g, det)
}

/// 1D Lagrange shapes on [-1, 1] for boundary segments ordered [start, end, (mid)].
pub fn edge_shape(n_nodes: usize, t: f64) -> [f64; 3] {
    if n_nodes == 2 {
        [0.5 * (1.0 - t), 0.5 * (1.0 + t), 0.0]
    } else {
        [0.5 * t * (t - 1.0), 0.5 * t * (t + 1.0), 1.0 - t * t]
    }
}
