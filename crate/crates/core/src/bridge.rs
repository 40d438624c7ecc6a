//! Scale bridging: locate the parent element containing a child quadrature
//! point and recover its parent reference coordinates.

use crate::error::{Error, Result};
use crate::mesh::ParentMesh;
use crate::shape::{inv2, Geometry, Vec2};

/// Geometric slack for containment tests.
pub const INFLATION: f64 = 1e-9;

/// Uniform background grid over the parent bounding box.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    lo: Vec2,
    hi: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
    geoms: Vec<Geometry>,
}

impl SpatialIndex {
    pub fn build(mesh: &ParentMesh) -> Self {
        let geoms: Vec<Geometry> = (0..mesh.elements.len()).map(|e| mesh.geometry(e)).collect();
        let (lo, hi) = mesh.bbox();
        let cell = mesh.mean_element_diameter().max(1e-300);
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        for (e, g) in geoms.iter().enumerate() {
            let (blo, bhi) = g.bbox();
            let i0 = clamp((blo[0] - INFLATION - lo[0]) / cell, nx);
            let i1 = clamp((bhi[0] + INFLATION - lo[0]) / cell, nx);
            let j0 = clamp((blo[1] - INFLATION - lo[1]) / cell, ny);
            let j1 = clamp((bhi[1] + INFLATION - lo[1]) / cell, ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(e as u32);
                }
            }
        }
        let mut offsets = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for b in buckets {
            items.extend(b);
            offsets.push(items.len() as u32);
        }
        SpatialIndex { lo, hi, cell, nx, ny, offsets, items, geoms }
    }

    pub fn geometry(&self, e: usize) -> &Geometry {
        &self.geoms[e]
    }

    /// Candidate elements (ascending ids) for the cell holding `x`.
    pub fn candidates(&self, x: Vec2) -> &[u32] {
        if x[0] < self.lo[0] - INFLATION || x[0] > self.hi[0] + INFLATION || x[1] < self.lo[1] - INFLATION || x[1] > self.hi[1] + INFLATION {
            return &[];
        }
        let i = (((x[0] - self.lo[0]) / self.cell).max(0.0) as usize).min(self.nx - 1);
        let j = (((x[1] - self.lo[1]) / self.cell).max(0.0) as usize).min(self.ny - 1);
        let c = j * self.nx + i;
        &self.items[self.offsets[c] as usize..self.offsets[c + 1] as usize]
    }

    fn nearest(&self, x: Vec2) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (e, g) in self.geoms.iter().enumerate() {
            let d = g.outside_distance(x);
            if d < best.0 {
                best = (d, e);
            }
        }
        best.1
    }
}

/// A child point resolved to its parent element and reference coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgedPoint {
    pub element: usize,
    pub xi: Vec2,
    pub x: Vec2,
}

/// Lowest-id element whose (slightly inflated) closure contains `x`.
pub fn locate_parent_element(index: &SpatialIndex, _mesh: &ParentMesh, x: Vec2) -> Result<usize> {
    for &e in index.candidates(x) {
        if index.geoms[e as usize].outside_distance(x) <= INFLATION {
            return Ok(e as usize);
        }
    }
    Err(Error::Bridging { x: x[0], y: x[1], nearest: index.nearest(x) })
}

fn snap(v: f64) -> f64 {
    if (v - 1.0).abs() < 1e-13 {
        1.0
    } else if (v + 1.0).abs() < 1e-13 {
        -1.0
    } else {
        v
    }
}

/// Reference coordinates of `x` in a straight-edged element.
pub fn inverse_map_geometry(geom: &Geometry, x: Vec2) -> Result<Vec2> {
    if !geom.quad {
        let c = geom.corners;
        let j = [[c[1][0] - c[0][0], c[2][0] - c[0][0]], [c[1][1] - c[0][1], c[2][1] - c[0][1]]];
        let (ji, _) = inv2(j).ok_or_else(|| Error::Numeric("degenerate triangle in inverse map".into()))?;
        let d = [x[0] - c[0][0], x[1] - c[0][1]];
        return Ok([ji[0][0] * d[0] + ji[0][1] * d[1], ji[1][0] * d[0] + ji[1][1] * d[1]]);
    }
    let mut xi = [0.0, 0.0];
    for _ in 0..20 {
        let m = geom.map(xi);
        let r = [m[0] - x[0], m[1] - x[1]];
        let (ji, _) = inv2(geom.jacobian(xi)).ok_or_else(|| Error::Numeric("singular Jacobian in inverse map".into()))?;
        let step = [ji[0][0] * r[0] + ji[0][1] * r[1], ji[1][0] * r[0] + ji[1][1] * r[1]];
        xi = [xi[0] - step[0], xi[1] - step[1]];
        let m = geom.map(xi);
        if (m[0] - x[0]).abs().max((m[1] - x[1]).abs()) < 1e-12 {
            return Ok([snap(xi[0]), snap(xi[1])]);
        }
    }
    Err(Error::Numeric(format!("inverse map did not converge at ({}, {})", x[0], x[1])))
}

pub fn inverse_map(mesh: &ParentMesh, elem: usize, x: Vec2) -> Result<Vec2> {
    inverse_map_geometry(&mesh.geometry(elem), x)
}

/// Full three-step bridge of a Euclidean point.
pub fn bridge(index: &SpatialIndex, mesh: &ParentMesh, x: Vec2) -> Result<BridgedPoint> {
    let element = locate_parent_element(index, mesh, x)?;
    let xi = inverse_map_geometry(&index.geoms[element], x)?;
    Ok(BridgedPoint { element, xi, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_quad_mesh;

    #[test]
    fn locate_examples() {
        let mesh = build_structured_quad_mesh(1.0, 1.0, 2, 2, 1).unwrap();
        let idx = SpatialIndex::build(&mesh);
        assert_eq!(locate_parent_element(&idx, &mesh, [0.25, 0.25]).unwrap(), 0);
        assert_eq!(locate_parent_element(&idx, &mesh, [0.5, 0.5]).unwrap(), 0);
        assert_eq!(locate_parent_element(&idx, &mesh, [0.75, 0.5]).unwrap(), 1);
        assert!(matches!(locate_parent_element(&idx, &mesh, [2.0, 2.0]), Err(Error::Bridging { .. })));
    }

    #[test]
    fn inverse_map_examples() {
        let h = 0.25;
        let g = Geometry::new(&[[0.0, 0.0], [h, 0.0], [h, h], [0.0, h]]);
        assert_eq!(inverse_map_geometry(&g, [h / 2.0, h / 2.0]).unwrap(), [0.0, 0.0]);
        assert_eq!(inverse_map_geometry(&g, [h, h]).unwrap(), [1.0, 1.0]);
        assert_eq!(inverse_map_geometry(&g, [0.0, h]).unwrap(), [-1.0, 1.0]);
        let skew = Geometry::new(&[[0.0, 0.0], [1.0, 0.1], [1.3, 0.9], [-0.1, 0.7]]);
        let x = skew.map([0.3, -0.6]);
        let xi = inverse_map_geometry(&skew, x).unwrap();
        let back = skew.map(xi);
        assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
    }
}
