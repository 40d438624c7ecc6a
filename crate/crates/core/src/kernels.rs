//! Attenuation kernels and the truncated horizons they act on.

use crate::error::{Error, Result};
use crate::mesh::{Domain, ParentMesh};
use crate::shape::{self, Vec2};
use crate::special::gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// (1/(πτ)) exp(-Δx²/τ) exp(-Δy²/τ)
    BiExponential { tau: f64 },
    /// |Δx|^-α |Δy|^-α / Γ²(1-α)
    PowerLaw { alpha: f64 },
    /// (1/τ1) exp(-|Δ|/τ2)
    RadialExponential { tau1: f64, tau2: f64 },
    /// 1 / (τ1 |Δ|² + τ2)
    Rational { tau1: f64, tau2: f64 },
    /// Average of 1D power laws along the two coordinate lines through x.
    BidirectionalPowerLaw { alpha: f64 },
}

/// Kernel value with the per-axis |Δ|^-α factors pulled out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFactors {
    pub smooth: f64,
    pub exponents: [Option<f64>; 2],
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("power-law order must lie in (0, 1), got {alpha}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::BiExponential { tau } => check_positive("tau", tau),
            KernelSpec::PowerLaw { alpha } | KernelSpec::BidirectionalPowerLaw { alpha } => check_alpha(alpha),
            KernelSpec::RadialExponential { tau1, tau2 } | KernelSpec::Rational { tau1, tau2 } => {
                check_positive("tau1", tau1)?;
                check_positive("tau2", tau2)
            }
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, KernelSpec::PowerLaw { .. } | KernelSpec::BidirectionalPowerLaw { .. })
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            KernelSpec::PowerLaw { alpha } | KernelSpec::BidirectionalPowerLaw { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Smooth prefactor of one 1D leg of the bidirectional kernel, without the
    /// averaging factor 1/2.
    pub fn leg_smooth_part(alpha: f64) -> f64 {
        1.0 / (2.0 * gamma(1.0 - alpha))
    }

    /// K(x, x').
    pub fn eval(&self, x: Vec2, xp: Vec2) -> Result<f64> {
        let dx = x[0] - xp[0];
        let dy = x[1] - xp[1];
        match *self {
            KernelSpec::BiExponential { tau } => {
                Ok((-(dx * dx) / tau).exp() * (-(dy * dy) / tau).exp() / (std::f64::consts::PI * tau))
            }
            KernelSpec::PowerLaw { alpha } => {
                if dx == 0.0 || dy == 0.0 {
                    return Err(Error::Domain { dx, dy });
                }
                let g = gamma(1.0 - alpha);
                Ok((dx.abs() * dy.abs()).powf(-alpha) / (g * g))
            }
            KernelSpec::RadialExponential { tau1, tau2 } => Ok((-(dx.hypot(dy)) / tau2).exp() / tau1),
            KernelSpec::Rational { tau1, tau2 } => Ok(1.0 / (tau1 * (dx * dx + dy * dy) + tau2)),
            KernelSpec::BidirectionalPowerLaw { alpha } => match (dx == 0.0, dy == 0.0) {
                (true, true) => Err(Error::Domain { dx, dy }),
                (false, true) => Ok(0.5 * Self::leg_smooth_part(alpha) * dx.abs().powf(-alpha)),
                (true, false) => Ok(0.5 * Self::leg_smooth_part(alpha) * dy.abs().powf(-alpha)),
                (false, false) => Ok(0.0),
            },
        }
    }

    /// Smooth part and per-axis singular exponents of a singular kernel.
    ///
    /// For the bidirectional kernel the leg is picked from which coordinate
    /// of `x - xp` vanishes and the averaging 1/2 is left to the caller.
    pub fn split_factors(&self, x: Vec2, xp: Vec2) -> Result<SplitFactors> {
        match *self {
            KernelSpec::PowerLaw { alpha } => {
                let g = gamma(1.0 - alpha);
                Ok(SplitFactors { smooth: 1.0 / (g * g), exponents: [Some(alpha), Some(alpha)] })
            }
            KernelSpec::BidirectionalPowerLaw { alpha } => {
                let dx = x[0] - xp[0];
                let dy = x[1] - xp[1];
                let smooth = Self::leg_smooth_part(alpha);
                match (dx == 0.0, dy == 0.0) {
                    (false, true) => Ok(SplitFactors { smooth, exponents: [Some(alpha), None] }),
                    (true, false) => Ok(SplitFactors { smooth, exponents: [None, Some(alpha)] }),
                    _ => Err(Error::Domain { dx, dy }),
                }
            }
            _ => Err(Error::invalid("kernel has no singular part")),
        }
    }
}

pub const DEFAULT_FACETS_PER_QUARTER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonSpec {
    /// Square of half-width l centred at x.
    Rect { half_width: f64 },
    /// Disc of radius l centred at x.
    Circle { radius: f64 },
    /// The two coordinate-line segments of half-length l through x.
    BidirectionalSegments { half_length: f64 },
    /// A whole tagged sub-region of the mesh.
    FullRegion { region: usize },
}

impl HorizonSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HorizonSpec::Rect { half_width: l } | HorizonSpec::Circle { radius: l } | HorizonSpec::BidirectionalSegments { half_length: l } => {
                check_positive("horizon length", l)
            }
            HorizonSpec::FullRegion { .. } => Ok(()),
        }
    }

    /// Characteristic horizon length (used to size child meshes).
    pub fn length(&self) -> Option<f64> {
        match *self {
            HorizonSpec::Rect { half_width: l } | HorizonSpec::Circle { radius: l } | HorizonSpec::BidirectionalSegments { half_length: l } => Some(l),
            HorizonSpec::FullRegion { .. } => None,
        }
    }
}

/// One clipped segment of a bidirectional horizon: points with coordinate
/// `axis` in [lo, hi] and the other coordinate equal to `fixed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub axis: usize,
    pub fixed: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Leg {
    pub fn point(&self, t: f64) -> Vec2 {
        if self.axis == 0 {
            [t, self.fixed]
        } else {
            [self.fixed, t]
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Ideal horizon intersected with the material domain.
#[derive(Debug, Clone, PartialEq)]
pub enum TruncatedRegion {
    Rect { lo: Vec2, hi: Vec2 },
    /// Convex CCW polygon; `faceted` marks polygons approximating curved edges.
    Polygon { vertices: Vec<Vec2>, faceted: bool },
    Segments(Vec<Leg>),
}

impl TruncatedRegion {
    pub fn area(&self) -> f64 {
        match self {
            TruncatedRegion::Rect { lo, hi } => (hi[0] - lo[0]).max(0.0) * (hi[1] - lo[1]).max(0.0),
            TruncatedRegion::Polygon { vertices, .. } => shape::polygon_area(vertices),
            TruncatedRegion::Segments(_) => 0.0,
        }
    }
}

/// Clip a convex polygon against a convex CCW clip polygon.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let side = |p: Vec2| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        let m = input.len();
        for k in 0..m {
            let p = input[k];
            let q = input[(k + 1) % m];
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    // drop consecutive duplicates produced by vertices lying on clip edges
    out.dedup_by(|a, b| shape::dist(*a, *b) < 1e-15);
    if out.len() > 1 && shape::dist(out[0], out[out.len() - 1]) < 1e-15 {
        out.pop();
    }
    out
}

/// Inscribed polygon of a circle with `4 * facets_per_quarter` vertices.
pub fn faceted_circle(center: Vec2, radius: f64, facets_per_quarter: usize) -> Vec<Vec2> {
    let n = 4 * facets_per_quarter.max(1);
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

fn boundary_polygons(mesh: &ParentMesh) -> Vec<Vec<Vec2>> {
    match &mesh.domain {
        Domain::Rect { .. } => vec![mesh.convex_boundary().expect("rectangles are convex")],
        Domain::Polygon { outer, .. } => vec![outer.clone()],
        Domain::Annulus { inner, outer, .. } => vec![outer.clone(), inner.clone()],
        Domain::ElementWalk => mesh
            .boundary_loops()
            .into_iter()
            .map(|lp| lp.into_iter().map(|n| mesh.coords(n)).collect())
            .collect(),
    }
}

/// Clip the line segment through `x` along `axis` (half-length `l`) to the
/// connected piece of the domain that contains `x`.
fn clip_leg(mesh: &ParentMesh, x: Vec2, axis: usize, l: f64) -> Leg {
    let other = 1 - axis;
    let c = x[axis];
    let mut cuts = vec![c - l, c + l];
    for poly in boundary_polygons(mesh) {
        let n = poly.len();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            if (a[other] - x[other]) * (b[other] - x[other]) <= 0.0 && a[other] != b[other] {
                let t = (x[other] - a[other]) / (b[other] - a[other]);
                let s = a[axis] + t * (b[axis] - a[axis]);
                if s > c - l && s < c + l {
                    cuts.push(s);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let leg = Leg { axis, fixed: x[other], lo: c, hi: c };
    let inside = |s0: f64, s1: f64| mesh.point_in_domain(leg.point(0.5 * (s0 + s1)));
    let mut lo = c;
    let mut hi = c;
    // walk outwards from x across sub-intervals that stay inside the domain
    let pos = cuts.partition_point(|&s| s <= c);
    let mut k = pos;
    while k < cuts.len() {
        let prev = if k == pos { c } else { cuts[k - 1] };
        if cuts[k] > prev && !inside(prev, cuts[k]) {
            break;
        }
        hi = cuts[k];
        k += 1;
    }
    let mut k = pos;
    while k > 0 {
        let next = if k == pos { c } else { cuts[k] };
        let s = cuts[k - 1];
        if s < next && !inside(s, next) {
            break;
        }
        lo = s;
        k -= 1;
    }
    Leg { lo: lo.min(c), hi: hi.max(c), ..leg }
}

/// Truncated horizon at `x` with the default arc faceting.
pub fn horizon_geometry(h: &HorizonSpec, x: Vec2, mesh: &ParentMesh) -> Result<TruncatedRegion> {
    horizon_geometry_with(h, x, mesh, DEFAULT_FACETS_PER_QUARTER)
}

pub fn horizon_geometry_with(
    h: &HorizonSpec,
    x: Vec2,
    mesh: &ParentMesh,
    facets_per_quarter: usize,
) -> Result<TruncatedRegion> {
    if !mesh.point_in_domain(x) {
        return Err(Error::invalid(format!("point ({}, {}) is outside the domain", x[0], x[1])));
    }
    match *h {
        HorizonSpec::Rect { half_width: l } => {
            if let Domain::Rect { lo, hi } = mesh.domain {
                return Ok(TruncatedRegion::Rect {
                    lo: [(x[0] - l).max(lo[0]), (x[1] - l).max(lo[1])],
                    hi: [(x[0] + l).min(hi[0]), (x[1] + l).min(hi[1])],
                });
            }
            let clip = convex_domain(mesh)?;
            let square = [[x[0] - l, x[1] - l], [x[0] + l, x[1] - l], [x[0] + l, x[1] + l], [x[0] - l, x[1] + l]];
            Ok(TruncatedRegion::Polygon { vertices: clip_convex(&square, &clip), faceted: false })
        }
        HorizonSpec::Circle { radius } => {
            let clip = convex_domain(mesh)?;
            let circle = faceted_circle(x, radius, facets_per_quarter);
            Ok(TruncatedRegion::Polygon { vertices: clip_convex(&circle, &clip), faceted: true })
        }
        HorizonSpec::BidirectionalSegments { half_length: l } => {
            Ok(TruncatedRegion::Segments(vec![clip_leg(mesh, x, 0, l), clip_leg(mesh, x, 1, l)]))
        }
        HorizonSpec::FullRegion { region } => {
            let sub = mesh
                .subregion(region)
                .ok_or_else(|| Error::invalid(format!("mesh has no region {region}")))?;
            Ok(TruncatedRegion::Polygon { vertices: sub.boundary.clone(), faceted: true })
        }
    }
}

fn convex_domain(mesh: &ParentMesh) -> Result<Vec<Vec2>> {
    mesh.convex_boundary()
        .ok_or_else(|| Error::invalid("two-dimensional horizons need a convex domain boundary"))
}
