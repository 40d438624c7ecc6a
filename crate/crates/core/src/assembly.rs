//! Global stiffness, mass and load assembly.
//!
//! For every parent Gauss point the nonlocal strain is gathered from the
//! child quadrature points of its horizon, each bridged back into the parent
//! element that contains it. The resulting stress operator couples the test
//! functions of one element to every node whose support meets the horizon.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::bridge::{bridge, SpatialIndex};
use crate::child::{child_quadrature_points, mesh_child, ChildMesh, ChildPoint, ChildRuleSizes, ChildRules};
use crate::error::{Error, Result};
use crate::kernels::{horizon_geometry_with, HorizonSpec, KernelSpec, DEFAULT_FACETS_PER_QUARTER};
use crate::mesh::{BoundaryKind, ParentMesh};
use crate::quadrature::{gauss_legendre, tensor_rule, triangle_rule, QuadratureRule};
use crate::shape::{edge_shape, physical_gradients, ElementShape, Vec2, MAX_NODES};
use crate::sparse::{CsrMatrix, Triplet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub mu: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material { mu: 1.0, lambda: 1.0, rho: 1.0 }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.lambda >= 0.0) || !(self.rho >= 0.0) {
            return Err(Error::invalid(format!(
                "material needs mu > 0, lambda >= 0, rho >= 0 (got {}, {}, {})",
                self.mu, self.lambda, self.rho
            )));
        }
        Ok(())
    }

    /// Plane-strain stiffness acting on [ε_xx, ε_yy, ε_xy] (tensor shear).
    pub fn voigt(&self) -> [[f64; 3]; 3] {
        let (m, l) = (self.mu, self.lambda);
        [[2.0 * m + l, l, 0.0], [l, 2.0 * m + l, 0.0], [0.0, 0.0, 2.0 * m]]
    }
}

/// Kernel, horizon and the elements they apply to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlocalModel {
    pub kernel: KernelSpec,
    pub horizon: HorizonSpec,
    /// Restrict the nonlocal law to elements of this region; `None` means all.
    pub region: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Gauss points per direction on parent quads (or symmetric-rule order on
    /// triangles); `None` picks order + 1.
    pub parent_rule: Option<usize>,
    pub child_rules: ChildRuleSizes,
    /// Target child element size Δc.
    pub child_size: f64,
    /// Split rectangular child meshes at the parent Gauss point even for
    /// non-singular kernels. Unsplit grids sample narrow kernels off-centre
    /// and can leave oscillatory modes almost without stiffness.
    pub align_child_mesh: bool,
    pub facets_per_quarter: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            parent_rule: None,
            child_rules: ChildRuleSizes::default(),
            child_size: 0.05,
            align_child_mesh: true,
            facets_per_quarter: DEFAULT_FACETS_PER_QUARTER,
            workers: None,
        }
    }
}

pub type VectorField<'a> = dyn Fn(Vec2) -> Vec2 + Send + Sync + 'a;
/// Traction as a function of position and outward unit normal.
pub type TractionField<'a> = dyn Fn(Vec2, Vec2) -> Vec2 + Send + Sync + 'a;

/// Body force, boundary traction and prescribed displacement; missing
/// entries are zero.
#[derive(Default)]
pub struct Loads<'a> {
    pub body: Option<&'a VectorField<'a>>,
    pub traction: Option<&'a TractionField<'a>>,
    pub dirichlet: Option<&'a VectorField<'a>>,
}

pub struct Problem<'a> {
    pub mesh: &'a ParentMesh,
    pub material: Material,
    pub nonlocal: Option<NonlocalModel>,
    pub options: AssemblyOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSystem {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub f: Vec<f64>,
    /// Prescribed (dof, value) pairs, sorted by dof.
    pub dirichlet: Vec<(usize, f64)>,
}

impl GlobalSystem {
    pub fn n_dofs(&self) -> usize {
        self.f.len()
    }
}

/// Global dof of `component` (0 = x, 1 = y) at `node`.
pub fn dof(node: usize, component: usize) -> usize {
    2 * node + component
}

/// Mean longest-edge length of the parent elements.
pub fn parent_element_size(mesh: &ParentMesh) -> f64 {
    let n = mesh.elements.len().max(1) as f64;
    (0..mesh.elements.len()).map(|e| mesh.geometry(e).max_edge()).sum::<f64>() / n
}

/// Parent quadrature rule for an element shape.
pub fn parent_rule(shape: ElementShape, size: Option<usize>) -> Result<QuadratureRule> {
    if shape.is_quad() {
        tensor_rule(&gauss_legendre(size.unwrap_or(shape.order() + 1))?)
    } else {
        triangle_rule(size.unwrap_or(shape.order() + 1).min(3))
    }
}

/// Per-worker buffers keyed by parent node.
struct Scratch {
    grad: Vec<Vec2>,
    mark: Vec<bool>,
    touched: Vec<usize>,
    acc: Vec<f64>,
    acc_mark: Vec<bool>,
    acc_touched: Vec<usize>,
    points: Vec<ChildPoint>,
}

impl Scratch {
    fn new(n_nodes: usize) -> Self {
        Scratch {
            grad: vec![[0.0; 2]; n_nodes],
            mark: vec![false; n_nodes],
            touched: Vec::new(),
            acc: vec![0.0; n_nodes * 4 * MAX_NODES],
            acc_mark: vec![false; n_nodes],
            acc_touched: Vec::new(),
            points: Vec::new(),
        }
    }

    fn add_grad(&mut self, node: usize, g: Vec2) {
        if !self.mark[node] {
            self.mark[node] = true;
            self.touched.push(node);
        }
        self.grad[node][0] += g[0];
        self.grad[node][1] += g[1];
    }

    fn clear_grads(&mut self) {
        for &n in &self.touched {
            self.grad[n] = [0.0; 2];
            self.mark[n] = false;
        }
        self.touched.clear();
    }
}

/// Shared read-only state of one assembly.
pub struct Assembler<'a> {
    pub mesh: &'a ParentMesh,
    pub material: Material,
    pub nonlocal: Option<NonlocalModel>,
    pub options: AssemblyOptions,
    index: SpatialIndex,
    child_rules: Option<ChildRules>,
    rules: Vec<(ElementShape, QuadratureRule)>,
}

impl<'a> Assembler<'a> {
    pub fn new(problem: &Problem<'a>) -> Result<Self> {
        problem.material.validate()?;
        let child_rules = match &problem.nonlocal {
            Some(nl) => {
                nl.kernel.validate()?;
                nl.horizon.validate()?;
                if !(problem.options.child_size > 0.0) {
                    return Err(Error::invalid("child element size must be positive"));
                }
                if matches!(nl.kernel, KernelSpec::BidirectionalPowerLaw { .. })
                    != matches!(nl.horizon, HorizonSpec::BidirectionalSegments { .. })
                {
                    return Err(Error::invalid("the bidirectional kernel requires bidirectional segment horizons and vice versa"));
                }
                Some(ChildRules::new(problem.options.child_rules, &nl.kernel)?)
            }
            None => None,
        };
        let mut rules: Vec<(ElementShape, QuadratureRule)> = Vec::new();
        for el in &problem.mesh.elements {
            if !rules.iter().any(|(s, _)| *s == el.shape) {
                rules.push((el.shape, parent_rule(el.shape, problem.options.parent_rule)?));
            }
        }
        Ok(Assembler {
            mesh: problem.mesh,
            material: problem.material,
            nonlocal: problem.nonlocal,
            options: problem.options,
            index: SpatialIndex::build(problem.mesh),
            child_rules,
            rules,
        })
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn rule(&self, shape: ElementShape) -> &QuadratureRule {
        &self.rules.iter().find(|(s, _)| *s == shape).expect("rule built for every shape").1
    }

    fn is_nonlocal(&self, element: usize) -> Option<&NonlocalModel> {
        let nl = self.nonlocal.as_ref()?;
        match nl.region {
            Some(r) if self.mesh.elements[element].region != r => None,
            _ => Some(nl),
        }
    }

    /// Child mesh of the horizon attached to Gauss point `gauss` of `element`.
    pub fn child_mesh(&self, element: usize, gauss: usize) -> Result<ChildMesh> {
        let nl = self.is_nonlocal(element).ok_or_else(|| Error::invalid(format!("element {element} is local")))?;
        let el = &self.mesh.elements[element];
        let rule = self.rule(el.shape);
        if gauss >= rule.len() {
            return Err(Error::invalid(format!("element {element} has {} Gauss points", rule.len())));
        }
        let x = self.index.geometry(element).map(rule.points[gauss]);
        let mut cm = self.child_mesh_at(nl, x)?;
        cm.owner = (element, gauss);
        Ok(cm)
    }

    fn child_mesh_at(&self, nl: &NonlocalModel, x: Vec2) -> Result<ChildMesh> {
        let region = horizon_geometry_with(&nl.horizon, x, self.mesh, self.options.facets_per_quarter)?;
        let split = match nl.horizon {
            HorizonSpec::Rect { .. } if !nl.kernel.is_singular() && !self.options.align_child_mesh => None,
            _ => Some(x),
        };
        mesh_child(&region, split, self.options.child_size)
    }

    /// Accumulate Σ c_h ∇Ψ_b(ξ_h) over the horizon of `x` into the scratch.
    fn gather_nonlocal(&self, nl: &NonlocalModel, x: Vec2, scratch: &mut Scratch) -> Result<()> {
        let cm = self.child_mesh_at(nl, x)?;
        let rules = self.child_rules.as_ref().expect("nonlocal assembly has child rules");
        let mut points = std::mem::take(&mut scratch.points);
        child_quadrature_points(&cm, &nl.kernel, rules, &mut points)?;
        let smooth = match nl.kernel {
            KernelSpec::PowerLaw { .. } => Some(nl.kernel.split_factors(x, [x[0] + 1.0, x[1] + 1.0])?.smooth),
            KernelSpec::BidirectionalPowerLaw { alpha } => Some(0.5 * KernelSpec::leg_smooth_part(alpha)),
            _ => None,
        };
        for p in &points {
            let c = match smooth {
                Some(s) => s * p.weight,
                None => nl.kernel.eval(x, p.x)? * p.weight,
            };
            if c == 0.0 {
                continue;
            }
            let b = bridge(&self.index, self.mesh, p.x)?;
            let el = &self.mesh.elements[b.element];
            let (_, grads, _) = physical_gradients(el.shape, self.index.geometry(b.element), b.xi);
            for (k, &node) in el.nodes.iter().enumerate() {
                scratch.add_grad(node, [c * grads[k][0], c * grads[k][1]]);
            }
        }
        scratch.points = points;
        Ok(())
    }

    /// ∫_H K dA over the horizon of `x` as integrated by the child quadrature.
    pub fn kernel_mass(&self, x: Vec2) -> Result<f64> {
        let nl = self.nonlocal.as_ref().ok_or_else(|| Error::invalid("problem is local"))?;
        let cm = self.child_mesh_at(nl, x)?;
        let rules = self.child_rules.as_ref().expect("nonlocal assembly has child rules");
        let mut points = Vec::new();
        child_quadrature_points(&cm, &nl.kernel, rules, &mut points)?;
        let smooth = match nl.kernel {
            KernelSpec::PowerLaw { .. } => Some(nl.kernel.split_factors(x, [x[0] + 1.0, x[1] + 1.0])?.smooth),
            KernelSpec::BidirectionalPowerLaw { alpha } => Some(0.5 * KernelSpec::leg_smooth_part(alpha)),
            _ => None,
        };
        let mut sum = 0.0;
        for p in &points {
            sum += match smooth {
                Some(s) => s * p.weight,
                None => nl.kernel.eval(x, p.x)? * p.weight,
            };
        }
        Ok(sum)
    }

    /// Nonlocal stress operator at a point: for every touched dof, the stress
    /// [σ_xx, σ_yy, σ_xy] produced by a unit value of that dof.
    pub fn stress_operator(&self, x: Vec2) -> Result<Vec<(usize, [f64; 3])>> {
        let nl = self.nonlocal.as_ref().ok_or_else(|| Error::invalid("problem is local"))?;
        let mut scratch = Scratch::new(self.mesh.node_count());
        self.gather_nonlocal(nl, x, &mut scratch)?;
        let c = self.material.voigt();
        let mut nodes = scratch.touched.clone();
        nodes.sort_unstable();
        let mut out = Vec::with_capacity(2 * nodes.len());
        for n in nodes {
            let [sx, sy] = trial_stress(&c, scratch.grad[n]);
            out.push((dof(n, 0), sx));
            out.push((dof(n, 1), sy));
        }
        Ok(out)
    }

    fn element_contribution(&self, e: usize, loads: &Loads, scratch: &mut Scratch) -> Result<ElementOutput> {
        let el = &self.mesh.elements[e];
        let geom = self.index.geometry(e);
        let rule = self.rule(el.shape);
        let m = el.nodes.len();
        let cmat = self.material.voigt();
        let nl = self.is_nonlocal(e);
        let mut mass = vec![0.0; m * m];
        let mut force = vec![0.0; 2 * m];
        for (g, (xi, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let (s, test, det) = physical_gradients(el.shape, geom, *xi);
            let wd = w * det;
            let x = geom.map(*xi);
            for a in 0..m {
                for b in 0..m {
                    mass[a * m + b] += wd * self.material.rho * s.values[a] * s.values[b];
                }
            }
            if let Some(body) = loads.body {
                let f = body(x);
                for a in 0..m {
                    force[2 * a] += wd * self.material.rho * f[0] * s.values[a];
                    force[2 * a + 1] += wd * self.material.rho * f[1] * s.values[a];
                }
            }
            match nl {
                Some(nl) => self
                    .gather_nonlocal(nl, x, scratch)
                    .map_err(|err| Error::AtGaussPoint { element: e, gauss: g, source: Box::new(err) })?,
                None => {
                    for (k, &node) in el.nodes.iter().enumerate() {
                        scratch.add_grad(node, test[k]);
                    }
                }
            }
            // K_ab += w|J| G_aᵀ C B_b with the full (unhalved) shear test row
            let touched = std::mem::take(&mut scratch.touched);
            for &b in &touched {
                let [sx, sy] = trial_stress(&cmat, scratch.grad[b]);
                if !scratch.acc_mark[b] {
                    scratch.acc_mark[b] = true;
                    scratch.acc_touched.push(b);
                }
                let base = b * 4 * MAX_NODES;
                for a in 0..m {
                    let [ax, ay] = test[a];
                    let blk = &mut scratch.acc[base + 4 * a..base + 4 * a + 4];
                    blk[0] += wd * (ax * sx[0] + ay * sx[2]);
                    blk[1] += wd * (ax * sy[0] + ay * sy[2]);
                    blk[2] += wd * (ay * sx[1] + ax * sx[2]);
                    blk[3] += wd * (ay * sy[1] + ax * sy[2]);
                }
            }
            scratch.touched = touched;
            scratch.clear_grads();
        }
        scratch.acc_touched.sort_unstable();
        let mut k = Vec::with_capacity(4 * m * scratch.acc_touched.len());
        for a in 0..m {
            let na = el.nodes[a];
            for i in 0..2 {
                for &b in &scratch.acc_touched {
                    let blk = &scratch.acc[b * 4 * MAX_NODES + 4 * a..b * 4 * MAX_NODES + 4 * a + 4];
                    k.push((dof(na, i) as u32, dof(b, 0) as u32, blk[2 * i]));
                    k.push((dof(na, i) as u32, dof(b, 1) as u32, blk[2 * i + 1]));
                }
            }
        }
        for &b in &scratch.acc_touched {
            scratch.acc[b * 4 * MAX_NODES..b * 4 * MAX_NODES + 4 * m].fill(0.0);
            scratch.acc_mark[b] = false;
        }
        scratch.acc_touched.clear();
        let mut mt = Vec::with_capacity(2 * m * m);
        for a in 0..m {
            for b in 0..m {
                for i in 0..2 {
                    mt.push((dof(el.nodes[a], i) as u32, dof(el.nodes[b], i) as u32, mass[a * m + b]));
                }
            }
        }
        Ok(ElementOutput { k, m: mt, f: force })
    }

    /// Assemble K, M, F and the Dirichlet list.
    pub fn assemble(&self, loads: &Loads) -> Result<GlobalSystem> {
        let n_el = self.mesh.elements.len();
        let n_nodes = self.mesh.node_count();
        let run = || -> Result<Vec<ElementOutput>> {
            (0..n_el)
                .into_par_iter()
                .map_init(|| Scratch::new(n_nodes), |scratch, e| self.element_contribution(e, loads, scratch))
                .collect()
        };
        let outputs = match self.options.workers {
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?
                .install(run)?,
            None => run()?,
        };
        let n = self.mesh.dof_count();
        let mut f = vec![0.0; n];
        let mut kb = Vec::with_capacity(n_el);
        let mut mb = Vec::with_capacity(n_el);
        for (e, out) in outputs.into_iter().enumerate() {
            for (a, &node) in self.mesh.elements[e].nodes.iter().enumerate() {
                f[dof(node, 0)] += out.f[2 * a];
                f[dof(node, 1)] += out.f[2 * a + 1];
            }
            kb.push(out.k);
            mb.push(out.m);
        }
        self.add_tractions(loads, &mut f);
        Ok(GlobalSystem {
            k: CsrMatrix::from_triplet_blocks(n, n, &kb),
            m: CsrMatrix::from_triplet_blocks(n, n, &mb),
            f,
            dirichlet: self.dirichlet_values(loads),
        })
    }

    fn add_tractions(&self, loads: &Loads, f: &mut [f64]) {
        let Some(traction) = loads.traction else { return };
        for seg in self.mesh.boundary.iter().filter(|s| s.kind == BoundaryKind::Traction) {
            let nn = seg.nodes.len();
            let a = self.mesh.coords(seg.nodes[0]);
            let b = self.mesh.coords(seg.nodes[1]);
            let half = 0.5 * ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let rule = gauss_legendre(nn).expect("2 or 3 points");
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let t = p[0];
                let x = [a[0] + 0.5 * (1.0 + t) * (b[0] - a[0]), a[1] + 0.5 * (1.0 + t) * (b[1] - a[1])];
                let tr = traction(x, seg.normal);
                let n = edge_shape(nn, t);
                for k in 0..nn {
                    f[dof(seg.nodes[k], 0)] += w * half * tr[0] * n[k];
                    f[dof(seg.nodes[k], 1)] += w * half * tr[1] * n[k];
                }
            }
        }
    }

    fn dirichlet_values(&self, loads: &Loads) -> Vec<(usize, f64)> {
        let mut fixed = BTreeMap::new();
        for seg in self.mesh.boundary.iter().filter(|s| s.kind == BoundaryKind::Dirichlet) {
            for &node in &seg.nodes {
                let u = loads.dirichlet.map_or([0.0, 0.0], |d| d(self.mesh.coords(node)));
                fixed.insert(dof(node, 0), u[0]);
                fixed.insert(dof(node, 1), u[1]);
            }
        }
        fixed.into_iter().collect()
    }
}

struct ElementOutput {
    k: Vec<Triplet>,
    m: Vec<Triplet>,
    f: Vec<f64>,
}

/// Stresses caused by unit x- and y-displacements of a node whose
/// (kernel-weighted) gradient is `g`.
fn trial_stress(c: &[[f64; 3]; 3], g: Vec2) -> [[f64; 3]; 2] {
    let ex = [g[0], 0.0, 0.5 * g[1]];
    let ey = [0.0, g[1], 0.5 * g[0]];
    let mul = |e: [f64; 3]| {
        [
            c[0][0] * e[0] + c[0][1] * e[1] + c[0][2] * e[2],
            c[1][0] * e[0] + c[1][1] * e[1] + c[1][2] * e[2],
            c[2][0] * e[0] + c[2][1] * e[1] + c[2][2] * e[2],
        ]
    };
    [mul(ex), mul(ey)]
}

/// One-shot assembly.
pub fn assemble(problem: &Problem, loads: &Loads) -> Result<GlobalSystem> {
    Assembler::new(problem)?.assemble(loads)
}
