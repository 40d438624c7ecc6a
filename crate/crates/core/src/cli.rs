//! Config-driven runs, sweeps and field export for the command-line tool.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, AssemblyOptions, Material, NonlocalModel, Problem};
use crate::child::{ChildMesh, ChildRuleSizes};
use crate::error::{Error, Result};
use crate::kernels::{HorizonSpec, KernelSpec};
use crate::manufactured::{refinement_sweep, run_case, CaseKind, CaseStudy, RefinementKind};
use crate::mesh::{build_structured_quad_mesh, ParentMesh};
use crate::shape::{ElementShape, Vec2};
use crate::showcase::{
    kink_profile, run_annulus, run_complexity, run_inclusion, run_plane_strain, AnnulusConfig, InclusionConfig,
    PlaneStrainConfig, ShowcaseRun,
};
use crate::solver::{field_peaks, SolveMethod, SolverOptions};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// case1, case2, annulus, plane_strain or inclusion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_out: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub body_force: Option<[f64; 2]>,
    /// Inclusion only: `false` drops the nonlocal region.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlocal: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution_ratio: Option<f64>,
    /// l/Δc; alternative to `resolution_ratio`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub child_resolution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub child_size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_radial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_angular: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core_rings: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_layers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    /// 0 picks order + 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent_points: Option<usize>,
    /// 0 picks order + 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legendre: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triangle_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub facets_per_quarter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub align_child_mesh: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// direct or iterative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// 0 uses every available core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// child_resolution, parent_order, parent_elements or complexity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    /// Resolution ratios of the complexity grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ratios: Vec<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// (parent element, Gauss point) whose child mesh is written out.
    pub dump_child_mesh: Option<(usize, usize)>,
}

/// Parse the `element:gauss` argument of `--dump-child-mesh`.
pub fn parse_child_mesh_target(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("--dump-child-mesh expects ELEMENT:GAUSS, got `{s}`"));
    let (e, g) = s.split_once(':').ok_or_else(bad)?;
    Ok((e.trim().parse().map_err(|_| bad())?, g.trim().parse().map_err(|_| bad())?))
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Numeric(_) | Error::Domain { .. } => 2,
        Error::Bridging { .. } | Error::Alignment { .. } => 3,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Case(CaseStudy),
    Annulus(AnnulusConfig),
    PlaneStrain(PlaneStrainConfig),
    Inclusion(InclusionConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepPlan {
    Refinement { kind: RefinementKind, levels: Vec<f64> },
    ParentElements(Vec<usize>),
    Complexity { parent_elements: Vec<usize>, ratios: Vec<f64> },
}

/// Fully defaulted configuration ready to execute.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub plan: Plan,
    pub sweep: Option<SweepPlan>,
    pub solver: SolverOptions,
    pub out: PathBuf,
    pub workers: usize,
    /// The config with every default filled in.
    pub manifest: RunConfig,
}

fn positive_usize(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("sweep.values: {what} must be positive integers, got {v}")))
    }
}

/// Fill defaults, validate and reject keys that do not apply to the problem.
pub fn resolve(cfg: &RunConfig, overrides: &Overrides) -> Result<Resolved> {
    let p = &cfg.problem;
    let m = &cfg.mesh;
    let q = &cfg.quadrature;
    let kind = p.kind.clone().ok_or_else(|| Error::Config("missing key problem.kind".into()))?;
    let workers = overrides.workers.or(cfg.output.workers).unwrap_or(0);
    let worker_opt = (workers > 0).then_some(workers);
    let base = ChildRuleSizes::default();
    let child_rules = ChildRuleSizes {
        legendre: q.legendre.unwrap_or(0),
        jacobi: q.jacobi.unwrap_or(base.jacobi),
        triangle_order: q.triangle_order.unwrap_or(base.triangle_order),
    };
    let material = {
        let d = Material::default();
        Material {
            mu: cfg.material.mu.unwrap_or(d.mu),
            lambda: cfg.material.lambda.unwrap_or(d.lambda),
            rho: cfg.material.rho.unwrap_or(d.rho),
        }
    };
    let solver = {
        let d = SolverOptions::default();
        let method = match cfg.solver.method.as_deref() {
            None | Some("direct") => SolveMethod::Direct,
            Some("iterative") => SolveMethod::Iterative,
            Some(other) => return Err(Error::Config(format!("solver.method: expected direct or iterative, got `{other}`"))),
        };
        SolverOptions {
            method,
            tolerance: cfg.solver.tolerance.unwrap_or(d.tolerance),
            max_iterations: cfg.solver.max_iterations.unwrap_or(d.max_iterations),
        }
    };

    let mut out = RunConfig {
        material: MaterialSection { mu: Some(material.mu), lambda: Some(material.lambda), rho: Some(material.rho) },
        solver: SolverSection {
            method: Some(if solver.method == SolveMethod::Direct { "direct" } else { "iterative" }.into()),
            tolerance: Some(solver.tolerance),
            max_iterations: Some(solver.max_iterations),
        },
        ..RunConfig::default()
    };
    out.problem.kind = Some(kind.clone());
    out.quadrature.jacobi = Some(child_rules.jacobi);
    out.quadrature.triangle_order = Some(child_rules.triangle_order);

    let plan = match kind.as_str() {
        "case1" | "case2" => {
            let (ck, param) = if kind == "case1" {
                let tau = p.tau.unwrap_or(0.002);
                out.problem.tau = Some(tau);
                (CaseKind::BiExp, tau)
            } else {
                let alpha = p.alpha.unwrap_or(0.6);
                out.problem.alpha = Some(alpha);
                (CaseKind::PowerLaw, alpha)
            };
            let horizon = p.horizon.unwrap_or(if kind == "case1" { 0.2 } else { 0.5 });
            let mut case = CaseStudy::new(ck, param, horizon, m.parent_elements.unwrap_or(16));
            case.side = p.side.unwrap_or(case.side);
            case.order = m.order.unwrap_or(case.order);
            case.material = material;
            case.child_rules = child_rules;
            case.parent_rule = q.parent_points.filter(|&n| n > 0);
            case.align_child_mesh = q.align_child_mesh.unwrap_or(case.align_child_mesh);
            case.workers = worker_opt;
            case.solver = solver;
            case = match (m.resolution_ratio, m.child_resolution) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config("mesh.resolution_ratio and mesh.child_resolution are mutually exclusive".into()))
                }
                (Some(r), None) => CaseStudy { resolution_ratio: r, ..case },
                (None, Some(n)) => case.with_child_resolution(n),
                (None, None) => case,
            };
            let key = if kind == "case1" { "problem.tau" } else { "problem.alpha" };
            case.kernel().validate().map_err(|e| Error::Config(format!("{key}: {e}")))?;
            case.validate().map_err(|e| Error::Config(e.to_string()))?;
            out.problem.horizon = Some(case.horizon);
            out.problem.side = Some(case.side);
            out.mesh.parent_elements = Some(case.parent_elements);
            out.mesh.resolution_ratio = Some(case.resolution_ratio);
            out.mesh.order = Some(case.order);
            out.quadrature.parent_points = Some(case.parent_rule.unwrap_or(0));
            out.quadrature.legendre = Some(case.child_rules.legendre);
            out.quadrature.align_child_mesh = Some(case.align_child_mesh);
            if m.child_resolution.is_some() {
                out.mesh.child_resolution = m.child_resolution;
                out.mesh.resolution_ratio = None;
            }
            Plan::Case(case)
        }
        "annulus" => {
            let d = AnnulusConfig::default();
            let a = AnnulusConfig {
                alpha: p.alpha.unwrap_or(d.alpha),
                horizon: p.horizon.unwrap_or(d.horizon),
                r_in: p.r_in.unwrap_or(d.r_in),
                r_out: p.r_out.unwrap_or(d.r_out),
                traction: p.traction.unwrap_or(d.traction),
                n_radial: m.n_radial.unwrap_or(d.n_radial),
                n_angular: m.n_angular.unwrap_or(d.n_angular),
                child_size: m.child_size.unwrap_or(d.child_size),
                child_rules: child_rules.resolved(1),
                workers: worker_opt,
                material,
            };
            a.nonlocal().map_err(|e| Error::Config(format!("problem.alpha: {e}")))?;
            out.problem.alpha = Some(a.alpha);
            out.problem.horizon = Some(a.horizon);
            out.problem.r_in = Some(a.r_in);
            out.problem.r_out = Some(a.r_out);
            out.problem.traction = Some(a.traction);
            out.mesh.n_radial = Some(a.n_radial);
            out.mesh.n_angular = Some(a.n_angular);
            out.mesh.child_size = Some(a.child_size);
            out.quadrature.legendre = Some(a.child_rules.legendre);
            Plan::Annulus(a)
        }
        "plane_strain" => {
            let d = PlaneStrainConfig::default();
            let c = PlaneStrainConfig {
                tau1: p.tau1.unwrap_or(d.tau1),
                tau2: p.tau2.unwrap_or(d.tau2),
                horizon: p.horizon.unwrap_or(d.horizon),
                side: p.side.unwrap_or(d.side),
                parent_elements: m.parent_elements.unwrap_or(d.parent_elements),
                child_size: m.child_size.unwrap_or(d.child_size),
                body_force: p.body_force.unwrap_or(d.body_force),
                child_rules: child_rules.resolved(1),
                facets_per_quarter: q.facets_per_quarter.unwrap_or(d.facets_per_quarter),
                workers: worker_opt,
                material,
            };
            c.kernel().validate().map_err(|e| Error::Config(format!("problem.tau1/tau2: {e}")))?;
            out.problem.tau1 = Some(c.tau1);
            out.problem.tau2 = Some(c.tau2);
            out.problem.horizon = Some(c.horizon);
            out.problem.side = Some(c.side);
            out.problem.body_force = Some(c.body_force);
            out.mesh.parent_elements = Some(c.parent_elements);
            out.mesh.child_size = Some(c.child_size);
            out.quadrature.facets_per_quarter = Some(c.facets_per_quarter);
            out.quadrature.legendre = Some(c.child_rules.legendre);
            Plan::PlaneStrain(c)
        }
        "inclusion" => {
            let d = InclusionConfig::default();
            let c = InclusionConfig {
                tau1: p.tau1.unwrap_or(d.tau1),
                tau2: p.tau2.unwrap_or(d.tau2),
                radius: p.radius.unwrap_or(d.radius),
                side: p.side.unwrap_or(d.side),
                core_rings: m.core_rings.unwrap_or(d.core_rings),
                n_angular: m.n_angular.unwrap_or(d.n_angular),
                outer_layers: m.outer_layers.unwrap_or(d.outer_layers),
                child_size: m.child_size.unwrap_or(d.child_size),
                nonlocal: p.nonlocal.unwrap_or(d.nonlocal),
                child_rules: child_rules.resolved(1),
                facets_per_quarter: q.facets_per_quarter.unwrap_or(d.facets_per_quarter),
                workers: worker_opt,
                material,
            };
            KernelSpec::Rational { tau1: c.tau1, tau2: c.tau2 }
                .validate()
                .map_err(|e| Error::Config(format!("problem.tau1/tau2: {e}")))?;
            out.problem.tau1 = Some(c.tau1);
            out.problem.tau2 = Some(c.tau2);
            out.problem.radius = Some(c.radius);
            out.problem.side = Some(c.side);
            out.problem.nonlocal = Some(c.nonlocal);
            out.mesh.core_rings = Some(c.core_rings);
            out.mesh.n_angular = Some(c.n_angular);
            out.mesh.outer_layers = Some(c.outer_layers);
            out.mesh.child_size = Some(c.child_size);
            out.quadrature.facets_per_quarter = Some(c.facets_per_quarter);
            out.quadrature.legendre = Some(c.child_rules.legendre);
            Plan::Inclusion(c)
        }
        other => {
            return Err(Error::Config(format!(
                "problem.kind: expected case1, case2, annulus, plane_strain or inclusion, got `{other}`"
            )))
        }
    };

    let sweep = match &cfg.sweep {
        None => None,
        Some(s) => {
            if !matches!(plan, Plan::Case(_)) {
                return Err(Error::Config("sweeps are available for case1 and case2 only".into()));
            }
            let sk = s.kind.clone().ok_or_else(|| Error::Config("missing key sweep.kind".into()))?;
            let mut echo = SweepSection { kind: Some(sk.clone()), values: s.values.clone(), ratios: Vec::new() };
            if s.values.is_empty() {
                return Err(Error::Config("sweep.values must not be empty".into()));
            }
            let plan = match sk.as_str() {
                "child_resolution" => SweepPlan::Refinement { kind: RefinementKind::ChildH, levels: s.values.clone() },
                "parent_order" => {
                    for &v in &s.values {
                        if v != 1.0 && v != 2.0 {
                            return Err(Error::Config(format!("sweep.values: element order must be 1 or 2, got {v}")));
                        }
                    }
                    SweepPlan::Refinement { kind: RefinementKind::ParentP, levels: s.values.clone() }
                }
                "parent_elements" => SweepPlan::ParentElements(
                    s.values.iter().map(|&v| positive_usize(v, "parent element counts")).collect::<Result<_>>()?,
                ),
                "complexity" => {
                    let ratios = if s.ratios.is_empty() { vec![1.0, 2.0, 3.0] } else { s.ratios.clone() };
                    if ratios.iter().any(|r| !(*r > 0.0)) {
                        return Err(Error::Config("sweep.ratios must be positive".into()));
                    }
                    echo.ratios = ratios.clone();
                    SweepPlan::Complexity {
                        parent_elements: s
                            .values
                            .iter()
                            .map(|&v| positive_usize(v, "parent element counts"))
                            .collect::<Result<_>>()?,
                        ratios,
                    }
                }
                other => {
                    return Err(Error::Config(format!(
                        "sweep.kind: expected child_resolution, parent_order, parent_elements or complexity, got `{other}`"
                    )))
                }
            };
            if !s.ratios.is_empty() && !matches!(plan, SweepPlan::Complexity { .. }) {
                return Err(Error::Config("key sweep.ratios applies to complexity sweeps only".into()));
            }
            out.sweep = Some(echo);
            Some(plan)
        }
    };

    let out_dir = overrides
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    out.output.dir = Some(out_dir.to_string_lossy().into_owned());
    out.output.workers = Some(workers);
    reject_inapplicable(cfg, &out)?;
    Ok(Resolved { plan, sweep, solver, out: out_dir, workers, manifest: out })
}

fn keys(cfg: &RunConfig) -> BTreeSet<String> {
    let value = toml::Value::try_from(cfg).expect("config converts to a TOML value");
    let mut set = BTreeSet::new();
    if let toml::Value::Table(sections) = value {
        for (name, section) in sections {
            if let toml::Value::Table(entries) = section {
                for key in entries.keys() {
                    set.insert(format!("{name}.{key}"));
                }
            }
        }
    }
    set
}

fn reject_inapplicable(given: &RunConfig, resolved: &RunConfig) -> Result<()> {
    let used = keys(resolved);
    match keys(given).into_iter().find(|k| !used.contains(k)) {
        Some(k) => Err(Error::Config(format!(
            "key {k} does not apply to problem kind `{}`",
            resolved.problem.kind.as_deref().unwrap_or("")
        ))),
        None => Ok(()),
    }
}

/// Per-node `x,y,ux,uy` rows.
pub fn field_csv(mesh: &ParentMesh, u: &[Vec2]) -> String {
    let mut s = String::from("x,y,ux,uy\n");
    for (n, d) in mesh.nodes.iter().zip(u) {
        let _ = writeln!(s, "{},{},{},{}", n.coords[0], n.coords[1], d[0], d[1]);
    }
    s
}

/// Parse rows written by [`field_csv`].
pub fn parse_field_csv(text: &str) -> Result<Vec<[f64; 4]>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let parse_err = || Error::Parse { line: i + 1, message: format!("expected four numbers, got `{line}`") };
        let vals: Vec<f64> = line.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| parse_err())?;
        rows.push(<[f64; 4]>::try_from(vals).map_err(|_| parse_err())?);
    }
    Ok(rows)
}

fn vtk_cell_type(shape: ElementShape) -> u8 {
    match shape {
        ElementShape::Tri3 => 5,
        ElementShape::Quad4 => 9,
        ElementShape::Tri6 => 22,
        ElementShape::Quad9 => 28,
    }
}

/// Legacy ASCII unstructured grid with point displacement and magnitude.
pub fn field_vtk(mesh: &ParentMesh, u: &[Vec2]) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\nnonlocal-fem displacement\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.nodes.len());
    for n in &mesh.nodes {
        let _ = writeln!(s, "{} {} 0", n.coords[0], n.coords[1]);
    }
    let size: usize = mesh.elements.iter().map(|e| e.nodes.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.elements.len(), size);
    for e in &mesh.elements {
        s.push_str(&e.nodes.len().to_string());
        for n in &e.nodes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = writeln!(s, "{}", vtk_cell_type(e.shape));
    }
    let _ = writeln!(s, "POINT_DATA {}", mesh.nodes.len());
    s.push_str("VECTORS displacement double\n");
    for d in u {
        let _ = writeln!(s, "{} {} 0", d[0], d[1]);
    }
    s.push_str("SCALARS magnitude double 1\nLOOKUP_TABLE default\n");
    for d in u {
        let _ = writeln!(s, "{}", d[0].hypot(d[1]));
    }
    s
}

/// Child mesh cells (and 1D segments as lines) as a legacy unstructured grid.
pub fn child_mesh_vtk(cm: &ChildMesh) -> String {
    let mut s = String::from("# vtk DataFile Version 3.0\nnonlocal-fem child mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let seg_base = cm.nodes.len();
    let _ = writeln!(s, "POINTS {} double", seg_base + 2 * cm.segments.len());
    for p in &cm.nodes {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    for seg in &cm.segments {
        let (a, b) = if seg.axis == 0 { ([seg.t0, seg.fixed], [seg.t1, seg.fixed]) } else { ([seg.fixed, seg.t0], [seg.fixed, seg.t1]) };
        let _ = writeln!(s, "{} {} 0\n{} {} 0", a[0], a[1], b[0], b[1]);
    }
    let n_cells = cm.elements.len() + cm.segments.len();
    let size: usize = cm.elements.iter().map(|e| e.shape.corner_count() + 1).sum::<usize>() + 3 * cm.segments.len();
    let _ = writeln!(s, "CELLS {n_cells} {size}");
    for e in &cm.elements {
        let nc = e.shape.corner_count();
        s.push_str(&nc.to_string());
        for n in &e.nodes[..nc] {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    for k in 0..cm.segments.len() {
        let _ = writeln!(s, "2 {} {}", seg_base + 2 * k, seg_base + 2 * k + 1);
    }
    let _ = writeln!(s, "CELL_TYPES {n_cells}");
    for e in &cm.elements {
        let _ = writeln!(s, "{}", if e.shape.is_quad() { 9 } else { 5 });
    }
    for _ in &cm.segments {
        s.push_str("3\n");
    }
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn case_row(s: &mut String, case: &CaseStudy, max_ux: f64, er: f64, delta: Option<f64>) {
    let delta = delta.map(|d| d.to_string()).unwrap_or_default();
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{}",
        case.parent_elements,
        case.resolution_ratio,
        case.child_resolution(),
        case.order,
        100.0 * max_ux,
        er,
        delta
    );
}

const CASE_HEADER: &str = "M,r,N,order,ū_x×100,Er%,Δ%\n";

fn showcase_report(run: &ShowcaseRun, extra: &[(&str, f64)]) -> String {
    let (max_ux, _, max_abs_ux, max_norm, _) = field_peaks(&run.result.displacements);
    let mut s = String::from("quantity,value\n");
    let _ = writeln!(s, "max_ux,{max_ux}\nmax_abs_ux,{max_abs_ux}\nmax_norm,{max_norm}");
    if let Some(local) = &run.local {
        let (lx, _, lax, ln, _) = field_peaks(&local.displacements);
        let _ = writeln!(s, "local_max_ux,{lx}\nlocal_max_abs_ux,{lax}\nlocal_max_norm,{ln}");
    }
    let _ = writeln!(s, "condition_estimate,{}", run.result.stats.condition_estimate);
    for (k, v) in extra {
        let _ = writeln!(s, "{k},{v}");
    }
    s
}

/// Largest |u_x − x| over nodes farther than `distance` from the centre.
pub fn far_field_deviation(run: &ShowcaseRun, center: Vec2, distance: f64) -> f64 {
    run.mesh
        .nodes
        .iter()
        .zip(&run.result.displacements)
        .filter(|(n, _)| (n.coords[0] - center[0]).hypot(n.coords[1] - center[1]) > distance)
        .fold(0.0, |m, (n, u)| m.max((u[0] - n.coords[0]).abs()))
}

/// Solved single run, before export.
#[derive(Debug, Clone)]
pub struct Solved {
    pub mesh: ParentMesh,
    pub displacements: Vec<Vec2>,
    /// Peak-error percentage for validation cases.
    pub error_percent: Option<f64>,
    pub report: String,
}

/// Solve a resolved single-run plan without touching the filesystem.
pub fn execute(r: &Resolved) -> Result<Solved> {
    match &r.plan {
        Plan::Case(case) => {
            let rep = run_case(case)?;
            let mesh = build_structured_quad_mesh(case.side, case.side, case.parent_elements, case.parent_elements, case.order)?;
            let mut report = String::from(CASE_HEADER);
            case_row(&mut report, case, rep.max_ux, rep.error_percent, None);
            Ok(Solved { mesh, displacements: rep.result.displacements, error_percent: Some(rep.error_percent), report })
        }
        Plan::Annulus(a) => {
            let run = run_annulus(a, &r.solver)?;
            let report = showcase_report(&run, &[]);
            Ok(Solved { mesh: run.mesh, displacements: run.result.displacements, error_percent: None, report })
        }
        Plan::PlaneStrain(c) => {
            let run = run_plane_strain(c, &r.solver)?;
            let report = showcase_report(&run, &[]);
            Ok(Solved { mesh: run.mesh, displacements: run.result.displacements, error_percent: None, report })
        }
        Plan::Inclusion(c) => {
            let run = run_inclusion(c, &r.solver)?;
            let k = kink_profile(&run, c.radius, 16, 0.01 * c.side, 2.0 * c.radius)?;
            let far = far_field_deviation(&run, [0.5 * c.side, 0.5 * c.side], 3.0 * c.radius);
            let report = showcase_report(
                &run,
                &[
                    ("interface_slope_jump", k.interface_jump),
                    ("far_field_slope_variation", k.far_field_variation),
                    ("far_field_deviation", far),
                ],
            );
            Ok(Solved { mesh: run.mesh, displacements: run.result.displacements, error_percent: None, report })
        }
    }
}

fn dump_child(r: &Resolved, mesh: &ParentMesh, target: (usize, usize)) -> Result<()> {
    let (nonlocal, options) = match &r.plan {
        Plan::Case(case) => (
            Some(NonlocalModel { kernel: case.kernel(), horizon: HorizonSpec::Rect { half_width: case.horizon }, region: None }),
            case.assembly_options(),
        ),
        Plan::Annulus(a) => (a.nonlocal()?, a.options()),
        Plan::PlaneStrain(c) => (
            Some(NonlocalModel { kernel: c.kernel(), horizon: HorizonSpec::Circle { radius: c.horizon }, region: None }),
            c.options(),
        ),
        Plan::Inclusion(c) => (
            c.nonlocal.then_some(NonlocalModel {
                kernel: KernelSpec::Rational { tau1: c.tau1, tau2: c.tau2 },
                horizon: HorizonSpec::FullRegion { region: 1 },
                region: Some(1),
            }),
            AssemblyOptions {
                child_size: c.child_size,
                child_rules: c.child_rules,
                facets_per_quarter: c.facets_per_quarter,
                ..AssemblyOptions::default()
            },
        ),
    };
    if target.0 >= mesh.elements.len() {
        return Err(Error::Config(format!("--dump-child-mesh: mesh has {} elements", mesh.elements.len())));
    }
    let problem = Problem { mesh, material: Material::default(), nonlocal, options };
    let cm = Assembler::new(&problem)?.child_mesh(target.0, target.1).map_err(|e| Error::Config(format!("--dump-child-mesh: {e}")))?;
    write(&r.out, &format!("child_mesh_{}_{}.vtk", target.0, target.1), &child_mesh_vtk(&cm))
}

/// Execute a single run and write field.csv, field.vtk, report.csv and
/// manifest.toml into the output directory.
pub fn cmd_run(cfg: &RunConfig, overrides: &Overrides) -> Result<Resolved> {
    let r = resolve(cfg, overrides)?;
    fs::create_dir_all(&r.out).map_err(|e| Error::Io(format!("{}: {e}", r.out.display())))?;
    let solved = execute(&r)?;
    if let Some(t) = overrides.dump_child_mesh {
        dump_child(&r, &solved.mesh, t)?;
    }
    write(&r.out, "field.csv", &field_csv(&solved.mesh, &solved.displacements))?;
    write(&r.out, "field.vtk", &field_vtk(&solved.mesh, &solved.displacements))?;
    write(&r.out, "report.csv", &solved.report)?;
    write(&r.out, "manifest.toml", &r.manifest.to_toml())?;
    Ok(r)
}

/// Execute a sweep and write report.csv (plus timing.csv for complexity
/// sweeps) and manifest.toml.
pub fn cmd_sweep(cfg: &RunConfig, overrides: &Overrides) -> Result<Resolved> {
    let r = resolve(cfg, overrides)?;
    let (Plan::Case(case), Some(sweep)) = (&r.plan, &r.sweep) else {
        return Err(Error::Config("sweep needs a [sweep] section and a case1 or case2 problem".into()));
    };
    fs::create_dir_all(&r.out).map_err(|e| Error::Io(format!("{}: {e}", r.out.display())))?;
    let mut report = String::new();
    match sweep {
        SweepPlan::Refinement { kind, levels } => {
            report.push_str("level,");
            report.push_str(CASE_HEADER.trim_end());
            report.push_str(",converged\n");
            let rows = refinement_sweep(case, *kind, levels)?;
            for row in &rows {
                let c = match kind {
                    RefinementKind::ChildH => case.with_child_resolution(row.level),
                    RefinementKind::ParentP => CaseStudy { order: row.level as usize, ..*case },
                };
                let mut line = String::new();
                case_row(&mut line, &c, row.report.max_ux, row.report.error_percent, row.report.delta_percent);
                let _ = writeln!(report, "{},{},{}", row.level, line.trim_end(), row.converged);
            }
            if let (Some(last), Some(&level)) = (rows.last(), levels.last()) {
                let order = if *kind == RefinementKind::ParentP { level as usize } else { case.order };
                let mesh = build_structured_quad_mesh(case.side, case.side, case.parent_elements, case.parent_elements, order)?;
                write(&r.out, "field.csv", &field_csv(&mesh, &last.report.result.displacements))?;
                write(&r.out, "field.vtk", &field_vtk(&mesh, &last.report.result.displacements))?;
            }
        }
        SweepPlan::ParentElements(ms) => {
            report.push_str(CASE_HEADER);
            for &m in ms {
                let c = CaseStudy { parent_elements: m, ..*case };
                let rep = run_case(&c)?;
                case_row(&mut report, &c, rep.max_ux, rep.error_percent, None);
            }
        }
        SweepPlan::Complexity { parent_elements, ratios } => {
            let workers = if r.workers == 0 { 1 } else { r.workers };
            let cx = run_complexity(parent_elements, ratios, workers)?;
            report.push_str("M,r,Er%,predicted_sum\n");
            let mut timing = String::from("M,r,seconds\n");
            for run in &cx.runs {
                let _ = writeln!(report, "{},{},{},{}", run.parent_elements, run.resolution_ratio, run.error_percent, run.predicted_sum);
                let _ = writeln!(timing, "{},{},{}", run.parent_elements, run.resolution_ratio, run.seconds);
            }
            let _ = writeln!(timing, "\nworkers,{}\nparent_exponent,{}\nratio_exponent,{}", cx.workers, cx.parent_exponent, cx.ratio_exponent);
            write(&r.out, "timing.csv", &timing)?;
        }
    }
    write(&r.out, "report.csv", &report)?;
    write(&r.out, "manifest.toml", &r.manifest.to_toml())?;
    Ok(r)
}
