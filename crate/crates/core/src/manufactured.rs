//! Manufactured-solution verification on the unit square.
//!
//! The assumed field u = ((Lx - x²)(Ly - y²), 0) is pushed through the
//! nonlocal law with adaptive quadrature to obtain body loads, which are then
//! handed to the two-scale solver. The peak of the recovered u_x is compared
//! with the exact peak L⁴/16.

use std::sync::Mutex;

use crate::assembly::{assemble, AssemblyOptions, Loads, Material, NonlocalModel, Problem};
use crate::child::ChildRuleSizes;
use crate::error::{Error, Result};
use crate::kernels::{HorizonSpec, KernelSpec};
use crate::mesh::build_structured_quad_mesh;
use crate::quadrature::adaptive::{integrate, integrate_left_singular};
use crate::shape::Vec2;
use crate::solver::{field_metrics, field_peaks, solve_static, SolveResult, SolverOptions};
use crate::special::gamma;

/// Δ below which two successive refinements count as converged, in percent.
pub const CONVERGENCE_THRESHOLD: f64 = 2.0;

/// Closed-form field vanishing on the boundary of [0, L]².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceField {
    pub side: f64,
}

impl ReferenceField {
    fn g(&self, s: f64) -> f64 {
        self.side * s - s * s
    }

    fn dg(&self, s: f64) -> f64 {
        self.side - 2.0 * s
    }

    pub fn displacement(&self, x: Vec2) -> Vec2 {
        [self.g(x[0]) * self.g(x[1]), 0.0]
    }

    /// [[∂u_x/∂x, ∂u_x/∂y], [∂u_y/∂x, ∂u_y/∂y]]
    pub fn gradient(&self, x: Vec2) -> [[f64; 2]; 2] {
        [[self.dg(x[0]) * self.g(x[1]), self.g(x[0]) * self.dg(x[1])], [0.0, 0.0]]
    }

    pub fn max_ux(&self) -> f64 {
        self.side.powi(4) / 16.0
    }

    pub fn argmax(&self) -> Vec2 {
        [0.5 * self.side, 0.5 * self.side]
    }
}

pub fn reference_displacement(x: f64, y: f64, side: f64) -> Vec2 {
    ReferenceField { side }.displacement([x, y])
}

/// −∇·(C:ε) of the reference field; the oracle's local limit.
pub fn local_body_load(field: &ReferenceField, material: &Material, x: Vec2) -> Vec2 {
    let (mu, la) = (material.mu, material.lambda);
    let (gx, gy) = (field.g(x[0]), field.g(x[1]));
    let (dx, dy) = (field.dg(x[0]), field.dg(x[1]));
    [(2.0 * (2.0 * mu + la) * gy + 2.0 * mu * gx) / material.rho, -(mu + la) * dx * dy / material.rho]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    BiExp,
    PowerLaw,
}

/// One validation run on [0, L]² with a square horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseStudy {
    pub kind: CaseKind,
    /// τ for the bi-exponential kernel, α for the power law.
    pub parameter: f64,
    /// Horizon half-width.
    pub horizon: f64,
    pub side: f64,
    /// Parent elements per side.
    pub parent_elements: usize,
    /// Parent-to-child element size ratio.
    pub resolution_ratio: f64,
    pub order: usize,
    pub material: Material,
    pub child_rules: ChildRuleSizes,
    pub parent_rule: Option<usize>,
    pub align_child_mesh: bool,
    pub workers: Option<usize>,
    pub solver: SolverOptions,
}

impl CaseStudy {
    pub fn new(kind: CaseKind, parameter: f64, horizon: f64, parent_elements: usize) -> Self {
        CaseStudy {
            kind,
            parameter,
            horizon,
            side: 1.0,
            parent_elements,
            resolution_ratio: 1.0,
            order: 1,
            material: Material::default(),
            child_rules: ChildRuleSizes { legendre: 0, ..ChildRuleSizes::default() },
            parent_rule: None,
            align_child_mesh: true,
            workers: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        match self.kind {
            CaseKind::BiExp => KernelSpec::BiExponential { tau: self.parameter },
            CaseKind::PowerLaw => KernelSpec::PowerLaw { alpha: self.parameter },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel().validate()?;
        if !(self.horizon > 0.0) || !(self.side > 0.0) {
            return Err(Error::invalid("horizon and side length must be positive"));
        }
        if self.parent_elements == 0 || !(self.resolution_ratio > 0.0) {
            return Err(Error::invalid("parent element count and resolution ratio must be positive"));
        }
        if !(1..=2).contains(&self.order) {
            return Err(Error::invalid(format!("element order must be 1 or 2, got {}", self.order)));
        }
        self.material.validate()
    }

    pub fn parent_size(&self) -> f64 {
        self.side / self.parent_elements as f64
    }

    pub fn child_size(&self) -> f64 {
        self.parent_size() / self.resolution_ratio
    }

    /// Child elements per horizon half-width, l/Δc.
    pub fn child_resolution(&self) -> f64 {
        self.horizon / self.child_size()
    }

    /// Same case with Δc = l/n.
    /// Child rule sizes with the Legendre count filled in for this order.
    pub fn child_rules(&self) -> ChildRuleSizes {
        self.child_rules.resolved(self.order)
    }

    pub fn with_child_resolution(mut self, n: f64) -> Self {
        self.resolution_ratio = self.parent_size() * n / self.horizon;
        self
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            parent_rule: self.parent_rule,
            child_rules: self.child_rules(),
            child_size: self.child_size(),
            align_child_mesh: self.align_child_mesh,
            workers: self.workers,
            ..AssemblyOptions::default()
        }
    }
}

/// Adaptive-quadrature oracle for the nonlocal stress and the body load that
/// balances the reference field.
#[derive(Debug, Clone, Copy)]
pub struct LoadOracle {
    pub field: ReferenceField,
    pub kernel: KernelSpec,
    pub horizon: f64,
    pub material: Material,
    /// Finite-difference step; defaults to 1e-5 L.
    pub step: f64,
    pub tolerance: f64,
}

impl LoadOracle {
    pub fn new(case: &CaseStudy) -> Self {
        LoadOracle {
            field: ReferenceField { side: case.side },
            kernel: case.kernel(),
            horizon: case.horizon,
            material: case.material,
            step: 1e-5 * case.side,
            tolerance: 1e-13,
        }
    }

    /// ∫ k(x - s) p(s) ds over the horizon interval through x, clipped to [0, L].
    fn moment(&self, x: f64, p: impl Fn(f64) -> f64) -> Result<f64> {
        let lo = (x - self.horizon).max(0.0);
        let hi = (x + self.horizon).min(self.field.side);
        let tol = self.tolerance;
        match self.kernel {
            KernelSpec::BiExponential { tau } => {
                let c = 1.0 / (std::f64::consts::PI * tau).sqrt();
                // split at x so the peak sits on a subinterval endpoint
                let f = |s: f64| c * (-(x - s) * (x - s) / tau).exp() * p(s);
                Ok(integrate(f, lo, x, 0.0, tol)? + integrate(f, x, hi, 0.0, tol)?)
            }
            KernelSpec::PowerLaw { alpha } => {
                let c = 1.0 / gamma(1.0 - alpha);
                let left = integrate_left_singular(|t| p(x - t), x - lo, alpha, 0.0, tol)?;
                let right = integrate_left_singular(|t| p(x + t), hi - x, alpha, 0.0, tol)?;
                Ok(c * (left + right))
            }
            _ => Err(Error::invalid("the load oracle supports separable kernels only")),
        }
    }

    /// Nonlocal stress [σ_xx, σ_yy, σ_xy] of the reference field at x.
    pub fn stress(&self, x: Vec2) -> Result<[f64; 3]> {
        let f = self.field;
        let ix_dg = self.moment(x[0], |s| f.dg(s))?;
        let iy_g = self.moment(x[1], |s| f.g(s))?;
        let ix_g = self.moment(x[0], |s| f.g(s))?;
        let iy_dg = self.moment(x[1], |s| f.dg(s))?;
        let exx = ix_dg * iy_g;
        let exy = 0.5 * ix_g * iy_dg;
        let c = self.material.voigt();
        Ok([c[0][0] * exx, c[1][0] * exx, c[2][2] * exy])
    }

    fn central(&self, x: Vec2, axis: usize, h: f64) -> Result<[f64; 3]> {
        let mut a = x;
        let mut b = x;
        a[axis] += h;
        b[axis] -= h;
        let (sa, sb) = (self.stress(a)?, self.stress(b)?);
        Ok([0, 1, 2].map(|i| (sa[i] - sb[i]) / (2.0 * h)))
    }

    fn derivative(&self, x: Vec2, axis: usize, h: f64) -> Result<[f64; 3]> {
        let d1 = self.central(x, axis, h)?;
        let d2 = self.central(x, axis, 0.5 * h)?;
        Ok([0, 1, 2].map(|i| (4.0 * d2[i] - d1[i]) / 3.0))
    }

    /// Body load f = −∇·σ / ρ using step `h`.
    pub fn body_load_with_step(&self, x: Vec2, h: f64) -> Result<Vec2> {
        let dx = self.derivative(x, 0, h)?;
        let dy = self.derivative(x, 1, h)?;
        let rho = self.material.rho;
        Ok([-(dx[0] + dy[2]) / rho, -(dx[2] + dy[1]) / rho])
    }

    pub fn body_load(&self, x: Vec2) -> Result<Vec2> {
        self.body_load_with_step(x, self.step)
    }
}

pub fn body_load_oracle(case: &CaseStudy, x: Vec2) -> Result<Vec2> {
    LoadOracle::new(case).body_load(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Peak nodal u_x.
    pub max_ux: f64,
    pub max_ux_location: Vec2,
    pub error_percent: f64,
    /// Δ against the previous refinement level, in percent.
    pub delta_percent: Option<f64>,
    pub result: SolveResult,
}

/// Solve the case with oracle loads and compare with the exact peak.
pub fn run_case(case: &CaseStudy) -> Result<ErrorReport> {
    case.validate()?;
    let mesh = build_structured_quad_mesh(case.side, case.side, case.parent_elements, case.parent_elements, case.order)?;
    let oracle = LoadOracle::new(case);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let body = |x: Vec2| match oracle.body_load(x) {
        Ok(f) => f,
        Err(e) => {
            failure.lock().expect("oracle error slot").get_or_insert(e);
            [f64::NAN, f64::NAN]
        }
    };
    let problem = Problem {
        mesh: &mesh,
        material: case.material,
        nonlocal: Some(NonlocalModel {
            kernel: case.kernel(),
            horizon: HorizonSpec::Rect { half_width: case.horizon },
            region: None,
        }),
        options: case.assembly_options(),
    };
    let sys = assemble(&problem, &Loads { body: Some(&body), ..Loads::default() })?;
    if let Some(e) = failure.into_inner().expect("oracle error slot") {
        return Err(e);
    }
    let result = solve_static(&sys, &case.solver)?;
    let (max_ux, node, ..) = field_peaks(&result.displacements);
    let exact = ReferenceField { side: case.side }.max_ux();
    Ok(ErrorReport {
        max_ux,
        max_ux_location: mesh.coords(node),
        error_percent: 100.0 * (max_ux - exact).abs() / exact,
        delta_percent: None,
        result,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementKind {
    /// Child resolution l/Δc takes each value in turn.
    ChildH,
    /// Parent element order takes each value in turn.
    ParentP,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub level: f64,
    pub report: ErrorReport,
    pub converged: bool,
}

/// Run `levels` in order and report Δ between successive fields.
///
/// Order comparisons use the corner nodes shared by both meshes.
pub fn refinement_sweep(case: &CaseStudy, kind: RefinementKind, levels: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(levels.len());
    let mut previous: Option<(SolveResult, usize)> = None;
    for &level in levels {
        let c = match kind {
            RefinementKind::ChildH => case.with_child_resolution(level),
            RefinementKind::ParentP => {
                if level.fract() != 0.0 {
                    return Err(Error::invalid(format!("element order must be an integer, got {level}")));
                }
                CaseStudy { order: level as usize, ..*case }
            }
        };
        let mut report = run_case(&c)?;
        let corners = corner_field(&report.result, c.parent_elements, c.order);
        if let Some((prev, _)) = &previous {
            report.delta_percent = Some(field_metrics(&corners, prev)?.delta_percent);
        }
        let converged = report.delta_percent.is_some_and(|d| d < CONVERGENCE_THRESHOLD);
        previous = Some((corners, c.order));
        rows.push(SweepRow { level, report, converged });
    }
    Ok(rows)
}

/// Restrict a structured-mesh field to the (M+1)² element corner nodes.
pub fn corner_field(result: &SolveResult, m: usize, order: usize) -> SolveResult {
    let per_row = order * m + 1;
    let mut displacements = Vec::with_capacity((m + 1) * (m + 1));
    for j in 0..=m {
        for i in 0..=m {
            displacements.push(result.displacements[order * j * per_row + order * i]);
        }
    }
    SolveResult { displacements, ..result.clone() }
}
