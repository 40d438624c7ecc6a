//! Non-rectangular demonstration problems and the cost/accuracy study.

use std::time::Instant;

use crate::assembly::{assemble, Assembler, AssemblyOptions, Loads, Material, NonlocalModel, Problem};
use crate::child::ChildRuleSizes;
use crate::error::{Error, Result};
use crate::kernels::{HorizonSpec, KernelSpec};
use crate::manufactured::{run_case, CaseKind, CaseStudy};
use crate::mesh::{build_annulus_mesh, build_inclusion_mesh, build_structured_quad_mesh, ParentMesh};
use crate::shape::Vec2;
use crate::solver::{solve_local_reference, solve_static, SolveResult, SolverOptions};

/// A solved showcase with its mesh and, where meaningful, the local field on
/// the same mesh.
#[derive(Debug, Clone)]
pub struct ShowcaseRun {
    pub mesh: ParentMesh,
    pub result: SolveResult,
    pub local: Option<SolveResult>,
}

impl ShowcaseRun {
    pub fn max_norm(&self) -> f64 {
        self.result.displacements.iter().fold(0.0, |m, u| m.max(u[0].hypot(u[1])))
    }

    pub fn max_ux(&self) -> f64 {
        self.result.displacements.iter().fold(f64::NEG_INFINITY, |m, u| m.max(u[0]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusConfig {
    /// Power-law order; 1 selects the local law.
    pub alpha: f64,
    pub horizon: f64,
    pub r_in: f64,
    pub r_out: f64,
    /// Magnitude of the outward normal traction on the outer ring.
    pub traction: f64,
    pub n_radial: usize,
    pub n_angular: usize,
    pub child_size: f64,
    pub child_rules: ChildRuleSizes,
    pub workers: Option<usize>,
    pub material: Material,
}

impl Default for AnnulusConfig {
    fn default() -> Self {
        AnnulusConfig {
            alpha: 0.6,
            horizon: 0.2,
            r_in: 0.3,
            r_out: 0.5,
            traction: 0.1,
            n_radial: 6,
            n_angular: 64,
            child_size: 0.02,
            child_rules: ChildRuleSizes::default(),
            workers: None,
            material: Material::default(),
        }
    }
}

impl AnnulusConfig {
    pub fn nonlocal(&self) -> Result<Option<NonlocalModel>> {
        if self.alpha == 1.0 {
            return Ok(None);
        }
        let kernel = KernelSpec::BidirectionalPowerLaw { alpha: self.alpha };
        kernel.validate().map_err(|_| Error::invalid(format!("annulus power-law order must lie in (0, 1], got {}", self.alpha)))?;
        Ok(Some(NonlocalModel { kernel, horizon: HorizonSpec::BidirectionalSegments { half_length: self.horizon }, region: None }))
    }

    pub fn options(&self) -> AssemblyOptions {
        AssemblyOptions { child_size: self.child_size, child_rules: self.child_rules, workers: self.workers, ..AssemblyOptions::default() }
    }
}

/// Annulus with a fixed inner ring and a uniform outward pressure on the
/// outer ring.
pub fn run_annulus(cfg: &AnnulusConfig, solver: &SolverOptions) -> Result<ShowcaseRun> {
    let mesh = build_annulus_mesh(cfg.r_in, cfg.r_out, cfg.n_radial, cfg.n_angular)?;
    let t = cfg.traction;
    let traction = move |_x: Vec2, n: Vec2| [t * n[0], t * n[1]];
    let loads = Loads { traction: Some(&traction), ..Loads::default() };
    let problem = Problem { mesh: &mesh, material: cfg.material, nonlocal: cfg.nonlocal()?, options: cfg.options() };
    let result = solve_static(&assemble(&problem, &loads)?, solver)?;
    Ok(ShowcaseRun { mesh, result, local: None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneStrainConfig {
    pub tau1: f64,
    pub tau2: f64,
    /// Radius of the circular horizon.
    pub horizon: f64,
    pub side: f64,
    pub parent_elements: usize,
    pub child_size: f64,
    /// Uniform body force; all four sides are clamped.
    pub body_force: Vec2,
    pub child_rules: ChildRuleSizes,
    pub facets_per_quarter: usize,
    pub workers: Option<usize>,
    pub material: Material,
}

impl Default for PlaneStrainConfig {
    fn default() -> Self {
        PlaneStrainConfig {
            tau1: 1.0 / 1000.0,
            tau2: 1.0 / 100.0,
            horizon: 0.2,
            side: 1.0,
            parent_elements: 16,
            child_size: 0.01,
            body_force: [1.0, 0.0],
            child_rules: ChildRuleSizes::default(),
            facets_per_quarter: 8,
            workers: None,
            material: Material::default(),
        }
    }
}

impl PlaneStrainConfig {
    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::RadialExponential { tau1: self.tau1, tau2: self.tau2 }
    }

    pub fn options(&self) -> AssemblyOptions {
        AssemblyOptions {
            child_size: self.child_size,
            child_rules: self.child_rules,
            facets_per_quarter: self.facets_per_quarter,
            workers: self.workers,
            ..AssemblyOptions::default()
        }
    }
}

/// Clamped square under a uniform body force with a circular horizon,
/// solved alongside its local counterpart.
pub fn run_plane_strain(cfg: &PlaneStrainConfig, solver: &SolverOptions) -> Result<ShowcaseRun> {
    let mesh = build_structured_quad_mesh(cfg.side, cfg.side, cfg.parent_elements, cfg.parent_elements, 1)?;
    let b = cfg.body_force;
    let body = move |_x: Vec2| b;
    let loads = Loads { body: Some(&body), ..Loads::default() };
    let nonlocal = NonlocalModel { kernel: cfg.kernel(), horizon: HorizonSpec::Circle { radius: cfg.horizon }, region: None };
    let problem = Problem { mesh: &mesh, material: cfg.material, nonlocal: Some(nonlocal), options: cfg.options() };
    let result = solve_static(&assemble(&problem, &loads)?, solver)?;
    let local = solve_local_reference(&mesh, cfg.material, &loads, solver)?;
    Ok(ShowcaseRun { mesh, result, local: Some(local) })
}

/// ∫_H K dA over the horizon of `x` as seen by the child quadrature.
pub fn kernel_mass(mesh: &ParentMesh, nonlocal: NonlocalModel, options: AssemblyOptions, x: Vec2) -> Result<f64> {
    let problem = Problem { mesh, material: Material::default(), nonlocal: Some(nonlocal), options };
    Assembler::new(&problem)?.kernel_mass(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub radius: f64,
    pub side: f64,
    pub core_rings: usize,
    pub n_angular: usize,
    pub outer_layers: usize,
    pub child_size: f64,
    /// Assemble the inclusion nonlocally; `false` gives the all-local limit.
    pub nonlocal: bool,
    pub child_rules: ChildRuleSizes,
    pub facets_per_quarter: usize,
    pub workers: Option<usize>,
    pub material: Material,
}

impl Default for InclusionConfig {
    fn default() -> Self {
        InclusionConfig {
            tau1: 100.0,
            tau2: 5000.0,
            radius: 0.15,
            side: 1.0,
            core_rings: 1,
            n_angular: 32,
            outer_layers: 8,
            child_size: 0.03,
            nonlocal: true,
            child_rules: ChildRuleSizes::default(),
            facets_per_quarter: 8,
            workers: None,
            material: Material::default(),
        }
    }
}

/// Local square with a nonlocal disc whose horizon is the whole disc,
/// under u = (x, 0) on the outer boundary.
pub fn run_inclusion(cfg: &InclusionConfig, solver: &SolverOptions) -> Result<ShowcaseRun> {
    let mesh = build_inclusion_mesh(cfg.side, cfg.radius, cfg.core_rings, cfg.n_angular, cfg.outer_layers)?;
    let dirichlet = |x: Vec2| [x[0], 0.0];
    let loads = Loads { dirichlet: Some(&dirichlet), ..Loads::default() };
    let nonlocal = cfg.nonlocal.then_some(NonlocalModel {
        kernel: KernelSpec::Rational { tau1: cfg.tau1, tau2: cfg.tau2 },
        horizon: HorizonSpec::FullRegion { region: 1 },
        region: Some(1),
    });
    let options = AssemblyOptions {
        child_size: cfg.child_size,
        child_rules: cfg.child_rules,
        facets_per_quarter: cfg.facets_per_quarter,
        workers: cfg.workers,
        ..AssemblyOptions::default()
    };
    let problem = Problem { mesh: &mesh, material: cfg.material, nonlocal, options };
    let result = solve_static(&assemble(&problem, &loads)?, solver)?;
    let local = solve_local_reference(&mesh, cfg.material, &loads, solver)?;
    Ok(ShowcaseRun { mesh, result, local: Some(local) })
}

/// u_x sampled by the parent interpolation at `x`.
pub fn sample_ux(run: &ShowcaseRun, index: &crate::bridge::SpatialIndex, x: Vec2) -> Result<f64> {
    let b = crate::bridge::bridge(index, &run.mesh, x)?;
    let el = &run.mesh.elements[b.element];
    let s = crate::shape::eval(el.shape, b.xi);
    Ok(el.nodes.iter().enumerate().map(|(k, &n)| s.values[k] * run.result.displacements[n][0]).sum())
}

/// Slope changes of u_x along rays from the inclusion centre.
#[derive(Debug, Clone, PartialEq)]
pub struct KinkProfile {
    /// Largest |Δ slope| between the two sample intervals straddling r = radius.
    pub interface_jump: f64,
    /// Largest |Δ slope| between adjacent intervals well away from the interface.
    pub far_field_variation: f64,
}

/// Probe u_x along `rays` rays with sample spacing `h` and measure the kink
/// at the interface against kinks elsewhere (beyond `far` from the centre).
pub fn kink_profile(run: &ShowcaseRun, radius: f64, rays: usize, h: f64, far: f64) -> Result<KinkProfile> {
    let index = crate::bridge::SpatialIndex::build(&run.mesh);
    let (lo, hi) = run.mesh.bbox();
    let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let mut interface_jump: f64 = 0.0;
    let mut far_field_variation: f64 = 0.0;
    for k in 0..rays {
        let t = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / rays as f64;
        let d = [t.cos(), t.sin()];
        let at = |s: f64| sample_ux(run, &index, [c[0] + s * d[0], c[1] + s * d[1]]);
        let slope = |a: f64, b: f64| -> Result<f64> { Ok((at(b)? - at(a)?) / (b - a)) };
        interface_jump = interface_jump.max((slope(radius, radius + h)? - slope(radius - h, radius)?).abs());
        // stay inside the square along the ray
        let reach = 0.5 * (hi[0] - lo[0]) / d[0].abs().max(d[1].abs()) - h;
        let mut s = far;
        while s + 2.0 * h <= reach {
            far_field_variation = far_field_variation.max((slope(s + h, s + 2.0 * h)? - slope(s, s + h)?).abs());
            s += h;
        }
    }
    Ok(KinkProfile { interface_jump, far_field_variation })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityRun {
    pub parent_elements: usize,
    pub resolution_ratio: f64,
    /// Median assembly wall time in seconds.
    pub seconds: f64,
    pub error_percent: f64,
    pub predicted_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub workers: usize,
    pub runs: Vec<ComplexityRun>,
    /// Exponents of time ∝ M^a r^b from a joint log-log least-squares fit.
    pub parent_exponent: f64,
    pub ratio_exponent: f64,
}

/// g^p g^c r² (l/L)² M⁴.
pub fn predicted_sum(gp: usize, gc: usize, ratio: f64, horizon_over_side: f64, m: usize) -> f64 {
    gp as f64 * gc as f64 * ratio * ratio * horizon_over_side * horizon_over_side * (m as f64).powi(4)
}

/// Median over three samples of the assembly time, each sample repeating the
/// assembly until at least 50 ms have elapsed.
pub fn time_assembly(case: &CaseStudy) -> Result<f64> {
    let mesh = build_structured_quad_mesh(case.side, case.side, case.parent_elements, case.parent_elements, case.order)?;
    let probe = Problem {
        mesh: &mesh,
        material: case.material,
        nonlocal: Some(NonlocalModel { kernel: case.kernel(), horizon: HorizonSpec::Rect { half_width: case.horizon }, region: None }),
        options: case.assembly_options(),
    };
    let assembler = Assembler::new(&probe)?;
    let mut samples = Vec::with_capacity(3);
    for _ in 0..3 {
        let start = Instant::now();
        let mut reps = 0u32;
        loop {
            let sys = assembler.assemble(&Loads::default())?;
            std::hint::black_box(&sys);
            reps += 1;
            if start.elapsed().as_secs_f64() >= 0.05 {
                break;
            }
        }
        samples.push(start.elapsed().as_secs_f64() / reps as f64);
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[1])
}

/// Least-squares fit of log t = a log M + b log r + c.
pub fn fit_exponents(runs: &[ComplexityRun]) -> Result<(f64, f64)> {
    let rows: Vec<[f64; 4]> = runs
        .iter()
        .map(|r| [(r.parent_elements as f64).ln(), r.resolution_ratio.ln(), 1.0, r.seconds.ln()])
        .collect();
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for row in &rows {
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * row[3];
        }
    }
    let sol = solve3(ata, atb).ok_or_else(|| Error::Numeric("complexity fit is degenerate; vary both M and r".into()))?;
    Ok((sol[0], sol[1]))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-12 {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut m = a;
        for i in 0..3 {
            m[i][k] = b[i];
        }
        *slot = det(m) / d;
    }
    Some(out)
}

/// Case-1 physics (l = 0.2, τ = 0.002) over a grid of parent meshes and
/// resolution ratios. Error uses a full solve; timing covers assembly only.
pub fn run_complexity(parent_elements: &[usize], ratios: &[f64], workers: usize) -> Result<ComplexityReport> {
    let mut runs = Vec::new();
    for &m in parent_elements {
        for &r in ratios {
            let mut case = CaseStudy::new(CaseKind::BiExp, 0.002, 0.2, m);
            case.resolution_ratio = r;
            case.workers = Some(workers);
            let seconds = time_assembly(&case)?;
            let error_percent = run_case(&case)?.error_percent;
            let gp = 4;
            let gc = case.child_rules().legendre.pow(2);
            runs.push(ComplexityRun {
                parent_elements: m,
                resolution_ratio: r,
                seconds,
                error_percent,
                predicted_sum: predicted_sum(gp, gc, r, case.horizon / case.side, m),
            });
        }
    }
    let (parent_exponent, ratio_exponent) = fit_exponents(&runs)?;
    Ok(ComplexityReport { workers, runs, parent_exponent, ratio_exponent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicted_sum_example() {
        assert!((predicted_sum(4, 4, 1.0, 0.2, 10) - 6400.0).abs() < 1e-9);
    }

    #[test]
    fn exact_power_law_fit() {
        let mut runs = Vec::new();
        for m in [8, 12, 16] {
            for r in [1.0, 2.0, 3.0] {
                let seconds = 1e-6 * (m as f64).powi(4) * r * r;
                runs.push(ComplexityRun { parent_elements: m, resolution_ratio: r, seconds, error_percent: 0.0, predicted_sum: 0.0 });
            }
        }
        let (a, b) = fit_exponents(&runs).unwrap();
        assert!((a - 4.0).abs() < 1e-9 && (b - 2.0).abs() < 1e-9);
    }
}
