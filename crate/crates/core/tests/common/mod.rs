//! Property checks shared by the property tests and the acceptance run.
//! Each returns `Err` with a description of the first counterexample.

#![allow(dead_code)]

use nonlocal_fem::assembly::{assemble, Assembler, AssemblyOptions, Loads, Material, NonlocalModel, Problem};
use nonlocal_fem::bridge::{inverse_map_geometry, locate_parent_element, SpatialIndex};
use nonlocal_fem::child::ChildRuleSizes;
use nonlocal_fem::kernels::{HorizonSpec, KernelSpec};
use nonlocal_fem::manufactured::{local_body_load, ReferenceField};
use nonlocal_fem::mesh::{
    build_annulus_mesh, build_inclusion_mesh, build_structured_quad_mesh, BoundaryKind, ParentMesh,
};
use nonlocal_fem::quadrature::adaptive::{integrate, integrate_left_singular};
use nonlocal_fem::quadrature::{gauss_jacobi, gauss_legendre, jacobi_weight_mass, tensor_rule, triangle_rule};
use nonlocal_fem::shape::{eval, physical_gradients, ElementShape, Geometry, Vec2};
use nonlocal_fem::solver::{field_metrics, solve_local_reference, solve_static, SolverOptions};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub type Check = Result<(), String>;

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Gauss-Legendre integrates x^k exactly for k ≤ 2n − 1; tensor rules do
/// the same per direction.
pub fn legendre_exactness() -> Check {
    for n in 1..=20 {
        let r = gauss_legendre(n).map_err(|e| e.to_string())?;
        for k in 0..2 * n {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
            let v = r.integrate_1d(|x| x.powi(k as i32));
            if !close(v, exact, 1e-13) {
                return Err(format!("legendre n={n} k={k}: {v} vs {exact}"));
            }
        }
    }
    for n in 1..=8 {
        let t = tensor_rule(&gauss_legendre(n).unwrap()).unwrap();
        for a in 0..2 * n {
            for b in 0..2 * n {
                let m = |k: usize| if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
                let v = t.integrate_2d(|x, y| x.powi(a as i32) * y.powi(b as i32));
                if !close(v, m(a) * m(b), 1e-13) {
                    return Err(format!("tensor n={n} x^{a} y^{b}: {v}"));
                }
            }
        }
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Symmetric triangle rules are exact for x^a y^b up to their degree.
pub fn triangle_exactness() -> Check {
    for (order, degree) in [(1, 1), (2, 2), (3, 4)] {
        let r = triangle_rule(order).unwrap();
        for a in 0..=degree {
            for b in 0..=degree - a {
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                let v = r.integrate_2d(|x, y| x.powi(a as i32) * y.powi(b as i32));
                if !close(v, exact, 1e-13) {
                    return Err(format!("triangle order {order} x^{a} y^{b}: {v} vs {exact}"));
                }
            }
        }
    }
    Ok(())
}

/// Σ w = ∫(1 − t)^(−α) dt and exactness for polynomials of degree ≤ 2n − 1,
/// checked against the adaptive oracle.
pub fn jacobi_identities() -> Check {
    let mut run = runner(64);
    run.run(&(0.05f64..0.95, 1usize..=10), |(alpha, n)| {
        let r = gauss_jacobi(n, alpha).unwrap();
        let mass = jacobi_weight_mass(alpha);
        prop_assert!(close(r.weight_sum(), mass, 1e-13), "zeroth moment α={alpha} n={n}: {} vs {mass}", r.weight_sum());
        for k in 0..2 * n {
            // s = 1 − t: ∫_0^2 s^−α (1 − s)^k ds
            let oracle = integrate_left_singular(|s| (1.0 - s).powi(k as i32), 2.0, alpha, 1e-15, 1e-14).unwrap();
            let v = r.integrate_1d(|t| t.powi(k as i32));
            prop_assert!(close(v, oracle, 1e-11), "α={alpha} n={n} k={k}: {v} vs {oracle}");
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}

/// Jacobi quadrature of t^−α g(t) for smooth g against the adaptive oracle.
pub fn singular_oracle() -> Check {
    let mut run = runner(64);
    run.run(&(0.1f64..0.9, 0.05f64..1.0, -3.0f64..3.0), |(alpha, h, c)| {
        let g = |t: f64| (c * t).cos() + t * t;
        let r = gauss_jacobi(12, alpha).unwrap();
        // t = h(1 − u)/2 maps the Jacobi weight onto t^−α
        let scale = (0.5 * h).powf(1.0 - alpha);
        let v = scale * r.integrate_1d(|u| g(0.5 * h * (1.0 - u)));
        let oracle = integrate_left_singular(g, h, alpha, 1e-15, 1e-14).unwrap();
        prop_assert!((v - oracle).abs() < 1e-8, "α={alpha} h={h} c={c}: {v} vs {oracle}");
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn convex_quad() -> impl Strategy<Value = Geometry> {
    (prop::array::uniform8(-0.2f64..0.2), 0.1f64..3.0).prop_map(|(d, s)| {
        let c = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mut out = [[0.0; 2]; 4];
        for k in 0..4 {
            out[k] = [s * (c[k][0] + d[2 * k]), s * (c[k][1] + d[2 * k + 1])];
        }
        Geometry::new(&out)
    })
}

fn triangle() -> impl Strategy<Value = Geometry> {
    prop::array::uniform6(-1.0f64..1.0)
        .prop_filter("non-degenerate", |p| {
            ((p[2] - p[0]) * (p[5] - p[1]) - (p[4] - p[0]) * (p[3] - p[1])).abs() > 0.05
        })
        .prop_map(|p| {
            let area2 = (p[2] - p[0]) * (p[5] - p[1]) - (p[4] - p[0]) * (p[3] - p[1]);
            if area2 > 0.0 {
                Geometry::new(&[[p[0], p[1]], [p[2], p[3]], [p[4], p[5]]])
            } else {
                Geometry::new(&[[p[0], p[1]], [p[4], p[5]], [p[2], p[3]]])
            }
        })
}

/// Forward map then inverse map returns ξ within 1e−10; 100 cases × 50
/// points each for quads and triangles.
pub fn isoparametric_round_trip() -> Check {
    let xi_quad = prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 50);
    let xi_tri = prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 50);
    runner(100)
        .run(&(convex_quad(), xi_quad), |(g, pts)| {
            for (a, b) in pts {
                let back = inverse_map_geometry(&g, g.map([a, b])).unwrap();
                prop_assert!((back[0] - a).abs().max((back[1] - b).abs()) < 1e-10, "quad {:?} ξ=({a},{b}) → {back:?}", g.corners());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    runner(100)
        .run(&(triangle(), xi_tri), |(g, pts)| {
            for (a, b) in pts {
                let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
                let back = inverse_map_geometry(&g, g.map([a, b])).unwrap();
                prop_assert!((back[0] - a).abs().max((back[1] - b).abs()) < 1e-10);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Σψ = 1 and Σ∇ψ = 0 at random reference points of every element family.
pub fn partition_of_unity() -> Check {
    let shapes = [ElementShape::Quad4, ElementShape::Quad9, ElementShape::Tri3, ElementShape::Tri6];
    runner(256)
        .run(&(0usize..4, -1.0f64..1.0, -1.0f64..1.0), |(k, a, b)| {
            let shape = shapes[k];
            let xi = if shape.is_quad() { [a, b] } else { [0.5 * (a + 1.0) * 0.5, 0.5 * (b + 1.0) * 0.5] };
            let s = eval(shape, xi);
            let sum: f64 = s.values[..s.n].iter().sum();
            let gx: f64 = s.grads[..s.n].iter().map(|g| g[0]).sum();
            let gy: f64 = s.grads[..s.n].iter().map(|g| g[1]).sum();
            prop_assert!((sum - 1.0).abs() < 1e-13 && gx.abs() < 1e-12 && gy.abs() < 1e-12, "{shape:?} at {xi:?}");
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn contains(g: &Geometry, x: Vec2) -> bool {
    let c = g.corners();
    (0..c.len()).all(|i| {
        let (a, b) = (c[i], c[(i + 1) % c.len()]);
        (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]) >= -1e-12
    })
}

fn brute_force(mesh: &ParentMesh, x: Vec2) -> Option<usize> {
    (0..mesh.elements.len()).find(|&e| contains(&mesh.geometry(e), x))
}

/// Perturb interior nodes of a linear mesh, keeping elements valid.
pub fn jiggle(mesh: &mut ParentMesh, amount: f64, seed: u64) {
    let boundary: std::collections::BTreeSet<usize> = mesh.boundary.iter().flat_map(|s| s.nodes.clone()).collect();
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    for n in 0..mesh.nodes.len() {
        if !boundary.contains(&n) {
            let d = [next(), next()];
            mesh.nodes[n].coords[0] += amount * d[0];
            mesh.nodes[n].coords[1] += amount * d[1];
        }
    }
}

/// Indexed lookup agrees with a brute-force scan (lowest containing id) on
/// 10⁴ random points spread over four meshes.
pub fn spatial_index_agreement() -> Check {
    let mut quad = build_structured_quad_mesh(1.0, 1.0, 9, 7, 1).unwrap();
    jiggle(&mut quad, 0.04, 7);
    let meshes = [
        quad,
        build_structured_quad_mesh(2.0, 1.0, 6, 5, 2).unwrap(),
        build_annulus_mesh(0.3, 0.5, 4, 48).unwrap(),
        build_inclusion_mesh(1.0, 0.15, 2, 32, 6).unwrap(),
    ];
    for (m, mesh) in meshes.iter().enumerate() {
        let index = SpatialIndex::build(mesh);
        let (lo, hi) = mesh.bbox();
        runner(2500)
            .run(&(0.0f64..1.0, 0.0f64..1.0), |(a, b)| {
                let x = [lo[0] + a * (hi[0] - lo[0]), lo[1] + b * (hi[1] - lo[1])];
                let found = locate_parent_element(&index, mesh, x).ok();
                let brute = brute_force(mesh, x);
                prop_assert_eq!(found, brute, "mesh {} at {:?}", m, x);
                Ok(())
            })
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

/// Local solves reproduce an affine displacement prescribed on the whole
/// boundary; returns the worst nodal error.
pub fn patch_test_error() -> f64 {
    let affine = |x: Vec2| [0.1 + 0.3 * x[0] - 0.2 * x[1], -0.05 + 0.15 * x[0] + 0.4 * x[1]];
    let mut quad = build_structured_quad_mesh(1.0, 1.0, 5, 5, 1).unwrap();
    jiggle(&mut quad, 0.05, 3);
    let mut annulus = build_annulus_mesh(0.3, 0.5, 3, 32).unwrap();
    annulus.set_boundary_kind(BoundaryKind::Dirichlet, |_| true);
    let meshes = [
        quad,
        build_structured_quad_mesh(1.0, 1.0, 4, 3, 2).unwrap(),
        annulus,
        build_inclusion_mesh(1.0, 0.2, 2, 16, 3).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for mesh in &meshes {
        let loads = Loads { dirichlet: Some(&affine), ..Loads::default() };
        let r = solve_local_reference(mesh, Material { mu: 1.3, lambda: 0.7, rho: 1.0 }, &loads, &SolverOptions::default())
            .expect("local patch solve");
        for (n, u) in mesh.nodes.iter().zip(&r.displacements) {
            let e = affine(n.coords);
            worst = worst.max((u[0] - e[0]).abs()).max((u[1] - e[1]).abs());
        }
    }
    worst
}

/// Narrow bi-exponential kernel against the local law: worst relative gap
/// of the stress operator at interior Gauss points, and Δ% between the
/// nonlocal and local solutions under the local manufactured load.
pub fn local_limit_gaps() -> (f64, f64) {
    let mesh = build_structured_quad_mesh(1.0, 1.0, 8, 8, 1).unwrap();
    let material = Material::default();
    let nonlocal = NonlocalModel {
        kernel: KernelSpec::BiExponential { tau: 1e-5 },
        horizon: HorizonSpec::Rect { half_width: 0.02 },
        region: None,
    };
    let options = AssemblyOptions { child_size: 0.002, ..AssemblyOptions::default() };
    let problem = Problem { mesh: &mesh, material, nonlocal: Some(nonlocal), options };
    let assembler = Assembler::new(&problem).unwrap();
    let c = material.voigt();
    let mut operator_gap: f64 = 0.0;
    for e in [18, 27, 36, 45] {
        let el = &mesh.elements[e];
        let geom = mesh.geometry(e);
        for xi in &assembler.rule(el.shape).points {
            let x = geom.map(*xi);
            let (_, grads, _) = physical_gradients(el.shape, &geom, *xi);
            let mut local = std::collections::BTreeMap::new();
            for (k, &n) in el.nodes.iter().enumerate() {
                let [gx, gy] = grads[k];
                local.insert(2 * n, [c[0][0] * gx, c[1][0] * gx, 0.5 * c[2][2] * gy]);
                local.insert(2 * n + 1, [c[0][1] * gy, c[1][1] * gy, 0.5 * c[2][2] * gx]);
            }
            let scale = local.values().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
            let mut seen = std::collections::BTreeMap::new();
            for (dof, s) in assembler.stress_operator(x).unwrap() {
                seen.insert(dof, s);
            }
            for dof in local.keys().chain(seen.keys()) {
                let a = local.get(dof).copied().unwrap_or([0.0; 3]);
                let b = seen.get(dof).copied().unwrap_or([0.0; 3]);
                for i in 0..3 {
                    operator_gap = operator_gap.max((a[i] - b[i]).abs() / scale);
                }
            }
        }
    }
    let field = ReferenceField { side: 1.0 };
    let body = move |x: Vec2| local_body_load(&field, &material, x);
    let loads = Loads { body: Some(&body), ..Loads::default() };
    let nonlocal = solve_static(&assemble(&problem, &loads).unwrap(), &SolverOptions::default()).unwrap();
    let local = solve_local_reference(&mesh, material, &loads, &SolverOptions::default()).unwrap();
    let delta = field_metrics(&nonlocal, &local).unwrap().delta_percent;
    (operator_gap, delta)
}

/// ‖K − Kᵀ‖_max / ‖K‖_max for the bi-exponential validation setup at M = 8.
pub fn symmetry_defect(child_size: f64) -> f64 {
    let mesh = build_structured_quad_mesh(1.0, 1.0, 8, 8, 1).unwrap();
    let nonlocal = NonlocalModel {
        kernel: KernelSpec::BiExponential { tau: 0.002 },
        horizon: HorizonSpec::Rect { half_width: 0.2 },
        region: None,
    };
    let options = AssemblyOptions { child_size, ..AssemblyOptions::default() };
    let problem = Problem { mesh: &mesh, material: Material::default(), nonlocal: Some(nonlocal), options };
    assemble(&problem, &Loads::default()).unwrap().k.symmetry_defect()
}

/// K, M and F are bit-identical for 1, 2 and 3 workers.
pub fn determinism_across_workers() -> Check {
    let mesh = build_structured_quad_mesh(1.0, 1.0, 6, 6, 2).unwrap();
    let body = |x: Vec2| [x[0].sin(), x[1] * x[0]];
    let loads = Loads { body: Some(&body), ..Loads::default() };
    let build = |workers: usize| {
        let nonlocal = NonlocalModel {
            kernel: KernelSpec::PowerLaw { alpha: 0.5 },
            horizon: HorizonSpec::Rect { half_width: 0.25 },
            region: None,
        };
        let options = AssemblyOptions {
            child_size: 0.05,
            child_rules: ChildRuleSizes::default(),
            workers: Some(workers),
            ..AssemblyOptions::default()
        };
        assemble(&Problem { mesh: &mesh, material: Material::default(), nonlocal: Some(nonlocal), options }, &loads).unwrap()
    };
    let reference = build(1);
    for w in [2, 3] {
        let other = build(w);
        let same = reference.k.values.iter().zip(&other.k.values).all(|(a, b)| a.to_bits() == b.to_bits())
            && reference.k.col_idx == other.k.col_idx
            && reference.m == other.m
            && reference.f.iter().zip(&other.f).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(format!("assembly with {w} workers differs from the single-worker result"));
        }
    }
    Ok(())
}

/// Adaptive oracle sanity: the 1D Gaussian integrates to its closed form.
pub fn oracle_self_check() -> Check {
    let v = integrate(|x| (-x * x / 0.01).exp(), -1.0, 1.0, 1e-15, 1e-14).map_err(|e| e.to_string())?;
    if (v - (std::f64::consts::PI * 0.01).sqrt()).abs() > 1e-12 {
        return Err(format!("gaussian integral {v}"));
    }
    Ok(())
}
