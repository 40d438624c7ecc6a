use nonlocal_fem::assembly::Material;
use nonlocal_fem::kernels::KernelSpec;
use nonlocal_fem::manufactured::*;
use nonlocal_fem::quadrature::adaptive::{integrate, integrate_left_singular};
use nonlocal_fem::shape::Vec2;

/// ∫∫ K(x − x') ∂u_x/∂(x or y)(x') over the clipped box, by nested adaptive
/// quadrature on the 2D kernel and the field gradient.
fn brute_force_moment(case: &CaseStudy, x: Vec2, column: usize) -> f64 {
    let field = ReferenceField { side: case.side };
    let kernel = case.kernel();
    let l = case.horizon;
    let (x0, x1) = ((x[0] - l).max(0.0), (x[0] + l).min(case.side));
    let (y0, y1) = ((x[1] - l).max(0.0), (x[1] + l).min(case.side));
    let alpha = kernel.alpha();
    let inner = |yp: f64| -> f64 {
        let f = |xp: f64| {
            if xp == x[0] || yp == x[1] {
                return 0.0;
            }
            kernel.eval(x, [xp, yp]).unwrap() * field.gradient([xp, yp])[0][column]
        };
        match alpha {
            None => integrate(f, x0, x[0], 1e-13, 1e-10).unwrap() + integrate(f, x[0], x1, 1e-13, 1e-10).unwrap(),
            Some(a) => {
                // pull |Δx|^−α into the substitution
                let g = |s: f64, sign: f64| {
                    let xp = x[0] + sign * s;
                    f(xp) * s.powf(a)
                };
                integrate_left_singular(|s| g(s, -1.0), x[0] - x0, a, 1e-13, 1e-10).unwrap()
                    + integrate_left_singular(|s| g(s, 1.0), x1 - x[0], a, 1e-13, 1e-10).unwrap()
            }
        }
    };
    match alpha {
        None => integrate(inner, y0, x[1], 1e-12, 1e-9).unwrap() + integrate(inner, x[1], y1, 1e-12, 1e-9).unwrap(),
        Some(a) => {
            let g = |s: f64, sign: f64| inner(x[1] + sign * s) * s.powf(a);
            integrate_left_singular(|s| g(s, -1.0), x[1] - y0, a, 1e-12, 1e-9).unwrap()
                + integrate_left_singular(|s| g(s, 1.0), y1 - x[1], a, 1e-12, 1e-9).unwrap()
        }
    }
}

#[test]
fn oracle_stress_matches_two_dimensional_integration() {
    let cases = [
        CaseStudy::new(CaseKind::BiExp, 0.002, 0.2, 8),
        CaseStudy::new(CaseKind::BiExp, 0.01, 0.3, 8),
        CaseStudy::new(CaseKind::PowerLaw, 0.6, 0.25, 8),
    ];
    for case in cases {
        let oracle = LoadOracle::new(&case);
        let m = case.material;
        for x in [[0.5, 0.5], [0.05, 0.93]] {
            let s = oracle.stress(x).unwrap();
            let dx = brute_force_moment(&case, x, 0);
            let dy = brute_force_moment(&case, x, 1);
            let expect = [(2.0 * m.mu + m.lambda) * dx, m.lambda * dx, m.mu * dy];
            for i in 0..3 {
                assert!((s[i] - expect[i]).abs() < 1e-6 * expect[i].abs().max(1e-3), "{:?} at {x:?}: {s:?} vs {expect:?}", case.kind);
            }
        }
    }
}

#[test]
fn narrow_kernel_load_tends_to_local_load() {
    let case = CaseStudy::new(CaseKind::BiExp, 1e-7, 0.05, 8);
    let oracle = LoadOracle::new(&case);
    let field = ReferenceField { side: 1.0 };
    for x in [[0.5, 0.5], [0.3, 0.6], [0.8, 0.2]] {
        let f = oracle.body_load(x).unwrap();
        let local = local_body_load(&field, &Material::default(), x);
        for i in 0..2 {
            assert!((f[i] - local[i]).abs() < 1e-3 * local[i].abs().max(1.0), "{x:?}: {f:?} vs {local:?}");
        }
    }
}

#[test]
fn local_load_balances_local_stress() {
    // −∇·σ of the reference field under the local law, by central differences
    let field = ReferenceField { side: 1.0 };
    let m = Material { mu: 1.4, lambda: 0.6, rho: 2.0 };
    let stress = |x: Vec2| {
        let g = field.gradient(x);
        let (ex, ey, exy) = (g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]));
        [
            (2.0 * m.mu + m.lambda) * ex + m.lambda * ey,
            m.lambda * ex + (2.0 * m.mu + m.lambda) * ey,
            2.0 * m.mu * exy,
        ]
    };
    let h = 1e-5;
    for x in [[0.3, 0.4], [0.7, 0.1]] {
        let d = |i: usize, k: usize| {
            let (mut a, mut b) = (x, x);
            a[k] += h;
            b[k] -= h;
            (stress(a)[i] - stress(b)[i]) / (2.0 * h)
        };
        let f = local_body_load(&field, &m, x);
        assert!((f[0] + (d(0, 0) + d(2, 1)) / m.rho).abs() < 1e-6);
        assert!((f[1] + (d(2, 0) + d(1, 1)) / m.rho).abs() < 1e-6);
    }
}

#[test]
fn reference_peak_is_at_the_centre() {
    let field = ReferenceField { side: 2.0 };
    assert_eq!(field.argmax(), [1.0, 1.0]);
    assert_eq!(field.max_ux(), 1.0);
    assert_eq!(reference_displacement(1.0, 1.0, 2.0), [1.0, 0.0]);
    assert_eq!(reference_displacement(0.0, 0.7, 2.0), [0.0, 0.0]);
}

#[test]
fn case_validation_rejects_bad_input() {
    let mut c = CaseStudy::new(CaseKind::PowerLaw, 1.5, 0.2, 8);
    assert!(c.validate().is_err());
    c.parameter = 0.5;
    c.order = 3;
    assert!(c.validate().is_err());
    assert!(KernelSpec::BiExponential { tau: -1.0 }.validate().is_err());
}

#[test]
fn child_resolution_round_trips() {
    let c = CaseStudy::new(CaseKind::BiExp, 0.002, 0.2, 12).with_child_resolution(5.0);
    assert!((c.child_resolution() - 5.0).abs() < 1e-12);
}

#[test]
fn order_sweep_reports_delta() {
    let case = CaseStudy::new(CaseKind::BiExp, 0.002, 0.2, 6);
    let rows = refinement_sweep(&case, RefinementKind::ParentP, &[1.0, 2.0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].report.delta_percent.is_none());
    let d = rows[1].report.delta_percent.unwrap();
    assert!(d.is_finite() && d > 0.0);
    assert_eq!(rows[1].converged, d < CONVERGENCE_THRESHOLD);
}
