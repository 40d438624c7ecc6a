//! Gauss-Legendre, Gauss-Jacobi and symmetric triangle rules.
//!
//! One-dimensional rules live on `[-1, 1]` and store their abscissae in the
//! first slot of each point; the second slot is zero. Two-dimensional rules
//! live on `[-1, 1]^2` (tensor) or on the unit triangle `(0,0) (1,0) (0,1)`.

use crate::error::{Error, Result};

pub mod adaptive;

pub const MAX_RULE_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    Legendre,
    /// Weight `(1 - t)^(-alpha)` on `[-1, 1]`.
    Jacobi { alpha: f64 },
    TensorLegendre,
    TriangleSym,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            RuleKind::Legendre | RuleKind::Jacobi { .. } => 1,
            RuleKind::TensorLegendre | RuleKind::TriangleSym => 2,
        }
    }

    /// Abscissae of a 1D rule.
    pub fn abscissae(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p[0])
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Apply a 1D rule to `f` on `[-1, 1]` (the Jacobi weight is implicit).
    pub fn integrate_1d(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p[0])).sum()
    }

    /// Apply a 2D rule to `f` on its reference cell.
    pub fn integrate_2d(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p[0], p[1])).sum()
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_RULE_SIZE {
        return Err(Error::invalid(format!("rule size {n} outside 1..={MAX_RULE_SIZE}")));
    }
    Ok(())
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// n-point Gauss-Legendre rule on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<QuadratureRule> {
    check_size(n)?;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadratureRule {
        kind: RuleKind::Legendre,
        points: nodes.into_iter().map(|t| [t, 0.0]).collect(),
        weights,
    })
}

/// Jacobi polynomial P_n^{(a,0)}(x) and its derivative, by the three-term recurrence.
fn jacobi_a0(n: usize, a: f64, x: f64) -> (f64, f64) {
    // derivative uses d/dx P_n^{(a,b)} = (n + a + b + 1)/2 P_{n-1}^{(a+1,b+1)}
    fn value(n: usize, a: f64, b: f64, x: f64) -> f64 {
        if n == 0 {
            return 1.0;
        }
        let mut p0 = 1.0;
        let mut p1 = 0.5 * (a - b + (a + b + 2.0) * x);
        for k in 2..=n {
            let k = k as f64;
            let c = 2.0 * k + a + b;
            let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
            let a2 = (c - 1.0) * (a * a - b * b);
            let a3 = (c - 2.0) * (c - 1.0) * c;
            let a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
            let p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
            p0 = p1;
            p1 = p2;
        }
        p1
    }
    let p = value(n, a, 0.0, x);
    let dp = if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + 1.0) * value(n - 1, a + 1.0, 1.0, x)
    };
    (p, dp)
}

/// n-point Gauss-Jacobi rule for the weight `(1 - t)^(-alpha)` on [-1, 1].
///
/// Nodes are the roots of `P_n^{(-alpha, 0)}`, found by Newton iteration with
/// deflation against the roots already located.
pub fn gauss_jacobi(n: usize, alpha: f64) -> Result<QuadratureRule> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("Jacobi exponent {alpha} outside (0, 1)")));
    }
    check_size(n)?;
    let a = -alpha;
    let mut x = vec![0.0_f64; n];
    for k in 0..n {
        let mut xk = -(std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64).cos();
        if k > 0 {
            xk = 0.5 * (xk + x[k - 1]);
        }
        for _ in 0..200 {
            let (p, dp) = jacobi_a0(n, a, xk);
            let s: f64 = x[..k].iter().map(|xi| 1.0 / (xk - xi)).sum();
            let delta = p / (dp - p * s);
            xk -= delta;
            if delta.abs() < 1e-15 {
                break;
            }
        }
        x[k] = xk;
    }
    x.sort_by(|p, q| p.total_cmp(q));
    // residual check on the polishing step
    for &xi in &x {
        let (p, dp) = jacobi_a0(n, a, xi);
        if !(p / dp).abs().lt(&1e-14) || xi >= 1.0 {
            return Err(Error::Numeric(format!(
                "Gauss-Jacobi node did not converge (n = {n}, alpha = {alpha})"
            )));
        }
    }
    let scale = 2f64.powf(a + 1.0);
    let weights = x
        .iter()
        .map(|&xi| {
            let (_, dp) = jacobi_a0(n, a, xi);
            scale / ((1.0 - xi * xi) * dp * dp)
        })
        .collect();
    Ok(QuadratureRule {
        kind: RuleKind::Jacobi { alpha },
        points: x.into_iter().map(|t| [t, 0.0]).collect(),
        weights,
    })
}

/// Zeroth moment of the Jacobi weight: ∫_{-1}^{1} (1 - t)^(-alpha) dt.
pub fn jacobi_weight_mass(alpha: f64) -> f64 {
    2f64.powf(1.0 - alpha) / (1.0 - alpha)
}

/// Tensor product of a 1D Legendre rule with itself, ξ varying fastest.
pub fn tensor_rule(rule1d: &QuadratureRule) -> Result<QuadratureRule> {
    if rule1d.kind != RuleKind::Legendre {
        return Err(Error::invalid("tensor_rule requires a 1D Legendre rule"));
    }
    let n = rule1d.len();
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([rule1d.points[i][0], rule1d.points[j][0]]);
            weights.push(rule1d.weights[i] * rule1d.weights[j]);
        }
    }
    Ok(QuadratureRule { kind: RuleKind::TensorLegendre, points, weights })
}

/// Symmetric rule on the unit triangle. Order 3 uses the six-point
/// positive-weight rule (exact through degree 4).
pub fn triangle_rule(order: usize) -> Result<QuadratureRule> {
    let (points, weights): (Vec<[f64; 2]>, Vec<f64>) = match order {
        1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![0.5]),
        2 => (
            vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            vec![1.0 / 6.0; 3],
        ),
        3 => {
            let a1 = 0.445_948_490_915_965;
            let w1 = 0.223_381_589_678_011 / 2.0;
            let a2 = 0.091_576_213_509_771;
            let w2 = 0.109_951_743_655_322 / 2.0;
            let b1 = 1.0 - 2.0 * a1;
            let b2 = 1.0 - 2.0 * a2;
            (
                vec![[a1, a1], [b1, a1], [a1, b1], [a2, a2], [b2, a2], [a2, b2]],
                vec![w1, w1, w1, w2, w2, w2],
            )
        }
        _ => return Err(Error::invalid(format!("triangle rule order {order} not in 1..=3"))),
    };
    // renormalize so the constant integrates to 1/2 to machine precision
    let s: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w * 0.5 / s).collect();
    Ok(QuadratureRule { kind: RuleKind::TriangleSym, points, weights })
}
