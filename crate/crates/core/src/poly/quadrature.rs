use std::sync::OnceLock;

use crate::mesh::Point2;
use crate::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_GAUSS: usize = 64;

/// Legendre polynomial `P_n(t)` and its derivative by the three-term recurrence.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// Classical (unnormalized) Legendre polynomial `P_n(t)`.
pub fn legendre(n: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return 1.0;
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn compute_gauss(n: usize) -> GaussRule {
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, t);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        points[i] = -t;
        points[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        points[n / 2] = 0.0;
    }
    GaussRule { points, weights }
}

/// n-point Gauss-Legendre rule (exact for degree 2n-1), 1 ≤ n ≤ 64.
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
    assert!((1..=MAX_GAUSS).contains(&n), "Gauss rule size {n} out of range");
    &RULES.get_or_init(|| (1..=MAX_GAUSS).map(compute_gauss).collect())[n - 1]
}

/// Orthonormal edge Legendre polynomial `L̂_j(t) = √(2j+1) P_j(t)`, normalized
/// so that `(1/2)∫₋₁¹ L̂_i L̂_j dt = δ_ij`.
pub fn edge_legendre_eval(j: usize, t: f64) -> f64 {
    ((2 * j + 1) as f64).sqrt() * legendre(j, t)
}

/// Quadrature on a triangle in barycentric coordinates; weights sum to 1 so
/// that `∫_T f ≈ |T| Σ w_q f(x_q)`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub bary: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

/// 7-point degree-5 rule (Radon).
fn radon7() -> TriangleRule {
    let s = 15f64.sqrt();
    let a = (6.0 - s) / 21.0;
    let b = (6.0 + s) / 21.0;
    let wa = (155.0 - s) / 1200.0;
    let wb = (155.0 + s) / 1200.0;
    let third = 1.0 / 3.0;
    TriangleRule {
        bary: vec![
            [third, third, third],
            [a, a, 1.0 - 2.0 * a],
            [a, 1.0 - 2.0 * a, a],
            [1.0 - 2.0 * a, a, a],
            [b, b, 1.0 - 2.0 * b],
            [b, 1.0 - 2.0 * b, b],
            [1.0 - 2.0 * b, b, b],
        ],
        weights: vec![9.0 / 40.0, wa, wa, wa, wb, wb, wb],
        degree: 5,
    }
}

/// Collapsed-coordinate Gauss product rule exact for degree `degree`.
fn collapsed(degree: usize) -> TriangleRule {
    let n = (degree + 2).div_ceil(2);
    let g = gauss_legendre(n);
    let mut bary = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&tu, &wu) in g.points.iter().zip(&g.weights) {
        let u = 0.5 * (tu + 1.0);
        for (&tv, &wv) in g.points.iter().zip(&g.weights) {
            let v = 0.5 * (tv + 1.0);
            // (x, y) = (u, v(1 - u)) on the reference triangle, Jacobian (1 - u).
            let x = u;
            let y = v * (1.0 - u);
            bary.push([1.0 - x - y, x, y]);
            // Reference area 1/2; normalize weights to sum to 1.
            weights.push(0.25 * wu * wv * (1.0 - u) * 2.0);
        }
    }
    TriangleRule {
        bary,
        weights,
        degree,
    }
}

/// A triangle rule exact for polynomials of total degree ≤ `order`.
pub fn triangle_rule(order: usize) -> &'static TriangleRule {
    static RULES: OnceLock<Vec<TriangleRule>> = OnceLock::new();
    const MAX_ORDER: usize = 40;
    let order = order.max(1);
    assert!(order <= MAX_ORDER, "triangle rule order {order} too high");
    &RULES.get_or_init(|| {
        (0..=MAX_ORDER)
            .map(|p| if p <= 5 { radon7() } else { collapsed(p) })
            .collect()
    })[order]
}

/// Integrate `f` over a polygon by fanning it from `center` into triangles
/// and applying a triangle rule of the given order to each.
///
/// Fails with [`Error::NotStarShaped`] if any fan triangle has non-positive
/// area.
pub fn integrate_polygon_with<F>(
    f: F,
    points: &[Point2],
    center: Point2,
    rule: &TriangleRule,
    cell_id: usize,
) -> Result<f64>
where
    F: Fn(Point2) -> f64,
{
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let area = 0.5 * (a - center).cross(b - center);
        if !(area > 0.0) {
            return Err(Error::NotStarShaped { cell: cell_id });
        }
        let mut s = 0.0;
        for (l, &w) in rule.bary.iter().zip(&rule.weights) {
            let p = Point2::new(
                l[0] * center.x + l[1] * a.x + l[2] * b.x,
                l[0] * center.y + l[1] * a.y + l[2] * b.y,
            );
            s += w * f(p);
        }
        total += area * s;
    }
    Ok(total)
}

/// [`integrate_polygon_with`] using the rule for `order` and the polygon's
/// centroid as fan center.
pub fn integrate_polygon<F>(
    f: F,
    points: &[Point2],
    centroid: Point2,
    order: usize,
    cell_id: usize,
) -> Result<f64>
where
    F: Fn(Point2) -> f64,
{
    integrate_polygon_with(f, points, centroid, triangle_rule(order), cell_id)
}
