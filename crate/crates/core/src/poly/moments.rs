use nalgebra::DMatrix;

use super::{dim_poly, gauss_legendre, multi_indices, MonomialBasis, MultiIndex};
use crate::mesh::Point2;

/// Exact `∫_E X^a Y^b dE` with `X = (x - x_c)/h`, `Y = (y - y_c)/h`.
///
/// The divergence theorem with the field `(h X^{a+1} Y^b / (a+1), 0)` turns
/// the cell integral into a sum of edge integrals of polynomials, each done by
/// Gauss-Legendre with enough points to be exact.
pub fn polygon_moment(points: &[Point2], centroid: Point2, h: f64, alpha: MultiIndex) -> f64 {
    let (a, b) = (alpha.a1 as i32, alpha.a2 as i32);
    let npts = (alpha.degree() as usize + 2).div_ceil(2);
    let g = gauss_legendre(npts);
    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        let dy = q.y - p.y;
        if dy == 0.0 {
            continue;
        }
        let mut s = 0.0;
        for (&t, &w) in g.points.iter().zip(&g.weights) {
            let s01 = 0.5 * (t + 1.0);
            let x = (p.x + s01 * (q.x - p.x) - centroid.x) / h;
            let y = (p.y + s01 * (q.y - p.y) - centroid.y) / h;
            s += 0.5 * w * x.powi(a + 1) * y.powi(b);
        }
        total += dy * s;
    }
    total * h / (a as f64 + 1.0)
}

/// All moments of degree ≤ `max_degree` for one cell, indexed graded-lex.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub max_degree: usize,
    values: Vec<f64>,
}

impl MomentTable {
    pub fn new(points: &[Point2], centroid: Point2, h: f64, max_degree: usize) -> Self {
        let values = multi_indices(max_degree)
            .into_iter()
            .map(|a| polygon_moment(points, centroid, h, a))
            .collect();
        Self { max_degree, values }
    }

    pub fn get(&self, a1: u32, a2: u32) -> f64 {
        self.values[MultiIndex::new(a1, a2).index()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Mass Gram `H_{αβ} = ∫ m_α m_β` and stiffness Gram `G_{αβ} = ∫ ∇m_α·∇m_β`.
pub fn monomial_grams(points: &[Point2], basis: &MonomialBasis) -> (DMatrix<f64>, DMatrix<f64>) {
    let table = MomentTable::new(points, basis.centroid, basis.h, 2 * basis.k);
    grams_from_table(&table, basis)
}

pub(crate) fn grams_from_table(
    table: &MomentTable,
    basis: &MonomialBasis,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nk = dim_poly(basis.k);
    let inv_h2 = 1.0 / (basis.h * basis.h);
    let mut h = DMatrix::zeros(nk, nk);
    let mut g = DMatrix::zeros(nk, nk);
    for (i, a) in basis.indices.iter().enumerate() {
        for (j, b) in basis.indices.iter().enumerate().skip(i) {
            let hv = table.get(a.a1 + b.a1, a.a2 + b.a2);
            let mut gv = 0.0;
            if a.a1 > 0 && b.a1 > 0 {
                gv += (a.a1 * b.a1) as f64 * table.get(a.a1 + b.a1 - 2, a.a2 + b.a2);
            }
            if a.a2 > 0 && b.a2 > 0 {
                gv += (a.a2 * b.a2) as f64 * table.get(a.a1 + b.a1, a.a2 + b.a2 - 2);
            }
            gv *= inv_h2;
            h[(i, j)] = hv;
            h[(j, i)] = hv;
            g[(i, j)] = gv;
            g[(j, i)] = gv;
        }
    }
    (h, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::polygon_geometry;
    use crate::poly::{integrate_polygon, integrate_polygon_with, triangle_rule};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    /// Star-shaped random polygon: sorted angles, random radii.
    fn random_polygon(rng: &mut ChaCha8Rng) -> Vec<Point2> {
        let n = rng.gen_range(3..=9);
        let mut angles: Vec<f64> = (0..n)
            .map(|i| (i as f64 + rng.gen_range(0.1..0.9)) * std::f64::consts::TAU / n as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        let c = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let scale = rng.gen_range(0.05..2.0);
        angles
            .into_iter()
            .map(|a| {
                let r = scale * rng.gen_range(0.6..1.0);
                Point2::new(c.x + r * a.cos(), c.y + r * a.sin())
            })
            .collect()
    }

    #[test]
    fn unit_square_moments() {
        let pts = unit_square();
        let c = Point2::new(0.5, 0.5);
        let h = 2f64.sqrt();
        assert_abs_diff_eq!(polygon_moment(&pts, c, h, MultiIndex::new(0, 0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(polygon_moment(&pts, c, h, MultiIndex::new(1, 0)), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(
            polygon_moment(&pts, c, h, MultiIndex::new(2, 0)),
            1.0 / 24.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn unit_square_grams() {
        let basis = MonomialBasis::new(1, Point2::new(0.5, 0.5), 2f64.sqrt());
        let (h, g) = monomial_grams(&unit_square(), &basis);
        let expect = [1.0, 1.0 / 24.0, 1.0 / 24.0];
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { expect[i] } else { 0.0 };
                assert_abs_diff_eq!(h[(i, j)], e, epsilon = 1e-15);
            }
            assert_eq!(g[(0, i)], 0.0);
            assert_eq!(g[(i, 0)], 0.0);
        }
        // ∇m_(1,0) = (1/h, 0) → ∫|∇m|² = 1/2.
        assert_abs_diff_eq!(g[(1, 1)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn mass_gram_matches_seven_point_fan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pts = random_polygon(&mut rng);
            let geo = polygon_geometry(&pts).unwrap();
            let basis = MonomialBasis::new(2, geo.centroid, geo.diameter);
            let (h, _) = monomial_grams(&pts, &basis);
            // Products of quadratics are quartic; the 7-point rule is exact to degree 5.
            let rule = triangle_rule(4);
            assert_eq!(rule.bary.len(), 7);
            for (i, &a) in basis.indices.iter().enumerate() {
                for (j, &b) in basis.indices.iter().enumerate() {
                    let q = integrate_polygon_with(
                        |p| basis.eval(a, p) * basis.eval(b, p),
                        &pts,
                        geo.centroid,
                        rule,
                        0,
                    )
                    .unwrap();
                    assert_abs_diff_eq!(h[(i, j)], q, epsilon = 1e-13 * geo.area.max(1.0));
                }
            }
        }
    }

    #[test]
    fn exact_moments_on_random_polygons() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let pts = random_polygon(&mut rng);
            let geo = polygon_geometry(&pts).unwrap();
            let basis = MonomialBasis::new(3, geo.centroid, geo.diameter);
            let area0 = polygon_moment(&pts, geo.centroid, geo.diameter, MultiIndex::new(0, 0));
            assert_abs_diff_eq!(area0, geo.area, epsilon = 1e-13 * geo.area.max(1.0));
            let (h, _) = monomial_grams(&pts, &basis);
            for (i, &a) in basis.indices.iter().enumerate() {
                for (j, &b) in basis.indices.iter().enumerate() {
                    let q = integrate_polygon(
                        |p| basis.eval(a, p) * basis.eval(b, p),
                        &pts,
                        geo.centroid,
                        6,
                        0,
                    )
                    .unwrap();
                    assert!((h[(i, j)] - q).abs() < 1e-12 * geo.area, "{} vs {}", h[(i, j)], q);
                }
            }
            let chol = nalgebra::Cholesky::new(h);
            assert!(chol.is_some(), "mass Gram not SPD");
        }
    }

    #[test]
    fn stiffness_gram_kernel_is_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let pts = random_polygon(&mut rng);
        let geo = polygon_geometry(&pts).unwrap();
        let basis = MonomialBasis::new(2, geo.centroid, geo.diameter);
        let (_, g) = monomial_grams(&pts, &basis);
        let eig = nalgebra::SymmetricEigen::new(g);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14);
        assert!(ev[1] > 1e-6);
    }
}
