#![allow(dead_code)]

use lumpvem::{CsrMatrix, Point2};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Star-shaped polygon with 3..=9 vertices, counter-clockwise.
pub fn random_polygon(rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let n = rng.gen_range(3..=9);
    let mut angles: Vec<f64> = (0..n)
        .map(|i| (i as f64 + rng.gen_range(0.1..0.9)) * std::f64::consts::TAU / n as f64)
        .collect();
    angles.sort_by(f64::total_cmp);
    let scale = rng.gen_range(0.05..2.0);
    let (cx, cy) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    angles
        .into_iter()
        .map(|a| {
            let r = scale * rng.gen_range(0.7..1.0);
            Point2::new(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Eigen-decomposition of `M̂^{-1/2} K M̂^{-1/2}`: ascending eigenvalues and
/// the matching generalized eigenvectors, M̂-normalized.
pub fn dense_generalized_eigen(k: &CsrMatrix, m: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = k.n();
    let kd = k.to_dense();
    let s: Vec<f64> = m.iter().map(|d| 1.0 / d.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| s[i] * kd[i][j] * s[j]);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| s[r] * eig.eigenvectors[(r, i)]).collect())
        .collect();
    (values, vectors)
}

/// `ln(e₁/e₂)/ln(r)` over successive halvings of the step.
pub fn observed_order(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).ln() / ratio.ln()).collect()
}

/// `p`-quantile (nearest rank, lower) of `values`.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * p) as usize]
}

/// Largest relative change of `a` vs `b` over matching entries.
pub fn relative_drift(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()))
        .fold(0.0, f64::max)
}

/// Mesh with the parameters used by the convergence studies.
pub fn study_mesh(family: lumpvem::MeshFamily, n: usize) -> lumpvem::Mesh {
    let params = lumpvem::ConvergenceConfig::new(family, Vec::new()).mesh_params(n);
    lumpvem::generate_mesh(&params).expect("mesh")
}
