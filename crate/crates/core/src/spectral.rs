//! Largest eigenvalue of `M̂⁻¹K` by power iteration and the resulting CFL
//! step limits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_system, CsrMatrix};
use crate::mesh::Mesh;
use crate::timeint::{make_tableau, IntegratorKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOptions {
    /// Relative change of the Rayleigh quotient at which to stop.
    pub tol: f64,
    /// Defaults to `50·√n + 1000`.
    pub max_iters: Option<usize>,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub lambda_max: f64,
    pub iterations: usize,
    /// `‖K v - λ M̂ v‖_{M̂⁻¹} / λ` for the final M̂-normalized iterate.
    pub residual: f64,
    /// `2 / λ_max`.
    pub dt_fe: f64,
    /// Filled in by callers that know the mesh; NaN otherwise.
    pub h_min: f64,
    /// `λ_max·h_min²`.
    pub bound_product: f64,
    /// M̂-normalized approximate top eigenvector.
    pub eigenvector: Vec<f64>,
    /// Rayleigh quotient at every iteration.
    pub history: Vec<f64>,
}

impl SpectralReport {
    pub fn with_h_min(mut self, h_min: f64) -> Self {
        self.h_min = h_min;
        self.bound_product = self.lambda_max * h_min * h_min;
        self
    }
}

fn m_norm(v: &[f64], m: &[f64]) -> f64 {
    v.iter().zip(m).map(|(x, d)| d * x * x).sum::<f64>().sqrt()
}

/// Power iteration for the largest eigenvalue of `M̂⁻¹K` (`M̂` diagonal,
/// positive), normalized in the M̂ inner product.
pub fn lambda_max_power(k: &CsrMatrix, m: &[f64], opts: &PowerOptions) -> Result<SpectralReport> {
    let n = k.n();
    if m.len() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "stiffness is {n}×{n} but mass has {} entries",
            m.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if let Some(i) = m.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument(format!("mass entry {i} is not positive")));
    }
    let max_iters = opts
        .max_iters
        .unwrap_or_else(|| (50.0 * (n as f64).sqrt()) as usize + 1000);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let nv = m_norm(&v, m);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut kv = vec![0.0; n];
    let mut lambda_prev = f64::NAN;
    let mut change = f64::INFINITY;
    let mut history = Vec::new();
    for it in 1..=max_iters {
        k.matvec_into(&v, &mut kv);
        let lambda: f64 = v.iter().zip(&kv).map(|(a, b)| a * b).sum();
        history.push(lambda);
        if !lambda.is_finite() {
            break;
        }
        change = ((lambda - lambda_prev) / lambda).abs();
        if change < opts.tol {
            let residual = v
                .iter()
                .zip(&kv)
                .zip(m)
                .map(|((x, y), d)| {
                    let r = y - lambda * d * x;
                    r * r / d
                })
                .sum::<f64>()
                .sqrt()
                / lambda;
            return Ok(SpectralReport {
                lambda_max: lambda,
                iterations: it,
                residual,
                dt_fe: 2.0 / lambda,
                h_min: f64::NAN,
                bound_product: f64::NAN,
                eigenvector: v,
                history,
            });
        }
        lambda_prev = lambda;
        for ((x, y), d) in v.iter_mut().zip(&kv).zip(m) {
            *x = y / d;
        }
        let nv = m_norm(&v, m);
        if !(nv > 0.0) || !nv.is_finite() {
            break;
        }
        v.iter_mut().for_each(|x| *x /= nv);
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        lambda: lambda_prev,
        change,
        vector: v,
    })
}

/// [`lambda_max_power`], retried with the tolerance loosened 100-fold after
/// each non-convergence until it would exceed `loosest_tol`.
pub fn lambda_max_loosening(
    k: &CsrMatrix,
    m: &[f64],
    opts: &PowerOptions,
    loosest_tol: f64,
) -> Result<SpectralReport> {
    let mut opts = opts.clone();
    loop {
        match lambda_max_power(k, m, &opts) {
            Err(Error::NoConvergence { iterations, change, .. }) if opts.tol * 100.0 <= loosest_tol => {
                log::warn!(
                    "power iteration: relative change {change:.2e} after {iterations} iterations, retrying with tol {:.1e}",
                    opts.tol * 100.0
                );
                opts.tol *= 100.0;
            }
            other => return other,
        }
    }
}

/// Loosest tolerance the drivers fall back to.
pub const FALLBACK_TOL: f64 = 1e-6;

/// Time step `safety · C_SSP · 2/λ_max`.
pub fn dt_limits(report: &SpectralReport, integrator: IntegratorKind, safety: f64) -> Result<f64> {
    dt_from_lambda(report.lambda_max, integrator, safety)
}

pub fn dt_from_lambda(lambda_max: f64, integrator: IntegratorKind, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety.is_finite()) {
        return Err(Error::InvalidArgument(format!("safety factor must be positive, got {safety}")));
    }
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidArgument(format!("λ_max must be positive, got {lambda_max}")));
    }
    Ok(safety * make_tableau(integrator).c_ssp * 2.0 / lambda_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub level: usize,
    pub h_min: f64,
    pub n_free: usize,
    pub lambda_max: f64,
    pub dt_fe: f64,
    pub bound_product: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable {
    pub rows: Vec<BoundRow>,
    /// Max/min of `λ_max·h_min²` over all levels.
    pub spread: f64,
    /// Some consecutive pair of products differs by more than a factor 2.
    pub flagged: bool,
}

/// `λ_max·h_min²` across a refinement sequence.
pub fn verify_spectral_bound(meshes: &[Mesh], k: usize, delta: f64, opts: &PowerOptions) -> Result<BoundTable> {
    if meshes.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 refinement levels, got {}",
            meshes.len()
        )));
    }
    let mut rows = Vec::with_capacity(meshes.len());
    for (level, mesh) in meshes.iter().enumerate() {
        let sys = assemble_system(mesh, k, delta)?;
        let h_min = mesh.stats().h_min;
        let rep = lambda_max_loosening(&sys.k_h, &sys.m_lumped, opts, FALLBACK_TOL)?.with_h_min(h_min);
        rows.push(BoundRow {
            level,
            h_min,
            n_free: sys.n_free,
            lambda_max: rep.lambda_max,
            dt_fe: rep.dt_fe,
            bound_product: rep.bound_product,
        });
    }
    Ok(bound_table(rows))
}

pub fn bound_table(rows: Vec<BoundRow>) -> BoundTable {
    let products: Vec<f64> = rows.iter().map(|r| r.bound_product).collect();
    let max = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = products.iter().copied().fold(f64::INFINITY, f64::min);
    let flagged = products.windows(2).any(|w| {
        let r = w[1] / w[0];
        !(0.5..=2.0).contains(&r)
    });
    BoundTable {
        rows,
        spread: max / min,
        flagged,
    }
}
