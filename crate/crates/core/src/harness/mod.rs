//! Manufactured-solution convergence studies.
//!
//! The reference problem is `u_t - Δu = f` on the unit square with
//! `u = e^t sin(πx) sin(πy)`, homogeneous Dirichlet data and `T = 1`.

mod output;

pub use output::{emit_outputs, to_csv_string, to_svg_string};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{assemble_load, assemble_system, SystemMatrices, DEFAULT_DELTA};
use crate::mesh::{generate_mesh, Mesh, MeshFamily, MeshParams, Point2};
use crate::poly::integrate_polygon;
use crate::projectors::interpolate_dofs;
use crate::spectral::{dt_from_lambda, lambda_max_loosening, PowerOptions, FALLBACK_TOL};
use crate::timeint::{integrate, make_tableau, IntegrateOptions, IntegratorKind, SeparableLoad};
use crate::{Error, Result};

/// `u = e^t sin(πx) sin(πy)`, `f = (1 + 2π²) u`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ManufacturedCase;

pub fn manufactured_case() -> ManufacturedCase {
    ManufacturedCase
}

impl ManufacturedCase {
    pub fn u(&self, t: f64, x: f64, y: f64) -> f64 {
        t.exp() * (PI * x).sin() * (PI * y).sin()
    }

    pub fn grad_u(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        let s = t.exp() * PI;
        (
            s * (PI * x).cos() * (PI * y).sin(),
            s * (PI * x).sin() * (PI * y).cos(),
        )
    }

    pub fn u0(&self, x: f64, y: f64) -> f64 {
        self.u(0.0, x, y)
    }

    pub fn f(&self, t: f64, x: f64, y: f64) -> f64 {
        t.exp() * self.f_spatial(x, y)
    }

    /// Spatial factor of the separable source, `f(t, ·) = e^t f_spatial`.
    pub fn f_spatial(&self, x: f64, y: f64) -> f64 {
        (1.0 + 2.0 * PI * PI) * (PI * x).sin() * (PI * y).sin()
    }
}

/// `(‖u - Π⁰u_h‖_{L²}, ‖∇u - ∇Π∇u_h‖_{L²})` summed over cells, with `u_h` a
/// global DOF vector.
pub fn error_norms_with<U, G>(sys: &SystemMatrices, mesh: &Mesh, u_h: &[f64], u: U, grad: G) -> Result<(f64, f64)>
where
    U: Fn(Point2) -> f64 + Sync,
    G: Fn(Point2) -> (f64, f64) + Sync,
{
    let k = sys.k;
    let order = 2 * k + 8;
    let parts: Vec<(f64, f64)> = sys
        .projectors
        .par_iter()
        .enumerate()
        .map(|(c, pack)| {
            let l2g = sys.numbering.local_to_global(mesh, c);
            let loc = nalgebra::DVector::from_iterator(l2g.len(), l2g.iter().map(|&g| u_h[g]));
            let c0 = &pack.p_zero * &loc;
            let cn = &pack.p_nabla * &loc;
            let basis = &pack.basis;
            let l2 = integrate_polygon(
                |p| {
                    let v: f64 = basis.eval_all(p).iter().zip(c0.iter()).map(|(m, a)| m * a).sum();
                    let e = u(p) - v;
                    e * e
                },
                &pack.points,
                basis.centroid,
                order,
                c,
            )?;
            let h1 = integrate_polygon(
                |p| {
                    let (mut gx, mut gy) = (0.0, 0.0);
                    for (g, a) in basis.grad_all(p).iter().zip(cn.iter()) {
                        gx += a * g.0;
                        gy += a * g.1;
                    }
                    let (ux, uy) = grad(p);
                    (ux - gx).powi(2) + (uy - gy).powi(2)
                },
                &pack.points,
                basis.centroid,
                order,
                c,
            )?;
            Ok((l2, h1))
        })
        .collect::<Result<_>>()?;
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Error norms of a global DOF vector against the manufactured solution at `t`.
pub fn error_norms(sys: &SystemMatrices, mesh: &Mesh, u_h: &[f64], case: &ManufacturedCase, t: f64) -> Result<(f64, f64)> {
    error_norms_with(
        sys,
        mesh,
        u_h,
        |p| case.u(t, p.x, p.y),
        |p| case.grad_u(t, p.x, p.y),
    )
}

/// How the time step of a convergence level is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// `safety · C_SSP · 2/λ_max`.
    Spectral(f64),
    /// `θ · h_min²`.
    Theta(f64),
    /// `θ · h_min²` with θ calibrated as `safety · C_SSP · 2 / max_ℓ(λ_ℓ h_min,ℓ²)`
    /// over all levels.
    ThetaCalibrated(f64),
}

impl fmt::Display for DtPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtPolicy::Spectral(s) => write!(f, "spectral:{s}"),
            DtPolicy::Theta(t) => write!(f, "theta:{t}"),
            DtPolicy::ThetaCalibrated(s) => write!(f, "theta:auto:{s}"),
        }
    }
}

impl FromStr for DtPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid dt policy '{s}' (expected spectral:<safety> or theta:<θ|auto>)"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let parse = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| *x > 0.0 && x.is_finite())
                .ok_or_else(bad)
        };
        match kind {
            "spectral" => Ok(DtPolicy::Spectral(parse(value)?)),
            "theta" => match value.split_once(':') {
                Some(("auto", s)) => Ok(DtPolicy::ThetaCalibrated(parse(s)?)),
                None if value == "auto" => Ok(DtPolicy::ThetaCalibrated(0.9)),
                None => Ok(DtPolicy::Theta(parse(value)?)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub family: MeshFamily,
    /// Mesh resolution parameter per level.
    pub levels: Vec<usize>,
    pub k: usize,
    pub integrator: IntegratorKind,
    pub dt_policy: DtPolicy,
    pub delta: f64,
    pub distortion: f64,
    pub lloyd_iters: usize,
    pub seed: u64,
    pub t_end: f64,
    pub tol_eig: f64,
}

impl ConvergenceConfig {
    pub fn new(family: MeshFamily, levels: Vec<usize>) -> Self {
        Self {
            family,
            levels,
            k: 1,
            integrator: IntegratorKind::Ssprk3,
            dt_policy: DtPolicy::ThetaCalibrated(0.9),
            delta: DEFAULT_DELTA,
            distortion: 0.3,
            lloyd_iters: 5,
            seed: 1,
            t_end: 1.0,
            tol_eig: 1e-10,
        }
    }

    pub fn mesh_params(&self, n: usize) -> MeshParams {
        MeshParams::new(self.family, n)
            .distortion(self.distortion)
            .lloyd_iters(self.lloyd_iters)
            .seed(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// The chosen `dt` exceeds `C_SSP · 2/λ_max`; the row still ran.
    UnstableByConfiguration,
    /// The level aborted; errors are NaN.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub level: usize,
    pub n: usize,
    pub h_max: f64,
    pub h_min: f64,
    pub n_free: usize,
    pub lambda_max: f64,
    pub dt: f64,
    pub err_l2: f64,
    pub err_h1: f64,
    pub wall_time: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocTable {
    pub family: MeshFamily,
    pub k: usize,
    pub integrator: IntegratorKind,
    pub rows: Vec<ErrorReport>,
    /// Between rows `ℓ` and `ℓ + 1`.
    pub eoc_l2: Vec<f64>,
    pub eoc_h1: Vec<f64>,
}

/// `ln(e₁/e₂) / ln(h₁/h₂)`.
pub fn eoc(e1: f64, e2: f64, h1: f64, h2: f64) -> f64 {
    (e1 / e2).ln() / (h1 / h2).ln()
}

impl EocTable {
    pub fn new(family: MeshFamily, k: usize, integrator: IntegratorKind, rows: Vec<ErrorReport>) -> Self {
        let pairs = |f: fn(&ErrorReport) -> f64| -> Vec<f64> {
            rows.windows(2)
                .map(|w| eoc(f(&w[0]), f(&w[1]), w[0].h_max, w[1].h_max))
                .collect()
        };
        let eoc_l2 = pairs(|r| r.err_l2);
        let eoc_h1 = pairs(|r| r.err_h1);
        Self {
            family,
            k,
            integrator,
            rows,
            eoc_l2,
            eoc_h1,
        }
    }
}

struct Level {
    n: usize,
    mesh: Mesh,
    sys: SystemMatrices,
    lambda_max: f64,
    h_max: f64,
    h_min: f64,
    setup_time: f64,
}

fn prepare_level(cfg: &ConvergenceConfig, n: usize) -> Result<Level> {
    let start = Instant::now();
    let mesh = generate_mesh(&cfg.mesh_params(n))?;
    let stats = mesh.stats();
    let sys = assemble_system(&mesh, cfg.k, cfg.delta)?;
    let opts = PowerOptions {
        tol: cfg.tol_eig,
        max_iters: None,
        seed: cfg.seed,
    };
    let rep = lambda_max_loosening(&sys.k_h, &sys.m_lumped, &opts, FALLBACK_TOL)?;
    Ok(Level {
        n,
        mesh,
        sys,
        lambda_max: rep.lambda_max,
        h_max: stats.h_max,
        h_min: stats.h_min,
        setup_time: start.elapsed().as_secs_f64(),
    })
}

/// Solve the manufactured problem on one prepared mesh level and return the
/// errors at `t_end`.
pub fn solve_manufactured(
    mesh: &Mesh,
    sys: &SystemMatrices,
    integrator: IntegratorKind,
    dt: f64,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<(f64, f64, crate::timeint::Integration)> {
    let case = manufactured_case();
    let tab = make_tableau(integrator);
    let u0 = sys.restrict(&interpolate_dofs(mesh, sys.k, |p| case.u0(p.x, p.y))?);
    let base = assemble_load(mesh, sys, |p| case.f_spatial(p.x, p.y))?;
    let load = SeparableLoad {
        base,
        factor: f64::exp,
    };
    let run = integrate(&sys.k_h, &sys.m_lumped, &load, &tab, u0, dt, t_end, opts)?;
    let (l2, h1) = error_norms(sys, mesh, &sys.expand(&run.state.u), &case, t_end)?;
    Ok((l2, h1, run))
}

/// Run the manufactured problem on every level and tabulate errors and EOCs.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<EocTable> {
    if cfg.levels.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least 2 levels, got {}",
            cfg.levels.len()
        )));
    }
    if !(1..=2).contains(&cfg.k) {
        return Err(Error::InvalidArgument(format!("k must be 1 or 2, got {}", cfg.k)));
    }
    let levels: Vec<Level> = cfg
        .levels
        .iter()
        .map(|&n| prepare_level(cfg, n))
        .collect::<Result<_>>()?;
    let c_ssp = make_tableau(cfg.integrator).c_ssp;
    let theta = match cfg.dt_policy {
        DtPolicy::Theta(t) => Some(t),
        DtPolicy::ThetaCalibrated(s) => {
            let worst = levels
                .iter()
                .map(|l| l.lambda_max * l.h_min * l.h_min)
                .fold(0.0, f64::max);
            let t = s * c_ssp * 2.0 / worst;
            log::info!("calibrated θ = {t:.6e}");
            Some(t)
        }
        DtPolicy::Spectral(_) => None,
    };

    let mut rows = Vec::with_capacity(levels.len());
    for (i, lvl) in levels.iter().enumerate() {
        let start = Instant::now();
        let dt = match (cfg.dt_policy, theta) {
            (DtPolicy::Spectral(s), _) => dt_from_lambda(lvl.lambda_max, cfg.integrator, s)?,
            (_, Some(t)) => t * lvl.h_min * lvl.h_min,
            _ => unreachable!(),
        };
        let limit = c_ssp * 2.0 / lvl.lambda_max;
        let mut status = if dt > limit {
            log::warn!("level {i}: dt {dt:.3e} exceeds the SSP limit {limit:.3e}");
            RowStatus::UnstableByConfiguration
        } else {
            RowStatus::Ok
        };
        let (err_l2, err_h1) = match solve_manufactured(&lvl.mesh, &lvl.sys, cfg.integrator, dt, cfg.t_end, &IntegrateOptions::default()) {
            Ok((l2, h1, _)) => (l2, h1),
            Err(e) if e.is_numerical() => {
                log::warn!("level {i} failed: {e}");
                status = RowStatus::Failed(e.to_string());
                (f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e),
        };
        let wall = lvl.setup_time + start.elapsed().as_secs_f64();
        log::info!(
            "level {i} (n = {}): h_max {:.4e}, n_free {}, λ_max {:.4e}, dt {:.3e}, L2 {err_l2:.4e}, H1 {err_h1:.4e}",
            lvl.n,
            lvl.h_max,
            lvl.sys.n_free,
            lvl.lambda_max,
            dt
        );
        rows.push(ErrorReport {
            level: i,
            n: lvl.n,
            h_max: lvl.h_max,
            h_min: lvl.h_min,
            n_free: lvl.sys.n_free,
            lambda_max: lvl.lambda_max,
            dt,
            err_l2,
            err_h1,
            wall_time: wall,
            status,
        });
    }
    Ok(EocTable::new(cfg.family, cfg.k, cfg.integrator, rows))
}
