//! Local and global matrices of the lumped semi-discrete system
//! `M̂ u' + K u = f`.
//!
//! The local stiffness is projector consistency plus a "dofi-dofi"
//! stabilization on the projector kernel. The lumped mass is the row sum of
//! the consistent local mass, which only needs the integrals `∫ψ_i` and is
//! computed directly from the monomial data in `O(N_k³)` per cell, then
//! floored at `δ|E|/N_dof`.

mod sparse;

pub use sparse::CsrMatrix;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::solve_vec;
use crate::mesh::{Mesh, Point2};
use crate::poly::integrate_polygon;
use crate::projectors::{build_projectors, GlobalNumbering, ProjectorPack};
use crate::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.1;
const TAU_FLOOR: f64 = 1e-12;

/// Local stiffness `Pᵀ G P + τ (I - D P)ᵀ (I - D P)` with
/// `τ = max(trace(consistency)/N_dof, 1e-12)`.
pub fn local_stiffness(pack: &ProjectorPack) -> DMatrix<f64> {
    let n = pack.n_dof();
    let cons = pack.p_nabla.transpose() * &pack.g * &pack.p_nabla;
    let tau = (cons.trace() / n as f64).max(TAU_FLOOR);
    let r = DMatrix::<f64>::identity(n, n) - &pack.d * &pack.p_nabla;
    let k = cons + (r.transpose() * r) * tau;
    symmetrize(k)
}

/// Consistent local mass `P0ᵀ H P0 + |E| (I - D P0)ᵀ (I - D P0)`.
pub fn local_consistent_mass(pack: &ProjectorPack) -> DMatrix<f64> {
    let n = pack.n_dof();
    let cons = pack.p_zero.transpose() * &pack.h * &pack.p_zero;
    let r = DMatrix::<f64>::identity(n, n) - &pack.d * &pack.p_zero;
    symmetrize(cons + (r.transpose() * r) * pack.area)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LumpedWeights {
    /// Row sums `s_i = ∫ψ_i` of the consistent mass.
    pub raw: Vec<f64>,
    /// `max(s_i, δ|E|/N_dof)`.
    pub floored: Vec<f64>,
    pub delta: f64,
}

/// Row-sum lumped weights of one cell.
///
/// Solves `H w = c` with `c_α = ∫ m_α`, then `s = Cᵀ w`, where `C[α][i] = ∫ψ_i m_α`
/// holds the computable moments of the basis functions. Since `w` represents
/// the constant 1 in the monomial basis, `s_i = ∫ψ_i`.
pub fn lumped_weights(pack: &ProjectorPack, delta: f64) -> Result<LumpedWeights> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let w = solve_vec(&pack.h, &pack.moments)?;
    let raw: DVector<f64> = pack.c.transpose() * w;
    let floor = delta * pack.area / pack.n_dof() as f64;
    let raw: Vec<f64> = raw.iter().copied().collect();
    let floored = raw.iter().map(|&s| s.max(floor)).collect();
    Ok(LumpedWeights { raw, floored, delta })
}

/// Global lumped system with homogeneous Dirichlet conditions eliminated.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub k: usize,
    pub delta: f64,
    pub numbering: GlobalNumbering,
    /// Stiffness on free DOFs.
    pub k_h: CsrMatrix,
    /// Lumped (floored) mass on free DOFs.
    pub m_lumped: Vec<f64>,
    /// Global DOF → free index, `None` for boundary DOFs.
    pub free_map: Vec<Option<usize>>,
    /// Free index → global DOF.
    pub free_dofs: Vec<usize>,
    pub n_free: usize,
    /// Raw row-sum weights on all global DOFs before elimination.
    pub raw_global: Vec<f64>,
    /// Floored weights on all global DOFs before elimination.
    pub floored_global: Vec<f64>,
    pub projectors: Vec<ProjectorPack>,
}

impl SystemMatrices {
    /// Global DOF vector from a free vector, zero on the boundary.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.numbering.len()];
        for (f, &g) in self.free_dofs.iter().enumerate() {
            out[g] = free[f];
        }
        out
    }

    /// Free part of a global DOF vector.
    pub fn restrict(&self, global: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&g| global[g]).collect()
    }

    pub fn raw_total(&self) -> f64 {
        self.raw_global.iter().sum()
    }

    pub fn floored_total(&self) -> f64 {
        self.floored_global.iter().sum()
    }
}

struct LocalBlock {
    l2g: Vec<usize>,
    k: DMatrix<f64>,
    weights: LumpedWeights,
}

/// Assemble stiffness and lumped mass for order `k` and flooring `delta`.
///
/// Element work runs in parallel; the scatter runs in cell order so the result
/// does not depend on the number of workers.
pub fn assemble_system(mesh: &Mesh, k: usize, delta: f64) -> Result<SystemMatrices> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!("polynomial order k must be ≥ 1, got {k}")));
    }
    let num = GlobalNumbering::new(mesh, k);
    let packs: Vec<ProjectorPack> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| build_projectors(mesh, c, k))
        .collect::<Result<_>>()?;
    let blocks: Vec<LocalBlock> = packs
        .par_iter()
        .enumerate()
        .map(|(c, pack)| {
            Ok(LocalBlock {
                l2g: num.local_to_global(mesh, c),
                k: local_stiffness(pack),
                weights: lumped_weights(pack, delta)?,
            })
        })
        .collect::<Result<_>>()?;

    let boundary = num.boundary_mask(mesh);
    let mut free_map = vec![None; num.len()];
    let mut free_dofs = Vec::new();
    for (g, &b) in boundary.iter().enumerate() {
        if !b {
            free_map[g] = Some(free_dofs.len());
            free_dofs.push(g);
        }
    }
    if free_dofs.is_empty() {
        return Err(Error::InvalidArgument(
            "mesh has no free degrees of freedom after Dirichlet elimination".into(),
        ));
    }

    let mut raw_global = vec![0.0; num.len()];
    let mut floored_global = vec![0.0; num.len()];
    let mut triplets = Vec::new();
    for b in &blocks {
        for (l, &g) in b.l2g.iter().enumerate() {
            raw_global[g] += b.weights.raw[l];
            floored_global[g] += b.weights.floored[l];
        }
        for (li, &gi) in b.l2g.iter().enumerate() {
            let Some(fi) = free_map[gi] else { continue };
            for (lj, &gj) in b.l2g.iter().enumerate() {
                if let Some(fj) = free_map[gj] {
                    triplets.push((fi, fj, b.k[(li, lj)]));
                }
            }
        }
    }
    let n_free = free_dofs.len();
    let k_h = CsrMatrix::from_triplets(n_free, triplets);
    let m_lumped: Vec<f64> = free_dofs.iter().map(|&g| floored_global[g]).collect();
    if let Some(i) = m_lumped.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidMesh(format!(
            "lumped mass is not positive at free DOF {i} ({})",
            m_lumped[i]
        )));
    }
    log::debug!(
        "assembled k={k}: {} global DOFs, {n_free} free, nnz(K) = {}",
        num.len(),
        k_h.nnz()
    );
    Ok(SystemMatrices {
        k,
        delta,
        numbering: num,
        k_h,
        m_lumped,
        free_map,
        free_dofs,
        n_free,
        raw_global,
        floored_global,
        projectors: packs,
    })
}

/// Load vector on all global DOFs: `F_i = Σ_α P_zero[α][i] ∫ f m_α`.
pub fn assemble_load_global<F>(mesh: &Mesh, sys: &SystemMatrices, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point2) -> f64 + Sync,
{
    let k = sys.k;
    let locals: Vec<DVector<f64>> = sys
        .projectors
        .par_iter()
        .enumerate()
        .map(|(c, pack)| {
            let q = pack
                .basis
                .indices
                .iter()
                .map(|&a| {
                    integrate_polygon(|p| f(p) * pack.basis.eval(a, p), &pack.points, pack.basis.centroid, 2 * k + 8, c)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(pack.p_zero.transpose() * DVector::from_vec(q))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; sys.numbering.len()];
    for (c, loc) in locals.iter().enumerate() {
        for (l, g) in sys.numbering.local_to_global(mesh, c).into_iter().enumerate() {
            out[g] += loc[l];
        }
    }
    Ok(out)
}

/// Load vector restricted to free DOFs.
pub fn assemble_load<F>(mesh: &Mesh, sys: &SystemMatrices, f: F) -> Result<Vec<f64>>
where
    F: Fn(Point2) -> f64 + Sync,
{
    Ok(sys.restrict(&assemble_load_global(mesh, sys, f)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshFamily, MeshParams};
    use crate::projectors::build_projectors_polygon;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    fn pentagon() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.2, 0.1),
            Point2::new(1.4, 0.9),
            Point2::new(0.6, 1.5),
            Point2::new(-0.2, 0.8),
        ]
    }

    #[test]
    fn constants_in_stiffness_kernel() {
        for k in 1..=2 {
            let p = build_projectors_polygon(&pentagon(), k).unwrap();
            let kk = local_stiffness(&p);
            let ones = DVector::from_element(p.n_dof(), 1.0);
            let ones = if k == 1 {
                ones
            } else {
                // Interpolant of 1: vertices 1, edge j=0 moments 1, constant interior moment 1.
                p.d.column(0).into_owned()
            };
            let r = &kk * ones;
            assert!(r.amax() < 1e-12, "k={k}: {}", r.amax());
        }
    }

    #[test]
    fn square_consistency_entry() {
        let p = build_projectors_polygon(&unit_square(), 1).unwrap();
        let cons = p.p_nabla.transpose() * &p.g * &p.p_nabla;
        assert_abs_diff_eq!(cons[(0, 0)], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn stiffness_rank() {
        for k in 1..=2 {
            let p = build_projectors_polygon(&pentagon(), k).unwrap();
            let eig = nalgebra::SymmetricEigen::new(local_stiffness(&p));
            let max = eig.eigenvalues.amax();
            let zero = eig.eigenvalues.iter().filter(|v| v.abs() < 1e-10 * max).count();
            assert_eq!(zero, 1, "k={k}");
            assert!(eig.eigenvalues.min() > -1e-12 * max);
        }
    }

    #[test]
    fn mass_row_sums_are_lumped_weights() {
        for k in 1..=2 {
            let p = build_projectors_polygon(&pentagon(), k).unwrap();
            let m = local_consistent_mass(&p);
            let w = lumped_weights(&p, DEFAULT_DELTA).unwrap();
            for i in 0..p.n_dof() {
                let rs: f64 = m.row(i).iter().sum();
                assert_abs_diff_eq!(rs, w.raw[i], epsilon = 1e-12);
            }
            assert_abs_diff_eq!(m.sum(), p.area, epsilon = 1e-12);
            assert!(nalgebra::Cholesky::new(m).is_some());
        }
    }

    #[test]
    fn square_weights() {
        let p1 = build_projectors_polygon(&unit_square(), 1).unwrap();
        let w1 = lumped_weights(&p1, DEFAULT_DELTA).unwrap();
        for s in &w1.raw {
            assert_abs_diff_eq!(*s, 0.25, epsilon = 1e-15);
        }
        let p2 = build_projectors_polygon(&unit_square(), 2).unwrap();
        let w2 = lumped_weights(&p2, 0.1).unwrap();
        for (i, (&s, &f)) in w2.raw.iter().zip(&w2.floored).enumerate() {
            if i == 8 {
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
                assert_abs_diff_eq!(f, 1.0, epsilon = 1e-14);
            } else {
                assert_abs_diff_eq!(s, 0.0, epsilon = 1e-14);
                assert_abs_diff_eq!(f, 0.1 / 9.0, epsilon = 1e-16);
            }
        }
        assert!(lumped_weights(&p2, 1.0).is_err());
    }

    #[test]
    fn two_by_two_grid_has_one_free_dof() {
        let m = generate_mesh(&MeshParams::new(MeshFamily::DistortedQuad, 2)).unwrap();
        let sys = assemble_system(&m, 1, DEFAULT_DELTA).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(sys.n_free, 1);
        assert_eq!(sys.k_h.n(), 1);
        assert_abs_diff_eq!(sys.raw_total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn global_assembly_invariants() {
        let p = MeshParams::new(MeshFamily::Voronoi, 5).lloyd_iters(2).seed(8);
        let m = generate_mesh(&p).unwrap();
        for k in 1..=2 {
            let sys = assemble_system(&m, k, DEFAULT_DELTA).unwrap();
            assert_eq!(sys.k_h.max_asymmetry(), 0.0);
            assert_abs_diff_eq!(sys.raw_total(), 1.0, epsilon = 1e-12);
            assert!(sys.m_lumped.iter().all(|&v| v > 0.0));
            let load = assemble_load_global(&m, &sys, |_| 1.0).unwrap();
            assert_abs_diff_eq!(load.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            let zero = assemble_load(&m, &sys, |_| 0.0).unwrap();
            assert!(zero.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn assembly_is_independent_of_thread_count() {
        let p = MeshParams::new(MeshFamily::DistortedQuad, 6).distortion(0.3).seed(2);
        let m = generate_mesh(&p).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| assemble_system(&m, 2, DEFAULT_DELTA).unwrap());
        let b = four.install(|| assemble_system(&m, 2, DEFAULT_DELTA).unwrap());
        assert_eq!(a.k_h, b.k_h);
        assert_eq!(a.m_lumped, b.m_lumped);
    }
}
