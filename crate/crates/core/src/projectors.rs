//! Degrees of freedom and element projectors.
//!
//! For a cell with `N_V` vertices and order `k` the local DOFs are, in order:
//! vertex values, edge moments `(1/|e|)∫_e v L̂_j` for `j ≤ k-2` (edge by
//! edge in counter-clockwise order), and interior moments `(1/|E|)∫_E v m_α`
//! for `|α| ≤ k-2`. Edge moments are taken with the edge oriented from its
//! lower to its higher global vertex id so that both neighbouring cells see
//! the same functional.
//!
//! Matrices follow one convention throughout:
//!
//! * `D` is `N_dof × N_k`, `D[i][α] = χ_i(m_α)`;
//! * `P_nabla`, `P_zero` are `N_k × N_dof`; column `i` holds the monomial
//!   coefficients of the projection of the basis function `ψ_i`;
//!
//! so polynomial exactness reads `P·D = I` and `D·P` maps DOFs to the DOFs of
//! the projection.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::solve_checked;
use crate::mesh::{polygon_geometry, signed_area, Mesh, Point2};
use crate::poly::{
    edge_legendre_eval, gauss_legendre, grams_from_table, integrate_polygon, legendre, MomentTable,
    MonomialBasis, MultiIndex,
};
use crate::{Error, Result};

/// What a local degree of freedom measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSlot {
    Vertex(usize),
    EdgeMoment { edge: usize, j: usize },
    InteriorMoment(MultiIndex),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    pub k: usize,
    pub n_vertices: usize,
    pub slots: Vec<DofSlot>,
    /// Local edge `e` runs against the canonical (ascending global id) direction.
    pub edge_reversed: Vec<bool>,
}

impl DofLayout {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn edge_dofs_per_edge(&self) -> usize {
        self.k - 1
    }

    pub fn n_interior(&self) -> usize {
        (self.k - 1) * self.k / 2
    }

    pub fn vertex(&self, v: usize) -> usize {
        v
    }

    pub fn edge(&self, e: usize, j: usize) -> usize {
        self.n_vertices + e * (self.k - 1) + j
    }

    pub fn interior(&self, alpha: MultiIndex) -> usize {
        self.n_vertices * self.k + alpha.index()
    }
}

/// Local DOF layout; every edge in local orientation.
pub fn build_dof_layout(n_vertices: usize, k: usize) -> Result<DofLayout> {
    layout_with_orientation(n_vertices, k, vec![false; n_vertices])
}

fn layout_with_orientation(n_vertices: usize, k: usize, edge_reversed: Vec<bool>) -> Result<DofLayout> {
    if k < 1 {
        return Err(Error::InvalidArgument(format!("polynomial order k must be ≥ 1, got {k}")));
    }
    if n_vertices < 3 {
        return Err(Error::InvalidArgument(format!("a cell needs 3 vertices, got {n_vertices}")));
    }
    let mut slots = Vec::with_capacity(n_vertices * k + (k - 1) * k / 2);
    slots.extend((0..n_vertices).map(DofSlot::Vertex));
    for e in 0..n_vertices {
        slots.extend((0..k - 1).map(|j| DofSlot::EdgeMoment { edge: e, j }));
    }
    if k >= 2 {
        slots.extend(crate::poly::multi_indices(k - 2).into_iter().map(DofSlot::InteriorMoment));
    }
    Ok(DofLayout {
        k,
        n_vertices,
        slots,
        edge_reversed,
    })
}

/// Per-element projector data.
#[derive(Debug, Clone)]
pub struct ProjectorPack {
    pub k: usize,
    pub basis: MonomialBasis,
    pub layout: DofLayout,
    pub points: Vec<Point2>,
    pub area: f64,
    /// `N_dof × N_k`, `D[i][α] = χ_i(m_α)`.
    pub d: DMatrix<f64>,
    /// `N_k × N_dof`, coefficients of `Π∇ψ_i`.
    pub p_nabla: DMatrix<f64>,
    /// `N_k × N_dof`, coefficients of `Π⁰ψ_i`.
    pub p_zero: DMatrix<f64>,
    /// Mass Gram `∫ m_α m_β`.
    pub h: DMatrix<f64>,
    /// Stiffness Gram `∫ ∇m_α·∇m_β`.
    pub g: DMatrix<f64>,
    /// `N_k × N_dof`, `C[α][i] = ∫ ψ_i m_α` (exact or via enhancement).
    pub c: DMatrix<f64>,
    /// `∫ m_α`.
    pub moments: DVector<f64>,
}

impl ProjectorPack {
    pub fn n_dof(&self) -> usize {
        self.layout.len()
    }

    pub fn n_k(&self) -> usize {
        self.basis.len()
    }
}

/// Projectors for cell `cell` of a mesh, with edge moments in canonical
/// orientation.
pub fn build_projectors(mesh: &Mesh, cell: usize, k: usize) -> Result<ProjectorPack> {
    let ids = &mesh.cells()[cell].vertex_ids;
    let n = ids.len();
    let reversed = (0..n).map(|i| ids[i] > ids[(i + 1) % n]).collect();
    build_projectors_oriented(&mesh.cell_points(cell), reversed, k, cell)
}

/// Projectors for a standalone CCW polygon (edges in local orientation).
pub fn build_projectors_polygon(points: &[Point2], k: usize) -> Result<ProjectorPack> {
    build_projectors_oriented(points, vec![false; points.len()], k, 0)
}

fn build_projectors_oriented(
    points: &[Point2],
    edge_reversed: Vec<bool>,
    k: usize,
    cell_id: usize,
) -> Result<ProjectorPack> {
    let layout = layout_with_orientation(points.len(), k, edge_reversed)?;
    let geo = polygon_geometry(points).ok_or(Error::DegenerateCell {
        cell: cell_id,
        area: signed_area(points),
    })?;
    let basis = MonomialBasis::new(k, geo.centroid, geo.diameter);
    let table = MomentTable::new(points, basis.centroid, basis.h, 2 * k);
    let (h, g) = grams_from_table(&table, &basis);
    let moments = DVector::from_iterator(basis.len(), basis.indices.iter().map(|a| table.get(a.a1, a.a2)));
    let area = geo.area;

    let d = build_dof_matrix(points, &basis, &layout, &h, area);
    let p_nabla = build_energy_projector(points, &basis, &layout, &d, &g, &moments, area)?;
    let (c, p_zero) = build_l2_projector(&basis, &layout, &p_nabla, &h, area)?;

    Ok(ProjectorPack {
        k,
        basis,
        layout,
        points: points.to_vec(),
        area,
        d,
        p_nabla,
        p_zero,
        h,
        g,
        c,
        moments,
    })
}

fn edge_sign(reversed: bool, j: usize) -> f64 {
    if reversed && j % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// `D[i][α] = χ_i(m_α)`.
pub fn build_dof_matrix(
    points: &[Point2],
    basis: &MonomialBasis,
    layout: &DofLayout,
    h: &DMatrix<f64>,
    area: f64,
) -> DMatrix<f64> {
    let k = layout.k;
    let nk = basis.len();
    let nv = layout.n_vertices;
    let mut d = DMatrix::zeros(layout.len(), nk);
    for (v, &p) in points.iter().enumerate() {
        for (a, val) in basis.eval_all(p).into_iter().enumerate() {
            d[(layout.vertex(v), a)] = val;
        }
    }
    if k >= 2 {
        let gauss = gauss_legendre(k + 1);
        for e in 0..nv {
            let (p, q) = (points[e], points[(e + 1) % nv]);
            for (&s, &w) in gauss.points.iter().zip(&gauss.weights) {
                let x = p + (q - p) * (0.5 * (s + 1.0));
                let vals = basis.eval_all(x);
                for j in 0..k - 1 {
                    let lj = edge_legendre_eval(j, s) * edge_sign(layout.edge_reversed[e], j);
                    let row = layout.edge(e, j);
                    for (a, &m) in vals.iter().enumerate() {
                        d[(row, a)] += 0.5 * w * m * lj;
                    }
                }
            }
        }
        for beta in crate::poly::multi_indices(k - 2) {
            let row = layout.interior(beta);
            for a in 0..nk {
                d[(row, a)] = h[(beta.index(), a)] / area;
            }
        }
    }
    d
}

/// Legendre coefficients `c_0..c_k` (in local edge parameter `s ∈ [-1, 1]`)
/// of the degree-k trace with endpoint values `va`, `vb` and local moments
/// `mu[j] = (1/2)∫ v L̂_j ds`, `j ≤ k-2`.
fn edge_trace_coeffs(k: usize, va: f64, vb: f64, mu: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; k + 1];
    let (mut s_plus, mut s_minus) = (0.0, 0.0);
    for (j, &m) in mu.iter().enumerate() {
        c[j] = ((2 * j + 1) as f64).sqrt() * m;
        s_plus += c[j];
        s_minus += if j % 2 == 0 { c[j] } else { -c[j] };
    }
    let r_plus = vb - s_plus;
    let r_minus = va - s_minus;
    let sgn = if (k - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    c[k - 1] = 0.5 * (r_plus + sgn * r_minus);
    c[k] = 0.5 * (r_plus - sgn * r_minus);
    c
}

/// `Π∇` coefficients: solve `G̃ P = B` where `B[α][i] = ∫∇m_α·∇ψ_i` by parts and
/// the constant row is replaced by the zero-mean condition.
fn build_energy_projector(
    points: &[Point2],
    basis: &MonomialBasis,
    layout: &DofLayout,
    d: &DMatrix<f64>,
    g: &DMatrix<f64>,
    moments: &DVector<f64>,
    area: f64,
) -> Result<DMatrix<f64>> {
    let k = layout.k;
    let nk = basis.len();
    let nv = layout.n_vertices;
    let ndof = layout.len();
    let mut b = DMatrix::zeros(nk, ndof);

    // Boundary term ∮ (∇m_α·n) ψ_i.
    let gauss = gauss_legendre(k + 1);
    for e in 0..nv {
        let (p, q) = (points[e], points[(e + 1) % nv]);
        let len = p.dist(q);
        let normal = Point2::new(q.y - p.y, p.x - q.x) * (1.0 / len);
        // DOFs touching this edge and their trace coefficients.
        let mut touching: Vec<(usize, Vec<f64>)> = Vec::with_capacity(k + 1);
        let mu0 = vec![0.0; k - 1];
        touching.push((layout.vertex(e), edge_trace_coeffs(k, 1.0, 0.0, &mu0)));
        touching.push((layout.vertex((e + 1) % nv), edge_trace_coeffs(k, 0.0, 1.0, &mu0)));
        for j in 0..k - 1 {
            let mut mu = mu0.clone();
            mu[j] = edge_sign(layout.edge_reversed[e], j);
            touching.push((layout.edge(e, j), edge_trace_coeffs(k, 0.0, 0.0, &mu)));
        }
        for (&s, &w) in gauss.points.iter().zip(&gauss.weights) {
            let x = p + (q - p) * (0.5 * (s + 1.0));
            let grads = basis.grad_all(x);
            let pj: Vec<f64> = (0..=k).map(|j| legendre(j, s)).collect();
            for (col, coeffs) in &touching {
                let trace: f64 = coeffs.iter().zip(&pj).map(|(c, p)| c * p).sum();
                if trace == 0.0 {
                    continue;
                }
                for (a, gr) in grads.iter().enumerate() {
                    let dn = gr.0 * normal.x + gr.1 * normal.y;
                    b[(a, *col)] += 0.5 * len * w * dn * trace;
                }
            }
        }
    }

    // Interior term -∫ Δm_α ψ_i via interior moments.
    if k >= 2 {
        let inv_h2 = 1.0 / (basis.h * basis.h);
        for (a, alpha) in basis.indices.iter().enumerate() {
            if alpha.a1 >= 2 {
                let beta = MultiIndex::new(alpha.a1 - 2, alpha.a2);
                let coef = (alpha.a1 * (alpha.a1 - 1)) as f64 * inv_h2;
                b[(a, layout.interior(beta))] -= area * coef;
            }
            if alpha.a2 >= 2 {
                let beta = MultiIndex::new(alpha.a1, alpha.a2 - 2);
                let coef = (alpha.a2 * (alpha.a2 - 1)) as f64 * inv_h2;
                b[(a, layout.interior(beta))] -= area * coef;
            }
        }
    }

    // Zero-mean closure on the constant row.
    let mut gt = g.clone();
    for i in 0..ndof {
        b[(0, i)] = 0.0;
    }
    if k == 1 {
        for a in 0..nk {
            gt[(0, a)] = (0..nv).map(|v| d[(layout.vertex(v), a)]).sum::<f64>() / nv as f64;
        }
        for v in 0..nv {
            b[(0, layout.vertex(v))] = 1.0 / nv as f64;
        }
    } else {
        for a in 0..nk {
            gt[(0, a)] = moments[a] / area;
        }
        b[(0, layout.interior(MultiIndex::new(0, 0)))] = 1.0;
    }
    solve_checked(&gt, &b)
}

/// `C` and `Π⁰` coefficients: `H P_zero = C`, low rows of `C` from interior
/// moments, rows of degree k-1 and k from the enhancement `∫ψ m = ∫(Π∇ψ) m`.
fn build_l2_projector(
    basis: &MonomialBasis,
    layout: &DofLayout,
    p_nabla: &DMatrix<f64>,
    h: &DMatrix<f64>,
    area: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = layout.k as u32;
    let hp = h * p_nabla;
    let mut c = DMatrix::zeros(basis.len(), layout.len());
    for (a, alpha) in basis.indices.iter().enumerate() {
        if alpha.degree() + 2 <= k {
            c[(a, layout.interior(*alpha))] = area;
        } else {
            c.row_mut(a).copy_from(&hp.row(a));
        }
    }
    let p_zero = solve_checked(h, &c)?;
    Ok((c, p_zero))
}

/// Global DOF numbering: vertices, then `k-1` moments per global edge, then
/// interior moments cell by cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalNumbering {
    pub k: usize,
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_cells: usize,
}

impl GlobalNumbering {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        Self {
            k,
            n_vertices: mesh.n_vertices(),
            n_edges: mesh.n_edges(),
            n_cells: mesh.n_cells(),
        }
    }

    pub fn n_interior_per_cell(&self) -> usize {
        (self.k - 1) * self.k / 2
    }

    pub fn len(&self) -> usize {
        self.n_vertices + self.n_edges * (self.k - 1) + self.n_cells * self.n_interior_per_cell()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge(&self, e: usize, j: usize) -> usize {
        self.n_vertices + e * (self.k - 1) + j
    }

    pub fn interior(&self, cell: usize, local: usize) -> usize {
        self.n_vertices + self.n_edges * (self.k - 1) + cell * self.n_interior_per_cell() + local
    }

    /// Global index of every local DOF of `cell`.
    pub fn local_to_global(&self, mesh: &Mesh, cell: usize) -> Vec<usize> {
        let ids = &mesh.cells()[cell].vertex_ids;
        let edges = mesh.cell_edges(cell);
        let mut out = Vec::with_capacity(ids.len() * self.k + self.n_interior_per_cell());
        out.extend_from_slice(ids);
        for &e in edges {
            out.extend((0..self.k - 1).map(|j| self.edge(e, j)));
        }
        out.extend((0..self.n_interior_per_cell()).map(|l| self.interior(cell, l)));
        out
    }

    /// Boundary DOFs: boundary vertices and moments on boundary edges.
    pub fn boundary_mask(&self, mesh: &Mesh) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for (v, m) in mask.iter_mut().enumerate().take(self.n_vertices) {
            *m = mesh.is_boundary_vertex(v);
        }
        for e in 0..self.n_edges {
            if mesh.is_boundary_edge(e) {
                for j in 0..self.k - 1 {
                    mask[self.edge(e, j)] = true;
                }
            }
        }
        mask
    }
}

/// Local DOFs `χ_i(u)` of a field on a cell described by `pack`, with
/// quadrature of order `2k + 8`.
pub fn interpolate_local<F>(pack: &ProjectorPack, u: F, cell_id: usize) -> Result<Vec<f64>>
where
    F: Fn(Point2) -> f64,
{
    let k = pack.k;
    let layout = &pack.layout;
    let pts = &pack.points;
    let nv = layout.n_vertices;
    let mut out = vec![0.0; layout.len()];
    for (v, &p) in pts.iter().enumerate() {
        out[layout.vertex(v)] = u(p);
    }
    if k >= 2 {
        let gauss = gauss_legendre(k + 5);
        for e in 0..nv {
            let (p, q) = (pts[e], pts[(e + 1) % nv]);
            for j in 0..k - 1 {
                let sign = edge_sign(layout.edge_reversed[e], j);
                let val: f64 = gauss
                    .points
                    .iter()
                    .zip(&gauss.weights)
                    .map(|(&s, &w)| 0.5 * w * u(p + (q - p) * (0.5 * (s + 1.0))) * edge_legendre_eval(j, s))
                    .sum();
                out[layout.edge(e, j)] = sign * val;
            }
        }
        for beta in crate::poly::multi_indices(k - 2) {
            let val = integrate_polygon(
                |p| u(p) * pack.basis.eval(beta, p),
                pts,
                pack.basis.centroid,
                2 * k + 8,
                cell_id,
            )?;
            out[layout.interior(beta)] = val / pack.area;
        }
    }
    Ok(out)
}

/// Global DOF vector of a field: vertex values, canonical edge moments and
/// interior moments.
pub fn interpolate_dofs<F>(mesh: &Mesh, k: usize, u: F) -> Result<Vec<f64>>
where
    F: Fn(Point2) -> f64 + Sync,
{
    if k < 1 {
        return Err(Error::InvalidArgument(format!("polynomial order k must be ≥ 1, got {k}")));
    }
    let num = GlobalNumbering::new(mesh, k);
    let mut out = vec![0.0; num.len()];
    for (v, &p) in mesh.vertices().iter().enumerate() {
        out[v] = u(p);
    }
    if k >= 2 {
        let gauss = gauss_legendre(k + 5);
        for (e, edge) in mesh.edges().iter().enumerate() {
            let p = mesh.vertices()[edge.v0];
            let q = mesh.vertices()[edge.v1];
            for j in 0..k - 1 {
                out[num.edge(e, j)] = gauss
                    .points
                    .iter()
                    .zip(&gauss.weights)
                    .map(|(&s, &w)| 0.5 * w * u(p + (q - p) * (0.5 * (s + 1.0))) * edge_legendre_eval(j, s))
                    .sum();
            }
        }
        let interiors: Vec<Vec<f64>> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let pts = mesh.cell_points(c);
                let geo = mesh.geometry(c);
                let basis = MonomialBasis::new(k, geo.centroid, geo.diameter);
                crate::poly::multi_indices(k - 2)
                    .into_iter()
                    .map(|beta| {
                        integrate_polygon(|p| u(p) * basis.eval(beta, p), &pts, geo.centroid, 2 * k + 8, c)
                            .map(|v| v / geo.area)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        for (c, vals) in interiors.into_iter().enumerate() {
            for (l, v) in vals.into_iter().enumerate() {
                out[num.interior(c, l)] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshFamily, MeshParams};
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

    fn random_polygon(rng: &mut ChaCha8Rng) -> Vec<Point2> {
        let n = rng.gen_range(3..=9);
        let mut angles: Vec<f64> = (0..n)
            .map(|i| (i as f64 + rng.gen_range(0.1..0.9)) * std::f64::consts::TAU / n as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        let scale = rng.gen_range(0.05..2.0);
        angles
            .into_iter()
            .map(|a| {
                let r = scale * rng.gen_range(0.7..1.0);
                Point2::new(0.3 + r * a.cos(), -0.2 + r * a.sin())
            })
            .collect()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn layout_counts() {
        assert_eq!(build_dof_layout(4, 1).unwrap().len(), 4);
        assert_eq!(build_dof_layout(4, 2).unwrap().len(), 9);
        assert_eq!(build_dof_layout(8, 1).unwrap().len(), 8);
        for nv in 3..10 {
            for k in 1..5 {
                let l = build_dof_layout(nv, k).unwrap();
                assert_eq!(l.len(), nv + nv * (k - 1) + (k - 1) * k / 2);
            }
        }
        assert!(build_dof_layout(4, 0).is_err());
        let l = build_dof_layout(4, 2).unwrap();
        assert_eq!(l.slots[4], DofSlot::EdgeMoment { edge: 0, j: 0 });
        assert_eq!(l.slots[8], DofSlot::InteriorMoment(MultiIndex::new(0, 0)));
    }

    #[test]
    fn dof_matrix_vertex_column() {
        let p = build_projectors_polygon(&unit_square(), 1).unwrap();
        let s = 0.5 / 2f64.sqrt();
        assert_abs_diff_eq!(p.d[(0, 0)], 1.0, epsilon = 1e-16);
        assert_abs_diff_eq!(p.d[(0, 1)], -s, epsilon = 1e-16);
        assert_abs_diff_eq!(p.d[(0, 2)], -s, epsilon = 1e-16);
    }

    #[test]
    fn dof_matrix_constant_row() {
        let p = build_projectors_polygon(&unit_square(), 2).unwrap();
        for i in 0..p.n_dof() {
            let expect = match p.layout.slots[i] {
                DofSlot::Vertex(_) => 1.0,
                DofSlot::EdgeMoment { j, .. } => {
                    if j == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                DofSlot::InteriorMoment(a) => {
                    if a.degree() == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            assert_abs_diff_eq!(p.d[(i, 0)], expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn energy_projection_of_corner_hat() {
        // Π∇ψ₁ = 3/4 - x/2 - y/2 = 1/4 - (h/2)(X + Y) with h = √2.
        let p = build_projectors_polygon(&unit_square(), 1).unwrap();
        let h = 2f64.sqrt();
        assert_abs_diff_eq!(p.p_nabla[(0, 0)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.p_nabla[(1, 0)], -0.5 * h, epsilon = 1e-15);
        assert_abs_diff_eq!(p.p_nabla[(2, 0)], -0.5 * h, epsilon = 1e-15);
        // Partition of unity: Σ_i ∫Π⁰ψ_i = |E|.
        let total: f64 = (0..4).map(|i| (p.moments.transpose() * p.p_zero.column(i))[(0, 0)]).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn projectors_reproduce_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let pts = random_polygon(&mut rng);
            for k in 1..=3 {
                let p = build_projectors_polygon(&pts, k).unwrap();
                let eye = DMatrix::<f64>::identity(p.n_k(), p.n_k());
                assert!(max_abs(&(&p.p_nabla * &p.d - &eye)) < 1e-10, "Π∇ k={k}");
                assert!(max_abs(&(&p.p_zero * &p.d - &eye)) < 1e-10, "Π⁰ k={k}");
                let commute = &p.p_zero * (&p.d * &p.p_nabla) - &p.p_nabla;
                assert!(max_abs(&commute) < 1e-10, "k={k}: {:e}", max_abs(&commute));
            }
        }
    }

    #[test]
    fn k1_zero_projector_equals_energy_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_polygon(&mut rng);
        let p = build_projectors_polygon(&pts, 1).unwrap();
        assert!(max_abs(&(&p.p_zero - &p.p_nabla)) < 1e-12);
    }

    #[test]
    fn trace_reconstruction() {
        // Quadratic v(s) = s² on [-1, 1]: endpoints 1, 1; mean 1/3.
        let c = edge_trace_coeffs(2, 1.0, 1.0, &[1.0 / 3.0]);
        let v = |s: f64| (0..3).map(|j| c[j] * legendre(j, s)).sum::<f64>();
        for s in [-1.0, -0.3, 0.0, 0.4, 1.0] {
            assert_abs_diff_eq!(v(s), s * s, epsilon = 1e-15);
        }
    }

    #[test]
    fn interpolation_of_monomials_matches_dof_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts = random_polygon(&mut rng);
        for k in 1..=2 {
            let p = build_projectors_polygon(&pts, k).unwrap();
            for (a, &alpha) in p.basis.indices.iter().enumerate() {
                let dofs = interpolate_local(&p, |x| p.basis.eval(alpha, x), 0).unwrap();
                for i in 0..p.n_dof() {
                    assert_abs_diff_eq!(dofs[i], p.d[(i, a)], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn global_interpolation_of_constants() {
        let m = generate_mesh(&MeshParams::new(MeshFamily::Voronoi, 4).lloyd_iters(2).seed(3)).unwrap();
        let num = GlobalNumbering::new(&m, 2);
        let dofs = interpolate_dofs(&m, 2, |_| 1.0).unwrap();
        assert_eq!(dofs.len(), num.len());
        for v in &dofs {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn interpolation_peak_value() {
        let m = generate_mesh(&MeshParams::new(MeshFamily::DistortedQuad, 4)).unwrap();
        let pi = std::f64::consts::PI;
        let dofs = interpolate_dofs(&m, 1, |p| (pi * p.x).sin() * (pi * p.y).sin()).unwrap();
        let centre = m
            .vertices()
            .iter()
            .position(|p| p.x == 0.5 && p.y == 0.5)
            .unwrap();
        assert_abs_diff_eq!(dofs[centre], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn mesh_projectors_agree_across_shared_edges() {
        // Edge moments of a global quadratic must be the same from both sides.
        let m = generate_mesh(&MeshParams::new(MeshFamily::DistortedQuad, 3).distortion(0.3).seed(5)).unwrap();
        let num = GlobalNumbering::new(&m, 2);
        let u = |p: Point2| 1.0 + p.x - 2.0 * p.y + p.x * p.y + 0.5 * p.y * p.y;
        let global = interpolate_dofs(&m, 2, u).unwrap();
        for c in 0..m.n_cells() {
            let pack = build_projectors(&m, c, 2).unwrap();
            let local = interpolate_local(&pack, u, c).unwrap();
            for (l, g) in num.local_to_global(&m, c).into_iter().enumerate() {
                assert_abs_diff_eq!(local[l], global[g], epsilon = 1e-13);
            }
        }
    }
}
