mod common;

use common::{max_abs, quantile, random_polygon, relative_drift, study_mesh};
use lumpvem::mesh::signed_area;
use lumpvem::poly::{monomial_grams, polygon_moment};
use lumpvem::projectors::build_projectors_polygon;
use lumpvem::{assemble_system, local_stiffness, MeshFamily, MonomialBasis, MultiIndex, Point2, DEFAULT_DELTA};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn projectors_are_exact_on_every_mesh_cell() {
    for family in MeshFamily::ALL {
        for k in 1..=2 {
            let sys = assemble_system(&study_mesh(family, 8), k, DEFAULT_DELTA).unwrap();
            for p in &sys.projectors {
                let eye = DMatrix::<f64>::identity(p.n_k(), p.n_k());
                assert!(max_abs(&(&p.p_nabla * &p.d - &eye)) < 1e-10, "{family} k={k}");
                assert!(max_abs(&(&p.p_zero * &p.d - &eye)) < 1e-10, "{family} k={k}");
            }
        }
    }
}

#[test]
fn mass_gram_is_positive_definite_on_generated_cells() {
    for family in MeshFamily::ALL {
        let mesh = study_mesh(family, 8);
        for c in 0..mesh.n_cells() {
            let pts = mesh.cell_points(c);
            let g = mesh.geometry(c);
            let basis = MonomialBasis::new(2, g.centroid, g.diameter);
            let (h, _) = monomial_grams(&pts, &basis);
            assert!(h.clone().cholesky().is_some(), "{family} cell {c}");
            assert!(SymmetricEigen::new(h).eigenvalues.min() > 0.0);
        }
    }
}

#[test]
fn constant_moment_is_the_shoelace_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut polys: Vec<Vec<Point2>> = (0..100).map(|_| random_polygon(&mut rng)).collect();
    let mesh = study_mesh(MeshFamily::Voronoi, 8);
    polys.extend((0..mesh.n_cells()).map(|c| mesh.cell_points(c)));
    for pts in polys {
        let g = lumpvem::mesh::polygon_geometry(&pts).unwrap();
        let m = polygon_moment(&pts, g.centroid, g.diameter, MultiIndex::new(0, 0));
        assert!((m - signed_area(&pts)).abs() < 1e-13, "{m} vs {}", signed_area(&pts));
    }
}

#[test]
fn projected_energy_never_exceeds_discrete_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let pts = random_polygon(&mut rng);
        for k in 1..=3 {
            let p = build_projectors_polygon(&pts, k).unwrap();
            let ke = local_stiffness(&p);
            for _ in 0..10 {
                let v = DVector::from_fn(p.n_dof(), |_, _| rng.gen_range(-1.0..1.0));
                let c = &p.p_nabla * &v;
                let consistency = (c.transpose() * &p.g * &c)[(0, 0)];
                let full = (v.transpose() * &ke * &v)[(0, 0)];
                assert!(consistency <= full * (1.0 + 1e-12) + 1e-14, "{consistency} > {full}");
            }
        }
    }
}

/// Quartiles of `h_E⁻²‖Π⁰v‖²/Σχ_i(v)²` over random DOF vectors, and the
/// largest per-cell eigenvalue of that quotient.
fn dof_l2_statistics(family: MeshFamily, n: usize) -> [f64; 3] {
    let mesh = study_mesh(family, n);
    let sys = assemble_system(&mesh, 1, DEFAULT_DELTA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ratios = Vec::new();
    let mut top = 0.0f64;
    for (c, p) in sys.projectors.iter().enumerate() {
        let h = mesh.geometry(c).diameter;
        let m0 = p.p_zero.transpose() * &p.h * &p.p_zero / (h * h);
        top = top.max(SymmetricEigen::new(m0.clone()).eigenvalues.max());
        for _ in 0..16 {
            let v = DVector::from_fn(p.n_dof(), |_, _| rng.gen_range(-1.0..1.0));
            ratios.push((v.transpose() * &m0 * &v)[(0, 0)] / v.norm_squared());
        }
    }
    [quantile(&ratios, 0.25), quantile(&ratios, 0.75), top]
}

#[test]
fn dof_l2_equivalence_is_level_independent() {
    for family in MeshFamily::ALL {
        let stats: Vec<[f64; 3]> = [16, 32, 64].iter().map(|&n| dof_l2_statistics(family, n)).collect();
        for w in stats.windows(2) {
            let drift = relative_drift(&w[0], &w[1]);
            assert!(drift < 0.1, "{family}: {:?} -> {:?} drift {drift}", w[0], w[1]);
        }
        assert!(stats.iter().all(|s| s[0] > 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomials_survive_both_projectors(seed in any::<u64>(), k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_polygon(&mut rng);
        let p = build_projectors_polygon(&pts, k).unwrap();
        let eye = DMatrix::<f64>::identity(p.n_k(), p.n_k());
        prop_assert!(max_abs(&(&p.p_nabla * &p.d - &eye)) < 1e-10);
        prop_assert!(max_abs(&(&p.p_zero * &p.d - &eye)) < 1e-10);
    }

    #[test]
    fn projectors_are_translation_invariant(seed in any::<u64>(), dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_polygon(&mut rng);
        let moved: Vec<Point2> = pts.iter().map(|p| Point2::new(p.x + dx, p.y + dy)).collect();
        let a = build_projectors_polygon(&pts, 2).unwrap();
        let b = build_projectors_polygon(&moved, 2).unwrap();
        let scale = max_abs(&a.p_zero).max(1.0);
        prop_assert!(max_abs(&(&a.p_zero - &b.p_zero)) < 1e-9 * scale);
        prop_assert!(max_abs(&(&a.p_nabla - &b.p_nabla)) < 1e-9 * scale);
    }
}
