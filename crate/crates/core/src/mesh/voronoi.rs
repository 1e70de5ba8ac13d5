//! Clipped Voronoi meshes of the unit square.
//!
//! Each cell is built independently by clipping the square against the
//! bisector half-planes of nearby seeds (nearest first, stopping once no
//! farther seed can cut the cell). Shared Voronoi vertices are then welded
//! across cells by coordinate so that the result is conforming.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{polygon_geometry, Cell, Mesh, Point2};
use crate::{Error, Result};

/// Seeds closer than this are redrawn.
const MIN_SEED_SEPARATION: f64 = 1e-9;
/// Vertices of different cells closer than this are the same mesh vertex.
const WELD_TOL: f64 = 1e-10;

pub(super) fn voronoi_mesh(n: usize, lloyd_iters: usize, rng: &mut ChaCha8Rng) -> Result<Mesh> {
    let mut seeds = random_seeds(n * n, rng);
    for _ in 0..lloyd_iters {
        let cells = voronoi_cells(&seeds);
        for (s, poly) in seeds.iter_mut().zip(&cells) {
            if let Some(g) = polygon_geometry(poly) {
                *s = g.centroid;
            }
        }
    }
    let polys = voronoi_cells(&seeds);
    weld(polys)
}

fn random_seeds(count: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut seeds: Vec<Point2> = Vec::with_capacity(count);
    while seeds.len() < count {
        let p = Point2::new(rng.gen::<f64>(), rng.gen::<f64>());
        if p.x <= 0.0 || p.y <= 0.0 {
            continue;
        }
        if seeds.iter().any(|s| s.dist(p) < MIN_SEED_SEPARATION) {
            continue;
        }
        seeds.push(p);
    }
    seeds
}

/// Keep the part of a convex CCW polygon where `(x - origin)·normal <= 0`.
fn clip_half_plane(poly: &[Point2], origin: Point2, normal: Point2) -> Vec<Point2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let da = (a - origin).dot(normal);
        let db = (b - origin).dot(normal);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    out
}

pub(super) fn voronoi_cells(seeds: &[Point2]) -> Vec<Vec<Point2>> {
    let square = [
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ];
    seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut others: Vec<(f64, usize)> = seeds
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &q)| (s.dist(q), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut poly = square.to_vec();
            for (d, j) in others {
                let reach = poly.iter().map(|p| p.dist(s)).fold(0.0, f64::max);
                if 0.5 * d > reach {
                    break;
                }
                let q = seeds[j];
                poly = clip_half_plane(&poly, (s + q) * 0.5, q - s);
            }
            poly
        })
        .collect()
}

/// Merge coincident vertices across cells and build the mesh.
fn weld(polys: Vec<Vec<Point2>>) -> Result<Mesh> {
    let key = |p: Point2| ((p.x / WELD_TOL).floor() as i64, (p.y / WELD_TOL).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut vertices: Vec<Point2> = Vec::new();
    let mut cells = Vec::with_capacity(polys.len());
    for poly in polys {
        let mut ids: Vec<usize> = Vec::with_capacity(poly.len());
        for mut p in poly {
            // Snap to the exact boundary of the square.
            for c in [&mut p.x, &mut p.y] {
                if c.abs() < WELD_TOL {
                    *c = 0.0;
                } else if (*c - 1.0).abs() < WELD_TOL {
                    *c = 1.0;
                }
            }
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = buckets.get(&(kx + dx, ky + dy)) {
                        for &v in list {
                            if vertices[v].dist(p) <= WELD_TOL {
                                found = Some(v);
                                break 'search;
                            }
                        }
                    }
                }
            }
            let id = found.unwrap_or_else(|| {
                vertices.push(p);
                buckets.entry((kx, ky)).or_default().push(vertices.len() - 1);
                vertices.len() - 1
            });
            ids.push(id);
        }
        ids.dedup();
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        if ids.len() < 3 {
            return Err(Error::InvalidMesh("Voronoi cell collapsed during welding".into()));
        }
        cells.push(Cell::new(ids));
    }
    Mesh::new(vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshFamily, MeshParams};
    use approx::assert_abs_diff_eq;

    #[test]
    fn four_symmetric_seeds_split_square() {
        let seeds = [
            Point2::new(0.25, 0.25),
            Point2::new(0.75, 0.25),
            Point2::new(0.75, 0.75),
            Point2::new(0.25, 0.75),
        ];
        let cells = voronoi_cells(&seeds);
        for c in &cells {
            let g = polygon_geometry(c).unwrap();
            assert_abs_diff_eq!(g.area, 0.25, epsilon = 1e-15);
        }
        let m = weld(cells).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_edges(), 12);
    }

    #[test]
    fn voronoi_partition_and_vertex_counts() {
        let p = MeshParams::new(MeshFamily::Voronoi, 12).lloyd_iters(3).seed(1);
        let m = generate_mesh(&p).unwrap();
        let s = m.stats();
        assert_eq!(s.n_cells, 144);
        assert_abs_diff_eq!(s.total_area, 1.0, epsilon = 1e-12);
        assert!(
            (5.0..=7.0).contains(&s.mean_vertices_per_cell),
            "mean vertices {}",
            s.mean_vertices_per_cell
        );
    }

    #[test]
    fn voronoi_is_deterministic() {
        let p = MeshParams::new(MeshFamily::Voronoi, 6).lloyd_iters(2).seed(42);
        let a = generate_mesh(&p).unwrap();
        let b = generate_mesh(&p).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.cells(), b.cells());
    }
}
