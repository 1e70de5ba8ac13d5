use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::voronoi::voronoi_mesh;
use super::{Cell, Mesh, Point2};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeshFamily {
    DistortedQuad,
    SerendipityQ8,
    Voronoi,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 3] = [
        MeshFamily::DistortedQuad,
        MeshFamily::SerendipityQ8,
        MeshFamily::Voronoi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::DistortedQuad => "distorted-quad",
            MeshFamily::SerendipityQ8 => "serendipity-q8",
            MeshFamily::Voronoi => "voronoi",
        }
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MeshFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mesh family '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshParams {
    pub family: MeshFamily,
    /// Grid resolution: n×n quads, or n² Voronoi seeds.
    pub n: usize,
    /// Vertex jitter as a fraction of the grid spacing, in [0, 0.5).
    pub distortion: f64,
    pub lloyd_iters: usize,
    pub seed: u64,
}

impl MeshParams {
    pub fn new(family: MeshFamily, n: usize) -> Self {
        Self {
            family,
            n,
            distortion: 0.0,
            lloyd_iters: 0,
            seed: 0,
        }
    }

    pub fn distortion(mut self, d: f64) -> Self {
        self.distortion = d;
        self
    }

    pub fn lloyd_iters(mut self, iters: usize) -> Self {
        self.lloyd_iters = iters;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Generate a mesh of the unit square. Deterministic for fixed parameters.
pub fn generate_mesh(params: &MeshParams) -> Result<Mesh> {
    if params.n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {}", params.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    match params.family {
        MeshFamily::DistortedQuad | MeshFamily::SerendipityQ8 => {
            if !(0.0..0.5).contains(&params.distortion) {
                return Err(Error::InvalidArgument(format!(
                    "distortion must lie in [0, 0.5), got {}",
                    params.distortion
                )));
            }
            let grid = jittered_grid(params.n, params.distortion, &mut rng);
            let mesh = if params.family == MeshFamily::DistortedQuad {
                quad_mesh(params.n, grid)
            } else {
                serendipity_mesh(params.n, grid)
            };
            mesh.map_err(|e| match e {
                Error::DegenerateCell { cell, area } => Error::InvalidMesh(format!(
                    "distortion {} inverted cell {cell} (signed area {area:e})",
                    params.distortion
                )),
                other => other,
            })
        }
        MeshFamily::Voronoi => voronoi_mesh(params.n, params.lloyd_iters, &mut rng),
    }
}

/// (n+1)² grid points, row-major from the bottom-left corner; interior points
/// are jittered by up to `distortion / n` in each coordinate.
fn jittered_grid(n: usize, distortion: f64, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let h = 1.0 / n as f64;
    let amp = distortion * h;
    let mut pts = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let mut p = Point2::new(i as f64 * h, j as f64 * h);
            // Draw for every point so the stream does not depend on distortion.
            let dx: f64 = rng.gen_range(-1.0..=1.0);
            let dy: f64 = rng.gen_range(-1.0..=1.0);
            let interior = i > 0 && i < n && j > 0 && j < n;
            if interior && amp > 0.0 {
                p.x += amp * dx;
                p.y += amp * dy;
            }
            // Exact boundary coordinates.
            if i == n {
                p.x = 1.0;
            }
            if j == n {
                p.y = 1.0;
            }
            pts.push(p);
        }
    }
    pts
}

fn quad_mesh(n: usize, grid: Vec<Point2>) -> Result<Mesh> {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(Cell::new(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]));
        }
    }
    Mesh::new(grid, cells)
}

/// Quads with the midpoint of every edge inserted as an extra (collinear)
/// vertex, giving 8-vertex cells.
fn serendipity_mesh(n: usize, mut pts: Vec<Point2>) -> Result<Mesh> {
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    let n_corner = pts.len();
    // Horizontal edge (i,j)-(i+1,j): index n_corner + j*n + i.
    let hmid = |i: usize, j: usize| n_corner + j * n + i;
    let n_h = n * (n + 1);
    // Vertical edge (i,j)-(i,j+1): index n_corner + n_h + j*(n+1) + i.
    let vmid = |i: usize, j: usize| n_corner + n_h + j * (n + 1) + i;
    for j in 0..=n {
        for i in 0..n {
            let a = pts[corner(i, j)];
            let b = pts[corner(i + 1, j)];
            pts.push((a + b) * 0.5);
        }
    }
    for j in 0..n {
        for i in 0..=n {
            let a = pts[corner(i, j)];
            let b = pts[corner(i, j + 1)];
            pts.push((a + b) * 0.5);
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(Cell::new(vec![
                corner(i, j),
                hmid(i, j),
                corner(i + 1, j),
                vmid(i + 1, j),
                corner(i + 1, j + 1),
                hmid(i, j + 1),
                corner(i, j + 1),
                vmid(i, j),
            ]));
        }
    }
    Mesh::new(pts, cells)
}
