//! Polygonal meshes of the unit square.
//!
//! A [`Mesh`] owns its vertices and counter-clockwise cells and derives
//! everything else on construction: the global edge list (undirected vertex
//! pairs), cell-to-edge incidence, boundary flags and per-cell geometry.
//! Boundary detection is purely topological: an edge used by exactly one cell
//! is a boundary edge.

mod generate;
pub mod io;
mod voronoi;

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

pub use generate::{generate_mesh, MeshFamily, MeshParams};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A polygonal cell: vertex indices in counter-clockwise order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub vertex_ids: Vec<usize>,
}

impl Cell {
    pub fn new(vertex_ids: Vec<usize>) -> Self {
        Self { vertex_ids }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertex_ids.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: Point2,
    /// Largest pairwise vertex distance.
    pub diameter: f64,
    /// Length of edge `i`, from local vertex `i` to `i + 1`.
    pub edge_lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    pub h_max: f64,
    pub h_min: f64,
    pub n_cells: usize,
    pub max_vertices_per_cell: usize,
    pub mean_vertices_per_cell: f64,
    /// Σ|E|, equal to |Ω| = 1 for a valid partition of the unit square.
    pub total_area: f64,
}

/// An undirected edge, stored with `v0 < v1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub v0: usize,
    pub v1: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a < b {
            Self { v0: a, v1: b }
        } else {
            Self { v0: b, v1: a }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point2>,
    cells: Vec<Cell>,
    edges: Vec<Edge>,
    /// Number of cells incident to each edge (1 = boundary, 2 = interior).
    edge_incidence: Vec<u8>,
    /// For each cell, the global edge id of local edge `i` (vertex `i` to `i+1`).
    cell_edges: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    geometry: Vec<CellGeometry>,
}

/// Signed area by the shoelace formula.
pub fn signed_area(points: &[Point2]) -> f64 {
    let n = points.len();
    let mut a = 0.0;
    for i in 0..n {
        a += points[i].cross(points[(i + 1) % n]);
    }
    0.5 * a
}

/// Area, centroid, diameter and edge lengths of a CCW polygon.
pub fn polygon_geometry(points: &[Point2]) -> Option<CellGeometry> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    // Shift to the first vertex for better conditioning of the cross products.
    let o = points[0];
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..n {
        let p = points[i] - o;
        let q = points[(i + 1) % n] - o;
        let c = p.cross(q);
        area2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    let area = 0.5 * area2;
    if !(area > 0.0) || !area.is_finite() {
        return None;
    }
    let centroid = Point2::new(o.x + cx / (3.0 * area2), o.y + cy / (3.0 * area2));
    let mut diameter: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            diameter = diameter.max(points[i].dist(points[j]));
        }
    }
    let edge_lengths = (0..n).map(|i| points[i].dist(points[(i + 1) % n])).collect();
    Some(CellGeometry {
        area,
        centroid,
        diameter,
        edge_lengths,
    })
}

/// True if the closed polygon has no two non-adjacent edges that touch.
fn is_simple(points: &[Point2]) -> bool {
    let n = points.len();
    let seg_intersect = |a: Point2, b: Point2, c: Point2, d: Point2| -> bool {
        let d1 = (b - a).cross(c - a);
        let d2 = (b - a).cross(d - a);
        let d3 = (d - c).cross(a - c);
        let d4 = (d - c).cross(b - c);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        let on = |p: Point2, q: Point2, r: Point2, cr: f64| {
            cr == 0.0
                && r.x >= p.x.min(q.x)
                && r.x <= p.x.max(q.x)
                && r.y >= p.y.min(q.y)
                && r.y <= p.y.max(q.y)
        };
        on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
    };
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (points[j], points[(j + 1) % n]);
            if seg_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

impl Mesh {
    /// Build and validate a mesh. Cells must have at least three distinct
    /// vertices, positive signed area, be simple polygons, and every edge must
    /// be shared by one or two cells with opposite orientations.
    pub fn new(vertices: Vec<Point2>, cells: Vec<Cell>) -> Result<Self> {
        if let Some((i, _)) = vertices.iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {i} has non-finite coordinates")));
        }
        if cells.is_empty() {
            return Err(Error::InvalidMesh("mesh has no cells".into()));
        }
        let mut geometry = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.n_vertices() < 3 {
                return Err(Error::InvalidMesh(format!("cell {c} has fewer than 3 vertices")));
            }
            if let Some(&v) = cell.vertex_ids.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {c} references vertex {v} but there are {} vertices",
                    vertices.len()
                )));
            }
            let pts: Vec<Point2> = cell.vertex_ids.iter().map(|&v| vertices[v]).collect();
            let geo = polygon_geometry(&pts).ok_or(Error::DegenerateCell {
                cell: c,
                area: signed_area(&pts),
            })?;
            if !is_simple(&pts) {
                return Err(Error::InvalidMesh(format!("cell {c} is not a simple polygon")));
            }
            geometry.push(geo);
        }

        // Directed half-edge usage, then undirected incidence.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut undirected: Vec<Edge> = Vec::new();
        for (c, cell) in cells.iter().enumerate() {
            let n = cell.n_vertices();
            for i in 0..n {
                let a = cell.vertex_ids[i];
                let b = cell.vertex_ids[(i + 1) % n];
                if a == b {
                    return Err(Error::InvalidMesh(format!("cell {c} repeats vertex {a}")));
                }
                if directed.insert((a, b), c).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "directed edge ({a}, {b}) used twice (cell {c})"
                    )));
                }
                undirected.push(Edge::new(a, b));
            }
        }
        undirected.sort_unstable();
        undirected.dedup();
        let edges = undirected;
        let edge_index: HashMap<Edge, usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut edge_incidence = vec![0u8; edges.len()];
        let mut cell_edges = Vec::with_capacity(cells.len());
        for cell in &cells {
            let n = cell.n_vertices();
            let ids: Vec<usize> = (0..n)
                .map(|i| edge_index[&Edge::new(cell.vertex_ids[i], cell.vertex_ids[(i + 1) % n])])
                .collect();
            for &e in &ids {
                edge_incidence[e] += 1;
            }
            cell_edges.push(ids);
        }

        let mut boundary_vertex = vec![false; vertices.len()];
        let mut used = vec![false; vertices.len()];
        for cell in &cells {
            for &v in &cell.vertex_ids {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any cell")));
        }
        for (e, &inc) in edges.iter().zip(&edge_incidence) {
            if inc == 1 {
                boundary_vertex[e.v0] = true;
                boundary_vertex[e.v1] = true;
            }
        }

        let mesh = Self {
            vertices,
            cells,
            edges,
            edge_incidence,
            cell_edges,
            boundary_vertex,
            geometry,
        };
        mesh.check_boundary_loop()?;
        Ok(mesh)
    }

    /// The boundary edges must form closed loops: every boundary vertex has
    /// exactly two incident boundary edges.
    fn check_boundary_loop(&self) -> Result<()> {
        let mut degree = vec![0usize; self.vertices.len()];
        for (e, &inc) in self.edges.iter().zip(&self.edge_incidence) {
            if inc == 1 {
                degree[e.v0] += 1;
                degree[e.v1] += 1;
            }
        }
        if let Some(v) = degree.iter().position(|&d| d != 0 && d != 2) {
            return Err(Error::InvalidMesh(format!(
                "boundary is not a closed loop at vertex {v} ({} boundary edges)",
                degree[v]
            )));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_incidence[e] == 1
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    /// Global ids of the edges of cell `c`, local edge `i` joining local
    /// vertices `i` and `i + 1`.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        &self.cell_edges[c]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point2> {
        self.cells[c].vertex_ids.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges
            .iter()
            .zip(&self.edge_incidence)
            .filter(|(_, &inc)| inc == 1)
            .map(|(e, _)| *e)
    }

    pub fn stats(&self) -> MeshStats {
        mesh_stats(self)
    }
}

/// Geometry of one cell, recomputed from its vertices.
pub fn cell_geometry(mesh: &Mesh, cell_id: usize) -> Result<CellGeometry> {
    if cell_id >= mesh.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "cell id {cell_id} out of range ({} cells)",
            mesh.n_cells()
        )));
    }
    let pts = mesh.cell_points(cell_id);
    polygon_geometry(&pts).ok_or(Error::DegenerateCell {
        cell: cell_id,
        area: signed_area(&pts),
    })
}

pub fn mesh_stats(mesh: &Mesh) -> MeshStats {
    let mut h_max: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut total_area = 0.0;
    let mut max_v = 0;
    let mut sum_v = 0usize;
    for (c, cell) in mesh.cells().iter().enumerate() {
        let g = mesh.geometry(c);
        h_max = h_max.max(g.diameter);
        h_min = h_min.min(g.diameter);
        total_area += g.area;
        max_v = max_v.max(cell.n_vertices());
        sum_v += cell.n_vertices();
    }
    MeshStats {
        h_max,
        h_min,
        n_cells: mesh.n_cells(),
        max_vertices_per_cell: max_v,
        mean_vertices_per_cell: sum_v as f64 / mesh.n_cells() as f64,
        total_area,
    }
}
