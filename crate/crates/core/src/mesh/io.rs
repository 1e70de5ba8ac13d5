//! Line-oriented mesh text format.
//!
//! ```text
//! vem-mesh 1
//! vertices <N>
//! <x> <y>
//! cells <M>
//! <n> <i1> ... <in>
//! ```
//!
//! `#` starts a comment; blank lines are ignored. Cell indices are 0-based and
//! counter-clockwise. Coordinates are written with 17 significant digits so a
//! write/read/write cycle is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{polygon_geometry, Cell, Mesh, Point2};
use crate::{Error, Result};

const MAGIC: &str = "vem-mesh";
const VERSION: &str = "1";

pub fn write_mesh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{MAGIC} {VERSION}").unwrap();
    writeln!(s, "vertices {}", mesh.n_vertices()).unwrap();
    for p in mesh.vertices() {
        writeln!(s, "{:.16e} {:.16e}", p.x, p.y).unwrap();
    }
    writeln!(s, "cells {}", mesh.n_cells()).unwrap();
    for cell in mesh.cells() {
        write!(s, "{}", cell.n_vertices()).unwrap();
        for v in &cell.vertex_ids {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_mesh(&text, path)
}

/// Parse mesh text; `origin` is only used in error messages.
pub fn parse_mesh(text: &str, origin: &Path) -> Result<Mesh> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(text.lines().count(), format!("unexpected end of file, expected {what}")))
    };

    let (ln, header) = next("header")?;
    let mut it = header.split_whitespace();
    if it.next() != Some(MAGIC) || it.next() != Some(VERSION) || it.next().is_some() {
        return Err(err(ln, format!("malformed header '{header}', expected '{MAGIC} {VERSION}'")));
    }

    let count = |ln: usize, line: &str, keyword: &str| -> Result<usize> {
        let mut it = line.split_whitespace();
        match (it.next(), it.next().map(str::parse::<usize>), it.next()) {
            (Some(k), Some(Ok(n)), None) if k == keyword => Ok(n),
            _ => Err(err(ln, format!("expected '{keyword} <count>', found '{line}'"))),
        }
    };

    let (ln, line) = next("vertex count")?;
    let nv = count(ln, line, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = next("vertex coordinates")?;
        let coords: Vec<&str> = line.split_whitespace().collect();
        if coords.len() != 2 {
            return Err(err(ln, format!("expected two coordinates, found '{line}'")));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(ln, format!("invalid coordinate '{s}'")))
        };
        vertices.push(Point2::new(parse(coords[0])?, parse(coords[1])?));
    }

    let (ln, line) = next("cell count")?;
    let nc = count(ln, line, "cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, line) = next("cell")?;
        let fields: Vec<usize> = line
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|_| err(ln, format!("invalid index '{s}'"))))
            .collect::<Result<_>>()?;
        let (&n, ids) = fields
            .split_first()
            .ok_or_else(|| err(ln, "empty cell line".into()))?;
        if ids.len() != n || n < 3 {
            return Err(err(ln, format!("cell declares {n} vertices but lists {}", ids.len())));
        }
        if let Some(&bad) = ids.iter().find(|&&v| v >= nv) {
            return Err(err(ln, format!("vertex index {bad} out of range (n_vertices = {nv})")));
        }
        let pts: Vec<Point2> = ids.iter().map(|&v| vertices[v]).collect();
        if polygon_geometry(&pts).is_none() {
            return Err(err(ln, "cell is not counter-clockwise (signed area <= 0)".into()));
        }
        cells.push(Cell::new(ids.to_vec()));
    }
    if let Some((ln, line)) = lines.next() {
        return Err(err(ln, format!("trailing content '{line}'")));
    }
    Mesh::new(vertices, cells)
}
