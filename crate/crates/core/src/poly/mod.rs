//! Scaled monomial bases on polygons, exact polygon moments, and quadrature.
//!
//! Monomials are `m_α(x, y) = ((x - x_c)/h)^α₁ ((y - y_c)/h)^α₂` about the cell
//! centroid, scaled by the cell diameter, ordered graded-lexicographically:
//! `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...`.

mod moments;
mod quadrature;

pub(crate) use moments::grams_from_table;
pub use moments::{monomial_grams, polygon_moment, MomentTable};
pub use quadrature::{
    edge_legendre_eval, gauss_legendre, integrate_polygon, integrate_polygon_with, legendre,
    triangle_rule, GaussRule, TriangleRule,
};

use crate::mesh::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    pub a1: u32,
    pub a2: u32,
}

impl MultiIndex {
    pub const fn new(a1: u32, a2: u32) -> Self {
        Self { a1, a2 }
    }

    pub const fn degree(self) -> u32 {
        self.a1 + self.a2
    }

    /// Position in the graded-lexicographic ordering.
    pub const fn index(self) -> usize {
        let d = self.degree() as usize;
        d * (d + 1) / 2 + self.a2 as usize
    }
}

/// Number of monomials of total degree ≤ k: (k+1)(k+2)/2.
pub const fn dim_poly(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// All multi-indices with |α| ≤ k in graded-lexicographic order.
pub fn multi_indices(k: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(dim_poly(k));
    for d in 0..=k as u32 {
        for a2 in 0..=d {
            out.push(MultiIndex::new(d - a2, a2));
        }
    }
    out
}

/// Scaled monomial basis of P_k on one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    pub k: usize,
    pub centroid: Point2,
    pub h: f64,
    pub indices: Vec<MultiIndex>,
}

impl MonomialBasis {
    pub fn new(k: usize, centroid: Point2, h: f64) -> Self {
        Self {
            k,
            centroid,
            h,
            indices: multi_indices(k),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Scaled local coordinates `((x - x_c)/h, (y - y_c)/h)`.
    pub fn local(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.centroid.x) / self.h, (p.y - self.centroid.y) / self.h)
    }

    pub fn eval(&self, alpha: MultiIndex, p: Point2) -> f64 {
        let (x, y) = self.local(p);
        powi(x, alpha.a1) * powi(y, alpha.a2)
    }

    /// Values of every basis monomial at `p`.
    pub fn eval_all(&self, p: Point2) -> Vec<f64> {
        let (x, y) = self.local(p);
        self.indices.iter().map(|a| powi(x, a.a1) * powi(y, a.a2)).collect()
    }

    /// Gradients of every basis monomial at `p`.
    pub fn grad_all(&self, p: Point2) -> Vec<(f64, f64)> {
        let (x, y) = self.local(p);
        self.indices
            .iter()
            .map(|a| {
                let gx = if a.a1 > 0 {
                    a.a1 as f64 * powi(x, a.a1 - 1) * powi(y, a.a2) / self.h
                } else {
                    0.0
                };
                let gy = if a.a2 > 0 {
                    a.a2 as f64 * powi(x, a.a1) * powi(y, a.a2 - 1) / self.h
                } else {
                    0.0
                };
                (gx, gy)
            })
            .collect()
    }
}

#[inline]
pub(crate) fn powi(x: f64, n: u32) -> f64 {
    x.powi(n as i32)
}

/// Value and gradient of `m_α` at `p`.
pub fn monomial_eval(basis: &MonomialBasis, alpha: MultiIndex, p: Point2) -> (f64, (f64, f64)) {
    let (x, y) = basis.local(p);
    let v = powi(x, alpha.a1) * powi(y, alpha.a2);
    let gx = if alpha.a1 > 0 {
        alpha.a1 as f64 * powi(x, alpha.a1 - 1) * powi(y, alpha.a2) / basis.h
    } else {
        0.0
    };
    let gy = if alpha.a2 > 0 {
        alpha.a2 as f64 * powi(x, alpha.a1) * powi(y, alpha.a2 - 1) / basis.h
    } else {
        0.0
    };
    (v, (gx, gy))
}
