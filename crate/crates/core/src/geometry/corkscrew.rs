use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::{BoundaryFace, GridDomain, Point};
use crate::error::{precondition, Error, Result};

/// Interior corkscrew point `A_r(Q)` and the constant it achieves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Corkscrew {
    pub cell: usize,
    pub point: Point,
    /// distance from the point to the boundary
    pub delta: f64,
    /// achieved `M = r / δ(A)`
    pub m: f64,
}

/// Distance from `p` to the closed square (segment in 2-D) of a face.
pub(crate) fn face_distance(face: &BoundaryFace, p: &Point, h: f64, dim: usize) -> f64 {
    let k = face.normal.axis as usize;
    let mut d2 = (p[k] - face.center[k]).powi(2);
    for j in 0..dim {
        if j != k {
            let t = ((p[j] - face.center[j]).abs() - 0.5 * h).max(0.0);
            d2 += t * t;
        }
    }
    d2.sqrt()
}

pub(super) fn distance_field(domain: &GridDomain) -> Vec<f64> {
    let n = domain.num_cells();
    let h = domain.h();
    let dim = domain.dim();
    let faces = domain.faces();
    let mut dist = vec![f64::INFINITY; n];
    let mut nearest = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    for cell in 0..n {
        let range = domain.cell_faces(cell);
        if !range.is_empty() {
            dist[cell] = 0.5 * h;
            nearest[cell] = range.start as u32;
            heap.push(Reverse((dist[cell].to_bits(), cell)));
        }
    }
    let offsets = neighbourhood(dim);
    while let Some(Reverse((bits, cell))) = heap.pop() {
        if f64::from_bits(bits) > dist[cell] {
            continue;
        }
        let face = &faces[nearest[cell] as usize];
        let c = domain.cell_coords(cell);
        for off in &offsets {
            let q = [c[0] as i64 + off[0], c[1] as i64 + off[1], c[2] as i64 + off[2]];
            if let Some(nb) = domain.cell_at(q) {
                let d = face_distance(face, &domain.cell_center(nb), h, dim);
                if d < dist[nb] {
                    dist[nb] = d;
                    nearest[nb] = nearest[cell];
                    heap.push(Reverse((d.to_bits(), nb)));
                }
            }
        }
    }
    dist
}

fn neighbourhood(dim: usize) -> Vec<[i64; 3]> {
    let zr: &[i64] = if dim == 3 { &[-1, 0, 1] } else { &[0] };
    let mut out = Vec::new();
    for &i in &[-1i64, 0, 1] {
        for &j in &[-1i64, 0, 1] {
            for &k in zr {
                if (i, j, k) != (0, 0, 0) {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

impl GridDomain {
    /// Interior corkscrew point for the boundary ball `B(Q, r)`.
    ///
    /// Scans the cell centers in the closed ball and keeps the one farthest
    /// from the boundary; ties go to the lowest cell index.
    pub fn corkscrew_point(&self, q: &Point, r: f64) -> Result<Corkscrew> {
        if r < self.h() {
            return precondition(format!("radius {r} is below the cell width {}", self.h()));
        }
        if r > self.diam() / 4.0 * (1.0 + 1e-12) {
            return precondition(format!("radius {r} exceeds diam/4 = {}", self.diam() / 4.0));
        }
        let deltas = self.boundary_distances();
        let mut best: Option<(usize, f64)> = None;
        for cell in self.cells_in_ball(q, r, true) {
            let d = deltas[cell];
            if best.map_or(true, |(_, bd)| d > bd) {
                best = Some((cell, d));
            }
        }
        let (cell, delta) = best.ok_or(Error::NoCorkscrew { q: *q, r })?;
        Ok(Corkscrew { cell, point: self.cell_center(cell), delta, m: r / delta })
    }

    /// Nearest boundary face center to `x` (the boundary point `Q_X`).
    pub fn nearest_boundary_point(&self, x: &Point) -> (usize, Point) {
        let (f, _) = self.face_index().nearest(x);
        (f, self.faces()[f].center)
    }
}
