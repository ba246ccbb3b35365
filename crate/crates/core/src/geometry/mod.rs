//! Voxel domains and their boundary.
//!
//! A [`GridDomain`] is a set of interior cells on a uniform Cartesian grid of
//! width `h`. The boundary is the set of cell faces that separate an interior
//! cell from an exterior one. Each [`BoundaryFace`] carries the surface
//! measure it stands for, so that summing face areas approximates the
//! Hausdorff measure of the boundary of the generating shape and not the
//! (much larger) staircase area.

mod build;
mod corkscrew;
mod index;
mod io;
mod mixed;
mod surface;

use std::collections::VecDeque;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::{build_ball_domain, build_prefractal_domain, BoxRegion};
pub use corkscrew::Corkscrew;
pub use index::FaceIndex;
pub use io::{load_domain, save_domain, DomainHeader, DOMAIN_FORMAT_VERSION};
pub use mixed::{MixedDimensionReport, ScaleRange};
pub use surface::{critical_rho_global, BoundaryMeasure};
pub(crate) use surface::index_value;

/// A point in ambient space. In 2-D smoke mode the third coordinate is 0.
pub type Point = [f64; 3];

pub(crate) const NONE: u32 = u32::MAX;

pub fn distance(p: &Point, q: &Point) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub fn norm(p: &Point) -> f64 {
    distance(p, &[0.0; 3])
}

/// Outward normal of a boundary face: one of the `2·dim` axis directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceNormal {
    pub axis: u8,
    pub positive: bool,
}

impl FaceNormal {
    pub fn vector(&self) -> Point {
        let mut v = [0.0; 3];
        v[self.axis as usize] = if self.positive { 1.0 } else { -1.0 };
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFace {
    pub center: Point,
    pub normal: FaceNormal,
    /// Surface measure represented by this face (length^{n-1}).
    pub area: f64,
    /// Interior cell on the inner side of the face.
    pub owner: usize,
}

/// How a domain was generated. Stored in the serialized header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Ball { radius: f64 },
    Prefractal { base: f64, depth: u32 },
    /// A bare cell mask with no generating geometry; faces keep their voxel area.
    Mask,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainMetadata {
    #[serde(flatten)]
    pub kind: DomainKind,
    /// Scale below which the boundary is flat (Lipschitz).
    pub ell: f64,
    /// Free-form note, e.g. flags for non-canonical constructions.
    #[serde(default)]
    pub note: String,
}

impl DomainMetadata {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            DomainKind::Ball { .. } => "ball",
            DomainKind::Prefractal { .. } => "prefractal",
            DomainKind::Mask => "mask",
        }
    }
}

/// Voxel discretization of a bounded domain.
#[derive(Clone, Debug)]
pub struct GridDomain {
    dim: usize,
    h: f64,
    origin: Point,
    shape: [usize; 3],
    /// grid linear index -> interior cell index, or `NONE`
    lookup: Vec<u32>,
    /// interior cell index -> grid coordinates, in increasing linear order
    cells: Vec<[u32; 3]>,
    faces: Vec<BoundaryFace>,
    /// faces owned by cell `i` are `faces[face_start[i]..face_start[i+1]]`
    face_start: Vec<u32>,
    diam: f64,
    metadata: DomainMetadata,
    face_index: FaceIndex,
    distance_field: OnceLock<Vec<f64>>,
}

impl GridDomain {
    /// Builds a domain from an interior mask over the bounding grid.
    ///
    /// The outermost layer of the grid must be exterior, and the interior
    /// cells must form a single face-connected component.
    pub fn from_mask(
        dim: usize,
        h: f64,
        origin: Point,
        shape: [usize; 3],
        mask: &[bool],
        metadata: DomainMetadata,
    ) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidDomain(format!("dimension {dim} not supported")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidDomain(format!("cell width {h} must be positive")));
        }
        if dim == 2 && shape[2] != 1 {
            return Err(Error::InvalidDomain("2-D grids must have shape[2] == 1".into()));
        }
        let total = shape[0] * shape[1] * shape[2];
        if mask.len() != total {
            return Err(Error::InvalidDomain(format!(
                "mask has {} entries, grid has {total}",
                mask.len()
            )));
        }

        let mut lookup = vec![NONE; total];
        let mut cells = Vec::new();
        for (lin, &inside) in mask.iter().enumerate() {
            if inside {
                let c = unlinear(lin, &shape);
                for axis in 0..dim {
                    if c[axis] == 0 || c[axis] as usize == shape[axis] - 1 {
                        return Err(Error::InvalidDomain(
                            "interior cell touches the edge of the bounding grid".into(),
                        ));
                    }
                }
                lookup[lin] = cells.len() as u32;
                cells.push(c);
            }
        }
        if cells.is_empty() {
            return Err(Error::InvalidDomain("no interior cells".into()));
        }

        let mut domain = GridDomain {
            dim,
            h,
            origin,
            shape,
            lookup,
            cells,
            faces: Vec::new(),
            face_start: Vec::new(),
            diam: 0.0,
            metadata,
            face_index: FaceIndex::empty(),
            distance_field: OnceLock::new(),
        };
        domain.check_connected()?;
        domain.extract_faces();
        domain.diam = domain.compute_diameter();
        domain.face_index = FaceIndex::new(&domain.faces, (4.0 * h).max(domain.diam / 48.0));
        Ok(domain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    pub fn metadata(&self) -> &DomainMetadata {
        &self.metadata
    }

    /// Smooth scale ℓ recorded at construction.
    pub fn ell(&self) -> f64 {
        self.metadata.ell
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    pub fn face_index(&self) -> &FaceIndex {
        &self.face_index
    }

    pub fn cell_coords(&self, cell: usize) -> [u32; 3] {
        self.cells[cell]
    }

    /// `h^{n-2}`: the two-point flux coefficient between adjacent cells.
    pub fn coupling(&self) -> f64 {
        self.h.powi(self.dim as i32 - 2)
    }

    /// `h^{n-1}`: area of one voxel face.
    pub fn voxel_face_area(&self) -> f64 {
        self.h.powi(self.dim as i32 - 1)
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let c = self.cells[cell];
        let mut p = [0.0; 3];
        for axis in 0..self.dim {
            p[axis] = self.origin[axis] + (c[axis] as f64 + 0.5) * self.h;
        }
        p
    }

    pub fn cell_faces(&self, cell: usize) -> std::ops::Range<usize> {
        self.face_start[cell] as usize..self.face_start[cell + 1] as usize
    }

    /// Whether the cell owns at least one boundary face.
    pub fn is_boundary_cell(&self, cell: usize) -> bool {
        self.face_start[cell] != self.face_start[cell + 1]
    }

    /// Interior cell at grid coordinates, if any.
    pub fn cell_at(&self, coords: [i64; 3]) -> Option<usize> {
        for axis in 0..3 {
            if coords[axis] < 0 || coords[axis] as usize >= self.shape[axis] {
                return None;
            }
        }
        let lin = linear(&[coords[0] as u32, coords[1] as u32, coords[2] as u32], &self.shape);
        match self.lookup[lin] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    /// Interior cell whose closed voxel contains `p`.
    ///
    /// Points within `h/2` of a center map to that cell; points on a shared
    /// face map to the cell with the higher grid coordinate.
    pub fn locate(&self, p: &Point) -> Result<usize> {
        let mut coords = [0i64; 3];
        for axis in 0..self.dim {
            coords[axis] = ((p[axis] - self.origin[axis]) / self.h).floor() as i64;
        }
        self.cell_at(coords).ok_or(Error::Exterior { point: *p })
    }

    /// Face-adjacent interior neighbours of `cell`, ordered by axis then direction
    /// (−x, +x, −y, +y, −z, +z). Entries are `None` across boundary faces.
    pub fn neighbors(&self, cell: usize) -> [Option<usize>; 6] {
        let c = self.cells[cell];
        let mut out = [None; 6];
        for axis in 0..self.dim {
            for (k, step) in [-1i64, 1].into_iter().enumerate() {
                let mut q = [c[0] as i64, c[1] as i64, c[2] as i64];
                q[axis] += step;
                out[2 * axis + k] = self.cell_at(q);
            }
        }
        out
    }

    /// Euclidean distance from each cell center to the boundary surface.
    ///
    /// Computed once by nearest-face propagation over the 3^n−1 neighbourhood,
    /// starting from the faces themselves.
    pub fn boundary_distances(&self) -> &[f64] {
        self.distance_field.get_or_init(|| corkscrew::distance_field(self))
    }

    pub fn boundary_distance(&self, cell: usize) -> f64 {
        self.boundary_distances()[cell]
    }

    /// Cells whose centers lie in the open ball `B(c, r)`, in increasing index order.
    pub fn cells_in_ball(&self, c: &Point, r: f64, closed: bool) -> Vec<usize> {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for axis in 0..self.dim {
            lo[axis] = (((c[axis] - r - self.origin[axis]) / self.h).floor() as i64 - 1).max(0);
            hi[axis] = (((c[axis] + r - self.origin[axis]) / self.h).ceil() as i64 + 1)
                .min(self.shape[axis] as i64 - 1);
        }
        let mut out = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    if let Some(cell) = self.cell_at([i, j, k]) {
                        let d = distance(&self.cell_center(cell), c);
                        if d < r || (closed && d <= r) {
                            out.push(cell);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Interior mask over the full bounding grid, in linear order.
    pub fn mask(&self) -> Vec<bool> {
        self.lookup.iter().map(|&v| v != NONE).collect()
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.cells.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(cell) = queue.pop_front() {
            for nb in self.neighbors(cell).into_iter().flatten() {
                if !seen[nb] {
                    seen[nb] = true;
                    count += 1;
                    queue.push_back(nb);
                }
            }
        }
        if count != n {
            return Err(Error::InvalidDomain(format!(
                "interior is disconnected ({count} of {n} cells reachable)"
            )));
        }
        Ok(())
    }

    fn extract_faces(&mut self) {
        let voxel_area = self.voxel_face_area();
        let mut faces = Vec::new();
        let mut face_start = Vec::with_capacity(self.cells.len() + 1);
        for cell in 0..self.cells.len() {
            face_start.push(faces.len() as u32);
            let center = self.cell_center(cell);
            let nbrs = self.neighbors(cell);
            for axis in 0..self.dim {
                for (k, positive) in [false, true].into_iter().enumerate() {
                    if nbrs[2 * axis + k].is_some() {
                        continue;
                    }
                    let normal = FaceNormal { axis: axis as u8, positive };
                    let mut fc = center;
                    fc[axis] += if positive { 0.5 * self.h } else { -0.5 * self.h };
                    let area = voxel_area * self.normal_cosine(&fc, axis);
                    faces.push(BoundaryFace { center: fc, normal, area, owner: cell });
                }
            }
        }
        face_start.push(faces.len() as u32);
        self.faces = faces;
        self.face_start = face_start;
    }

    /// `|n · e_axis|` for the unit outward normal n of the generating surface near `p`.
    ///
    /// A surface patch of area A is covered by staircase faces of axis `i`
    /// with total area `A |n_i|`; weighting each by `|n_i|` gives back
    /// `A Σ n_i² = A`, and stays accurate on flat terraces near the poles.
    fn normal_cosine(&self, p: &Point, axis: usize) -> f64 {
        match self.metadata.kind {
            DomainKind::Ball { .. } => {
                let r = norm(p);
                if r == 0.0 {
                    return 1.0;
                }
                (p[axis] / r).abs()
            }
            DomainKind::Prefractal { .. } | DomainKind::Mask => 1.0,
        }
    }

    /// Diameter of the closed domain, from the extreme voxel corners of each grid row.
    fn compute_diameter(&self) -> f64 {
        let h = self.h;
        let mut candidates: Vec<Point> = Vec::new();
        let rows = self.shape[1] * self.shape[2];
        let mut first = vec![u32::MAX; rows];
        let mut last = vec![0u32; rows];
        for c in &self.cells {
            let row = c[1] as usize * self.shape[2] + c[2] as usize;
            first[row] = first[row].min(c[0]);
            last[row] = last[row].max(c[0]);
        }
        for row in 0..rows {
            if first[row] == u32::MAX {
                continue;
            }
            let j = (row / self.shape[2]) as f64;
            let k = (row % self.shape[2]) as f64;
            for x in [first[row] as f64, last[row] as f64 + 1.0] {
                let y0 = self.origin[1] + j * h;
                let z0 = self.origin[2] + k * h;
                let px = self.origin[0] + x * h;
                if self.dim == 2 {
                    candidates.push([px, y0, 0.0]);
                    candidates.push([px, y0 + h, 0.0]);
                } else {
                    for (dy, dz) in [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h)] {
                        candidates.push([px, y0 + dy, z0 + dz]);
                    }
                }
            }
        }
        let directions = sphere_directions(self.dim);
        let mut best = 0.0f64;
        for u in &directions {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in &candidates {
                let s = p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
                lo = lo.min(s);
                hi = hi.max(s);
            }
            best = best.max(hi - lo);
        }
        best
    }
}

/// Evenly spread unit directions over a half sphere (3-D) or half circle (2-D).
fn sphere_directions(dim: usize) -> Vec<Point> {
    if dim == 2 {
        return (0..720)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / 720.0;
                [t.cos(), t.sin(), 0.0]
            })
            .collect();
    }
    let n = 4000;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            // z in (0, 1]: upper hemisphere suffices since widths are symmetric
            let z = 1.0 - (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

pub(crate) fn linear(c: &[u32; 3], shape: &[usize; 3]) -> usize {
    (c[0] as usize * shape[1] + c[1] as usize) * shape[2] + c[2] as usize
}

pub(crate) fn unlinear(lin: usize, shape: &[usize; 3]) -> [u32; 3] {
    let k = lin % shape[2];
    let rest = lin / shape[2];
    let j = rest % shape[1];
    let i = rest / shape[1];
    [i as u32, j as u32, k as u32]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab(nx: usize) -> GridDomain {
        // nx × 1 × 1 interior inside a one-cell exterior padding
        let shape = [nx + 2, 3, 3];
        let mut mask = vec![false; shape[0] * shape[1] * shape[2]];
        for i in 1..=nx {
            mask[linear(&[i as u32, 1, 1], &shape)] = true;
        }
        let meta = DomainMetadata { kind: DomainKind::Mask, ell: 1.0, note: String::new() };
        GridDomain::from_mask(3, 0.5, [0.0; 3], shape, &mask, meta).unwrap()
    }

    #[test]
    fn single_cell_has_six_faces() {
        let d = slab(1);
        assert_eq!(d.num_cells(), 1);
        assert_eq!(d.faces().len(), 6);
        assert!(d.faces().iter().all(|f| f.area == 0.25 && f.owner == 0));
    }

    #[test]
    fn faces_separate_interior_from_exterior() {
        let d = slab(3);
        // 3×1×1 bar: 2 end faces + 4 side faces per cell
        assert_eq!(d.faces().len(), 14);
        for f in d.faces() {
            let owner = d.cell_center(f.owner);
            let n = f.normal.vector();
            let outside = [
                owner[0] + n[0] * d.h(),
                owner[1] + n[1] * d.h(),
                owner[2] + n[2] * d.h(),
            ];
            assert!(d.locate(&outside).is_err());
        }
    }

    #[test]
    fn disconnected_mask_is_rejected() {
        let shape = [5, 3, 3];
        let mut mask = vec![false; 45];
        mask[linear(&[1, 1, 1], &shape)] = true;
        mask[linear(&[3, 1, 1], &shape)] = true;
        let meta = DomainMetadata { kind: DomainKind::Mask, ell: 1.0, note: String::new() };
        let err = GridDomain::from_mask(3, 1.0, [0.0; 3], shape, &mask, meta).unwrap_err();
        assert!(matches!(err, Error::InvalidDomain(_)));
    }

    #[test]
    fn locate_snaps_within_half_cell() {
        let d = slab(3);
        let c = d.cell_center(1);
        let p = [c[0] + 0.2, c[1] - 0.2, c[2] + 0.1];
        assert_eq!(d.locate(&p).unwrap(), 1);
        assert!(d.locate(&[100.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn slab_diameter_matches_box_diagonal() {
        let d = slab(3);
        let exact = (1.5f64.powi(2) + 0.5f64.powi(2) + 0.5f64.powi(2)).sqrt();
        assert!((d.diam() - exact).abs() < 1e-3 * exact, "{}", d.diam());
    }
}
