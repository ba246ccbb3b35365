use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HarmonicMeasure;
use crate::error::{precondition, Result};
use crate::geometry::{distance, GridDomain, Point};

/// A maximal `r`-separated net of boundary face centers.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverSpec {
    pub radius: f64,
    /// face indices of the centers, in selection order
    pub centers: Vec<usize>,
    /// max number of centers within `2r` of any face
    pub overlap: usize,
    pub seed: u64,
}

impl CoverSpec {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Hash grid over a set of points with cells of side `cell`.
struct PointGrid {
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl PointGrid {
    fn new(cell: f64) -> Self {
        PointGrid { cell, buckets: HashMap::new() }
    }

    fn key(&self, p: &Point) -> [i64; 3] {
        p.map(|x| (x / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: &Point, id: usize) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(id);
    }

    /// Ids within `reach` buckets of `p`'s bucket.
    fn near(&self, p: &Point, reach: i64) -> impl Iterator<Item = usize> + '_ {
        let k = self.key(p);
        let span = -reach..=reach;
        span.clone()
            .flat_map(move |i| span.clone().flat_map(move |j| (-reach..=reach).map(move |l| [i, j, l])))
            .filter_map(move |d| self.buckets.get(&[k[0] + d[0], k[1] + d[1], k[2] + d[2]]))
            .flatten()
            .copied()
    }
}

/// Greedy maximal `r`-net over face centers visited in seeded random order.
pub fn build_cover(domain: &GridDomain, r: f64, seed: u64) -> Result<CoverSpec> {
    if r < 4.0 * domain.h() * (1.0 - 1e-12) || r > domain.diam() {
        return precondition(format!(
            "cover radius {r} outside [4h, diam] = [{}, {}]",
            4.0 * domain.h(),
            domain.diam()
        ));
    }
    let faces = domain.faces();
    let mut order: Vec<usize> = (0..faces.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut grid = PointGrid::new(r);
    let mut centers = Vec::new();
    for f in order {
        let p = &faces[f].center;
        let taken = grid.near(p, 1).any(|c| distance(&faces[c].center, p) < r);
        if !taken {
            grid.insert(p, f);
            centers.push(f);
        }
    }
    let overlap = faces
        .iter()
        .map(|face| {
            grid.near(&face.center, 2)
                .filter(|&c| distance(&faces[c].center, &face.center) < 2.0 * r)
                .count()
        })
        .max()
        .unwrap_or(0);
    Ok(CoverSpec { radius: r, centers, overlap, seed })
}

/// Makarov 2-entropy `S = Σ_i ω(B(c_i, 2r))²` over the cover.
pub fn makarov_entropy(domain: &GridDomain, omega: &HarmonicMeasure, cover: &CoverSpec) -> f64 {
    let faces = domain.faces();
    let index = domain.face_index();
    cover
        .centers
        .iter()
        .map(|&c| {
            let m = omega.of(&index.faces_in_ball(&faces[c].center, 2.0 * cover.radius));
            m * m
        })
        .sum()
}

/// `Σ_i ω(V_i)²` over the Voronoi partition of the faces by cover centers.
///
/// The cells are disjoint, so `1/N ≤ S ≤ ω(∂Ω)²` holds for a probability measure.
pub fn voronoi_entropy(domain: &GridDomain, omega: &HarmonicMeasure, cover: &CoverSpec) -> f64 {
    let faces = domain.faces();
    let mut grid = PointGrid::new(cover.radius);
    for (k, &c) in cover.centers.iter().enumerate() {
        grid.insert(&faces[c].center, k);
    }
    let mut mass = vec![0.0; cover.centers.len()];
    for (f, face) in faces.iter().enumerate() {
        // every face is within r of some center, hence within two buckets
        let best = grid
            .near(&face.center, 2)
            .map(|k| (distance(&faces[cover.centers[k]].center, &face.center), k))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, k)| k)
            .expect("cover is maximal");
        mass[best] += omega.weights.weights()[f];
    }
    mass.iter().map(|m| m * m).sum()
}
