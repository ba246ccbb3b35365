use super::{distance, BoundaryFace, Point};

/// Uniform bucket grid over boundary face centers.
#[derive(Debug, Clone)]
pub struct FaceIndex {
    bucket: f64,
    lo: Point,
    dims: [usize; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
    centers: Vec<Point>,
}

impl FaceIndex {
    pub(crate) fn empty() -> Self {
        FaceIndex {
            bucket: 1.0,
            lo: [0.0; 3],
            dims: [1, 1, 1],
            starts: vec![0, 0],
            items: Vec::new(),
            centers: Vec::new(),
        }
    }

    pub fn new(faces: &[BoundaryFace], bucket: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for f in faces {
            for a in 0..3 {
                lo[a] = lo[a].min(f.center[a]);
                hi[a] = hi[a].max(f.center[a]);
            }
        }
        let mut dims = [1usize; 3];
        for a in 0..3 {
            dims[a] = ((hi[a] - lo[a]) / bucket).floor() as usize + 1;
        }
        let centers: Vec<Point> = faces.iter().map(|f| f.center).collect();
        let nb = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; nb + 1];
        let keys: Vec<usize> = centers
            .iter()
            .map(|c| {
                let b = bucket_of(c, &lo, bucket, &dims);
                (b[0] as usize * dims[1] + b[1] as usize) * dims[2] + b[2] as usize
            })
            .collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..nb {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; centers.len()];
        for (face, &k) in keys.iter().enumerate() {
            items[fill[k] as usize] = face as u32;
            fill[k] += 1;
        }
        FaceIndex { bucket, lo, dims, starts: counts, items, centers }
    }

    fn bucket_faces(&self, b: [i64; 3]) -> &[u32] {
        let k = (b[0] as usize * self.dims[1] + b[1] as usize) * self.dims[2] + b[2] as usize;
        &self.items[self.starts[k] as usize..self.starts[k + 1] as usize]
    }

    /// Faces whose centers satisfy `|c - q| < r`, in increasing index order.
    pub fn faces_in_ball(&self, q: &Point, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..3 {
            lo[a] = (((q[a] - r - self.lo[a]) / self.bucket).floor() as i64).max(0);
            hi[a] = (((q[a] + r - self.lo[a]) / self.bucket).floor() as i64)
                .min(self.dims[a] as i64 - 1);
            if lo[a] > hi[a] {
                return out;
            }
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    for &f in self.bucket_faces([i, j, k]) {
                        if distance(&self.centers[f as usize], q) < r {
                            out.push(f as usize);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Nearest face center to `p`; ties go to the lowest face index.
    pub fn nearest(&self, p: &Point) -> (usize, f64) {
        self.nearest_by(p, |f| distance(&self.centers[f], p), 0.0)
    }

    /// Generic nearest search under a per-face metric that never undercuts the
    /// center distance by more than `slack`.
    pub(crate) fn nearest_by(
        &self,
        p: &Point,
        metric: impl Fn(usize) -> f64,
        slack: f64,
    ) -> (usize, f64) {
        let mut pb = [0i64; 3];
        let mut smax = 0i64;
        for a in 0..3 {
            pb[a] = ((p[a] - self.lo[a]) / self.bucket).floor() as i64;
            let far = pb[a].abs().max((pb[a] - (self.dims[a] as i64 - 1)).abs());
            smax = smax.max(far);
        }
        let mut best = (usize::MAX, f64::INFINITY);
        for s in 0..=smax {
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            let mut empty = false;
            for a in 0..3 {
                lo[a] = (pb[a] - s).max(0);
                hi[a] = (pb[a] + s).min(self.dims[a] as i64 - 1);
                empty |= lo[a] > hi[a];
            }
            if !empty {
                for i in lo[0]..=hi[0] {
                    for j in lo[1]..=hi[1] {
                        for k in lo[2]..=hi[2] {
                            let ring = (i - pb[0]).abs().max((j - pb[1]).abs()).max((k - pb[2]).abs());
                            if ring != s {
                                continue;
                            }
                            for &f in self.bucket_faces([i, j, k]) {
                                let d = metric(f as usize);
                                let f = f as usize;
                                if d < best.1 || (d == best.1 && f < best.0) {
                                    best = (f, d);
                                }
                            }
                        }
                    }
                }
            }
            // every unvisited bucket is at least s·bucket away from p
            if best.1 + slack < s as f64 * self.bucket {
                break;
            }
        }
        best
    }
}

fn bucket_of(c: &Point, lo: &Point, bucket: f64, dims: &[usize; 3]) -> [u32; 3] {
    let mut b = [0u32; 3];
    for a in 0..3 {
        let v = ((c[a] - lo[a]) / bucket).floor() as i64;
        b[a] = v.clamp(0, dims[a] as i64 - 1) as u32;
    }
    b
}
