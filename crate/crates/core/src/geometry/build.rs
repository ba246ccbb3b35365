use super::{norm, DomainKind, DomainMetadata, GridDomain, Point};
use crate::error::{Error, Result};

/// Largest prefractal depth accepted at desk scale.
pub const MAX_PREFRACTAL_DEPTH: u32 = 3;

/// Voxelized ball `B(0, R)`: interior cells are those with center `|x| < R`.
///
/// The grid is laid out so that the origin is a cell center.
pub fn build_ball_domain(dim: usize, radius: f64, h: f64) -> Result<GridDomain> {
    if !(h > 0.0 && radius > 0.0) {
        return Err(Error::Precondition(format!("need R > 0 and h > 0 (R={radius}, h={h})")));
    }
    if h > radius / 4.0 {
        return Err(Error::TooCoarse { h, reason: format!("ball radius {radius} needs h ≤ R/4") });
    }
    let m = (radius / h).ceil() as usize + 1;
    let n_axis = 2 * m + 1;
    let mut shape = [n_axis, n_axis, n_axis];
    if dim == 2 {
        shape[2] = 1;
    }
    let mut origin = [0.0; 3];
    for axis in 0..dim {
        origin[axis] = -(m as f64 + 0.5) * h;
    }
    let mut mask = vec![false; shape[0] * shape[1] * shape[2]];
    let center = |i: usize| (i as f64 - m as f64) * h;
    for i in 0..shape[0] {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                let p = [center(i), center(j), if dim == 3 { center(k) } else { 0.0 }];
                if norm(&p) < radius {
                    mask[(i * shape[1] + j) * shape[2] + k] = true;
                }
            }
        }
    }
    let metadata = DomainMetadata {
        kind: DomainKind::Ball { radius },
        // a ball is flat at every scale below its diameter
        ell: 2.0 * radius,
        note: String::new(),
    };
    GridDomain::from_mask(dim, h, origin, shape, &mask, metadata)
}

/// Axis-aligned box `[lo, hi)` used by the prefractal generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxRegion {
    pub lo: Point,
    pub hi: Point,
}

#[derive(Clone, Copy, Debug)]
struct Square {
    center: Point,
    axis: usize,
    positive: bool,
    side: f64,
}

/// Boxes making up the bumped cube of side `base` after `depth` generations.
///
/// Every exposed boundary square of side `s` receives a centered outward cube
/// bump of side `s/3`; the square is then split into the `3^{n-1} - 1`
/// uncovered sub-squares plus the `2n - 1` exposed faces of the bump, all of
/// side `s/3`, which form the next generation.
pub fn prefractal_boxes(dim: usize, base: f64, depth: u32) -> Vec<BoxRegion> {
    let half = base / 2.0;
    let mut cube = BoxRegion { lo: [0.0; 3], hi: [0.0; 3] };
    for axis in 0..dim {
        cube.lo[axis] = -half;
        cube.hi[axis] = half;
    }
    let mut boxes = vec![cube];
    let mut squares = Vec::new();
    for axis in 0..dim {
        for positive in [false, true] {
            let mut center = [0.0; 3];
            center[axis] = if positive { half } else { -half };
            squares.push(Square { center, axis, positive, side: base });
        }
    }
    for _ in 0..depth {
        let mut next = Vec::with_capacity(squares.len() * 13);
        for sq in &squares {
            let third = sq.side / 3.0;
            let sign = if sq.positive { 1.0 } else { -1.0 };
            let lateral: Vec<usize> = (0..dim).filter(|&a| a != sq.axis).collect();

            let mut bump = BoxRegion { lo: sq.center, hi: sq.center };
            let plane = sq.center[sq.axis];
            bump.lo[sq.axis] = plane.min(plane + sign * third);
            bump.hi[sq.axis] = plane.max(plane + sign * third);
            for &j in &lateral {
                bump.lo[j] = sq.center[j] - third / 2.0;
                bump.hi[j] = sq.center[j] + third / 2.0;
            }
            boxes.push(bump);

            // uncovered sub-squares of the original square
            let count = 3usize.pow(lateral.len() as u32);
            for code in 0..count {
                let mut c = code;
                let mut center = sq.center;
                let mut is_middle = true;
                for &j in &lateral {
                    let off = (c % 3) as f64 - 1.0;
                    c /= 3;
                    is_middle &= off == 0.0;
                    center[j] += off * third;
                }
                if !is_middle {
                    next.push(Square { center, axis: sq.axis, positive: sq.positive, side: third });
                }
            }
            // exposed faces of the bump
            let mut top = sq.center;
            top[sq.axis] += sign * third;
            next.push(Square { center: top, axis: sq.axis, positive: sq.positive, side: third });
            for &j in &lateral {
                for positive in [false, true] {
                    let mut center = sq.center;
                    center[sq.axis] += sign * third / 2.0;
                    center[j] += if positive { third / 2.0 } else { -third / 2.0 };
                    next.push(Square { center, axis: j, positive, side: third });
                }
            }
        }
        squares = next;
    }
    boxes
}

/// Pre-fractal bumped cube: base cube `[-L/2, L/2]^n` with `depth` generations
/// of outward cube bumps. The smooth scale is `ℓ = L·3^{-depth}`.
pub fn build_prefractal_domain(dim: usize, base: f64, depth: u32, h: f64) -> Result<GridDomain> {
    if base < 10.0 {
        return Err(Error::Precondition(format!(
            "base side {base} must be ≥ 10 so the cube contains B(0,4)"
        )));
    }
    if depth > MAX_PREFRACTAL_DEPTH {
        return Err(Error::Precondition(format!(
            "depth {depth} exceeds the desk-scale cap {MAX_PREFRACTAL_DEPTH}"
        )));
    }
    let ell = base / 3f64.powi(depth as i32);
    if !(h > 0.0) || h > ell / 4.0 * (1.0 + 1e-12) {
        return Err(Error::TooCoarse { h, reason: format!("bumps of side ℓ={ell} need h ≤ ℓ/4") });
    }
    let boxes = prefractal_boxes(dim, base, depth);

    let extension: f64 = (1..=depth).map(|g| base / 3f64.powi(g as i32)).sum();
    let pad = (extension / h).ceil() as usize + 1;
    let n_axis = 2 * pad + (base / h).ceil() as usize + 1;
    let mut shape = [n_axis, n_axis, n_axis];
    if dim == 2 {
        shape[2] = 1;
    }
    let mut origin = [0.0; 3];
    for axis in 0..dim {
        origin[axis] = -base / 2.0 - pad as f64 * h;
    }

    let mut mask = vec![false; shape[0] * shape[1] * shape[2]];
    let eps = 1e-9 * h;
    for b in &boxes {
        let mut lo = [0usize; 3];
        let mut hi = [1usize; 3];
        for axis in 0..dim {
            // cell centers c with b.lo ≤ c < b.hi
            let first = ((b.lo[axis] - origin[axis]) / h - 0.5 - eps).ceil().max(0.0) as usize;
            let end = ((b.hi[axis] - origin[axis]) / h - 0.5 - eps).ceil().max(0.0) as usize;
            lo[axis] = first;
            hi[axis] = end.min(shape[axis]);
        }
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in lo[2]..hi[2] {
                    mask[(i * shape[1] + j) * shape[2] + k] = true;
                }
            }
        }
    }
    let metadata = DomainMetadata {
        kind: DomainKind::Prefractal { base, depth },
        ell,
        note: "outward cube-bump recursion (side/3, centered): one admissible pre-fractal instance"
            .into(),
    };
    GridDomain::from_mask(dim, h, origin, shape, &mask, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_counts_follow_generation_rule() {
        // 3-D: each square spawns one bump and 13 squares
        assert_eq!(prefractal_boxes(3, 10.0, 0).len(), 1);
        assert_eq!(prefractal_boxes(3, 10.0, 1).len(), 1 + 6);
        assert_eq!(prefractal_boxes(3, 10.0, 2).len(), 1 + 6 + 78);
        // 2-D: 5 segments per segment
        assert_eq!(prefractal_boxes(2, 10.0, 2).len(), 1 + 4 + 20);
    }

    #[test]
    fn first_generation_bump_geometry() {
        let boxes = prefractal_boxes(3, 9.0, 1);
        let plus_x = boxes
            .iter()
            .find(|b| b.lo[0] == 4.5)
            .expect("bump on +x face");
        assert_eq!(plus_x.hi[0], 7.5);
        assert_eq!(plus_x.lo[1], -1.5);
        assert_eq!(plus_x.hi[1], 1.5);
    }

    #[test]
    fn coarse_parameters_are_rejected() {
        assert!(matches!(build_ball_domain(3, 4.0, 2.0), Err(Error::TooCoarse { .. })));
        assert!(matches!(
            build_prefractal_domain(3, 10.0, 1, 1.0),
            Err(Error::TooCoarse { .. })
        ));
        assert!(build_prefractal_domain(3, 10.0, 4, 0.01).is_err());
        assert!(build_prefractal_domain(3, 8.0, 0, 0.5).is_err());
    }
}
