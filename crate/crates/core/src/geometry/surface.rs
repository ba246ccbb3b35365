use serde::{Deserialize, Serialize};

use super::{GridDomain, Point};
use crate::error::{precondition, Error, Result};

/// A finite nonnegative measure on the boundary faces of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    weights: Vec<f64>,
    total: f64,
}

impl BoundaryMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Precondition(format!("measure weight {w} is not finite and nonnegative")));
        }
        let total = weights.iter().sum();
        Ok(BoundaryMeasure { weights, total })
    }

    /// Surface measure σ: the area each face stands for.
    pub fn surface(domain: &GridDomain) -> Self {
        let weights: Vec<f64> = domain.faces().iter().map(|f| f.area).collect();
        let total = weights.iter().sum();
        BoundaryMeasure { weights, total }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Measure of a face set, summed in the order given.
    pub fn of(&self, faces: &[usize]) -> f64 {
        faces.iter().map(|&f| self.weights[f]).sum()
    }

    /// μ(B(Q, r) ∩ ∂Ω) with faces counted when `|center - Q| < r`.
    ///
    /// `r` is clipped to the domain diameter; a ball of that radius around a
    /// boundary point covers the whole boundary.
    pub fn ball(&self, domain: &GridDomain, q: &Point, r: f64) -> f64 {
        if r >= domain.diam() {
            return self.total;
        }
        self.of(&domain.face_index().faces_in_ball(q, r))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BoundaryMeasure {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            total: self.total * factor,
        }
    }
}

impl GridDomain {
    fn check_boundary_point(&self, q: &Point) -> Result<()> {
        let (_, d) = self.face_index().nearest(q);
        if d > self.h() * (1.0 + 1e-9) {
            return precondition(format!("{q:?} is {d} away from the nearest boundary face center"));
        }
        Ok(())
    }

    /// σ(B(Q, r)) for a boundary point `Q` and `0 < r ≤ diam`.
    pub fn sigma_ball(&self, sigma: &BoundaryMeasure, q: &Point, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return precondition(format!("radius {r} must be positive"));
        }
        self.check_boundary_point(q)?;
        Ok(sigma.ball(self, q, r.min(self.diam())))
    }

    /// Neumann–Dirichlet index `I_Q(r) = a r^{2-n} σ(B(Q, r))`.
    pub fn index_i(&self, sigma: &BoundaryMeasure, a: f64, q: &Point, r: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return precondition(format!("Robin parameter {a} must be nonnegative"));
        }
        let s = self.sigma_ball(sigma, q, r)?;
        Ok(index_value(self.dim(), a, r, s))
    }

    /// Local critical scale ρ_X: largest scale below which the index at the
    /// boundary point nearest to `x` stays ≤ 1, found by bisection.
    pub fn critical_rho_x(&self, sigma: &BoundaryMeasure, a: f64, x: &Point) -> Result<f64> {
        let (face, _) = self.face_index().nearest(x);
        let q = self.faces()[face].center;
        self.critical_rho_at(sigma, a, &q)
    }

    /// Bisection for `I_Q(ρ) = 1` on `(0, diam]` with bracket tolerance `h/4`.
    ///
    /// Returns the lower end of the final bracket, where `I_Q ≤ 1` holds.
    pub fn critical_rho_at(&self, sigma: &BoundaryMeasure, a: f64, q: &Point) -> Result<f64> {
        if !(a > 0.0) {
            return precondition(format!("Robin parameter {a} must be positive"));
        }
        let n = self.dim();
        let index = |rho: f64| index_value(n, a, rho, sigma.ball(self, q, rho));
        let diam = self.diam();
        if index(diam) <= 1.0 {
            return Ok(diam);
        }
        let tol = self.h() / 4.0;
        let (mut lo, mut hi) = (0.0f64, diam);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if index(mid) <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

pub(crate) fn index_value(n: usize, a: f64, r: f64, sigma_ball: f64) -> f64 {
    a * r.powi(2 - n as i32) * sigma_ball
}

/// Global critical scale `ρ = (a σ(∂Ω))^{1/(n-2)}`.
pub fn critical_rho_global(sigma_total: f64, a: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return precondition("the critical scale needs n ≥ 3");
    }
    if !(a > 0.0 && sigma_total > 0.0) {
        return precondition(format!("need a > 0 and σ > 0 (a={a}, σ={sigma_total})"));
    }
    Ok((a * sigma_total).powf(1.0 / (n as f64 - 2.0)))
}
