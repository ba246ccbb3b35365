use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BoundaryMeasure, GridDomain};
use crate::error::{precondition, Result};
use crate::fit::fit_line;

/// Scale window for the growth-exponent regression.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleRange {
    pub r_min: f64,
    pub r_max: f64,
}

impl ScaleRange {
    /// `[max(4h, min(ℓ, diam/16)), max(diam/4, 2 r_min)]`, capped at `diam/2`.
    pub fn default_for(domain: &GridDomain) -> Self {
        let diam = domain.diam();
        let r_min = (4.0 * domain.h()).max(domain.ell().min(diam / 16.0));
        let r_max = (diam / 4.0).max(2.0 * r_min).min(diam / 2.0);
        ScaleRange { r_min, r_max }
    }
}

/// Empirical check of the mixed-dimension and homogeneity conditions.
#[derive(Clone, Debug, Serialize)]
pub struct MixedDimensionReport {
    /// slope of log σ(B(Q,r)) against log r
    pub fitted_d: f64,
    pub fit_r2: f64,
    /// max σ(B(Q,2r)) / σ(B(Q,r))
    pub doubling_const: f64,
    /// max σ(B(Q,r)) / σ(B(P,r))
    pub homogeneity_const: f64,
    pub samples: usize,
    pub range: ScaleRange,
    pub seed: u64,
}

impl MixedDimensionReport {
    /// `n - 2 < d < n`.
    pub fn dimension_in_range(&self, n: usize) -> bool {
        self.fitted_d > n as f64 - 2.0 && self.fitted_d < n as f64
    }
}

impl GridDomain {
    pub fn verify_mixed_dimension(
        &self,
        sigma: &BoundaryMeasure,
        sample_count: usize,
        seed: u64,
    ) -> Result<MixedDimensionReport> {
        self.verify_mixed_dimension_in(sigma, sample_count, seed, ScaleRange::default_for(self))
    }

    pub fn verify_mixed_dimension_in(
        &self,
        sigma: &BoundaryMeasure,
        sample_count: usize,
        seed: u64,
        range: ScaleRange,
    ) -> Result<MixedDimensionReport> {
        if sample_count < 16 {
            return precondition(format!("need at least 16 samples, got {sample_count}"));
        }
        if !(range.r_min > 0.0 && range.r_max > range.r_min) {
            return precondition(format!("empty scale range {range:?}"));
        }
        let faces = self.faces();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ln_lo, ln_hi) = (range.r_min.ln(), range.r_max.ln());
        let mut log_r = Vec::with_capacity(sample_count);
        let mut log_s = Vec::with_capacity(sample_count);
        let mut doubling = 0.0f64;
        let mut homogeneity = 0.0f64;
        for _ in 0..sample_count {
            let q = faces[rng.gen_range(0..faces.len())].center;
            let p = faces[rng.gen_range(0..faces.len())].center;
            let r = rng.gen_range(ln_lo..=ln_hi).exp();
            let s_q = sigma.ball(self, &q, r);
            log_r.push(r.ln());
            log_s.push(s_q.ln());
            let r2 = (2.0 * r).min(self.diam());
            doubling = doubling.max(sigma.ball(self, &q, r2) / s_q);
            let s_p = sigma.ball(self, &p, r);
            homogeneity = homogeneity.max(s_q / s_p).max(s_p / s_q);
        }
        let fit = fit_line(&log_r, &log_s);
        Ok(MixedDimensionReport {
            fitted_d: fit.slope,
            fit_r2: fit.r2,
            doubling_const: doubling,
            homogeneity_const: homogeneity,
            samples: sample_count,
            range,
            seed,
        })
    }
}
