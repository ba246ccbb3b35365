//! Deterministic preconditioned conjugate gradients.
//!
//! Reductions are split into fixed-size chunks whose partial sums are added
//! in chunk order, so results do not depend on the number of threads.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{Field, LinearSystem, CHUNK};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rel_tol: f64,
    /// `None` means `20·√unknowns + 1000`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { rel_tol: 1e-10, max_iter: None, preconditioner: Preconditioner::Jacobi }
    }
}

impl SolverConfig {
    pub fn with_tol(rel_tol: f64) -> Self {
        SolverConfig { rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(SolveError::InvalidConfig(format!("rel_tol {} not in (0, 1)", self.rel_tol)));
        }
        if self.max_iter == Some(0) {
            return Err(SolveError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn iteration_cap(&self, unknowns: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| (20.0 * (unknowns as f64).sqrt()).ceil() as usize + 1000)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// true residual `‖b − Ax‖ / ‖b‖` over free cells
    pub relative_residual: f64,
    /// seconds; excluded from reproducibility guarantees
    pub wall_time: f64,
    /// the target was below the rounding floor `16 ε ‖|A||x|‖` and the
    /// solve stopped at that floor instead
    pub floor_limited: bool,
    /// `√(rᵀ M⁻¹ r)` per iteration, starting with the initial residual
    #[serde(skip)]
    pub preconditioned_residuals: Vec<f64>,
    /// `½xᵀAx − bᵀx` per iteration; nonincreasing for an SPD system
    #[serde(skip)]
    pub energies: Vec<f64>,
}

impl SolveReport {
    /// Largest increase of the energy functional between iterations.
    pub fn energy_increase(&self) -> f64 {
        self.energies.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no convergence after {} iterations (relative residual {:e})", .0.iterations, .0.relative_residual)]
    NonConvergence(Box<SolveReport>),
    #[error("indefinite system: curvature {curvature:e} at iteration {iteration}")]
    IndefiniteSystem { iteration: usize, curvature: f64 },
    #[error("non-finite right-hand side")]
    NonFiniteRhs,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Multiple of `ε ‖|A||x|‖` below which a true residual counts as converged.
pub const ROUNDING_FLOOR: f64 = 16.0;

/// Deterministic dot product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    let partial: Vec<f64> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(ys, xs)| {
        for (yi, xi) in ys.iter_mut().zip(xs) {
            *yi += alpha * xi;
        }
    });
}

/// Solves `A x = rhs` for the free cells of `system`; pinned cells keep their values.
pub fn cg_solve(
    system: &LinearSystem,
    rhs: &[f64],
    config: &SolverConfig,
) -> Result<(Field, SolveReport), SolveError> {
    config.validate()?;
    if rhs.len() != system.len() {
        return Err(SolveError::InvalidConfig(format!(
            "rhs has {} entries for a system of size {}",
            rhs.len(),
            system.len()
        )));
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::NonFiniteRhs);
    }
    let start = Instant::now();
    let n = system.len();
    let b = system.effective_rhs(rhs);
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| match config.preconditioner {
            _ if !system.is_free(i) => 0.0,
            Preconditioner::Jacobi => 1.0 / system.diagonal(i),
            Preconditioner::None => 1.0,
        })
        .collect();
    if inv_diag.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(SolveError::IndefiniteSystem { iteration: 0, curvature: f64::NAN });
    }
    let precondition = |r: &[f64], z: &mut [f64]| {
        z.par_chunks_mut(CHUNK).enumerate().for_each(|(c, zs)| {
            for (k, zi) in zs.iter_mut().enumerate() {
                let i = c * CHUNK + k;
                *zi = inv_diag[i] * r[i];
            }
        });
    };

    let b_norm = dot(&b, &b).sqrt();
    let cap = config.iteration_cap(system.num_unknowns());
    let mut x = vec![0.0; n];
    let mut report = SolveReport::default();
    let finish = |x: Vec<f64>, mut report: SolveReport, start: Instant| {
        let mut values = x;
        for (&c, &v) in system.pinned() {
            values[c] = v;
        }
        report.wall_time = start.elapsed().as_secs_f64();
        (Field::new(values), report)
    };
    if b_norm == 0.0 {
        report.energies.push(0.0);
        report.preconditioned_residuals.push(0.0);
        return Ok(finish(x, report, start));
    }

    let mut r = b.clone();
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut restarts = 0;
    'outer: loop {
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        report.preconditioned_residuals.push(rz.max(0.0).sqrt());
        report.energies.push(-0.5 * (dot(&x, &b) + dot(&x, &r)));
        loop {
            let r_norm = dot(&r, &r).sqrt();
            if r_norm <= config.rel_tol * b_norm {
                // guard against drift of the recursive residual
                system.apply_free(&x, &mut ap);
                let true_r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
                let true_norm = dot(&true_r, &true_r).sqrt();
                report.relative_residual = true_norm / b_norm;
                if true_norm <= config.rel_tol * b_norm {
                    return Ok(finish(x, report, start));
                }
                if true_norm <= ROUNDING_FLOOR * f64::EPSILON * system.abs_apply_norm(&x) {
                    report.floor_limited = true;
                    return Ok(finish(x, report, start));
                }
                if restarts >= 3 {
                    report.wall_time = start.elapsed().as_secs_f64();
                    return Err(SolveError::NonConvergence(Box::new(report)));
                }
                restarts += 1;
                r = true_r;
                continue 'outer;
            }
            if report.iterations >= cap {
                report.relative_residual = r_norm / b_norm;
                report.wall_time = start.elapsed().as_secs_f64();
                return Err(SolveError::NonConvergence(Box::new(report)));
            }
            system.apply_free(&p, &mut ap);
            let curvature = dot(&p, &ap);
            if !(curvature > 0.0) {
                return Err(SolveError::IndefiniteSystem { iteration: report.iterations, curvature });
            }
            let alpha = rz / curvature;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            precondition(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            p.par_chunks_mut(CHUNK).zip(z.par_chunks(CHUNK)).for_each(|(ps, zs)| {
                for (pi, zi) in ps.iter_mut().zip(zs) {
                    *pi = zi + beta * *pi;
                }
            });
            report.iterations += 1;
            report.preconditioned_residuals.push(rz.max(0.0).sqrt());
            report.energies.push(-0.5 * (dot(&x, &b) + dot(&x, &r)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one_system() {
        let sys = LinearSystem::from_triplets(1, &[(0, 0, 4.0)]).unwrap();
        let (x, report) = cg_solve(&sys, &[2.0], &SolverConfig::default()).unwrap();
        assert_eq!(x.at(0), 0.5);
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn indefinite_is_detected() {
        let sys = LinearSystem::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        let cfg = SolverConfig { preconditioner: Preconditioner::None, ..Default::default() };
        let err = cg_solve(&sys, &[0.0, 1.0], &cfg).unwrap_err();
        assert!(matches!(err, SolveError::IndefiniteSystem { .. }));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let t: Vec<_> = (0..20)
            .flat_map(|i| {
                let mut v = vec![(i, i, 2.0 + i as f64)];
                if i + 1 < 20 {
                    v.push((i, i + 1, -1.0));
                    v.push((i + 1, i, -1.0));
                }
                v
            })
            .collect();
        let sys = LinearSystem::from_triplets(20, &t).unwrap();
        let cfg = SolverConfig { max_iter: Some(2), ..Default::default() };
        match cg_solve(&sys, &[1.0; 20], &cfg) {
            Err(SolveError::NonConvergence(r)) => assert_eq!(r.iterations, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_config_rejected() {
        assert!(SolverConfig::with_tol(0.0).validate().is_err());
        assert!(SolverConfig::with_tol(1.5).validate().is_err());
        assert_eq!(SolverConfig::default().iteration_cap(100), 1200);
    }
}
