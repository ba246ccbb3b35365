//! Sampled checks of the harmonic-measure estimates.
//!
//! Each check draws boundary balls `B(Q, r)` with a seeded generator, keeps
//! `4h ≤ r ≤ max(f·diam, 8h)` with `f = r_max_fraction`, and records both
//! sides of the estimate per sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dirichlet_measure_from_green, robin_measure_from_green, HarmonicMeasure};
use crate::discretize::{indicator_boundary_rhs, Field, Problem};
use crate::error::{precondition, Result};
use crate::fit::fit_line;
use crate::geometry::{distance, index_value, Point};
use crate::green::{dirichlet_green_cell, robin_green_cell, GreenField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureCheckConfig {
    pub samples: usize,
    pub seed: u64,
    /// acceptance factor for the two-sided estimates
    pub constant: f64,
    /// main pole `X₀`
    pub pole: Point,
    /// second pole for the change-of-pole check
    pub second_pole: Point,
    /// poles must avoid `B(Q, pole_exclusion·r)`
    pub pole_exclusion: f64,
    /// data sets of the boundary comparison avoid `B(Q, K̃ r)`
    pub comparison_far: f64,
    pub theta_min: f64,
    pub harnack_factor: f64,
    /// fraction of samples that must pass for the sampled two-sided checks
    pub min_pass_fraction: f64,
    /// sampled radii stay below `max(r_max_fraction·diam, 8h)`
    pub r_max_fraction: f64,
}

impl Default for MeasureCheckConfig {
    fn default() -> Self {
        MeasureCheckConfig {
            samples: 24,
            seed: 1,
            constant: 50.0,
            pole: [0.0; 3],
            second_pole: [1.5, -1.0, 0.0],
            pole_exclusion: 4.0,
            comparison_far: 4.0,
            theta_min: 0.3,
            harnack_factor: 4.0,
            min_pass_fraction: 0.95,
            r_max_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureSample {
    pub face: usize,
    pub q: Point,
    pub r: f64,
    /// pole cell (or evaluation cell for the boundary comparison)
    pub pole: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Upper-envelope power fit `y ≤ C t^θ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaFit {
    pub theta: f64,
    pub c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureCheckReport {
    pub check: String,
    pub a: f64,
    pub constant: f64,
    pub samples: Vec<MeasureSample>,
    /// sample draws discarded by a resolution or separation guard
    pub skipped: usize,
    /// worst achieved constant (meaning depends on the check)
    pub achieved: f64,
    pub pass_fraction: f64,
    pub required_fraction: f64,
    pub passed: bool,
    pub theta: Option<ThetaFit>,
}

impl MeasureCheckReport {
    fn new(
        check: &str,
        a: f64,
        constant: f64,
        samples: Vec<MeasureSample>,
        skipped: usize,
        achieved: f64,
        required_fraction: f64,
    ) -> Self {
        let passing = samples.iter().filter(|s| s.pass).count();
        let pass_fraction =
            if samples.is_empty() { 0.0 } else { passing as f64 / samples.len() as f64 };
        let passed = !samples.is_empty() && pass_fraction >= required_fraction;
        MeasureCheckReport {
            check: check.into(),
            a,
            constant,
            samples,
            skipped,
            achieved,
            pass_fraction,
            required_fraction,
            passed,
            theta: None,
        }
    }
}

fn two_sided(ratio: f64, c: f64) -> bool {
    ratio.is_finite() && ratio >= 1.0 / c && ratio <= c
}

fn worst_two_sided(samples: &[MeasureSample]) -> f64 {
    samples.iter().map(|s| s.ratio.max(1.0 / s.ratio)).fold(1.0, f64::max)
}

struct BallSample {
    face: usize,
    q: Point,
    r: f64,
}

/// Largest sampled radius: `r_max_fraction·diam`, but never below `8h`.
pub fn sample_radius_cap(problem: &Problem, cfg: &MeasureCheckConfig) -> f64 {
    (cfg.r_max_fraction * problem.domain.diam()).max(8.0 * problem.domain.h())
}

/// Draws `cfg.samples` boundary balls with `4h ≤ r ≤ sample_radius_cap`
/// whose center is at least `exclusion·r` away from every pole.
fn sample_balls(
    problem: &Problem,
    cfg: &MeasureCheckConfig,
    poles: &[Point],
    exclusion: f64,
) -> (Vec<BallSample>, usize) {
    let domain = &problem.domain;
    let faces = domain.faces();
    let r_min = 4.0 * domain.h();
    let count = cfg.samples;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(count);
    let mut skipped = 0;
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count.max(1) {
        attempts += 1;
        let face = rng.gen_range(0..faces.len());
        let q = faces[face].center;
        let mut r_max = sample_radius_cap(problem, cfg);
        for p in poles {
            r_max = r_max.min(distance(&q, p) / exclusion);
        }
        if r_max <= r_min {
            skipped += 1;
            continue;
        }
        let r = rng.gen_range(r_min.ln()..r_max.ln()).exp();
        out.push(BallSample { face, q, r });
    }
    (out, skipped)
}

fn ball_faces(problem: &Problem, q: &Point, r: f64) -> Vec<usize> {
    problem.domain.face_index().faces_in_ball(q, r)
}

fn robin_pole(problem: &Problem, a: f64, x: &Point) -> Result<(GreenField, HarmonicMeasure)> {
    let pole = problem.domain.locate(x)?;
    let green = robin_green_cell(problem, a, pole)?;
    let omega = robin_measure_from_green(problem, &green)?;
    Ok((green, omega))
}

/// `ω_R^{A_r(Q)}(B(Q,r)) ≥ M⁻¹ min{1, I_Q(r)}`.
pub fn bourgain_check(problem: &Problem, a: f64, cfg: &MeasureCheckConfig) -> Result<MeasureCheckReport> {
    let n = problem.dim();
    let (balls, skipped) = sample_balls(problem, cfg, &[], 1.0);
    let samples = balls
        .par_iter()
        .map(|b| {
            let cork = problem.domain.corkscrew_point(&b.q, b.r)?;
            let green = robin_green_cell(problem, a, cork.cell)?;
            let omega = robin_measure_from_green(problem, &green)?;
            let faces = ball_faces(problem, &b.q, b.r);
            let lhs = omega.of(&faces);
            let rhs = index_value(n, a, b.r, problem.sigma.of(&faces)).min(1.0);
            let ratio = lhs / rhs;
            Ok(MeasureSample {
                face: b.face,
                q: b.q,
                r: b.r,
                pole: cork.cell,
                lhs,
                rhs,
                ratio,
                pass: ratio.is_finite() && ratio >= 1.0 / cfg.constant,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let achieved = samples.iter().map(|s| 1.0 / s.ratio).fold(0.0, f64::max);
    Ok(MeasureCheckReport::new("bourgain", a, cfg.constant, samples, skipped, achieved, cfg.min_pass_fraction))
}

/// `ω_R^X(B(Q,r)) ≍ G_R(X, A_r(Q)) r^{n-2} min{1, I_Q(r)}` for `X ∉ B(Q, Cr)`.
pub fn greenhm_equiv_check(
    problem: &Problem,
    a: f64,
    cfg: &MeasureCheckConfig,
) -> Result<MeasureCheckReport> {
    let n = problem.dim();
    let (green, omega) = robin_pole(problem, a, &cfg.pole)?;
    let (balls, skipped) = sample_balls(problem, cfg, &[cfg.pole], cfg.pole_exclusion);
    let mut samples = Vec::with_capacity(balls.len());
    for b in &balls {
        let cork = problem.domain.corkscrew_point(&b.q, b.r)?;
        let faces = ball_faces(problem, &b.q, b.r);
        let lhs = omega.of(&faces);
        let index = index_value(n, a, b.r, problem.sigma.of(&faces));
        let rhs = green.at(cork.cell) * b.r.powi(n as i32 - 2) * index.min(1.0);
        let ratio = lhs / rhs;
        samples.push(MeasureSample {
            face: b.face,
            q: b.q,
            r: b.r,
            pole: green.pole,
            lhs,
            rhs,
            ratio,
            pass: two_sided(ratio, cfg.constant),
        });
    }
    let achieved = worst_two_sided(&samples);
    Ok(MeasureCheckReport::new("greenhm_equiv", a, cfg.constant, samples, skipped, achieved, cfg.min_pass_fraction))
}

/// `ω_R^X(B(Q,2r)) ≤ C_d ω_R^X(B(Q,r))`; `achieved` is the largest observed ratio.
pub fn doubling_check(problem: &Problem, a: f64, cfg: &MeasureCheckConfig) -> Result<MeasureCheckReport> {
    let (_, omega) = robin_pole(problem, a, &cfg.pole)?;
    let (balls, skipped) = sample_balls(problem, cfg, &[cfg.pole], cfg.pole_exclusion);
    let diam = problem.domain.diam();
    let samples: Vec<MeasureSample> = balls
        .iter()
        .map(|b| {
            let lhs = omega.of(&ball_faces(problem, &b.q, (2.0 * b.r).min(diam)));
            let rhs = omega.of(&ball_faces(problem, &b.q, b.r));
            let ratio = lhs / rhs;
            MeasureSample {
                face: b.face,
                q: b.q,
                r: b.r,
                pole: omega.pole,
                lhs,
                rhs,
                ratio,
                pass: ratio.is_finite() && ratio <= cfg.constant,
            }
        })
        .collect();
    let achieved = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(MeasureCheckReport::new("doubling", a, cfg.constant, samples, skipped, achieved, 1.0))
}

/// `max/min` of the achieved doubling constants over a set of reports.
pub fn doubling_spread(reports: &[MeasureCheckReport]) -> f64 {
    let hi = reports.iter().map(|r| r.achieved).fold(f64::NEG_INFINITY, f64::max);
    let lo = reports.iter().map(|r| r.achieved).fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Double ratio `[ω^X(E)/ω^X(B)] / [ω^Y(E)/ω^Y(B)]` with `E` half of `B = B(Q,r)`.
pub fn change_of_pole_check(
    problem: &Problem,
    a: f64,
    cfg: &MeasureCheckConfig,
) -> Result<MeasureCheckReport> {
    let (_, omega_x) = robin_pole(problem, a, &cfg.pole)?;
    let (_, omega_y) = robin_pole(problem, a, &cfg.second_pole)?;
    let poles = [cfg.pole, cfg.second_pole];
    let (balls, skipped) = sample_balls(problem, cfg, &poles, cfg.pole_exclusion);
    let samples: Vec<MeasureSample> = balls
        .iter()
        .map(|b| {
            let ball = ball_faces(problem, &b.q, b.r);
            let e = &ball[..ball.len().div_ceil(2)];
            let lhs = omega_x.of(e) / omega_x.of(&ball);
            let rhs = omega_y.of(e) / omega_y.of(&ball);
            let ratio = lhs / rhs;
            MeasureSample {
                face: b.face,
                q: b.q,
                r: b.r,
                pole: omega_x.pole,
                lhs,
                rhs,
                ratio,
                pass: two_sided(ratio, cfg.constant),
            }
        })
        .collect();
    let achieved = worst_two_sided(&samples);
    Ok(MeasureCheckReport::new("change_of_pole", a, cfg.constant, samples, skipped, achieved, 1.0))
}

fn robin_data_solution(problem: &Problem, a: f64, faces: &[usize]) -> Result<Field> {
    let system = problem.robin_system(a)?;
    let rhs = indicator_boundary_rhs(&problem.domain, &problem.sigma, faces, a);
    Ok(problem.solve(&system, &rhs)?.0)
}

/// Boundary comparison for the Robin harmonic measures `u = ω^·(E_u)`, `v = ω^·(E_v)`:
/// `u(X)/v(X) ≍ u(A)/v(A)` for cells `X ∈ B(Q, r)`, with `A = A_r(Q)`.
///
/// Both data sets must avoid `B(Q, K̃ r)`.
#[allow(clippy::too_many_arguments)]
pub fn boundary_comparison(
    problem: &Problem,
    a: f64,
    q: &Point,
    r: f64,
    set_u: &[usize],
    set_v: &[usize],
    cfg: &MeasureCheckConfig,
    max_points: usize,
) -> Result<Vec<MeasureSample>> {
    let faces = problem.domain.faces();
    let reach = cfg.comparison_far * r;
    if let Some(&f) = set_u.iter().chain(set_v).find(|&&f| distance(&faces[f].center, q) < reach) {
        return precondition(format!("data face {f} lies inside B(Q, K̃r) with K̃r = {reach}"));
    }
    if set_u.is_empty() || set_v.is_empty() {
        return precondition("boundary comparison needs two nonempty data sets");
    }
    let cork = problem.domain.corkscrew_point(q, r)?;
    let (u, v) = rayon::join(
        || robin_data_solution(problem, a, set_u),
        || robin_data_solution(problem, a, set_v),
    );
    let (u, v) = (u?, v?);
    let anchor = u.at(cork.cell) / v.at(cork.cell);
    let cells = problem.domain.cells_in_ball(q, r, false);
    let stride = cells.len().div_ceil(max_points.max(1)).max(1);
    let face = problem.domain.face_index().nearest(q).0;
    Ok(cells
        .iter()
        .step_by(stride)
        .map(|&x| {
            let lhs = u.at(x) / v.at(x);
            let ratio = lhs / anchor;
            MeasureSample { face, q: *q, r, pole: x, lhs, rhs: anchor, ratio, pass: two_sided(ratio, cfg.constant) }
        })
        .collect())
}

/// Sampled boundary comparison. The data sets split the faces outside
/// `B(Q, K̃r)` by proximity to two mutually distant far faces.
pub fn boundary_comparison_check(
    problem: &Problem,
    a: f64,
    cfg: &MeasureCheckConfig,
) -> Result<MeasureCheckReport> {
    let faces = problem.domain.faces();
    let (balls, mut skipped) = sample_balls(problem, cfg, &[], 1.0);
    let mut samples = Vec::new();
    for b in &balls {
        let far: Vec<usize> = (0..faces.len())
            .filter(|&f| distance(&faces[f].center, &b.q) >= cfg.comparison_far * b.r)
            .collect();
        let farthest = |from: &Point| {
            far.iter()
                .copied()
                .max_by(|&i, &j| {
                    distance(&faces[i].center, from)
                        .total_cmp(&distance(&faces[j].center, from))
                        .then(j.cmp(&i))
                })
        };
        let Some(p1) = farthest(&b.q) else {
            skipped += 1;
            continue;
        };
        let p2 = farthest(&faces[p1].center).unwrap();
        let (c1, c2) = (faces[p1].center, faces[p2].center);
        let (set_u, set_v): (Vec<usize>, Vec<usize>) = far
            .iter()
            .partition(|&&f| distance(&faces[f].center, &c1) <= distance(&faces[f].center, &c2));
        if set_u.is_empty() || set_v.is_empty() {
            skipped += 1;
            continue;
        }
        samples.extend(boundary_comparison(problem, a, &b.q, b.r, &set_u, &set_v, cfg, 16)?);
    }
    let achieved = worst_two_sided(&samples);
    Ok(MeasureCheckReport::new("boundary_comparison", a, cfg.constant, samples, skipped, achieved, 1.0))
}

/// `a G_R(X₀, P) ≍ ω_D^{X₀}(B(P, r_P)) / σ(B(P, r_P))` with `I_P(r_P) = 1`.
pub fn smoothing_check(problem: &Problem, a: f64, cfg: &MeasureCheckConfig) -> Result<MeasureCheckReport> {
    let domain = &problem.domain;
    let pole = domain.locate(&cfg.pole)?;
    let (robin, dirichlet) = rayon::join(
        || robin_green_cell(problem, a, pole),
        || dirichlet_green_cell(problem, pole),
    );
    let robin = robin?;
    let omega_d = dirichlet_measure_from_green(problem, &dirichlet?)?;
    let faces = domain.faces();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::new();
    let mut skipped = 0;
    for _ in 0..cfg.samples {
        let face = rng.gen_range(0..faces.len());
        let p = faces[face].center;
        let r_p = domain.critical_rho_at(&problem.sigma, a, &p)?;
        if r_p < 4.0 * domain.h() || distance(&p, &cfg.pole) < cfg.pole_exclusion * r_p {
            skipped += 1;
            continue;
        }
        let ball = ball_faces(problem, &p, r_p);
        let lhs = a * robin.at(faces[face].owner);
        let rhs = omega_d.of(&ball) / problem.sigma.of(&ball);
        let ratio = lhs / rhs;
        samples.push(MeasureSample { face, q: p, r: r_p, pole, lhs, rhs, ratio, pass: two_sided(ratio, cfg.constant) });
    }
    let achieved = worst_two_sided(&samples);
    Ok(MeasureCheckReport::new("smoothing", a, cfg.constant, samples, skipped, achieved, 1.0))
}

/// Fits `ω(E)/ω(B(P,s)) ≤ C (σ(E)/σ(B(P,s)))^θ` over nested `E ⊂ B(P,s) ⊂ B(Q,r)`.
///
/// `lhs` holds the ω-ratio and `rhs` the σ-ratio of each sample. θ is the
/// slope of a line through the per-bin maxima of the log-log cloud; `C` is
/// then the smallest constant making the bound hold at every sample.
pub fn ainfty_diagnostic(problem: &Problem, a: f64, cfg: &MeasureCheckConfig) -> Result<MeasureCheckReport> {
    let (_, omega) = robin_pole(problem, a, &cfg.pole)?;
    let (balls, mut skipped) = sample_balls(problem, cfg, &[cfg.pole], cfg.pole_exclusion);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa5a5);
    let faces = problem.domain.faces();
    let h = problem.domain.h();
    let mut samples = Vec::new();
    for b in &balls {
        let s = b.r / 2.0;
        let inner = ball_faces(problem, &b.q, s);
        let p_face = inner[rng.gen_range(0..inner.len())];
        let p = faces[p_face].center;
        let big = ball_faces(problem, &p, s);
        let near = ball_faces(problem, &p, s / 2.0);
        let e_center = faces[near[rng.gen_range(0..near.len())]].center;
        let s_e = (s / 2.0) * rng.gen_range((0.05f64).ln()..0.0).exp();
        if s_e < h {
            skipped += 1;
            continue;
        }
        let e = ball_faces(problem, &e_center, s_e);
        let t = problem.sigma.of(&e) / problem.sigma.of(&big);
        let y = omega.of(&e) / omega.of(&big);
        if !(t > 0.0 && y > 0.0) {
            skipped += 1;
            continue;
        }
        samples.push(MeasureSample { face: p_face, q: p, r: s, pole: omega.pole, lhs: y, rhs: t, ratio: y / t, pass: true });
    }
    let fit = theta_fit(&samples);
    let pass = fit.is_some_and(|f| f.theta >= cfg.theta_min);
    for s in &mut samples {
        s.pass = pass;
    }
    let achieved = fit.map_or(f64::NAN, |f| f.theta);
    let mut report = MeasureCheckReport::new("ainfty", a, cfg.constant, samples, skipped, achieved, 1.0);
    report.theta = fit;
    report.passed &= pass;
    Ok(report)
}

fn theta_fit(samples: &[MeasureSample]) -> Option<ThetaFit> {
    const BINS: usize = 8;
    let lt: Vec<f64> = samples.iter().map(|s| s.rhs.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|s| s.lhs.ln()).collect();
    let lo = lt.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 1e-9) {
        return None;
    }
    let mut env: Vec<Option<(f64, f64)>> = vec![None; BINS];
    for (&t, &y) in lt.iter().zip(&ly) {
        let k = (((t - lo) / (hi - lo)) * BINS as f64).floor().min(BINS as f64 - 1.0) as usize;
        if env[k].map_or(true, |(_, best)| y > best) {
            env[k] = Some((t, y));
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = env.into_iter().flatten().unzip();
    if xs.len() < 2 {
        return None;
    }
    let theta = fit_line(&xs, &ys).slope;
    let c = lt.iter().zip(&ly).map(|(t, y)| (y - theta * t).exp()).fold(0.0, f64::max);
    Some(ThetaFit { theta, c })
}

/// Poles `X`, `X′` with `|X − X′| ≤ δ(X)/4` give measures within `harnack_factor`.
pub fn harnack_stability_check(
    problem: &Problem,
    a: f64,
    cfg: &MeasureCheckConfig,
) -> Result<MeasureCheckReport> {
    let domain = &problem.domain;
    let x = domain.locate(&cfg.pole)?;
    let center = domain.cell_center(x);
    let reach = domain.boundary_distance(x) / 4.0;
    let x2 = domain
        .cells_in_ball(&center, reach, true)
        .into_iter()
        .max_by(|&i, &j| {
            distance(&domain.cell_center(i), &center)
                .total_cmp(&distance(&domain.cell_center(j), &center))
                .then(j.cmp(&i))
        })
        .unwrap_or(x);
    let (g1, g2) = rayon::join(|| robin_green_cell(problem, a, x), || robin_green_cell(problem, a, x2));
    let w1 = robin_measure_from_green(problem, &g1?)?;
    let w2 = robin_measure_from_green(problem, &g2?)?;
    let (balls, skipped) = sample_balls(problem, cfg, &[cfg.pole], 1.0);
    let samples: Vec<MeasureSample> = balls
        .iter()
        .map(|b| {
            let e = ball_faces(problem, &b.q, b.r);
            let (lhs, rhs) = (w1.of(&e), w2.of(&e));
            let ratio = lhs / rhs;
            MeasureSample { face: b.face, q: b.q, r: b.r, pole: x2, lhs, rhs, ratio, pass: two_sided(ratio, cfg.harnack_factor) }
        })
        .collect();
    let achieved = worst_two_sided(&samples);
    Ok(MeasureCheckReport::new("harnack", a, cfg.harnack_factor, samples, skipped, achieved, 1.0))
}
