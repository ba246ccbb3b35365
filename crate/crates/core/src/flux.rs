//! The lung model: `u_a` harmonic in `Ω ∖ B(0,1)`, `u_a = 1` on `B(0,1)`,
//! Robin condition with parameter `a` on `∂Ω`, and its total flow
//! `F(a) = a ∫ u_a dσ`.

use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{lung_constraint, Field, LinearSystem, Pins, Problem};
use crate::error::{precondition, Error, Result};
use crate::fit::{fit_loglog, LinearFit};
use crate::geometry::index_value;
use crate::measure::{build_cover, dirichlet_measure_from_green, makarov_entropy};
use crate::solve::SolveReport;

#[derive(Clone, Debug)]
pub struct LungSolution {
    /// `None` for the Dirichlet limit `u_∞`
    pub a: Option<f64>,
    pub field: Field,
    /// `a Σ σ_f u(owner f)`, or the energy for `u_∞`
    pub flux: f64,
    /// `uᵀLu + a uᵀMu`
    pub energy: f64,
    /// flux out of the pinned unit ball
    pub ring_flux: f64,
    pub report: SolveReport,
}

fn ring_flux(system: &LinearSystem, u: &Field, pins: &Pins) -> f64 {
    let mut au = vec![0.0; u.values().len()];
    system.apply_full(u.values(), &mut au);
    pins.keys().map(|&c| au[c]).sum()
}

/// Solves the lung problem with Robin parameter `a ≥ 0`.
pub fn solve_lung(problem: &Problem, a: f64) -> Result<LungSolution> {
    let pins = lung_constraint(&problem.domain)?;
    solve_lung_with(problem, a, &pins)
}

fn solve_lung_with(problem: &Problem, a: f64, pins: &Pins) -> Result<LungSolution> {
    let n = problem.domain.num_cells();
    if a == 0.0 {
        return Ok(LungSolution {
            a: Some(0.0),
            field: Field::constant(n, 1.0),
            flux: 0.0,
            energy: 0.0,
            ring_flux: 0.0,
            report: SolveReport::default(),
        });
    }
    let system = problem.robin_system_pinned(a, pins.clone())?;
    let (field, report) = problem.solve(&system, &vec![0.0; n])?;
    Ok(lung_from_field(problem, &system, a, field, report, pins))
}

fn lung_from_field(
    problem: &Problem,
    system: &LinearSystem,
    a: f64,
    field: Field,
    report: SolveReport,
    pins: &Pins,
) -> LungSolution {
    let flux = a * field.boundary_integral(&problem.domain, &problem.sigma);
    let energy = system.bilinear(field.values(), field.values());
    let ring = ring_flux(system, &field, pins);
    LungSolution { a: Some(a), field, flux, energy, ring_flux: ring, report }
}

/// Dirichlet limit `u_∞`: boundary cells pinned to 0, unit ball to 1.
///
/// `flux` is the energy `∫|∇u_∞|²`; `ring_flux` is the flux through the pinned ring.
pub fn dirichlet_lung(problem: &Problem) -> Result<LungSolution> {
    let pins = lung_constraint(&problem.domain)?;
    let system = problem.dirichlet_system(pins.clone())?;
    let (field, report) = problem.solve(&system, &vec![0.0; problem.domain.num_cells()])?;
    let energy = system.bilinear(field.values(), field.values());
    let ring = ring_flux(&system, &field, &pins);
    Ok(LungSolution { a: None, field, flux: energy, energy, ring_flux: ring, report })
}

/// `F(∞)` together with the ring-flux cross-check.
pub fn dirichlet_flux(problem: &Problem) -> Result<(f64, f64)> {
    let u = dirichlet_lung(problem)?;
    Ok((u.flux, u.ring_flux))
}

/// `|F(a) − J_a(u_a)| / F(a)`; zero when both vanish.
pub fn energy_identity_check(solution: &LungSolution) -> f64 {
    let gap = (solution.flux - solution.energy).abs();
    if solution.flux == 0.0 {
        gap
    } else {
        gap / solution.flux.abs()
    }
}

/// Discrete normal flux of `u_∞` into each boundary face.
///
/// The flux into a pinned boundary cell is `h^{n-2} Σ u_∞(j)` over its
/// neighbours, split over the cell's faces in proportion to σ.
pub fn dirichlet_face_flux(problem: &Problem, u_inf: &LungSolution) -> Vec<f64> {
    let domain = &problem.domain;
    let sigma = problem.sigma.weights();
    let c = problem.stiffness.coupling();
    let mut out = vec![0.0; domain.faces().len()];
    for cell in 0..domain.num_cells() {
        let faces = domain.cell_faces(cell);
        if faces.is_empty() {
            continue;
        }
        let k: f64 = problem.stiffness.neighbors_of(cell).map(|j| c * u_inf.field.at(j)).sum();
        let owned: f64 = faces.clone().map(|f| sigma[f]).sum();
        let count = faces.len() as f64;
        for f in faces {
            out[f] = if owned > 0.0 { k * sigma[f] / owned } else { k / count };
        }
    }
    out
}

/// Closed-form `F(a)` for the lung `B(0,1)` inside `B(0,R)`; `None` gives `F(∞)`.
pub fn ball_oracle_flux(n: usize, radius: f64, a: Option<f64>) -> Result<f64> {
    if n < 3 {
        return precondition(format!("closed form needs n ≥ 3 (got {n})"));
    }
    if !(radius > 1.0) {
        return precondition(format!("outer radius {radius} must exceed the lung radius 1"));
    }
    let p = n as i32 - 2;
    let mut denom = 1.0 - radius.powi(-p);
    if let Some(a) = a {
        if !(a > 0.0) {
            return precondition(format!("Robin parameter {a} must be positive"));
        }
        denom += p as f64 / (a * radius.powi(p + 1));
    }
    Ok(p as f64 * crate::green::unit_sphere_area(n) / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluxDifference {
    /// `F(∞) − F(a)` from the two solves
    pub direct: f64,
    /// pairing of the trace of `u_a` with the normal flux of `u_∞`
    pub paired: f64,
    pub relative_gap: f64,
}

pub fn flux_difference_from(
    problem: &Problem,
    u_inf: &LungSolution,
    u_a: &LungSolution,
    face_flux: &[f64],
) -> FluxDifference {
    let paired: f64 = problem
        .domain
        .faces()
        .iter()
        .zip(face_flux)
        .map(|(f, k)| u_a.field.at(f.owner) * k)
        .sum();
    let direct = u_inf.flux - u_a.flux;
    FluxDifference { direct, paired, relative_gap: (paired - direct).abs() / direct.abs() }
}

pub fn flux_difference(problem: &Problem, a: f64) -> Result<FluxDifference> {
    if !(a > 0.0) {
        return precondition(format!("Robin parameter {a} must be positive"));
    }
    let (u_inf, u_a) = rayon::join(|| dirichlet_lung(problem), || solve_lung(problem, a));
    let u_inf = u_inf?;
    let flux = dirichlet_face_flux(problem, &u_inf);
    Ok(flux_difference_from(problem, &u_inf, &u_a?, &flux))
}

#[derive(Clone, Debug)]
pub struct FluxDerivative {
    pub a: f64,
    /// `F′(a) = ∫u_a dσ + a ∫w_a dσ`
    pub value: f64,
    /// `max w_a`; nonpositive by the maximum principle
    pub w_max: f64,
    pub solution: LungSolution,
}

/// Exact derivative of the discrete `F` via the companion field `w_a = ∂_a u_a`.
pub fn flux_derivative(problem: &Problem, a: f64) -> Result<FluxDerivative> {
    if !(a > 0.0) {
        return precondition(format!("Robin parameter {a} must be positive"));
    }
    let pins = lung_constraint(&problem.domain)?;
    let u = solve_lung_with(problem, a, &pins)?;
    let zero_pins: Pins = pins.keys().map(|&c| (c, 0.0)).collect();
    let system = problem.robin_system_pinned(a, zero_pins)?;
    let rhs: Vec<f64> = problem.mass.apply(u.field.values()).into_iter().map(|v| -v).collect();
    let (w, _) = problem.solve(&system, &rhs)?;
    let int_u = u.field.boundary_integral(&problem.domain, &problem.sigma);
    let int_w = w.boundary_integral(&problem.domain, &problem.sigma);
    Ok(FluxDerivative { a, value: int_u + a * int_w, w_max: w.max(), solution: u })
}

#[derive(Clone, Debug, Serialize)]
pub struct LungOrderReport {
    pub a_list: Vec<f64>,
    pub violations: usize,
    pub cells_checked: usize,
    /// `min (u_a − u_b)` over consecutive pairs and `min (u_b − u_∞)` last
    pub margins: Vec<f64>,
}

/// Pointwise `u_∞ ≤ u_b ≤ u_a ≤ 1` for ascending `a_list`.
pub fn lung_order_check(problem: &Problem, a_list: &[f64]) -> Result<LungOrderReport> {
    if a_list.windows(2).any(|w| !(w[0] < w[1])) || a_list.is_empty() {
        return precondition(format!("Robin parameters must be strictly increasing: {a_list:?}"));
    }
    let pins = lung_constraint(&problem.domain)?;
    let mut fields = a_list
        .par_iter()
        .map(|&a| solve_lung_with(problem, a, &pins).map(|s| s.field))
        .collect::<Result<Vec<_>>>()?;
    fields.push(dirichlet_lung(problem)?.field);
    let n = problem.domain.num_cells();
    let mut violations = 0;
    let mut margins = Vec::new();
    for u in &fields {
        violations += u.values().iter().filter(|&&v| v > 1.0).count();
    }
    for w in fields.windows(2) {
        let mut margin = f64::INFINITY;
        for c in 0..n {
            let d = w[0].at(c) - w[1].at(c);
            if !pins.contains_key(&c) {
                margin = margin.min(d);
            }
            if d < 0.0 {
                violations += 1;
            }
        }
        margins.push(margin);
    }
    Ok(LungOrderReport { a_list: a_list.to_vec(), violations, cells_checked: n, margins })
}

/// Regime of a Robin parameter relative to `σ(∂Ω)`, `ℓ` and `diam`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxRegime {
    /// `a σ(∂Ω) ≤ 1`
    Neumann,
    /// `1/a ≤ ℓ/4`
    Dahlberg,
    /// `Cℓ ≤ 1/a ≤ diam^{2-n} σ(∂Ω)`
    Intermediate,
    Plateau,
}

impl FluxRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            FluxRegime::Neumann => "neumann",
            FluxRegime::Dahlberg => "dahlberg",
            FluxRegime::Intermediate => "intermediate",
            FluxRegime::Plateau => "plateau",
        }
    }
}

/// Constants that place the regime boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeBounds {
    /// Dahlberg regime: `1/a ≤ ℓ / dahlberg_factor`
    pub dahlberg_factor: f64,
    /// intermediate regime: `1/a ≥ intermediate_factor · ℓ`
    pub intermediate_factor: f64,
}

impl Default for RegimeBounds {
    fn default() -> Self {
        RegimeBounds { dahlberg_factor: 4.0, intermediate_factor: 4.0 }
    }
}

impl RegimeBounds {
    pub fn classify(&self, a: f64, sigma_total: f64, ell: f64, diam: f64, dim: usize) -> FluxRegime {
        if a * sigma_total <= 1.0 {
            FluxRegime::Neumann
        } else if 1.0 / a <= ell / self.dahlberg_factor {
            FluxRegime::Dahlberg
        } else if self.intermediate_range(sigma_total, ell, diam, dim).is_some_and(|(lo, hi)| a >= lo && a <= hi) {
            FluxRegime::Intermediate
        } else {
            FluxRegime::Plateau
        }
    }

    /// `[a_lo, a_hi]` with `Cℓ ≤ 1/a ≤ diam^{2-n} σ`, or `None` when empty.
    pub fn intermediate_range(&self, sigma_total: f64, ell: f64, diam: f64, dim: usize) -> Option<(f64, f64)> {
        let lo = diam.powi(dim as i32 - 2) / sigma_total;
        let hi = 1.0 / (self.intermediate_factor * ell);
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxPoint {
    pub a: f64,
    pub f: f64,
    pub f_inf_minus_f: f64,
    pub j: f64,
    pub regime: FluxRegime,
    /// `F(∞) − F(a)` from the pairing with the normal flux of `u_∞`
    pub paired_difference: f64,
    pub ring_flux: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FluxCurve {
    pub points: Vec<FluxPoint>,
    pub f_infinity: f64,
    pub f_infinity_ring: f64,
    pub sigma_total: f64,
    pub ell: f64,
    pub diam: f64,
    pub dim: usize,
    pub bounds: RegimeBounds,
}

impl FluxCurve {
    /// Consecutive pairs with `F(a_{k+1}) ≤ F(a_k)`.
    pub fn monotonicity_violations(&self) -> usize {
        self.points.windows(2).filter(|w| !(w[1].f > w[0].f)).count()
    }

    /// Points with `F(a) ≥ F(∞)`.
    pub fn bound_violations(&self) -> usize {
        self.points.iter().filter(|p| !(p.f < self.f_infinity)).count()
    }
}

/// Cached lung fields keyed by domain content hash and `a`.
#[derive(Clone, Debug)]
pub struct FieldCache {
    pub dir: PathBuf,
    pub domain_hash: String,
}

impl FieldCache {
    fn path(&self, a: f64) -> PathBuf {
        self.dir.join(&self.domain_hash).join(format!("{:016x}.f64", a.to_bits()))
    }

    pub fn get(&self, a: f64, len: usize) -> Option<Field> {
        let bytes = fs::read(self.path(a)).ok()?;
        if bytes.len() != 8 * len {
            return None;
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Some(Field::new(values))
    }

    pub fn put(&self, a: f64, field: &Field) -> Result<()> {
        let path = self.path(a);
        fs::create_dir_all(path.parent().unwrap())?;
        let bytes: Vec<u8> = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes)?;
        Ok(())
    }
}

/// Solves the lung problem on every grid point and the Dirichlet limit.
pub fn flux_curve(
    problem: &Problem,
    a_grid: &[f64],
    bounds: RegimeBounds,
    cache: Option<&FieldCache>,
) -> Result<FluxCurve> {
    if a_grid.is_empty() || a_grid.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return precondition("flux curve needs positive, finite Robin parameters");
    }
    if a_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return precondition("Robin parameters must be strictly increasing");
    }
    let pins = lung_constraint(&problem.domain)?;
    let u_inf = dirichlet_lung(problem)?;
    let face_flux = dirichlet_face_flux(problem, &u_inf);
    let domain = &problem.domain;
    let (sigma_total, ell, diam, dim) = (problem.sigma_total(), domain.ell(), domain.diam(), domain.dim());
    let points = a_grid
        .par_iter()
        .map(|&a| {
            let system = problem.robin_system_pinned(a, pins.clone())?;
            let cached = cache.and_then(|c| c.get(a, domain.num_cells()));
            let (field, report) = match cached {
                Some(f) => (f, SolveReport::default()),
                None => {
                    let (f, r) = problem.solve(&system, &vec![0.0; domain.num_cells()])?;
                    if let Some(c) = cache {
                        c.put(a, &f)?;
                    }
                    (f, r)
                }
            };
            let sol = lung_from_field(problem, &system, a, field, report, &pins);
            let diff = flux_difference_from(problem, &u_inf, &sol, &face_flux);
            Ok(FluxPoint {
                a,
                f: sol.flux,
                f_inf_minus_f: diff.direct,
                j: sol.energy,
                regime: bounds.classify(a, sigma_total, ell, diam, dim),
                paired_difference: diff.paired,
                ring_flux: sol.ring_flux,
                iterations: sol.report.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FluxCurve {
        points,
        f_infinity: u_inf.flux,
        f_infinity_ring: u_inf.ring_flux,
        sigma_total,
        ell,
        diam,
        dim,
        bounds,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseReport {
    /// log-log slope of `F` on `a ≤ 1/σ(∂Ω)`
    pub neumann_slope: LinearFit,
    /// `min F(a)/F(∞)` over `a ≥ 1/σ(∂Ω)`
    pub plateau_ratio: f64,
    /// `max F(a) / (a σ(∂Ω))` and `min` over `a ≤ 1/σ(∂Ω)`
    pub neumann_constant_range: (f64, f64),
    /// log-log slope of `F(∞) − F` on `1/a ≤ ℓ/4`
    pub dahlberg_slope: LinearFit,
    /// nominal boundary `a = 1/σ(∂Ω)`
    pub neumann_boundary: f64,
    /// nominal boundary `a = 4/ℓ`
    pub dahlberg_boundary: f64,
    /// where the Neumann fit meets the level `F(∞)`
    pub fitted_neumann_breakpoint: f64,
    /// smallest grid `a` from which every local slope of `F(∞) − F` is within 0.25 of −1
    pub fitted_dahlberg_breakpoint: Option<f64>,
    pub f_infinity: f64,
}

pub fn phase_transition_report(curve: &FluxCurve) -> Result<PhaseReport> {
    if curve.points.len() < 5 {
        return Err(Error::InsufficientSpan(format!(
            "{} points; at least 5 are needed",
            curve.points.len()
        )));
    }
    let neumann_boundary = 1.0 / curve.sigma_total;
    let dahlberg_boundary = curve.bounds.dahlberg_factor / curve.ell;
    let neumann: Vec<&FluxPoint> = curve.points.iter().filter(|p| p.a <= neumann_boundary).collect();
    let plateau: Vec<&FluxPoint> = curve.points.iter().filter(|p| p.a >= neumann_boundary).collect();
    let dahlberg: Vec<&FluxPoint> = curve.points.iter().filter(|p| p.a >= dahlberg_boundary).collect();
    for (name, set) in [("Neumann", &neumann), ("plateau", &plateau), ("Dahlberg", &dahlberg)] {
        if set.len() < 2 {
            return Err(Error::InsufficientSpan(format!(
                "{} points in the {name} range; at least 2 are needed",
                set.len()
            )));
        }
    }
    let xs = |set: &[&FluxPoint]| set.iter().map(|p| p.a).collect::<Vec<_>>();
    let neumann_slope = fit_loglog(&xs(&neumann), &neumann.iter().map(|p| p.f).collect::<Vec<_>>());
    let dahlberg_slope =
        fit_loglog(&xs(&dahlberg), &dahlberg.iter().map(|p| p.f_inf_minus_f).collect::<Vec<_>>());
    let plateau_ratio = plateau.iter().map(|p| p.f / curve.f_infinity).fold(f64::INFINITY, f64::min);
    let consts: Vec<f64> = neumann.iter().map(|p| p.f / (p.a * curve.sigma_total)).collect();
    let neumann_constant_range = (
        consts.iter().copied().fold(f64::INFINITY, f64::min),
        consts.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    let fitted_neumann_breakpoint =
        ((curve.f_infinity.ln() - neumann_slope.intercept) / neumann_slope.slope).exp();
    let local: Vec<f64> = curve
        .points
        .windows(2)
        .map(|w| (w[1].f_inf_minus_f / w[0].f_inf_minus_f).ln() / (w[1].a / w[0].a).ln())
        .collect();
    let fitted_dahlberg_breakpoint = (0..local.len())
        .find(|&k| local[k..].iter().all(|s| (s + 1.0).abs() <= 0.25))
        .map(|k| curve.points[k].a);
    Ok(PhaseReport {
        neumann_slope,
        plateau_ratio,
        neumann_constant_range,
        dahlberg_slope,
        neumann_boundary,
        dahlberg_boundary,
        fitted_neumann_breakpoint,
        fitted_dahlberg_breakpoint,
        f_infinity: curve.f_infinity,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EntropyConfig {
    /// boundary points sampled for the median critical scale
    pub scale_samples: usize,
    pub seed: u64,
    /// allowed `max/min` spread of the ratios
    pub band: f64,
    pub pole: crate::geometry::Point,
    pub bounds: RegimeBounds,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig { scale_samples: 32, seed: 7, band: 100.0, pole: [0.0; 3], bounds: RegimeBounds::default() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyPoint {
    pub a: f64,
    pub r_a: f64,
    /// cover radius, `max(r_a, 4h)`
    pub cover_radius: f64,
    pub cover_size: usize,
    pub overlap: usize,
    pub entropy: f64,
    pub f_inf_minus_f: f64,
    pub ratio: f64,
    /// fraction of sampled `Q` with `I_Q(r_a) ∈ [1/4, 4]`
    pub homogeneous_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub points: Vec<EntropyPoint>,
    pub intermediate_range: (f64, f64),
    pub band_ratio: f64,
    pub passed: bool,
}

/// Compares `F(∞) − F(a)` with `r_a^{2-n} S(ω_D, r_a)` across the intermediate range.
pub fn entropy_comparison(problem: &Problem, a_grid: &[f64], cfg: &EntropyConfig) -> Result<EntropyReport> {
    let domain = &problem.domain;
    let n = domain.dim();
    let range = cfg
        .bounds
        .intermediate_range(problem.sigma_total(), domain.ell(), domain.diam(), n)
        .ok_or_else(|| {
            Error::EmptyIntermediateRange(format!(
                "ℓ = {} is too coarse for σ(∂Ω) = {} and diam = {}",
                domain.ell(),
                problem.sigma_total(),
                domain.diam()
            ))
        })?;
    if let Some(a) = a_grid.iter().find(|&&a| a < range.0 * (1.0 - 1e-12) || a > range.1 * (1.0 + 1e-12)) {
        return precondition(format!("a = {a} lies outside the intermediate range {range:?}"));
    }
    let pole = domain.locate(&cfg.pole)?;
    let (u_inf, omega_d) = rayon::join(
        || dirichlet_lung(problem),
        || {
            crate::green::dirichlet_green_cell(problem, pole)
                .and_then(|g| dirichlet_measure_from_green(problem, &g))
        },
    );
    let (u_inf, omega_d) = (u_inf?, omega_d?);
    let faces = domain.faces();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let qs: Vec<usize> = (0..cfg.scale_samples).map(|_| rng.gen_range(0..faces.len())).collect();
    let points = a_grid
        .par_iter()
        .map(|&a| {
            let mut rhos = qs
                .iter()
                .map(|&f| domain.critical_rho_at(&problem.sigma, a, &faces[f].center))
                .collect::<Result<Vec<_>>>()?;
            rhos.sort_by(f64::total_cmp);
            let r_a = rhos[rhos.len() / 2];
            let homogeneous = qs
                .iter()
                .filter(|&&f| {
                    let s = problem.sigma.ball(domain, &faces[f].center, r_a);
                    let i = index_value(n, a, r_a, s);
                    (0.25..=4.0).contains(&i)
                })
                .count();
            let cover_radius = r_a.max(4.0 * domain.h());
            let cover = build_cover(domain, cover_radius, cfg.seed)?;
            let entropy = makarov_entropy(domain, &omega_d, &cover);
            let u_a = solve_lung(problem, a)?;
            let diff = u_inf.flux - u_a.flux;
            Ok(EntropyPoint {
                a,
                r_a,
                cover_radius,
                cover_size: cover.len(),
                overlap: cover.overlap,
                entropy,
                f_inf_minus_f: diff,
                ratio: diff / (r_a.powi(2 - n as i32) * entropy),
                homogeneous_fraction: homogeneous as f64 / qs.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hi = points.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let band_ratio = hi / lo;
    Ok(EntropyReport {
        passed: !points.is_empty() && band_ratio.is_finite() && band_ratio <= cfg.band,
        points,
        intermediate_range: range,
        band_ratio,
    })
}
