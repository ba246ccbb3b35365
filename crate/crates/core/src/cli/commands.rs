use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{AGrid, MeasureCheck, RunConfig};
use super::manifest::{domain_hash, ArtifactWriter, RunManifest};
use crate::discretize::Problem;
use crate::error::{Error, Result};
use crate::fit::log_space;
use crate::flux::{
    ball_oracle_flux, entropy_comparison, flux_curve, flux_derivative, lung_order_check,
    phase_transition_report, solve_lung, FieldCache,
};
use crate::geometry::{save_domain, BoundaryMeasure, DomainKind, MixedDimensionReport};
use crate::green::{
    ball_oracle_green, check_dirichlet_regime, check_neumann_regime, monotonicity_check, robin_green,
    Regime,
};
use crate::measure::{
    ainfty_diagnostic, boundary_comparison_check, bourgain_check, change_of_pole_check,
    dirichlet_harmonic_measure_full, doubling_check, doubling_spread, greenhm_equiv_check,
    harnack_stability_check, robin_harmonic_measure, smoothing_check, MeasureCheckReport,
};
use crate::output::{
    flux_curve_svg, write_entropy_csv, write_flux_curve_csv, write_measure_csv, write_regime_pairs_csv,
};

/// Deliberate corruption used to exercise failure paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// scales the Robin harmonic measure by `1 + 10⁻³`
    Mass,
}

pub struct RunContext {
    /// resolved configuration, with command-line overrides applied
    pub config: RunConfig,
    /// directory relative to which `file` domains are resolved
    pub config_dir: PathBuf,
    pub out: PathBuf,
    pub force_regime: Option<Regime>,
    pub fault: Option<Fault>,
    pub resume: bool,
}

fn problem(ctx: &RunContext, manifest: &mut RunManifest) -> Result<Problem> {
    let domain = manifest.timed("build_domain", || ctx.config.domain.build(&ctx.config_dir))?;
    manifest.domain_sha256 = Some(domain_hash(&domain)?);
    Ok(Problem::new(domain, ctx.config.solver))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct GeometrySummary {
    kind: &'static str,
    dim: usize,
    h: f64,
    cells: usize,
    faces: usize,
    sigma_total: f64,
    diam: f64,
    ell: f64,
    mixed_dimension: MixedDimensionReport,
}

pub fn gen_domain(ctx: &RunContext) -> Result<bool> {
    let mut manifest = RunManifest::new("gen-domain", ctx.config.clone());
    let domain = manifest.timed("build_domain", || ctx.config.domain.build(&ctx.config_dir))?;
    manifest.domain_sha256 = Some(domain_hash(&domain)?);
    let mut out = ArtifactWriter::new(&ctx.out)?;
    let (header, mask) = save_domain(&domain, out.root(), "domain")?;
    out.adopt(&header)?;
    out.adopt(&mask)?;
    let sigma = BoundaryMeasure::surface(&domain);
    let samples = ctx.config.geometry.samples;
    let mixed = manifest
        .timed("mixed_dimension", || domain.verify_mixed_dimension(&sigma, samples, ctx.config.seed))?;
    let n = domain.dim();
    manifest.check(
        "mixed_dimension",
        mixed.dimension_in_range(n),
        format!("fitted d = {:.3}, expected in ({}, {n})", mixed.fitted_d, n - 2),
    );
    let summary = GeometrySummary {
        kind: domain.metadata().kind_name(),
        dim: n,
        h: domain.h(),
        cells: domain.num_cells(),
        faces: domain.faces().len(),
        sigma_total: sigma.total(),
        diam: domain.diam(),
        ell: domain.ell(),
        mixed_dimension: mixed,
    };
    out.write_json("geometry.json", &summary)?;
    manifest.report("geometry", &summary)?;
    let passed = manifest.passed;
    out.finish(manifest)?;
    Ok(passed)
}

pub fn green_checks(ctx: &RunContext) -> Result<bool> {
    let cfg = &ctx.config;
    let g = &cfg.green;
    let mut manifest = RunManifest::new("green-checks", cfg.clone());
    let problem = problem(ctx, &mut manifest)?;
    let n = problem.dim();
    let mut certificates = Vec::new();

    if let (true, DomainKind::Ball { radius }) = (g.oracle && n >= 3, &problem.domain.metadata().kind) {
        let green = manifest.timed("oracle_solve", || robin_green(&problem, g.a, &[0.0; 3]))?;
        certificates.extend(green.flux_certificate);
        let mut rows = Vec::new();
        for &r in &g.oracle_radii {
            let numeric = green.value_at(&problem, &[r, 0.0, 0.0])?;
            let oracle = ball_oracle_green(n, *radius, Some(g.a), r)?;
            let rel = (numeric - oracle).abs() / oracle;
            manifest.check(
                format!("oracle |X|={r}"),
                rel <= g.oracle_tolerance,
                format!("numeric {numeric:.6e}, closed form {oracle:.6e}, relative error {rel:.3e}"),
            );
            rows.push(serde_json::json!({"x": r, "numeric": numeric, "oracle": oracle, "relative_error": rel}));
        }
        manifest.report("oracle", &rows)?;
    }

    let mono = manifest.timed("monotonicity", || monotonicity_check(&problem, &g.pole, &g.monotonicity_a))?;
    certificates.extend(&mono.flux_certificates);
    manifest.check(
        "monotonicity",
        mono.passed(),
        format!("{} violations over {} cells", mono.violations.len(), mono.cells_checked),
    );
    manifest.report("monotonicity", &mono)?;

    let worst = certificates.iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max);
    manifest.check(
        "flux_certificate",
        !certificates.is_empty() && worst <= g.flux_tolerance,
        format!("max |a Σσ G − 1| = {worst:.3e} over {} solves", certificates.len()),
    );

    let mut out = ArtifactWriter::new(&ctx.out)?;
    let natural = Regime::classify(&problem, g.a);
    let regime = ctx.force_regime.unwrap_or(natural);
    let result = manifest.timed("regime_check", || match regime {
        Regime::Neumann => check_neumann_regime(&problem, g.a, &g.pole, g.samples, g.regime_constant, cfg.seed),
        Regime::Dirichlet => check_dirichlet_regime(&problem, g.a, g.samples, g.regime_constant, cfg.seed),
    });
    match result {
        Ok(report) => {
            out.write("regime_pairs.csv", &csv_bytes(|b| write_regime_pairs_csv(b, &report))?)?;
            manifest.check(
                format!("{regime:?} regime").to_lowercase(),
                report.passed,
                format!("ratios in [{:.3}, {:.3}], constant {}", report.min_ratio, report.max_ratio, report.constant),
            );
            manifest.report("regime", &report)?;
        }
        Err(Error::WrongRegime(msg)) => manifest.check("regime", false, format!("wrong regime: {msg}")),
        Err(e) => return Err(e),
    }
    out.write_json("green.json", &manifest.reports)?;
    let passed = manifest.passed;
    out.finish(manifest)?;
    Ok(passed)
}

fn run_measure_check(problem: &Problem, kind: MeasureCheck, a: f64, ctx: &RunContext) -> Result<MeasureCheckReport> {
    let p = &ctx.config.measure.params;
    match kind {
        MeasureCheck::Bourgain => bourgain_check(problem, a, p),
        MeasureCheck::GreenMeasure => greenhm_equiv_check(problem, a, p),
        MeasureCheck::Doubling => doubling_check(problem, a, p),
        MeasureCheck::ChangeOfPole => change_of_pole_check(problem, a, p),
        MeasureCheck::BoundaryComparison => boundary_comparison_check(problem, a, p),
        MeasureCheck::Smoothing => smoothing_check(problem, a, p),
        MeasureCheck::Ainfty => ainfty_diagnostic(problem, a, p),
        MeasureCheck::Harnack => harnack_stability_check(problem, a, p),
    }
}

pub fn hm_checks(ctx: &RunContext) -> Result<bool> {
    let m = &ctx.config.measure;
    let mut manifest = RunManifest::new("hm-checks", ctx.config.clone());
    let problem = problem(ctx, &mut manifest)?;
    let sigma_total = problem.sigma_total();
    let mut reports: Vec<MeasureCheckReport> = Vec::new();
    let mut masses = Vec::new();
    for &rel in &m.a_relative {
        let a = rel / sigma_total;
        let mut omega = robin_harmonic_measure(&problem, a, &m.params.pole)?;
        if ctx.fault == Some(Fault::Mass) {
            omega = omega.perturbed(1.0 + 1e-3);
        }
        let err = (omega.mass() - 1.0).abs();
        manifest.check(format!("robin_mass a={a:.4e}"), err <= m.mass_tolerance, format!("|ω(∂Ω) − 1| = {err:.3e}"));
        masses.push(serde_json::json!({"kind": "robin", "a": a, "mass": omega.mass()}));
        for &kind in &m.enabled {
            let name = serde_json::to_value(kind)?.as_str().unwrap_or_default().to_string();
            let report = manifest.timed(&format!("{name} a={a:.4e}"), || run_measure_check(&problem, kind, a, ctx))?;
            let unfit = kind == MeasureCheck::Ainfty && report.theta.is_none();
            if report.samples.is_empty() || unfit {
                manifest.skip(
                    format!("{} a={a:.4e}", report.check),
                    format!("too few admissible samples ({} kept, {} rejected)", report.samples.len(), report.skipped),
                );
                reports.push(report);
                continue;
            }
            manifest.check(
                format!("{} a={a:.4e}", report.check),
                report.passed,
                format!(
                    "achieved {:.4}, pass fraction {:.3} (required {:.2}), {} samples, {} skipped",
                    report.achieved,
                    report.pass_fraction,
                    report.required_fraction,
                    report.samples.len(),
                    report.skipped
                ),
            );
            reports.push(report);
        }
    }
    let omega_d = manifest.timed("dirichlet_measure", || dirichlet_harmonic_measure_full(&problem, &m.params.pole))?;
    let err = (omega_d.mass() - 1.0).abs();
    manifest.check("dirichlet_mass", err <= m.mass_tolerance, format!("|ω_D(∂Ω) − 1| = {err:.3e}"));
    masses.push(serde_json::json!({"kind": "dirichlet", "mass": omega_d.mass()}));
    manifest.report("masses", &masses)?;

    let doubling: Vec<MeasureCheckReport> =
        reports.iter().filter(|r| r.check == "doubling" && !r.samples.is_empty()).cloned().collect();
    if doubling.len() >= 2 {
        let spread = doubling_spread(&doubling);
        manifest.check(
            "doubling_spread",
            spread <= m.doubling_spread,
            format!("max/min doubling constant across a = {spread:.3}"),
        );
        manifest.report("doubling_spread", &spread)?;
    }

    let mut out = ArtifactWriter::new(&ctx.out)?;
    let refs: Vec<&MeasureCheckReport> = reports.iter().collect();
    out.write("measure.csv", &csv_bytes(|b| write_measure_csv(b, &refs))?)?;
    manifest.report("checks", &reports)?;
    out.write_json("measure.json", &manifest.reports)?;
    let passed = manifest.passed;
    out.finish(manifest)?;
    Ok(passed)
}

#[derive(Serialize)]
struct DerivativeRow {
    a: f64,
    exact: f64,
    finite_difference: f64,
    relative_error: f64,
    w_max: f64,
}

pub fn flux(ctx: &RunContext) -> Result<bool> {
    let f = &ctx.config.flux;
    let mut manifest = RunManifest::new("flux", ctx.config.clone());
    let problem = problem(ctx, &mut manifest)?;
    let domain = &problem.domain;
    let sigma_total = problem.sigma_total();
    let grid_spec = f.a_grid.clone().unwrap_or_else(|| AGrid::default_for(sigma_total, domain.ell()));
    let grid = grid_spec.values(sigma_total);
    manifest.config.flux.a_grid = Some(grid_spec);

    let cache = if ctx.resume {
        Some(FieldCache { dir: ctx.out.join("cache"), domain_hash: manifest.domain_sha256.clone().unwrap_or_default() })
    } else {
        None
    };
    let curve = manifest.timed("flux_curve", || flux_curve(&problem, &grid, f.bounds, cache.as_ref()))?;

    manifest.check(
        "strictly_increasing",
        curve.monotonicity_violations() == 0,
        format!("{} violations", curve.monotonicity_violations()),
    );
    manifest.check(
        "bounded_by_f_infinity",
        curve.bound_violations() == 0,
        format!("{} violations, F(∞) = {:.6}", curve.bound_violations(), curve.f_infinity),
    );
    let energy_gap = curve.points.iter().map(|p| (p.j - p.f).abs() / p.f).fold(0.0, f64::max);
    manifest.check("energy_identity", energy_gap <= f.energy_tolerance, format!("max |J − F|/F = {energy_gap:.3e}"));
    let pair_gap = curve
        .points
        .iter()
        .map(|p| (p.paired_difference - p.f_inf_minus_f).abs() / p.f_inf_minus_f.abs())
        .fold(0.0, f64::max);
    manifest.check(
        "flux_difference_pairing",
        pair_gap <= f.difference_tolerance,
        format!("max relative gap {pair_gap:.3e}"),
    );

    if let (Some(tol), DomainKind::Ball { radius }) = (f.oracle_tolerance, &domain.metadata().kind) {
        if domain.dim() >= 3 {
            let mut worst: f64 = 0.0;
            for p in &curve.points {
                let exact = ball_oracle_flux(domain.dim(), *radius, Some(p.a))?;
                worst = worst.max((p.f - exact).abs() / exact);
            }
            manifest.check("ball_closed_form", worst <= tol, format!("max relative error {worst:.4}"));
        }
    }

    match phase_transition_report(&curve) {
        Ok(phase) => {
            let t = &f.phase;
            let (lo, hi) = phase.neumann_constant_range;
            manifest.check(
                "neumann_slope",
                (phase.neumann_slope.slope - 1.0).abs() <= t.neumann_slope,
                format!("slope {:.4}", phase.neumann_slope.slope),
            );
            manifest.check(
                "neumann_constant",
                lo >= 1.0 / t.band && hi <= t.band,
                format!("F/(aσ) in [{lo:.4}, {hi:.4}]"),
            );
            manifest.check(
                "plateau",
                phase.plateau_ratio >= 1.0 / t.band,
                format!("min F/F(∞) = {:.4}", phase.plateau_ratio),
            );
            manifest.check(
                "dahlberg_slope",
                (phase.dahlberg_slope.slope + 1.0).abs() <= t.dahlberg_slope,
                format!("slope {:.4}", phase.dahlberg_slope.slope),
            );
            manifest.report("phase", &phase)?;
        }
        Err(Error::InsufficientSpan(msg)) => {
            manifest.report("phase", &format!("not available: {msg}"))?;
        }
        Err(e) => return Err(e),
    }

    if !f.order_a.is_empty() {
        let order = manifest.timed("lung_order", || lung_order_check(&problem, &f.order_a))?;
        manifest.check(
            "lung_order",
            order.violations == 0,
            format!("{} violations over {} cells", order.violations, order.cells_checked),
        );
        manifest.report("lung_order", &order)?;
    }

    let mut derivatives = Vec::new();
    for &a in &f.derivative_at {
        let row = manifest.timed(&format!("derivative a={a}"), || -> Result<DerivativeRow> {
            let s = f.derivative_step;
            let d = flux_derivative(&problem, a)?;
            let (hi, lo) = rayon::join(|| solve_lung(&problem, a * (1.0 + s)), || solve_lung(&problem, a * (1.0 - s)));
            let fd = (hi?.flux - lo?.flux) / (2.0 * a * s);
            Ok(DerivativeRow {
                a,
                exact: d.value,
                finite_difference: fd,
                relative_error: (d.value - fd).abs() / fd.abs(),
                w_max: d.w_max,
            })
        })?;
        manifest.check(
            format!("derivative a={a}"),
            row.relative_error <= f.derivative_tolerance && row.exact >= 0.0,
            format!("F′ = {:.6}, central difference {:.6}", row.exact, row.finite_difference),
        );
        derivatives.push(row);
    }
    manifest.report("derivatives", &derivatives)?;

    let mut out = ArtifactWriter::new(&ctx.out)?;
    out.write("flux.csv", &csv_bytes(|b| write_flux_curve_csv(b, &curve))?)?;
    out.write("flux.svg", flux_curve_svg(&curve).as_bytes())?;

    if f.entropy_points > 0 {
        let range = f
            .entropy
            .bounds
            .intermediate_range(sigma_total, domain.ell(), domain.diam(), domain.dim())
            .ok_or_else(|| Error::EmptyIntermediateRange(format!("ℓ = {} on this domain", domain.ell())))?;
        let a_grid = log_space(range.0, range.1, f.entropy_points);
        let report = manifest.timed("entropy", || entropy_comparison(&problem, &a_grid, &f.entropy))?;
        manifest.check("entropy_band", report.passed, format!("max/min ratio {:.3}", report.band_ratio));
        out.write("entropy.csv", &csv_bytes(|b| write_entropy_csv(b, &report))?)?;
        manifest.report("entropy", &report)?;
    }

    manifest.report("curve", &curve)?;
    out.write_json("flux.json", &manifest.reports)?;
    let passed = manifest.passed;
    out.finish(manifest)?;
    Ok(passed)
}

/// Summarizes every run manifest in `out` into `report.md`.
pub fn report(out: &Path) -> Result<bool> {
    let mut paths: Vec<PathBuf> = fs::read_dir(out)
        .map_err(|e| Error::Config(format!("{}: {e}", out.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("manifest-") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no run manifests in {}", out.display())));
    }
    let mut text = String::from("# robinflux run report\n");
    let mut all_passed = true;
    for path in &paths {
        let m = RunManifest::load(path)?;
        all_passed &= m.passed;
        let total: f64 = m.wall_times.iter().map(|(_, t)| t).sum();
        text.push_str(&format!(
            "\n## {} ({})\n\nversion {}, {:.1} s, domain {}\n\n| check | result | detail |\n|---|---|---|\n",
            m.command,
            if m.passed { "pass" } else { "FAIL" },
            m.version,
            total,
            m.domain_sha256.as_deref().map_or("-", |h| &h[..12]),
        ));
        for c in &m.checks {
            let result = match (c.skipped, c.passed) {
                (true, _) => "skipped",
                (false, true) => "pass",
                (false, false) => "FAIL",
            };
            text.push_str(&format!("| {} | {result} | {} |\n", c.name, c.detail));
        }
        text.push_str("\nartifacts:\n");
        for a in &m.artifacts {
            text.push_str(&format!("- `{}` ({} bytes, sha256 {})\n", a.path, a.bytes, &a.sha256[..16]));
        }
    }
    print!("{text}");
    fs::write(out.join("report.md"), text)?;
    Ok(all_passed)
}
