use std::f64::consts::PI;
use std::sync::OnceLock;

use robinflux::discretize::Problem;
use robinflux::flux::{
    dirichlet_flux, dirichlet_lung, energy_identity_check, entropy_comparison, flux_curve, flux_derivative,
    flux_difference, lung_order_check, phase_transition_report, solve_lung, EntropyConfig, RegimeBounds,
};
use robinflux::geometry::build_ball_domain;
use robinflux::solve::SolverConfig;
use robinflux::Error;

fn ball(h: f64) -> Problem {
    Problem::new(build_ball_domain(3, 4.0, h).unwrap(), SolverConfig::default())
}

fn fine_ball() -> &'static Problem {
    static P: OnceLock<Problem> = OnceLock::new();
    P.get_or_init(|| ball(0.125))
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

/// Radial solution `A + B/|x|` with `u = 1` at `|x| = 1` and `∂_ν u + a u = 0` at `|x| = 4`.
fn radial_flux(a: f64) -> f64 {
    4.0 * PI / (0.75 + 1.0 / (16.0 * a))
}

#[test]
fn zero_robin_parameter_gives_the_constant() {
    let p = ball(0.5);
    let u = solve_lung(&p, 0.0).unwrap();
    assert!(u.field.values().iter().all(|&v| v == 1.0));
    assert_eq!((u.flux, u.energy), (0.0, 0.0));
    assert_eq!(energy_identity_check(&u), 0.0);
}

#[test]
fn lung_flux_matches_the_radial_solution() {
    let p = fine_ball();
    for (a, tol) in [(1.0, 0.1), (1e-3, 0.1)] {
        let u = solve_lung(p, a).unwrap();
        assert!(rel(u.flux, radial_flux(a)) <= tol, "a={a}: {} vs {}", u.flux, radial_flux(a));
        assert!(u.flux > 0.0);
        assert!(u.field.min() >= 0.0 && u.field.max() <= 1.0);
        assert!(energy_identity_check(&u) <= 1e-6, "{}", energy_identity_check(&u));
        assert!(rel(u.ring_flux, u.flux) <= 1e-6);
    }
    let small = solve_lung(p, 1e-3).unwrap();
    assert!(rel(small.flux, 1e-3 * p.sigma_total() * 0.99) <= 0.05, "{}", small.flux);
}

#[test]
fn dirichlet_flux_matches_the_radial_limit() {
    let p = fine_ball();
    let (f_inf, ring) = dirichlet_flux(p).unwrap();
    assert!(rel(f_inf, 16.0 * PI / 3.0) <= 0.1, "{f_inf}");
    assert!(rel(ring, f_inf) <= 1e-6, "{ring} vs {f_inf}");
    let u = dirichlet_lung(p).unwrap();
    assert!(u.a.is_none());
    assert!(u.field.min() >= 0.0 && u.field.max() <= 1.0);
    for a in [1e-2, 1.0, 1e2] {
        assert!(solve_lung(p, a).unwrap().flux < f_inf);
    }
}

#[test]
fn rescaling_sigma_and_a_together_changes_nothing() {
    let p = ball(0.5);
    let lambda = 4.0;
    let q = Problem::with_sigma(p.domain.clone(), p.sigma.scaled(lambda), SolverConfig::default()).unwrap();
    for a in [0.1, 2.0] {
        let u = solve_lung(&p, a).unwrap();
        let v = solve_lung(&q, a / lambda).unwrap();
        assert_eq!(u.flux.to_bits(), v.flux.to_bits());
        assert_eq!(u.energy.to_bits(), v.energy.to_bits());
    }
}

#[test]
fn flux_derivative_at_one() {
    let p = fine_ball();
    let d = flux_derivative(p, 1.0).unwrap();
    let exact = 4.0 * PI / 16.0 / (13.0f64 / 16.0).powi(2);
    assert!(rel(d.value, exact) <= 0.15, "{} vs {exact}", d.value);
    assert!(d.w_max <= 0.0, "{}", d.w_max);
    let fd = (solve_lung(p, 1.01).unwrap().flux - solve_lung(p, 0.99).unwrap().flux) / 0.02;
    assert!(rel(d.value, fd) <= 0.02, "{} vs {fd}", d.value);
}

#[test]
fn flux_difference_pairing() {
    let p = fine_ball();
    let diff = flux_difference(p, 1.0).unwrap();
    assert!(diff.relative_gap <= 0.05, "{diff:?}");
    let exact = 16.0 * PI / 3.0 - radial_flux(1.0);
    assert!(rel(diff.direct, exact) <= 0.25, "{} vs {exact}", diff.direct);

    // first order in 1/a, with a h ≈ 1
    let a = 10.0;
    let far = flux_difference(p, a).unwrap();
    let expected = 4.0 * PI / (9.0 * a);
    assert!(rel(far.direct, expected) <= 0.25, "{} vs {expected}", far.direct);
    assert!(far.direct < diff.direct);
    assert!(flux_difference(p, 1e3).unwrap().direct < far.direct);
}

#[test]
fn lung_solutions_are_ordered() {
    let p = ball(0.25);
    let report = lung_order_check(&p, &[0.1, 1.0, 10.0]).unwrap();
    assert_eq!(report.violations, 0, "{:?}", report.margins);
    assert!(report.cells_checked > 0);
    assert!(report.margins.iter().all(|&m| m > 0.0));
}

#[test]
fn small_curve_is_monotone() {
    let p = ball(0.25);
    let grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
    let curve = flux_curve(&p, &grid, RegimeBounds::default(), None).unwrap();
    assert_eq!(curve.points.len(), 7);
    assert_eq!(curve.monotonicity_violations(), 0);
    assert_eq!(curve.bound_violations(), 0);
    for w in curve.points.windows(2) {
        assert!(w[0].f < w[1].f);
        assert!(w[0].f_inf_minus_f > w[1].f_inf_minus_f);
    }
    for pt in &curve.points {
        assert!(rel(pt.f, radial_flux(pt.a)) <= 0.15, "a={}: {}", pt.a, pt.f);
        assert!(rel(pt.j, pt.f) <= 1e-6);
    }
    let report = phase_transition_report(&curve).unwrap();
    assert!((report.neumann_slope.slope - 1.0).abs() <= 0.1, "{:?}", report.neumann_slope);

    let short = flux_curve(&p, &grid[..3], RegimeBounds::default(), None).unwrap();
    assert!(matches!(phase_transition_report(&short), Err(Error::InsufficientSpan(_))));
    assert!(flux_curve(&p, &[1.0, 0.5], RegimeBounds::default(), None).is_err());
    assert!(flux_curve(&p, &[0.0, 1.0], RegimeBounds::default(), None).is_err());
}

#[test]
fn ball_has_no_intermediate_range() {
    let p = ball(0.5);
    let result = entropy_comparison(&p, &[0.1, 1.0], &EntropyConfig::default());
    assert!(matches!(result, Err(Error::EmptyIntermediateRange(_))));
}
