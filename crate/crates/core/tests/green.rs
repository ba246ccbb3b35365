use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robinflux::discretize::Problem;
use robinflux::geometry::{build_ball_domain, build_prefractal_domain, distance};
use robinflux::green::{
    ball_oracle_green, check_dirichlet_regime, check_neumann_regime, dirichlet_green, kernel_constant,
    monotonicity_check, robin_green, robin_green_cell, Regime,
};
use robinflux::solve::SolverConfig;
use robinflux::Error;

fn ball(h: f64) -> Problem {
    Problem::new(build_ball_domain(3, 4.0, h).unwrap(), SolverConfig::default())
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

#[test]
fn oracle_closed_form() {
    let g = ball_oracle_green(3, 4.0, Some(1.0), 2.0).unwrap();
    assert!((g - (0.5 - 0.25 + 1.0 / 16.0) / (4.0 * PI)).abs() < 1e-15);
    assert!((g - 0.0248680).abs() < 1e-7);
    let d = ball_oracle_green(3, 4.0, None, 2.0).unwrap();
    let far = ball_oracle_green(3, 4.0, Some(1e12), 2.0).unwrap();
    assert!(rel(far, d) < 1e-10);
    for n in [3, 4, 5] {
        let a = 0.37;
        let r = 2.5;
        let at_r = ball_oracle_green(n, r, Some(a), r).unwrap();
        let sphere = robinflux::green::unit_sphere_area(n) * r.powi(n as i32 - 1);
        assert!((a * sphere * at_r - 1.0).abs() < 1e-12, "n={n}");
    }
    assert!(ball_oracle_green(3, 4.0, Some(1.0), 0.0).is_err());
    assert!(ball_oracle_green(2, 4.0, Some(1.0), 1.0).is_err());
}

#[test]
fn flux_certificate_is_exact() {
    let p = ball(0.25);
    for a in [1e-3, 0.1, 1.0, 10.0, 1e4] {
        for y in [[0.0; 3], [2.0, -1.0, 0.5], [3.5, 0.0, 1.0]] {
            let g = robin_green(&p, a, &y).unwrap();
            let cert = g.flux_certificate.unwrap();
            assert!((cert - 1.0).abs() <= 1e-8, "a={a} y={y:?}: {cert}");
            assert!(g.field.min() >= 0.0);
        }
    }
}

#[test]
fn robin_green_matches_the_ball_oracle() {
    let p = ball(0.25);
    let g = robin_green(&p, 1.0, &[0.0; 3]).unwrap();
    let x = [2.0, 0.0, 0.0];
    let numeric = g.value_at(&p, &x).unwrap();
    let exact = ball_oracle_green(3, 4.0, Some(1.0), 2.0).unwrap();
    assert!(rel(numeric, exact) <= 0.2, "{numeric} vs {exact}");
}

#[test]
fn robin_green_is_symmetric() {
    let p = ball(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = p.domain.num_cells();
    for _ in 0..10 {
        let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let gx = robin_green_cell(&p, 0.8, x).unwrap();
        let gy = robin_green_cell(&p, 0.8, y).unwrap();
        assert!((gx.at(y) - gy.at(x)).abs() <= 1e-8, "{x} {y}");
    }
}

#[test]
fn dirichlet_green_matches_the_ball_oracle() {
    let p = ball(0.25);
    let g = dirichlet_green(&p, &[0.0; 3]).unwrap();
    assert!(g.flux_certificate.is_none());
    let numeric = g.value_at(&p, &[0.0, 2.0, 0.0]).unwrap();
    let exact = ball_oracle_green(3, 4.0, None, 2.0).unwrap();
    assert!(rel(numeric, exact) <= 0.2, "{numeric} vs {exact}");
    assert!(g.field.trace(&p.domain).iter().all(|&v| v == 0.0));

    let h = p.domain.h();
    let y = p.domain.cell_center(g.pole);
    let c = kernel_constant(3);
    for cell in 0..p.domain.num_cells() {
        let r = distance(&p.domain.cell_center(cell), &y);
        if r >= 3.0 * h {
            assert!(g.at(cell) <= 1.5 * c / r, "cell {cell} at {r}");
        }
    }
}

#[test]
fn green_functions_are_ordered() {
    let p = ball(0.25);
    let report = monotonicity_check(&p, &[0.0; 3], &[0.5, 1.0, 2.0]).unwrap();
    assert!(report.passed(), "{:?}", &report.violations[..report.violations.len().min(5)]);
    let c = kernel_constant(3);
    for (k, (a, b)) in [(0.5, 1.0), (1.0, 2.0)].into_iter().enumerate() {
        let gap = c / 16.0 * (1.0 / a - 1.0 / b);
        assert!(rel(report.robin_margins[k], gap) <= 0.2, "{} vs {gap}", report.robin_margins[k]);
    }
    assert!(report.dirichlet_margin > 0.0);
    assert!(report.flux_certificates.iter().all(|c| (c - 1.0).abs() <= 1e-8));
    assert!(monotonicity_check(&p, &[0.0; 3], &[1.0]).is_err());
    assert!(monotonicity_check(&p, &[0.0; 3], &[2.0, 1.0]).is_err());
}

#[test]
fn neumann_regime_on_the_ball() {
    let p = ball(0.25);
    let a = 1.0 / (64.0 * PI);
    assert_eq!(Regime::classify(&p, a), Regime::Neumann);
    let report = check_neumann_regime(&p, a, &[0.0; 3], 24, 20.0, 3).unwrap();
    assert!(report.passed, "{} {}", report.min_ratio, report.max_ratio);
    assert!(report.pairs.iter().all(|x| x.ratio.is_finite() && x.ratio > 0.0));

    // ρ = a σ(∂Ω) = diam: no pair is farther apart than ρ
    let edge = p.domain.diam() / p.sigma_total();
    let close = check_neumann_regime(&p, edge, &[0.0; 3], 24, 20.0, 3).unwrap();
    assert!(close.pairs.iter().all(|x| x.branch == "close"));

    assert!(matches!(check_neumann_regime(&p, 1e3, &[0.0; 3], 4, 20.0, 3), Err(Error::WrongRegime(_))));
}

#[test]
fn neumann_regime_on_the_prefractal() {
    let d = build_prefractal_domain(3, 10.0, 2, 10.0 / 36.0).unwrap();
    let p = Problem::new(d, SolverConfig::default());
    let a = 0.5 / p.sigma_total();
    let report = check_neumann_regime(&p, a, &[0.0; 3], 24, 20.0, 5).unwrap();
    assert!(report.passed, "{} {}", report.min_ratio, report.max_ratio);
}

#[test]
fn dirichlet_regime_on_the_ball() {
    let p = ball(0.25);
    let a = 1e6;
    assert_eq!(Regime::classify(&p, a), Regime::Dirichlet);
    let report = check_dirichlet_regime(&p, a, 48, 20.0, 9).unwrap();
    assert!(report.passed, "{} {}", report.min_ratio, report.max_ratio);
    assert_eq!(report.lower_bound_violations, 0);
    assert!(report.corkscrew_substitutions > 0);
    assert!(report.pairs.iter().filter(|x| x.branch == "medium").all(|x| x.ratio >= 1.0));

    let gr = robin_green(&p, a, &[0.0; 3]).unwrap();
    let gd = dirichlet_green(&p, &[0.0; 3]).unwrap();
    for x in [[1.0, 0.0, 0.0], [0.0, 1.5, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, -2.0]] {
        let ratio = gr.value_at(&p, &x).unwrap() / gd.value_at(&p, &x).unwrap();
        assert!((1.0..=1.2).contains(&ratio), "{x:?}: {ratio}");
    }

    assert!(matches!(check_dirichlet_regime(&p, 1e-6, 4, 20.0, 9), Err(Error::WrongRegime(_))));
}
