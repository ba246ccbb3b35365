use std::f64::consts::PI;

use robinflux::discretize::Problem;
use robinflux::geometry::{build_ball_domain, distance, Point};
use robinflux::green::robin_green;
use robinflux::measure::{
    ainfty_diagnostic, boundary_comparison, boundary_comparison_check, bourgain_check, build_cover,
    change_of_pole_check, dirichlet_harmonic_measure, dirichlet_harmonic_measure_full, doubling_check,
    greenhm_equiv_check, harnack_stability_check, makarov_entropy, robin_harmonic_measure, smoothing_check,
    voronoi_entropy, HarmonicMeasure, MeasureCheckConfig,
};
use robinflux::solve::SolverConfig;
use robinflux::Error;

fn ball(h: f64) -> Problem {
    Problem::new(build_ball_domain(3, 4.0, h).unwrap(), SolverConfig::default())
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

fn faces_near(p: &Problem, q: &Point, r: f64) -> Vec<usize> {
    p.domain.face_index().faces_in_ball(q, r)
}

/// `dω/dσ` on every face.
fn density(p: &Problem, w: &HarmonicMeasure) -> Vec<f64> {
    w.weights.weights().iter().zip(p.sigma.weights()).map(|(m, s)| m / s).collect()
}

fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

#[test]
fn robin_measure_has_unit_mass() {
    let p = ball(0.25);
    for a in [1e-3, 1.0, 1e3] {
        for x in [[0.0; 3], [2.0, -1.0, 0.5]] {
            let w = robin_harmonic_measure(&p, a, &x).unwrap();
            assert!((w.mass() - 1.0).abs() <= 1e-8, "a={a} x={x:?}: {}", w.mass());
            assert!(w.weights.weights().iter().all(|&v| v >= 0.0));
        }
    }
}

#[test]
fn robin_measure_from_the_center_is_uniform() {
    let p = ball(0.25);
    let w = robin_harmonic_measure(&p, 1.0, &[0.0; 3]).unwrap();
    let s = spread(&density(&p, &w));
    assert!(s <= 1.5, "{s}");
}

#[test]
fn small_a_spreads_like_surface_measure() {
    let p = ball(0.25);
    let total = p.sigma_total();
    let w = robin_harmonic_measure(&p, 1e-3 / total, &[1.0, 2.0, 0.0]).unwrap();
    for d in density(&p, &w) {
        let ratio = d * total;
        assert!((0.5..=2.0).contains(&ratio), "{ratio}");
    }
}

#[test]
fn dirichlet_measure_basics() {
    let p = ball(0.25);
    let x = [0.0; 3];
    let all: Vec<usize> = (0..p.domain.faces().len()).collect();
    assert!((dirichlet_harmonic_measure(&p, &x, &all).unwrap() - 1.0).abs() <= 1e-12);

    let full = dirichlet_harmonic_measure_full(&p, &x).unwrap();
    assert!((full.mass() - 1.0).abs() <= 1e-8, "{}", full.mass());

    let cap = faces_near(&p, &[4.0, 0.0, 0.0], 1.5);
    let value = dirichlet_harmonic_measure(&p, &x, &cap).unwrap();
    let expected = p.sigma.of(&cap) / p.sigma_total();
    assert!(rel(value, expected) <= 0.25, "{value} vs {expected}");

    let other = faces_near(&p, &[0.0, -4.0, 0.0], 2.0);
    let both = [cap.clone(), other.clone()].concat();
    let sum = value + dirichlet_harmonic_measure(&p, &x, &other).unwrap();
    assert!((dirichlet_harmonic_measure(&p, &x, &both).unwrap() - sum).abs() <= 1e-8);

    let inner = faces_near(&p, &[4.0, 0.0, 0.0], 1.0);
    assert!(full.of(&inner) <= full.of(&cap));
}

#[test]
fn bourgain_in_the_dirichlet_limit() {
    let p = ball(0.25);
    let cfg = MeasureCheckConfig::default();
    let report = bourgain_check(&p, 1e3, &cfg).unwrap();
    assert!(report.passed, "{}", report.achieved);
    assert!(report.samples.iter().all(|s| s.rhs == 1.0 && s.lhs >= 1.0 / 50.0));
}

// ω_R tends to σ/σ(∂Ω) as a → 0 while the index is linear in a
#[test]
fn bourgain_measure_settles_as_a_vanishes() {
    let p = ball(0.25);
    let cfg = MeasureCheckConfig { samples: 8, ..MeasureCheckConfig::default() };
    let coarse = bourgain_check(&p, 1e-3, &cfg).unwrap();
    let fine = bourgain_check(&p, 1e-4, &cfg).unwrap();
    assert!(coarse.passed && fine.passed);
    assert_eq!(coarse.samples.len(), fine.samples.len());
    for (s, t) in coarse.samples.iter().zip(&fine.samples) {
        assert_eq!((s.q, s.r), (t.q, t.r));
        assert!(rel(t.lhs, s.lhs) <= 0.3, "{} vs {}", s.lhs, t.lhs);
        assert!(rel(t.rhs, s.rhs / 10.0) <= 1e-12);
        let uniform = s.rhs * s.r / (1e-3 * p.sigma_total());
        assert!(rel(t.lhs, uniform) <= 0.3, "{} vs {uniform}", t.lhs);
    }
}

#[test]
fn green_and_measure_are_equivalent() {
    let p = ball(0.25);
    let cfg = MeasureCheckConfig::default();
    for a in [1e-3 / p.sigma_total(), 1e3 / p.sigma_total()] {
        let report = greenhm_equiv_check(&p, a, &cfg).unwrap();
        assert!(!report.samples.is_empty());
        assert!(report.samples.iter().all(|s| s.ratio.is_finite() && s.ratio > 0.0));
        assert!(report.passed, "a={a}: {}", report.achieved);
    }

    let q = [4.0, 0.0, 0.0];
    let w = robin_harmonic_measure(&p, 1.0, &[0.0; 3]).unwrap();
    let g = robin_green(&p, 1.0, &[0.0; 3]).unwrap();
    let cork = p.domain.corkscrew_point(&q, 1.0).unwrap();
    let faces = faces_near(&p, &q, 1.0);
    let ratio = w.of(&faces) / (g.at(cork.cell) * p.sigma.of(&faces).min(1.0));
    assert!((1.0 / 50.0..=50.0).contains(&ratio), "{ratio}");
}

#[test]
fn doubling_matches_cap_areas() {
    let p = ball(0.25);
    let report = doubling_check(&p, 1.0, &MeasureCheckConfig::default()).unwrap();
    assert!(report.passed);
    for s in &report.samples {
        let caps = p.sigma.of(&faces_near(&p, &s.q, 2.0 * s.r)) / p.sigma.of(&faces_near(&p, &s.q, s.r));
        assert!(rel(s.ratio, caps) <= 0.25, "{} vs {caps}", s.ratio);
        assert!((2.0..=6.0).contains(&s.ratio), "{}", s.ratio);
    }
}

#[test]
fn change_of_pole() {
    let p = ball(0.25);
    let same = MeasureCheckConfig { second_pole: [0.0; 3], ..MeasureCheckConfig::default() };
    let report = change_of_pole_check(&p, 1.0, &same).unwrap();
    assert!(report.samples.iter().all(|s| s.ratio == 1.0));

    let cfg = MeasureCheckConfig { pole_exclusion: 1.5, ..MeasureCheckConfig::default() };
    let report = change_of_pole_check(&p, 1.0, &cfg).unwrap();
    assert!(!report.samples.is_empty());
    assert!(report.samples.iter().all(|s| (0.2..=5.0).contains(&s.ratio)), "{}", report.achieved);
}

#[test]
fn boundary_comparison_on_the_ball() {
    let p = ball(0.25);
    let cfg = MeasureCheckConfig::default();
    let q = [4.0, 0.0, 0.0];
    let far = faces_near(&p, &[-4.0, 0.0, 0.0], 2.0);
    let same = boundary_comparison(&p, 1.0, &q, 1.0, &far, &far, &cfg, 8).unwrap();
    assert!(!same.is_empty());
    assert!(same.iter().all(|s| s.ratio == 1.0));

    let other = faces_near(&p, &[0.0, 0.0, -4.0], 1.5);
    let samples = boundary_comparison(&p, 1.0, &q, 1.0, &far, &other, &cfg, 8).unwrap();
    assert!(samples.iter().all(|s| (1.0 / 50.0..=50.0).contains(&s.ratio)));

    let near = faces_near(&p, &[3.0, 2.5, 0.0], 1.0);
    assert!(matches!(
        boundary_comparison(&p, 1.0, &q, 1.0, &near, &far, &cfg, 8),
        Err(Error::Precondition(_))
    ));

    let cfg = MeasureCheckConfig { samples: 4, ..cfg };
    let report = boundary_comparison_check(&p, 1.0, &cfg).unwrap();
    assert!(report.passed, "{}", report.achieved);
}

#[test]
fn smoothing_on_the_ball() {
    let p = ball(0.125);
    let cfg = MeasureCheckConfig { pole_exclusion: 2.0, ..MeasureCheckConfig::default() };
    let report = smoothing_check(&p, 0.2, &cfg).unwrap();
    assert!(report.samples.len() >= 12, "{} skipped", report.skipped);
    assert!(report.passed);
    assert!(report.samples.iter().all(|s| (0.5..=2.0).contains(&s.ratio)));

    // the cap of chordal radius r on a sphere has area π r²
    let q = [0.0, 0.0, 4.0];
    for a in [0.05, 0.5] {
        let r = p.domain.critical_rho_at(&p.sigma, a, &q).unwrap();
        assert!(rel(a * r * PI, 1.0) <= 0.25, "a={a}: {r}");
    }
}

#[test]
fn ainfty_exponent_on_the_ball() {
    let p = ball(0.125);
    let cfg = MeasureCheckConfig {
        samples: 48,
        pole_exclusion: 1.5,
        r_max_fraction: 0.3,
        ..MeasureCheckConfig::default()
    };
    let report = ainfty_diagnostic(&p, 1.0, &cfg).unwrap();
    let fit = report.theta.unwrap();
    assert!((fit.theta - 1.0).abs() <= 0.2, "{fit:?}");
    assert!(report.passed);
}

#[test]
fn nearby_poles_give_comparable_measures() {
    let p = ball(0.25);
    let report = harnack_stability_check(&p, 1.0, &MeasureCheckConfig::default()).unwrap();
    assert!(report.passed, "{}", report.achieved);
}

#[test]
fn covers() {
    let p = ball(0.25);
    let d = &p.domain;
    assert_eq!(build_cover(d, d.diam(), 3).unwrap().len(), 1);
    let c = build_cover(d, 1.0, 3).unwrap();
    assert_eq!(c.centers, build_cover(d, 1.0, 3).unwrap().centers);
    let covered = c.len() as f64 * PI;
    assert!((16.0 * PI..=256.0 * PI).contains(&covered), "{}", c.len());

    let faces = d.faces();
    for (k, &i) in c.centers.iter().enumerate() {
        for &j in &c.centers[k + 1..] {
            assert!(distance(&faces[i].center, &faces[j].center) >= 1.0);
        }
    }
    for f in faces {
        assert!(c.centers.iter().any(|&i| distance(&faces[i].center, &f.center) < 1.0));
    }
    assert!(build_cover(d, 0.5, 3).is_err());
}

/// `Σ (σ(B(c, 2r)) / σ(∂Ω))²`: the entropy of the normalized surface measure.
fn uniform_entropy(p: &Problem, centers: &[usize], r: f64) -> f64 {
    let faces = p.domain.faces();
    centers
        .iter()
        .map(|&c| {
            let m = p.sigma.of(&faces_near(p, &faces[c].center, 2.0 * r)) / p.sigma_total();
            m * m
        })
        .sum()
}

#[test]
fn makarov_entropy_on_the_ball() {
    let p = ball(0.125);
    let w = dirichlet_harmonic_measure_full(&p, &[0.0; 3]).unwrap();
    let whole = build_cover(&p.domain, p.domain.diam(), 1).unwrap();
    assert!((makarov_entropy(&p.domain, &w, &whole) - 1.0).abs() <= 1e-8);

    let mut values = Vec::new();
    for r in [1.0, 0.5] {
        let cover = build_cover(&p.domain, r, 7).unwrap();
        let s = makarov_entropy(&p.domain, &w, &cover);
        let oracle = uniform_entropy(&p, &cover.centers, r);
        assert!(rel(s, oracle) <= 0.1, "r={r}: {s} vs {oracle}");
        values.push(s);
    }
    let drop = values[0] / values[1];
    assert!((3.0..=5.0).contains(&drop), "{drop}");
}

#[test]
fn voronoi_entropy_bounds() {
    let p = ball(0.25);
    for x in [[0.0; 3], [3.0, 0.0, 0.0]] {
        let w = robin_harmonic_measure(&p, 1.0, &x).unwrap();
        for r in [1.0, 2.0, 4.0] {
            let cover = build_cover(&p.domain, r, 5).unwrap();
            let s = voronoi_entropy(&p.domain, &w, &cover);
            assert!(s >= 1.0 / cover.len() as f64 * (1.0 - 1e-9) && s <= 1.0 + 1e-9, "{s}");
        }
    }
}
