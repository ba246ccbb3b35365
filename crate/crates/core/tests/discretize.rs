use std::f64::consts::PI;

use robinflux::discretize::{
    assemble_boundary_mass, assemble_stiffness, indicator_boundary_rhs, lung_constraint, point_source_rhs,
    write_matrix_market, LinearSystem, Pins, Problem,
};
use robinflux::geometry::{
    build_ball_domain, build_prefractal_domain, BoundaryMeasure, DomainKind, DomainMetadata, GridDomain,
};
use robinflux::solve::SolverConfig;

/// A solid `nx × ny × nz` block of cells with one exterior layer around it.
fn block(nx: usize, ny: usize, nz: usize, h: f64) -> GridDomain {
    let shape = [nx + 2, ny + 2, nz + 2];
    let mut mask = vec![false; shape[0] * shape[1] * shape[2]];
    for i in 1..=nx {
        for j in 1..=ny {
            for k in 1..=nz {
                mask[(i * shape[1] + j) * shape[2] + k] = true;
            }
        }
    }
    let meta = DomainMetadata { kind: DomainKind::Mask, ell: h, note: String::new() };
    GridDomain::from_mask(3, h, [0.0; 3], shape, &mask, meta).unwrap()
}

fn ball_problem(h: f64) -> Problem {
    Problem::new(build_ball_domain(3, 4.0, h).unwrap(), SolverConfig::default())
}

#[test]
fn single_cell_has_zero_stiffness() {
    let l = assemble_stiffness(&block(1, 1, 1, 0.5));
    assert_eq!(l.triplets(), vec![(0, 0, 0.0)]);
}

#[test]
fn two_cell_stiffness_is_a_scaled_graph_laplacian() {
    let h = 0.5;
    let l = assemble_stiffness(&block(2, 1, 1, h));
    assert_eq!(l.triplets(), vec![(0, 0, h), (0, 1, -h), (1, 0, -h), (1, 1, h)]);
}

#[test]
fn stiffness_annihilates_constants() {
    let p = ball_problem(0.5);
    let n = p.domain.num_cells();
    let mut y = vec![1.0; n];
    p.stiffness.apply(&vec![3.25; n], &mut y);
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn boundary_mass_carries_the_surface_measure() {
    let p = ball_problem(0.5);
    assert!((p.mass.trace() - p.sigma_total()).abs() <= 1e-9 * p.sigma_total());

    let cube = build_prefractal_domain(3, 10.0, 0, 0.5).unwrap();
    let m = assemble_boundary_mass(&cube, &BoundaryMeasure::surface(&cube));
    let side = cube.locate(&[4.75, 0.25, -0.25]).unwrap();
    assert!((m.diagonal()[side] - 0.25).abs() < 1e-15);
    let inner = cube.locate(&[0.25, 0.25, 0.25]).unwrap();
    assert_eq!(m.diagonal()[inner], 0.0);
}

#[test]
fn robin_rows_are_linear_in_a() {
    let p = ball_problem(0.5);
    let t1 = p.robin_system(1.0).unwrap().triplets();
    let t2 = p.robin_system(2.0).unwrap().triplets();
    assert_eq!(t1.len(), t2.len());
    for (x, y) in t1.iter().zip(&t2) {
        assert_eq!((x.0, x.1), (y.0, y.1));
        let expected = if x.0 == x.1 { p.mass.diagonal()[x.0] } else { 0.0 };
        assert!((y.2 - x.2 - expected).abs() < 1e-12, "{x:?} {y:?}");
    }
}

#[test]
fn robin_needs_positive_a_without_pins() {
    let p = ball_problem(0.5);
    assert!(p.robin_system(0.0).is_err());
    assert!(p.robin_system(f64::NAN).is_err());
    assert!(p.robin_system_pinned(0.0, Pins::new()).is_err());
}

#[test]
fn pinned_system_with_zero_data_gives_zero() {
    let p = ball_problem(0.5);
    let system = p.dirichlet_system(Pins::new()).unwrap();
    let (u, _) = p.solve(&system, &vec![0.0; p.domain.num_cells()]).unwrap();
    assert!(u.values().iter().all(|&v| v == 0.0));
}

#[test]
fn three_cell_line_matches_hand_elimination() {
    let h = 0.5;
    let d = block(3, 1, 1, h);
    let p = Problem::new(d, SolverConfig::default());
    let pins: Pins = [(0, 0.0), (2, 0.0)].into();
    let system = p.robin_system_pinned(0.0, pins).unwrap();
    let (u, _) = p.solve(&system, &[0.0, 1.0, 0.0]).unwrap();
    // one free unknown: 2h·u = 1
    assert!((u.at(1) - 1.0 / (2.0 * h)).abs() < 1e-14);
    assert_eq!((u.at(0), u.at(2)), (0.0, 0.0));

    let pins: Pins = [(0, 1.0), (2, 3.0)].into();
    let system = p.robin_system_pinned(0.0, pins).unwrap();
    let (u, _) = p.solve(&system, &[0.0; 3]).unwrap();
    assert!((u.at(1) - 2.0).abs() < 1e-14);
}

#[test]
fn point_sources_are_unit_vectors() {
    let d = build_ball_domain(3, 4.0, 0.5).unwrap();
    let (c1, r1) = point_source_rhs(&d, &[0.0; 3]).unwrap();
    let (c2, r2) = point_source_rhs(&d, &[1.0, 1.0, 0.0]).unwrap();
    assert_ne!(c1, c2);
    assert_eq!(r1.iter().sum::<f64>(), 1.0);
    assert_eq!(r1[c1], 1.0);
    assert_eq!(r1.iter().zip(&r2).map(|(a, b)| a * b).sum::<f64>(), 0.0);
    assert!(point_source_rhs(&d, &[5.0, 0.0, 0.0]).is_err());
}

#[test]
fn lung_constraint_pins_the_unit_ball() {
    let h = 0.25;
    let p = ball_problem(h);
    let pins = lung_constraint(&p.domain).unwrap();
    let expected = 4.0 * PI / 3.0 / h.powi(3);
    assert!((pins.len() as f64 - expected).abs() <= 0.2 * expected, "{}", pins.len());
    assert!(pins.values().all(|&v| v == 1.0));

    let system = p.robin_system_pinned(0.0, pins).unwrap();
    let (u, _) = p.solve(&system, &vec![0.0; p.domain.num_cells()]).unwrap();
    assert!(u.values().iter().all(|&v| (v - 1.0).abs() < 1e-8));

    let coarse = build_ball_domain(3, 4.0, 0.6).unwrap();
    assert!(lung_constraint(&coarse).is_err());
}

#[test]
fn indicator_data_is_additive() {
    let p = ball_problem(0.5);
    let (d, s) = (&p.domain, &p.sigma);
    let all: Vec<usize> = (0..d.faces().len()).collect();
    let a = 0.7;
    let full = indicator_boundary_rhs(d, s, &all, a);
    let m1 = p.mass.apply(&vec![1.0; d.num_cells()]);
    for (x, y) in full.iter().zip(&m1) {
        assert!((x - a * y).abs() < 1e-14);
    }
    assert!(indicator_boundary_rhs(d, s, &[], a).iter().all(|&v| v == 0.0));

    let (e1, e2): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&f| d.faces()[f].center[2] > 0.0);
    let r1 = indicator_boundary_rhs(d, s, &e1, a);
    let r2 = indicator_boundary_rhs(d, s, &e2, a);
    let r12 = indicator_boundary_rhs(d, s, &[e1.clone(), e2.clone()].concat(), a);
    let first_half = indicator_boundary_rhs(d, s, &all[..all.len() / 2], a);
    let second_half = indicator_boundary_rhs(d, s, &all[all.len() / 2..], a);
    for i in 0..d.num_cells() {
        assert!((r12[i] - (r1[i] + r2[i])).abs() < 1e-15);
        assert!((first_half[i] + second_half[i] - full[i]).abs() < 1e-15);
    }
}

#[test]
fn triplets_agree_with_operator_application() {
    let p = ball_problem(0.5);
    let system = p.robin_system(0.3).unwrap();
    let t = system.triplets();
    let csr = LinearSystem::from_triplets(system.len(), &t).unwrap();
    let x: Vec<f64> = (0..system.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
    let (mut y1, mut y2) = (vec![0.0; x.len()], vec![0.0; x.len()]);
    system.apply_full(&x, &mut y1);
    csr.apply_full(&x, &mut y2);
    for (a, b) in y1.iter().zip(&y2) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
    for &(i, j, v) in &t {
        if i != j {
            assert!(t.binary_search_by(|e| (e.0, e.1).cmp(&(j, i))).is_ok_and(|k| t[k].2 == v));
        }
    }
    assert!(system.spd_certificate() > 0.0);
}

#[test]
fn matrix_market_export() {
    let l = assemble_stiffness(&block(2, 1, 1, 0.5));
    let mut out = Vec::new();
    write_matrix_market(&mut out, l.len(), &l.triplets()).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
    assert_eq!(lines[1], "2 2 4");
    let entry = |k: usize| -> (usize, usize, f64) {
        let f: Vec<&str> = lines[k].split(' ').collect();
        (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
    };
    assert_eq!(entry(2), (1, 1, 0.5));
    assert_eq!(entry(3), (1, 2, -0.5));
    assert_eq!(lines.len(), 6);
}
