//! Robin and Dirichlet harmonic measures on boundary faces.

mod checks;
mod cover;


use crate::discretize::{Pins, Problem};
use crate::error::{precondition, Result};
use crate::geometry::{BoundaryMeasure, Point};
use crate::green::{dirichlet_green_cell, robin_green_cell, GreenField, GreenKind};

pub use checks::{
    ainfty_diagnostic, boundary_comparison, boundary_comparison_check, bourgain_check,
    change_of_pole_check, doubling_check, doubling_spread, greenhm_equiv_check,
    harnack_stability_check, sample_radius_cap, smoothing_check, MeasureCheckConfig, MeasureCheckReport,
    MeasureSample, ThetaFit,
};
pub use cover::{build_cover, makarov_entropy, voronoi_entropy, CoverSpec};

#[derive(Clone, Debug)]
pub struct HarmonicMeasure {
    pub kind: GreenKind,
    pub pole: usize,
    pub weights: BoundaryMeasure,
}

impl HarmonicMeasure {
    pub fn mass(&self) -> f64 {
        self.weights.total()
    }

    pub fn of(&self, faces: &[usize]) -> f64 {
        self.weights.of(faces)
    }

    /// Perturbs every weight by a relative factor (used by fault injection).
    pub fn perturbed(&self, factor: f64) -> Self {
        HarmonicMeasure { weights: self.weights.scaled(factor), ..self.clone() }
    }
}

/// `ω_R^X(f) = a G_R(X, owner(f)) σ_f`, from one Green solve with pole `X`.
pub fn robin_harmonic_measure(problem: &Problem, a: f64, x: &Point) -> Result<HarmonicMeasure> {
    let pole = problem.domain.locate(x)?;
    let green = robin_green_cell(problem, a, pole)?;
    robin_measure_from_green(problem, &green)
}

pub fn robin_measure_from_green(problem: &Problem, green: &GreenField) -> Result<HarmonicMeasure> {
    let GreenKind::Robin { a } = green.kind else {
        return precondition("Robin harmonic measure needs a Robin Green function");
    };
    let weights = problem
        .domain
        .faces()
        .iter()
        .zip(problem.sigma.weights())
        .map(|(f, w)| a * green.at(f.owner) * w)
        .collect();
    Ok(HarmonicMeasure { kind: green.kind, pole: green.pole, weights: BoundaryMeasure::new(weights)? })
}

/// Full Dirichlet harmonic measure from one Dirichlet Green solve with pole `X`.
///
/// Boundary data enter through the pinned boundary cells, so the measure of
/// face `f` is the discrete flux of `G_D(·; X)` into its owner, split over
/// the owner's faces in proportion to σ.
pub fn dirichlet_harmonic_measure_full(problem: &Problem, x: &Point) -> Result<HarmonicMeasure> {
    let pole = problem.domain.locate(x)?;
    let green = dirichlet_green_cell(problem, pole)?;
    dirichlet_measure_from_green(problem, &green)
}

pub fn dirichlet_measure_from_green(problem: &Problem, green: &GreenField) -> Result<HarmonicMeasure> {
    if green.kind != GreenKind::Dirichlet {
        return precondition("Dirichlet harmonic measure needs a Dirichlet Green function");
    }
    let domain = &problem.domain;
    let sigma = problem.sigma.weights();
    let c = problem.stiffness.coupling();
    let mut weights = vec![0.0; domain.faces().len()];
    for cell in 0..domain.num_cells() {
        let faces = domain.cell_faces(cell);
        if faces.is_empty() {
            continue;
        }
        let k: f64 = problem
            .stiffness
            .neighbors_of(cell)
            .filter(|&j| !domain.is_boundary_cell(j))
            .map(|j| c * green.at(j))
            .sum();
        let owned: f64 = faces.clone().map(|f| sigma[f]).sum();
        let count = faces.len() as f64;
        for f in faces {
            weights[f] = if owned > 0.0 { k * sigma[f] / owned } else { k / count };
        }
    }
    Ok(HarmonicMeasure { kind: GreenKind::Dirichlet, pole: green.pole, weights: BoundaryMeasure::new(weights)? })
}

/// `ω_D^X(E)` by solving the Dirichlet problem with indicator data on `E`.
///
/// Each boundary cell is pinned to the σ-weighted mean of the indicator over
/// its faces. When `E` holds more than half of the faces the complement is
/// solved instead and `1 − ω_D^X(∂Ω∖E)` returned, so `E = ∂Ω` gives exactly 1.
pub fn dirichlet_harmonic_measure(problem: &Problem, x: &Point, faces: &[usize]) -> Result<f64> {
    let domain = &problem.domain;
    let cell = domain.locate(x)?;
    if domain.is_boundary_cell(cell) {
        return precondition(format!("pole {x:?} lies in a pinned boundary cell"));
    }
    let sigma = problem.sigma.weights();
    let mut in_set = vec![false; domain.faces().len()];
    for &f in faces {
        if f >= in_set.len() {
            return precondition(format!("face {f} out of range"));
        }
        in_set[f] = true;
    }
    let flip = 2 * in_set.iter().filter(|&&b| b).count() > in_set.len();
    if flip {
        in_set.iter_mut().for_each(|b| *b = !*b);
    }
    let mut pins = Pins::new();
    for c in 0..domain.num_cells() {
        let range = domain.cell_faces(c);
        if range.is_empty() {
            continue;
        }
        let total: f64 = range.clone().map(|f| sigma[f]).sum();
        let hit: f64 = range.clone().filter(|&f| in_set[f]).map(|f| sigma[f]).sum();
        let value = if total > 0.0 {
            hit / total
        } else {
            range.clone().filter(|&f| in_set[f]).count() as f64 / range.len() as f64
        };
        pins.insert(c, value);
    }
    let system = problem.dirichlet_system(pins)?;
    let rhs = vec![0.0; domain.num_cells()];
    let (u, _) = problem.solve(&system, &rhs)?;
    Ok(if flip { 1.0 - u.at(cell) } else { u.at(cell) })
}
