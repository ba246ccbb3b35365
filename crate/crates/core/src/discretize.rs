//! Finite-volume discretization of −Δ with Robin, Neumann or Dirichlet
//! boundary conditions on a [`GridDomain`].
//!
//! The bilinear form is
//!
//! ```text
//! b(u, v) = Σ_{i~j} h^{n-2} (u_i − u_j)(v_i − v_j) + a Σ_f σ_f u_{owner(f)} v_{owner(f)}
//! ```
//!
//! i.e. a two-point-flux stiffness `L` plus `a` times a diagonal boundary
//! mass `M`. Boundary traces are owner-cell values. Dirichlet data and the
//! lung constraint are imposed by pinning cells.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{precondition, Error, Result};
use crate::geometry::{norm, BoundaryMeasure, GridDomain, Point};

/// Rows per parallel work item. Fixed so reductions are reproducible.
pub(crate) const CHUNK: usize = 1 << 13;

/// Cells pinned to fixed values, keyed by cell index.
pub type Pins = BTreeMap<usize, f64>;

const NO_NEIGHBOR: u32 = u32::MAX;

/// Two-point-flux stiffness matrix over interior cells.
///
/// Off-diagonal entries are `−h^{n-2}` between face-adjacent cells; the
/// diagonal is `h^{n-2}` times the number of interior neighbours.
#[derive(Clone, Debug)]
pub struct StiffnessOperator {
    coupling: f64,
    neighbors: Arc<Vec<[u32; 6]>>,
}

impl StiffnessOperator {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].iter().filter(|&&j| j != NO_NEIGHBOR).count()
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.coupling * self.degree(i) as f64
    }

    pub fn neighbors_of(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[i].iter().filter(|&&j| j != NO_NEIGHBOR).map(|&j| j as usize)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        stencil_apply(self.coupling, &self.neighbors, &vec![0.0; self.len()], None, x, y);
    }

    /// Sorted `(row, col, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        stencil_triplets(self.coupling, &self.neighbors, |i| self.diagonal(i))
    }
}

pub fn assemble_stiffness(domain: &GridDomain) -> StiffnessOperator {
    let neighbors: Vec<[u32; 6]> = (0..domain.num_cells())
        .map(|i| domain.neighbors(i).map(|nb| nb.map_or(NO_NEIGHBOR, |j| j as u32)))
        .collect();
    StiffnessOperator { coupling: domain.coupling(), neighbors: Arc::new(neighbors) }
}

/// Diagonal boundary mass: entry `i` is the σ-measure of the faces owned by cell `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMassOperator {
    diag: Vec<f64>,
}

impl BoundaryMassOperator {
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// `M·1`: the σ-weights gathered per cell.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.diag.iter().zip(x).map(|(m, v)| m * v).collect()
    }
}

pub fn assemble_boundary_mass(domain: &GridDomain, sigma: &BoundaryMeasure) -> BoundaryMassOperator {
    let mut diag = vec![0.0; domain.num_cells()];
    for (f, face) in domain.faces().iter().enumerate() {
        diag[face.owner] += sigma.weights()[f];
    }
    BoundaryMassOperator { diag }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        if let Some(t) = sorted.iter().find(|t| t.0 >= n || t.1 >= n) {
            return precondition(format!("triplet {t:?} outside a {n}×{n} matrix"));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix { n, row_ptr, cols, values })
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    fn diagonal(&self, i: usize) -> f64 {
        self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v)
    }
}

#[derive(Clone, Debug)]
enum Operator {
    /// `coupling·(graph Laplacian) + diag(shift)`; `diag` caches the full diagonal.
    Stencil { coupling: f64, neighbors: Arc<Vec<[u32; 6]>>, shift: Vec<f64>, diag: Vec<f64> },
    Csr(CsrMatrix),
}

/// Which boundary condition a system encodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SystemKind {
    /// `L + aM`, possibly with pinned cells.
    Robin { a: f64 },
    /// `L` with every boundary-owning cell pinned.
    Dirichlet,
    /// An arbitrary sparse SPD matrix.
    General,
}

/// A symmetric operator with pinned cells removed from the unknowns.
///
/// Pinned cells keep their values; their couplings move to the right-hand
/// side. Vectors stay indexed by cell, with pinned entries carried along.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    op: Operator,
    kind: SystemKind,
    pinned: Pins,
    free: Vec<bool>,
    rayleigh_min: f64,
}

impl LinearSystem {
    /// Robin operator `L + aM` with no pinned cells. Requires `a > 0`.
    pub fn robin(stiffness: &StiffnessOperator, mass: &BoundaryMassOperator, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return precondition(format!(
                "Robin parameter must be positive and finite (got {a}); a = 0 has constants in its kernel"
            ));
        }
        Self::robin_pinned(stiffness, mass, a, Pins::new())
    }

    /// `L + aM` with pinned cells; `a = 0` is allowed when `pins` is nonempty.
    pub fn robin_pinned(
        stiffness: &StiffnessOperator,
        mass: &BoundaryMassOperator,
        a: f64,
        pins: Pins,
    ) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return precondition(format!("Robin parameter must be finite and nonnegative (got {a})"));
        }
        if a == 0.0 && pins.is_empty() {
            return precondition("a = 0 without pinned cells is singular");
        }
        let shift: Vec<f64> = mass.diag.iter().map(|m| a * m).collect();
        let diag = (0..stiffness.len()).map(|i| stiffness.diagonal(i) + shift[i]).collect();
        let op = Operator::Stencil {
            coupling: stiffness.coupling,
            neighbors: stiffness.neighbors.clone(),
            shift,
            diag,
        };
        Self::finish(op, SystemKind::Robin { a }, pins)
    }

    /// Stiffness with every boundary-owning cell pinned to 0, plus extra pins.
    ///
    /// Extra pins on boundary-owning cells replace the zero value (boundary data).
    pub fn dirichlet(stiffness: &StiffnessOperator, domain: &GridDomain, extra: Pins) -> Result<Self> {
        let mut pins = boundary_pins(domain);
        pins.extend(extra);
        let diag = (0..stiffness.len()).map(|i| stiffness.diagonal(i)).collect();
        let op = Operator::Stencil {
            coupling: stiffness.coupling,
            neighbors: stiffness.neighbors.clone(),
            shift: vec![0.0; stiffness.len()],
            diag,
        };
        Self::finish(op, SystemKind::Dirichlet, pins)
    }

    /// General sparse system, e.g. for cross-checks against other toolkits.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let csr = CsrMatrix::from_triplets(n, triplets)?;
        Self::finish(Operator::Csr(csr), SystemKind::General, Pins::new())
    }

    fn finish(op: Operator, kind: SystemKind, pinned: Pins) -> Result<Self> {
        let n = match &op {
            Operator::Stencil { diag, .. } => diag.len(),
            Operator::Csr(m) => m.n,
        };
        let mut free = vec![true; n];
        for (&cell, v) in &pinned {
            if cell >= n || !v.is_finite() {
                return precondition(format!("invalid pin {cell} -> {v}"));
            }
            free[cell] = false;
        }
        if !free.iter().any(|&f| f) {
            return precondition("every cell is pinned");
        }
        let mut sys = LinearSystem { op, kind, pinned, free, rayleigh_min: f64::NAN };
        sys.rayleigh_min = sys.sampled_rayleigh_min(8, 0x5eed);
        Ok(sys)
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn robin_parameter(&self) -> Option<f64> {
        match self.kind {
            SystemKind::Robin { a } => Some(a),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn num_unknowns(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn pinned(&self) -> &Pins {
        &self.pinned
    }

    pub fn is_free(&self, i: usize) -> bool {
        self.free[i]
    }

    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    /// Smallest Rayleigh quotient over a few seeded random free vectors.
    pub fn spd_certificate(&self) -> f64 {
        self.rayleigh_min
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        match &self.op {
            Operator::Stencil { diag, .. } => diag[i],
            Operator::Csr(m) => m.diagonal(i),
        }
    }

    /// `y = A x` over all cells, ignoring pins.
    pub fn apply_full(&self, x: &[f64], y: &mut [f64]) {
        self.apply_masked(x, y, None);
    }

    /// `y = A_ff x` on free rows and columns; pinned rows of `y` are zero.
    pub fn apply_free(&self, x: &[f64], y: &mut [f64]) {
        self.apply_masked(x, y, Some(&self.free));
    }

    fn apply_masked(&self, x: &[f64], y: &mut [f64], mask: Option<&[bool]>) {
        match &self.op {
            Operator::Stencil { coupling, neighbors, shift, .. } => {
                stencil_apply(*coupling, neighbors, shift, mask, x, y)
            }
            Operator::Csr(m) => {
                y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, ys)| {
                    for (k, yi) in ys.iter_mut().enumerate() {
                        let i = c * CHUNK + k;
                        if mask.is_some_and(|f| !f[i]) {
                            *yi = 0.0;
                            continue;
                        }
                        *yi = m
                            .row(i)
                            .filter(|&(j, _)| mask.map_or(true, |f| f[j]))
                            .map(|(j, v)| v * x[j])
                            .sum();
                    }
                })
            }
        }
    }

    /// `‖ |A_ff| |x| ‖₂`, the scale of rounding error in `A_ff x`.
    pub fn abs_apply_norm(&self, x: &[f64]) -> f64 {
        let free = &self.free;
        let row = |i: usize| -> f64 {
            if !free[i] {
                return 0.0;
            }
            match &self.op {
                Operator::Stencil { coupling, neighbors, diag, .. } => {
                    let off: f64 = neighbors[i]
                        .iter()
                        .filter(|&&j| j != NO_NEIGHBOR && free[j as usize])
                        .map(|&j| x[j as usize].abs())
                        .sum();
                    diag[i] * x[i].abs() + coupling * off
                }
                Operator::Csr(m) => m.row(i).filter(|&(j, _)| free[j]).map(|(j, v)| (v * x[j]).abs()).sum(),
            }
        };
        let partial: Vec<f64> = (0..self.len())
            .into_par_iter()
            .chunks(CHUNK)
            .map(|rows| rows.into_iter().map(|i| row(i).powi(2)).sum::<f64>())
            .collect();
        partial.iter().sum::<f64>().sqrt()
    }

    /// `b(u, v) = uᵀ A v` over all cells.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut av = vec![0.0; v.len()];
        self.apply_full(v, &mut av);
        crate::solve::dot(u, &av)
    }

    /// Right-hand side restricted to free cells with pinned couplings moved over.
    pub fn effective_rhs(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x_pinned = vec![0.0; self.len()];
        for (&c, &v) in &self.pinned {
            x_pinned[c] = v;
        }
        let mut coupled = vec![0.0; self.len()];
        self.apply_full(&x_pinned, &mut coupled);
        (0..self.len())
            .map(|i| if self.free[i] { rhs[i] - coupled[i] } else { 0.0 })
            .collect()
    }

    /// Sorted triplets of the full operator (pins ignored).
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        match &self.op {
            Operator::Stencil { coupling, neighbors, diag, .. } => {
                stencil_triplets(*coupling, neighbors, |i| diag[i])
            }
            Operator::Csr(m) => (0..m.n)
                .flat_map(|i| m.row(i).map(move |(j, v)| (i, j, v)))
                .collect(),
        }
    }

    fn sampled_rayleigh_min(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0; self.len()];
        let mut best = f64::INFINITY;
        for _ in 0..samples {
            let x: Vec<f64> = self
                .free
                .iter()
                .map(|&f| if f { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect();
            self.apply_free(&x, &mut y);
            let q = crate::solve::dot(&x, &y) / crate::solve::dot(&x, &x);
            best = best.min(q);
        }
        best
    }
}

/// Applies the stencil in difference form, `Σ_j c (x_i − x_j)`, so that
/// constants are annihilated exactly; masked neighbours contribute `c x_i`.
fn stencil_apply(
    coupling: f64,
    neighbors: &[[u32; 6]],
    shift: &[f64],
    mask: Option<&[bool]>,
    x: &[f64],
    y: &mut [f64],
) {
    y.par_chunks_mut(CHUNK).enumerate().for_each(|(c, ys)| {
        for (k, yi) in ys.iter_mut().enumerate() {
            let i = c * CHUNK + k;
            if mask.is_some_and(|f| !f[i]) {
                *yi = 0.0;
                continue;
            }
            let xi = x[i];
            let mut s = 0.0;
            for &j in &neighbors[i] {
                if j == NO_NEIGHBOR {
                    continue;
                }
                s += if mask.map_or(true, |f| f[j as usize]) { xi - x[j as usize] } else { xi };
            }
            *yi = shift[i] * xi + coupling * s;
        }
    });
}

fn stencil_triplets(
    coupling: f64,
    neighbors: &[[u32; 6]],
    diag: impl Fn(usize) -> f64,
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (i, nbrs) in neighbors.iter().enumerate() {
        let mut row: Vec<(usize, usize, f64)> = nbrs
            .iter()
            .filter(|&&j| j != NO_NEIGHBOR)
            .map(|&j| (i, j as usize, -coupling))
            .collect();
        row.push((i, i, diag(i)));
        row.sort_by_key(|t| t.1);
        out.extend(row);
    }
    out
}

/// Writes triplets in MatrixMarket coordinate format (1-based, sorted by row then column).
pub fn write_matrix_market(
    mut out: impl Write,
    n: usize,
    triplets: &[(usize, usize, f64)],
) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{n} {n} {}", triplets.len())?;
    for (r, c, v) in triplets {
        writeln!(out, "{} {} {:e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

/// Every cell owning a boundary face, pinned to 0.
pub fn boundary_pins(domain: &GridDomain) -> Pins {
    (0..domain.num_cells())
        .filter(|&c| domain.is_boundary_cell(c))
        .map(|c| (c, 0.0))
        .collect()
}

/// Discrete Dirac at the cell containing `y`: `b(G, φ) = φ(Y)` for the
/// discrete pairing.
pub fn point_source_rhs(domain: &GridDomain, y: &Point) -> Result<(usize, Vec<f64>)> {
    let cell = domain.locate(y)?;
    let mut rhs = vec![0.0; domain.num_cells()];
    rhs[cell] = 1.0;
    Ok((cell, rhs))
}

/// Pins every cell with center in the unit ball `B(0,1)` to 1.
pub fn lung_constraint(domain: &GridDomain) -> Result<Pins> {
    if domain.h() > 0.5 {
        return Err(Error::TooCoarse { h: domain.h(), reason: "B(0,1) is unresolved above h = 0.5".into() });
    }
    let pins: Pins = domain
        .cells_in_ball(&[0.0; 3], 1.0, false)
        .into_iter()
        .filter(|&c| norm(&domain.cell_center(c)) < 1.0)
        .map(|c| (c, 1.0))
        .collect();
    if pins.is_empty() {
        return Err(Error::InvalidDomain("B(0,1) contains no interior cell".into()));
    }
    if pins.keys().any(|&c| domain.is_boundary_cell(c)) {
        return Err(Error::InvalidDomain("B(0,1) touches the boundary".into()));
    }
    Ok(pins)
}

/// Discrete `a ∫_E φ dσ`: entry `i` is `a Σ σ_f` over faces of `E` owned by `i`.
pub fn indicator_boundary_rhs(
    domain: &GridDomain,
    sigma: &BoundaryMeasure,
    faces: &[usize],
    a: f64,
) -> Vec<f64> {
    let mut rhs = vec![0.0; domain.num_cells()];
    for &f in faces {
        rhs[domain.faces()[f].owner] += a * sigma.weights()[f];
    }
    rhs
}

/// A scalar per interior cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Field { values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Field { values: vec![c; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    /// Boundary trace: the owner value for every face.
    pub fn trace(&self, domain: &GridDomain) -> Vec<f64> {
        domain.faces().iter().map(|f| self.values[f.owner]).collect()
    }

    /// `Σ_f σ_f trace_f`.
    pub fn boundary_integral(&self, domain: &GridDomain, sigma: &BoundaryMeasure) -> f64 {
        domain
            .faces()
            .iter()
            .zip(sigma.weights())
            .map(|(f, w)| w * self.values[f.owner])
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A domain with its boundary measure, assembled operators and solver settings.
#[derive(Clone, Debug)]
pub struct Problem {
    pub domain: GridDomain,
    pub sigma: BoundaryMeasure,
    pub stiffness: StiffnessOperator,
    pub mass: BoundaryMassOperator,
    pub solver: crate::solve::SolverConfig,
}

impl Problem {
    /// Uses the surface measure of the domain as σ.
    pub fn new(domain: GridDomain, solver: crate::solve::SolverConfig) -> Self {
        let sigma = BoundaryMeasure::surface(&domain);
        Self::with_sigma(domain, sigma, solver).expect("surface measure matches its domain")
    }

    pub fn with_sigma(
        domain: GridDomain,
        sigma: BoundaryMeasure,
        solver: crate::solve::SolverConfig,
    ) -> Result<Self> {
        if sigma.len() != domain.faces().len() {
            return precondition(format!(
                "measure has {} weights for {} faces",
                sigma.len(),
                domain.faces().len()
            ));
        }
        let stiffness = assemble_stiffness(&domain);
        let mass = assemble_boundary_mass(&domain, &sigma);
        Ok(Problem { domain, sigma, stiffness, mass, solver })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn sigma_total(&self) -> f64 {
        self.sigma.total()
    }

    pub fn robin_system(&self, a: f64) -> Result<LinearSystem> {
        LinearSystem::robin(&self.stiffness, &self.mass, a)
    }

    pub fn robin_system_pinned(&self, a: f64, pins: Pins) -> Result<LinearSystem> {
        LinearSystem::robin_pinned(&self.stiffness, &self.mass, a, pins)
    }

    pub fn dirichlet_system(&self, extra: Pins) -> Result<LinearSystem> {
        LinearSystem::dirichlet(&self.stiffness, &self.domain, extra)
    }

    pub fn solve(&self, system: &LinearSystem, rhs: &[f64]) -> Result<(Field, crate::solve::SolveReport)> {
        Ok(crate::solve::cg_solve(system, rhs, &self.solver)?)
    }
}
