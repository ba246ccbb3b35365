//! Versioned JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{EntropyConfig, RegimeBounds};
use crate::geometry::{
    build_ball_domain, build_prefractal_domain, load_domain, GridDomain, Point,
};
use crate::measure::MeasureCheckConfig;
use crate::solve::SolverConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Ball {
        radius: f64,
        h: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Prefractal {
        base: f64,
        depth: u32,
        /// defaults to `ℓ/4`
        #[serde(default)]
        h: Option<f64>,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// A domain header written by `gen-domain`, relative to the config file.
    File { path: PathBuf },
}

fn default_dim() -> usize {
    3
}

impl DomainSpec {
    pub fn build(&self, base_dir: &Path) -> Result<GridDomain> {
        match self {
            DomainSpec::Ball { radius, h, dim } => build_ball_domain(*dim, *radius, *h),
            DomainSpec::Prefractal { base, depth, h, dim } => {
                let ell = base / 3f64.powi(*depth as i32);
                build_prefractal_domain(*dim, *base, *depth, h.unwrap_or(ell / 4.0))
            }
            DomainSpec::File { path } => load_domain(&base_dir.join(path)),
        }
    }

    /// Fills in defaults so the manifest records every value used.
    pub fn resolved(&self) -> Self {
        match self {
            DomainSpec::Prefractal { base, depth, h: None, dim } => DomainSpec::Prefractal {
                base: *base,
                depth: *depth,
                h: Some(base / 3f64.powi(*depth as i32) / 4.0),
                dim: *dim,
            },
            other => other.clone(),
        }
    }
}

/// Log-spaced Robin parameters. Bounds given with `relative: true` are
/// multiples of `1/σ(∂Ω)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub relative: bool,
}

impl AGrid {
    /// The default sweep from the Neumann side well into the Dahlberg side.
    pub fn default_for(sigma_total: f64, ell: f64) -> Self {
        AGrid { min: 1e-2 / sigma_total, max: 1e3 * (1.0 / sigma_total).max(4.0 / ell), count: 17, relative: false }
    }

    pub fn values(&self, sigma_total: f64) -> Vec<f64> {
        let scale = if self.relative { 1.0 / sigma_total } else { 1.0 };
        crate::fit::log_space(self.min * scale, self.max * scale, self.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySuite {
    /// boundary balls sampled for the mixed-dimension fit
    pub samples: usize,
}

impl Default for GeometrySuite {
    fn default() -> Self {
        GeometrySuite { samples: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenSuite {
    pub a: f64,
    pub pole: Point,
    pub samples: usize,
    pub monotonicity_a: Vec<f64>,
    /// acceptance factor for the regime bounds
    pub regime_constant: f64,
    /// compare with the closed form when the domain is a ball
    pub oracle: bool,
    pub oracle_radii: Vec<f64>,
    pub oracle_tolerance: f64,
    pub flux_tolerance: f64,
}

impl Default for GreenSuite {
    fn default() -> Self {
        GreenSuite {
            a: 1.0,
            pole: [0.0; 3],
            samples: 16,
            monotonicity_a: vec![0.5, 1.0, 2.0],
            regime_constant: 20.0,
            oracle: true,
            oracle_radii: vec![1.5, 2.0, 3.0],
            oracle_tolerance: 0.2,
            flux_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureCheck {
    Bourgain,
    GreenMeasure,
    Doubling,
    ChangeOfPole,
    BoundaryComparison,
    Smoothing,
    Ainfty,
    Harnack,
}

impl MeasureCheck {
    pub const ALL: [MeasureCheck; 8] = [
        MeasureCheck::Bourgain,
        MeasureCheck::GreenMeasure,
        MeasureCheck::Doubling,
        MeasureCheck::ChangeOfPole,
        MeasureCheck::BoundaryComparison,
        MeasureCheck::Smoothing,
        MeasureCheck::Ainfty,
        MeasureCheck::Harnack,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSuite {
    /// Robin parameters as multiples of `1/σ(∂Ω)`
    pub a_relative: Vec<f64>,
    pub params: MeasureCheckConfig,
    pub enabled: Vec<MeasureCheck>,
    pub mass_tolerance: f64,
    /// allowed `max/min` of the doubling constants across `a_relative`
    pub doubling_spread: f64,
}

impl Default for MeasureSuite {
    fn default() -> Self {
        MeasureSuite {
            a_relative: vec![1e-2, 1.0, 1e2],
            params: MeasureCheckConfig::default(),
            enabled: MeasureCheck::ALL.to_vec(),
            mass_tolerance: 1e-8,
            doubling_spread: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseTolerances {
    /// `|slope − 1|` of `F` on the Neumann side
    pub neumann_slope: f64,
    /// `|slope + 1|` of `F(∞) − F` on the Dahlberg side
    pub dahlberg_slope: f64,
    /// `F/(aσ)` on the Neumann side and `F/F(∞)` on the plateau must lie in `[1/band, band]`
    pub band: f64,
}

impl Default for PhaseTolerances {
    fn default() -> Self {
        PhaseTolerances { neumann_slope: 0.1, dahlberg_slope: 0.25, band: 20.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxSuite {
    /// defaults to 17 points over `[10⁻²/σ, 10³·max(1/σ, 4/ℓ)]`
    pub a_grid: Option<AGrid>,
    pub bounds: RegimeBounds,
    /// closed-form comparison on balls; `None` disables it
    pub oracle_tolerance: Option<f64>,
    pub phase: PhaseTolerances,
    /// ascending parameters for the pointwise order `u_∞ ≤ u_b ≤ u_a ≤ 1`
    pub order_a: Vec<f64>,
    pub derivative_at: Vec<f64>,
    /// relative step of the central difference
    pub derivative_step: f64,
    pub derivative_tolerance: f64,
    pub energy_tolerance: f64,
    /// allowed gap between the two `F(∞) − F(a)` computations
    pub difference_tolerance: f64,
    /// number of intermediate-range points for the entropy comparison; 0 disables it
    pub entropy_points: usize,
    pub entropy: EntropyConfig,
}

impl Default for FluxSuite {
    fn default() -> Self {
        FluxSuite {
            a_grid: None,
            bounds: RegimeBounds::default(),
            oracle_tolerance: Some(0.1),
            phase: PhaseTolerances::default(),
            order_a: vec![0.1, 1.0, 10.0],
            derivative_at: vec![1.0],
            derivative_step: 0.01,
            derivative_tolerance: 0.02,
            energy_tolerance: 1e-6,
            difference_tolerance: 1e-4,
            entropy_points: 0,
            entropy: EntropyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub domain: DomainSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometrySuite,
    #[serde(default)]
    pub green: GreenSuite,
    #[serde(default)]
    pub measure: MeasureSuite,
    #[serde(default)]
    pub flux: FluxSuite,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    /// Parses a config, or the `config` member of a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(located)?;
        let config = match value.get("config") {
            Some(inner) if value.get("tool").is_some() => inner.clone(),
            _ => value,
        };
        // re-parse from text so errors carry line and column
        let text = serde_json::to_string_pretty(&config)?;
        let parsed: RunConfig = serde_json::from_str(&text).map_err(located)?;
        parsed.validate()?;
        Ok(parsed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive (got {v})")))
            }
        };
        positive("green.a", self.green.a)?;
        positive("green.regime_constant", self.green.regime_constant)?;
        positive("measure.params.constant", self.measure.params.constant)?;
        if let Some(g) = &self.flux.a_grid {
            positive("flux.a_grid.min", g.min)?;
            positive("flux.a_grid.max", g.max)?;
            if g.count < 2 || g.max <= g.min {
                return Err(Error::Config("flux.a_grid needs max > min and count ≥ 2".into()));
            }
        }
        Ok(())
    }

    /// Overrides every acceptance factor at once.
    pub fn set_acceptance_constant(&mut self, k: f64) {
        self.green.regime_constant = k;
        self.measure.params.constant = k;
    }

    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.domain = c.domain.resolved();
        c.measure.params.seed = self.seed;
        c.flux.entropy.seed = self.seed;
        c
    }
}

fn located(e: serde_json::Error) -> Error {
    Error::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(
            r#"{"schema_version": 1, "domain": {"kind": "ball", "radius": 4, "h": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.green.regime_constant, 20.0);
        assert_eq!(c.domain, DomainSpec::Ball { radius: 4.0, h: 0.5, dim: 3 });
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = RunConfig::from_json(
            "{\"schema_version\": 1,\n \"domain\": {\"kind\": \"ball\", \"radius\": 4, \"h\": 0.5},\n \"colour\": 3}",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("colour") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn wrong_schema_version() {
        let err = RunConfig::from_json(
            r#"{"schema_version": 9, "domain": {"kind": "ball", "radius": 4, "h": 0.5}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("schema_version"));
    }

    #[test]
    fn manifest_config_is_extracted() {
        let text = r#"{"tool": "robinflux", "config": {"schema_version": 1, "seed": 5,
            "domain": {"kind": "prefractal", "base": 10, "depth": 1}}}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.seed, 5);
        assert!(matches!(c.resolved().domain, DomainSpec::Prefractal { h: Some(_), .. }));
    }
}
