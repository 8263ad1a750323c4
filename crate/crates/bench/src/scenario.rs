//! Scenario files: array, taper, failures, metric and solver overrides.

use std::path::Path;

use mcfc_core::{
    beamwidth, dolph_chebyshev, pattern_db, sidelobe_region, uniform_positions, AngularRegion,
    ArrayGeometry, Excitations, FailureScenario, MetricSpec, SolverConfig, PATTERN_GRID_POINTS,
    REGION_GRID_POINTS,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

fn default_spacing() -> f64 {
    mcfc_core::DEFAULT_SPACING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub n_elements: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
    pub taper: TaperSpec,
    #[serde(default)]
    pub faulty_indices: Vec<usize>,
    pub metric: MetricSection,
    #[serde(default)]
    pub solver: SolverOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaperSpec {
    DolphChebyshev {
        sll_db: f64,
    },
    Explicit {
        weights: Vec<f64>,
        #[serde(default)]
        weights_imag: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MetricKindSpec {
    #[default]
    MaxSll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    #[serde(default)]
    pub kind: MetricKindSpec,
    pub target_db: f64,
    /// Defaults to the beamwidth of a Dolph-Chebyshev array with as many
    /// elements as there are working ones, at the original sidelobe level.
    #[serde(default)]
    pub bw_target_deg: Option<f64>,
    /// Explicit `u` samples; overrides the beamwidth-derived region.
    #[serde(default)]
    pub region: Option<Vec<f64>>,
    #[serde(default)]
    pub region_density: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub max_iterations: Option<usize>,
    pub min_step: Option<f64>,
    pub optimality_tol: Option<f64>,
    pub constraint_tol_db: Option<f64>,
    pub zero_threshold: Option<f64>,
    pub barrier_initial: Option<f64>,
    pub barrier_growth: Option<f64>,
    pub complex_corrections: Option<bool>,
}

impl SolverOverrides {
    pub fn apply(&self, base: SolverConfig) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iterations.unwrap_or(base.max_iterations),
            min_step: self.min_step.unwrap_or(base.min_step),
            optimality_tol: self.optimality_tol.unwrap_or(base.optimality_tol),
            constraint_tol_db: self.constraint_tol_db.unwrap_or(base.constraint_tol_db),
            zero_threshold: self.zero_threshold.unwrap_or(base.zero_threshold),
            barrier_initial: self.barrier_initial.unwrap_or(base.barrier_initial),
            barrier_growth: self.barrier_growth.unwrap_or(base.barrier_growth),
            complex_corrections: self.complex_corrections.unwrap_or(base.complex_corrections),
        }
    }
}

/// Everything a correction run needs, derived from a spec.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub geometry: ArrayGeometry,
    pub original: Excitations,
    pub scenario: FailureScenario,
    pub metric: MetricSpec,
    pub config: SolverConfig,
    /// Sidelobe level of the original array, also the beamwidth threshold.
    pub original_sll_db: f64,
    pub bw_target_deg: Option<f64>,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Parse(m) => HarnessError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |m: String| Err(HarnessError::Invalid(m));
        if self.name.trim().is_empty() {
            return invalid("scenario name is empty".into());
        }
        if self.n_elements < 2 {
            return invalid(format!(
                "n_elements must be at least 2, got {}",
                self.n_elements
            ));
        }
        if !(self.spacing_wavelengths > 0.0) || !self.spacing_wavelengths.is_finite() {
            return invalid("spacing_wavelengths must be positive".into());
        }
        let mut seen = vec![false; self.n_elements + 1];
        for &f in &self.faulty_indices {
            if f == 0 || f > self.n_elements {
                return invalid(format!("faulty index {f} outside 1..={}", self.n_elements));
            }
            if seen[f] {
                return invalid(format!("faulty index {f} listed twice"));
            }
            seen[f] = true;
        }
        if self.faulty_indices.len() >= self.n_elements {
            return invalid("every element is faulty".into());
        }
        match &self.taper {
            TaperSpec::DolphChebyshev { sll_db } => {
                if !(*sll_db < 0.0) {
                    return invalid("Dolph-Chebyshev sll_db must be negative".into());
                }
            }
            TaperSpec::Explicit {
                weights,
                weights_imag,
            } => {
                if weights.len() != self.n_elements {
                    return invalid(format!(
                        "{} explicit weights for {} elements",
                        weights.len(),
                        self.n_elements
                    ));
                }
                if let Some(im) = weights_imag {
                    if im.len() != weights.len() {
                        return invalid("weights_imag length differs from weights".into());
                    }
                }
            }
        }
        if !self.metric.target_db.is_finite() {
            return invalid("target_db must be finite".into());
        }
        Ok(())
    }

    pub fn original_weights(&self) -> Result<Excitations, HarnessError> {
        Ok(match &self.taper {
            TaperSpec::DolphChebyshev { sll_db } => dolph_chebyshev(self.n_elements, *sll_db)?,
            TaperSpec::Explicit {
                weights,
                weights_imag,
            } => {
                let im = weights_imag
                    .clone()
                    .unwrap_or_else(|| vec![0.0; weights.len()]);
                Excitations::new(
                    weights
                        .iter()
                        .zip(&im)
                        .map(|(&re, &im)| Complex64::new(re, im))
                        .collect(),
                )?
            }
        })
    }

    /// Builds geometry, weights, failure mask and metric region.
    pub fn build(&self) -> Result<BuiltScenario, HarnessError> {
        self.validate()?;
        let geometry = uniform_positions(self.n_elements, self.spacing_wavelengths)?;
        let original = self.original_weights()?;
        let scenario = FailureScenario::from_faulty_indices(self.n_elements, &self.faulty_indices)?;
        let original_sll_db = match &self.taper {
            TaperSpec::DolphChebyshev { sll_db } => *sll_db,
            TaperSpec::Explicit { .. } => peak_sidelobe_beyond_null(&geometry, &original)?,
        };
        let config = self.solver.apply(SolverConfig::default());
        config.validate()?;

        let (region, bw_target_deg) = match &self.metric.region {
            Some(samples) => (
                AngularRegion::new(samples.clone())?,
                self.metric.bw_target_deg,
            ),
            None => {
                let bw = match self.metric.bw_target_deg {
                    Some(bw) => bw,
                    None => default_bw_target(
                        scenario.n_reconfigurable(),
                        self.spacing_wavelengths,
                        original_sll_db,
                    )?,
                };
                let density = self.metric.region_density.unwrap_or(REGION_GRID_POINTS);
                (sidelobe_region(bw, density)?, Some(bw))
            }
        };
        let metric = match self.metric.kind {
            MetricKindSpec::MaxSll => MetricSpec::max_sll(region, self.metric.target_db)?,
        };
        Ok(BuiltScenario {
            geometry,
            original,
            scenario,
            metric,
            config,
            original_sll_db,
            bw_target_deg,
        })
    }
}

/// Beamwidth of an `n`-element Dolph-Chebyshev array at its own sidelobe level.
pub fn default_bw_target(n: usize, spacing: f64, sll_db: f64) -> Result<f64, HarnessError> {
    let g = uniform_positions(n, spacing)?;
    let w = dolph_chebyshev(n, sll_db)?;
    let grid = AngularRegion::uniform_grid(PATTERN_GRID_POINTS)?;
    Ok(beamwidth(&g, &w, sll_db, &grid)?)
}

/// Highest pattern level outside the first nulls around broadside.
fn peak_sidelobe_beyond_null(
    geometry: &ArrayGeometry,
    weights: &Excitations,
) -> Result<f64, HarnessError> {
    let grid = AngularRegion::uniform_grid(20_001)?;
    let db = pattern_db(geometry, weights, &grid)?;
    let centre = db.len() / 2;
    let mut right = centre;
    while right + 1 < db.len() && db[right + 1] <= db[right] {
        right += 1;
    }
    let mut left = centre;
    while left > 0 && db[left - 1] <= db[left] {
        left -= 1;
    }
    let peak = db[..left]
        .iter()
        .chain(&db[right + 1..])
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if peak.is_finite() {
        Ok(peak)
    } else {
        Err(HarnessError::Invalid(
            "pattern has no sidelobes to set a default level".into(),
        ))
    }
}
