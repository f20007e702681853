//! Scenario files: the JSON description of a multi-well run.

use std::path::Path;

use multiwell_core::asympt::{CouplingOptions, Extension};
use multiwell_core::grid::{EigenOptions, ResolventOptions};
use multiwell_core::perturb::{Field, Kernel, Perturbation};
use multiwell_core::Point;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const SCHEMA: &str = "multiwell.scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    #[serde(default)]
    pub name: String,
    pub dimension: usize,
    pub wells: Vec<WellSpec>,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    #[serde(flatten)]
    pub operator: OperatorSpec,
    pub support_radius: f64,
    pub position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    Potential {
        potential: String,
    },
    DivergenceForm {
        /// Row-major `n × n`.
        matrix: Vec<String>,
        drift: Vec<String>,
        #[serde(default = "zero")]
        scalar: String,
    },
    IntegralKernel {
        kernel: String,
    },
    Delta {
        strength: f64,
    },
}

fn zero() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
    /// Distance kept between every support and the box boundary.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Half-width of the single-well boxes; `support radius + margin` when
    /// absent.
    #[serde(default)]
    pub single_well_half_width: Option<f64>,
    #[serde(default = "default_budget")]
    pub memory_budget_bytes: u64,
}

fn default_margin() -> f64 {
    10.0
}

fn default_budget() -> u64 {
    multiwell_core::grid::DEFAULT_MEMORY_BUDGET
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionSpec {
    #[default]
    TailLaw,
    GreenRepresentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// Bound states computed per well.
    pub levels: usize,
    pub eigen_tol: Option<f64>,
    pub tol_essential: f64,
    pub cluster_tol: f64,
    pub resolvent_tol: f64,
    pub extension: ExtensionSpec,
    pub margin_factor: f64,
    pub hypothesis_trials: usize,
    pub second_order: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            levels: 4,
            eigen_tol: None,
            tol_essential: 1e-6,
            cluster_tol: 1e-6,
            resolvent_tol: 1e-9,
            extension: ExtensionSpec::TailLaw,
            margin_factor: 5.0,
            hypothesis_trials: 32,
            second_order: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Factors applied to every well position.
    pub scales: Vec<f64>,
    /// Rows with `l_X κ* ≥ onset` are expected to be in the asymptotic
    /// regime.
    pub onset: f64,
    /// Overrides the refinement-based noise floor estimate.
    pub noise_floor: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            scales: Vec::new(),
            onset: 4.0,
            noise_floor: None,
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if self.schema != SCHEMA {
            return bad(format!("schema {:?}, expected {SCHEMA:?}", self.schema));
        }
        if !(1..=3).contains(&self.dimension) {
            return bad(format!("dimension {} not in 1..=3", self.dimension));
        }
        if self.wells.is_empty() {
            return bad("at least one well is required".into());
        }
        if !(self.grid.h > 0.0) || !(self.grid.margin > 0.0) {
            return bad("grid h and margin must be positive".into());
        }
        if self.solver.levels == 0 {
            return bad("solver.levels must be at least 1".into());
        }
        for (i, w) in self.wells.iter().enumerate() {
            if w.position.len() != self.dimension {
                return bad(format!("well {i}: position has {} components", w.position.len()));
            }
            if matches!(w.operator, OperatorSpec::Delta { .. }) && self.dimension != 1 {
                return bad(format!("well {i}: point interactions need dimension 1"));
            }
            w.perturbation(self.dimension)
                .map_err(|e| HarnessError::Scenario(format!("well {i}: {e}")))?;
        }
        for i in 0..self.wells.len() {
            for j in i + 1..self.wells.len() {
                if self.wells[i].position == self.wells[j].position {
                    return bad(format!("wells {i} and {j} share a center"));
                }
            }
        }
        if self.sweep.scales.iter().any(|&s| !(s > 0.0)) {
            return bad("sweep scales must be positive".into());
        }
        if self.sweep.scales.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sweep scales must be increasing".into());
        }
        Ok(())
    }

    /// The same scenario with every position multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        for w in &mut s.wells {
            for c in &mut w.position {
                *c *= factor;
            }
        }
        s
    }

    pub fn wells(&self) -> Result<Vec<(Perturbation, Point)>, HarnessError> {
        self.wells
            .iter()
            .map(|w| Ok((w.perturbation(self.dimension)?, w.point())))
            .collect()
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tol: self.solver.eigen_tol,
            tol_essential: self.solver.tol_essential,
            seed: self.seed,
            ..Default::default()
        }
    }

    pub fn resolvent_options(&self) -> ResolventOptions {
        ResolventOptions {
            tol: self.solver.resolvent_tol,
            ..Default::default()
        }
    }

    pub fn coupling_options(&self) -> CouplingOptions {
        CouplingOptions {
            extension: match self.solver.extension {
                ExtensionSpec::TailLaw => Extension::TailLaw,
                ExtensionSpec::GreenRepresentation => Extension::GreenRepresentation,
            },
            margin_factor: self.solver.margin_factor,
        }
    }

    pub fn max_support_radius(&self) -> f64 {
        self.wells.iter().map(|w| w.support_radius).fold(0.0, f64::max)
    }

    /// Half-width shared by the single-well boxes, a multiple of `h`.
    pub fn single_well_half_width(&self) -> f64 {
        let l = self
            .grid
            .single_well_half_width
            .unwrap_or(self.max_support_radius() + self.grid.margin);
        round_up(l, self.grid.h)
    }

    /// `max |Xᵢ|_∞ + R + margin`, a multiple of `h` so that `h` is kept.
    pub fn multi_well_half_width(&self) -> f64 {
        let reach = self
            .wells
            .iter()
            .map(|w| w.position.iter().fold(0.0f64, |m, c| m.max(c.abs())))
            .fold(0.0, f64::max);
        round_up(reach + self.max_support_radius() + self.grid.margin, self.grid.h)
    }
}

fn round_up(l: f64, h: f64) -> f64 {
    let steps = (l / h - 1e-9).ceil().max(16.0);
    steps * h
}

impl WellSpec {
    pub fn point(&self) -> Point {
        let mut p = [0.0; 3];
        p[..self.position.len()].copy_from_slice(&self.position);
        p
    }

    pub fn perturbation(&self, dim: usize) -> Result<Perturbation, HarnessError> {
        let r = self.support_radius;
        let field = |s: &str| Field::expr(s).map_err(HarnessError::from);
        Ok(match &self.operator {
            OperatorSpec::Potential { potential } => Perturbation::potential(field(potential)?, r)?,
            OperatorSpec::DivergenceForm { matrix, drift, scalar } => Perturbation::divergence_form(
                dim,
                matrix.iter().map(|s| field(s)).collect::<Result<_, _>>()?,
                drift.iter().map(|s| field(s)).collect::<Result<_, _>>()?,
                field(scalar)?,
                r,
            )?,
            OperatorSpec::IntegralKernel { kernel } => Perturbation::integral_kernel(Kernel::expr(kernel)?, r, dim)?,
            OperatorSpec::Delta { strength } => Perturbation::delta(*strength, r)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"{
        "schema": "multiwell.scenario/1",
        "name": "pair",
        "dimension": 1,
        "wells": [
            {"kind": "delta", "strength": -2.0, "support_radius": 0.5, "position": [-3.0]},
            {"kind": "potential", "potential": "-5", "support_radius": 1.0, "position": [3.0]}
        ],
        "grid": {"h": 0.01},
        "sweep": {"scales": [1.0, 1.5, 2.0, 2.5]}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_json(PAIR).unwrap();
        assert_eq!(s.wells.len(), 2);
        assert_eq!(s.solver, SolverSpec::default());
        assert_eq!(s.grid.margin, 10.0);
        assert!(matches!(s.wells[1].operator, OperatorSpec::Potential { .. }));
        let l = s.multi_well_half_width();
        assert!((l - 14.0).abs() < 1e-12);
        assert!((s.scaled(2.0).wells[0].position[0] + 6.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let cases = [
            PAIR.replace("multiwell.scenario/1", "multiwell.scenario/0"),
            PAIR.replace("[-3.0]", "[-3.0, 1.0]"),
            PAIR.replace("\"-5\"", "\"-5 *\""),
            PAIR.replace("1.5, 2.0", "2.0, 1.5"),
            PAIR.replace("[-3.0]", "[3.0]"),
        ];
        for c in cases {
            assert!(matches!(Scenario::from_json(&c), Err(HarnessError::Scenario(_))), "{c}");
        }
    }
}
