//! Experiment configuration: a TOML file plus command-line overrides.
//!
//! Every field has a protocol-appropriate default, so each subcommand runs
//! out of the box; a config file overrides defaults and flags override the
//! file. Validation failures name the offending field path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{make_rotation_2d, AnisotropicGaussian, StudentTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    ZigZag,
    Bps,
}

impl SamplerKind {
    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::ZigZag => "zigzag",
            SamplerKind::Bps => "bps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    Gaussian,
    Student,
}

impl DistributionKind {
    pub fn label(&self) -> &'static str {
        match self {
            DistributionKind::Gaussian => "gaussian",
            DistributionKind::Student => "student",
        }
    }
}

/// Test function for asymptotic-variance estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    /// Second moment of the slow coordinate, `f(y) = y₁²` (centered
    /// empirically by the estimator).
    #[default]
    Y1Squared,
    /// The slow coordinate itself.
    Y1,
}

impl Observable {
    pub fn label(&self) -> &'static str {
        match self {
            Observable::Y1Squared => "y1-squared",
            Observable::Y1 => "y1",
        }
    }

    pub fn eval(&self, row: &[f64]) -> f64 {
        match self {
            Observable::Y1Squared => row[0] * row[0],
            Observable::Y1 => row[0],
        }
    }
}

/// Target block: either the two-dimensional `theta` shortcut or an explicit
/// rotation matrix, plus per-block scales and the anisotropy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub dim: usize,
    /// Rotation angle for the canonical two-dimensional family.
    pub theta: Option<f64>,
    /// Explicit row-major rotation matrix (overrides `theta`).
    pub rotation: Option<Vec<Vec<f64>>>,
    pub lambda_k: Vec<f64>,
    pub lambda_l: Vec<f64>,
    /// Anisotropy; protocols fall back to their own default when unset.
    pub epsilon: Option<f64>,
    /// Degrees of freedom for Student runs.
    pub student_nu: Option<f64>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            theta: Some(std::f64::consts::FRAC_PI_6),
            rotation: None,
            lambda_k: vec![1.0],
            lambda_l: vec![1.0],
            epsilon: None,
            student_nu: None,
        }
    }
}

impl TargetConfig {
    /// Build the Gaussian target, optionally overriding `theta`/`epsilon`
    /// (scan protocols vary them per run).
    pub fn build(&self, theta: Option<f64>, epsilon: Option<f64>) -> Result<AnisotropicGaussian> {
        let eps = epsilon.or(self.epsilon).ok_or_else(|| Error::Config {
            path: "target.epsilon".into(),
            message: "no anisotropy given and the protocol supplies none".into(),
        })?;
        if !(eps > 0.0) {
            return Err(Error::Config {
                path: "target.epsilon".into(),
                message: format!("must be positive, got {eps}"),
            });
        }
        let rotation = match (&self.rotation, theta.or(self.theta)) {
            (Some(rows), _) => {
                if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                    return Err(Error::Config {
                        path: "target.rotation".into(),
                        message: format!("must be a {0}x{0} matrix", self.dim),
                    });
                }
                DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j])
            }
            (None, Some(th)) => {
                if self.dim != 2 {
                    return Err(Error::Config {
                        path: "target.theta".into(),
                        message: "the theta shortcut needs dim = 2".into(),
                    });
                }
                make_rotation_2d(th)
            }
            (None, None) => {
                return Err(Error::Config {
                    path: "target".into(),
                    message: "either theta or rotation must be given".into(),
                })
            }
        };
        if self.lambda_k.len() + self.lambda_l.len() != self.dim {
            return Err(Error::Config {
                path: "target.lambda_k/lambda_l".into(),
                message: format!(
                    "block sizes {} + {} must sum to dim = {}",
                    self.lambda_k.len(),
                    self.lambda_l.len(),
                    self.dim
                ),
            });
        }
        AnisotropicGaussian::new(
            rotation,
            DVector::from_vec(self.lambda_k.clone()),
            DVector::from_vec(self.lambda_l.clone()),
            eps,
        )
    }

    pub fn build_student(
        &self,
        theta: Option<f64>,
        epsilon: Option<f64>,
    ) -> Result<StudentTarget> {
        let nu = self.student_nu.ok_or_else(|| Error::Config {
            path: "target.student_nu".into(),
            message: "required for student runs".into(),
        })?;
        StudentTarget::new(self.build(theta, epsilon)?, nu)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Time horizon per replica. Scans that tie the horizon to `ε`
    /// (`avar-scan`) treat this as an override when set.
    pub horizon: Option<f64>,
    /// Refreshment rate for Bouncy Particle runs; protocol default is 1.0
    /// except for the fluid-limit comparison, which uses 0.
    pub rho: Option<f64>,
    pub replicas: Option<usize>,
    pub master_seed: u64,
    /// Draw the initial state from the stationary law (otherwise the origin
    /// with deterministic velocity).
    pub stationary_init: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: None,
            rho: None,
            replicas: None,
            master_seed: 0x5EED_2024,
            stationary_init: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Angles for `omega-scan`.
    pub thetas: Option<Vec<f64>>,
    /// Anisotropies for `jump-count`, `avar-scan`, `stationarity`.
    pub epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Grid spacing for series extraction. Protocols pick their own default
    /// when unset: quadratic variation uses `min(10⁻³·T/2, 10⁻³)` in
    /// rescaled time, batch means use 10⁻².
    pub delta: Option<f64>,
    pub n_batches: usize,
    pub observable: Observable,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { delta: None, n_batches: 30, observable: Observable::Y1Squared }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// Write one event-log CSV per replica.
    pub emit_events: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), emit_events: false }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sampler: Option<SamplerKind>,
    pub distribution: Option<DistributionKind>,
    pub target: TargetConfig,
    pub run: RunConfig,
    pub grid: GridConfig,
    pub analysis: AnalysisConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: "<config file>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn sampler_or(&self, default: SamplerKind) -> SamplerKind {
        self.sampler.unwrap_or(default)
    }

    pub fn distribution_or(&self, default: DistributionKind) -> DistributionKind {
        self.distribution.unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.run.horizon {
            if !(h > 0.0) {
                return Err(Error::Config {
                    path: "run.horizon".into(),
                    message: format!("must be positive, got {h}"),
                });
            }
        }
        if let Some(r) = self.run.replicas {
            if r == 0 {
                return Err(Error::Config {
                    path: "run.replicas".into(),
                    message: "must be at least 1".into(),
                });
            }
        }
        if let Some(rho) = self.run.rho {
            if !(rho >= 0.0) {
                return Err(Error::Config {
                    path: "run.rho".into(),
                    message: format!("must be nonnegative, got {rho}"),
                });
            }
        }
        if let Some(eps) = &self.grid.epsilons {
            if eps.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::Config {
                    path: "grid.epsilons".into(),
                    message: "all epsilons must be positive".into(),
                });
            }
        }
        if let Some(d) = self.analysis.delta {
            if !(d > 0.0) {
                return Err(Error::Config {
                    path: "analysis.delta".into(),
                    message: format!("must be positive, got {d}"),
                });
            }
        }
        // target consistency, including epsilon positivity when given
        self.target.build(None, Some(self.target.epsilon.unwrap_or(0.1)))?;
        Ok(())
    }
}
