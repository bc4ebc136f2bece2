//! JSON problem-instance files.
//!
//! Matrices are stored as row-major flat arrays; their shapes follow from the
//! declared dimensions `n, m, d, r` and, for the weights, from `len(S) / n`.

use qef_core::freq::QuadratureConfig;
use qef_core::model::{self, ControllerParams, DerivedPlant, PlantSpec, Weights};
use qef_core::synth::SynthesisConfig;
use qef_core::{oracle, Error, RMat};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantFile {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub r: usize,
    #[serde(rename = "Theta")]
    pub ccr: Vec<f64>,
    #[serde(rename = "R")]
    pub energy: Vec<f64>,
    #[serde(rename = "M")]
    pub field_coupling: Vec<f64>,
    #[serde(rename = "N")]
    pub control_coupling: Vec<f64>,
    #[serde(rename = "D")]
    pub measurement: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsFile {
    #[serde(rename = "S")]
    pub s: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerFile {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_subdivisions: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backtrack_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub armijo_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_continuation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

/// The on-disk form of a problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub plant: PlantFile,
    pub weights: WeightsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisFile>,
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub file: InstanceFile,
    pub spec: PlantSpec,
    pub plant: DerivedPlant,
    pub weights: Weights,
    pub theta: Option<f64>,
    pub controller: Option<ControllerParams>,
    pub quadrature: QuadratureConfig,
    pub oracle_horizon: Option<f64>,
    pub oracle_points: usize,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Validation(msg.into()))
}

fn matrix(name: &str, data: &[f64], rows: usize, cols: usize) -> Result<RMat, CliError> {
    if data.len() != rows * cols {
        return Err(invalid(format!(
            "{name} must hold {rows}x{cols} = {} entries, found {}",
            rows * cols,
            data.len()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{name} has non-finite entries")));
    }
    Ok(RMat::from_row_slice(rows, cols, data))
}

/// Row-major flattening, the inverse of the loader's matrix reader.
pub fn row_major(m: &RMat) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

impl ControllerFile {
    pub fn from_params(c: &ControllerParams) -> Self {
        Self {
            a: row_major(&c.a),
            b: row_major(&c.b),
            c: row_major(&c.c),
        }
    }
}

impl InstanceFile {
    pub fn from_parts(spec: &PlantSpec, weights: &Weights, theta: Option<f64>) -> Self {
        Self {
            plant: PlantFile {
                n: spec.n(),
                m: spec.m(),
                d: spec.d(),
                r: spec.r(),
                ccr: row_major(&spec.ccr),
                energy: row_major(&spec.energy),
                field_coupling: row_major(&spec.field_coupling),
                control_coupling: row_major(&spec.control_coupling),
                measurement: row_major(&spec.measurement),
            },
            weights: WeightsFile {
                s: row_major(&weights.s),
                k: row_major(&weights.k),
            },
            theta,
            controller: None,
            quadrature: None,
            oracle: None,
            synthesis: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(invalid(format!("{name} must be positive"))),
        _ => Ok(()),
    }
}

/// Parses and validates an instance held in memory.
pub fn parse_instance(text: &str) -> Result<ProblemInstance, CliError> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| invalid(format!("instance does not match the schema: {e}")))?;
    validate_instance(file)
}

/// Re-checks every model invariant of a deserialized instance.
pub fn validate_instance(file: InstanceFile) -> Result<ProblemInstance, CliError> {
    let p = &file.plant;
    let (n, m, d, r) = (p.n, p.m, p.d, p.r);
    if n == 0 || n % 2 != 0 {
        return Err(invalid(format!("n must be even and positive, got {n}")));
    }
    if m == 0 || m % 2 != 0 {
        return Err(invalid(format!("m must be even and positive, got {m}")));
    }
    if r == 0 || 2 * r > m {
        return Err(invalid(format!(
            "D must have r <= m/2 rows (1 <= r <= {}), got r = {r}",
            m / 2
        )));
    }
    if d == 0 {
        return Err(invalid("d must be positive"));
    }
    let spec = PlantSpec {
        ccr: matrix("Theta", &p.ccr, n, n)?,
        energy: matrix("R", &p.energy, n, n)?,
        field_coupling: matrix("M", &p.field_coupling, m, n)?,
        control_coupling: matrix("N", &p.control_coupling, d, n)?,
        measurement: matrix("D", &p.measurement, r, m)?,
    };
    let plant = model::derive_plant(&spec)?;

    let w = &file.weights;
    if w.s.is_empty() || !w.s.len().is_multiple_of(n) {
        return Err(invalid(format!(
            "S must have n = {n} columns, found {} entries",
            w.s.len()
        )));
    }
    let nu = w.s.len() / n;
    let weights = Weights {
        s: matrix("S", &w.s, nu, n)?,
        k: matrix("K", &w.k, nu, d)?,
    };
    let ktk = weights.k.transpose() * &weights.k;
    let min_eig = ktk
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig.is_nan() || min_eig <= 1e-12 {
        return Err(invalid(format!(
            "K^T K must be positive definite; smallest eigenvalue {min_eig:.3e}"
        )));
    }

    positive("theta", file.theta)?;
    let controller = match &file.controller {
        Some(c) => Some(ControllerParams {
            a: matrix("a", &c.a, n, n)?,
            b: matrix("b", &c.b, n, r)?,
            c: matrix("c", &c.c, d, n)?,
        }),
        None => None,
    };

    let mut quadrature = QuadratureConfig::tight();
    if let Some(q) = &file.quadrature {
        positive("quadrature.lambda_max", q.lambda_max)?;
        if let Some(v) = q.abs_tol {
            quadrature.abs_tol = v;
        }
        if let Some(v) = q.rel_tol {
            quadrature.rel_tol = v;
        }
        if let Some(v) = q.max_subdivisions {
            quadrature.max_subdivisions = v;
        }
        quadrature.lambda_max = q.lambda_max;
    }
    quadrature.validate()?;

    let oracle_file = file.oracle.clone().unwrap_or_default();
    positive("oracle.T", oracle_file.horizon)?;
    let oracle_points = oracle_file.points.unwrap_or(oracle::DEFAULT_POINTS);
    if oracle_points < 2 {
        return Err(invalid("oracle.N must be at least 2"));
    }

    let instance = ProblemInstance {
        theta: file.theta,
        spec,
        plant,
        weights,
        controller,
        quadrature,
        oracle_horizon: oracle_file.horizon,
        oracle_points,
        file,
    };
    if instance.file.synthesis.is_some() {
        instance.synthesis_config(1.0)?;
    }
    Ok(instance)
}

impl ProblemInstance {
    /// Synthesis settings from the file on top of the defaults.
    pub fn synthesis_config(&self, theta: f64) -> Result<SynthesisConfig, CliError> {
        let mut cfg = SynthesisConfig::new(theta);
        cfg.quad = self.quadrature.clone();
        cfg.initial = self.controller.clone();
        if let Some(s) = &self.file.synthesis {
            if let Some(v) = s.max_iters {
                cfg.max_iters = v;
            }
            if let Some(v) = s.grad_tol {
                cfg.grad_tol = v;
            }
            if let Some(v) = s.initial_step {
                cfg.initial_step = v;
            }
            if let Some(v) = s.backtrack_factor {
                cfg.backtrack_factor = v;
            }
            if let Some(v) = s.armijo_c {
                cfg.armijo_c = v;
            }
            if let Some(v) = s.margin {
                cfg.margin = v;
            }
            cfg.theta_continuation = s.theta_continuation.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn nu(&self) -> usize {
        self.weights.nu()
    }
}
