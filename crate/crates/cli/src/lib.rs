//! Command drivers behind the `qef` binary.
//!
//! Each command returns its report as text so that the binary only handles
//! argument parsing, printing and exit codes.

pub mod schema;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qef_core::model::{self, ControllerParams};
use qef_core::{freq, grad, gramians, instances, oracle, synth, Category, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use schema::{parse_instance, InstanceFile, ProblemInstance};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    /// 2 validation, 3 inadmissible, 4 numerical, 5 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.category() {
                Category::Validation => 2,
                Category::Inadmissible => 3,
                Category::Numerical => 4,
            },
            CliError::Io { .. } => 5,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub fn load_instance(path: &Path) -> Result<ProblemInstance, CliError> {
    parse_instance(&read_file(path)?)
}

/// Numeric knobs that override the instance file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub theta: Option<f64>,
    /// Sets both the relative and the absolute quadrature tolerance.
    pub quad_tol: Option<f64>,
    pub lambda_max: Option<f64>,
    pub oracle_points: Option<usize>,
    pub oracle_horizon: Option<f64>,
}

impl Overrides {
    /// Applies the overrides and re-validates the affected settings.
    pub fn apply(&self, inst: &mut ProblemInstance) -> Result<(), CliError> {
        let bad = |msg: &str| CliError::Core(Error::Validation(msg.into()));
        if let Some(t) = self.theta {
            if !(t > 0.0 && t.is_finite()) {
                return Err(bad("--theta must be positive"));
            }
            inst.theta = Some(t);
        }
        if let Some(t) = self.quad_tol {
            inst.quadrature.rel_tol = t;
            inst.quadrature.abs_tol = t;
        }
        if let Some(l) = self.lambda_max {
            if !(l > 0.0 && l.is_finite()) {
                return Err(bad("--lambda-max must be positive"));
            }
            inst.quadrature.lambda_max = Some(l);
        }
        inst.quadrature.validate()?;
        if let Some(n) = self.oracle_points {
            if n < 2 {
                return Err(bad("--oracle-N must be at least 2"));
            }
            inst.oracle_points = n;
        }
        if let Some(t) = self.oracle_horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(bad("--oracle-T must be positive"));
            }
            inst.oracle_horizon = Some(t);
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn require_theta(inst: &ProblemInstance) -> Result<f64, CliError> {
    inst.theta.ok_or_else(|| {
        Error::Validation("theta is required (instance key or --theta)".into()).into()
    })
}

/// The instance controller, or the LQG controller when none is given.
fn controller_or_lqg(inst: &ProblemInstance) -> Result<(ControllerParams, &'static str), CliError> {
    match &inst.controller {
        Some(c) => Ok((c.clone(), "instance")),
        None => Ok((synth::lqg_controller(&inst.plant, &inst.weights)?, "lqg")),
    }
}

/// Dimensions and, when a controller is given, its closed-loop stability.
pub fn cmd_validate(inst: &ProblemInstance) -> Result<String, CliError> {
    let mut out = String::new();
    let p = &inst.plant;
    writeln!(
        out,
        "valid: n={} m={} d={} r={} nu={}",
        p.n(),
        p.m(),
        p.d(),
        p.r(),
        inst.nu()
    )
    .unwrap();
    if let Some(c) = &inst.controller {
        let cl = model::assemble_closed_loop(p, &inst.weights, c)?;
        writeln!(
            out,
            "controller: spectral_abscissa={}",
            num(model::spectral_abscissa(&cl.a))
        )
        .unwrap();
        if !cl.is_hurwitz() {
            return Err(Error::NotStabilizing(model::spectral_abscissa(&cl.a)).into());
        }
    }
    Ok(out)
}

/// `key,value` lines: `Υ`, `Υ₀` and the admissibility report.
pub fn cmd_evaluate(inst: &ProblemInstance) -> Result<String, CliError> {
    let theta = require_theta(inst)?;
    let (ctrl, source) = controller_or_lqg(inst)?;
    let cl = model::assemble_closed_loop(&inst.plant, &inst.weights, &ctrl)?;
    if !cl.is_hurwitz() {
        return Err(Error::NotStabilizing(model::spectral_abscissa(&cl.a)).into());
    }
    let grid = freq::admissibility_grid(&cl, freq::default_lambda_max(&cl, &inst.quadrature));
    let report = freq::check_admissible(&cl, theta, &grid);
    let ups0 = gramians::lqg_cost(&cl)?;
    let mut out = String::new();
    writeln!(out, "key,value").unwrap();
    writeln!(out, "controller,{source}").unwrap();
    writeln!(out, "theta,{}", num(theta)).unwrap();
    writeln!(out, "spectral_abscissa,{}", num(report.spectral_abscissa)).unwrap();
    writeln!(out, "spec1_sup,{}", num(report.spec1_sup)).unwrap();
    writeln!(out, "spec1_argmax,{}", num(report.spec1_argmax)).unwrap();
    writeln!(out, "psi_min_rel_sigma,{}", num(report.psi_min_rel_sigma)).unwrap();
    writeln!(
        out,
        "spectrally_admissible,{}",
        report.spectrally_admissible()
    )
    .unwrap();
    writeln!(out, "strictly_admissible,{}", report.strictly_admissible()).unwrap();
    writeln!(out, "ups0,{}", num(ups0)).unwrap();
    let rate = freq::qef_growth_rate_report(&cl, theta, &inst.quadrature)?;
    writeln!(out, "ups,{}", num(rate.ups)).unwrap();
    writeln!(out, "ups_over_theta,{}", num(rate.ups / theta)).unwrap();
    writeln!(out, "quad_abs_error,{}", num(rate.abs_error)).unwrap();
    Ok(out)
}

/// Analytic against central-difference derivatives, one CSV row per entry.
pub fn cmd_grad_check(inst: &ProblemInstance) -> Result<(String, f64), CliError> {
    let theta = require_theta(inst)?;
    let (ctrl, _) = controller_or_lqg(inst)?;
    let check = grad::grad_check(&inst.plant, &inst.weights, &ctrl, theta, &inst.quadrature)?;
    let mut out = String::from("block,row,col,analytic,finite_difference\n");
    let blocks = [
        ("a", &check.analytic.a, &check.finite_difference.a),
        ("b", &check.analytic.b, &check.finite_difference.b),
        ("c", &check.analytic.c, &check.finite_difference.c),
    ];
    for (name, an, fd) in blocks {
        for i in 0..an.nrows() {
            for j in 0..an.ncols() {
                writeln!(
                    out,
                    "{name},{i},{j},{},{}",
                    num(an[(i, j)]),
                    num(fd[(i, j)])
                )
                .unwrap();
            }
        }
    }
    Ok((out, check.max_rel_error))
}

/// Horizons `T/4, T/2, T` with the default `T = 40 / |Re λmax(𝒜)|`.
pub fn cmd_oracle_compare(inst: &ProblemInstance) -> Result<String, CliError> {
    let theta = require_theta(inst)?;
    let (ctrl, _) = controller_or_lqg(inst)?;
    let cl = model::assemble_closed_loop(&inst.plant, &inst.weights, &ctrl)?;
    if !cl.is_hurwitz() {
        return Err(Error::NotStabilizing(model::spectral_abscissa(&cl.a)).into());
    }
    let ups = freq::qef_growth_rate(&cl, theta, &inst.quadrature)?;
    let t = inst
        .oracle_horizon
        .unwrap_or_else(|| oracle::default_horizon(&cl));
    let horizons = [t / 4.0, t / 2.0, t];
    let series = oracle::growth_rate_estimate(&cl, theta, &horizons, inst.oracle_points)?;
    let mut out = String::from("T,lnXi_over_T,ups_freq,rel_gap\n");
    for (t, est) in series {
        let gap = if ups != 0.0 {
            (est - ups).abs() / ups.abs()
        } else {
            (est - ups).abs()
        };
        writeln!(out, "{},{},{},{}", num(t), num(est), num(ups), num(gap)).unwrap();
    }
    Ok(out)
}

/// Output of [`cmd_synthesize`].
#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub trace_csv: String,
    /// The input instance with the synthesized controller in place.
    pub instance_json: String,
    pub summary: String,
}

pub fn cmd_synthesize(inst: &ProblemInstance) -> Result<SynthesisOutput, CliError> {
    let theta = require_theta(inst)?;
    let cfg = inst.synthesis_config(theta)?;
    let rep = synth::synthesize(&inst.plant, &inst.weights, &cfg)?;
    let mut trace = String::from("iter,ups,residual,step\n");
    for it in &rep.iterates {
        writeln!(
            trace,
            "{},{},{},{}",
            it.iter,
            num(it.ups),
            num(it.residual),
            num(it.step)
        )
        .unwrap();
    }
    let mut file = inst.file.clone();
    file.theta = Some(theta);
    file.controller = Some(schema::ControllerFile::from_params(&rep.controller));
    let mut summary = String::new();
    writeln!(summary, "termination,{}", rep.termination).unwrap();
    writeln!(
        summary,
        "iterations,{}",
        rep.iterates.len().saturating_sub(1)
    )
    .unwrap();
    if let Some(u) = rep.initial_ups {
        writeln!(summary, "initial_ups,{}", num(u)).unwrap();
    }
    writeln!(summary, "final_ups,{}", num(rep.final_ups)).unwrap();
    writeln!(summary, "final_residual,{}", num(rep.final_residual)).unwrap();
    Ok(SynthesisOutput {
        trace_csv: trace,
        instance_json: file.to_json(),
        summary,
    })
}

/// A seeded random admissible instance (`n = m = 2`, `d = r = 1`, `ν = 3`)
/// with its perturbed LQG controller, or the canonical plant.
pub fn cmd_generate(seed: Option<u64>) -> Result<String, CliError> {
    let file = match seed {
        None => InstanceFile::from_parts(
            &instances::canonical_plant(),
            &instances::canonical_weights(),
            Some(0.1),
        ),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (spec, weights, lqg, theta) = loop {
                let spec = instances::random_plant_spec(&mut rng, 2, 2, 1, 1);
                let weights = instances::random_weights(&mut rng, 2, 1, 3);
                let Ok(plant) = model::derive_plant(&spec) else {
                    continue;
                };
                let Ok(lqg) = synth::lqg_controller(&plant, &weights) else {
                    continue;
                };
                let cl = model::assemble_closed_loop(&plant, &weights, &lqg)?;
                match freq::phi_peak(&cl) {
                    Ok(peak) if peak > 0.0 => break (spec, weights, lqg, 0.25 / peak),
                    _ => continue,
                }
            };
            let mut file = InstanceFile::from_parts(&spec, &weights, Some(theta));
            file.controller = Some(schema::ControllerFile::from_params(&lqg));
            file
        }
    };
    Ok(file.to_json())
}

/// Writes `contents` to `path`, or returns it for stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<Option<String>, CliError> {
    match path {
        Some(p) => write_file(p, contents).map(|_| None),
        None => Ok(Some(contents.to_string())),
    }
}
