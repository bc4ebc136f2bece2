//! Controller synthesis: the classical LQG initializer and gradient descent
//! on the growth rate over the controller triple `(a, b, c)`.

use crate::error::{Error, Result};
use crate::freq::{self, QuadratureConfig};
use crate::grad;
use crate::model::{self, ControllerParams, DerivedPlant, Weights};
use crate::riccati::solve_care;
use crate::RMat;

/// Smallest trial step before the line search gives up.
pub const MIN_STEP: f64 = 1e-14;

fn spd_inverse(m: &RMat, what: &str) -> Result<RMat> {
    let sym = (m + m.transpose()) * 0.5;
    let chol = sym
        .cholesky()
        .ok_or_else(|| Error::Validation(format!("{what} must be positive definite")))?;
    let diag_min = chol
        .l()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, x| a.min(x.abs()));
    let diag_max = chol
        .l()
        .diagonal()
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()));
    if diag_min <= 1e-8 * diag_max {
        return Err(Error::Validation(format!("{what} is numerically singular")));
    }
    Ok(chol.inverse())
}

/// The classical LQG controller for `dx = (Ax + Eu)dt + B dw`,
/// `dy = Cx dt + D dw` with cost density `‖Sx + Ku‖²`:
/// `a = A − EF − LC`, `b = L`, `c = −F`.
pub fn lqg_controller(plant: &DerivedPlant, weights: &Weights) -> Result<ControllerParams> {
    let (a, b, c, d, e) = (&plant.a, &plant.b, &plant.c, &plant.d, &plant.e);
    let (s, k) = (&weights.s, &weights.k);
    if s.ncols() != plant.n() || k.ncols() != plant.d() || s.nrows() != k.nrows() {
        return Err(Error::Dimension("weights do not match the plant".into()));
    }

    // filter: AP + PAᵀ + BBᵀ − (PCᵀ + BDᵀ)(DDᵀ)⁻¹(CP + DBᵀ) = 0
    let vinv = spd_inverse(&(d * d.transpose()), "D D^T")?;
    let cross = b * d.transpose() * &vinv;
    let af = a - &cross * c;
    let qf = b * b.transpose() - &cross * d * b.transpose();
    let gf = c.transpose() * &vinv * c;
    let p = solve_care(&af.transpose(), &gf, &((&qf + qf.transpose()) * 0.5))
        .map_err(|e| Error::Riccati(format!("filter equation: {e}")))?;
    let gain_l = (&p * c.transpose() + b * d.transpose()) * &vinv;

    // control: AᵀX + XA + SᵀS − (XE + SᵀK)(KᵀK)⁻¹(EᵀX + KᵀS) = 0
    let rinv = spd_inverse(&(k.transpose() * k), "K^T K")?;
    let ac = a - e * &rinv * k.transpose() * s;
    let qc = s.transpose() * s - s.transpose() * k * &rinv * k.transpose() * s;
    let gc = e * &rinv * e.transpose();
    let x = solve_care(&ac, &gc, &((&qc + qc.transpose()) * 0.5))
        .map_err(|e| Error::Riccati(format!("control equation: {e}")))?;
    let gain_f = &rinv * (e.transpose() * &x + k.transpose() * s);

    Ok(ControllerParams {
        a: a - e * &gain_f - &gain_l * c,
        b: gain_l,
        c: -gain_f,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub theta: f64,
    /// Iteration budget per continuation stage.
    pub max_iters: usize,
    /// Stationarity: `optimality_residual ≤ grad_tol · (1 + |Υ|)`.
    pub grad_tol: f64,
    /// First trial step is `initial_step / (1 + ‖grad‖)`.
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    /// Ascending θ values ending at `theta`; `None` means `θ` alone, or the
    /// ladder `θ/8, θ/4, θ/2, θ` when the initializer is inadmissible at `θ`.
    pub theta_continuation: Option<Vec<f64>>,
    /// Safety margin on the spectral condition for accepted iterates.
    pub margin: f64,
    pub quad: QuadratureConfig,
    /// Starting controller; `None` selects the LQG controller.
    pub initial: Option<ControllerParams>,
    /// Finite-difference check of the directional derivative every this many iterations.
    pub direction_check_every: Option<usize>,
}

impl SynthesisConfig {
    pub fn new(theta: f64) -> Self {
        Self {
            theta,
            max_iters: 500,
            grad_tol: 1e-6,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            theta_continuation: None,
            margin: freq::SPEC_MARGIN,
            quad: QuadratureConfig::tight(),
            initial: None,
            direction_check_every: Some(10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad("theta must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.grad_tol > 0.0 && self.initial_step > 0.0) {
            return bad("grad_tol and initial_step must be positive");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.margin >= 0.0 && self.margin < 1.0) {
            return bad("margin must lie in [0, 1)");
        }
        if let Some(ladder) = &self.theta_continuation {
            if ladder.is_empty() || ladder.iter().any(|t| !(*t > 0.0)) {
                return bad("theta_continuation must hold positive values");
            }
            if ladder.windows(2).any(|w| w[1] <= w[0]) {
                return bad("theta_continuation must be strictly ascending");
            }
        }
        self.quad.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stationary,
    MaxIterations,
    LineSearchStalled,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Stationary => "stationary",
            Termination::MaxIterations => "max-iterations",
            Termination::LineSearchStalled => "line-search-stalled",
        })
    }
}

/// One accepted iterate. `step` is the step that produced it (0 for a
/// stage's starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub iter: usize,
    pub theta: f64,
    pub ups: f64,
    pub residual: f64,
    pub step: f64,
    pub spec1_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub theta: f64,
    pub iterations: usize,
    pub termination: Termination,
}

/// Analytic against finite-difference directional derivative along `−grad`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCheck {
    pub iter: usize,
    pub analytic: f64,
    pub finite_difference: f64,
}

#[derive(Debug, Clone)]
pub struct SynthesisReport {
    pub iterates: Vec<Iterate>,
    pub controller: ControllerParams,
    pub termination: Termination,
    pub stages: Vec<StageSummary>,
    /// `Υ` of the initial controller at the target θ, when admissible there.
    pub initial_ups: Option<f64>,
    pub final_ups: f64,
    pub final_residual: f64,
    pub direction_checks: Vec<DirectionCheck>,
}

struct Point {
    ctrl: ControllerParams,
    grad: grad::GradReport,
    residual: f64,
    spec1_sup: f64,
}

fn spec1_sup(
    cl: &model::ClosedLoop,
    theta: f64,
    quad: &QuadratureConfig,
    margin: f64,
) -> freq::AdmissibilityReport {
    let lambda_max = freq::default_lambda_max(cl, quad);
    freq::check_admissible_with_margin(cl, theta, &freq::admissibility_grid(cl, lambda_max), margin)
}

fn evaluate_point(
    plant: &DerivedPlant,
    weights: &Weights,
    ctrl: ControllerParams,
    theta: f64,
    cfg: &SynthesisConfig,
) -> Result<Point> {
    let cl = model::assemble_closed_loop(plant, weights, &ctrl)?;
    let report = spec1_sup(&cl, theta, &cfg.quad, cfg.margin);
    if !report.spectrally_admissible() {
        return Err(Error::Inadmissible(format!(
            "controller violates theta sup lambda_max(Phi tanc(theta Psi)) < {:.2} (value {:.4})",
            1.0 - cfg.margin,
            report.spec1_sup
        )));
    }
    let g = grad::frechet_derivatives(&cl, plant, theta, &cfg.quad)?;
    let residual = grad::optimality_residual(&g);
    Ok(Point {
        ctrl,
        grad: g,
        residual,
        spec1_sup: report.spec1_sup,
    })
}

/// `Υ` at a trial controller, or `None` if it is not admissible with margin.
fn trial_ups(
    plant: &DerivedPlant,
    weights: &Weights,
    ctrl: &ControllerParams,
    theta: f64,
    cfg: &SynthesisConfig,
) -> Result<Option<f64>> {
    if !ctrl.is_finite() {
        return Ok(None);
    }
    let cl = model::assemble_closed_loop(plant, weights, ctrl)?;
    if !cl.is_hurwitz() {
        return Ok(None);
    }
    if !spec1_sup(&cl, theta, &cfg.quad, cfg.margin).spectrally_admissible() {
        return Ok(None);
    }
    match freq::qef_growth_rate(&cl, theta, &cfg.quad) {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.category() == crate::Category::Inadmissible => Ok(None),
        Err(e) => Err(e),
    }
}

fn axpy(x: &ControllerParams, s: f64, g: &ControllerParams) -> ControllerParams {
    ControllerParams {
        a: &x.a + &g.a * s,
        b: &x.b + &g.b * s,
        c: &x.c + &g.c * s,
    }
}

fn ladder(cfg: &SynthesisConfig, init_admissible: bool) -> Vec<f64> {
    match &cfg.theta_continuation {
        Some(l) => {
            let mut l = l.clone();
            if *l.last().expect("validated non-empty") < cfg.theta {
                l.push(cfg.theta);
            }
            l
        }
        None if init_admissible => vec![cfg.theta],
        None => [8.0, 4.0, 2.0, 1.0].iter().map(|f| cfg.theta / f).collect(),
    }
}

/// Gradient descent with admissibility-preserving Armijo backtracking.
///
/// Each trial `x − s·grad` must be Hurwitz, satisfy the spectral condition
/// with the configured margin, and decrease `Υ` by at least
/// `armijo_c · s · ‖grad‖²`. The first trial step is the larger of
/// `initial_step / (1 + ‖grad‖)` and twice the last accepted step.
pub fn synthesize(
    plant: &DerivedPlant,
    weights: &Weights,
    cfg: &SynthesisConfig,
) -> Result<SynthesisReport> {
    cfg.validate()?;
    let init = match &cfg.initial {
        Some(c) => c.clone(),
        None => lqg_controller(plant, weights)?,
    };
    let init_cl = model::assemble_closed_loop(plant, weights, &init)?;
    if !init_cl.is_hurwitz() {
        return Err(Error::NotStabilizing(model::spectral_abscissa(&init_cl.a)));
    }
    let initial_ups = trial_ups(plant, weights, &init, cfg.theta, cfg)?;
    let stages = ladder(cfg, initial_ups.is_some());

    let mut iterates = Vec::new();
    let mut summaries = Vec::new();
    let mut checks = Vec::new();
    let mut ctrl = init;
    let mut global_iter = 0;
    let mut last: Option<Point> = None;
    let mut termination = Termination::MaxIterations;

    for &theta in &stages {
        let mut x = evaluate_point(plant, weights, ctrl.clone(), theta, cfg)?;
        iterates.push(Iterate {
            iter: global_iter,
            theta,
            ups: x.grad.ups,
            residual: x.residual,
            step: 0.0,
            spec1_sup: x.spec1_sup,
        });
        let mut stage_term = Termination::MaxIterations;
        let mut last_step = 0.0f64;
        let mut k = 0;
        while k < cfg.max_iters {
            if x.residual <= cfg.grad_tol * (1.0 + x.grad.ups.abs()) {
                stage_term = Termination::Stationary;
                break;
            }
            let g = x.grad.as_params();
            let g2 = x.residual * x.residual;
            if let Some(every) = cfg.direction_check_every {
                if every > 0 && k % every == 0 {
                    let h = 1e-4 / (1.0 + x.residual);
                    let up = trial_ups(plant, weights, &axpy(&x.ctrl, -h, &g), theta, cfg)?;
                    let um = trial_ups(plant, weights, &axpy(&x.ctrl, h, &g), theta, cfg)?;
                    if let (Some(up), Some(um)) = (up, um) {
                        checks.push(DirectionCheck {
                            iter: global_iter,
                            analytic: -g2,
                            finite_difference: (up - um) / (2.0 * h),
                        });
                    }
                }
            }
            let mut s = (cfg.initial_step / (1.0 + x.residual)).max(2.0 * last_step);
            let mut accepted = None;
            while s >= MIN_STEP {
                let trial = axpy(&x.ctrl, -s, &g);
                if let Some(u) = trial_ups(plant, weights, &trial, theta, cfg)? {
                    if u <= x.grad.ups - cfg.armijo_c * s * g2 && u < x.grad.ups {
                        accepted = Some(trial);
                        break;
                    }
                }
                s *= cfg.backtrack_factor;
            }
            let Some(trial) = accepted else {
                stage_term = Termination::LineSearchStalled;
                break;
            };
            let next = evaluate_point(plant, weights, trial, theta, cfg)?;
            if !(next.grad.ups < x.grad.ups) {
                stage_term = Termination::LineSearchStalled;
                break;
            }
            last_step = s;
            x = next;
            k += 1;
            global_iter += 1;
            iterates.push(Iterate {
                iter: global_iter,
                theta,
                ups: x.grad.ups,
                residual: x.residual,
                step: s,
                spec1_sup: x.spec1_sup,
            });
        }
        if stage_term == Termination::MaxIterations
            && x.residual <= cfg.grad_tol * (1.0 + x.grad.ups.abs())
        {
            stage_term = Termination::Stationary;
        }
        summaries.push(StageSummary {
            theta,
            iterations: k,
            termination: stage_term,
        });
        termination = stage_term;
        ctrl = x.ctrl.clone();
        last = Some(x);
    }

    let fin = last.expect("at least one stage");
    Ok(SynthesisReport {
        iterates,
        controller: fin.ctrl,
        termination,
        stages: summaries,
        initial_ups,
        final_ups: fin.grad.ups,
        final_residual: fin.residual,
        direction_checks: checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramians;
    use crate::instances;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn canonical() -> (DerivedPlant, Weights) {
        (
            model::derive_plant(&instances::canonical_plant()).unwrap(),
            instances::canonical_weights(),
        )
    }

    #[test]
    fn lqg_on_canonical_plant_is_stabilizing_and_stationary() {
        let (plant, w) = canonical();
        let ctrl = lqg_controller(&plant, &w).unwrap();
        let cl = model::assemble_closed_loop(&plant, &w, &ctrl).unwrap();
        assert!(cl.is_hurwitz());
        let (res, scale) = grad::lqg_optimality_residual(&cl, &plant).unwrap();
        assert!(res <= 1e-6 * (1.0 + scale), "{res}");
    }

    fn assert_locally_minimal(plant: &DerivedPlant, w: &Weights, seed: u64) {
        let ctrl = lqg_controller(plant, w).unwrap();
        let base =
            gramians::lqg_cost(&model::assemble_closed_loop(plant, w, &ctrl).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = ctrl.to_vec();
        for _ in 0..20 {
            let i = rng.random_range(0..x.len());
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mut y = x.clone();
            y[i] += sign * 1e-3;
            let cl = model::assemble_closed_loop(plant, w, &ctrl.with_values(&y)).unwrap();
            assert!(gramians::lqg_cost(&cl).unwrap() >= base * (1.0 - 1e-13));
        }
    }

    #[test]
    fn lqg_is_locally_minimal_for_lqg_cost() {
        let (plant, w) = canonical();
        assert_locally_minimal(&plant, &w, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let inst = instances::random_admissible(&mut rng, 2, 2, 1, 1, 3, 0.0).unwrap();
        assert_locally_minimal(&inst.plant, &inst.weights, 3);
    }

    #[test]
    fn canonical_lqg_filter_gain_vanishes() {
        // the plant variables stay in the vacuum covariance, so the
        // measurement carries no information about them
        let (plant, w) = canonical();
        let ctrl = lqg_controller(&plant, &w).unwrap();
        assert!(model::max_abs(&ctrl.b) < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        let (plant, mut w) = canonical();
        w.k.fill(0.0);
        assert!(matches!(
            lqg_controller(&plant, &w),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SynthesisConfig::new(0.1).validate().is_ok());
        let mut c = SynthesisConfig::new(0.1);
        c.backtrack_factor = 1.0;
        assert!(c.validate().is_err());
        let mut c = SynthesisConfig::new(0.1);
        c.theta_continuation = Some(vec![0.2, 0.1]);
        assert!(c.validate().is_err());
        assert!(SynthesisConfig::new(-1.0).validate().is_err());
    }

    #[test]
    fn tiny_theta_is_immediately_stationary() {
        let (plant, w) = canonical();
        let ctrl = lqg_controller(&plant, &w).unwrap();
        let cl = model::assemble_closed_loop(&plant, &w, &ctrl).unwrap();
        let theta = 1e-6 / freq::phi_peak(&cl).unwrap();
        let rep = synthesize(&plant, &w, &SynthesisConfig::new(theta)).unwrap();
        assert_eq!(rep.termination, Termination::Stationary);
        assert!(rep.iterates.len() <= 4);
    }

    #[test]
    fn short_run_decreases() {
        let (plant, w) = canonical();
        let ctrl = lqg_controller(&plant, &w).unwrap();
        let cl = model::assemble_closed_loop(&plant, &w, &ctrl).unwrap();
        let theta = 0.5 / freq::phi_peak(&cl).unwrap();
        let mut cfg = SynthesisConfig::new(theta);
        cfg.max_iters = 5;
        let rep = synthesize(&plant, &w, &cfg).unwrap();
        for pair in rep.iterates.windows(2) {
            assert!(pair[1].ups < pair[0].ups);
        }
        assert!(rep.final_ups <= rep.initial_ups.unwrap());
        for chk in &rep.direction_checks {
            assert!((chk.finite_difference - chk.analytic).abs() <= 1e-3 * chk.analytic.abs());
        }
    }
}
