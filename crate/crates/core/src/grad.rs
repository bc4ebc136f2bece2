//! Frechet derivatives of the growth rate with respect to the controller.
//!
//! Per frequency, `φ = sinc(θΨ)Δ⁻¹` and `ψ` satisfy
//! `−(1/θ) d ln det Δ = Tr(φ dΦ + ψ dΨ)`. Integrating against
//! `dF = [𝒞G, I] [[d𝒜, dℬ], [d𝒞, 0]] [[Gℬ], [I]]` gives `dΥ = θ Tr(χ X)`
//! for the perturbation block `X`, and the controller derivatives follow
//! from the sandwich `K₁ᵀχᵀK₂ᵀ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freq::{self, QuadratureConfig};
use crate::gramians;
use crate::matfun;
use crate::model::{self, ClosedLoop, ControllerParams, DerivedPlant, Weights};
use crate::quad;
use crate::{to_complex, CMat, RMat};

/// `K₁ = [[0, E], [I_n, 0], [0, K]]`, of size `(2n+ν)×(n+d)`.
pub fn k1(plant: &DerivedPlant, k: &RMat) -> RMat {
    let (n, d, nu) = (plant.n(), plant.d(), k.nrows());
    let mut out = RMat::zeros(2 * n + nu, n + d);
    out.view_mut((0, n), (n, d)).copy_from(&plant.e);
    out.view_mut((n, 0), (n, n)).fill_with_identity();
    out.view_mut((2 * n, n), (nu, d)).copy_from(k);
    out
}

/// `K₂ = [[0, I_n, 0], [C, 0, D]]`, of size `(n+r)×(2n+m)`.
pub fn k2(plant: &DerivedPlant) -> RMat {
    let (n, m, r) = (plant.n(), plant.m(), plant.r());
    let mut out = RMat::zeros(n + r, 2 * n + m);
    out.view_mut((0, n), (n, n)).fill_with_identity();
    out.view_mut((n, 0), (r, n)).copy_from(&plant.c);
    out.view_mut((n, 2 * n), (r, m)).copy_from(&plant.d);
    out
}

fn solve_right(x: &CMat, delta: &CMat) -> Result<CMat> {
    // returns x Δ⁻¹ via Δᵀ yᵀ = xᵀ
    delta
        .transpose()
        .lu()
        .solve(&x.transpose())
        .map(|y| y.transpose())
        .ok_or_else(|| Error::Inadmissible("Delta is singular".into()))
}

/// `φ = sinc(θΨ) Δ⁻¹`.
pub fn phi_fn(psi: &CMat, delta: &CMat, theta: f64) -> Result<CMat> {
    let sinc = matfun::sinc_mat(&(psi * Complex64::new(theta, 0.0)))?;
    solve_right(&sinc, delta)
}

/// `ψ` in the printed form
/// `sin'(θΨ)[Δ⁻¹ΦΨ⁻¹] − cos'(θΨ)[Δ⁻¹] − sinc(θΨ)Δ⁻¹ΦΨ⁻¹`.
///
/// Needs `Ψ` invertible; fails with [`Error::Inadmissible`] when
/// `σmin(Ψ)/σmax(Ψ)` is below the singularity threshold.
pub fn psi_fn(phi: &CMat, psi: &CMat, delta: &CMat, theta: f64) -> Result<CMat> {
    let sv = psi.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smax > 0.0 && smin / smax > freq::PSI_SINGULARITY_THRESHOLD) {
        return Err(Error::Inadmissible(format!(
            "det Psi(lambda) = 0 to working precision (relative sigma_min {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }
    let n = delta.nrows();
    let dinv = delta
        .clone()
        .lu()
        .solve(&CMat::identity(n, n))
        .ok_or_else(|| Error::Inadmissible("Delta is singular".into()))?;
    let x = solve_right(&(&dinv * phi), psi)?;
    let beta = psi * Complex64::new(theta, 0.0);
    let sinc = matfun::sinc_mat(&beta)?;
    Ok(matfun::gateaux_sin(&beta, &x)? - matfun::gateaux_cos(&beta, &dinv)? - sinc * x)
}

/// `ψ = θ sinc'(θΨ)[Δ⁻¹Φ] − cos'(θΨ)[Δ⁻¹]`.
///
/// Equal to [`psi_fn`] whenever `Ψ` is invertible, and free of `Ψ⁻¹`, so it
/// also covers `ν > m` where `Ψ` is always singular.
pub fn psi_regular(phi: &CMat, psi: &CMat, delta: &CMat, theta: f64) -> Result<CMat> {
    let n = delta.nrows();
    let dinv = delta
        .clone()
        .lu()
        .solve(&CMat::identity(n, n))
        .ok_or_else(|| Error::Inadmissible("Delta is singular".into()))?;
    let beta = psi * Complex64::new(theta, 0.0);
    let dsinc = matfun::gateaux_sinc(&beta, &(&dinv * phi))?;
    Ok(dsinc * Complex64::new(theta, 0.0) - matfun::gateaux_cos(&beta, &dinv)?)
}

fn sandwich_integrand(pieces: &freq::ResolventPieces, w: &CMat, cl: &ClosedLoop) -> CMat {
    let (n2, m, nu) = (cl.a.nrows(), cl.m(), cl.nu());
    let mut left = CMat::zeros(n2 + m, m);
    left.view_mut((0, 0), (n2, m)).copy_from(&pieces.gb);
    left.view_mut((n2, 0), (m, m)).fill_with_identity();
    let mut right = CMat::zeros(nu, n2 + nu);
    right.view_mut((0, 0), (nu, n2)).copy_from(&pieces.cg);
    right.view_mut((0, n2), (nu, nu)).fill_with_identity();
    left * w * right
}

/// Cost and gradient integrand at one frequency, already scaled so that
/// integrating over `[0, ∞)` yields `Υ` and `χ`.
fn node_values(cl: &ClosedLoop, theta: f64, lambda: f64, with_chi: bool) -> Result<Vec<f64>> {
    let pieces = freq::resolvent_pieces(cl, lambda)?;
    let (phi, psi) = freq::pair_from_transfer(&pieces.f, &cl.j);
    let ln_det = freq::ln_det_delta_checked(&phi, &psi, theta, lambda)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = vec![-ln_det / two_pi];
    if !with_chi {
        return Ok(out);
    }
    let delta = freq::delta_matrix(&phi, &psi, theta)?;
    let ph = phi_fn(&psi, &delta, theta)?;
    let ps = psi_regular(&phi, &psi, &delta, theta)?;
    let fa = pieces.f.adjoint();
    let w = &fa * (&ph + ph.adjoint()) + to_complex(&cl.j) * &fa * (&ps - ps.adjoint());
    let integrand = sandwich_integrand(&pieces, &w, cl);
    out.extend(integrand.iter().map(|z| z.re / two_pi));
    Ok(out)
}

/// Growth rate and `χ` from one shared quadrature pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub ups: f64,
    pub chi: RMat,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Integrates `Υ` and `χ` together; the bottom-right `m×ν` block of `χ`
/// is zeroed after integration.
pub fn evaluate(cl: &ClosedLoop, theta: f64, quad_cfg: &QuadratureConfig) -> Result<Evaluation> {
    let lambda_max = freq::require_admissible(cl, theta, quad_cfg)?;
    let res = quad::integrate_half_line(
        |lambda| node_values(cl, theta, lambda, true),
        &freq::pole_breakpoints(cl),
        lambda_max,
        quad_cfg,
    )?;
    let (n2, m, nu) = (cl.a.nrows(), cl.m(), cl.nu());
    let mut chi = RMat::from_column_slice(n2 + m, n2 + nu, &res.value[1..]);
    chi.view_mut((n2, n2), (m, nu)).fill(0.0);
    Ok(Evaluation {
        ups: res.value[0],
        chi,
        abs_error: res.abs_error,
        evaluations: res.evaluations,
    })
}

/// `χ` alone.
pub fn chi_matrix(cl: &ClosedLoop, theta: f64, quad_cfg: &QuadratureConfig) -> Result<RMat> {
    Ok(evaluate(cl, theta, quad_cfg)?.chi)
}

/// `χ₀` by frequency quadrature: the `θ → 0` limit of the `χ` integrand,
/// where the weight reduces to `2F*`. An independent route to
/// [`gramians::chi0`].
pub fn chi0_quadrature(cl: &ClosedLoop, quad_cfg: &QuadratureConfig) -> Result<RMat> {
    if !cl.is_hurwitz() {
        return Err(Error::NotStabilizing(model::spectral_abscissa(&cl.a)));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let res = quad::integrate_half_line(
        |lambda| {
            let pieces = freq::resolvent_pieces(cl, lambda)?;
            let w = pieces.f.adjoint() * Complex64::new(2.0, 0.0);
            Ok(sandwich_integrand(&pieces, &w, cl)
                .iter()
                .map(|z| z.re / two_pi)
                .collect())
        },
        &freq::pole_breakpoints(cl),
        freq::default_lambda_max(cl, quad_cfg),
        quad_cfg,
    )?;
    let (n2, m, nu) = (cl.a.nrows(), cl.m(), cl.nu());
    let mut chi = RMat::from_column_slice(n2 + m, n2 + nu, &res.value);
    chi.view_mut((n2, n2), (m, nu)).fill(0.0);
    Ok(chi)
}

/// Blocks `(1,1)`, `(1,2)`, `(2,1)` of `K₁ᵀχᵀK₂ᵀ` (not scaled by `θ`).
pub fn sandwich(chi: &RMat, plant: &DerivedPlant, k: &RMat) -> (RMat, RMat, RMat) {
    let (n, d, r) = (plant.n(), plant.d(), plant.r());
    let s = k1(plant, k).transpose() * chi.transpose() * k2(plant).transpose();
    (
        s.view((0, 0), (n, n)).into_owned(),
        s.view((0, n), (n, r)).into_owned(),
        s.view((n, 0), (d, n)).into_owned(),
    )
}

/// `χ`, the three derivatives and quadrature diagnostics.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub ups: f64,
    pub chi: RMat,
    pub d_a: RMat,
    pub d_b: RMat,
    pub d_c: RMat,
    pub abs_error: f64,
}

impl GradReport {
    pub fn as_params(&self) -> ControllerParams {
        ControllerParams {
            a: self.d_a.clone(),
            b: self.d_b.clone(),
            c: self.d_c.clone(),
        }
    }
}

/// `∂ₐΥ, ∂_bΥ, ∂_cΥ = θ · blocks of K₁ᵀχᵀK₂ᵀ`.
pub fn frechet_derivatives(
    cl: &ClosedLoop,
    plant: &DerivedPlant,
    theta: f64,
    quad_cfg: &QuadratureConfig,
) -> Result<GradReport> {
    let ev = evaluate(cl, theta, quad_cfg)?;
    let (a, b, c) = sandwich(&ev.chi, plant, &cl.k);
    Ok(GradReport {
        ups: ev.ups,
        d_a: a * theta,
        d_b: b * theta,
        d_c: c * theta,
        chi: ev.chi,
        abs_error: ev.abs_error,
    })
}

/// Frobenius norm of the stacked derivative blocks.
pub fn optimality_residual(report: &GradReport) -> f64 {
    (report.d_a.norm_squared() + report.d_b.norm_squared() + report.d_c.norm_squared()).sqrt()
}

/// The same residual with `χ` replaced by the Gramian limit `χ₀`, and
/// `‖χ₀‖_F` for scaling.
pub fn lqg_optimality_residual(cl: &ClosedLoop, plant: &DerivedPlant) -> Result<(f64, f64)> {
    let chi0 = gramians::chi0(cl)?;
    let (a, b, c) = sandwich(&chi0, plant, &cl.k);
    let res = (a.norm_squared() + b.norm_squared() + c.norm_squared()).sqrt();
    Ok((res, chi0.norm()))
}

/// Analytic and finite-difference gradients side by side.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub analytic: ControllerParams,
    pub finite_difference: ControllerParams,
    /// `‖analytic − fd‖∞ / ‖fd‖∞`.
    pub max_rel_error: f64,
}

/// Central differences of `Υ` in every controller entry with step
/// `1e-5·(1+|x|)`, each re-running the full quadrature.
pub fn finite_difference_gradient(
    plant: &DerivedPlant,
    weights: &Weights,
    ctrl: &ControllerParams,
    theta: f64,
    quad_cfg: &QuadratureConfig,
) -> Result<ControllerParams> {
    let x = ctrl.to_vec();
    let mut g = vec![0.0; x.len()];
    let ups = |v: &[f64]| -> Result<f64> {
        let cl = model::assemble_closed_loop(plant, weights, &ctrl.with_values(v))?;
        freq::qef_growth_rate(&cl, theta, quad_cfg)
    };
    for i in 0..x.len() {
        let h = 1e-5 * (1.0 + x[i].abs());
        let mut xp = x.clone();
        xp[i] += h;
        let mut xm = x.clone();
        xm[i] -= h;
        g[i] = (ups(&xp)? - ups(&xm)?) / (2.0 * h);
    }
    Ok(ctrl.with_values(&g))
}

/// Compares [`frechet_derivatives`] with [`finite_difference_gradient`].
pub fn grad_check(
    plant: &DerivedPlant,
    weights: &Weights,
    ctrl: &ControllerParams,
    theta: f64,
    quad_cfg: &QuadratureConfig,
) -> Result<GradCheck> {
    let cl = model::assemble_closed_loop(plant, weights, ctrl)?;
    let analytic = frechet_derivatives(&cl, plant, theta, quad_cfg)?.as_params();
    let fd = finite_difference_gradient(plant, weights, ctrl, theta, quad_cfg)?;
    let (va, vf) = (analytic.to_vec(), fd.to_vec());
    let diff = va
        .iter()
        .zip(&vf)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = vf.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    Ok(GradCheck {
        analytic,
        finite_difference: fd,
        max_rel_error: if scale > 0.0 { diff / scale } else { diff },
    })
}
