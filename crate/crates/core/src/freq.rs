//! Frequency-domain evaluation of the growth rate.
//!
//! At each frequency the closed-loop transfer matrix `F = 𝒞(iλI − 𝒜)⁻¹ℬ`
//! gives `Φ = FF*` and `Ψ = FJF*`. With `H = iθΨ` Hermitian and
//! `T = tanc(θΨ) = tanhc(H) ≻ 0`,
//!
//! `Δ = cos(θΨ) − θΦ sinc(θΨ) = (I − θΦT) cos(θΨ)`,
//!
//! so `ln det Δ = Σ ln cosh hₖ + Σ ln(1 − θμₖ)` with `hₖ` the eigenvalues of
//! `H` and `μₖ` those of `√T Φ √T`. This is real, cheap, and yields the
//! spectral condition `θ μ_max < 1` at the same node for free.

pub use crate::quad::QuadratureConfig;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matfun::{self, hermitian_eigen, ln_cosh, tanhc};
use crate::model::{self, ClosedLoop};
use crate::quad::{self, QuadResult};
use crate::{to_complex, CMat, RMat};

/// Default safety margin on the spectral condition.
pub const SPEC_MARGIN: f64 = 0.05;
/// Relative singular-value threshold below which `Ψ` counts as singular.
pub const PSI_SINGULARITY_THRESHOLD: f64 = 1e-8;
/// `λ_max = LAMBDA_MAX_FACTOR · ρ(𝒜)` unless configured.
pub const LAMBDA_MAX_FACTOR: f64 = 50.0;

/// Per-frequency quantities.
#[derive(Debug, Clone)]
pub struct FreqSample {
    pub lambda: f64,
    pub f: CMat,
    pub phi: CMat,
    pub psi: CMat,
    pub delta: CMat,
}

/// `(iλI − 𝒜)⁻¹` by LU factorization.
pub fn resolvent(a: &RMat, lambda: f64) -> Result<CMat> {
    let n = a.nrows();
    let shifted = CMat::identity(n, n) * Complex64::new(0.0, lambda) - to_complex(a);
    shifted
        .lu()
        .solve(&CMat::identity(n, n))
        .ok_or_else(|| Error::NotStabilizing(model::spectral_abscissa(a)))
}

/// Factorized resolvent pieces `Gℬ` and `𝒞G` at one frequency.
pub(crate) struct ResolventPieces {
    pub gb: CMat,
    pub cg: CMat,
    pub f: CMat,
}

pub(crate) fn resolvent_pieces(cl: &ClosedLoop, lambda: f64) -> Result<ResolventPieces> {
    let n2 = cl.a.nrows();
    let shifted = CMat::identity(n2, n2) * Complex64::new(0.0, lambda) - to_complex(&cl.a);
    let singular = || Error::NotStabilizing(model::spectral_abscissa(&cl.a));
    let gb = shifted
        .clone()
        .lu()
        .solve(&to_complex(&cl.b))
        .ok_or_else(singular)?;
    let cg_t = shifted
        .transpose()
        .lu()
        .solve(&to_complex(&cl.c.transpose()))
        .ok_or_else(singular)?;
    let f = to_complex(&cl.c) * &gb;
    Ok(ResolventPieces {
        gb,
        cg: cg_t.transpose(),
        f,
    })
}

/// `F(iλ) = 𝒞(iλI − 𝒜)⁻¹ℬ`.
pub fn transfer(cl: &ClosedLoop, lambda: f64) -> Result<CMat> {
    let n2 = cl.a.nrows();
    let shifted = CMat::identity(n2, n2) * Complex64::new(0.0, lambda) - to_complex(&cl.a);
    let gb = shifted
        .lu()
        .solve(&to_complex(&cl.b))
        .ok_or_else(|| Error::NotStabilizing(model::spectral_abscissa(&cl.a)))?;
    Ok(to_complex(&cl.c) * gb)
}

pub(crate) fn pair_from_transfer(f: &CMat, j: &RMat) -> (CMat, CMat) {
    let fa = f.adjoint();
    let phi = f * &fa;
    let psi = f * to_complex(j) * &fa;
    let half = Complex64::new(0.5, 0.0);
    ((&phi + phi.adjoint()) * half, (&psi - psi.adjoint()) * half)
}

/// `(Φ, Ψ) = (FF*, FJF*)`, symmetrized to exact Hermitian / skew-Hermitian form.
pub fn spectral_pair(cl: &ClosedLoop, lambda: f64) -> Result<(CMat, CMat)> {
    Ok(pair_from_transfer(&transfer(cl, lambda)?, &cl.j))
}

/// `Δ = cos(θΨ) − θΦ sinc(θΨ)`.
pub fn delta_matrix(phi: &CMat, psi: &CMat, theta: f64) -> Result<CMat> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidInput("theta must be non-negative".into()));
    }
    let arg = psi * Complex64::new(theta, 0.0);
    let cos = matfun::mat_cos(&arg)?;
    let sinc = matfun::sinc_mat(&arg)?;
    Ok(cos - phi * sinc * Complex64::new(theta, 0.0))
}

/// All per-frequency quantities at once.
pub fn sample(cl: &ClosedLoop, lambda: f64, theta: f64) -> Result<FreqSample> {
    let f = transfer(cl, lambda)?;
    let (phi, psi) = pair_from_transfer(&f, &cl.j);
    let delta = delta_matrix(&phi, &psi, theta)?;
    Ok(FreqSample {
        lambda,
        f,
        phi,
        psi,
        delta,
    })
}

/// Spectral data of one frequency node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeSpectrum {
    /// `ln det Δ`.
    pub ln_det: f64,
    /// `θ λmax(√T Φ √T)`.
    pub spec1: f64,
    /// `σmin(Ψ) / σmax(Ψ)`, zero for `Ψ = 0`.
    pub psi_rel_sigma: f64,
}

pub(crate) fn node_spectrum(phi: &CMat, psi: &CMat, theta: f64) -> NodeSpectrum {
    let (h, v) = hermitian_eigen(&(psi * Complex64::new(0.0, theta)));
    let sqrt_t: Vec<Complex64> = h
        .iter()
        .map(|&x| Complex64::new(tanhc(x).sqrt(), 0.0))
        .collect();
    let root = matfun::from_spectrum(&v, &sqrt_t);
    let m = &root * phi * &root;
    let (mu, _) = hermitian_eigen(&m);
    let mu_max = mu.iter().copied().fold(0.0, f64::max);
    let mut ln_det: f64 = h.iter().map(|&x| ln_cosh(x)).sum();
    for &x in &mu {
        ln_det += (-theta * x).ln_1p();
    }
    let hmax = h.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let hmin = h.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    NodeSpectrum {
        ln_det,
        spec1: theta * mu_max,
        psi_rel_sigma: if hmax > 0.0 { hmin / hmax } else { 0.0 },
    }
}

/// Evaluated at one frequency: `ln det Δ`, or an inadmissibility error if
/// `θ λmax(Φ tanc(θΨ)) ≥ 1` there.
pub(crate) fn ln_det_delta_checked(phi: &CMat, psi: &CMat, theta: f64, lambda: f64) -> Result<f64> {
    let s = node_spectrum(phi, psi, theta);
    if !(s.spec1 < 1.0) || !s.ln_det.is_finite() {
        return Err(Error::Inadmissible(format!(
            "theta lambda_max(Phi tanc(theta Psi)) = {:.6} >= 1 at frequency {lambda:.6e}",
            s.spec1
        )));
    }
    Ok(s.ln_det)
}

/// Outcome of the admissibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub hurwitz: bool,
    pub spectral_abscissa: f64,
    /// `θ sup λmax(Φ tanc(θΨ))` over the refined grid.
    pub spec1_sup: f64,
    /// Frequency attaining `spec1_sup`.
    pub spec1_argmax: f64,
    /// `min σmin(Ψ)/σmax(Ψ)` over the grid.
    pub psi_min_rel_sigma: f64,
    pub margin: f64,
}

impl AdmissibilityReport {
    /// Hurwitz and `spec1_sup < 1 − margin`. Sufficient for the growth rate
    /// and the gradient as computed here.
    pub fn spectrally_admissible(&self) -> bool {
        self.hurwitz && self.spec1_sup < 1.0 - self.margin
    }

    /// Additionally requires `Ψ(λ)` nonsingular on the grid.
    pub fn strictly_admissible(&self) -> bool {
        self.spectrally_admissible() && self.psi_min_rel_sigma > PSI_SINGULARITY_THRESHOLD
    }
}

/// Default admissibility grid: `λ = 0`, log-spaced points up to `λ_max`, and
/// the imaginary parts of the closed-loop poles.
pub fn admissibility_grid(cl: &ClosedLoop, lambda_max: f64) -> Vec<f64> {
    let rho = model::spectral_radius(&cl.a).max(1e-12);
    let lo = 1e-3 * rho;
    let count = 240;
    let mut grid = vec![0.0];
    for k in 0..count {
        let t = k as f64 / (count - 1) as f64;
        grid.push(lo * (lambda_max / lo).powf(t));
    }
    for z in cl.a.complex_eigenvalues().iter() {
        let w = z.im.abs();
        if w > 0.0 && w < lambda_max {
            grid.push(w);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Start of the tail substitution: the configured value or `50 · ρ(𝒜)`.
pub fn default_lambda_max(cl: &ClosedLoop, quad: &QuadratureConfig) -> f64 {
    quad.lambda_max
        .unwrap_or_else(|| LAMBDA_MAX_FACTOR * model::spectral_radius(&cl.a).max(1e-12))
}

/// Maximizes `f` over a sorted grid: every interval is split in three, and
/// the best point is polished by golden-section search between its neighbours.
pub(crate) fn grid_sup(grid: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut pts = Vec::with_capacity(3 * grid.len());
    for (i, &x) in grid.iter().enumerate() {
        pts.push(x);
        if let Some(&y) = grid.get(i + 1) {
            pts.push(x + (y - x) / 3.0);
            pts.push(x + 2.0 * (y - x) / 3.0);
        }
    }
    let mut vals = Vec::with_capacity(pts.len());
    for &x in &pts {
        vals.push(f(x)?);
    }
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut arg = pts[best_i];
    let mut lo = pts[best_i.saturating_sub(1)];
    let mut hi = pts[(best_i + 1).min(pts.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..60 {
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best {
            best = v;
            arg = x;
        }
    }
    Ok((best, arg))
}

/// Evaluates the spectral condition and the `Ψ` singularity measure over
/// `grid` (refined threefold and polished around the maximizer).
pub fn check_admissible(cl: &ClosedLoop, theta: f64, grid: &[f64]) -> AdmissibilityReport {
    check_admissible_with_margin(cl, theta, grid, SPEC_MARGIN)
}

pub fn check_admissible_with_margin(
    cl: &ClosedLoop,
    theta: f64,
    grid: &[f64],
    margin: f64,
) -> AdmissibilityReport {
    let abscissa = model::spectral_abscissa(&cl.a);
    let hurwitz = cl.is_hurwitz();
    let mut report = AdmissibilityReport {
        hurwitz,
        spectral_abscissa: abscissa,
        spec1_sup: f64::INFINITY,
        spec1_argmax: f64::NAN,
        psi_min_rel_sigma: 0.0,
        margin,
    };
    if !hurwitz || grid.is_empty() {
        return report;
    }
    let mut min_rel = f64::INFINITY;
    let sup = grid_sup(grid, |lambda| {
        let (phi, psi) = spectral_pair(cl, lambda)?;
        let s = node_spectrum(&phi, &psi, theta);
        min_rel = min_rel.min(s.psi_rel_sigma);
        Ok(s.spec1)
    });
    if let Ok((sup, arg)) = sup {
        report.spec1_sup = sup;
        report.spec1_argmax = arg;
        report.psi_min_rel_sigma = min_rel;
    }
    report
}

/// `sup_λ λmax(Φ(λ)) = ‖F‖²_∞`; its inverse sets the natural scale of `θ`.
pub fn phi_peak(cl: &ClosedLoop) -> Result<f64> {
    if !cl.is_hurwitz() {
        return Err(Error::NotStabilizing(model::spectral_abscissa(&cl.a)));
    }
    let lambda_max = LAMBDA_MAX_FACTOR * model::spectral_radius(&cl.a).max(1e-12);
    let grid = admissibility_grid(cl, lambda_max);
    let (peak, _) = grid_sup(&grid, |lambda| {
        let (phi, _) = spectral_pair(cl, lambda)?;
        Ok(hermitian_eigen(&phi).0.into_iter().fold(0.0, f64::max))
    })?;
    Ok(peak)
}

pub(crate) fn require_admissible(
    cl: &ClosedLoop,
    theta: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidInput(
            "theta must be positive and finite".into(),
        ));
    }
    quad.validate()?;
    if !cl.is_hurwitz() {
        return Err(Error::NotStabilizing(model::spectral_abscissa(&cl.a)));
    }
    let lambda_max = default_lambda_max(cl, quad);
    let report = check_admissible(cl, theta, &admissibility_grid(cl, lambda_max));
    if !report.spectrally_admissible() {
        return Err(Error::Inadmissible(format!(
            "theta sup lambda_max(Phi tanc(theta Psi)) = {:.6} is not below {:.2} (attained near frequency {:.4e})",
            report.spec1_sup,
            1.0 - report.margin,
            report.spec1_argmax
        )));
    }
    Ok(lambda_max)
}

pub(crate) fn pole_breakpoints(cl: &ClosedLoop) -> Vec<f64> {
    cl.a.complex_eigenvalues()
        .iter()
        .map(|z| z.im.abs())
        .collect()
}

/// Growth rate with quadrature diagnostics.
#[derive(Debug, Clone)]
pub struct GrowthRate {
    pub ups: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub lambda_max: f64,
}

/// `Υ = −(1/4π) ∫_ℝ ln det Δ(λ) dλ = −(1/2π) ∫₀^∞ ln det Δ(λ) dλ`.
pub fn qef_growth_rate(cl: &ClosedLoop, theta: f64, quad: &QuadratureConfig) -> Result<f64> {
    Ok(qef_growth_rate_report(cl, theta, quad)?.ups)
}

pub fn qef_growth_rate_report(
    cl: &ClosedLoop,
    theta: f64,
    quad: &QuadratureConfig,
) -> Result<GrowthRate> {
    let lambda_max = require_admissible(cl, theta, quad)?;
    let scale = -1.0 / (2.0 * std::f64::consts::PI);
    let QuadResult {
        value,
        abs_error,
        evaluations,
        ..
    } = quad::integrate_half_line(
        |lambda| {
            let (phi, psi) = spectral_pair(cl, lambda)?;
            Ok(vec![
                scale * ln_det_delta_checked(&phi, &psi, theta, lambda)?,
            ])
        },
        &pole_breakpoints(cl),
        lambda_max,
        quad,
    )?;
    Ok(GrowthRate {
        ups: value[0],
        abs_error,
        evaluations,
        lambda_max,
    })
}

/// `ln det Δ` by LU factorization (principal branch); a cross-check of the
/// spectral route used in the quadrature.
pub fn ln_det_delta_lu(phi: &CMat, psi: &CMat, theta: f64) -> Result<Complex64> {
    matfun::logdet(&delta_matrix(phi, psi, theta)?)
}
