//! Time-domain reference for the growth rate.
//!
//! The commutator and covariance kernels of the closed-loop output are
//! sampled on a uniform grid over `[0, T]` and turned into symmetric
//! Nyström operators `L_T` (real antisymmetric) and `P_T` (real symmetric).
//! With `σₖ² ` the eigenvalues of `L_TᵀL_T`,
//!
//! `ln Ξ_T = −½ (Σ ln cosh θσₖ + ln det(I − θ √K P_T √K))`, `K = tanhc(θ|L_T|)`.
//!
//! Dense eigensolvers on `Nν × Nν` matrices make this validation-only.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::gramians;
use crate::matfun::{ln_cosh, mat_exp_real, tanhc};
use crate::model::{self, ClosedLoop};
use crate::RMat;

pub const DEFAULT_POINTS: usize = 800;
/// Default horizon in units of `1/|Re λmax(𝒜)|`.
pub const DEFAULT_HORIZON_FACTOR: f64 = 40.0;
/// Relative floor for the positivity checks of `P_T` and `P_T + iL_T`.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Two-point commutation kernel `Λ(τ)` on a set of lags.
#[derive(Debug, Clone)]
pub struct CCRKernel {
    pub taus: Vec<f64>,
    pub values: Vec<RMat>,
}

/// `Λ(τ) = e^{τ𝒜}Γ` for `τ ≥ 0` and `Γe^{−τ𝒜ᵀ}` for `τ < 0`.
pub fn ccr_value(cl: &ClosedLoop, tau: f64) -> Result<RMat> {
    if tau >= 0.0 {
        Ok(mat_exp_real(&(&cl.a * tau))? * &cl.gamma)
    } else {
        Ok(&cl.gamma * mat_exp_real(&(cl.a.transpose() * -tau))?)
    }
}

pub fn ccr_kernel(cl: &ClosedLoop, taus: &[f64]) -> Result<CCRKernel> {
    if taus.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("lag grid must be finite".into()));
    }
    let values = taus
        .iter()
        .map(|&t| ccr_value(cl, t))
        .collect::<Result<_>>()?;
    Ok(CCRKernel {
        taus: taus.to_vec(),
        values,
    })
}

impl CCRKernel {
    /// `(Λ₁₁, Λ₁₂, Λ₂₁)` at index `i`, each `n×n`.
    pub fn blocks(&self, i: usize) -> (RMat, RMat, RMat) {
        let v = &self.values[i];
        let n = v.nrows() / 2;
        (
            v.view((0, 0), (n, n)).into_owned(),
            v.view((0, n), (n, n)).into_owned(),
            v.view((n, 0), (n, n)).into_owned(),
        )
    }
}

/// Max-abs residual of `Λ̇₁₁ = AΛ₁₁ + EcΛ₂₁`, `Λ̇₂₁ = bCΛ₁₁ + aΛ₂₁` at a
/// lag `τ > 0`, with the derivative from central differences of step `h`.
pub fn kernel_ode_residual(cl: &ClosedLoop, tau: f64, h: f64) -> Result<f64> {
    let n = cl.n();
    let plus = ccr_value(cl, tau + h)?;
    let minus = ccr_value(cl, tau - h)?;
    let mid = ccr_value(cl, tau)?;
    let deriv = (plus - minus) / (2.0 * h);
    let l11 = mid.view((0, 0), (n, n));
    let l21 = mid.view((n, 0), (n, n));
    let a11 = cl.a.view((0, 0), (n, n));
    let a12 = cl.a.view((0, n), (n, n));
    let a21 = cl.a.view((n, 0), (n, n));
    let a22 = cl.a.view((n, n), (n, n));
    let r11 = deriv.view((0, 0), (n, n)) - (a11 * l11 + a12 * l21);
    let r21 = deriv.view((n, 0), (n, n)) - (a21 * l11 + a22 * l21);
    Ok(model::max_abs(&r11.into_owned()).max(model::max_abs(&r21.into_owned())))
}

/// Discretized operators on `[0, T]`.
#[derive(Debug, Clone)]
pub struct OracleGrid {
    pub horizon: f64,
    pub points: usize,
    pub nu: usize,
    pub weights: Vec<f64>,
    /// `L_T`, `Nν × Nν`, blockwise `√wᵢ ℧(sᵢ − sⱼ) √wⱼ`.
    pub l: Mat<f64>,
    /// `P_T`, `Nν × Nν`, blockwise `√wᵢ P(sᵢ − sⱼ) √wⱼ`.
    pub p: Mat<f64>,
}

/// Default horizon `40 / |Re λmax(𝒜)|`.
pub fn default_horizon(cl: &ClosedLoop) -> f64 {
    DEFAULT_HORIZON_FACTOR / model::spectral_abscissa(&cl.a).abs()
}

/// Samples `℧(τ) = 𝒞e^{τ𝒜}Γ𝒞ᵀ` and `P(τ) = 𝒞e^{τ𝒜}Σ𝒞ᵀ` at the grid lags
/// and assembles the trapezoidal Nyström operators.
pub fn build_operators(cl: &ClosedLoop, horizon: f64, points: usize) -> Result<OracleGrid> {
    if points < 2 {
        return Err(Error::InvalidInput(
            "oracle grid needs at least 2 points".into(),
        ));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(
            "oracle horizon must be positive".into(),
        ));
    }
    if !cl.is_hurwitz() {
        return Err(Error::NotStabilizing(model::spectral_abscissa(&cl.a)));
    }
    let sigma = gramians::gramians(cl)?.sigma;
    let nu = cl.nu();
    let h = horizon / (points - 1) as f64;
    let step = mat_exp_real(&(&cl.a * h))?;
    let gc = &cl.gamma * cl.c.transpose();
    let sc = &sigma * cl.c.transpose();
    let mut mho = Vec::with_capacity(points);
    let mut cov = Vec::with_capacity(points);
    let mut power = RMat::identity(cl.a.nrows(), cl.a.nrows());
    for _ in 0..points {
        let ce = &cl.c * &power;
        mho.push(&ce * &gc);
        cov.push(&ce * &sc);
        power = &power * &step;
    }
    let mut weights = vec![h; points];
    weights[0] = 0.5 * h;
    weights[points - 1] = 0.5 * h;
    let root: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();

    let dim = points * nu;
    let l = Mat::<f64>::from_fn(dim, dim, |r, c| {
        let (i, a) = (r / nu, r % nu);
        let (j, b) = (c / nu, c % nu);
        let s = root[i] * root[j];
        if i >= j {
            s * mho[i - j][(a, b)]
        } else {
            // ℧(−τ) = −℧(τ)ᵀ
            -s * mho[j - i][(b, a)]
        }
    });
    let p = Mat::<f64>::from_fn(dim, dim, |r, c| {
        let (i, a) = (r / nu, r % nu);
        let (j, b) = (c / nu, c % nu);
        let s = root[i] * root[j];
        if i >= j {
            s * cov[i - j][(a, b)]
        } else {
            s * cov[j - i][(b, a)]
        }
    });
    Ok(OracleGrid {
        horizon,
        points,
        nu,
        weights,
        l,
        p,
    })
}

fn max_abs_faer(m: &Mat<f64>) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

impl OracleGrid {
    /// `max |L + Lᵀ|` and `max |P − Pᵀ|`.
    pub fn symmetry_defects(&self) -> (f64, f64) {
        let lt = self.l.transpose().to_owned();
        let pt = self.p.transpose().to_owned();
        (
            max_abs_faer(&(&self.l + &lt)),
            max_abs_faer(&(&self.p - &pt)),
        )
    }

    fn psd_with_shift(m: &Mat<f64>, shift: f64) -> bool {
        let mut s = m.clone();
        for i in 0..s.nrows() {
            s[(i, i)] += shift;
        }
        s.llt(Side::Lower).is_ok()
    }

    /// `P_T ⪰ −tol·‖P_T‖` by Cholesky of the shifted operator.
    pub fn p_is_psd(&self) -> bool {
        let scale = max_abs_faer(&self.p).max(f64::MIN_POSITIVE);
        Self::psd_with_shift(&self.p, PSD_TOLERANCE * scale)
    }

    /// `P_T + iL_T ⪰ −tol·‖P_T‖`, through the real form `[[P, −L], [L, P]]`.
    pub fn quantum_covariance_is_psd(&self) -> bool {
        let d = self.p.nrows();
        let big = Mat::<f64>::from_fn(2 * d, 2 * d, |r, c| {
            let (rb, cb) = (r / d, c / d);
            let (i, j) = (r % d, c % d);
            match (rb, cb) {
                (0, 0) | (1, 1) => self.p[(i, j)],
                (0, 1) => -self.l[(i, j)],
                _ => self.l[(i, j)],
            }
        });
        let scale = max_abs_faer(&self.p).max(f64::MIN_POSITIVE);
        Self::psd_with_shift(&big, PSD_TOLERANCE * scale)
    }
}

/// Finite-horizon QEF and the spectral diagnostics behind it.
#[derive(Debug, Clone)]
pub struct OracleResult {
    pub ln_xi: f64,
    /// `θ λmax(P_T K_T)`.
    pub spec_value: f64,
    /// Extreme eigenvalues of `K_T`.
    pub k_min: f64,
    pub k_max: f64,
    /// `min |eig(iL_T)| / max |eig(iL_T)|`; small values flag near-zero
    /// eigenvalues, which are reported but not rejected.
    pub l_min_rel_eig: f64,
}

/// `ln Ξ_T = −½ Tr(ln cos(θL_T) + ln(I − θP_T K_T))`.
pub fn finite_horizon_qef(grid: &OracleGrid, theta: f64) -> Result<OracleResult> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidInput("theta must be non-negative".into()));
    }
    let ltl = grid.l.transpose() * &grid.l;
    let eig = ltl
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed on L^T L: {e:?}")))?;
    let s = eig.S().column_vector();
    let v = eig.U();
    let dim = s.nrows();
    let sig: Vec<f64> = (0..dim).map(|i| s[i].max(0.0).sqrt()).collect();
    let smax = sig.iter().copied().fold(0.0, f64::max);
    let smin = sig.iter().copied().fold(f64::INFINITY, f64::min);
    let k_diag: Vec<f64> = sig.iter().map(|&x| tanhc(theta * x)).collect();
    let ln_cos: f64 = sig.iter().map(|&x| ln_cosh(theta * x)).sum();

    // √K P √K is isospectral to D^½ (Vᵀ P V) D^½
    let vpv = v.transpose() * &grid.p * v;
    let root: Vec<f64> = k_diag.iter().map(|k| k.sqrt()).collect();
    let m = Mat::<f64>::from_fn(dim, dim, |i, j| {
        0.5 * root[i] * root[j] * (vpv[(i, j)] + vpv[(j, i)])
    });
    let mu = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed on sqrt(K) P sqrt(K): {e:?}")))?;
    let mu_max = mu.iter().copied().fold(0.0, f64::max);
    let spec_value = theta * mu_max;
    if !(spec_value < 1.0) {
        return Err(Error::Inadmissible(format!(
            "theta lambda_max(P_T K_T) = {spec_value:.6} >= 1"
        )));
    }
    let ln_det: f64 = mu.iter().map(|&x| (-theta * x).ln_1p()).sum();
    Ok(OracleResult {
        ln_xi: -0.5 * (ln_cos + ln_det),
        spec_value,
        k_min: k_diag.iter().copied().fold(f64::INFINITY, f64::min),
        k_max: k_diag.iter().copied().fold(0.0, f64::max),
        l_min_rel_eig: if smax > 0.0 { smin / smax } else { 0.0 },
    })
}

/// `(T, ln Ξ_T / T)` for each horizon.
pub fn growth_rate_estimate(
    cl: &ClosedLoop,
    theta: f64,
    horizons: &[f64],
    points: usize,
) -> Result<Vec<(f64, f64)>> {
    horizons
        .iter()
        .map(|&t| {
            let grid = build_operators(cl, t, points)?;
            Ok((t, finite_horizon_qef(&grid, theta)?.ln_xi / t))
        })
        .collect()
}
