//! Lyapunov equations, Gramians and the LQG (θ → 0) limit of the cost.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{self, ClosedLoop};
use crate::{CMat, RMat};

/// Steady covariance, Gramians and Hankelian of a stable closed loop.
#[derive(Debug, Clone)]
pub struct GramianSet {
    /// Steady-state covariance: `𝒜Σ + Σ𝒜ᵀ + ℬℬᵀ = 0`.
    pub sigma: RMat,
    /// Controllability Gramian (equal to `sigma` here).
    pub controllability: RMat,
    /// Observability Gramian: `𝒜ᵀQ + Q𝒜 + 𝒞ᵀ𝒞 = 0`.
    pub observability: RMat,
    /// Hankelian `Q P`.
    pub hankelian: RMat,
}

/// Solves `A X + X Aᵀ + W = 0` for Hurwitz `A` and symmetric `W`.
///
/// Bartels–Stewart on the complex Schur form `A = U T U*`: the transformed
/// equation `T Y + Y T* = -U* W U` is solved by back-substitution, and the
/// symmetrized real part of `U Y U*` is returned.
pub fn solve_lyapunov(a: &RMat, w: &RMat) -> Result<RMat> {
    let n = a.nrows();
    if !a.is_square() || w.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Lyapunov equation needs square A and W of the same order, got {:?} and {:?}",
            a.shape(),
            w.shape()
        )));
    }
    let abscissa = model::spectral_abscissa(a);
    if !(abscissa < -model::HURWITZ_MARGIN) {
        return Err(Error::NotStabilizing(abscissa));
    }
    let (u, t) = crate::to_complex(a).schur().unpack();
    let wt = u.adjoint() * crate::to_complex(w) * &u;
    let mut y = CMat::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut rhs = -wt[(i, j)];
            for k in i + 1..n {
                rhs -= t[(i, k)] * y[(k, j)];
            }
            for k in j + 1..n {
                rhs -= y[(i, k)] * t[(j, k)].conj();
            }
            let denom: Complex64 = t[(i, i)] + t[(j, j)].conj();
            y[(i, j)] = rhs / denom;
        }
    }
    let x = (&u * y * u.adjoint()).map(|z| z.re);
    Ok((&x + x.transpose()) * 0.5)
}

/// Computes Σ, the Gramians and the Hankelian of a stabilizing closed loop.
pub fn gramians(cl: &ClosedLoop) -> Result<GramianSet> {
    let bb = &cl.b * cl.b.transpose();
    let sigma = solve_lyapunov(&cl.a, &bb)?;
    let cc = cl.c.transpose() * &cl.c;
    let obs = solve_lyapunov(&cl.a.transpose(), &cc)?;
    let hankelian = &obs * &sigma;
    Ok(GramianSet {
        controllability: sigma.clone(),
        sigma,
        observability: obs,
        hankelian,
    })
}

/// LQG cost `Υ₀ = ½ Tr(𝒞 Σ 𝒞ᵀ)`.
pub fn lqg_cost(cl: &ClosedLoop) -> Result<f64> {
    let g = gramians(cl)?;
    Ok(0.5 * (&cl.c * &g.sigma * cl.c.transpose()).trace())
}

/// The matrix `χ₀` with `χ₀ᵀ = [[H, Qℬ], [𝒞P, 0]]`, of size `(2n+m)×(2n+ν)`.
///
/// `χ₀ᵀ` collects the partial derivatives of `Υ₀` with respect to `𝒜, ℬ, 𝒞`.
pub fn chi0(cl: &ClosedLoop) -> Result<RMat> {
    let g = gramians(cl)?;
    let n2 = cl.a.nrows();
    let m = cl.m();
    let nu = cl.nu();
    let mut chi_t = RMat::zeros(n2 + nu, n2 + m);
    chi_t.view_mut((0, 0), (n2, n2)).copy_from(&g.hankelian);
    chi_t
        .view_mut((0, n2), (n2, m))
        .copy_from(&(&g.observability * &cl.b));
    chi_t
        .view_mut((n2, 0), (nu, n2))
        .copy_from(&(&cl.c * &g.controllability));
    Ok(chi_t.transpose())
}
