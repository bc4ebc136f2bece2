//! Entire functions of dense square matrices and their Gateaux derivatives.
//!
//! The exponential uses scaling and squaring with diagonal Padé approximants.
//! `cos` and `sin` of general (possibly defective) matrices go through
//! `exp(±iM)`. `sinc` and `tanc` of Hermitian and skew-Hermitian arguments
//! are evaluated on the eigendecomposition of a Hermitian matrix, which
//! handles the removable singularity at zero exactly; general arguments fall
//! back to a Taylor kernel with double-angle recovery.
//!
//! Gateaux derivatives are the `(2,1)` block of `f([[β, 0], [γ, β]])`.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMat, RMat};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Distance to an odd multiple of π/2 below which `tanc` refuses to evaluate.
pub const TANC_POLE_GUARD: f64 = 1e-8;
/// Distance to the closed negative real axis below which `logm` refuses.
pub const LOG_BRANCH_GUARD: f64 = 1e-10;

const PADE_THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub(crate) fn norm1<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn ensure_square<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn ensure_finite<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.clone().is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} has non-finite entries"
        )))
    }
}

fn same_dims(a: &CMat, b: &CMat, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn pade_low<T: ComplexField<RealField = f64> + Copy>(
    a: &DMatrix<T>,
    coeffs: &[f64],
) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut even = DMatrix::<T>::identity(n, n);
    let mut u_sum = DMatrix::<T>::identity(n, n) * T::from_real(coeffs[1]);
    let mut v_sum = DMatrix::<T>::identity(n, n) * T::from_real(coeffs[0]);
    for k in 1..coeffs.len() / 2 {
        even = &even * &a2;
        v_sum += &even * T::from_real(coeffs[2 * k]);
        u_sum += &even * T::from_real(coeffs[2 * k + 1]);
    }
    (a * u_sum, v_sum)
}

fn pade_13<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let b = |k: usize| T::from_real(PADE_13[k]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = a * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    (u, v)
}

fn expm_generic<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    ensure_square(a, "exp argument")?;
    ensure_finite(a, "exp argument")?;
    let nrm = norm1(a);
    let (u, v, squarings) = if nrm <= PADE_THETA[0] {
        let (u, v) = pade_low(a, &PADE_3);
        (u, v, 0)
    } else if nrm <= PADE_THETA[1] {
        let (u, v) = pade_low(a, &PADE_5);
        (u, v, 0)
    } else if nrm <= PADE_THETA[2] {
        let (u, v) = pade_low(a, &PADE_7);
        (u, v, 0)
    } else if nrm <= PADE_THETA[3] {
        let (u, v) = pade_low(a, &PADE_9);
        (u, v, 0)
    } else {
        let s = (nrm / PADE_THETA[4]).log2().ceil().max(0.0) as i32;
        let scaled = a * T::from_real(0.5f64.powi(s));
        let (u, v) = pade_13(&scaled);
        (u, v, s)
    };
    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Numerical("singular Padé denominator in exp".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    ensure_finite(&r, "exp result")?;
    Ok(r)
}

/// Matrix exponential `e^M`.
pub fn mat_exp(m: &CMat) -> Result<CMat> {
    expm_generic(m)
}

/// Matrix exponential of a real matrix, kept in real arithmetic.
pub fn mat_exp_real(m: &RMat) -> Result<RMat> {
    expm_generic(m)
}

/// `cos M = (e^{iM} + e^{-iM}) / 2`.
pub fn mat_cos(m: &CMat) -> Result<CMat> {
    let ip = mat_exp(&(m * I))?;
    let im = mat_exp(&(m * (-I)))?;
    Ok((ip + im) * Complex64::new(0.5, 0.0))
}

/// `sin M = (e^{iM} - e^{-iM}) / 2i`.
pub fn mat_sin(m: &CMat) -> Result<CMat> {
    let ip = mat_exp(&(m * I))?;
    let im = mat_exp(&(m * (-I)))?;
    Ok((ip - im) * Complex64::new(0.0, -0.5))
}

fn real_part_checked(m: &CMat, what: &str) -> Result<RMat> {
    let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let resid = m.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if resid > 1e-13 * scale {
        return Err(Error::Numerical(format!(
            "{what} of a real matrix left imaginary residue {resid:.3e}"
        )));
    }
    Ok(m.map(|z| z.re))
}

/// `cos M` for real `M`; the imaginary round-off is checked and dropped.
pub fn mat_cos_real(m: &RMat) -> Result<RMat> {
    real_part_checked(&mat_cos(&crate::to_complex(m))?, "cos")
}

/// `sin M` for real `M`; the imaginary round-off is checked and dropped.
pub fn mat_sin_real(m: &RMat) -> Result<RMat> {
    real_part_checked(&mat_sin(&crate::to_complex(m))?, "sin")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Structure {
    Hermitian,
    SkewHermitian,
    General,
}

fn structure(m: &CMat) -> Structure {
    let tol = 1e-13 * (1.0 + norm1(m));
    let adj = m.adjoint();
    if norm1(&(m - &adj)) <= tol {
        Structure::Hermitian
    } else if norm1(&(m + &adj)) <= tol {
        Structure::SkewHermitian
    } else {
        Structure::General
    }
}

/// Eigendecomposition `H = V diag(h) V*` of a Hermitian matrix (symmetrized first).
pub(crate) fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub(crate) fn from_spectrum(vecs: &CMat, vals: &[Complex64]) -> CMat {
    let mut scaled = vecs.clone();
    for (j, v) in vals.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= v;
        }
    }
    scaled * vecs.adjoint()
}

/// Applies `g` to a skew-Hermitian `M` through `iM = V diag(h) V*`:
/// returns `V diag(g(h)) V*` where `g(h)` must equal `f(-ih)`.
pub(crate) fn skew_hermitian_apply(m: &CMat, g: impl Fn(f64) -> Complex64) -> CMat {
    let (h, v) = hermitian_eigen(&(m * I));
    let vals: Vec<Complex64> = h.iter().map(|&x| g(x)).collect();
    from_spectrum(&v, &vals)
}

fn hermitian_apply(m: &CMat, g: impl Fn(f64) -> Result<Complex64>) -> Result<CMat> {
    let (mu, v) = hermitian_eigen(m);
    let vals = mu.iter().map(|&x| g(x)).collect::<Result<Vec<_>>>()?;
    Ok(from_spectrum(&v, &vals))
}

/// `sin x / x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `sinh x / x` with the removable singularity filled in.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `tanh x / x` with the removable singularity filled in.
pub fn tanhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tanh() / x
    }
}

/// `ln cosh x`, accurate for small `x`.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        let s = (0.5 * a).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    }
}

fn pole_distance(z: Complex64) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let k = ((z.re - half_pi) / std::f64::consts::PI).round();
    let pole = half_pi + k * std::f64::consts::PI;
    (z - pole).norm()
}

fn tanc_scalar(x: f64) -> Result<Complex64> {
    let d = pole_distance(Complex64::new(x, 0.0));
    if d < TANC_POLE_GUARD {
        return Err(Error::PoleProximity(d));
    }
    let v = if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 15.0
    } else {
        x.tan() / x
    };
    Ok(Complex64::new(v, 0.0))
}

/// Taylor kernel for `(sinc X, cos X)` after scaling `X` by `2^-s`, then
/// doubling with `sinc 2X = sinc X · cos X`, `cos 2X = 2 cos² X − I`.
fn sinc_cos_series(m: &CMat) -> (CMat, CMat) {
    let n = m.nrows();
    let nrm = norm1(m);
    let s = if nrm > 0.5 {
        (nrm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = m * Complex64::new(0.5f64.powi(s), 0.0);
    let x2 = &x * &x;
    let id = CMat::identity(n, n);
    let mut sinc_acc = id.clone();
    let mut cos_acc = id.clone();
    let mut power = id.clone();
    // term_k of sinc: (-1)^k x^{2k}/(2k+1)!, of cos: (-1)^k x^{2k}/(2k)!
    let mut fact_even = 1.0f64;
    for k in 1..=14 {
        power = &power * &x2;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        fact_even *= (2 * k - 1) as f64 * (2 * k) as f64;
        let fact_odd = fact_even * (2 * k + 1) as f64;
        cos_acc += &power * Complex64::new(sign / fact_even, 0.0);
        sinc_acc += &power * Complex64::new(sign / fact_odd, 0.0);
        if norm1(&power) / fact_even < 1e-20 {
            break;
        }
    }
    for _ in 0..s {
        sinc_acc = &sinc_acc * &cos_acc;
        cos_acc = (&cos_acc * &cos_acc) * Complex64::new(2.0, 0.0) - &id;
    }
    (sinc_acc, cos_acc)
}

/// Matrix `sinc M = M⁻¹ sin M`, with `sinc 0 = I`.
pub fn sinc_mat(m: &CMat) -> Result<CMat> {
    ensure_square(m, "sinc argument")?;
    ensure_finite(m, "sinc argument")?;
    Ok(match structure(m) {
        Structure::Hermitian => hermitian_apply(m, |x| Ok(Complex64::new(sinc(x), 0.0)))?,
        Structure::SkewHermitian => skew_hermitian_apply(m, |h| Complex64::new(sinhc(h), 0.0)),
        Structure::General => sinc_cos_series(m).0,
    })
}

/// Matrix `tanc M = M⁻¹ tan M`, with `tanc 0 = I`.
///
/// Fails with [`Error::PoleProximity`] when an eigenvalue of `M` lies within
/// [`TANC_POLE_GUARD`] of an odd multiple of π/2.
pub fn tanc_mat(m: &CMat) -> Result<CMat> {
    ensure_square(m, "tanc argument")?;
    ensure_finite(m, "tanc argument")?;
    match structure(m) {
        Structure::Hermitian => hermitian_apply(m, tanc_scalar),
        // eigenvalues -ih are purely imaginary, far from the real poles
        Structure::SkewHermitian => Ok(skew_hermitian_apply(m, |h| Complex64::new(tanhc(h), 0.0))),
        Structure::General => {
            let eig = m
                .clone()
                .schur()
                .eigenvalues()
                .ok_or_else(|| Error::Numerical("Schur form did not converge".into()))?;
            let d = eig
                .iter()
                .map(|&z| pole_distance(z))
                .fold(f64::INFINITY, f64::min);
            if d < TANC_POLE_GUARD {
                return Err(Error::PoleProximity(d));
            }
            let (s, c) = sinc_cos_series(m);
            c.lu()
                .solve(&s)
                .ok_or_else(|| Error::Numerical("singular cos in tanc".into()))
        }
    }
}

/// The `2ν×2ν` block matrix `[[β, 0], [γ, β]]`.
pub fn block_lower(beta: &CMat, gamma: &CMat) -> CMat {
    let n = beta.nrows();
    let mut out = CMat::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(beta);
    out.view_mut((n, n), (n, n)).copy_from(beta);
    out.view_mut((n, 0), (n, n)).copy_from(gamma);
    out
}

fn block21(m: &CMat) -> CMat {
    let n = m.nrows() / 2;
    m.view((n, 0), (n, n)).into_owned()
}

fn gateaux_prep(beta: &CMat, gamma: &CMat) -> Result<CMat> {
    ensure_square(beta, "Gateaux base point")?;
    same_dims(beta, gamma, "Gateaux direction must match base point")?;
    Ok(block_lower(beta, gamma))
}

/// `exp'(β)[γ]`.
pub fn gateaux_exp(beta: &CMat, gamma: &CMat) -> Result<CMat> {
    Ok(block21(&mat_exp(&gateaux_prep(beta, gamma)?)?))
}

/// `cos'(β)[γ]`, the `(2,1)` block of `cos [[β,0],[γ,β]]`.
pub fn gateaux_cos(beta: &CMat, gamma: &CMat) -> Result<CMat> {
    Ok(block21(&mat_cos(&gateaux_prep(beta, gamma)?)?))
}

/// `sin'(β)[γ]`, the `(2,1)` block of `sin [[β,0],[γ,β]]`.
pub fn gateaux_sin(beta: &CMat, gamma: &CMat) -> Result<CMat> {
    Ok(block21(&mat_sin(&gateaux_prep(beta, gamma)?)?))
}

/// `sinc'(β)[γ]`, the `(2,1)` block of `sinc [[β,0],[γ,β]]`.
pub fn gateaux_sinc(beta: &CMat, gamma: &CMat) -> Result<CMat> {
    Ok(block21(&sinc_mat(&gateaux_prep(beta, gamma)?)?))
}

/// The entire functions with Gateaux derivatives available in this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntireFn {
    Exp,
    Cos,
    Sin,
    Sinc,
}

impl EntireFn {
    pub fn apply(self, m: &CMat) -> Result<CMat> {
        match self {
            EntireFn::Exp => mat_exp(m),
            EntireFn::Cos => mat_cos(m),
            EntireFn::Sin => mat_sin(m),
            EntireFn::Sinc => sinc_mat(m),
        }
    }

    pub fn gateaux(self, beta: &CMat, gamma: &CMat) -> Result<CMat> {
        match self {
            EntireFn::Exp => gateaux_exp(beta, gamma),
            EntireFn::Cos => gateaux_cos(beta, gamma),
            EntireFn::Sin => gateaux_sin(beta, gamma),
            EntireFn::Sinc => gateaux_sinc(beta, gamma),
        }
    }
}

/// Both sides of the trace adjoint identity
/// `Tr(α f'(β)[δβ]) = Tr(f'(β)[α] δβ)`.
pub fn trace_adjoint_check(
    f: EntireFn,
    alpha: &CMat,
    beta: &CMat,
    dbeta: &CMat,
) -> Result<(Complex64, Complex64)> {
    same_dims(alpha, beta, "alpha vs beta")?;
    same_dims(dbeta, beta, "delta beta vs beta")?;
    let lhs = (alpha * f.gateaux(beta, dbeta)?).trace();
    let rhs = (f.gateaux(beta, alpha)? * dbeta).trace();
    Ok((lhs, rhs))
}

fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    m.clone()
        .schur()
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("Schur form did not converge".into()))
}

fn sqrtm_denman_beavers(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = CMat::identity(n, n);
    let half = Complex64::new(0.5, 0.0);
    for _ in 0..100 {
        let y_inv = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular iterate in square root".into()))?;
        let z_inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular iterate in square root".into()))?;
        let y_next = (&y + z_inv) * half;
        let z_next = (&z + y_inv) * half;
        let change = norm1(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if change <= 1e-15 * norm1(&y) {
            return Ok(y);
        }
    }
    Err(Error::Numerical(
        "square root iteration did not converge".into(),
    ))
}

/// Principal matrix logarithm by inverse scaling and squaring.
pub fn logm_principal(m: &CMat) -> Result<CMat> {
    ensure_square(m, "log argument")?;
    ensure_finite(m, "log argument")?;
    let scale = norm1(m).max(f64::MIN_POSITIVE);
    for z in eigenvalues(m)? {
        let on_cut = z.re <= 0.0 && z.im.abs() <= LOG_BRANCH_GUARD * scale;
        if on_cut || z.norm() <= LOG_BRANCH_GUARD * scale {
            return Err(Error::BranchCut(format!("eigenvalue {z}")));
        }
    }
    let n = m.nrows();
    let id = CMat::identity(n, n);
    let mut x = m.clone();
    let mut roots = 0;
    while norm1(&(&x - &id)) > 0.25 {
        x = sqrtm_denman_beavers(&x)?;
        roots += 1;
        if roots > 60 {
            return Err(Error::Numerical("too many square roots in log".into()));
        }
    }
    // log X = 2 atanh((X - I)(X + I)^{-1})
    let z = (&x + &id)
        .transpose()
        .lu()
        .solve(&(&x - &id).transpose())
        .ok_or_else(|| Error::Numerical("singular X + I in log".into()))?
        .transpose();
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut acc = z.clone();
    for k in 1..60 {
        term = &term * &z2;
        let add = &term * Complex64::new(1.0 / (2 * k + 1) as f64, 0.0);
        let small = norm1(&add) < 1e-18 * norm1(&acc).max(1e-300);
        acc += add;
        if small {
            break;
        }
    }
    Ok(acc * Complex64::new(2.0 * 2f64.powi(roots), 0.0))
}

/// Principal `ln det M` from a partially pivoted LU factorization.
pub fn logdet(m: &CMat) -> Result<Complex64> {
    ensure_square(m, "logdet argument")?;
    ensure_finite(m, "logdet argument")?;
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d.norm() == 0.0 {
            return Err(Error::BranchCut("singular matrix".into()));
        }
        acc += d.ln();
    }
    let sign: Complex64 = lu.p().determinant();
    if sign.re < 0.0 {
        acc += Complex64::new(0.0, std::f64::consts::PI);
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut arg = acc.im.rem_euclid(two_pi);
    if arg > std::f64::consts::PI {
        arg -= two_pi;
    }
    if std::f64::consts::PI - arg.abs() < LOG_BRANCH_GUARD {
        return Err(Error::BranchCut(
            "determinant on the negative real axis".into(),
        ));
    }
    Ok(Complex64::new(acc.re, arg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cdiag(d: &[f64]) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            d.len(),
            d.iter().map(|&x| c(x)),
        ))
    }

    fn max_abs(m: &CMat) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn random_complex(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
        CMat::from_fn(n, n, |_, _| {
            Complex64::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            )
        })
    }

    #[test]
    fn exp_identity_and_diagonal() {
        let z = mat_exp(&CMat::zeros(2, 2)).unwrap();
        assert_abs_diff_eq!(max_abs(&(z - CMat::identity(2, 2))), 0.0);
        let d = mat_exp(&cdiag(&[1.0, -1.0])).unwrap();
        assert!((d[(0, 0)].re - E).abs() <= 1e-12 * E);
        assert!((d[(1, 1)].re - 1.0 / E).abs() <= 1e-12 / E);
        assert!(d[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn exp_rotation_closed_form() {
        let jmat = RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        for &t in &[FRAC_PI_2, 0.3, 7.5] {
            let e = mat_exp_real(&(&jmat * t)).unwrap();
            let expected = RMat::identity(2, 2) * t.cos() + &jmat * t.sin();
            assert!((e - expected).abs().max() < 1e-13);
        }
    }

    #[test]
    fn exp_rejects_non_finite() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = c(f64::NAN);
        assert!(matches!(mat_exp(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn exp_large_norm_uses_squaring() {
        let m = cdiag(&[12.0, -30.0]);
        let e = mat_exp(&m).unwrap();
        assert!((e[(0, 0)].re / 12f64.exp() - 1.0).abs() < 1e-13);
        assert!((e[(1, 1)].re / (-30f64).exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cos_sin_basic_values() {
        let cz = mat_cos(&CMat::zeros(3, 3)).unwrap();
        assert!(max_abs(&(cz - CMat::identity(3, 3))) < 1e-15);
        let s = mat_sin_real(&RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            FRAC_PI_2, 0.0,
        ])))
        .unwrap();
        assert!(
            (s - RMat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0])))
                .abs()
                .max()
                < 1e-14
        );
    }

    #[test]
    fn pythagorean_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random_complex(&mut rng, 3, 1.0);
            let cm = mat_cos(&m).unwrap();
            let sm = mat_sin(&m).unwrap();
            let resid = &cm * &cm + &sm * &sm - CMat::identity(3, 3);
            assert!(max_abs(&resid) < 1e-10, "{}", max_abs(&resid));
        }
    }

    #[test]
    fn sinc_values() {
        let s0 = sinc_mat(&CMat::zeros(2, 2)).unwrap();
        assert!(max_abs(&(s0 - CMat::identity(2, 2))) < 1e-15);
        let s = sinc_mat(&cdiag(&[PI, 0.0])).unwrap();
        assert!(max_abs(&(s - cdiag(&[0.0, 1.0]))) < 1e-15);
    }

    #[test]
    fn sinc_general_route_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for scale in [0.1, 1.0, 4.0] {
            let m = random_complex(&mut rng, 4, scale);
            let s = sinc_mat(&m).unwrap();
            // M sinc M = sin M
            let resid = &m * &s - mat_sin(&m).unwrap();
            assert!(max_abs(&resid) < 1e-10 * (1.0 + max_abs(&mat_sin(&m).unwrap())));
        }
    }

    #[test]
    fn tanc_of_skew_hermitian_is_hermitian_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_complex(&mut rng, 4, 1.0);
        let skew = &a - a.adjoint();
        let t = tanc_mat(&skew).unwrap();
        assert!(max_abs(&(&t - t.adjoint())) < 1e-13);
        // oracle: eigenvalues of the Hermitian iΨ
        let (h, _) = hermitian_eigen(&(&skew * I));
        let mut expected: Vec<f64> = h.iter().map(|&x| x.tanh() / x).collect();
        expected.sort_by(f64::total_cmp);
        let (mut got, _) = hermitian_eigen(&t);
        got.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
            assert!(*g > 0.0 && *g <= 1.0);
        }
    }

    #[test]
    fn tanc_pole_guard() {
        let m = cdiag(&[FRAC_PI_2 + 1e-10, 0.0]);
        assert!(matches!(tanc_mat(&m), Err(Error::PoleProximity(_))));
        let general = CMat::from_row_slice(2, 2, &[c(FRAC_PI_2), c(1.0), c(0.0), c(0.3)]);
        assert!(matches!(tanc_mat(&general), Err(Error::PoleProximity(_))));
    }

    #[test]
    fn tanc_general_matches_tan_definition() {
        let m = CMat::from_row_slice(2, 2, &[c(0.3), c(0.4), c(0.0), c(-0.2)]);
        let t = tanc_mat(&m).unwrap();
        let tan = mat_cos(&m)
            .unwrap()
            .lu()
            .solve(&mat_sin(&m).unwrap())
            .unwrap();
        assert!(max_abs(&(&m * &t - tan)) < 1e-13);
    }

    #[test]
    fn gateaux_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_complex(&mut rng, 3, 1.0);
        let z = CMat::zeros(3, 3);
        assert!(max_abs(&gateaux_cos(&z, &g).unwrap()) < 1e-15);
        assert!(max_abs(&(gateaux_sin(&z, &g).unwrap() - &g)) < 1e-14);
    }

    #[test]
    fn gateaux_cos_scalar_fd() {
        for &(b, g) in &[(0.7, 1.3), (-2.1, 0.4), (3.0, -1.0)] {
            let got = gateaux_cos(&cdiag(&[b]), &cdiag(&[g])).unwrap()[(0, 0)].re;
            let h = 1e-5;
            let fd = g * ((b + h).cos() - (b - h).cos()) / (2.0 * h);
            assert!((got - fd).abs() < 1e-8);
            assert!((got + g * b.sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn gateaux_dimension_mismatch() {
        let r = gateaux_cos(&CMat::zeros(2, 2), &CMat::zeros(3, 3));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn trace_adjoint_exp_identity_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let db = random_complex(&mut rng, 3, 1.0);
        let (lhs, rhs) = trace_adjoint_check(
            EntireFn::Exp,
            &CMat::identity(3, 3),
            &CMat::zeros(3, 3),
            &db,
        )
        .unwrap();
        assert!((lhs - db.trace()).norm() < 1e-14);
        assert!((rhs - db.trace()).norm() < 1e-14);
    }

    #[test]
    fn commuting_direction_reduces_to_ordinary_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = random_complex(&mut rng, 3, 1.0);
        let ds = gateaux_sin(&b, &b).unwrap();
        let expected = &b * mat_cos(&b).unwrap();
        assert!(max_abs(&(ds - expected)) < 1e-12);
    }

    #[test]
    fn logdet_values() {
        assert!(logdet(&CMat::identity(3, 3)).unwrap().norm() < 1e-15);
        let l = logdet(&cdiag(&[2.0, 3.0])).unwrap();
        assert!((l.re - 6f64.ln()).abs() < 1e-14 && l.im.abs() < 1e-15);
        assert!(matches!(
            logdet(&cdiag(&[-1.0, 1.0])),
            Err(Error::BranchCut(_))
        ));
    }

    #[test]
    fn logm_round_trip_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let a = RMat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let sym = (&a + a.transpose()) * 0.2;
            let s = crate::to_complex(&sym);
            let e = mat_exp(&s).unwrap();
            let l = logm_principal(&e).unwrap();
            assert!(max_abs(&(&l - &s)) < 1e-12);
            let ld = logdet(&e).unwrap();
            assert!((ld - l.trace()).norm() < 1e-8);
        }
    }

    #[test]
    fn logm_branch_cut() {
        let m = cdiag(&[-2.0, 1.0]);
        assert!(matches!(logm_principal(&m), Err(Error::BranchCut(_))));
    }

    #[test]
    fn ln_cosh_small_and_large() {
        for &x in &[0.5f64, 2.0, 40.0] {
            let direct = x.cosh().ln();
            assert!((ln_cosh(x) - direct).abs() <= 1e-14 * direct);
        }
        for &x in &[1e-3f64, 1e-2] {
            let x2 = x * x;
            let series =
                x2 / 2.0 - x2 * x2 / 12.0 + x2 * x2 * x2 / 45.0 - 17.0 * x2 * x2 * x2 * x2 / 2520.0;
            assert!((ln_cosh(x) - series).abs() <= 1e-14 * series);
        }
        assert!((ln_cosh(1e-9) - 5e-19).abs() < 1e-30);
    }
}
