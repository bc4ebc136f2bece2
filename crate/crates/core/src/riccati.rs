//! Continuous-time algebraic Riccati equations.
//!
//! `aᵀX + Xa − XgX + q = 0` with `g, q` symmetric PSD is solved for the
//! stabilizing `X` (so that `a − gX` is Hurwitz) by the matrix sign function
//! of the Hamiltonian, then polished with Newton–Kleinman steps.

use crate::error::{Error, Result};
use crate::gramians::solve_lyapunov;
use crate::model::{self, max_abs};
use crate::RMat;

const SIGN_MAX_ITERS: usize = 100;
const NEWTON_MAX_ITERS: usize = 20;

fn care_residual(a: &RMat, g: &RMat, q: &RMat, x: &RMat) -> RMat {
    a.transpose() * x + x * a - x * g * x + q
}

fn matrix_sign(h: &RMat) -> Result<RMat> {
    let n = h.nrows();
    let mut z = h.clone();
    for _ in 0..SIGN_MAX_ITERS {
        let lu = z.clone().lu();
        let det = lu.determinant();
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::Riccati(
                "Hamiltonian has eigenvalues on the imaginary axis".into(),
            ));
        }
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Riccati("singular iterate in sign function".into()))?;
        let c = det.abs().powf(1.0 / n as f64);
        let next = (&z / c + inv * c) * 0.5;
        let change = max_abs(&(&next - &z));
        let scale = max_abs(&next);
        z = next;
        if change <= 1e-13 * scale {
            return Ok(z);
        }
    }
    Err(Error::Riccati("sign iteration did not converge".into()))
}

/// Stabilizing solution of `aᵀX + Xa − XgX + q = 0`.
pub fn solve_care(a: &RMat, g: &RMat, q: &RMat) -> Result<RMat> {
    let n = a.nrows();
    if !a.is_square() || g.shape() != (n, n) || q.shape() != (n, n) {
        return Err(Error::Dimension(
            "Riccati coefficients must be square and of equal order".into(),
        ));
    }
    let mut h = RMat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&-g);
    h.view_mut((n, 0), (n, n)).copy_from(&-q);
    h.view_mut((n, n), (n, n)).copy_from(&-a.transpose());
    let w = matrix_sign(&h)?;

    // the stable subspace [I; X] lies in the kernel of W + I
    let id = RMat::identity(n, n);
    let mut lhs = RMat::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n))
        .copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w.view((n, n), (n, n)) + &id));
    let mut rhs = RMat::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&-(w.view((0, 0), (n, n)) + &id));
    rhs.view_mut((n, 0), (n, n))
        .copy_from(&-w.view((n, 0), (n, n)));
    let svd = lhs.svd(true, true);
    let mut x = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Riccati(format!("least-squares step failed: {e}")))?;
    x = (&x + x.transpose()) * 0.5;

    let mut best = max_abs(&care_residual(a, g, q, &x));
    for _ in 0..NEWTON_MAX_ITERS {
        let ak = a - g * &x;
        if !model::is_hurwitz(&ak) {
            break;
        }
        let w = &x * g * &x + q;
        let next = match solve_lyapunov(&ak.transpose(), &w) {
            Ok(v) => v,
            Err(_) => break,
        };
        let r = max_abs(&care_residual(a, g, q, &next));
        if !(r < best) {
            break;
        }
        x = next;
        best = r;
    }
    if !model::is_hurwitz(&(a - g * &x)) {
        return Err(Error::Riccati("solution is not stabilizing".into()));
    }
    let scale = 1.0 + max_abs(q) + max_abs(&x) * (max_abs(a) + max_abs(g) * max_abs(&x));
    if best > 1e-9 * scale {
        return Err(Error::Riccati(format!("residual {best:.3e} too large")));
    }
    Ok(x)
}
