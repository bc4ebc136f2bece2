//! Quantum plant, measurement model and closed-loop assembly.
//!
//! A plant is described by its physical parameters: the CCR matrix `Θ`,
//! energy matrix `R`, field coupling `M`, controller coupling `N` and the
//! static measurement matrix `D`. The state-space matrices follow from
//!
//! ```text
//! A = 2Θ(R + MᵀJM),  B = 2ΘMᵀ,  E = 2ΘNᵀ,  C = 2DJM
//! ```
//!
//! and automatically satisfy the physical realizability identities
//! `AΘ + ΘAᵀ + BJBᵀ = 0` and `ΘCᵀ + BJDᵀ = 0`. Everything is validated
//! eagerly, so downstream code may assume the invariants.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{CMat, RMat};

/// Absolute tolerance on realizability residuals for O(1) matrices.
pub const PR_TOLERANCE: f64 = 1e-10;
/// A matrix is Hurwitz when its spectral abscissa is below `-HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-9;
/// Smallest admissible eigenvalue of `DDᵀ`.
pub const MEASUREMENT_RANK_TOL: f64 = 1e-10;
/// Largest admissible entry of `DJDᵀ`.
pub const MEASUREMENT_COMMUTE_TOL: f64 = 1e-12;

/// Physical parameters of the quantum plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    /// CCR matrix `Θ` (n×n, antisymmetric).
    pub ccr: RMat,
    /// Energy matrix `R` (n×n, symmetric).
    pub energy: RMat,
    /// Plant-field coupling `M` (m×n).
    pub field_coupling: RMat,
    /// Plant-controller coupling `N` (d×n).
    pub control_coupling: RMat,
    /// Measurement matrix `D` (r×m).
    pub measurement: RMat,
}

/// State-space matrices of the plant and its observation process.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedPlant {
    pub a: RMat,
    pub b: RMat,
    pub e: RMat,
    pub c: RMat,
    pub d: RMat,
    /// The field commutation matrix `J` (m×m).
    pub j: RMat,
    /// CCR matrix `Θ`, kept for closed-loop assembly.
    pub ccr: RMat,
}

/// Penalty weights: the penalized process is `S X + K U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub s: RMat,
    pub k: RMat,
}

/// Controller `dξ = a ξ dt + b dZ, U = c ξ` with an n-dimensional state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub a: RMat,
    pub b: RMat,
    pub c: RMat,
}

/// Closed-loop matrices for a plant/controller pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    /// `[[A, Ec], [bC, a]]`
    pub a: RMat,
    /// `[[B], [bD]]`
    pub b: RMat,
    /// `[S, Kc]`
    pub c: RMat,
    /// Joint CCR matrix `[[Θ, 0], [0, 0]]`.
    pub gamma: RMat,
    pub j: RMat,
    pub s: RMat,
    pub k: RMat,
}

impl PlantSpec {
    pub fn n(&self) -> usize {
        self.ccr.nrows()
    }
    pub fn m(&self) -> usize {
        self.field_coupling.nrows()
    }
    pub fn d(&self) -> usize {
        self.control_coupling.nrows()
    }
    pub fn r(&self) -> usize {
        self.measurement.nrows()
    }
}

impl DerivedPlant {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn d(&self) -> usize {
        self.e.ncols()
    }
    pub fn r(&self) -> usize {
        self.c.nrows()
    }

    /// Residual of `AΘ + ΘAᵀ + BJBᵀ`.
    pub fn pr_residual(&self) -> RMat {
        &self.a * &self.ccr
            + &self.ccr * self.a.transpose()
            + &self.b * &self.j * self.b.transpose()
    }

    /// Residual of `ΘCᵀ + BJDᵀ`.
    pub fn measurement_pr_residual(&self) -> RMat {
        &self.ccr * self.c.transpose() + &self.b * &self.j * self.d.transpose()
    }
}

impl Weights {
    pub fn nu(&self) -> usize {
        self.s.nrows()
    }
}

impl ControllerParams {
    pub fn zeros(n: usize, r: usize, d: usize) -> Self {
        Self {
            a: RMat::zeros(n, n),
            b: RMat::zeros(n, r),
            c: RMat::zeros(d, n),
        }
    }

    /// Flattens `(a, b, c)` column-major into one vector.
    pub fn to_vec(&self) -> Vec<f64> {
        self.a
            .iter()
            .chain(self.b.iter())
            .chain(self.c.iter())
            .copied()
            .collect()
    }

    /// Inverse of [`ControllerParams::to_vec`] with the shapes of `self`.
    pub fn with_values(&self, values: &[f64]) -> Self {
        let (na, nb) = (self.a.len(), self.b.len());
        Self {
            a: RMat::from_column_slice(self.a.nrows(), self.a.ncols(), &values[..na]),
            b: RMat::from_column_slice(self.b.nrows(), self.b.ncols(), &values[na..na + nb]),
            c: RMat::from_column_slice(self.c.nrows(), self.c.ncols(), &values[na + nb..]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

impl std::ops::Add for &ControllerParams {
    type Output = ControllerParams;
    fn add(self, rhs: Self) -> ControllerParams {
        ControllerParams {
            a: &self.a + &rhs.a,
            b: &self.b + &rhs.b,
            c: &self.c + &rhs.c,
        }
    }
}

impl ClosedLoop {
    pub fn n(&self) -> usize {
        self.a.nrows() / 2
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn nu(&self) -> usize {
        self.c.nrows()
    }

    /// Residual of `𝒜Γ + Γ𝒜ᵀ + ℬJℬᵀ`.
    pub fn pr_residual(&self) -> RMat {
        &self.a * &self.gamma
            + &self.gamma * self.a.transpose()
            + &self.b * &self.j * self.b.transpose()
    }

    pub fn is_hurwitz(&self) -> bool {
        is_hurwitz(&self.a)
    }
}

pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn check_shape(m: &RMat, rows: usize, cols: usize, name: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{name} must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{name} has non-finite entries"
        )));
    }
    Ok(())
}

/// The field commutation matrix `J = [[0, I], [-I, 0]]` of order `m`.
pub fn build_j(m: usize) -> Result<RMat> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "number of field channels must be even and at least 2, got {m}"
        )));
    }
    let h = m / 2;
    let mut j = RMat::zeros(m, m);
    for k in 0..h {
        j[(k, h + k)] = 1.0;
        j[(h + k, k)] = -1.0;
    }
    Ok(j)
}

/// The Ito matrix `Ω = I + iJ` of the input fields.
pub fn ito_matrix(j: &RMat) -> CMat {
    CMat::from_fn(j.nrows(), j.ncols(), |r, c| {
        Complex64::new(if r == c { 1.0 } else { 0.0 }, j[(r, c)])
    })
}

/// Checks `DDᵀ ≻ 0` and `DJDᵀ = 0`.
pub fn validate_measurement(d: &RMat, j: &RMat) -> Result<()> {
    if d.ncols() != j.nrows() {
        return Err(Error::Dimension(format!(
            "measurement matrix has {} columns but there are {} field channels",
            d.ncols(),
            j.nrows()
        )));
    }
    let ddt = d * d.transpose();
    let min_eig = ddt
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min_eig > MEASUREMENT_RANK_TOL) {
        return Err(Error::Validation(format!(
            "D D^T must be positive definite (D of full row rank); smallest eigenvalue {min_eig:.3e}"
        )));
    }
    let djd = max_abs(&(d * j * d.transpose()));
    if djd > MEASUREMENT_COMMUTE_TOL {
        return Err(Error::Validation(format!(
            "D J D^T must vanish so that the observations commute; max entry {djd:.3e}"
        )));
    }
    Ok(())
}

/// Validates a plant specification and computes its state-space matrices.
pub fn derive_plant(spec: &PlantSpec) -> Result<DerivedPlant> {
    let n = spec.n();
    let m = spec.m();
    let d = spec.d();
    let r = spec.r();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "number of plant variables n must be even and positive, got {n}"
        )));
    }
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "number of field channels m must be even and positive, got {m}"
        )));
    }
    if r == 0 || r > m / 2 {
        return Err(Error::Validation(format!(
            "measurement must have between 1 and m/2 = {} rows, got r = {r}",
            m / 2
        )));
    }
    if d == 0 {
        return Err(Error::Validation(
            "actuator dimension d must be positive".into(),
        ));
    }
    check_shape(&spec.ccr, n, n, "Theta")?;
    check_shape(&spec.energy, n, n, "R")?;
    check_shape(&spec.field_coupling, m, n, "M")?;
    check_shape(&spec.control_coupling, d, n, "N")?;
    check_shape(&spec.measurement, r, m, "D")?;

    let scale = 1.0 + max_abs(&spec.ccr);
    if max_abs(&(&spec.ccr + spec.ccr.transpose())) > 1e-12 * scale {
        return Err(Error::Validation(
            "CCR matrix Theta must be real antisymmetric".into(),
        ));
    }
    let scale = 1.0 + max_abs(&spec.energy);
    if max_abs(&(&spec.energy - spec.energy.transpose())) > 1e-12 * scale {
        return Err(Error::Validation(
            "energy matrix R must be symmetric".into(),
        ));
    }

    let j = build_j(m)?;
    validate_measurement(&spec.measurement, &j)?;

    let theta2 = &spec.ccr * 2.0;
    let mt = spec.field_coupling.transpose();
    let plant = DerivedPlant {
        a: &theta2 * (&spec.energy + &mt * &j * &spec.field_coupling),
        b: &theta2 * &mt,
        e: &theta2 * spec.control_coupling.transpose(),
        c: &spec.measurement * &j * &spec.field_coupling * 2.0,
        d: spec.measurement.clone(),
        j,
        ccr: spec.ccr.clone(),
    };

    let mag = (1.0 + max_abs(&plant.a)) * (1.0 + max_abs(&plant.ccr))
        + (1.0 + max_abs(&plant.b)).powi(2)
        + (1.0 + max_abs(&plant.c)) * (1.0 + max_abs(&plant.d));
    let tol = PR_TOLERANCE * mag.max(1.0) / 4.0;
    let res = max_abs(&plant.pr_residual());
    if res > tol {
        return Err(Error::Numerical(format!(
            "realizability identity A Theta + Theta A^T + B J B^T = 0 violated by {res:.3e}"
        )));
    }
    let res = max_abs(&plant.measurement_pr_residual());
    if res > tol {
        return Err(Error::Numerical(format!(
            "realizability identity Theta C^T + B J D^T = 0 violated by {res:.3e}"
        )));
    }
    Ok(plant)
}

/// Builds `𝒜, ℬ, 𝒞, Γ` for the given controller.
pub fn assemble_closed_loop(
    plant: &DerivedPlant,
    weights: &Weights,
    ctrl: &ControllerParams,
) -> Result<ClosedLoop> {
    let n = plant.n();
    let m = plant.m();
    let r = plant.r();
    let d = plant.d();
    let nu = weights.nu();
    check_shape(&ctrl.a, n, n, "controller a")?;
    check_shape(&ctrl.b, n, r, "controller b")?;
    check_shape(&ctrl.c, d, n, "controller c")?;
    if nu == 0 {
        return Err(Error::Dimension(
            "weights must have at least one row".into(),
        ));
    }
    check_shape(&weights.s, nu, n, "weight S")?;
    check_shape(&weights.k, nu, d, "weight K")?;

    let mut a = RMat::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&plant.a);
    a.view_mut((0, n), (n, n)).copy_from(&(&plant.e * &ctrl.c));
    a.view_mut((n, 0), (n, n)).copy_from(&(&ctrl.b * &plant.c));
    a.view_mut((n, n), (n, n)).copy_from(&ctrl.a);

    let mut b = RMat::zeros(2 * n, m);
    b.view_mut((0, 0), (n, m)).copy_from(&plant.b);
    b.view_mut((n, 0), (n, m)).copy_from(&(&ctrl.b * &plant.d));

    let mut c = RMat::zeros(nu, 2 * n);
    c.view_mut((0, 0), (nu, n)).copy_from(&weights.s);
    c.view_mut((0, n), (nu, n))
        .copy_from(&(&weights.k * &ctrl.c));

    let mut gamma = RMat::zeros(2 * n, 2 * n);
    gamma.view_mut((0, 0), (n, n)).copy_from(&plant.ccr);

    let cl = ClosedLoop {
        a,
        b,
        c,
        gamma,
        j: plant.j.clone(),
        s: weights.s.clone(),
        k: weights.k.clone(),
    };
    let mag = (1.0 + max_abs(&cl.a)) * (1.0 + max_abs(&cl.gamma)) + (1.0 + max_abs(&cl.b)).powi(2);
    let res = max_abs(&cl.pr_residual());
    if res > PR_TOLERANCE * mag.max(1.0) / 4.0 {
        return Err(Error::Numerical(format!(
            "closed-loop realizability identity violated by {res:.3e}"
        )));
    }
    Ok(cl)
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &RMat) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest modulus of the spectrum.
pub fn spectral_radius(a: &RMat) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// True iff every eigenvalue has real part below `-HURWITZ_MARGIN`.
pub fn is_hurwitz(a: &RMat) -> bool {
    a.is_square() && a.nrows() > 0 && spectral_abscissa(a) < -HURWITZ_MARGIN
}
