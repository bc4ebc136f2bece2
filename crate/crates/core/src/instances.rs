//! Test instances: the canonical two-mode plant and seeded random generators.

use rand::Rng;

use crate::error::{Error, Result};
use crate::freq;
use crate::model::{self, ClosedLoop, ControllerParams, DerivedPlant, PlantSpec, Weights};
use crate::synth;
use crate::RMat;

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> RMat {
    if scale == 0.0 {
        return RMat::zeros(rows, cols);
    }
    RMat::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// One oscillator mode (`n = 2`) with two field channels (`m = 2`), one
/// control input and one homodyne-type measurement.
pub fn canonical_plant() -> PlantSpec {
    PlantSpec {
        ccr: RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        energy: RMat::identity(2, 2),
        field_coupling: RMat::identity(2, 2),
        control_coupling: RMat::from_row_slice(1, 2, &[1.0, 0.0]),
        measurement: RMat::from_row_slice(1, 2, &[1.0, 0.0]),
    }
}

/// Penalizes both plant variables and the control signal: `S = [I₂; 0]`, `K = [0; 0; 1]`.
pub fn canonical_weights() -> Weights {
    Weights {
        s: RMat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        k: RMat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]),
    }
}

/// Random physically consistent plant parameters.
///
/// `D` is built from `r ≤ m/2` rotated quadrature pairs, so `DJDᵀ = 0`
/// and `DDᵀ ≻ 0` hold by construction.
pub fn random_plant_spec(rng: &mut impl Rng, n: usize, m: usize, d: usize, r: usize) -> PlantSpec {
    assert!(
        n.is_multiple_of(2) && m.is_multiple_of(2) && 2 * r <= m,
        "unsupported dimensions"
    );
    let t = uniform(rng, n, n, 1.0);
    let ccr = &t - t.transpose();
    let g = uniform(rng, n, n, 1.0);
    let energy = &g * g.transpose() / n as f64 + RMat::identity(n, n) * 0.5;
    let half = m / 2;
    let mut d0 = RMat::zeros(r, m);
    for i in 0..r {
        let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
        d0[(i, i)] = phi.cos();
        d0[(i, half + i)] = phi.sin();
    }
    let mix = uniform(rng, r, r, 0.3) + RMat::identity(r, r);
    PlantSpec {
        ccr,
        energy,
        field_coupling: uniform(rng, m, n, 1.0),
        control_coupling: uniform(rng, d, n, 1.0),
        measurement: mix * d0,
    }
}

/// Random weights with `KᵀK ≻ 0` (a `K` of full column rank).
pub fn random_weights(rng: &mut impl Rng, n: usize, d: usize, nu: usize) -> Weights {
    assert!(nu >= d, "K needs at least d rows");
    let mut k = uniform(rng, nu, d, 0.5);
    for j in 0..d {
        k[(nu - d + j, j)] += 1.0;
    }
    Weights {
        s: uniform(rng, nu, n, 1.0),
        k,
    }
}

/// Controller with entries uniform in `(−scale, scale)`.
pub fn random_controller(
    rng: &mut impl Rng,
    n: usize,
    r: usize,
    d: usize,
    scale: f64,
) -> ControllerParams {
    ControllerParams {
        a: uniform(rng, n, n, scale),
        b: uniform(rng, n, r, scale),
        c: uniform(rng, d, n, scale),
    }
}

/// A stabilizing closed loop together with a risk parameter satisfying the
/// spectral condition with room to spare.
#[derive(Debug, Clone)]
pub struct AdmissibleInstance {
    pub plant: DerivedPlant,
    pub weights: Weights,
    pub controller: ControllerParams,
    pub closed_loop: ClosedLoop,
    pub theta: f64,
}

/// Draws plants until the LQG controller exists, perturbs it by a relative
/// amount `perturbation`, and picks `θ` as a random fraction in
/// `[0.1, 0.5]` of `1 / sup λmax(Φ)`.
pub fn random_admissible(
    rng: &mut impl Rng,
    n: usize,
    m: usize,
    d: usize,
    r: usize,
    nu: usize,
    perturbation: f64,
) -> Result<AdmissibleInstance> {
    for _ in 0..100 {
        let spec = random_plant_spec(rng, n, m, d, r);
        let Ok(plant) = model::derive_plant(&spec) else {
            continue;
        };
        let weights = random_weights(rng, n, d, nu);
        let Ok(lqg) = synth::lqg_controller(&plant, &weights) else {
            continue;
        };
        let size = model::max_abs(&lqg.a)
            .max(model::max_abs(&lqg.b))
            .max(model::max_abs(&lqg.c))
            .max(1.0);
        if size > 50.0 {
            continue;
        }
        let delta = random_controller(rng, n, r, d, perturbation * size);
        let controller = &lqg + &delta;
        let closed_loop = model::assemble_closed_loop(&plant, &weights, &controller)?;
        if model::spectral_abscissa(&closed_loop.a) > -0.05 {
            continue;
        }
        let peak = freq::phi_peak(&closed_loop)?;
        if !(peak > 0.0) {
            continue;
        }
        let theta = rng.random_range(0.1..0.5) / peak;
        return Ok(AdmissibleInstance {
            plant,
            weights,
            controller,
            closed_loop,
            theta,
        });
    }
    Err(Error::Numerical(
        "no admissible random instance found in 100 draws".into(),
    ))
}
