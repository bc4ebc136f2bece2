use num_complex::Complex64;
use proptest::prelude::*;
use qef_core::freq::QuadratureConfig;
use qef_core::{freq, instances, matfun, model, quad, CMat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dims() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..=3, 1usize..=3, 1usize..=3)
        .prop_flat_map(|(hn, hm, d)| (Just(2 * hn), Just(2 * hm), Just(d), 1usize..=hm))
}

fn random_cmat(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_loop_is_realizable(seed in any::<u64>(), (n, m, d, r) in dims(), extra in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = instances::random_plant_spec(&mut rng, n, m, d, r);
        let plant = model::derive_plant(&spec).unwrap();
        let w = instances::random_weights(&mut rng, n, d, d + extra);
        let ctrl = instances::random_controller(&mut rng, n, r, d, 3.0);
        let cl = model::assemble_closed_loop(&plant, &w, &ctrl).unwrap();
        let scale = 1.0 + model::max_abs(&cl.a) + model::max_abs(&cl.b).powi(2);
        prop_assert!(model::max_abs(&cl.pr_residual()) <= 1e-12 * scale);
        prop_assert_eq!(cl.a.nrows(), 2 * n);
        prop_assert_eq!(cl.nu(), d + extra);
    }

    #[test]
    fn controller_flattening_round_trips(seed in any::<u64>(), (n, _m, d, r) in dims()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = instances::random_controller(&mut rng, n, r, d, 1.0);
        prop_assert_eq!(c.with_values(&c.to_vec()), c);
    }

    #[test]
    fn spectral_pair_structure(seed in any::<u64>(), lambda in 0.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instances::random_admissible(&mut rng, 2, 2, 1, 1, 3, 0.3).unwrap();
        let (phi, psi) = freq::spectral_pair(&inst.closed_loop, lambda).unwrap();
        let herm = (&phi - phi.adjoint()).norm();
        let skew = (&psi + psi.adjoint()).norm();
        prop_assert!(herm <= 1e-12 * (1.0 + phi.norm()));
        prop_assert!(skew <= 1e-12 * (1.0 + psi.norm()));
        let min_eig = phi.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig >= -1e-12 * (1.0 + phi.norm()));
    }

    #[test]
    fn growth_rate_increases_with_theta(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instances::random_admissible(&mut rng, 2, 2, 1, 1, 3, 0.3).unwrap();
        let q = QuadratureConfig::default();
        let lo = freq::qef_growth_rate(&inst.closed_loop, 0.5 * inst.theta, &q).unwrap();
        let hi = freq::qef_growth_rate(&inst.closed_loop, inst.theta, &q).unwrap();
        prop_assert!(hi >= lo - 1e-9 * hi.abs());
    }

    #[test]
    fn trig_identities(seed in any::<u64>(), nu in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_cmat(&mut rng, nu);
        let c = matfun::mat_cos(&x).unwrap();
        let s = matfun::mat_sin(&x).unwrap();
        let id = CMat::identity(nu, nu);
        prop_assert!((&c * &c + &s * &s - &id).norm() <= 1e-11 * (1.0 + c.norm() * c.norm()));
        let sinc = matfun::sinc_mat(&x).unwrap();
        prop_assert!((&sinc * &x - &s).norm() <= 1e-11 * (1.0 + s.norm()));
    }

    #[test]
    fn scalar_kernels(x in -50.0f64..50.0) {
        let t = matfun::tanhc(x);
        prop_assert!(t > 0.0 && t <= 1.0);
        prop_assert!(matfun::ln_cosh(x) >= 0.0);
        prop_assert_eq!(matfun::ln_cosh(x), matfun::ln_cosh(-x));
        prop_assert!(matfun::sinhc(x) >= 1.0);
    }

    #[test]
    fn half_line_exponential(rate in 0.1f64..10.0) {
        let res = quad::integrate_half_line(
            |l| Ok(vec![(-rate * l).exp()]),
            &[],
            5.0,
            &QuadratureConfig::default(),
        ).unwrap();
        prop_assert!((res.value[0] - 1.0 / rate).abs() <= 1e-8 / rate);
    }
}
