use std::sync::Arc;

use elliptica::geometry::Domain;
use elliptica::harmonic::{
    complex_power, frequency_profile, mean_value_residual, perron_solve, HarmonicSample, LinearCombination,
    MeanValueForm, PerronGrid,
};
use elliptica::operators::ScalarField;
use proptest::prelude::*;

/// Σ c_k Re zᵏ + s_k Im zᵏ for k = 1..=4 plus a constant.
fn mixture(c: &[f64]) -> HarmonicSample {
    let mut parts: Vec<(f64, Arc<dyn ScalarField>)> = Vec::new();
    let (one, _) = complex_power(0);
    parts.push((c[0], Arc::new(one)));
    for k in 1..=4u32 {
        let (re, im) = complex_power(k);
        parts.push((c[2 * k as usize - 1], Arc::new(re)));
        parts.push((c[2 * k as usize], Arc::new(im)));
    }
    HarmonicSample::certify("mixture", Arc::new(LinearCombination::new(parts)), &[0.0, 0.0], 1.0).unwrap()
}

fn radii() -> Vec<f64> {
    (1..=12).map(|k| 0.08 * k as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frequency_is_nondecreasing(c in prop::collection::vec(-1.0..1.0f64, 9)) {
        let u = mixture(&c);
        let p = frequency_profile(&u, &[0.0, 0.0], &radii(), None).unwrap();
        prop_assert!(p.max_frequency_drop() <= 1e-9, "{}", p.max_frequency_drop());
    }

    #[test]
    fn ball_energy_is_bounded_by_sphere_energy(c in prop::collection::vec(-1.0..1.0f64, 9)) {
        let u = mixture(&c);
        let p = frequency_profile(&u, &[0.0, 0.0], &radii(), None).unwrap();
        prop_assert!(p.ball_sphere_excess() <= 1e-9);
        prop_assert!(p.cauchy_schwarz_excess() <= 1e-9);
    }

    #[test]
    fn dirichlet_energy_equals_boundary_flux(c in prop::collection::vec(-1.0..1.0f64, 9)) {
        let u = mixture(&c);
        let p = frequency_profile(&u, &[0.0, 0.0], &radii(), None).unwrap();
        prop_assert!(p.flux_defect() <= 1e-9, "{}", p.flux_defect());
    }

    #[test]
    fn mean_value_holds_at_any_center(
        c in prop::collection::vec(-1.0..1.0f64, 9), x in -0.4..0.4f64, y in -0.4..0.4f64, r in 0.05..0.5f64,
    ) {
        let u = mixture(&c);
        for form in [MeanValueForm::Sphere, MeanValueForm::Ball] {
            let e = mean_value_residual(&*u.field, &[x, y], r, form, None).unwrap();
            prop_assert!(e <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn perron_sweeps_never_decrease(a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let disk = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let res = perron_solve(
            &disk,
            move |x| a * x[0] * x[0] + b * x[1] + (3.0 * x[0]).sin(),
            PerronGrid::Polar { rings: 8, angles: 32 },
            5000,
            1e-9,
        )
        .unwrap();
        prop_assert!(res.max_dip() <= 1e-12, "{}", res.max_dip());
    }
}
