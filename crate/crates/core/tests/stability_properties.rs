use std::sync::Arc;

use elliptica::geometry::{ball_chain, Domain};
use elliptica::harmonic::{complex_power, LinearCombination};
use elliptica::operators::{Bump, EllipticOperator, FnField, OperatorForm, ScalarField};
use elliptica::stability::{
    carleman_ratio, cauchy_mesh, iterate_recursion, log_modulus, manufactured_cauchy, recursion_bound,
    smallness_propagation, stability_fit, tau_grid, CarlemanWeight, CauchyProblem, Modulus, Support,
};
use proptest::prelude::*;

fn scaled(u: Arc<dyn ScalarField>, s: f64) -> FnField {
    let (v, g, h) = (u.clone(), u.clone(), u);
    FnField::new(2, move |x| s * v.value(x))
        .with_gradient(move |x| g.gradient(x).unwrap().map(|c| s * c))
        .with_hessian(move |x| h.hessian(x).unwrap().map(|row| row.map(|c| s * c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn carleman_ratio_is_scale_invariant(
        cx in 0.35..0.65f64, cy in 0.35..0.65f64, rad in 0.08..0.2f64, s in 1e-3..1e3f64,
    ) {
        let square = Domain::unit_square();
        let op = EllipticOperator::laplace(2, OperatorForm::Nondivergence);
        let bump = Bump::new(&[cx, cy], rad);
        let big = bump.clone().scaled(s);
        let support = Support::of(&bump);
        let weight = CarlemanWeight::standard(2, 1.0);
        let taus = tau_grid(2.0, 3);
        let a = carleman_ratio(&op, &square, &bump, &support, &weight, &taus).unwrap();
        let b = carleman_ratio(&op, &square, &big, &support, &weight, &taus).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            prop_assert!((p.ratio - q.ratio).abs() <= 1e-9 * p.ratio, "{} vs {}", p.ratio, q.ratio);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn recursion_bound_is_monotone_in_the_start(
        e0 in 0.0..1.0f64, de in 0.0..1.0f64, b in 0.0..0.5f64, c in 0.1..4.0f64, gamma in 0.05..0.95f64, k in 0u32..12,
    ) {
        let lo = recursion_bound(e0, b, c, gamma, k);
        let hi = recursion_bound(e0 + de, b, c, gamma, k);
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn recursion_bound_dominates_iterates(
        e0 in 0.0..0.5f64, b in 0.0..0.5f64, c in 0.5..4.0f64, gamma in 0.05..0.95f64, k in 0u32..12,
    ) {
        // The closed form needs 2c ≥ 1 and η₀ + b ≤ 1.
        let seq = iterate_recursion(e0, b, c, gamma, k);
        for (j, eta) in seq.iter().enumerate() {
            let bound = recursion_bound(e0, b, c, gamma, j as u32);
            prop_assert!(*eta <= bound * (1.0 + 1e-12), "step {j}: {eta} > {bound}");
        }
    }

    #[test]
    fn fit_recovers_log_exponent(beta in 0.1..3.0f64, c in 0.1..10.0f64) {
        let pairs: Vec<(f64, f64)> = (0..7)
            .map(|k| 10f64.powf(-1.0 - 0.5 * k as f64))
            .map(|d| (d, c * log_modulus(d, beta)))
            .collect();
        let fit = stability_fit(&pairs, Modulus::PhiBeta).unwrap();
        prop_assert!((fit.beta - beta).abs() <= 1e-3 * beta, "{beta} -> {}", fit.beta);
        prop_assert!((fit.c - c).abs() <= 1e-3 * c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn propagation_bound_is_homogeneous(c in prop::collection::vec(-1.0..1.0f64, 6), s in 1e-3..1.0f64) {
        let square = Domain::unit_square();
        let op = EllipticOperator::laplace(2, OperatorForm::Nondivergence);
        let mut parts: Vec<(f64, Arc<dyn ScalarField>)> = Vec::new();
        for k in 1..=3u32 {
            let (re, im) = complex_power(k);
            parts.push((c[2 * k as usize - 2], Arc::new(re.translated(&[0.5, 0.5]))));
            parts.push((c[2 * k as usize - 1], Arc::new(im.translated(&[0.5, 0.5]))));
        }
        prop_assume!(c.iter().any(|v| v.abs() > 1e-3));
        let u: Arc<dyn ScalarField> = Arc::new(LinearCombination::new(parts));
        let chain = ball_chain(&square, &[0.3, 0.5], 0.06, &[0.7, 0.5], 0.05).unwrap();
        let full = smallness_propagation(&op, &square, &u, &chain, 0.0).unwrap();
        let small = smallness_propagation(&op, &square, &scaled(u, s), &chain, 0.0).unwrap();
        prop_assert!(full.holds() && small.holds());
        prop_assert!(small.bound_end <= full.bound_end * (1.0 + 1e-9));
        prop_assert!((small.bound_end - s * full.bound_end).abs() <= 1e-9 * full.bound_end);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn tikhonov_residual_grows_and_seminorm_shrinks(r0 in 1e-8..1e-6f64, ratio in 3.0..30.0f64) {
        let mesh = Arc::new(cauchy_mesh(1.0 / 8.0).unwrap());
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
        let problem = CauchyProblem::new(mesh, &op).unwrap();
        let (u, flux) = manufactured_cauchy();
        let data = problem.sample(u, flux);
        let mut last: Option<(f64, f64)> = None;
        for k in 0..4 {
            let reg = r0 * ratio.powi(k);
            let v = problem.solve(&data, reg).unwrap();
            let (res, semi) = problem.misfit(&v, &data).unwrap();
            if let Some((r1, s1)) = last {
                prop_assert!(res >= r1 * (1.0 - 1e-6) - 1e-13, "{res} < {r1}");
                prop_assert!(semi <= s1 * (1.0 + 1e-6) + 1e-13, "{semi} > {s1}");
            }
            last = Some((res, semi));
        }
    }
}
