use elliptica::harmonic::Polynomial;
use elliptica::operators::{
    apply_div, apply_nondiv, gradient, hessian, EllipticOperator, FiniteDifference, FnField, OperatorForm,
    ScalarField,
};
use proptest::prelude::*;

fn cubic(c: [f64; 6]) -> Polynomial {
    Polynomial::new(
        2,
        vec![
            (c[0], [1, 0, 0]),
            (c[1], [0, 1, 0]),
            (c[2], [2, 0, 0]),
            (c[3], [1, 1, 0]),
            (c[4], [0, 3, 0]),
            (c[5], [2, 1, 0]),
        ],
    )
}

fn coeffs() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-2.0..2.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn principal_part_is_symmetric(x in 0.0..1.0f64, y in 0.0..1.0f64, eps in 0.0..0.5f64) {
        let op = EllipticOperator::perturbed_identity(eps, OperatorForm::Divergence);
        let a = op.principal(&[x, y]);
        prop_assert_eq!(a[0][1], a[1][0]);
    }

    #[test]
    fn constant_forms_differ_by_sign(c in coeffs(), x in -1.0..1.0f64, y in -1.0..1.0f64, a11 in 0.5..2.0f64, a12 in -0.3..0.3f64, a22 in 0.5..2.0f64) {
        let mut a = [[0.0; 3]; 3];
        a[0][0] = a11;
        a[0][1] = a12;
        a[1][0] = a12;
        a[1][1] = a22;
        let u = cubic(c);
        let div = EllipticOperator::constant(2, a, OperatorForm::Divergence);
        let nondiv = EllipticOperator::constant(2, a, OperatorForm::Nondivergence);
        let p = [x, y];
        let lhs = apply_div(&div, &u, &p).unwrap();
        let rhs = apply_nondiv(&nondiv, &u, &p).unwrap();
        prop_assert!((lhs + rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn finite_differences_match_analytic_derivatives(c in coeffs(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let u = cubic(c);
        let plain = {
            let v = u.clone();
            FnField::new(2, move |p| v.value(p))
        };
        let fd = FiniteDifference { enabled: true, step: Some(1e-4) };
        let p = [x, y];
        let g = gradient(&plain, &p, &fd).unwrap();
        let h = hessian(&plain, &p, &fd).unwrap();
        let ga = u.gradient(&p).unwrap();
        let ha = u.hessian(&p).unwrap();
        for i in 0..2 {
            prop_assert!((g[i] - ga[i]).abs() <= 1e-6 * (1.0 + ga[i].abs()));
            for j in 0..2 {
                prop_assert!((h[i][j] - ha[i][j]).abs() <= 1e-6 * (1.0 + ha[i][j].abs()));
            }
        }
    }
}
