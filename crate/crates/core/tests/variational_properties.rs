use std::sync::Arc;

use elliptica::geometry::{build_rect_mesh, Domain, SimplicialMesh};
use elliptica::operators::{EllipticOperator, OperatorForm};
use elliptica::variational::{assemble, eigensolve, min_max_check, solve, BoundaryData};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh() -> Arc<SimplicialMesh> {
    Arc::new(build_rect_mesh(&Domain::unit_square(), 1.0 / 8.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn galerkin_residual_vanishes(eps in 0.0..0.5f64, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let op = EllipticOperator::perturbed_identity(eps, OperatorForm::Divergence);
        let data = BoundaryData::default().with_dirichlet(move |x| a * x[0] + b * x[1] * x[1]);
        let sys = assemble(mesh(), &op, move |x| 1.0 + a * x[0] * x[1], &data).unwrap();
        let u = solve(&sys).unwrap();
        prop_assert!(sys.galerkin_residual(&u) <= 1e-10);
    }

    #[test]
    fn symmetric_assembly_gives_symmetric_stiffness(eps in 0.0..0.5f64, seed in any::<u64>()) {
        let op = EllipticOperator::perturbed_identity(eps, OperatorForm::Divergence);
        let sys = assemble(mesh(), &op, |_| 0.0, &BoundaryData::default()).unwrap();
        prop_assert!(sys.is_symmetric());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sys.mesh().num_vertices();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k = sys.full_stiffness();
        let (uv, vu) = (k.bilinear(&u, &v), k.bilinear(&v, &u));
        prop_assert!((uv - vu).abs() <= 1e-12 * (1.0 + uv.abs()));
        prop_assert!(k.bilinear(&u, &u) >= -1e-12);
    }

    #[test]
    fn min_max_holds_for_random_trials(m in 1usize..4, seed in any::<u64>()) {
        let op = EllipticOperator::laplace(2, OperatorForm::Divergence);
        let sys = assemble(mesh(), &op, |_| 0.0, &BoundaryData::default()).unwrap();
        let spec = eigensolve(&sys, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = sys.num_free();
        let trials: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|_| (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
            .collect();
        let rep = min_max_check(&sys, &spec, m, &trials).unwrap();
        prop_assert!(rep.holds, "{rep:?}");
    }
}
