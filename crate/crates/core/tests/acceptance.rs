//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elliptica::geometry::{
    ball_chain, build_polygon_mesh, build_rect_mesh, disk_nystrom_quadrature, BoundaryTag, Domain,
};
use elliptica::harmonic::{
    complex_power, doubling_check, frequency_profile, harmonic_catalog, harnack_ratio, mean_value_residual,
    perron_solve, poisson_disk, three_sphere_check, HarmonicSample, LinearCombination, MeanValueForm, PerronGrid,
    RealPart,
};
use elliptica::operators::{Bump, EllipticOperator, OperatorForm, ScalarField};
use elliptica::parametrix::{solve_fundamental, verify_parametrix, Parametrix, Target};
use elliptica::small::diagonal;
use elliptica::stability::{
    carleman_ratio, cauchy_sweep, default_tau0, observability_ratio, recursion_bound, recursion_constant,
    iterate_recursion, smallness_propagation, tau_grid, CarlemanWeight, CauchySweepConfig, Support,
};
use elliptica::variational::{assemble, eigensolve, poincare_constant, solve, AssembledSystem, BoundaryData};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Debug>(e: E) -> String {
    format!("error: {e:?}")
}

fn laplace(n: usize) -> EllipticOperator {
    EllipticOperator::laplace(n, OperatorForm::Divergence)
}

fn dirichlet_system(domain: &Domain, h: f64) -> Result<AssembledSystem, String> {
    let mesh = Arc::new(build_rect_mesh(domain, h).map_err(fail)?);
    assemble(mesh, &laplace(domain.dim()), |_| 0.0, &BoundaryData::default()).map_err(fail)
}

fn within(t: Instant, limit: Duration) -> (bool, f64) {
    let e = t.elapsed();
    (e < limit, e.as_secs_f64())
}

fn spectrum() -> Verdict {
    let t = Instant::now();
    let sys = dirichlet_system(&Domain::unit_square(), 1.0 / 64.0)?;
    let s = eigensolve(&sys, 4).map_err(fail)?;
    let exact = [2.0, 5.0, 5.0, 8.0].map(|k| k * PI * PI);
    let errs: Vec<f64> = s.eigenvalues.iter().zip(exact).map(|(l, e)| (l - e).abs() / e).collect();
    let (fast, secs) = within(t, Duration::from_secs(30));
    let worst = errs.iter().copied().fold(0.0, f64::max);
    check(
        errs[0] <= 0.01 && worst <= 0.02 && fast,
        format!("λ₁ rel err {:.2e}, worst of four {worst:.2e}, {secs:.1} s", errs[0]),
    )
}

fn poincare() -> Verdict {
    let mesh = build_rect_mesh(&Domain::interval(0.0, 1.0).map_err(fail)?, 1.0 / 256.0).map_err(fail)?;
    let r = poincare_constant(&mesh).map_err(fail)?;
    let exact = 1.0 / (PI * PI);
    let rel = (r.constant - exact).abs() / exact;
    let bracket = r.constant >= exact * (1.0 - 0.01) && r.constant <= r.elementary_bound && r.elementary_bound == 0.125;
    check(
        rel <= 0.01 && bracket,
        format!("C = {:.6}, rel err {rel:.2e}, bracket [{exact:.6}, {}]", r.constant, r.elementary_bound),
    )
}

fn convergence() -> Verdict {
    let exact = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let mut errors = Vec::new();
    for k in 3..=6 {
        let mesh = Arc::new(build_rect_mesh(&Domain::unit_square(), 1.0 / f64::from(1 << k)).map_err(fail)?);
        let sys = assemble(mesh, &laplace(2), |x| 2.0 * PI * PI * exact(x), &BoundaryData::default()).map_err(fail)?;
        errors.push(solve(&sys).map_err(fail)?.l2_error(exact));
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    check(
        ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!("ratios {:?}", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()),
    )
}

fn mean_value() -> Verdict {
    let mut worst = 0.0f64;
    for s in harmonic_catalog(2, 6).map_err(fail)? {
        for center in [[0.0, 0.0], [0.3, -0.2]] {
            for r in [0.25, 0.5, 1.0] {
                for form in [MeanValueForm::Sphere, MeanValueForm::Ball] {
                    worst = worst.max(mean_value_residual(&*s.field, &center, r, form, None).map_err(fail)?);
                }
            }
        }
    }
    check(worst <= 1e-10, format!("worst residual {worst:.2e}"))
}

fn radius_grid(count: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

fn positive_mixtures(count: usize, seed: u64) -> Result<Vec<HarmonicSample>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for m in 0..count {
        let mut parts: Vec<(f64, Arc<dyn ScalarField>)> = Vec::new();
        for k in 1..=4u32 {
            let (re, im) = complex_power(k);
            parts.push((rng.gen_range(0.05..1.0), Arc::new(re)));
            parts.push((rng.gen_range(0.05..1.0), Arc::new(im)));
        }
        let mix = LinearCombination::new(parts);
        out.push(HarmonicSample::certify(&format!("mix{m}"), Arc::new(mix), &[0.0, 0.0], 1.0).map_err(fail)?);
    }
    Ok(out)
}

fn frequency() -> Verdict {
    let t = Instant::now();
    let radii = radius_grid(20, 0.05, 1.0);
    let mut worst_exact = 0.0f64;
    for s in harmonic_catalog(2, 6).map_err(fail)?.iter().filter(|s| s.degree.is_some_and(|d| d >= 1)) {
        let k = f64::from(s.degree.unwrap_or(0));
        let p = frequency_profile(s, &[0.0, 0.0], &radii, None).map_err(fail)?;
        worst_exact = p.frequencies().iter().fold(worst_exact, |w, n| w.max((n - k).abs()));
    }
    let mut worst_drop = 0.0f64;
    for s in positive_mixtures(50, 17)? {
        let p = frequency_profile(&s, &[0.0, 0.0], &radii, None).map_err(fail)?;
        worst_drop = worst_drop.max(p.max_frequency_drop());
    }
    let (fast, secs) = within(t, Duration::from_secs(10));
    check(
        worst_exact <= 1e-6 && worst_drop <= 1e-8 && fast,
        format!("|N − k| ≤ {worst_exact:.2e}, largest drop {worst_drop:.2e}, {secs:.1} s"),
    )
}

fn corpus() -> Result<Vec<HarmonicSample>, String> {
    let mut all = harmonic_catalog(2, 8).map_err(fail)?;
    all.extend(harmonic_catalog(3, 3).map_err(fail)?);
    all.extend(positive_mixtures(5, 5)?);
    Ok(all)
}

fn center_of(s: &HarmonicSample) -> Vec<f64> {
    s.homogeneous_center.clone().unwrap_or_else(|| vec![0.0; s.dim()])
}

fn doubling() -> Verdict {
    let mut worst_equality = 0.0f64;
    let mut all_hold = true;
    let mut count = 0;
    for s in corpus()? {
        let rep = doubling_check(&s, &center_of(&s), 0.2, 0.5, None).map_err(fail)?;
        all_hold &= rep.ratio <= rep.bound * (1.0 + 1e-6);
        if s.degree.is_some() {
            worst_equality = worst_equality.max((rep.ratio / rep.bound - 1.0).abs());
        }
        count += 1;
    }
    check(
        all_hold && worst_equality <= 1e-6,
        format!("{count} entries, homogeneous equality defect {worst_equality:.2e}"),
    )
}

fn three_sphere() -> Verdict {
    let radii = [0.1, 0.3, 0.8];
    let mut worst_equality = 0.0f64;
    let mut min_mixture = f64::INFINITY;
    let mut arithmetic = 0.0f64;
    for s in corpus()? {
        let rep = three_sphere_check(&s, &center_of(&s), radii, None).map_err(fail)?;
        if s.degree.is_some() {
            if s.degree != Some(0) {
                worst_equality = worst_equality.max(rep.log_convexity_slack.abs());
            }
        } else {
            min_mixture = min_mixture.min(rep.log_convexity_slack);
        }
        arithmetic = arithmetic.max(rep.arithmetic_ball_defect);
    }
    check(
        worst_equality <= 1e-8 && min_mixture > 0.0,
        format!(
            "homogeneous slack {worst_equality:.2e}, least mixture slack {min_mixture:.2e}, arithmetic defect {arithmetic:.2e} (reported)"
        ),
    )
}

fn harnack() -> Verdict {
    let disk = Domain::disk([0.0, 0.0], 1.0).map_err(fail)?;
    let mut worst = 0.0f64;
    for j in 0..30 {
        let angle = 2.0 * PI * j as f64 / 30.0;
        let u = RealPart::poisson_kernel([0.0, 0.0], 1.0, angle);
        let c = [0.3 * (0.7 * j as f64).cos(), 0.3 * (0.7 * j as f64).sin()];
        let r = 0.08 + 0.003 * j as f64;
        if 4.0 * r >= disk.signed_distance(&c) {
            return Err(format!("sample {j} violates 4r < dist"));
        }
        let rep = harnack_ratio(&u, &c, r, Some(&disk)).map_err(fail)?;
        worst = worst.max(rep.ratio);
    }
    check(worst <= 9.0, format!("largest ratio {worst:.3} against 9"))
}

fn parametrix_identities() -> Verdict {
    let op = EllipticOperator::perturbed_identity(0.1, OperatorForm::Divergence);
    let p = Parametrix::new(&op).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut frozen = 0.0f64;
    for _ in 0..200 {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        frozen = frozen.max(p.frozen_defect(&x, &y).map_err(fail)?);
    }

    let constant = EllipticOperator::constant(2, diagonal(&[1.0, 2.0]), OperatorForm::Divergence);
    let pc = Parametrix::new(&constant).map_err(fail)?;
    let disk = Domain::disk([0.0, 0.0], 0.3).map_err(fail)?;
    let quad = disk_nystrom_quadrature(&[0.0, 0.0], 0.3, 0.03).map_err(fail)?;
    let f = solve_fundamental(&pc, &disk, &quad, &[vec![0.05, 0.0]]).map_err(fail)?;
    let mut exact = true;
    for t in (0..f.num_nodes()).map(Target::Node).chain([Target::Point(0)]) {
        exact &= f.difference_at_nodes(t).map_err(fail)?.iter().all(|v| *v == 0.0);
    }

    let pl = Parametrix::new(&laplace(2)).map_err(fail)?;
    let sq = Domain::unit_square();
    let r = verify_parametrix(&pl, &sq, &Bump::new(&[0.5, 0.5], 0.3), &[0.55, 0.45]).map_err(fail)?;
    check(
        frozen <= 1e-8 && exact && r.residual <= 1e-3,
        format!("frozen defect {frozen:.2e}, F ≡ H {exact}, identity residual {:.2e}", r.residual),
    )
}

fn fundamental() -> Verdict {
    let t = Instant::now();
    let op = EllipticOperator::perturbed_identity(0.1, OperatorForm::Divergence);
    let p = Parametrix::new(&op).map_err(fail)?;
    let disk = Domain::disk([0.3, 0.4], 0.2).map_err(fail)?;
    let quad = disk_nystrom_quadrature(&[0.3, 0.4], 0.2, 0.009).map_err(fail)?;
    let f = solve_fundamental(&p, &disk, &quad, &[vec![0.3, 0.4]]).map_err(fail)?;
    let c = f.verify(&Bump::new(&[0.3, 0.4], 0.15), Target::Point(0)).map_err(fail)?;
    let g = f.growth(Target::Point(0)).map_err(fail)?;
    let (fast, secs) = within(t, Duration::from_secs(120));
    check(
        c.relative <= 2e-2 && g.within(0.3) && fast,
        format!(
            "{} nodes, relative defect {:.2e}, growth exponent {:?} (floor {}), {secs:.1} s",
            f.num_nodes(),
            c.relative,
            g.exponent.map(|e| (e * 1000.0).round() / 1000.0),
            g.reference - 0.3
        ),
    )
}

fn carleman() -> Verdict {
    let sq = Domain::unit_square();
    let taus = tau_grid(default_tau0(&sq), 8);
    let bumps = [
        Bump::new(&[0.5, 0.5], 0.2),
        Bump::new(&[0.3, 0.6], 0.15),
        Bump::new(&[0.7, 0.4], 0.2),
        Bump::new(&[0.4, 0.3], 0.25),
        Bump::new(&[0.6, 0.7], 0.1),
    ];
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut scale_defect = 0.0f64;
    for op in [laplace(2), EllipticOperator::perturbed_identity(0.1, OperatorForm::Divergence)] {
        for weight in [CarlemanWeight::standard(2, 1.0), CarlemanWeight::quadratic()] {
            for v in &bumps {
                let a = carleman_ratio(&op, &sq, v, &Support::of(v), &weight, &taus).map_err(fail)?;
                let w = v.clone().scaled(2.0);
                let b = carleman_ratio(&op, &sq, &w, &Support::of(&w), &weight, &taus).map_err(fail)?;
                lo = lo.min(a.min_ratio());
                hi = hi.max(a.max_ratio());
                for (p, q) in a.points.iter().zip(&b.points) {
                    scale_defect = scale_defect.max((p.ratio - q.ratio).abs() / p.ratio);
                }
            }
        }
    }
    check(
        lo > 0.0 && hi.is_finite() && scale_defect <= 1e-12,
        format!("ratios in [{lo:.3e}, {hi:.3e}], v → 2v defect {scale_defect:.1e}"),
    )
}

fn propagation() -> Verdict {
    let sq = Domain::unit_square();
    let chain = ball_chain(&sq, &[0.25, 0.5], 0.06, &[0.75, 0.5], 0.05).map_err(fail)?;
    let mut samples = 0;
    let mut dominated = true;
    let mut tightest = f64::INFINITY;
    for s in harmonic_catalog(2, 5).map_err(fail)?.into_iter().filter(|s| s.degree != Some(0)) {
        let rep = smallness_propagation(&laplace(2), &sq, &*s.field, &chain, 0.0).map_err(fail)?;
        dominated &= rep.holds() && rep.measured_end <= rep.bound_end;
        tightest = tightest.min(rep.bound_end / rep.measured_end);
        samples += 1;
    }
    let exact_constant = recursion_constant(2.0, 0.5) == 16.0;
    let mut sequences = 0;
    let mut lemma = true;
    for c in [1.0, 2.0, 5.0] {
        for gamma in [0.2, 0.5, 0.8] {
            for (eta0, b) in [(0.1, 0.01), (0.5, 0.0), (0.9, 0.05)] {
                let seq = iterate_recursion(eta0, b, c, gamma, 8);
                lemma &= recursion_constant(c, gamma) == (2.0 * c).powf(1.0 / (1.0 - gamma));
                lemma &= seq.iter().enumerate().all(|(k, e)| *e <= recursion_bound(eta0, b, c, gamma, k as u32));
                sequences += 1;
            }
        }
    }
    check(
        samples == 10 && dominated && exact_constant && lemma,
        format!("{samples} samples dominated (least bound/measured {tightest:.3}), {sequences} sequences, C(2, 1/2) = 16"),
    )
}

fn cauchy() -> Verdict {
    let t = Instant::now();
    let config = CauchySweepConfig::default();
    let sweep = cauchy_sweep(&config).map_err(fail)?;
    let (fast, secs) = within(t, Duration::from_secs(300));
    let fit = &sweep.fit;
    check(
        fit.rms < fit.power_rms && fit.beta > 0.0 && fast,
        format!(
            "{} levels × {} seeds, β̂ = {:.3}, log rms {:.3e} < power rms {:.3e}, {secs:.1} s",
            config.deltas.len(),
            config.seeds,
            fit.beta,
            fit.rms,
            fit.power_rms
        ),
    )
}

fn observability() -> Verdict {
    let sys = dirichlet_system(&Domain::interval(0.0, 1.0).map_err(fail)?, 1.0 / 400.0)?;
    let spec = eigensolve(&sys, 8).map_err(fail)?;
    let rep = observability_ratio(&sys, &spec, |x| x[0] > 0.3 && x[0] < 0.7).map_err(fail)?;
    let mut worst = 0.0f64;
    for (m, r) in rep.ratios.iter().enumerate() {
        let k = (m + 1) as f64;
        let mass = 0.2 - ((2.0 * k * PI * 0.7).sin() - (2.0 * k * PI * 0.3).sin()) / (4.0 * k * PI);
        let exact = (mass / 0.5).sqrt();
        worst = worst.max((r - exact).abs() / exact);
    }
    let sq = dirichlet_system(&Domain::unit_square(), 1.0 / 32.0)?;
    let sspec = eigensolve(&sq, 12).map_err(fail)?;
    let srep = observability_ratio(&sq, &sspec, |x| x[0] < 0.3 && x[1] < 0.3).map_err(fail)?;
    check(
        worst <= 0.01 && srep.kappa.is_finite(),
        format!("interval worst rel err {worst:.2e}; square slope κ = {:.3}, fit rms {:.3e}", srep.kappa, srep.rms),
    )
}

fn perron() -> Verdict {
    let disk = Domain::disk([0.0, 0.0], 1.0).map_err(fail)?;
    let g = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
    let res = perron_solve(&disk, g, PerronGrid::Polar { rings: 64, angles: 400 }, 5000, 1e-11).map_err(fail)?;
    let mut disk_err = 0.0f64;
    for (r, t) in [(0.0, 0.0), (0.3, 0.4), (0.6, 1.9), (0.8, 4.0), (0.5, 5.5)] {
        let x = [r * f64::cos(t), r * f64::sin(t)];
        let exact = poisson_disk(g, [0.0, 0.0], 1.0, &x).map_err(fail)?;
        disk_err = disk_err.max((res.field.value(&x) - exact).abs().max((res.field.value(&x) - g(&x)).abs()));
    }

    let l = Domain::l_shape(0.5).map_err(fail)?;
    let data = |x: &[f64]| (2.0 * x[0]).exp() * (2.0 * x[1]).cos();
    let pl = perron_solve(&l, data, PerronGrid::Cartesian { spacing: 0.025 }, 20000, 1e-12).map_err(fail)?;
    let mesh = Arc::new(build_polygon_mesh(&l, 0.0125, |_| BoundaryTag::Dirichlet).map_err(fail)?);
    let fem = solve(
        &assemble(mesh, &laplace(2), |_| 0.0, &BoundaryData::default().with_dirichlet(data)).map_err(fail)?,
    )
    .map_err(fail)?;
    let mut l_err = 0.0f64;
    for x in [[0.213, 0.317], [0.7, 0.2], [0.3, 0.8], [0.45, 0.45], [0.1, 0.1]] {
        l_err = l_err.max((pl.field.value(&x) - fem.value(&x)).abs());
    }
    check(
        disk_err <= 1e-3 && l_err <= 1e-3,
        format!("disk sup error {disk_err:.2e}, L-shape Perron vs FEM {l_err:.2e}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 15] = [
        ("spectrum of the Dirichlet Laplacian", spectrum),
        ("Poincaré constant on (0,1)", poincare),
        ("FEM convergence order", convergence),
        ("mean-value property", mean_value),
        ("frequency exactness and monotonicity", frequency),
        ("doubling inequality", doubling),
        ("three-sphere log-convexity", three_sphere),
        ("Harnack ratio", harnack),
        ("parametrix identities", parametrix_identities),
        ("fundamental solution", fundamental),
        ("Carleman ratio", carleman),
        ("propagation of smallness", propagation),
        ("Cauchy stability modulus", cauchy),
        ("spectral observability", observability),
        ("Perron method", perron),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
