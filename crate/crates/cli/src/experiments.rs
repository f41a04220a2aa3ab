use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elliptica::geometry::{build_polygon_mesh, build_rect_mesh, disk_nystrom_quadrature, BoundaryTag, Domain, SimplicialMesh};
use elliptica::harmonic::{
    doubling_check, frequency_profile, harnack_ratio, perron_solve, poisson_disk, three_sphere_check, PerronGrid,
};
use elliptica::operators::{Bump, OperatorForm, ScalarField};
use elliptica::parametrix::{solve_fundamental, Parametrix, Target};
use elliptica::stability::{
    carleman_ratio, cauchy_sweep, default_tau0, observability_ratio, tau_grid, CarlemanWeight, CauchySweepConfig,
    RegRule, Support,
};
use elliptica::variational::{
    assemble, eigensolve, min_max_check, solve, weak_max_check, BoundaryData, MaxPrincipleForm,
};

use crate::error::{config, CliError};
use crate::params::{perron_data, Params};
use crate::report::Outcome;

pub fn run(id: &str, p: &Params) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    match id {
        "solve" => run_solve(p, &mut out)?,
        "eig" => run_eig(p, &mut out)?,
        "freq" => run_freq(p, &mut out)?,
        "threeball" => run_threeball(p, &mut out)?,
        "doubling" => run_doubling(p, &mut out)?,
        "harnack" => run_harnack(p, &mut out)?,
        "perron" => run_perron(p, &mut out)?,
        "parametrix" => run_parametrix(p, &mut out)?,
        "carleman" => run_carleman(p, &mut out)?,
        "cauchy" => run_cauchy(p, &mut out)?,
        "observability" => run_observability(p, &mut out)?,
        _ => unreachable!("ids are checked against the catalog"),
    }
    Ok(out)
}

/// Dirichlet-tagged mesh of a rectangle or polygon.
fn mesh(domain: &Domain, h: f64) -> Result<Arc<SimplicialMesh>, CliError> {
    let m = match domain {
        Domain::Rectangle { .. } => build_rect_mesh(domain, h)?,
        Domain::Polygon { .. } => build_polygon_mesh(domain, h, |_| BoundaryTag::Dirichlet)?,
        _ => return Err(config("meshing needs a rectangle, interval or polygon domain")),
    };
    Ok(Arc::new(m))
}

fn run_solve(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let domain = p.domain("domain")?;
    let h = p.f64_in("h", 0.0, 0.5)?;
    let op = p.operator(domain.dim(), OperatorForm::Divergence)?;
    let manufactured: bool = p.typed("manufactured")?;
    let exact = |x: &[f64]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let (sys, source_min) = if manufactured {
        if domain != Domain::unit_square() || p.typed::<String>("operator")? != "laplace" {
            return Err(config("`manufactured` needs the unit square and the laplace preset"));
        }
        let sys = assemble(mesh(&domain, h)?, &op, move |x| 2.0 * PI * PI * exact(x), &BoundaryData::default())?;
        (sys, 0.0)
    } else {
        let f: f64 = p.typed("source")?;
        let g: f64 = p.typed("dirichlet")?;
        (assemble(mesh(&domain, h)?, &op, move |_| f, &BoundaryData::default().with_dirichlet(move |_| g))?, f)
    };
    let u = solve(&sys)?;
    let residual = sys.galerkin_residual(&u);
    out.result("vertices", sys.mesh().num_vertices());
    out.result("galerkin_residual", residual);
    out.at_most("galerkin_residual", "discrete solution satisfies the Galerkin equations", residual, 1e-10);
    if !op.has_lower_order() && source_min >= 0.0 {
        let ext = weak_max_check(&u, MaxPrincipleForm::Supersolution, 1e-12);
        out.result("extremes", &ext);
        out.holds(
            "minimum_on_boundary",
            "weak maximum principle for supersolutions",
            !ext.violated,
            format!("interior min {:e}, boundary min {:e}", ext.interior_min, ext.boundary_min),
        );
    }
    if manufactured {
        let err = u.l2_error(exact);
        out.result("l2_error", err);
        out.at_most("l2_error", "P1 L² error is O(h²); checked against 2h²", err, 2.0 * h * h);
    }
    out.table("solution.csv", u.to_csv());
    Ok(())
}

/// Exact Dirichlet-Laplacian eigenvalues of a box, ascending.
fn box_eigenvalues(lower: &[f64], upper: &[f64], k: usize) -> Vec<f64> {
    let n = lower.len();
    let top = k + 2;
    let mut all = Vec::new();
    let mut idx = vec![1usize; n];
    loop {
        all.push((0..n).map(|d| (idx[d] as f64 * PI / (upper[d] - lower[d])).powi(2)).sum::<f64>());
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] <= top {
                break;
            }
            idx[d] = 1;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    all.sort_by(f64::total_cmp);
    all.truncate(k);
    all
}

fn run_eig(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let domain = p.domain("domain")?;
    let h = p.f64_in("h", 0.0, 0.5)?;
    let k = p.usize_in("k", 1, 50)?;
    let trials = p.usize_in("trials", 0, 100)?;
    let op = p.operator(domain.dim(), OperatorForm::Divergence)?;
    let sys = assemble(mesh(&domain, h)?, &op, |_| 0.0, &BoundaryData::default())?;
    let spec = eigensolve(&sys, k)?;
    out.result("eigenvalues", &spec.eigenvalues);
    out.result("residuals", &spec.residuals);
    let positive = spec.eigenvalues.iter().all(|l| *l > 0.0);
    let ordered = spec.eigenvalues.windows(2).all(|w| w[0] <= w[1]);
    out.holds(
        "positive_ordered",
        "Dirichlet eigenvalues are positive and nondecreasing",
        positive && ordered,
        format!("{} eigenvalues", spec.len()),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed()?);
    let n = sys.num_free();
    for m in 1..=k {
        let subspaces: Vec<Vec<Vec<f64>>> = (0..trials)
            .map(|_| (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
            .collect();
        let rep = min_max_check(&sys, &spec, m, &subspaces)?;
        out.holds(
            &format!("min_max_{m}"),
            "λ_m is the min over m-dimensional subspaces of the max Rayleigh quotient",
            rep.holds,
            format!("eigen span defect {:e}, least trial margin {:e}", rep.eigen_span_defect, rep.min_relative_margin),
        );
    }
    let exact = match (&domain, p.typed::<String>("operator")?.as_str()) {
        (Domain::Rectangle { lower, upper }, "laplace") => Some(box_eigenvalues(lower, upper, k)),
        _ => None,
    };
    let mut csv = String::from("index,lambda,exact\n");
    for (i, l) in spec.eigenvalues.iter().enumerate() {
        let e = exact.as_ref().map(|e| e[i].to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{l},{e}\n", i + 1));
    }
    if let Some(e) = exact {
        let rel = (spec.eigenvalues[0] - e[0]).abs() / e[0];
        out.result("exact", &e);
        out.result("lambda1_relative_error", rel);
        out.at_most("lambda1", "λ₁ of a box is Σ(π/ℓᵢ)²", rel, 0.01);
    }
    out.table("eigenvalues.csv", csv);
    Ok(())
}

fn run_freq(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let u = p.harmonic("u")?;
    let center = p.point("center", u.dim())?;
    let radii = p.radii("radii")?;
    let prof = frequency_profile(&u, &center, &radii, None)?;
    let drop = prof.max_frequency_drop();
    out.result("field", &u.label);
    out.result("frequencies", prof.frequencies());
    out.result("flagged", &prof.flagged);
    out.at_most("monotone", "frequency N(r) is nondecreasing", drop, 1e-8);
    out.at_most("flux_identity", "D(r) equals the boundary flux ∫u∂ᵥu", prof.flux_defect(), 1e-8);
    out.at_most("ball_sphere", "K(r) ≤ r·H(r)", prof.ball_sphere_excess(), 1e-9);
    out.at_most("cauchy_schwarz", "D(r)² ≤ L(r)·H(r)", prof.cauchy_schwarz_excess(), 1e-9);
    if let (Some(k), Some(c)) = (u.degree, &u.homogeneous_center) {
        if c == &center && k >= 1 {
            let dev = prof.frequencies().iter().fold(0.0f64, |w, n| w.max((n - f64::from(k)).abs()));
            out.at_most("homogeneous", "N ≡ k for a homogeneous harmonic polynomial of degree k", dev, 1e-6);
        }
    }
    out.table("frequency.csv", prof.to_csv());
    Ok(())
}

fn run_threeball(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let u = p.harmonic("u")?;
    let center = p.point("center", u.dim())?;
    let radii: [f64; 3] = p.typed("radii")?;
    let rep = three_sphere_check(&u, &center, radii, None)?;
    out.result("field", &u.label);
    out.result("report", &rep);
    out.at_least("log_convexity", "r ↦ ln(H(r)/rⁿ⁻¹) is convex in ln r", rep.log_convexity_slack, -rep.tolerance);
    out.table(
        "threeball.csv",
        format!(
            "r1,r2,r3,theta,log_convexity_slack,alpha,arithmetic_ball_defect,arithmetic_sphere_defect\n{},{},{},{},{},{},{},{}\n",
            radii[0],
            radii[1],
            radii[2],
            rep.theta,
            rep.log_convexity_slack,
            rep.alpha,
            rep.arithmetic_ball_defect,
            rep.arithmetic_sphere_defect
        ),
    );
    Ok(())
}

fn run_doubling(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let u = p.harmonic("u")?;
    let center = p.point("center", u.dim())?;
    let r: f64 = p.typed("r")?;
    let r_bar: f64 = p.typed("r_bar")?;
    let rep = doubling_check(&u, &center, r, r_bar, None)?;
    out.result("field", &u.label);
    out.result("report", &rep);
    out.holds(
        "doubling",
        "K(2r) ≤ 2^{2N(r̄)+n} K(r)",
        rep.holds,
        format!("ratio {:e}, bound {:e}", rep.ratio, rep.bound),
    );
    out.table(
        "doubling.csv",
        format!(
            "r,r_bar,ratio,frequency_at_r_bar,bound\n{},{},{},{},{}\n",
            rep.r, rep.r_bar, rep.ratio, rep.frequency_at_r_bar, rep.bound
        ),
    );
    Ok(())
}

fn run_harnack(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let u = p.harmonic("u")?;
    let domain = p.domain("domain")?;
    let center = p.point("center", u.dim())?;
    let r = p.f64_in("r", 0.0, f64::MAX)?;
    let rep = harnack_ratio(&*u.field, &center, r, Some(&domain))?;
    out.result("field", &u.label);
    out.result("report", &rep);
    out.holds(
        "harnack",
        "sup/inf of a positive harmonic function on B(x, r) is at most 3ⁿ when B(x, 4r) ⊂ Ω",
        rep.holds,
        format!("ratio {:e}, bound {}", rep.ratio, rep.bound),
    );
    out.table(
        "harnack.csv",
        format!("r,max,min,ratio,bound\n{},{},{},{},{}\n", rep.r, rep.max, rep.min, rep.ratio, rep.bound),
    );
    Ok(())
}

fn run_perron(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let domain = p.domain("domain")?;
    let name: String = p.typed("data")?;
    let (g, harmonic) = perron_data(&name)?;
    let grid = match domain {
        Domain::Disk { .. } => PerronGrid::Polar {
            rings: p.usize_in("rings", 2, 4096)?,
            angles: p.usize_in("angles", 3, 65536)?,
        },
        _ => PerronGrid::Cartesian {
            spacing: p.f64_in("spacing", 0.0, 1.0)?,
        },
    };
    let sweeps = p.usize_in("max_sweeps", 1, 10_000_000)?;
    let tolerance = p.f64_in("tolerance", 0.0, 1.0)?;
    let res = perron_solve(&domain, g, grid, sweeps, tolerance)?;
    out.result("nodes", res.field.num_nodes());
    out.result("sweeps", res.sweeps.len());
    out.result("converged", res.converged);
    out.at_most("monotone", "each sweep of harmonic lifting is nondecreasing", res.max_dip(), 1e-12);
    if let (Domain::Disk { center, radius }, true) = (&domain, harmonic) {
        let mut worst = 0.0f64;
        for (s, t) in [(0.0, 0.0), (0.3, 0.4), (0.6, 1.9), (0.8, 4.0), (0.5, 5.5)] {
            let x = [center[0] + s * radius * f64::cos(t), center[1] + s * radius * f64::sin(t)];
            let exact = poisson_disk(g, *center, *radius, &x)?;
            worst = worst.max((res.field.value(&x) - exact).abs());
        }
        out.result("poisson_error", worst);
        out.at_most("poisson", "Perron solution equals the Poisson integral on a disk", worst, 1e-2);
    }
    out.table("perron_log.csv", res.log_csv());
    Ok(())
}

fn run_parametrix(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let domain = p.domain("domain")?;
    let Domain::Disk { center, radius } = domain else {
        return Err(config("parametrix needs a disk domain"));
    };
    let op = p.operator(2, OperatorForm::Divergence)?;
    let spacing = p.f64_in("spacing", 0.0, radius)?;
    let target = p.point("target", 2)?;
    let bump_radius = p.f64_in("bump_radius", 0.0, radius)?;
    let pairs = p.usize_in("pairs", 1, 100_000)?;
    let par = Parametrix::new(&op)?;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed()?);
    let (mut frozen, mut sandwich_ok, mut applicable) = (0.0f64, true, 0usize);
    for _ in 0..pairs {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        frozen = frozen.max(par.frozen_defect(&x, &y)?);
        let s = par.sandwich(&x, &y)?;
        sandwich_ok &= s.holds;
        applicable += usize::from(s.applicable);
    }
    out.result("frozen_defect", frozen);
    out.at_most("frozen", "Σaⁱʲ(y)∂ᵢⱼH(·, y) = 0 away from y", frozen, 1e-8);
    out.holds(
        "sandwich",
        "H is bounded above and below by the Newtonian profile scaled by the ellipticity",
        sandwich_ok,
        format!("{applicable} of {pairs} pairs in range"),
    );

    let quad = disk_nystrom_quadrature(&center, radius, spacing)?;
    let f = solve_fundamental(&par, &domain, &quad, std::slice::from_ref(&target))?;
    let check = f.verify(&Bump::new(&target, bump_radius), Target::Point(0))?;
    let growth = f.growth(Target::Point(0))?;
    out.result("nodes", f.num_nodes());
    out.result("identity", check);
    out.result("growth", &growth);
    out.at_most("identity", "∫F L*φ = −φ(y) for test functions φ", check.relative, 2e-2);
    out.holds(
        "growth",
        "F − H is less singular than H at the pole",
        growth.within(0.3),
        format!("exponent {:?}, reference {}", growth.exponent, growth.reference),
    );
    out.table("fundamental.csv", f.to_csv(Target::Point(0))?);
    Ok(())
}

fn run_carleman(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let domain = p.domain("domain")?;
    let n = domain.dim();
    let op = p.operator(n, OperatorForm::Divergence)?;
    let center = p.point("center", n)?;
    let radius = p.f64_in("radius", 0.0, f64::MAX)?;
    let weight = match p.typed::<String>("weight")?.as_str() {
        "exponential" => CarlemanWeight::standard(n, p.f64_in("lambda", 0.0, 100.0)?),
        "quadratic" => CarlemanWeight::quadratic(),
        w => return Err(config(format!("unknown weight `{w}`"))),
    };
    let tau0 = match p.typed::<Option<f64>>("tau0")? {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(config(format!("tau0 = {t} must be positive"))),
        None => default_tau0(&domain),
    };
    let taus = tau_grid(tau0, p.usize_in("tau_count", 1, 64)?);
    let v = Bump::new(&center, radius);
    let w = v.clone().scaled(2.0);
    let support = Support::of(&v);
    let rep = carleman_ratio(&op, &domain, &v, &support, &weight, &taus)?;
    let twice = carleman_ratio(&op, &domain, &w, &support, &weight, &taus)?;
    let scale = rep
        .points
        .iter()
        .zip(&twice.points)
        .map(|(a, b)| (a.ratio - b.ratio).abs() / a.ratio)
        .fold(0.0, f64::max);
    out.result("weight", weight.name());
    out.result("tau0", tau0);
    out.result("points", &rep.points);
    out.result("lhs_slope", rep.lhs_slope);
    out.result("rhs_slope", rep.rhs_slope);
    out.holds(
        "finite_positive",
        "the weighted ratio is positive and finite on every τ",
        rep.min_ratio() > 0.0 && rep.max_ratio().is_finite(),
        format!("ratios in [{:e}, {:e}]", rep.min_ratio(), rep.max_ratio()),
    );
    out.at_most("scale_invariance", "the ratio is invariant under v ↦ cv", scale, 1e-12);
    if weight.name() == "exponential" && taus.len() >= 2 {
        out.at_most(
            "slopes",
            "both sides grow at the same exponential rate in τ",
            rep.slope_mismatch(),
            0.05,
        );
    }
    out.table("carleman.csv", rep.to_csv());
    Ok(())
}

fn run_cauchy(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    let config = CauchySweepConfig {
        h: p.f64_in("h", 0.0, 0.25)?,
        deltas: p.typed("deltas")?,
        seeds: p.usize_in("seeds", 1, 1000)? as u64,
        master_seed: p.seed()?,
        reg: p.typed::<RegRule>("reg")?,
        ..CauchySweepConfig::default()
    };
    let sweep = cauchy_sweep(&config)?;
    out.result("floor", sweep.floor);
    out.result("fit", &sweep.fit);
    out.result("lcurve_delta", sweep.lcurve_delta);
    out.result("lcurve", &sweep.lcurve);
    out.result("lcurve_corner", sweep.lcurve_corner);
    out.holds(
        "log_modulus",
        "errors follow a logarithmic stability modulus better than any power of δ",
        sweep.fit.log_beats_power() && sweep.fit.beta > 0.0,
        format!(
            "β̂ = {:.3}, log rms {:e}, power rms {:e}",
            sweep.fit.beta, sweep.fit.rms, sweep.fit.power_rms
        ),
    );
    out.table("cauchy.csv", sweep.to_csv());
    out.table("cauchy_fit.csv", sweep.fit.to_csv());
    Ok(())
}

fn run_observability(p: &Params, out: &mut Outcome) -> Result<(), CliError> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    }
    let domain = p.domain("domain")?;
    let h = p.f64_in("h", 0.0, 0.5)?;
    let k = p.usize_in("k", 1, 50)?;
    let b: Box = p.typed("subdomain")?;
    if b.lower.len() != domain.dim() || b.upper.len() != domain.dim() {
        return Err(config("subdomain corners must match the domain dimension"));
    }
    let op = elliptica::operators::EllipticOperator::laplace(domain.dim(), OperatorForm::Divergence);
    let sys = assemble(mesh(&domain, h)?, &op, |_| 0.0, &BoundaryData::default())?;
    let spec = eigensolve(&sys, k)?;
    let inside = |x: &[f64]| x.iter().enumerate().all(|(d, v)| *v > b.lower[d] && *v < b.upper[d]);
    let rep = observability_ratio(&sys, &spec, inside)?;
    out.result("report", &rep);
    out.holds(
        "ratios",
        "localized eigenfunction mass lies in (0, 1]",
        rep.ratios.iter().all(|r| *r > 0.0 && *r <= 1.0 + 1e-12),
        format!("{} cells in ω", rep.cells_in_subdomain),
    );
    out.table("observability.csv", rep.to_csv());
    Ok(())
}
