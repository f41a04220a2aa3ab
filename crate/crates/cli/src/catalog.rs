use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Serialize)]
pub struct Param {
    pub name: &'static str,
    pub default: Value,
    pub help: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Experiment {
    pub id: &'static str,
    pub summary: &'static str,
    /// Result the experiment reproduces.
    pub reference: &'static str,
    pub stochastic: bool,
    pub params: Vec<Param>,
}

fn p(name: &'static str, default: Value, help: &'static str) -> Param {
    Param { name, default, help }
}

fn seed() -> Param {
    p("seed", json!(0), "RNG seed (overridden by --seed)")
}

pub fn catalog() -> Vec<Experiment> {
    vec![
        Experiment {
            id: "solve",
            summary: "P1 finite element solution of a Dirichlet problem",
            reference: "weak formulation, Galerkin orthogonality and weak maximum principle",
            stochastic: false,
            params: vec![
                p("domain", json!("unit_square"), "domain spec"),
                p("operator", json!("laplace"), "coefficient preset"),
                p("h", json!(0.03125), "mesh size, (0, 0.5]"),
                p("source", json!(1.0), "constant source term f"),
                p("dirichlet", json!(0.0), "constant boundary value"),
                p("manufactured", json!(false), "solve for sin(πx)sin(πy) on the unit square instead"),
            ],
        },
        Experiment {
            id: "eig",
            summary: "Dirichlet eigenvalues and min-max check",
            reference: "Rayleigh quotient min-max characterization of Dirichlet eigenvalues",
            stochastic: true,
            params: vec![
                p("domain", json!("unit_square"), "domain spec"),
                p("operator", json!("laplace"), "coefficient preset"),
                p("h", json!(0.03125), "mesh size, (0, 0.5]"),
                p("k", json!(4), "number of eigenpairs, 1..=50"),
                p("trials", json!(8), "random trial subspaces for the min-max check"),
                seed(),
            ],
        },
        Experiment {
            id: "freq",
            summary: "Frequency function profile of a harmonic function",
            reference: "monotonicity of the frequency function of harmonic functions",
            stochastic: false,
            params: vec![
                p("u", json!("harmonic:deg3"), "harmonic field spec"),
                p("center", json!([0.0, 0.0]), "profile center"),
                p("radii", json!({"min": 0.05, "max": 1.0, "count": 20}), "geometric radius grid or explicit list"),
            ],
        },
        Experiment {
            id: "threeball",
            summary: "Three-sphere inequality for a harmonic function",
            reference: "log-convexity of the sphere energy (three-ball inequality)",
            stochastic: false,
            params: vec![
                p("u", json!("harmonic:deg3"), "harmonic field spec"),
                p("center", json!([0.0, 0.0]), "ball center"),
                p("radii", json!([0.1, 0.3, 0.8]), "three increasing radii"),
            ],
        },
        Experiment {
            id: "doubling",
            summary: "Doubling inequality for a harmonic function",
            reference: "doubling estimate from the frequency bound",
            stochastic: false,
            params: vec![
                p("u", json!("harmonic:deg3"), "harmonic field spec"),
                p("center", json!([0.0, 0.0]), "ball center"),
                p("r", json!(0.2), "inner radius"),
                p("r_bar", json!(0.5), "outer radius, > r"),
            ],
        },
        Experiment {
            id: "harnack",
            summary: "Harnack ratio of a positive harmonic function",
            reference: "Harnack inequality for positive harmonic functions",
            stochastic: false,
            params: vec![
                p("u", json!("poisson:0"), "positive harmonic field spec"),
                p("domain", json!("unit_disk"), "domain spec"),
                p("center", json!([0.3, 0.0]), "ball center"),
                p("r", json!(0.1), "radius with 4r inside the domain"),
            ],
        },
        Experiment {
            id: "perron",
            summary: "Perron iteration by disk harmonic lifting",
            reference: "Perron method with monotone harmonic lifting",
            stochastic: false,
            params: vec![
                p("domain", json!("unit_disk"), "disk or polygon spec"),
                p("data", json!("x2-y2"), "boundary data: x2-y2, exp_cos, abs_x or quadratic"),
                p("rings", json!(32), "polar rings (disk)"),
                p("angles", json!(128), "polar angles (disk)"),
                p("spacing", json!(0.05), "grid spacing (polygon)"),
                p("max_sweeps", json!(20000), "sweep budget"),
                p("tolerance", json!(1e-10), "stopping update size"),
            ],
        },
        Experiment {
            id: "parametrix",
            summary: "Levi parametrix and fundamental solution on a disk",
            reference: "Levi parametrix construction of the fundamental solution",
            stochastic: true,
            params: vec![
                p("operator", json!("perturbed_identity(0.1)"), "coefficient preset"),
                p("domain", json!({"disk": {"center": [0.3, 0.4], "radius": 0.2}}), "disk spec"),
                p("spacing", json!(0.012), "Nyström node spacing"),
                p("target", json!([0.3, 0.4]), "pole of the fundamental solution"),
                p("bump_radius", json!(0.15), "test function radius"),
                p("pairs", json!(200), "random point pairs for the frozen-coefficient check"),
                seed(),
            ],
        },
        Experiment {
            id: "carleman",
            summary: "Carleman ratio over a τ grid",
            reference: "Carleman estimate with exponential weights",
            stochastic: false,
            params: vec![
                p("domain", json!("unit_square"), "domain spec"),
                p("operator", json!("laplace"), "coefficient preset"),
                p("center", json!([0.5, 0.5]), "bump center"),
                p("radius", json!(0.2), "bump radius"),
                p("weight", json!("exponential"), "exponential or quadratic"),
                p("lambda", json!(1.0), "exponential weight parameter"),
                p("tau0", json!(null), "smallest τ, default 4/diam²"),
                p("tau_count", json!(8), "geometric τ grid size up to 8τ₀"),
            ],
        },
        Experiment {
            id: "cauchy",
            summary: "Regularized Cauchy completion and stability modulus fit",
            reference: "logarithmic conditional stability of the Cauchy problem",
            stochastic: true,
            params: vec![
                p("h", json!(0.03125), "mesh size"),
                p("deltas", json!([1e-1, 3.16227766016838e-2, 1e-2, 3.16227766016838e-3, 1e-3, 3.16227766016838e-4, 1e-4]), "noise levels"),
                p("seeds", json!(10), "noise draws per level"),
                p("reg", json!({"rule": "power", "factor": 1.0, "power": 1.0, "min": 1e-12}), "regularization rule"),
                seed(),
            ],
        },
        Experiment {
            id: "observability",
            summary: "Eigenfunction mass on an interior subdomain",
            reference: "spectral observability from unique continuation",
            stochastic: false,
            params: vec![
                p("domain", json!("unit_square"), "domain spec"),
                p("h", json!(0.03125), "mesh size"),
                p("k", json!(12), "number of eigenpairs"),
                p("subdomain", json!({"lower": [0.0, 0.0], "upper": [0.3, 0.3]}), "axis-aligned box ω"),
            ],
        },
    ]
}

pub fn find(id: &str) -> Option<Experiment> {
    catalog().into_iter().find(|e| e.id == id)
}

pub fn ids() -> Vec<&'static str> {
    catalog().iter().map(|e| e.id).collect()
}
