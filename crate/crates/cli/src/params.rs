use std::f64::consts::PI;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use elliptica::geometry::Domain;
use elliptica::harmonic::{complex_power, harmonic_catalog, HarmonicSample, LinearCombination, RealPart};
use elliptica::operators::{EllipticOperator, OperatorForm, ScalarField};

use crate::catalog::Experiment;
use crate::error::{config, CliError};

/// Experiment parameters with catalog defaults filled in.
#[derive(Debug, Clone)]
pub struct Params {
    map: Map<String, Value>,
}

impl Params {
    /// Merges `given` over the defaults of `exp`; unknown keys are rejected.
    pub fn resolve(exp: &Experiment, given: &Map<String, Value>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut map = Map::new();
        for p in &exp.params {
            map.insert(p.name.to_string(), p.default.clone());
        }
        for (k, v) in given {
            if !map.contains_key(k) {
                let names: Vec<&str> = exp.params.iter().map(|p| p.name).collect();
                return Err(config(format!("unknown parameter `{k}` for `{}`; expected one of {names:?}", exp.id)));
            }
            map.insert(k.clone(), v.clone());
        }
        // Deterministic experiments ignore the seed.
        if let (Some(s), true) = (seed, exp.stochastic) {
            map.insert("seed".into(), Value::from(s));
        }
        Ok(Params { map })
    }

    pub fn as_map(&self) -> &Map<String, Value> {
        &self.map
    }

    fn get(&self, key: &str) -> Result<&Value, CliError> {
        self.map.get(key).ok_or_else(|| config(format!("missing parameter `{key}`")))
    }

    pub fn typed<T: DeserializeOwned>(&self, key: &str) -> Result<T, CliError> {
        serde_json::from_value(self.get(key)?.clone()).map_err(|e| config(format!("parameter `{key}`: {e}")))
    }

    pub fn f64_in(&self, key: &str, lo: f64, hi: f64) -> Result<f64, CliError> {
        let v: f64 = self.typed(key)?;
        if !(v > lo && v <= hi) {
            return Err(config(format!("parameter `{key}` = {v} outside ({lo}, {hi}]")));
        }
        Ok(v)
    }

    pub fn usize_in(&self, key: &str, lo: usize, hi: usize) -> Result<usize, CliError> {
        let v: usize = self.typed(key)?;
        if !(lo..=hi).contains(&v) {
            return Err(config(format!("parameter `{key}` = {v} outside {lo}..={hi}")));
        }
        Ok(v)
    }

    pub fn point(&self, key: &str, dim: usize) -> Result<Vec<f64>, CliError> {
        let v: Vec<f64> = self.typed(key)?;
        if v.len() != dim {
            return Err(config(format!("parameter `{key}` needs {dim} coordinates, got {}", v.len())));
        }
        Ok(v)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.typed("seed")
    }

    pub fn domain(&self, key: &str) -> Result<Domain, CliError> {
        parse_domain(self.get(key)?)
    }

    pub fn operator(&self, dim: usize, form: OperatorForm) -> Result<EllipticOperator, CliError> {
        let spec: String = self.typed("operator")?;
        Ok(EllipticOperator::preset(&spec, dim, form)?)
    }

    pub fn harmonic(&self, key: &str) -> Result<HarmonicSample, CliError> {
        let spec: String = self.typed(key)?;
        parse_harmonic(&spec)
    }

    /// Either an explicit increasing list or `{"min", "max", "count"}` geometric.
    pub fn radii(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let v = self.get(key)?;
        let radii: Vec<f64> = if v.is_array() {
            self.typed(key)?
        } else {
            #[derive(serde::Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Grid {
                min: f64,
                max: f64,
                count: usize,
            }
            let g: Grid = self.typed(key)?;
            if !(g.min > 0.0 && g.max > g.min && g.count >= 2) {
                return Err(config(format!("parameter `{key}`: need 0 < min < max and count ≥ 2")));
            }
            (0..g.count)
                .map(|i| g.min * (g.max / g.min).powf(i as f64 / (g.count - 1) as f64))
                .collect()
        };
        if radii.is_empty() || radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config(format!("parameter `{key}`: radii must be positive and increasing")));
        }
        Ok(radii)
    }
}

/// Named domains or single-key objects such as `{"disk": {"center": [0, 0], "radius": 1}}`.
pub fn parse_domain(v: &Value) -> Result<Domain, CliError> {
    let bad = || config(format!("unrecognized domain {v}"));
    if let Some(name) = v.as_str() {
        return Ok(match name {
            "unit_interval" => Domain::interval(0.0, 1.0)?,
            "unit_square" => Domain::unit_square(),
            "unit_cube" => Domain::rectangle(&[0.0; 3], &[1.0; 3])?,
            "unit_disk" => Domain::disk([0.0, 0.0], 1.0)?,
            "unit_ball" => Domain::ball([0.0; 3], 1.0)?,
            "l_shape" => Domain::l_shape(0.5)?,
            _ => return Err(bad()),
        });
    }
    let obj = v.as_object().filter(|o| o.len() == 1).ok_or_else(bad)?;
    let (kind, body) = obj.iter().next().expect("one entry");
    let field = |k: &str| body.get(k).cloned().ok_or_else(|| config(format!("domain `{kind}` needs `{k}`")));
    fn de<T: DeserializeOwned>(x: Value) -> Result<T, CliError> {
        serde_json::from_value(x).map_err(|e| config(format!("domain: {e}")))
    }
    Ok(match kind.as_str() {
        "interval" => {
            let [a, b]: [f64; 2] = de(body.clone())?;
            Domain::interval(a, b)?
        }
        "rectangle" => {
            let lower: Vec<f64> = de(field("lower")?)?;
            let upper: Vec<f64> = de(field("upper")?)?;
            Domain::rectangle(&lower, &upper)?
        }
        "disk" => Domain::disk(de(field("center")?)?, de(field("radius")?)?)?,
        "ball" => Domain::ball(de(field("center")?)?, de(field("radius")?)?)?,
        "annulus" => Domain::annulus(de(field("center")?)?, de(field("inner")?)?, de(field("outer")?)?)?,
        "polygon" => Domain::polygon(de(body.clone())?)?,
        "l_shape" => Domain::l_shape(de(field("side")?)?)?,
        _ => return Err(bad()),
    })
}

fn certify(label: &str, field: Arc<dyn ScalarField>) -> Result<HarmonicSample, CliError> {
    let center = vec![0.0; field.dim()];
    Ok(HarmonicSample::certify(label, field, &center, 1.0)?)
}

/// Harmonic field specs:
/// `harmonic:degK` or `re:K` (Re zᵏ), `im:K` (Im zᵏ), `solid:LABEL` (3D
/// catalog entry), `poisson:θ` (Poisson kernel of the unit disk with pole at
/// angle θ), `mix:c0,c1,…` (Σ c₂ₖ Re zᵏ⁺¹ + c₂ₖ₊₁ Im zᵏ⁺¹).
pub fn parse_harmonic(spec: &str) -> Result<HarmonicSample, CliError> {
    let bad = |why: &str| config(format!("field `{spec}`: {why}"));
    let (kind, arg) = spec.split_once(':').ok_or_else(|| bad("expected kind:argument"))?;
    let degree = |s: &str| -> Result<u32, CliError> {
        s.parse::<u32>().ok().filter(|k| *k <= 8).ok_or_else(|| bad("degree must be 0..=8"))
    };
    match kind {
        "harmonic" | "re" | "im" => {
            let k = degree(arg.strip_prefix("deg").unwrap_or(arg))?;
            let (re, im) = complex_power(k);
            let (label, field): (String, Arc<dyn ScalarField>) = if kind == "im" {
                (format!("Im z^{k}"), Arc::new(im))
            } else {
                (format!("Re z^{k}"), Arc::new(re))
            };
            if kind == "im" && k == 0 {
                return Err(bad("Im z^0 vanishes"));
            }
            Ok(certify(&label, field)?.homogeneous(k, &[0.0, 0.0]))
        }
        "solid" => harmonic_catalog(3, 3)?
            .into_iter()
            .find(|s| s.label == arg)
            .ok_or_else(|| bad("unknown solid harmonic label")),
        "poisson" => {
            let angle: f64 = arg.parse().map_err(|_| bad("angle must be a number"))?;
            Ok(HarmonicSample::certify(
                spec,
                Arc::new(RealPart::poisson_kernel([0.0, 0.0], 1.0, angle)),
                &[0.0, 0.0],
                0.9,
            )?)
        }
        "mix" => {
            let coeffs: Vec<f64> = arg
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| bad("coefficients must be numbers")))
                .collect::<Result<_, _>>()?;
            if coeffs.is_empty() || coeffs.len() > 16 {
                return Err(bad("need 1 to 16 coefficients"));
            }
            let mut parts: Vec<(f64, Arc<dyn ScalarField>)> = Vec::new();
            for (i, c) in coeffs.iter().enumerate() {
                let (re, im) = complex_power(i as u32 / 2 + 1);
                let part: Arc<dyn ScalarField> = if i % 2 == 0 { Arc::new(re) } else { Arc::new(im) };
                parts.push((*c, part));
            }
            certify(spec, Arc::new(LinearCombination::new(parts)))
        }
        _ => Err(bad("unknown kind")),
    }
}

/// Boundary data presets for the Perron experiment and whether each is harmonic.
pub type BoundaryFn = fn(&[f64]) -> f64;

pub fn perron_data(name: &str) -> Result<(BoundaryFn, bool), CliError> {
    fn saddle(x: &[f64]) -> f64 {
        x[0] * x[0] - x[1] * x[1]
    }
    fn exp_cos(x: &[f64]) -> f64 {
        (2.0 * x[0]).exp() * (2.0 * x[1]).cos()
    }
    fn abs_x(x: &[f64]) -> f64 {
        x[0].abs()
    }
    fn quadratic(x: &[f64]) -> f64 {
        x[0] * x[0] + x[1] * x[1] + (PI * x[0]).sin()
    }
    match name {
        "x2-y2" => Ok((saddle, true)),
        "exp_cos" => Ok((exp_cos, true)),
        "abs_x" => Ok((abs_x, false)),
        "quadratic" => Ok((quadratic, false)),
        _ => Err(config(format!("unknown boundary data `{name}`"))),
    }
}
