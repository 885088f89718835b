//! Scenario files.
//!
//! A scenario is a TOML document. The `[model]` table is required and must
//! set every model key; coefficient maps are tables
//! `{ form = "constant" | "affine" | "quadratic", const = .., <var> = .., <var>2 = .. }`
//! restricted to the variables listed in [`COEFFICIENTS`]. The run sections
//! `[grid]`, `[search]`, `[flags]`, `[simulation]` and `[verification]` are
//! optional and every key in them falls back to its default. Unknown keys are
//! errors everywhere. `scenarios/default.toml` documents the full schema.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contract::IcConfig;
use crate::error::{Error, Result};
use crate::hjbi::{GridConfig, SchemeFlags, SearchConfig};
use crate::model::{Coef, CyberState, Interval, JumpScaling, Mark, ModelParams, ReferenceIntensity, Utility, Var};

/// Coefficient keys of `[model]` with the variables each may depend on.
pub const COEFFICIENTS: [(&str, &[Var]); 9] = [
    ("mu", &[Var::T, Var::I]),
    ("sigma_price", &[Var::T, Var::I, Var::H]),
    ("sigma_tilde", &[Var::T, Var::H]),
    ("discount_k", &[Var::T, Var::P, Var::S, Var::I]),
    ("effort_cost", &[Var::T, Var::P, Var::S, Var::I, Var::A]),
    ("agent_jump_cost", &[Var::T, Var::P, Var::S, Var::I]),
    ("principal_jump_cost", &[Var::T, Var::P, Var::S, Var::I]),
    ("terminal_agent", &[Var::P, Var::S, Var::I]),
    ("terminal_principal", &[Var::P, Var::S, Var::I]),
];

/// Variables a mark intensity may depend on.
pub const INTENSITY_VARS: &[Var] = &[Var::T, Var::P, Var::S, Var::I, Var::H];

const MODEL_SCALARS: [&str; 11] = [
    "beta",
    "rho",
    "epsilon",
    "reservation",
    "horizon",
    "utility",
    "jump_scaling",
    "reference_intensity",
    "x0",
    "a_set",
    "h_set",
];

/// Settings of the `simulate` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Constant agent effort.
    pub effort: f64,
    /// Constant hacker action.
    pub hack: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            paths: 10_000,
            dt: 1.0 / 256.0,
            seed: 0,
            effort: 0.5,
            hack: 0.5,
        }
    }
}

/// Settings of the `verify` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerificationSection {
    pub paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub sigmas: f64,
}

impl Default for VerificationSection {
    fn default() -> Self {
        let d = IcConfig::default();
        VerificationSection {
            paths: d.n_paths,
            dt: d.dt,
            seed: d.seed,
            sigmas: d.sigmas,
        }
    }
}

impl VerificationSection {
    pub fn ic_config(&self) -> IcConfig {
        IcConfig {
            n_paths: self.paths,
            dt: self.dt,
            seed: self.seed,
            sigmas: self.sigmas,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub model: ModelParams,
    pub grid: GridConfig,
    pub search: SearchConfig,
    pub flags: SchemeFlags,
    pub simulation: SimulationSection,
    pub verification: VerificationSection,
    /// SHA-256 of the source text, lowercase hex.
    pub content_hash: String,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        check_keys(
            "scenario",
            &doc,
            &["model"],
            &["grid", "search", "flags", "simulation", "verification"],
        )?;
        let model = parse_model(table(&doc, "model", "scenario")?)?;
        let grid = match doc.get("grid") {
            Some(v) => parse_grid(as_table(v, "grid")?)?,
            None => GridConfig::default(),
        };
        Ok(Scenario {
            model,
            grid,
            search: section(&doc, "search")?,
            flags: section(&doc, "flags")?,
            simulation: section(&doc, "simulation")?,
            verification: section(&doc, "verification")?,
            content_hash: hex_sha256(text.as_bytes()),
        })
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Error listing every unknown and every missing key of `t`.
fn check_keys(name: &str, t: &toml::Table, required: &[&str], optional: &[&str]) -> Result<()> {
    let unknown: Vec<&str> = t
        .keys()
        .map(String::as_str)
        .filter(|k| !required.contains(k) && !optional.contains(k))
        .collect();
    let missing: Vec<&str> = required.iter().copied().filter(|k| !t.contains_key(*k)).collect();
    let mut msg = Vec::new();
    if !unknown.is_empty() {
        msg.push(format!("unknown keys: {}", unknown.join(", ")));
    }
    if !missing.is_empty() {
        msg.push(format!("missing keys: {}", missing.join(", ")));
    }
    if msg.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("[{name}] {}", msg.join("; "))))
    }
}

fn as_table<'a>(v: &'a toml::Value, name: &str) -> Result<&'a toml::Table> {
    v.as_table().ok_or_else(|| Error::Config(format!("`{name}` must be a table")))
}

fn table<'a>(t: &'a toml::Table, key: &str, parent: &str) -> Result<&'a toml::Table> {
    match t.get(key) {
        Some(v) => as_table(v, key),
        None => Err(Error::Config(format!("[{parent}] missing keys: {key}"))),
    }
}

fn number(t: &toml::Table, key: &str, parent: &str) -> Result<f64> {
    match t.get(key) {
        Some(toml::Value::Float(f)) => Ok(*f),
        Some(toml::Value::Integer(n)) => Ok(*n as f64),
        Some(_) => Err(Error::Config(format!("[{parent}] `{key}` must be a number"))),
        None => Err(Error::Config(format!("[{parent}] missing keys: {key}"))),
    }
}

fn string<'a>(t: &'a toml::Table, key: &str, parent: &str) -> Result<&'a str> {
    t.get(key)
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Config(format!("[{parent}] `{key}` must be a string")))
}

fn section<T: Default + for<'de> Deserialize<'de>>(doc: &toml::Table, key: &str) -> Result<T> {
    match doc.get(key) {
        None => Ok(T::default()),
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("[{key}] {}", e.message()))),
    }
}

fn interval(t: &toml::Table, key: &str) -> Result<Interval> {
    let name = format!("model.{key}");
    let it = table(t, key, "model")?;
    check_keys(&name, it, &["lo", "hi"], &[])?;
    Interval::new(number(it, "lo", &name)?, number(it, "hi", &name)?)
}

fn parse_model(t: &toml::Table) -> Result<ModelParams> {
    let mut required: Vec<&str> = MODEL_SCALARS.to_vec();
    required.extend(COEFFICIENTS.iter().map(|(k, _)| *k));
    required.push("marks");
    check_keys("model", t, &required, &[])?;

    let mut coefs = Vec::with_capacity(COEFFICIENTS.len());
    for (key, vars) in COEFFICIENTS {
        coefs.push(Coef::from_table(key, table(t, key, "model")?, vars)?);
    }
    let utility = match string(t, "utility", "model")? {
        "identity" => Utility::Identity,
        "exponential" => Utility::Exponential,
        other => {
            return Err(Error::Config(format!(
                "[model] unknown utility `{other}` (expected identity or exponential)"
            )))
        }
    };
    let jump_scaling = match string(t, "jump_scaling", "model")? {
        "as-written" => JumpScaling::AsWritten,
        "unscaled" => JumpScaling::Unscaled,
        other => {
            return Err(Error::Config(format!(
                "[model] unknown jump_scaling `{other}` (expected as-written or unscaled)"
            )))
        }
    };
    let reference = match t.get("reference_intensity") {
        Some(toml::Value::String(s)) if s == "initial" => ReferenceIntensity::Initial,
        Some(toml::Value::Array(a)) => ReferenceIntensity::Fixed(
            a.iter()
                .map(|v| match v {
                    toml::Value::Float(f) => Ok(*f),
                    toml::Value::Integer(n) => Ok(*n as f64),
                    _ => Err(Error::Config("[model] reference_intensity entries must be numbers".into())),
                })
                .collect::<Result<_>>()?,
        ),
        _ => {
            return Err(Error::Config(
                "[model] reference_intensity must be \"initial\" or an array of numbers".into(),
            ))
        }
    };
    let xt = table(t, "x0", "model")?;
    check_keys("model.x0", xt, &["p", "s", "i"], &[])?;
    let x0 = CyberState::new(number(xt, "p", "model.x0")?, number(xt, "s", "model.x0")?, number(xt, "i", "model.x0")?)?;

    let marks = t
        .get("marks")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Config("[model] `marks` must be an array of tables".into()))?
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let name = format!("model.marks[{k}]");
            let mt = as_table(v, &name)?;
            check_keys(&name, mt, &["name", "loss", "intensity"], &[])?;
            Ok(Mark {
                name: string(mt, "name", &name)?.to_string(),
                loss: number(mt, "loss", &name)?,
                intensity: Coef::from_table(&format!("{name}.intensity"), table(mt, "intensity", &name)?, INTENSITY_VARS)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let scalars = [
        number(t, "beta", "model")?,
        number(t, "rho", "model")?,
        number(t, "epsilon", "model")?,
        number(t, "reservation", "model")?,
        number(t, "horizon", "model")?,
    ];
    let (a_set, h_set) = (interval(t, "a_set")?, interval(t, "h_set")?);
    let mut c = coefs.into_iter();
    let mut next = || c.next().expect("one coefficient per key");
    let m = ModelParams::default().with(|m| {
        m.beta = scalars[0];
        m.rho = scalars[1];
        m.epsilon = scalars[2];
        m.reservation = scalars[3];
        m.horizon = scalars[4];
        m.mu = next();
        m.sigma_price = next();
        m.sigma_tilde = next();
        m.discount_k = next();
        m.effort_cost = next();
        m.agent_jump_cost = next();
        m.principal_jump_cost = next();
        m.terminal_agent = next();
        m.terminal_principal = next();
        m.marks = marks;
        m.reference = reference;
        m.a_set = a_set;
        m.h_set = h_set;
        m.utility = utility;
        m.x0 = x0;
        m.jump_scaling = jump_scaling;
    });
    m.validate()?;
    Ok(m)
}

fn parse_grid(t: &toml::Table) -> Result<GridConfig> {
    const INTS: [&str; 4] = ["n_p", "n_si", "n_y", "n_t"];
    const FLOATS: [&str; 4] = ["p_min", "p_max", "y_lo", "y_hi"];
    let mut keys: Vec<&str> = INTS.to_vec();
    keys.extend(FLOATS);
    keys.push("nodes");
    check_keys("grid", t, &[], &keys)?;
    let int = |k: &str| -> Result<Option<usize>> {
        match t.get(k) {
            None => Ok(None),
            Some(toml::Value::Integer(n)) if *n >= 1 => Ok(Some(*n as usize)),
            Some(_) => Err(Error::Config(format!("[grid] `{k}` must be a positive integer"))),
        }
    };
    let float = |k: &str| -> Result<Option<f64>> { t.contains_key(k).then(|| number(t, k, "grid")).transpose() };
    let mut g = match int("nodes")? {
        Some(n) => GridConfig::cube(n),
        None => GridConfig::default(),
    };
    if let Some(v) = int("n_p")? {
        g.n_p = v;
    }
    if let Some(v) = int("n_si")? {
        g.n_si = v;
    }
    if let Some(v) = int("n_y")? {
        g.n_y = v;
    }
    if let Some(v) = int("n_t")? {
        g.n_t = v;
    }
    if let Some(v) = float("p_min")? {
        g.p_min = v;
    }
    if let Some(v) = float("p_max")? {
        g.p_max = v;
    }
    match (float("y_lo")?, float("y_hi")?) {
        (Some(lo), Some(hi)) => g.y_bounds = Some((lo, hi)),
        (None, None) => {}
        _ => return Err(Error::Config("[grid] set both y_lo and y_hi or neither".into())),
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEFAULT: &str = include_str!("../../../scenarios/default.toml");

    #[test]
    fn shipped_default_matches_built_in_defaults() {
        let s = Scenario::parse(DEFAULT).unwrap();
        assert_eq!(s.model, ModelParams::default());
        assert_eq!(s.grid, GridConfig::default());
        assert_eq!(s.search, SearchConfig::default());
        assert_eq!(s.flags, SchemeFlags::default());
        assert_eq!(s.content_hash.len(), 64);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let text = DEFAULT.replace("beta = 0.3", "beta = 0.3\ngamma = 1.0\ndelta = 2.0");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("gamma") && err.contains("delta"), "{err}");
        let text = format!("{DEFAULT}\n[extra]\nx = 1\n");
        assert!(Scenario::parse(&text).unwrap_err().to_string().contains("extra"));
        let text = DEFAULT.replace("[search]", "[search]\nwidth = 3");
        assert!(Scenario::parse(&text).unwrap_err().to_string().contains("width"));
    }

    #[test]
    fn missing_keys_are_named() {
        let text = DEFAULT.replace("beta = 0.3\n", "").replace("rho = 0.1\n", "");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("missing keys: beta, rho"), "{err}");
    }

    #[test]
    fn coefficient_variables_are_restricted() {
        let text = DEFAULT.replace("[model.mu]\nform = \"affine\"", "[model.mu]\nform = \"affine\"\np = 1.0");
        let err = Scenario::parse(&text).unwrap_err().to_string();
        assert!(err.contains("mu") && err.contains("p"), "{err}");
    }

    #[test]
    fn run_sections_default_per_key() {
        let text = DEFAULT.replace("nodes = 17", "nodes = 9");
        let s = Scenario::parse(&text).unwrap();
        assert_eq!(s.grid, GridConfig::cube(9));
        let s = Scenario::parse(&DEFAULT.replace("# y_lo = -2.5\n# y_hi = 1.5\n", "y_lo = -2.5\ny_hi = 1.5\n")).unwrap();
        assert_eq!(s.grid.y_bounds, Some((-2.5, 1.5)));
        assert!(Scenario::parse(&DEFAULT.replace("# y_lo = -2.5\n", "y_lo = -2.5\n")).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Scenario::parse(DEFAULT).unwrap();
        let b = Scenario::parse(&format!("{DEFAULT}\n# comment\n")).unwrap();
        assert_ne!(a.content_hash, b.content_hash);
        assert_eq!(hex_sha256(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
