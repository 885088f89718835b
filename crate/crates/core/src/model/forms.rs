//! Registry of named functional forms for scenario coefficients.
//!
//! Every coefficient map of the model is a polynomial of degree at most two
//! in the variables `(t, p, s, i, a, h)` without cross terms. The form name
//! restricts which terms a scenario may set: `constant` allows only `const`,
//! `affine` adds one linear term per variable, `quadratic` adds squared terms
//! spelled `<var>2` (for example `a2`).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variable a coefficient map may depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    T,
    P,
    S,
    I,
    A,
    H,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::T, Var::P, Var::S, Var::I, Var::A, Var::H];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::P => "p",
            Var::S => "s",
            Var::I => "i",
            Var::A => "a",
            Var::H => "h",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Point at which a coefficient map is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vars {
    pub t: f64,
    pub p: f64,
    pub s: f64,
    pub i: f64,
    pub a: f64,
    pub h: f64,
}

impl Vars {
    fn get(&self, v: Var) -> f64 {
        match v {
            Var::T => self.t,
            Var::P => self.p,
            Var::S => self.s,
            Var::I => self.i,
            Var::A => self.a,
            Var::H => self.h,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    Constant,
    Affine,
    Quadratic,
}

impl FormKind {
    pub fn name(self) -> &'static str {
        match self {
            FormKind::Constant => "constant",
            FormKind::Affine => "affine",
            FormKind::Quadratic => "quadratic",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(FormKind::Constant),
            "affine" => Some(FormKind::Affine),
            "quadratic" => Some(FormKind::Quadratic),
            _ => None,
        }
    }
}

/// A coefficient map `c0 + sum_v lin_v * v + sum_v quad_v * v^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coef {
    kind: FormKind,
    c0: f64,
    lin: [f64; 6],
    quad: [f64; 6],
}

impl Coef {
    pub fn constant(c: f64) -> Self {
        Coef {
            kind: FormKind::Constant,
            c0: c,
            lin: [0.0; 6],
            quad: [0.0; 6],
        }
    }

    pub fn affine(c0: f64, terms: &[(Var, f64)]) -> Self {
        let mut lin = [0.0; 6];
        for &(v, c) in terms {
            lin[v.index()] += c;
        }
        Coef {
            kind: FormKind::Affine,
            c0,
            lin,
            quad: [0.0; 6],
        }
    }

    pub fn quadratic(c0: f64, linear: &[(Var, f64)], squares: &[(Var, f64)]) -> Self {
        let mut c = Coef::affine(c0, linear);
        c.kind = FormKind::Quadratic;
        for &(v, q) in squares {
            c.quad[v.index()] += q;
        }
        c
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    pub fn offset(&self) -> f64 {
        self.c0
    }

    pub fn linear(&self, v: Var) -> f64 {
        self.lin[v.index()]
    }

    pub fn square(&self, v: Var) -> f64 {
        self.quad[v.index()]
    }

    #[inline]
    pub fn eval(&self, x: &Vars) -> f64 {
        let vals = [x.t, x.p, x.s, x.i, x.a, x.h];
        let mut acc = self.c0;
        for k in 0..6 {
            acc += (self.lin[k] + self.quad[k] * vals[k]) * vals[k];
        }
        acc
    }

    /// Part of the map that depends on `v` alone, evaluated at `x`.
    pub fn eval_var_part(&self, v: Var, x: &Vars) -> f64 {
        let z = x.get(v);
        (self.lin[v.index()] + self.quad[v.index()] * z) * z
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.lin[v.index()] != 0.0 || self.quad[v.index()] != 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0.0 && Var::ALL.iter().all(|&v| !self.depends_on(v))
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.c0 *= c;
        for k in 0..6 {
            out.lin[k] *= c;
            out.quad[k] *= c;
        }
        out
    }

    /// Reject terms on variables outside `allowed`.
    pub fn check_vars(&self, slot: &str, allowed: &[Var]) -> Result<()> {
        let bad: Vec<&str> = Var::ALL
            .iter()
            .filter(|v| self.depends_on(**v) && !allowed.contains(v))
            .map(|v| v.name())
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "coefficient `{slot}` may not depend on: {}",
                bad.join(", ")
            )))
        }
    }

    /// Parse a scenario table such as `{ form = "affine", const = 0.05, i = -0.2 }`.
    pub fn from_table(slot: &str, table: &toml::Table, allowed: &[Var]) -> Result<Self> {
        let form = match table.get("form") {
            Some(toml::Value::String(s)) => FormKind::parse(s).ok_or_else(|| {
                Error::Config(format!(
                    "coefficient `{slot}`: unknown form `{s}` (expected constant, affine or quadratic)"
                ))
            })?,
            Some(_) => return Err(Error::Config(format!("coefficient `{slot}`: `form` must be a string"))),
            None => return Err(Error::Config(format!("coefficient `{slot}`: missing key `form`"))),
        };
        let mut c = Coef {
            kind: form,
            c0: 0.0,
            lin: [0.0; 6],
            quad: [0.0; 6],
        };
        let mut unknown = Vec::new();
        for (key, value) in table {
            if key == "form" {
                continue;
            }
            let num = match value {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(n) => *n as f64,
                _ => {
                    return Err(Error::Config(format!(
                        "coefficient `{slot}`: `{key}` must be a number"
                    )))
                }
            };
            if key == "const" {
                c.c0 = num;
                continue;
            }
            let (name, squared) = match key.strip_suffix('2') {
                Some(base) => (base, true),
                None => (key.as_str(), false),
            };
            let var = Var::ALL.iter().copied().find(|v| v.name() == name);
            match (var, squared, form) {
                (Some(v), false, FormKind::Affine | FormKind::Quadratic) if allowed.contains(&v) => {
                    c.lin[v.index()] = num
                }
                (Some(v), true, FormKind::Quadratic) if allowed.contains(&v) => c.quad[v.index()] = num,
                _ => unknown.push(key.clone()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "coefficient `{slot}` ({} form): unknown keys: {}",
                form.name(),
                unknown.join(", ")
            )));
        }
        Ok(c)
    }

    /// Inverse of [`Coef::from_table`], with keys in a fixed order.
    pub fn to_table(&self) -> BTreeMap<String, toml::Value> {
        let mut out = BTreeMap::new();
        out.insert("form".to_string(), toml::Value::String(self.kind.name().into()));
        out.insert("const".to_string(), toml::Value::Float(self.c0));
        for v in Var::ALL {
            if self.lin[v.index()] != 0.0 {
                out.insert(v.name().to_string(), toml::Value::Float(self.lin[v.index()]));
            }
            if self.quad[v.index()] != 0.0 {
                out.insert(format!("{}2", v.name()), toml::Value::Float(self.quad[v.index()]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(src: &str) -> toml::Table {
        src.parse::<toml::Table>().unwrap()
    }

    #[test]
    fn affine_eval() {
        let c = Coef::affine(0.05, &[(Var::I, -0.2)]);
        let x = Vars { i: 0.3, ..Default::default() };
        assert!((c.eval(&x) - (0.05 - 0.06)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_parse_roundtrip() {
        let t = table("form = \"quadratic\"\nconst = 0.0\na2 = 0.5\n");
        let c = Coef::from_table("effort", &t, &[Var::A]).unwrap();
        assert_eq!(c.square(Var::A), 0.5);
        let back: toml::Table = c.to_table().into_iter().collect();
        assert_eq!(Coef::from_table("effort", &back, &[Var::A]).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_and_disallowed_keys() {
        let t = table("form = \"affine\"\nconst = 1.0\nq = 2.0\nh = 1.0\n");
        let err = Coef::from_table("mu", &t, &[Var::T, Var::I]).unwrap_err().to_string();
        assert!(err.contains("q") && err.contains("h"), "{err}");
        let t = table("form = \"affine\"\na2 = 1.0\n");
        assert!(Coef::from_table("f", &t, &[Var::A]).is_err());
        let t = table("form = \"constant\"\ni = 1.0\n");
        assert!(Coef::from_table("k", &t, &[Var::I]).is_err());
    }
}
