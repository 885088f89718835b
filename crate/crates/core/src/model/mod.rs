//! Model coefficients of the controlled SIR-price system and its closed-form
//! evaluations: drifts, volatility, the two-mark jump model, costs, utility
//! and terminal payoffs.

pub mod forms;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use forms::{Coef, FormKind, Var, Vars};

/// Slack used when checking that an action lies in its control set.
const BOX_TOL: f64 = 1e-12;

/// Reduced state `(p, s, i)`; the recovered fraction is `1 - s - i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyberState {
    pub p: f64,
    pub s: f64,
    pub i: f64,
}

impl CyberState {
    pub fn new(p: f64, s: f64, i: f64) -> Result<Self> {
        let x = CyberState { p, s, i };
        x.check()?;
        Ok(x)
    }

    pub fn r(&self) -> f64 {
        1.0 - self.s - self.i
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.p.is_finite()
            && self.p > 0.0
            && self.s >= 0.0
            && self.i >= 0.0
            && self.s + self.i <= 1.0 + BOX_TOL;
        if ok {
            Ok(())
        } else {
            Err(Error::State(format!(
                "(p, s, i) = ({}, {}, {}) violates p > 0, s, i >= 0, s + i <= 1",
                self.p, self.s, self.i
            )))
        }
    }

    pub(crate) fn vars(&self, t: f64) -> Vars {
        Vars {
            t,
            p: self.p,
            s: self.s,
            i: self.i,
            a: 0.0,
            h: 0.0,
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo - BOX_TOL && v <= self.hi + BOX_TOL
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lo).min(self.hi)
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    /// `n` uniformly spaced points; a singleton interval yields one point.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        if n <= 1 || self.is_singleton() {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (n - 1) as f64;
        (0..n)
            .map(|k| if k == n - 1 { self.hi } else { self.lo + step * k as f64 })
            .collect()
    }
}

/// Agent utility `U_A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utility {
    /// `U(w) = w`.
    Identity,
    /// `U(w) = 1 - exp(-w)`.
    Exponential,
}

impl Utility {
    pub fn eval(self, w: f64) -> f64 {
        match self {
            Utility::Identity => w,
            Utility::Exponential => 1.0 - (-w).exp(),
        }
    }

    /// `U^{-1}(y)`, or `None` outside the range of `U`.
    pub fn inverse(self, y: f64) -> Option<f64> {
        match self {
            Utility::Identity => Some(y),
            Utility::Exponential => (y < 1.0).then(|| -(1.0 - y).ln()),
        }
    }

    /// Supremum of the range of `U`.
    pub fn range_sup(self) -> f64 {
        match self {
            Utility::Identity => f64::INFINITY,
            Utility::Exponential => 1.0,
        }
    }
}

/// How the jump sensitivity `u` enters the agent generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpScaling {
    /// The jump term is multiplied by the price `p`; a mark-k event moves the
    /// continuation value by `p * u_k`.
    AsWritten,
    /// No price factor; a mark-k event moves the continuation value by `u_k`.
    Unscaled,
}

impl JumpScaling {
    #[inline]
    pub fn factor(self, p: f64) -> f64 {
        match self {
            JumpScaling::AsWritten => p,
            JumpScaling::Unscaled => 1.0,
        }
    }
}

/// One jump mark: a mark event maps `p` to `p * (1 - loss)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mark {
    pub name: String,
    pub loss: f64,
    /// Intensity as a map of `(t, p, s, i, h)`.
    pub intensity: Coef,
}

/// Reference compensator intensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceIntensity {
    /// `lambda(i0, h_min)` at the initial state.
    Initial,
    Fixed(Vec<f64>),
}

/// Loss fractions and intensities of the marks at a state.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpModel {
    pub loss_fractions: Vec<f64>,
    pub intensities: Vec<f64>,
}

/// Scenario coefficients. Immutable once built and shared freely.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub rho: f64,
    /// `mu(t, i)`.
    pub mu: Coef,
    /// `sigma_price(t, i, h)`.
    pub sigma_price: Coef,
    /// `sigma_tilde(t, h)`.
    pub sigma_tilde: Coef,
    /// `k(t, x)`; the discount factor is `exp(int k)`.
    pub discount_k: Coef,
    /// `f(t, x, a)`.
    pub effort_cost: Coef,
    pub agent_jump_cost: Coef,
    pub principal_jump_cost: Coef,
    pub epsilon: f64,
    pub marks: Vec<Mark>,
    pub reference: ReferenceIntensity,
    pub a_set: Interval,
    pub h_set: Interval,
    pub utility: Utility,
    pub terminal_agent: Coef,
    pub terminal_principal: Coef,
    pub reservation: f64,
    pub horizon: f64,
    pub x0: CyberState,
    pub jump_scaling: JumpScaling,
    lambda0: Vec<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        let mut m = ModelParams {
            beta: 0.3,
            rho: 0.1,
            mu: Coef::affine(0.05, &[(Var::I, -0.2)]),
            sigma_price: Coef::affine(0.2, &[(Var::H, 0.1)]),
            sigma_tilde: Coef::affine(0.1, &[(Var::H, 0.1)]),
            discount_k: Coef::constant(-0.05),
            effort_cost: Coef::quadratic(0.0, &[], &[(Var::A, 0.5)]),
            agent_jump_cost: Coef::affine(0.0, &[(Var::I, 0.01)]),
            principal_jump_cost: Coef::affine(0.0, &[(Var::I, 0.01)]),
            epsilon: 1.0,
            marks: vec![
                Mark {
                    name: "external".into(),
                    loss: 0.1,
                    intensity: Coef::affine(0.0, &[(Var::H, 1.0)]),
                },
                Mark {
                    name: "internal".into(),
                    loss: 0.05,
                    intensity: Coef::affine(0.0, &[(Var::I, 1.0)]),
                },
            ],
            reference: ReferenceIntensity::Initial,
            a_set: Interval { lo: 0.0, hi: 2.0 },
            h_set: Interval { lo: 0.0, hi: 1.0 },
            utility: Utility::Identity,
            terminal_agent: Coef::affine(0.0, &[(Var::I, -1.0)]),
            terminal_principal: Coef::affine(0.0, &[(Var::P, 1.0), (Var::I, -1.0)]),
            reservation: -0.5,
            horizon: 1.0,
            x0: CyberState { p: 1.0, s: 0.5, i: 0.25 },
            jump_scaling: JumpScaling::AsWritten,
            lambda0: Vec::new(),
        };
        m.refresh();
        m
    }
}

impl ModelParams {
    /// Recompute derived quantities (the reference intensity) after editing
    /// public fields.
    pub fn refresh(&mut self) {
        self.lambda0 = match &self.reference {
            ReferenceIntensity::Initial => {
                let x0 = self.x0;
                let h0 = self.h_set.lo;
                (0..self.marks.len())
                    .map(|k| self.intensity_raw(k, 0.0, &x0, h0))
                    .collect()
            }
            ReferenceIntensity::Fixed(v) => v.clone(),
        };
    }

    /// Builder-style edit followed by [`ModelParams::refresh`].
    pub fn with(mut self, edit: impl FnOnce(&mut ModelParams)) -> Self {
        edit(&mut self);
        self.refresh();
        self
    }

    pub fn mark_count(&self) -> usize {
        self.marks.len()
    }

    /// Reference intensity vector `lambda^0`.
    pub fn lambda0(&self) -> &[f64] {
        &self.lambda0
    }

    pub fn check_a(&self, a: f64) -> Result<()> {
        if self.a_set.contains(a) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "agent action {a} outside A = [{}, {}]",
                self.a_set.lo, self.a_set.hi
            )))
        }
    }

    pub fn check_h(&self, h: f64) -> Result<()> {
        if self.h_set.contains(h) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "hacker action {h} outside H = [{}, {}]",
                self.h_set.lo, self.h_set.hi
            )))
        }
    }

    #[inline]
    pub fn mu_at(&self, t: f64, i: f64) -> f64 {
        self.mu.eval(&Vars { t, i, ..Default::default() })
    }

    #[inline]
    pub fn sigma_price_at(&self, t: f64, i: f64, h: f64) -> f64 {
        self.sigma_price.eval(&Vars { t, i, h, ..Default::default() })
    }

    #[inline]
    pub fn sigma_tilde_at(&self, t: f64, h: f64) -> f64 {
        self.sigma_tilde.eval(&Vars { t, h, ..Default::default() })
    }

    #[inline]
    pub fn k_at(&self, t: f64, x: &CyberState) -> f64 {
        self.discount_k.eval(&x.vars(t))
    }

    #[inline]
    pub fn effort_cost_at(&self, t: f64, x: &CyberState, a: f64) -> f64 {
        self.effort_cost.eval(&Vars { a, ..x.vars(t) })
    }

    #[inline]
    pub(crate) fn intensity_raw(&self, k: usize, t: f64, x: &CyberState, h: f64) -> f64 {
        self.marks[k].intensity.eval(&Vars { h, ..x.vars(t) }).max(0.0)
    }

    /// Continuous drift without domain checks.
    #[inline]
    pub fn drift_unchecked(&self, t: f64, x: &CyberState, a: f64, h: f64) -> [f64; 3] {
        let (p, s, i) = (x.p, x.s, x.i);
        let inf = self.beta * s * i;
        [
            self.mu_at(t, i) * p,
            -inf - a * s - h * s,
            inf - self.rho * i + h * s,
        ]
    }

    /// Continuous drift `(mu p, -beta s i - a s - h s, beta s i - rho i + h s)`.
    pub fn eval_drift_continuous(&self, t: f64, x: &CyberState, a: f64, h: f64) -> Result<[f64; 3]> {
        x.check()?;
        self.check_a(a)?;
        self.check_h(h)?;
        Ok(self.drift_unchecked(t, x, a, h))
    }

    /// Drift of the implied recovered fraction, `rho i + a s`.
    pub fn recovered_drift(&self, x: &CyberState, a: f64) -> f64 {
        self.rho * x.i + a * x.s
    }

    /// Volatility without domain checks.
    #[inline]
    pub fn volatility_unchecked(&self, t: f64, x: &CyberState, h: f64) -> [[f64; 2]; 3] {
        let g = self.sigma_tilde_at(t, h) * x.s * x.i;
        [
            [self.sigma_price_at(t, x.i, h) * x.p, 0.0],
            [0.0, -g],
            [0.0, g],
        ]
    }

    /// 3x2 volatility matrix; rows two and three are negatives of each other.
    pub fn eval_volatility(&self, t: f64, x: &CyberState, h: f64) -> Result<[[f64; 2]; 3]> {
        x.check()?;
        self.check_h(h)?;
        Ok(self.volatility_unchecked(t, x, h))
    }

    /// Loss fractions and intensities of every mark.
    pub fn eval_jump_model(&self, t: f64, x: &CyberState, h: f64) -> Result<JumpModel> {
        x.check()?;
        self.check_h(h)?;
        Ok(JumpModel {
            loss_fractions: self.marks.iter().map(|m| m.loss).collect(),
            intensities: (0..self.marks.len())
                .map(|k| self.intensity_raw(k, t, x, h))
                .collect(),
        })
    }

    /// State after a mark-k event: only the price moves.
    pub fn post_jump(&self, x: &CyberState, k: usize) -> CyberState {
        CyberState {
            p: x.p * (1.0 - self.marks[k].loss),
            ..*x
        }
    }

    #[inline]
    pub fn agent_cost_unchecked(&self, t: f64, x: &CyberState, a: f64) -> f64 {
        self.effort_cost_at(t, x, a) + self.agent_jump_cost.eval(&x.vars(t))
    }

    /// `C^A = f(t, x, a) + agent jump cost`.
    pub fn eval_agent_cost(&self, t: f64, x: &CyberState, a: f64) -> Result<f64> {
        x.check()?;
        self.check_a(a)?;
        Ok(self.agent_cost_unchecked(t, x, a))
    }

    #[inline]
    pub fn principal_cost_unchecked(&self, t: f64, x: &CyberState, h: f64) -> f64 {
        let v = self.sigma_tilde_at(t, h) * x.s * x.i;
        0.5 * self.epsilon * v * v + self.principal_jump_cost.eval(&x.vars(t))
    }

    /// `C^P = eps/2 (sigma_tilde s i)^2 + principal jump cost`.
    pub fn eval_principal_cost(&self, t: f64, x: &CyberState, h: f64) -> Result<f64> {
        x.check()?;
        self.check_h(h)?;
        Ok(self.principal_cost_unchecked(t, x, h))
    }

    pub fn terminal_agent_at(&self, x: &CyberState) -> f64 {
        self.terminal_agent.eval(&x.vars(self.horizon))
    }

    pub fn terminal_principal_at(&self, x: &CyberState) -> f64 {
        self.terminal_principal.eval(&x.vars(self.horizon))
    }

    /// `F^P(x) - U_A^{-1}(y - F^A(x))`.
    pub fn eval_principal_terminal(&self, x: &CyberState, y: f64) -> Result<f64> {
        let w = y - self.terminal_agent_at(x);
        let inv = self.utility.inverse(w).ok_or_else(|| {
            Error::Range(format!(
                "U_A^-1 undefined at y - F^A(x) = {w}; tighten the y-axis bounds"
            ))
        })?;
        Ok(self.terminal_principal_at(x) - inv)
    }

    /// Sampled checks of the structural assumptions: compact control sets,
    /// positive price volatility, finite coefficients, `f(t, x, 0) >= 0` and
    /// midpoint convexity of `f` in `a`.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.rho >= 0.0 && self.epsilon >= 0.0) {
            return Err(Error::Config("beta, rho and epsilon must be nonnegative".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.a_set.lo < 0.0 || self.h_set.lo < 0.0 {
            return Err(Error::Config("control sets must lie in the nonnegative half-line".into()));
        }
        for m in &self.marks {
            if !(0.0..1.0).contains(&m.loss) {
                return Err(Error::Config(format!("mark `{}`: loss fraction must lie in [0, 1)", m.name)));
            }
        }
        if self.lambda0.len() != self.marks.len() || self.lambda0.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Config("reference intensity must have one nonnegative entry per mark".into()));
        }
        self.x0.check()?;
        if self.effort_cost.square(Var::A) < 0.0 {
            return Err(Error::Config("effort cost must be convex in a".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..1000 {
            let t = rng.random::<f64>() * self.horizon;
            let s = rng.random::<f64>();
            let i = rng.random::<f64>() * (1.0 - s);
            let p = 0.1 + rng.random::<f64>() * 9.9;
            let x = CyberState { p, s, i };
            let h = self.h_set.lo + rng.random::<f64>() * (self.h_set.hi - self.h_set.lo);
            let a1 = self.a_set.lo + rng.random::<f64>() * (self.a_set.hi - self.a_set.lo);
            let a2 = self.a_set.lo + rng.random::<f64>() * (self.a_set.hi - self.a_set.lo);
            if !(self.sigma_price_at(t, i, h) > 0.0) {
                return Err(Error::Config(format!(
                    "sigma_price must be positive; got {} at (t, i, h) = ({t}, {i}, {h})",
                    self.sigma_price_at(t, i, h)
                )));
            }
            if self.effort_cost_at(t, &x, 0.0) < 0.0 {
                return Err(Error::Config("effort cost must be nonnegative at a = 0".into()));
            }
            let mid = self.effort_cost_at(t, &x, 0.5 * (a1 + a2));
            let avg = 0.5 * (self.effort_cost_at(t, &x, a1) + self.effort_cost_at(t, &x, a2));
            if mid > avg + 1e-12 * (1.0 + avg.abs()) {
                return Err(Error::Config("effort cost fails midpoint convexity".into()));
            }
            let d = self.drift_unchecked(t, &x, a1, h);
            let v = self.volatility_unchecked(t, &x, h);
            let finite = d.iter().all(|c| c.is_finite())
                && v.iter().flatten().all(|c| c.is_finite())
                && self.k_at(t, &x).is_finite()
                && self.principal_cost_unchecked(t, &x, h).is_finite()
                && (0..self.marks.len()).all(|k| self.intensity_raw(k, t, &x, h).is_finite());
            if !finite {
                return Err(Error::Config("non-finite coefficient on the sampled state box".into()));
            }
        }
        Ok(())
    }
}
