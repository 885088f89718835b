//! Forward Monte Carlo of the controlled SIR-price system with marked jumps.
//!
//! Each step is an Euler-Maruyama update of `(p, s, i)` driven by a 2-D
//! Gaussian increment, followed by first-order thinning of every mark: a
//! mark-k event in `(t, t + dt]` fires with probability `1 - exp(-lambda_k dt)`
//! and maps `p` to `p (1 - c_k)`. Path `n` draws from its own ChaCha stream
//! `(seed, n)`, so results do not depend on the thread count or on how many
//! other paths are simulated.

pub mod export;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CyberState, ModelParams};
use crate::stats::mean_se;

/// Price floor applied after each step.
pub const PRICE_FLOOR: f64 = 1e-8;
/// Singular values of `sigma` below this are treated as zero.
pub const SINGULAR_FLOOR: f64 = 1e-10;

/// Feedback policy `(t, x) -> action`.
pub type Policy<'a> = &'a (dyn Fn(f64, &CyberState) -> f64 + Sync);

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Largest tolerated fraction of steps that trigger the simplex projection.
    pub max_projection_fraction: f64,
    /// Record the agent policy without applying it to the drift, so paths
    /// follow the zero-effort reference dynamics.
    pub reference_drift: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 1000,
            dt: 1.0 / 256.0,
            horizon: 1.0,
            seed: 0,
            max_projection_fraction: 0.01,
            reference_drift: false,
        }
    }
}

impl SimConfig {
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::Config("horizon must be positive".into()));
        }
        let n = (self.horizon / self.dt).round();
        if (n * self.dt - self.horizon).abs() > 1e-9 * self.horizon || n < 1.0 {
            return Err(Error::Config(format!(
                "horizon {} is not an integer multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        Ok(n as usize)
    }
}

/// A mark event on a path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    /// End of the step in which the event fired.
    pub time: f64,
    pub step: usize,
    pub mark: usize,
}

/// Simulated paths with their noise, controls, jump events and weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SimBatch {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Per path, `n_steps + 1` states.
    pub states: Vec<Vec<CyberState>>,
    /// Per path and step, `(a, h)`.
    pub controls: Vec<Vec<[f64; 2]>>,
    /// Per path and step, the Brownian increment.
    pub dw: Vec<Vec<[f64; 2]>>,
    pub jump_log: Vec<Vec<JumpEvent>>,
    /// Doleans-Dade exponential at the horizon of the recorded effort.
    pub dd_weight: Vec<f64>,
    /// `int K_{0,s} C^A ds` per path.
    pub agent_cost: Vec<f64>,
    /// `int C^P ds` per path.
    pub principal_cost: Vec<f64>,
    /// `K_{0,T}` per path.
    pub discount: Vec<f64>,
    /// Terminal continuation value, when a contract was simulated.
    pub y_terminal: Option<Vec<f64>>,
    pub seed: u64,
    pub projections: usize,
    pub price_floor_hits: usize,
}

impl SimBatch {
    /// Check the stored-state, weight and jump-log invariants.
    pub fn check_invariants(&self) -> Result<()> {
        for (n, path) in self.states.iter().enumerate() {
            for x in path {
                x.check().map_err(|e| Error::Numerical(format!("path {n}: {e}")))?;
            }
        }
        if let Some(n) = self.dd_weight.iter().position(|w| !(*w > 0.0)) {
            return Err(Error::Numerical(format!("path {n}: non-positive Doleans-Dade weight")));
        }
        for (n, log) in self.jump_log.iter().enumerate() {
            for w in log.windows(2) {
                let ordered = w[0].time < w[1].time || (w[0].step == w[1].step && w[0].mark < w[1].mark);
                if !ordered {
                    return Err(Error::Numerical(format!("path {n}: jump log out of order")));
                }
            }
        }
        Ok(())
    }

    pub fn jump_counts(&self, mark: usize) -> Vec<f64> {
        self.jump_log
            .iter()
            .map(|log| log.iter().filter(|e| e.mark == mark).count() as f64)
            .collect()
    }

    pub fn terminal_states(&self) -> Vec<CyberState> {
        self.states.iter().map(|p| *p.last().expect("nonempty path")).collect()
    }
}

/// Random inputs of one step.
#[derive(Clone, Copy, Debug)]
pub struct StepNoise {
    pub dw: [f64; 2],
    uniforms: [f64; MAX_MARKS],
}

/// Upper bound on the number of marks.
pub const MAX_MARKS: usize = 16;

/// Per-path random stream.
pub struct PathRng {
    rng: ChaCha8Rng,
    marks: usize,
    sqrt_dt: f64,
}

impl PathRng {
    pub fn new(seed: u64, path: usize, marks: usize, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        PathRng {
            rng,
            marks,
            sqrt_dt: dt.sqrt(),
        }
    }

    /// Two normals then one uniform per mark, drawn whatever the intensities.
    pub fn draw(&mut self) -> StepNoise {
        let z0: f64 = StandardNormal.sample(&mut self.rng);
        let z1: f64 = StandardNormal.sample(&mut self.rng);
        let mut uniforms = [0.0; MAX_MARKS];
        for u in uniforms.iter_mut().take(self.marks) {
            *u = rand::Rng::random::<f64>(&mut self.rng);
        }
        StepNoise {
            dw: [z0 * self.sqrt_dt, z1 * self.sqrt_dt],
            uniforms,
        }
    }
}

/// Outcome of one Euler step.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub x: CyberState,
    /// Continuous increment `b^c dt + sigma dW` evaluated at the step start.
    pub dxc: [f64; 3],
    /// Bit k set when mark k fired.
    pub fired: u32,
    pub projected: bool,
    pub floor_hit: bool,
}

/// One Euler-Maruyama step with per-mark thinning and simplex projection.
pub fn advance(
    params: &ModelParams,
    t: f64,
    x: &CyberState,
    a_drift: f64,
    h: f64,
    dt: f64,
    noise: &StepNoise,
) -> StepOutcome {
    let b = params.drift_unchecked(t, x, a_drift, h);
    let sig = params.volatility_unchecked(t, x, h);
    let dxc = [
        b[0] * dt + sig[0][0] * noise.dw[0],
        b[1] * dt + sig[1][1] * noise.dw[1],
        b[2] * dt + sig[2][1] * noise.dw[1],
    ];
    let mut p = x.p + dxc[0];
    let mut s = x.s + dxc[1];
    let mut i = x.i + dxc[2];
    let mut fired = 0u32;
    for k in 0..params.mark_count() {
        let lam = params.intensity_raw(k, t, x, h);
        if lam > 0.0 && noise.uniforms[k] < -(-lam * dt).exp_m1() {
            fired |= 1 << k;
            p *= 1.0 - params.marks[k].loss;
        }
    }
    let mut projected = false;
    if s < 0.0 {
        s = 0.0;
        projected = true;
    }
    if i < 0.0 {
        i = 0.0;
        projected = true;
    }
    if s + i > 1.0 {
        let tot = s + i;
        s /= tot;
        i /= tot;
        projected = true;
    }
    let mut floor_hit = false;
    if !(p >= PRICE_FLOOR) {
        p = PRICE_FLOOR;
        floor_hit = true;
    }
    StepOutcome {
        x: CyberState { p, s, i },
        dxc,
        fired,
        projected,
        floor_hit,
    }
}

/// `theta = sigma^+ beta` for the effort drift `beta = (0, -a s, 0)`, with
/// singular values below [`SINGULAR_FLOOR`] dropped. The flag reports whether
/// a nonzero drift component was lost to the floor.
pub fn girsanov_integrand(params: &ModelParams, t: f64, x: &CyberState, a: f64, h: f64) -> ([f64; 2], bool) {
    let beta_s = -a * x.s;
    if beta_s == 0.0 {
        return ([0.0, 0.0], false);
    }
    let g = params.sigma_tilde_at(t, h) * x.s * x.i;
    if std::f64::consts::SQRT_2 * g.abs() < SINGULAR_FLOOR {
        return ([0.0, 0.0], true);
    }
    // sigma = [[sp, 0], [0, -g], [0, g]]; sigma^T sigma = diag(sp^2, 2 g^2).
    ([0.0, -g * beta_s / (2.0 * g * g)], false)
}

/// Log-increment of the stochastic exponential over one step.
#[inline]
pub fn dd_log_increment(params: &ModelParams, t: f64, x: &CyberState, a: f64, h: f64, dw: &[f64; 2], dt: f64) -> (f64, bool) {
    let (th, lost) = girsanov_integrand(params, t, x, a, h);
    (th[0] * dw[0] + th[1] * dw[1] - 0.5 * (th[0] * th[0] + th[1] * th[1]) * dt, lost)
}

/// `(exp(z) - 1) / z`, equal to 1 at 0.
#[inline]
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

struct PathOut {
    states: Vec<CyberState>,
    controls: Vec<[f64; 2]>,
    dw: Vec<[f64; 2]>,
    jumps: Vec<JumpEvent>,
    log_dd: f64,
    agent_cost: f64,
    principal_cost: f64,
    discount: f64,
    projections: usize,
    floor_hits: usize,
}

fn check_action(params: &ModelParams, a: f64, h: f64) -> Result<()> {
    params.check_a(a)?;
    params.check_h(h)
}

/// Simulate `n_paths` paths under feedback policies.
pub fn simulate_paths(
    params: &ModelParams,
    agent_policy: Policy<'_>,
    hacker_policy: Policy<'_>,
    x0: CyberState,
    config: &SimConfig,
) -> Result<SimBatch> {
    let n_steps = config.n_steps()?;
    if config.n_paths == 0 {
        return Err(Error::Config("number of paths must be positive".into()));
    }
    if params.mark_count() > MAX_MARKS {
        return Err(Error::Config(format!("at most {MAX_MARKS} marks are supported")));
    }
    x0.check()?;
    let dt = config.dt;
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    let paths: Vec<PathOut> = (0..config.n_paths)
        .into_par_iter()
        .map(|n| {
            let mut rng = PathRng::new(config.seed, n, params.mark_count(), dt);
            let mut x = x0;
            let mut out = PathOut {
                states: Vec::with_capacity(n_steps + 1),
                controls: Vec::with_capacity(n_steps),
                dw: Vec::with_capacity(n_steps),
                jumps: Vec::new(),
                log_dd: 0.0,
                agent_cost: 0.0,
                principal_cost: 0.0,
                discount: 1.0,
                projections: 0,
                floor_hits: 0,
            };
            out.states.push(x);
            for step in 0..n_steps {
                let t = times[step];
                let a = agent_policy(t, &x);
                let h = hacker_policy(t, &x);
                check_action(params, a, h)?;
                let noise = rng.draw();
                out.log_dd += dd_log_increment(params, t, &x, a, h, &noise.dw, dt).0;
                let k = params.k_at(t, &x);
                out.agent_cost += out.discount * params.agent_cost_unchecked(t, &x, a) * phi1(k * dt) * dt;
                out.principal_cost += params.principal_cost_unchecked(t, &x, h) * dt;
                out.discount *= (k * dt).exp();
                let a_drift = if config.reference_drift { 0.0 } else { a };
                let o = advance(params, t, &x, a_drift, h, dt, &noise);
                for mark in 0..params.mark_count() {
                    if o.fired & (1 << mark) != 0 {
                        out.jumps.push(JumpEvent {
                            time: times[step + 1],
                            step,
                            mark,
                        });
                    }
                }
                out.projections += o.projected as usize;
                out.floor_hits += o.floor_hit as usize;
                x = o.x;
                out.states.push(x);
                out.controls.push([a, h]);
                out.dw.push(noise.dw);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let projections: usize = paths.iter().map(|p| p.projections).sum();
    let total = (config.n_paths * n_steps) as f64;
    if projections as f64 > config.max_projection_fraction * total {
        return Err(Error::Numerical(format!(
            "simplex projection triggered on {projections} of {total} steps"
        )));
    }
    let mut batch = SimBatch {
        n_paths: config.n_paths,
        n_steps,
        dt,
        times,
        states: Vec::with_capacity(config.n_paths),
        controls: Vec::with_capacity(config.n_paths),
        dw: Vec::with_capacity(config.n_paths),
        jump_log: Vec::with_capacity(config.n_paths),
        dd_weight: Vec::with_capacity(config.n_paths),
        agent_cost: Vec::with_capacity(config.n_paths),
        principal_cost: Vec::with_capacity(config.n_paths),
        discount: Vec::with_capacity(config.n_paths),
        y_terminal: None,
        seed: config.seed,
        projections,
        price_floor_hits: paths.iter().map(|p| p.floor_hits).sum(),
    };
    for p in paths {
        batch.states.push(p.states);
        batch.controls.push(p.controls);
        batch.dw.push(p.dw);
        batch.jump_log.push(p.jumps);
        batch.dd_weight.push(p.log_dd.exp());
        batch.agent_cost.push(p.agent_cost);
        batch.principal_cost.push(p.principal_cost);
        batch.discount.push(p.discount);
    }
    Ok(batch)
}

/// Doleans-Dade exponential of `int theta . dW` for the recorded effort,
/// recomputed from the stored states, controls and Brownian increments.
/// Fails if a visited state has singular diffusion under nonzero effort.
pub fn doleans_exponential(batch: &SimBatch, params: &ModelParams) -> Result<Vec<f64>> {
    batch
        .states
        .iter()
        .zip(&batch.controls)
        .zip(&batch.dw)
        .map(|((states, controls), dw)| {
            let mut log = 0.0;
            for step in 0..batch.n_steps {
                let [a, h] = controls[step];
                let x = &states[step];
                let (inc, lost) = dd_log_increment(params, batch.times[step], x, a, h, &dw[step], batch.dt);
                if lost {
                    return Err(Error::Singular(format!(
                        "sigma sigma^T singular at (p, s, i) = ({}, {}, {}) under nonzero effort",
                        x.p, x.s, x.i
                    )));
                }
                log += inc;
            }
            Ok(log.exp())
        })
        .collect()
}

/// Mean and standard error of `K_{0,T} (U_A(xi) + F^A(X_T)) - int K C^A`.
pub fn estimate_agent_value(batch: &SimBatch, params: &ModelParams, compensation: &[f64]) -> Result<(f64, f64)> {
    if compensation.len() != batch.n_paths {
        return Err(Error::Config(format!(
            "{} compensations for {} paths",
            compensation.len(),
            batch.n_paths
        )));
    }
    let vals: Vec<f64> = (0..batch.n_paths)
        .map(|n| {
            let xt = batch.states[n].last().expect("nonempty path");
            batch.discount[n] * (params.utility.eval(compensation[n]) + params.terminal_agent_at(xt))
                - batch.agent_cost[n]
        })
        .collect();
    Ok(mean_se(&vals))
}

/// Mean and standard error of `F^P(X_T) - U_A^{-1}(Y_T - F^A(X_T)) - int C^P`.
pub fn estimate_principal_value(batch: &SimBatch, params: &ModelParams) -> Result<(f64, f64)> {
    let y = batch
        .y_terminal
        .as_ref()
        .ok_or_else(|| Error::Config("batch carries no continuation-value paths".into()))?;
    let vals = (0..batch.n_paths)
        .map(|n| {
            let xt = batch.states[n].last().expect("nonempty path");
            Ok(params.eval_principal_terminal(xt, y[n])? - batch.principal_cost[n])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_se(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coef;

    fn cfg(n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_paths: n,
            dt: 1.0 / 64.0,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn rejects_bad_step() {
        let m = ModelParams::default();
        let c = SimConfig { dt: 0.0, ..cfg(2, 0) };
        assert!(matches!(simulate_paths(&m, &|_, _| 0.0, &|_, _| 0.0, m.x0, &c), Err(Error::Config(_))));
        let c = SimConfig { dt: 0.3, ..cfg(2, 0) };
        assert!(simulate_paths(&m, &|_, _| 0.0, &|_, _| 0.0, m.x0, &c).is_err());
    }

    #[test]
    fn same_seed_same_batch() {
        let m = ModelParams::default();
        let a = simulate_paths(&m, &|_, x| 0.5 * x.i, &|_, _| 0.3, m.x0, &cfg(20, 9)).unwrap();
        let b = simulate_paths(&m, &|_, x| 0.5 * x.i, &|_, _| 0.3, m.x0, &cfg(20, 9)).unwrap();
        assert_eq!(a, b);
        a.check_invariants().unwrap();
        assert_eq!(doleans_exponential(&a, &m).unwrap(), a.dd_weight);
    }

    #[test]
    fn paths_do_not_depend_on_batch_size() {
        let m = ModelParams::default();
        let a = simulate_paths(&m, &|_, _| 0.2, &|_, _| 0.3, m.x0, &cfg(5, 4)).unwrap();
        let b = simulate_paths(&m, &|_, _| 0.2, &|_, _| 0.3, m.x0, &cfg(12, 4)).unwrap();
        assert_eq!(a.states[..], b.states[..5]);
    }

    #[test]
    fn disease_free_paths_stay_disease_free() {
        let m = ModelParams::default();
        let x0 = CyberState::new(1.0, 0.8, 0.0).unwrap();
        let b = simulate_paths(&m, &|_, _| 0.3, &|_, _| 0.0, x0, &cfg(10, 1)).unwrap();
        for path in &b.states {
            for (k, x) in path.iter().enumerate() {
                assert_eq!(x.i, 0.0);
                let t = k as f64 / 64.0;
                assert!((x.s - 0.8 * (1.0f64 - 0.3 / 64.0).powi(k as i32)).abs() < 1e-12, "{t}");
            }
        }
        assert!(b.jump_counts(1).iter().all(|c| *c == 0.0));
        assert!(b.jump_counts(0).iter().all(|c| *c == 0.0));
    }

    #[test]
    fn zero_losses_match_zero_intensities() {
        let m0 = ModelParams::default().with(|m| {
            for mk in &mut m.marks {
                mk.loss = 0.0;
            }
        });
        let m1 = ModelParams::default().with(|m| {
            for mk in &mut m.marks {
                mk.intensity = Coef::constant(0.0);
            }
        });
        let a = simulate_paths(&m0, &|_, _| 0.1, &|_, _| 0.5, m0.x0, &cfg(8, 2)).unwrap();
        let b = simulate_paths(&m1, &|_, _| 0.1, &|_, _| 0.5, m1.x0, &cfg(8, 2)).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn zero_effort_has_unit_weights() {
        let m = ModelParams::default();
        let b = simulate_paths(&m, &|_, _| 0.0, &|_, _| 0.4, m.x0, &cfg(10, 3)).unwrap();
        assert!(b.dd_weight.iter().all(|w| *w == 1.0));
    }

    #[test]
    fn agent_value_closed_forms() {
        let m = ModelParams::default().with(|m| {
            m.discount_k = Coef::constant(0.0);
            m.effort_cost = Coef::constant(0.0);
            m.agent_jump_cost = Coef::constant(0.0);
            m.terminal_agent = Coef::constant(0.0);
        });
        let b = simulate_paths(&m, &|_, _| 0.0, &|_, _| 0.2, m.x0, &cfg(16, 5)).unwrap();
        let (mean, se) = estimate_agent_value(&b, &m, &[0.7; 16]).unwrap();
        assert!((mean - 0.7).abs() < 1e-14 && se < 1e-15);

        let m = m.with(|m| {
            m.discount_k = Coef::constant(-0.05);
            m.agent_jump_cost = Coef::constant(1.0);
        });
        let b = simulate_paths(&m, &|_, _| 0.0, &|_, _| 0.2, m.x0, &cfg(16, 5)).unwrap();
        let (mean, _) = estimate_agent_value(&b, &m, &[0.0; 16]).unwrap();
        let exact = -(1.0 - (-0.05f64).exp()) / 0.05;
        assert!((mean - exact).abs() < 1e-12, "{mean} vs {exact}");
    }

    #[test]
    fn principal_value_of_constant_transfer() {
        let m = ModelParams::default().with(|m| {
            m.terminal_agent = Coef::constant(0.0);
            m.principal_jump_cost = Coef::constant(0.0);
            m.epsilon = 0.0;
        });
        let mut b = simulate_paths(&m, &|_, _| 0.0, &|_, _| 0.2, m.x0, &cfg(32, 6)).unwrap();
        assert!(estimate_principal_value(&b, &m).is_err());
        b.y_terminal = Some(vec![0.3; 32]);
        let (v, _) = estimate_principal_value(&b, &m).unwrap();
        let fp: f64 = b.terminal_states().iter().map(|x| m.terminal_principal_at(x)).sum::<f64>() / 32.0;
        assert!((v - (fp - 0.3)).abs() < 1e-12);
        b.y_terminal = Some(vec![0.3 + 0.25; 32]);
        let (v2, _) = estimate_principal_value(&b, &m).unwrap();
        assert!((v - v2 - 0.25).abs() < 1e-12);
    }
}
