//! Executable contracts from a solved policy field, forward simulation of the
//! agent's continuation value, incentive-compatibility checks and the
//! reservation search.
//!
//! The continuation value evolves as
//!
//! ```text
//! dY = [Tr(sigma sigma^T(h) gamma) / 2 - G_hat(gamma) - sum_k J_k lambda0_k] dt
//!      + z . dX^c + sum_k J_k dN_k,        J_k = scale(p) u_k
//! dK = [sup_a G(a, h) + Tr(sigma sigma^T(h) gamma) / 2 - G_hat(gamma)] dt
//! ```
//!
//! with `dX^c` the continuous part of the state increment under the actions
//! actually played. The linear part `-k Y + C^A(a_hat)` of the drift is
//! stepped exponentially, matching the compounded discount of the agent
//! criterion. The terminal transfer is `xi = U_A^{-1}(Y_T - F^A(X_T))`
//! and is never drawn separately.

pub mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{best_response_alpha, eval_g_hat, g_star_slice, sigma_sigma_t, CoState, Sym3};
use crate::hjbi::{Hjbi, PolicyField, Solution};
use crate::model::{CyberState, ModelParams};
use crate::simulate::{advance, phi1, JumpEvent, PathRng, SimBatch, SimConfig};
use crate::stats::{combined_se, mean_se};

pub use report::{DeviationResult, IcReport};

/// Contract controls at one `(t, x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractControls {
    pub z: [f64; 3],
    pub u: Vec<f64>,
    pub gamma: Sym3,
    /// Worst-case hacker action, on the solver's `h` grid.
    pub h: f64,
    /// Recommended effort, the best response to `z`.
    pub a: f64,
    /// `(x, y)` was outside the grid box and got clamped.
    pub clamped: bool,
}

/// Feedback contract `(Y0, z, u, gamma)` with the frozen hacker field.
#[derive(Clone, Copy, Debug)]
pub struct ContractPolicy<'a> {
    pub y0: f64,
    pub solver: &'a Hjbi,
    pub policy: &'a PolicyField,
}

impl<'a> ContractPolicy<'a> {
    pub fn new(solver: &'a Hjbi, solution: &'a Solution, y0: f64) -> Result<Self> {
        let y = &solver.grid.y;
        if !y0.is_finite() {
            return Err(Error::Config("initial certified value must be finite".into()));
        }
        if y0 < y[0] - 1e-12 || y0 > y[y.len() - 1] + 1e-12 {
            return Err(Error::Config(format!(
                "initial certified value {y0} outside the solved y range [{}, {}]",
                y[0],
                y[y.len() - 1]
            )));
        }
        Ok(ContractPolicy {
            y0,
            solver,
            policy: &solution.policy,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.solver.params
    }

    /// Interpolated feedbacks; `h` snaps to the nearest point of the `h` grid.
    pub fn controls(&self, t: f64, x: &CyberState, y: f64) -> ContractControls {
        let g = &self.solver.grid;
        let n = g.slice_at(t);
        let cp = self.policy.interpolate(g, n, x, y);
        let hg = &self.solver.h_grid;
        let mut h = hg[0];
        for &v in hg {
            if (v - cp.h).abs() < (h - cp.h).abs() {
                h = v;
            }
        }
        let inside = |axis: &[f64], v: f64| v >= axis[0] - 1e-12 && v <= axis[axis.len() - 1] + 1e-12;
        let clamped = !(inside(&g.p, x.p) && inside(&g.s, x.s) && inside(&g.i, x.i) && inside(&g.y, y));
        ContractControls {
            a: best_response_alpha(self.params(), t, x, &cp.z),
            z: cp.z,
            u: cp.u,
            gamma: cp.gamma,
            h,
            clamped,
        }
    }

    /// Increment of `Y` and of `K` over one step started at `(t, x, y)`.
    /// `dxc` is the continuous state increment, `fired` the mark bitmask.
    pub fn y_step(&self, t: f64, x: &CyberState, y: f64, cc: &ContractControls, h: f64, dt: f64, dxc: &[f64; 3], fired: u32) -> (f64, f64) {
        let params = self.params();
        let cs = CoState {
            y,
            z: cc.z,
            u: cc.u.clone(),
        };
        let (g_hat, _) = eval_g_hat(params, t, x, &cs, &cc.gamma, &self.solver.h_grid);
        let tr = 0.5 * cc.gamma.trace_with(&sigma_sigma_t(params, t, x, h));
        let scale = params.jump_scaling.factor(x.p);
        let lam0 = params.lambda0();
        let mut comp = 0.0;
        let mut jumps = 0.0;
        for (k, u) in cc.u.iter().enumerate() {
            comp += scale * u * lam0[k];
            if fired & (1 << k) != 0 {
                jumps += scale * u;
            }
        }
        let k = params.k_at(t, x);
        let ca = params.agent_cost_unchecked(t, x, cc.a);
        let expo = (-k * dt).exp_m1() + k * dt;
        let dy = (tr - g_hat - comp) * dt
            + expo * y
            + ca * (phi1(-k * dt) - 1.0) * dt
            + cc.z[0] * dxc[0]
            + cc.z[1] * dxc[1]
            + cc.z[2] * dxc[2]
            + jumps;
        let dk = (g_star_slice(params, t, x, &cs, h) + tr - g_hat) * dt;
        (dy, dk)
    }
}

/// Agent strategy used in a replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deviation {
    /// The recommended effort `a_hat`.
    Recommended,
    Constant { a: f64 },
    /// `factor * a_hat`, clamped to `A`.
    Scaled { factor: f64 },
    /// `high` before `switch` and `low` after.
    BangBang { high: f64, low: f64, switch: f64 },
}

impl Deviation {
    pub fn name(&self) -> String {
        match self {
            Deviation::Recommended => "a_hat".into(),
            Deviation::Constant { a } => format!("constant_{a}"),
            Deviation::Scaled { factor } => format!("scaled_{factor}"),
            Deviation::BangBang { high, low, switch } => format!("bang_bang_{high}_{low}_at_{switch}"),
        }
    }

    pub fn action(&self, params: &ModelParams, t: f64, a_hat: f64) -> f64 {
        let a = match *self {
            Deviation::Recommended => a_hat,
            Deviation::Constant { a } => a,
            Deviation::Scaled { factor } => factor * a_hat,
            Deviation::BangBang { high, low, switch } => {
                if t < switch {
                    high
                } else {
                    low
                }
            }
        };
        params.a_set.clamp(a)
    }

    /// Default library: `a_hat`, constant efforts at the ends and midpoint of
    /// `A`, `0.5 a_hat`, `1.5 a_hat` and full effort for the first half of
    /// the horizon.
    pub fn library(params: &ModelParams) -> Vec<Deviation> {
        let (lo, hi) = (params.a_set.lo, params.a_set.hi);
        vec![
            Deviation::Recommended,
            Deviation::Constant { a: lo },
            Deviation::Constant { a: 0.5 * (lo + hi) },
            Deviation::Constant { a: hi },
            Deviation::Scaled { factor: 0.5 },
            Deviation::Scaled { factor: 1.5 },
            Deviation::BangBang {
                high: hi,
                low: lo,
                switch: 0.5 * params.horizon,
            },
        ]
    }
}

/// Per-path outcome of a replay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathOutcome {
    /// `K_T (U_A(xi) + F^A(X_T)) - int K C^A`, with `U_A(xi) = Y_T - F^A(X_T)`.
    pub agent_value: f64,
    /// `F^P(X_T) - xi - int C^P`.
    pub principal_value: f64,
    pub y_terminal: f64,
    pub k_total: f64,
    pub k_min_increment: f64,
}

#[derive(Clone, Debug)]
pub struct Replay {
    pub outcomes: Vec<PathOutcome>,
    /// Full paths when recording was requested.
    pub batch: Option<SimBatch>,
    pub y_paths: Option<Vec<Vec<f64>>>,
    pub clamped_steps: usize,
    pub projections: usize,
}

impl Replay {
    pub fn agent_value(&self) -> (f64, f64) {
        mean_se(&self.outcomes.iter().map(|o| o.agent_value).collect::<Vec<_>>())
    }

    pub fn principal_value(&self) -> (f64, f64) {
        mean_se(&self.outcomes.iter().map(|o| o.principal_value).collect::<Vec<_>>())
    }

    pub fn mean_k(&self) -> (f64, f64) {
        mean_se(&self.outcomes.iter().map(|o| o.k_total).collect::<Vec<_>>())
    }

    pub fn min_k_increment(&self) -> f64 {
        self.outcomes.iter().map(|o| o.k_min_increment).fold(f64::INFINITY, f64::min)
    }
}

struct PathRecord {
    outcome: PathOutcome,
    states: Vec<CyberState>,
    controls: Vec<[f64; 2]>,
    dw: Vec<[f64; 2]>,
    jumps: Vec<JumpEvent>,
    ys: Vec<f64>,
    dd_log: f64,
    agent_cost: f64,
    principal_cost: f64,
    discount: f64,
    clamped: usize,
    projections: usize,
    floor_hits: usize,
}

/// Joint simulation of the state and of `Y` under the contract, with the
/// agent playing `deviation` and the hacker the frozen worst-case field.
/// Path `n` uses the same random stream as [`crate::simulate::simulate_paths`].
pub fn replay(contract: &ContractPolicy<'_>, deviation: &Deviation, config: &SimConfig, record: bool) -> Result<Replay> {
    let params = contract.params();
    let n_steps = config.n_steps()?;
    if config.n_paths == 0 {
        return Err(Error::Config("number of paths must be positive".into()));
    }
    if (config.horizon - params.horizon).abs() > 1e-12 {
        return Err(Error::Config("replay horizon differs from the model horizon".into()));
    }
    let dt = config.dt;
    let x0 = params.x0;
    let recs: Vec<PathRecord> = (0..config.n_paths)
        .into_par_iter()
        .map(|n| {
            let mut rng = PathRng::new(config.seed, n, params.mark_count(), dt);
            let (mut x, mut y) = (x0, contract.y0);
            let mut r = PathRecord {
                outcome: PathOutcome {
                    agent_value: 0.0,
                    principal_value: 0.0,
                    y_terminal: 0.0,
                    k_total: 0.0,
                    k_min_increment: f64::INFINITY,
                },
                states: Vec::new(),
                controls: Vec::new(),
                dw: Vec::new(),
                jumps: Vec::new(),
                ys: Vec::new(),
                dd_log: 0.0,
                agent_cost: 0.0,
                principal_cost: 0.0,
                discount: 1.0,
                clamped: 0,
                projections: 0,
                floor_hits: 0,
            };
            if record {
                r.states.push(x);
                r.ys.push(y);
            }
            for step in 0..n_steps {
                let t = step as f64 * dt;
                let cc = contract.controls(t, &x, y);
                let a = deviation.action(params, t, cc.a);
                let h = cc.h;
                let noise = rng.draw();
                let o = advance(params, t, &x, a, h, dt, &noise);
                let (dy, dk) = contract.y_step(t, &x, y, &cc, h, dt, &o.dxc, o.fired);
                let k = params.k_at(t, &x);
                r.agent_cost += r.discount * params.agent_cost_unchecked(t, &x, a) * phi1(k * dt) * dt;
                r.principal_cost += params.principal_cost_unchecked(t, &x, h) * dt;
                r.discount *= (k * dt).exp();
                r.outcome.k_total += dk;
                r.outcome.k_min_increment = r.outcome.k_min_increment.min(dk);
                r.clamped += usize::from(cc.clamped);
                r.projections += usize::from(o.projected);
                r.floor_hits += usize::from(o.floor_hit);
                if record {
                    r.dd_log += crate::simulate::dd_log_increment(params, t, &x, a, h, &noise.dw, dt).0;
                    for mark in 0..params.mark_count() {
                        if o.fired & (1 << mark) != 0 {
                            r.jumps.push(JumpEvent {
                                time: (step + 1) as f64 * dt,
                                step,
                                mark,
                            });
                        }
                    }
                    r.controls.push([a, h]);
                    r.dw.push(noise.dw);
                }
                x = o.x;
                y += dy;
                if record {
                    r.states.push(x);
                    r.ys.push(y);
                }
            }
            r.outcome.y_terminal = y;
            r.outcome.agent_value = r.discount * y - r.agent_cost;
            r.outcome.principal_value = params.eval_principal_terminal(&x, y)? - r.principal_cost;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let clamped_steps = recs.iter().map(|r| r.clamped).sum();
    let projections = recs.iter().map(|r| r.projections).sum();
    let floor_hits = recs.iter().map(|r| r.floor_hits).sum();
    let outcomes = recs.iter().map(|r| r.outcome).collect();
    let (batch, y_paths) = if record {
        let mut b = SimBatch {
            n_paths: config.n_paths,
            n_steps,
            dt,
            times: (0..=n_steps).map(|k| k as f64 * dt).collect(),
            states: Vec::new(),
            controls: Vec::new(),
            dw: Vec::new(),
            jump_log: Vec::new(),
            dd_weight: Vec::new(),
            agent_cost: Vec::new(),
            principal_cost: Vec::new(),
            discount: Vec::new(),
            y_terminal: None,
            seed: config.seed,
            projections,
            price_floor_hits: floor_hits,
        };
        let mut ys = Vec::with_capacity(recs.len());
        let mut yt = Vec::with_capacity(recs.len());
        for r in recs {
            b.states.push(r.states);
            b.controls.push(r.controls);
            b.dw.push(r.dw);
            b.jump_log.push(r.jumps);
            b.dd_weight.push(r.dd_log.exp());
            b.agent_cost.push(r.agent_cost);
            b.principal_cost.push(r.principal_cost);
            b.discount.push(r.discount);
            yt.push(r.outcome.y_terminal);
            ys.push(r.ys);
        }
        b.y_terminal = Some(yt);
        (Some(b), Some(ys))
    } else {
        (None, None)
    };
    Ok(Replay {
        outcomes,
        batch,
        y_paths,
        clamped_steps,
        projections,
    })
}

/// `Y` along stored paths.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardY {
    pub y: Vec<Vec<f64>>,
    pub dk: Vec<Vec<f64>>,
    pub k_total: Vec<f64>,
    /// Steps whose `(x, y)` fell outside the grid box.
    pub clamped_steps: usize,
}

/// Run `Y` along the stored paths of `batch`, reusing its Brownian increments,
/// jump events and recorded actions. The batch must have been simulated with
/// the recorded effort in the drift.
pub fn forward_y(batch: &SimBatch, contract: &ContractPolicy<'_>) -> Result<ForwardY> {
    let params = contract.params();
    let dt = batch.dt;
    let rows: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..batch.n_paths)
        .into_par_iter()
        .map(|n| {
            let mut fired = vec![0u32; batch.n_steps];
            for e in &batch.jump_log[n] {
                fired[e.step] |= 1 << e.mark;
            }
            let mut y = contract.y0;
            let mut ys = Vec::with_capacity(batch.n_steps + 1);
            let mut dks = Vec::with_capacity(batch.n_steps);
            let mut clamped = 0;
            ys.push(y);
            for step in 0..batch.n_steps {
                let t = batch.times[step];
                let x = &batch.states[n][step];
                let [a, h] = batch.controls[n][step];
                params.check_a(a)?;
                params.check_h(h)?;
                let b = params.drift_unchecked(t, x, a, h);
                let sig = params.volatility_unchecked(t, x, h);
                let dw = &batch.dw[n][step];
                let dxc = [
                    b[0] * dt + sig[0][0] * dw[0],
                    b[1] * dt + sig[1][1] * dw[1],
                    b[2] * dt + sig[2][1] * dw[1],
                ];
                let cc = contract.controls(t, x, y);
                clamped += usize::from(cc.clamped);
                let (dy, dk) = contract.y_step(t, x, y, &cc, h, dt, &dxc, fired[step]);
                y += dy;
                ys.push(y);
                dks.push(dk);
            }
            Ok((ys, dks, clamped))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ForwardY {
        y: Vec::with_capacity(rows.len()),
        dk: Vec::with_capacity(rows.len()),
        k_total: Vec::with_capacity(rows.len()),
        clamped_steps: 0,
    };
    for (ys, dks, c) in rows {
        out.k_total.push(dks.iter().sum());
        out.y.push(ys);
        out.dk.push(dks);
        out.clamped_steps += c;
    }
    Ok(out)
}

/// Relative floor added to the Monte Carlo tolerances. A fully hedged agent has
/// a deterministic payoff and a standard error at round-off level.
pub const ROUNDOFF: f64 = 1e-12;

/// Settings of [`verify_incentive_compatibility`].
#[derive(Clone, Debug, PartialEq)]
pub struct IcConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Number of combined standard errors tolerated.
    pub sigmas: f64,
}

impl Default for IcConfig {
    fn default() -> Self {
        IcConfig {
            n_paths: 20_000,
            dt: 1.0 / 256.0,
            seed: 0,
            sigmas: 3.0,
        }
    }
}

/// Replay every deviation on common random numbers and compare agent values.
/// The first entry of `deviations` must be [`Deviation::Recommended`].
pub fn verify_incentive_compatibility(contract: &ContractPolicy<'_>, deviations: &[Deviation], config: &IcConfig) -> Result<IcReport> {
    if deviations.first() != Some(&Deviation::Recommended) {
        return Err(Error::Config("the deviation set must start with the recommended effort".into()));
    }
    let sim = SimConfig {
        n_paths: config.n_paths,
        dt: config.dt,
        horizon: contract.params().horizon,
        seed: config.seed,
        ..Default::default()
    };
    let runs: Vec<Replay> = deviations
        .par_iter()
        .map(|d| replay(contract, d, &sim, false))
        .collect::<Result<_>>()?;
    let (v_hat, se_hat) = runs[0].agent_value();
    let base: Vec<f64> = runs[0].outcomes.iter().map(|o| o.agent_value).collect();
    let mut results = Vec::with_capacity(deviations.len());
    for (d, r) in deviations.iter().zip(&runs) {
        let (v, se) = r.agent_value();
        let diffs: Vec<f64> = base.iter().zip(&r.outcomes).map(|(b, o)| b - o.agent_value).collect();
        let (gap, paired_se) = mean_se(&diffs);
        let cse = combined_se(se_hat, se);
        results.push(DeviationResult {
            name: d.name(),
            deviation: d.clone(),
            mean: v,
            std_error: se,
            gap,
            combined_std_error: cse,
            paired_std_error: paired_se,
            pass: v <= v_hat + config.sigmas * cse + ROUNDOFF * (1.0 + v_hat.abs()),
            mean_k: r.mean_k().0,
            min_k_increment: r.min_k_increment(),
            clamped_steps: r.clamped_steps,
        });
    }
    let residual = v_hat - contract.y0;
    let (pv, pse) = runs[0].principal_value();
    let (mk, mk_se) = runs[0].mean_k();
    let ic_pass = results.iter().all(|r| r.pass);
    let rep_pass = residual.abs() <= config.sigmas * se_hat + ROUNDOFF * (1.0 + contract.y0.abs());
    Ok(IcReport {
        y0: contract.y0,
        n_paths: config.n_paths,
        dt: config.dt,
        seed: config.seed,
        sigmas: config.sigmas,
        deviations: results,
        representation_residual: residual,
        representation_std_error: se_hat,
        representation_pass: rep_pass,
        principal_value: pv,
        principal_std_error: pse,
        mean_k: mk,
        mean_k_std_error: mk_se,
        min_k_increment: runs.iter().map(|r| r.min_k_increment()).fold(f64::INFINITY, f64::min),
        ic_pass,
        pass: ic_pass && rep_pass,
    })
}

/// Maximiser of `y -> v(0, x0, y)` over `[r0, y_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub y0: f64,
    pub principal_value: f64,
    /// The scanned values were nonincreasing in `y`.
    pub nonincreasing: bool,
}

/// The value is multilinear between nodes, so the maximum over `[r0, y_max]`
/// sits at `r0` or at a `y` node; ties go to the smallest `y`.
pub fn optimize_reservation(solver: &Hjbi, solution: &Solution, r0: f64) -> Result<Reservation> {
    let y = &solver.grid.y;
    let y_max = y[y.len() - 1];
    if !(r0 <= y_max + 1e-12) || r0 < y[0] - 1e-12 {
        return Err(Error::Config(format!(
            "reservation value {r0} outside the solved y range [{}, {y_max}]",
            y[0]
        )));
    }
    let x0 = solver.params.x0;
    let mut pts = vec![r0];
    pts.extend(y.iter().copied().filter(|v| *v > r0 + 1e-12));
    let vals: Vec<f64> = pts.iter().map(|&v| solution.value.interpolate(&solver.grid, 0, &x0, v)).collect();
    let mut best = 0;
    for k in 1..vals.len() {
        if vals[k] > vals[best] {
            best = k;
        }
    }
    Ok(Reservation {
        y0: pts[best],
        principal_value: vals[best],
        nonincreasing: vals.windows(2).all(|w| w[1] <= w[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjbi::{build_grid, GridConfig, SchemeFlags, SearchConfig};
    use crate::model::{Coef, Interval, Var};
    use std::sync::OnceLock;

    fn solved() -> &'static (Hjbi, Solution) {
        static S: OnceLock<(Hjbi, Solution)> = OnceLock::new();
        S.get_or_init(|| solve(ModelParams::default()))
    }

    fn solve(m: ModelParams) -> (Hjbi, Solution) {
        let g = build_grid(&GridConfig::cube(5), &m).unwrap();
        let s = Hjbi::new(m, g, SearchConfig { control_points: 21, ..Default::default() }, SchemeFlags::default()).unwrap();
        let sol = s.solve_backward().unwrap();
        (s, sol)
    }

    fn sim(n_paths: usize, seed: u64) -> SimConfig {
        SimConfig {
            n_paths,
            dt: 1.0 / 32.0,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn rejects_initial_value_off_the_grid() {
        let (s, sol) = solved();
        assert!(ContractPolicy::new(s, sol, 10.0).is_err());
        assert!(ContractPolicy::new(s, sol, f64::NAN).is_err());
        assert!(ContractPolicy::new(s, sol, s.params.reservation).is_ok());
    }

    #[test]
    fn controls_stay_in_their_sets() {
        let (s, sol) = solved();
        let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
        let r = s.search.radius;
        for (t, p, si, y) in [(0.0, 1.0, 0.3, -0.5), (0.4, 2.0, 0.1, 1.2), (0.99, 0.5, 0.45, -2.4)] {
            let x = CyberState { p, s: si, i: si };
            let cc = c.controls(t, &x, y);
            assert!(s.h_grid.contains(&cc.h));
            assert!(s.params.a_set.contains(cc.a));
            assert!(cc.z.iter().chain(cc.u.iter()).all(|v| v.abs() <= r + 1e-12));
            assert!(cc.gamma.max_abs() <= r + 1e-12);
            assert!(!cc.clamped);
        }
        assert!(c.controls(0.0, &CyberState { p: 9.0, s: 0.2, i: 0.2 }, 0.0).clamped);
    }

    #[test]
    fn forward_y_reproduces_the_joint_replay() {
        let (s, sol) = solved();
        let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
        for d in [Deviation::Recommended, Deviation::Constant { a: 2.0 }] {
            let r = replay(&c, &d, &sim(40, 3), true).unwrap();
            let b = r.batch.as_ref().unwrap();
            let f = forward_y(b, &c).unwrap();
            assert_eq!(&f.y, r.y_paths.as_ref().unwrap());
            for (n, o) in r.outcomes.iter().enumerate() {
                assert_eq!(f.k_total[n], o.k_total);
                assert_eq!(b.y_terminal.as_ref().unwrap()[n], o.y_terminal);
            }
            assert_eq!(f.clamped_steps, r.clamped_steps);
        }
    }

    #[test]
    fn replay_does_not_depend_on_recording() {
        let (s, sol) = solved();
        let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
        let a = replay(&c, &Deviation::Recommended, &sim(16, 8), true).unwrap();
        let b = replay(&c, &Deviation::Recommended, &sim(16, 8), false).unwrap();
        assert_eq!(a.outcomes, b.outcomes);
        assert!(b.batch.is_none());
    }

    #[test]
    fn k_increments_are_nonnegative() {
        let (s, sol) = solved();
        let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
        for d in Deviation::library(&s.params) {
            let r = replay(&c, &d, &sim(30, 1), false).unwrap();
            assert!(r.min_k_increment() >= -1e-12, "{}: {}", d.name(), r.min_k_increment());
        }
    }

    #[test]
    fn deviation_actions_are_clamped() {
        let m = ModelParams::default();
        assert_eq!(Deviation::Scaled { factor: 1.5 }.action(&m, 0.0, 1.8), 2.0);
        assert_eq!(Deviation::Constant { a: -1.0 }.action(&m, 0.0, 1.0), 0.0);
        let bb = Deviation::BangBang { high: 2.0, low: 0.0, switch: 0.5 };
        assert_eq!((bb.action(&m, 0.2, 1.0), bb.action(&m, 0.5, 1.0)), (2.0, 0.0));
        assert_eq!(Deviation::library(&m)[0], Deviation::Recommended);
    }

    #[test]
    fn small_ic_check_passes() {
        let (s, sol) = solved();
        let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
        let cfg = IcConfig {
            n_paths: 2000,
            dt: 1.0 / 32.0,
            seed: 5,
            sigmas: 3.0,
        };
        let rep = verify_incentive_compatibility(&c, &Deviation::library(&s.params), &cfg).unwrap();
        assert!(rep.pass, "{rep:#?}");
        assert_eq!(rep.deviations[0].gap, 0.0);
        let bad = verify_incentive_compatibility(&c, &[Deviation::Constant { a: 1.0 }], &cfg);
        assert!(bad.is_err());
    }

    #[test]
    fn reservation_sits_at_the_participation_bound() {
        let (s, sol) = solved();
        let r0 = s.params.reservation;
        let res = optimize_reservation(s, sol, r0).unwrap();
        assert_eq!(res.y0, r0);
        assert!(res.nonincreasing);
        assert!(optimize_reservation(s, sol, s.grid.y[s.grid.y.len() - 1] + 1.0).is_err());
    }

    #[test]
    fn zero_contract_without_costs_keeps_y_constant() {
        let m = ModelParams::default().with(|m| {
            m.discount_k = Coef::constant(0.0);
            m.effort_cost = Coef::constant(0.0);
            m.agent_jump_cost = Coef::constant(0.0);
        });
        let (s, mut sol) = solve(m);
        for sl in sol.policy.slices.iter_mut() {
            let st = 3 + sol.policy.marks + 8;
            for rec in sl.chunks_mut(st) {
                rec[..st - 2].fill(0.0);
            }
        }
        let c = ContractPolicy::new(&s, &sol, 0.25).unwrap();
        let r = replay(&c, &Deviation::Recommended, &sim(50, 2), true).unwrap();
        for ys in r.y_paths.unwrap() {
            assert!(ys.iter().all(|y| *y == 0.25));
        }
    }

    #[test]
    fn lowering_the_reservation_raises_the_value_one_for_one() {
        let m = ModelParams::default().with(|m| {
            m.beta = 0.0;
            m.rho = 0.0;
            m.mu = Coef::constant(0.0);
            m.sigma_price = Coef::constant(0.0);
            m.sigma_tilde = Coef::constant(0.0);
            m.discount_k = Coef::constant(0.0);
            m.effort_cost = Coef::constant(0.0);
            m.agent_jump_cost = Coef::constant(0.0);
            m.principal_jump_cost = Coef::constant(0.2);
            m.marks.clear();
            m.a_set = Interval { lo: 0.0, hi: 0.0 };
            m.h_set = Interval { lo: 0.0, hi: 0.0 };
        });
        let (s, sol) = solve(m);
        let r0 = s.params.reservation;
        let base = optimize_reservation(&s, &sol, r0).unwrap();
        assert_eq!(base.y0, r0);
        for d in [0.1, 0.37, 1.0] {
            let low = optimize_reservation(&s, &sol, r0 - d).unwrap();
            assert_eq!(low.y0, r0 - d);
            assert!((low.principal_value - base.principal_value - d).abs() < 1e-12);
        }
    }

    #[test]
    fn costlier_effort_keeps_the_verdict_across_seeds() {
        let m = ModelParams::default().with(|m| m.effort_cost = Coef::quadratic(0.0, &[], &[(Var::A, 5.0)]));
        let (s, sol) = solve(m);
        let c = ContractPolicy::new(&s, &sol, s.params.reservation).unwrap();
        let (b, bs) = solved();
        let cb = ContractPolicy::new(b, bs, b.params.reservation).unwrap();
        let lib = Deviation::library(&s.params);
        for seed in 0..5 {
            let cfg = IcConfig {
                n_paths: 500,
                dt: 1.0 / 32.0,
                seed,
                sigmas: 3.0,
            };
            let hi = verify_incentive_compatibility(&c, &lib, &cfg).unwrap();
            let lo = verify_incentive_compatibility(&cb, &lib, &cfg).unwrap();
            assert!(hi.pass && lo.pass, "seed {seed}");
        }
        // Fixed compensation: the same paths and Y_T, effort cost times 10.
        let m10 = &s.params;
        for d in &lib {
            let r = replay(&cb, d, &sim(200, 4), true).unwrap();
            let bt = r.batch.unwrap();
            for (n, o) in r.outcomes.iter().enumerate() {
                let (mut disc, mut cost) = (1.0, 0.0);
                for step in 0..bt.n_steps {
                    let (t, x) = (bt.times[step], &bt.states[n][step]);
                    let k = m10.k_at(t, x);
                    cost += disc * m10.agent_cost_unchecked(t, x, bt.controls[n][step][0]) * phi1(k * bt.dt) * bt.dt;
                    disc *= (k * bt.dt).exp();
                }
                assert!(disc * o.y_terminal - cost <= o.agent_value + 1e-12, "{}", d.name());
            }
        }
    }
}
