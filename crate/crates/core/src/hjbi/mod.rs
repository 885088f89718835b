//! Backward explicit monotone solver for the principal's integro-HJBI
//! equation on the `(p, s, i, y)` grid.
//!
//! Each step sets `v(t_n) = v(t_{n+1}) + dt Q*[v(t_{n+1})]` node by node, with
//! `Q*` the max over contract controls of the min over the hacker grid. A
//! candidate is admissible only if `dt * rate <= 1` at every hacker action, so
//! the update is a convex combination of old values minus `dt C^P`.

pub mod export;
pub mod grid;
pub mod operator;
pub mod search;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Sym3;
use crate::model::{CyberState, ModelParams};

pub use grid::{build_grid, Grid4, GridConfig};
pub use operator::{Candidate, NodeCtx};
pub use search::{optimize_node, ControlPoint, NodeOptimum, SearchConfig};

/// Interpretation switches.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeFlags {
    /// Single jump at the intensity-weighted mean shift instead of per-mark jumps.
    pub aggregated_jump: bool,
    /// `y` diffusion row `(z_p, z_s)` instead of `z^T sigma`.
    pub literal_sigma_row: bool,
}

/// Safety factor of the a-priori step-size check.
pub const CFL_FACTOR: f64 = 0.9;

/// Values per time slice over the full grid; masked nodes hold NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    pub slices: Vec<Vec<f64>>,
}

impl ValueField {
    pub fn at(&self, n: usize, full: usize) -> f64 {
        self.slices[n][full]
    }

    /// Multilinear interpolation on slice `n`, clamped to the box.
    pub fn interpolate(&self, grid: &Grid4, n: usize, x: &CyberState, y: f64) -> f64 {
        let c = grid.corners(x, y);
        let s = &self.slices[n];
        (0..c.len)
            .map(|k| c.weights[k] * s[grid.retained[c.slots[k] as usize]])
            .sum()
    }
}

/// Optimal controls per time slice `0..n_t` over retained nodes.
///
/// Record layout: `z (3), u (m), gamma (pp, ss, ii, si, ps, pi), h, a`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyField {
    pub marks: usize,
    pub slices: Vec<Vec<f64>>,
}

impl PolicyField {
    pub fn stride(&self) -> usize {
        3 + self.marks + 6 + 2
    }

    fn encode(cp: &ControlPoint, out: &mut [f64]) {
        let m = cp.u.len();
        out[..3].copy_from_slice(&cp.z);
        out[3..3 + m].copy_from_slice(&cp.u);
        let g = &cp.gamma.0;
        out[3 + m..3 + m + 6].copy_from_slice(&[g[0][0], g[1][1], g[2][2], g[1][2], g[0][1], g[0][2]]);
        out[3 + m + 6] = cp.h;
        out[3 + m + 7] = cp.a;
    }

    fn decode(rec: &[f64], m: usize) -> ControlPoint {
        let g = &rec[3 + m..3 + m + 6];
        ControlPoint {
            z: [rec[0], rec[1], rec[2]],
            u: rec[3..3 + m].to_vec(),
            gamma: Sym3([[g[0], g[4], g[5]], [g[4], g[1], g[3]], [g[5], g[3], g[2]]]),
            h: rec[3 + m + 6],
            a: rec[3 + m + 7],
        }
    }

    pub fn get(&self, n: usize, slot: usize) -> ControlPoint {
        let st = self.stride();
        Self::decode(&self.slices[n][slot * st..(slot + 1) * st], self.marks)
    }

    /// Componentwise multilinear interpolation on slice `n`.
    pub fn interpolate(&self, grid: &Grid4, n: usize, x: &CyberState, y: f64) -> ControlPoint {
        let st = self.stride();
        let c = grid.corners(x, y);
        let s = &self.slices[n];
        let mut rec = vec![0.0; st];
        for k in 0..c.len {
            let base = c.slots[k] as usize * st;
            for (r, v) in rec.iter_mut().zip(&s[base..base + st]) {
                *r += c.weights[k] * v;
            }
        }
        Self::decode(&rec, self.marks)
    }
}

/// Solver diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub nodes: usize,
    pub n_t: usize,
    pub dt: f64,
    /// Node-steps where no candidate passed the monotonicity check.
    pub nonmonotone_node_steps: usize,
    /// Node-steps whose optimum touched the control box boundary.
    pub radius_hits: usize,
    /// Largest `dt * rate` of an accepted optimum.
    pub max_dt_rate: f64,
    /// A-priori bound on `dt * rate` of the state part over `A x H`.
    pub cfl_state_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub value: ValueField,
    pub policy: PolicyField,
    pub report: SolveReport,
}

/// Solver bound to one model, grid and configuration.
#[derive(Clone, Debug)]
pub struct Hjbi {
    pub params: ModelParams,
    pub grid: Grid4,
    pub search: SearchConfig,
    pub flags: SchemeFlags,
    pub h_grid: Vec<f64>,
}

impl Hjbi {
    pub fn new(params: ModelParams, grid: Grid4, search: SearchConfig, flags: SchemeFlags) -> Result<Self> {
        if params.mark_count() > crate::simulate::MAX_MARKS {
            return Err(Error::Config(format!("at most {} marks are supported", crate::simulate::MAX_MARKS)));
        }
        if search.control_points == 0 || search.h_points == 0 {
            return Err(Error::Config("search grids need at least one point".into()));
        }
        if !(search.radius >= 0.0 && search.radius.is_finite()) {
            return Err(Error::Config(format!("search radius {} must be finite and nonnegative", search.radius)));
        }
        let h_grid = params.h_set.grid(search.h_points);
        Ok(Hjbi {
            params,
            grid,
            search,
            flags,
            h_grid,
        })
    }

    pub fn node_context(&self, slice: &[f64], n: usize, full: usize) -> NodeCtx {
        NodeCtx::new(&self.params, &self.grid, &self.flags, slice, n, full, &self.h_grid)
    }

    /// `Q^{z,u,gamma,h}[v]` at a node, with the effort at its best response.
    /// `G_hat` inside the `y` drift is minimised over the solver's `h` grid.
    pub fn apply_local_operator(&self, slice: &[f64], n: usize, full: usize, cp: &ControlPoint) -> Result<f64> {
        self.params.check_h(cp.h)?;
        if cp.u.len() != self.params.mark_count() {
            return Err(Error::Domain("control point has the wrong number of jump sensitivities".into()));
        }
        if self.grid.slot[full] == grid::MASKED {
            return Err(Error::Stencil(format!("node {full} is outside the simplex")));
        }
        if slice.len() != self.grid.total_len() || !slice[full].is_finite() {
            return Err(Error::Stencil("value slice does not match the grid".into()));
        }
        let ctx = self.node_context(slice, n, full);
        let e = operator::eta_data(&self.params, &self.grid, ctx.t, &ctx.x, cp.h, &ctx.geom(), &self.flags);
        let c = cp.candidate();
        let a = crate::hamiltonian::best_response_alpha(&self.params, ctx.t, &ctx.x, &c.z);
        Ok(ctx.evaluate_single(&self.params, &self.flags, &c, a, &e).0)
    }

    pub fn optimize_node(&self, slice: &[f64], n: usize, full: usize) -> NodeOptimum {
        let ctx = self.node_context(slice, n, full);
        optimize_node(&self.params, &self.flags, &ctx, &self.search, self.grid.dt)
    }

    /// Terminal slice `F^P(x) - U_A^{-1}(y - F^A(x))`.
    pub fn terminal_slice(&self) -> Result<Vec<f64>> {
        let mut v = vec![f64::NAN; self.grid.total_len()];
        for &f in &self.grid.retained {
            let (x, y) = self.grid.state(f);
            v[f] = self.params.eval_principal_terminal(&x, y)?;
        }
        Ok(v)
    }

    /// Largest `dt * rate` of the state part (drift, diffusion, jumps) over
    /// the retained nodes, both ends of `A` and the `h` grid.
    pub fn cfl_state_ratio(&self) -> f64 {
        let dummy = vec![0.0; self.grid.total_len()];
        let a_ends = [self.params.a_set.lo, self.params.a_set.hi];
        let worst = (0..self.grid.n_t)
            .filter(|n| *n == 0 || self.params_time_dependent())
            .map(|n| {
                self.grid
                    .retained
                    .par_iter()
                    .map(|&f| {
                        let ctx = self.node_context(&dummy, n, f);
                        ctx.eta
                            .iter()
                            .flat_map(|e| a_ends.iter().map(move |&a| (e, a)))
                            .map(|(e, a)| ctx.x_rate(e, a))
                            .fold(0.0f64, f64::max)
                    })
                    .reduce(|| 0.0, f64::max)
            })
            .fold(0.0f64, f64::max);
        worst * self.grid.dt
    }

    fn params_time_dependent(&self) -> bool {
        use crate::model::Var;
        let p = &self.params;
        [&p.mu, &p.sigma_price, &p.sigma_tilde, &p.principal_jump_cost]
            .iter()
            .any(|c| c.depends_on(Var::T))
            || p.marks.iter().any(|m| m.intensity.depends_on(Var::T))
    }

    /// Full backward sweep.
    pub fn solve_backward(&self) -> Result<Solution> {
        let g = &self.grid;
        let ratio = self.cfl_state_ratio();
        if ratio > CFL_FACTOR {
            let suggested = (g.n_t as f64 * ratio / CFL_FACTOR).ceil() as usize;
            return Err(Error::Cfl {
                dt: g.dt,
                limit: g.dt * CFL_FACTOR / ratio,
                suggested_nt: suggested,
            });
        }
        let m = self.params.mark_count();
        let mut slices = vec![Vec::new(); g.n_t + 1];
        slices[g.n_t] = self.terminal_slice()?;
        let mut policy = vec![Vec::new(); g.n_t];
        let st = 3 + m + 8;
        let mut report = SolveReport {
            nodes: g.node_count(),
            n_t: g.n_t,
            dt: g.dt,
            cfl_state_ratio: ratio,
            ..Default::default()
        };
        for n in (0..g.n_t).rev() {
            let next = &slices[n + 1];
            let results: Vec<NodeOptimum> = g
                .retained
                .par_iter()
                .map(|&f| self.optimize_node(next, n, f))
                .collect();
            let mut cur = vec![f64::NAN; g.total_len()];
            let mut pol = vec![0.0; g.node_count() * st];
            for (slot, (&f, r)) in g.retained.iter().zip(&results).enumerate() {
                let v = next[f] + g.dt * r.q;
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite value at node {f}, step {n}")));
                }
                cur[f] = v;
                PolicyField::encode(&r.cp, &mut pol[slot * st..(slot + 1) * st]);
                report.nonmonotone_node_steps += usize::from(!r.monotone);
                report.radius_hits += usize::from(r.radius_hit);
                if r.monotone {
                    report.max_dt_rate = report.max_dt_rate.max(r.dt_rate);
                }
            }
            slices[n] = cur;
            policy[n] = pol;
        }
        Ok(Solution {
            value: ValueField { slices },
            policy: PolicyField { marks: m, slices: policy },
            report,
        })
    }

    /// Constant sub- and super-solution candidates: the smallest terminal
    /// value minus the horizon times the largest running cost, and the
    /// largest terminal value.
    pub fn sandwich_bounds(&self) -> Result<(f64, f64)> {
        let term = self.terminal_slice()?;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut cmax = 0.0f64;
        for &f in &self.grid.retained {
            lo = lo.min(term[f]);
            hi = hi.max(term[f]);
            let (x, _) = self.grid.state(f);
            for n in 0..self.grid.n_t {
                let t = self.grid.time(n);
                for &h in &self.h_grid {
                    cmax = cmax.max(self.params.principal_cost_unchecked(t, &x, h));
                }
                if !self.params_time_dependent() {
                    break;
                }
            }
        }
        Ok((lo - self.params.horizon * cmax, hi))
    }
}

/// One-call solve from a grid configuration.
pub fn solve_backward(params: &ModelParams, grid: &GridConfig, search: &SearchConfig, flags: &SchemeFlags) -> Result<(Hjbi, Solution)> {
    let g = build_grid(grid, params)?;
    let solver = Hjbi::new(params.clone(), g, search.clone(), flags.clone())?;
    let sol = solver.solve_backward()?;
    Ok((solver, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coef, Interval, Var};

    fn zero_dynamics(cp: f64) -> ModelParams {
        ModelParams::default().with(|m| {
            m.beta = 0.0;
            m.rho = 0.0;
            m.mu = Coef::constant(0.0);
            m.sigma_price = Coef::constant(0.0);
            m.sigma_tilde = Coef::constant(0.0);
            m.discount_k = Coef::constant(0.0);
            m.effort_cost = Coef::constant(0.0);
            m.agent_jump_cost = Coef::constant(0.0);
            m.principal_jump_cost = Coef::constant(cp);
            m.marks.clear();
            m.a_set = Interval { lo: 0.0, hi: 0.0 };
            m.h_set = Interval { lo: 0.0, hi: 0.0 };
        })
    }

    fn solver(m: ModelParams, n: usize, search: SearchConfig) -> Hjbi {
        let g = build_grid(&GridConfig::cube(n), &m).unwrap();
        Hjbi::new(m, g, search, SchemeFlags::default()).unwrap()
    }

    fn interior(s: &Hjbi) -> usize {
        s.grid.full_index(2, 2, 1, 2)
    }

    #[test]
    fn constant_field_gives_minus_running_cost() {
        let m = ModelParams::default();
        let s = solver(m.clone(), 5, SearchConfig::default());
        let v = vec![3.7; s.grid.total_len()];
        let f = interior(&s);
        let mut cp = ControlPoint::zero(2, 0.4, 0.0);
        cp.z = [0.3, -1.0, 0.5];
        cp.u = vec![0.2, -0.1];
        cp.gamma = Sym3::diag([0.1, 0.2, -0.3]);
        let q = s.apply_local_operator(&v, 0, f, &cp).unwrap();
        let (x, _) = s.grid.state(f);
        assert!((q + m.principal_cost_unchecked(0.0, &x, 0.4)).abs() < 1e-12);
    }

    #[test]
    fn linear_price_field_sees_price_drift() {
        let m = ModelParams::default().with(|m| {
            for mk in &mut m.marks {
                mk.intensity = Coef::constant(0.0);
            }
        });
        let s = solver(m.clone(), 5, SearchConfig::default());
        let mut v = vec![f64::NAN; s.grid.total_len()];
        for &f in &s.grid.retained {
            v[f] = s.grid.state(f).0.p;
        }
        let f = interior(&s);
        let (x, _) = s.grid.state(f);
        let q = s.apply_local_operator(&v, 0, f, &ControlPoint::zero(2, 0.7, 0.0)).unwrap();
        let expected = m.mu_at(0.0, x.i) * x.p - m.principal_cost_unchecked(0.0, &x, 0.7);
        assert!((q - expected).abs() < 1e-12, "{q} vs {expected}");
    }

    #[test]
    fn jump_term_on_linear_price_field() {
        let m = ModelParams::default().with(|m| m.mu = Coef::constant(0.0));
        let s = solver(m.clone(), 9, SearchConfig::default());
        let mut v = vec![f64::NAN; s.grid.total_len()];
        for &f in &s.grid.retained {
            v[f] = 2.0 * s.grid.state(f).0.p;
        }
        let f = s.grid.full_index(5, 3, 2, 4);
        let (x, _) = s.grid.state(f);
        let h = 0.6;
        let q = s.apply_local_operator(&v, 0, f, &ControlPoint::zero(2, h, 0.0)).unwrap();
        let jm = m.eval_jump_model(0.0, &x, h).unwrap();
        let closed: f64 = (0..2).map(|k| jm.intensities[k] * (-jm.loss_fractions[k] * x.p) * 2.0).sum();
        let expected = closed - m.principal_cost_unchecked(0.0, &x, h);
        assert!((q - expected).abs() < 1e-12, "{q} vs {expected}");
    }

    #[test]
    fn singleton_boxes_reduce_to_the_operator() {
        let m = ModelParams::default().with(|m| m.h_set = Interval { lo: 0.3, hi: 0.3 });
        let s = solver(m, 5, SearchConfig { radius: 0.0, ..Default::default() });
        let v = s.terminal_slice().unwrap();
        for &f in s.grid.retained.iter().step_by(37) {
            let o = s.optimize_node(&v, 3, f);
            let q = s.apply_local_operator(&v, 3, f, &o.cp).unwrap();
            assert_eq!(o.q, q);
            assert_eq!(o.cp.max_abs(), 0.0);
        }
    }

    fn perturbed_slice(s: &Hjbi, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v = s.terminal_slice().unwrap();
        for &f in &s.grid.retained {
            let (x, y) = s.grid.state(f);
            v[f] += 0.3 * (x.s * y).sin() + 0.05 * rng.random::<f64>() - 0.2 * y * y;
        }
        v
    }

    #[test]
    fn refined_search_never_lowers_the_optimum() {
        use rand::{Rng, SeedableRng};
        let m = ModelParams::default();
        let s = solver(m, 9, SearchConfig::default());
        let v = perturbed_slice(&s, 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let f = s.grid.retained[rng.random_range(0..s.grid.node_count())];
            let ctx = s.node_context(&v, 5, f);
            let mut last = f64::NEG_INFINITY;
            for n in [11, 21, 41, 81] {
                let cfg = SearchConfig { control_points: n, ..Default::default() };
                let o = optimize_node(&s.params, &s.flags, &ctx, &cfg, s.grid.dt);
                assert!(o.q >= last, "points {n}: {} < {last}", o.q);
                last = o.q;
            }
        }
    }

    #[test]
    fn inner_infimum_matches_brute_force_scan() {
        let m = ModelParams::default();
        let s = solver(m, 9, SearchConfig::default());
        let v = perturbed_slice(&s, 3);
        for &f in s.grid.retained.iter().step_by(211) {
            let o = s.optimize_node(&v, 2, f);
            let mut best = (f64::INFINITY, 0.0);
            for &h in &s.h_grid {
                let q = s.apply_local_operator(&v, 2, f, &ControlPoint { h, ..o.cp.clone() }).unwrap();
                if q < best.0 {
                    best = (q, h);
                }
            }
            assert!((best.0 - o.q).abs() < 1e-12 * (1.0 + o.q.abs()));
            assert_eq!(best.1, o.cp.h);
        }
    }

    #[test]
    fn frozen_controls_are_monotone_away_from_outflow_faces() {
        use rand::{Rng, SeedableRng};
        let m = ModelParams::default();
        let s = solver(m, 9, SearchConfig::default());
        let v = perturbed_slice(&s, 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let ny = s.grid.y.len();
        for &f in s.grid.retained.iter().step_by(13) {
            let (_, _, _, iy) = s.grid.coords(f);
            if iy == 0 || iy == ny - 1 {
                continue;
            }
            let cp = s.optimize_node(&v, 0, f).cp;
            let base = v[f] + s.grid.dt * s.apply_local_operator(&v, 0, f, &cp).unwrap();
            let mut w = v.clone();
            for &g in &s.grid.retained {
                w[g] += rng.random::<f64>() * 0.1;
            }
            let up = w[f] + s.grid.dt * s.apply_local_operator(&w, 0, f, &cp).unwrap();
            assert!(up >= base, "node {f}: {up} < {base}");
        }
    }

    #[test]
    fn zero_dynamics_is_stationary_and_cost_is_linear_in_time() {
        for c in [0.0, 0.3] {
            let s = solver(zero_dynamics(c), 5, SearchConfig::default());
            let sol = s.solve_backward().unwrap();
            let g = &s.grid;
            let term = &sol.value.slices[g.n_t];
            let mut err = 0.0f64;
            for n in 0..=g.n_t {
                for &f in &g.retained {
                    let exact = term[f] - c * (g.horizon - g.time(n));
                    err = err.max((sol.value.slices[n][f] - exact).abs());
                }
            }
            assert!(err <= 1e-10, "c = {c}: {err}");
        }
    }

    #[test]
    fn single_point_grid_is_an_ode() {
        let m = zero_dynamics(0.25);
        let cfg = GridConfig { n_p: 1, n_si: 1, n_y: 1, n_t: 8, ..GridConfig::default() };
        let (s, sol) = solve_backward(&m, &cfg, &SearchConfig::default(), &SchemeFlags::default()).unwrap();
        let f = s.grid.retained[0];
        let expected = m.eval_principal_terminal(&m.x0, m.reservation).unwrap() - 0.25;
        assert!((sol.value.at(0, f) - expected).abs() < 1e-12);
    }

    #[test]
    fn terminal_slice_is_exact() {
        let m = ModelParams::default();
        let s = solver(m.clone(), 5, SearchConfig::default());
        let v = s.terminal_slice().unwrap();
        for &f in &s.grid.retained {
            let (x, y) = s.grid.state(f);
            assert_eq!(v[f], m.eval_principal_terminal(&x, y).unwrap());
        }
    }

    #[test]
    fn coarse_time_step_is_rejected_with_suggestion() {
        let m = ModelParams::default();
        let cfg = GridConfig { n_t: 4, ..GridConfig::cube(9) };
        let err = solve_backward(&m, &cfg, &SearchConfig::default(), &SchemeFlags::default()).unwrap_err();
        match err {
            Error::Cfl { suggested_nt, .. } => {
                let ok = GridConfig { n_t: suggested_nt, ..cfg };
                let g = build_grid(&ok, &m).unwrap();
                let s = Hjbi::new(m, g, SearchConfig::default(), SchemeFlags::default()).unwrap();
                assert!(s.cfl_state_ratio() <= CFL_FACTOR);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn zero_intensities_match_empty_mark_set() {
        let with = ModelParams::default().with(|m| {
            for mk in &mut m.marks {
                mk.intensity = Coef::constant(0.0);
            }
        });
        let without = ModelParams::default().with(|m| m.marks.clear());
        let cfg = GridConfig::cube(5);
        let a = solve_backward(&with, &cfg, &SearchConfig::default(), &SchemeFlags::default()).unwrap().1;
        let b = solve_backward(&without, &cfg, &SearchConfig::default(), &SchemeFlags::default()).unwrap().1;
        for (sa, sb) in a.value.slices.iter().zip(&b.value.slices) {
            for (x, y) in sa.iter().zip(sb) {
                assert!(x == y || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn aggregated_jump_agrees_for_a_single_mark() {
        let m = ModelParams::default().with(|m| {
            m.marks.truncate(1);
            m.mu = Coef::constant(0.0);
        });
        let s = solver(m.clone(), 9, SearchConfig::default());
        let agg = Hjbi { flags: SchemeFlags { aggregated_jump: true, ..Default::default() }, ..s.clone() };
        let v = perturbed_slice(&s, 6);
        for &f in s.grid.retained.iter().step_by(97) {
            let mut cp = ControlPoint::zero(1, 0.5, 0.0);
            cp.u = vec![0.3];
            let a = s.apply_local_operator(&v, 0, f, &cp).unwrap();
            let b = agg.apply_local_operator(&v, 0, f, &cp).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_records_roundtrip() {
        let mut cp = ControlPoint::zero(2, 0.25, 0.5);
        cp.z = [1.0, 2.0, 3.0];
        cp.u = vec![4.0, 5.0];
        cp.gamma = Sym3([[6.0, 7.0, 8.0], [7.0, 9.0, 10.0], [8.0, 10.0, 11.0]]);
        let mut rec = vec![0.0; 3 + 2 + 8];
        PolicyField::encode(&cp, &mut rec);
        assert_eq!(PolicyField::decode(&rec, 2), cp);
        let _ = Var::P;
    }
}
