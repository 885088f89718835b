//! Agent generator `G`, the sup-inf Hamiltonian `G*`, the second-order
//! Hamiltonian `G_hat`, best-response and worst-case selectors, and the
//! Isaacs-gap diagnostic.
//!
//! `G` splits additively into an effort part and a hacker part:
//!
//! ```text
//! G(a, h) = G_a(a) + G_h(h)
//! G_a(a)  = -f(t, x, a) - a s z_s
//! G_h(h)  = k y - agent jump cost + b^c(t, x; 0, h) . z
//!           + scale(p) sum_k u_k (lambda_k(i, h) - lambda0_k)
//! ```
//!
//! where `scale(p)` is `p` or `1` depending on [`JumpScaling`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{CyberState, JumpScaling, ModelParams, Var};

/// Co-state `(y, z, u)` of the agent problem.
#[derive(Clone, Debug, PartialEq)]
pub struct CoState {
    pub y: f64,
    pub z: [f64; 3],
    pub u: Vec<f64>,
}

impl CoState {
    pub fn zero(marks: usize) -> Self {
        CoState {
            y: 0.0,
            z: [0.0; 3],
            u: vec![0.0; marks],
        }
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        if self.u.len() != params.mark_count() {
            return Err(Error::Domain(format!(
                "co-state has {} jump sensitivities, model has {} marks",
                self.u.len(),
                params.mark_count()
            )));
        }
        let finite = self.y.is_finite()
            && self.z.iter().all(|v| v.is_finite())
            && self.u.iter().all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::Domain("co-state entries must be finite".into()))
        }
    }
}

/// Symmetric 3x3 matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym3(pub [[f64; 3]; 3]);

impl Sym3 {
    pub fn zero() -> Self {
        Sym3([[0.0; 3]; 3])
    }

    pub fn diag(d: [f64; 3]) -> Self {
        let mut m = [[0.0; 3]; 3];
        for k in 0..3 {
            m[k][k] = d[k];
        }
        Sym3(m)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..3).all(|j| (0..3).all(|k| self.0[j][k] == self.0[k][j]))
    }

    /// `Tr(a * self)` for symmetric `a`.
    pub fn trace_with(&self, a: &[[f64; 3]; 3]) -> f64 {
        let mut acc = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                acc += a[j][k] * self.0[k][j];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `sigma sigma^T` at `(t, x, h)`.
pub fn sigma_sigma_t(params: &ModelParams, t: f64, x: &CyberState, h: f64) -> [[f64; 3]; 3] {
    let sp = params.sigma_price_at(t, x.i, h) * x.p;
    let g = params.sigma_tilde_at(t, h) * x.s * x.i;
    let q = g * g;
    [[sp * sp, 0.0, 0.0], [0.0, q, -q], [0.0, -q, q]]
}

/// Effort part `G_a(a) = -f(t, x, a) - a s z_s`.
#[inline]
pub fn g_a_part(params: &ModelParams, t: f64, x: &CyberState, z_s: f64, a: f64) -> f64 {
    -params.effort_cost_at(t, x, a) - a * x.s * z_s
}

/// Hacker part `G_h(h)`; see the module documentation.
#[inline]
pub fn g_h_part(params: &ModelParams, t: f64, x: &CyberState, cs: &CoState, h: f64) -> f64 {
    let b = params.drift_unchecked(t, x, 0.0, h);
    let scale = params.jump_scaling.factor(x.p);
    let lam0 = params.lambda0();
    let mut jump = 0.0;
    for (k, u) in cs.u.iter().enumerate() {
        jump += u * (params.intensity_raw(k, t, x, h) - lam0[k]);
    }
    params.k_at(t, x) * cs.y - params.agent_jump_cost.eval(&x.vars(t))
        + b[0] * cs.z[0]
        + b[1] * cs.z[1]
        + b[2] * cs.z[2]
        + scale * jump
}

/// Agent generator `G(t, x, y, z, u; a, h)`.
pub fn eval_g(params: &ModelParams, t: f64, x: &CyberState, cs: &CoState, a: f64, h: f64) -> Result<f64> {
    x.check()?;
    params.check_a(a)?;
    params.check_h(h)?;
    cs.check(params)?;
    Ok(g_a_part(params, t, x, cs.z[1], a) + g_h_part(params, t, x, cs, h))
}

/// Maximiser over `A` of `-a s z_s - f(t, x, a)`; ties go to the smaller action.
pub fn best_response_alpha(params: &ModelParams, t: f64, x: &CyberState, z: &[f64; 3]) -> f64 {
    let _ = t;
    let lin = params.effort_cost.linear(Var::A);
    let quad = params.effort_cost.square(Var::A);
    let slope = -(x.s * z[1] + lin);
    let a = if quad > 0.0 {
        params.a_set.clamp(slope / (2.0 * quad))
    } else if slope > 0.0 {
        params.a_set.hi
    } else {
        params.a_set.lo
    };
    a + 0.0
}

/// Value and optimisers of `G* = sup_a inf_h G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GStar {
    pub value: f64,
    pub a: f64,
    pub h: f64,
}

/// `G*` with the effort maximised in closed form and `h` scanned over `h_grid`
/// (ties resolved to the smallest `h`).
pub fn eval_g_star(params: &ModelParams, t: f64, x: &CyberState, cs: &CoState, h_grid: &[f64]) -> GStar {
    assert!(!h_grid.is_empty(), "h_grid must be nonempty");
    let a = best_response_alpha(params, t, x, &cs.z);
    let ga = g_a_part(params, t, x, cs.z[1], a);
    let (mut best, mut h_best) = (f64::INFINITY, h_grid[0]);
    for &h in h_grid {
        let v = g_h_part(params, t, x, cs, h);
        if v < best {
            best = v;
            h_best = h;
        }
    }
    GStar {
        value: ga + best,
        a,
        h: h_best,
    }
}

/// `sup_a G(a, h)` for a single hacker action: the value of `G*` on the
/// slice of attainable covariance `sigma sigma^T(h)`.
pub fn g_star_slice(params: &ModelParams, t: f64, x: &CyberState, cs: &CoState, h: f64) -> f64 {
    let a = best_response_alpha(params, t, x, &cs.z);
    g_a_part(params, t, x, cs.z[1], a) + g_h_part(params, t, x, cs, h)
}

/// `G_hat(gamma) = inf_h { Tr(sigma sigma^T(h) gamma) / 2 + sup_a G(a, h) }`
/// over `h_grid`. Returns the value and the minimising `h`.
pub fn eval_g_hat(
    params: &ModelParams,
    t: f64,
    x: &CyberState,
    cs: &CoState,
    gamma: &Sym3,
    h_grid: &[f64],
) -> (f64, f64) {
    assert!(!h_grid.is_empty(), "h_grid must be nonempty");
    let a = best_response_alpha(params, t, x, &cs.z);
    let ga = g_a_part(params, t, x, cs.z[1], a);
    let (mut best, mut h_best) = (f64::INFINITY, h_grid[0]);
    for &h in h_grid {
        let v = 0.5 * gamma.trace_with(&sigma_sigma_t(params, t, x, h)) + g_h_part(params, t, x, cs, h);
        if v < best {
            best = v;
            h_best = h;
        }
    }
    (ga + best, h_best)
}

/// Rate of the nondecreasing process `K` when the hacker plays `h`:
/// `sup_a G(a, h) + Tr(sigma sigma^T(h) gamma) / 2 - G_hat(gamma)`.
pub fn k_rate(
    params: &ModelParams,
    t: f64,
    x: &CyberState,
    cs: &CoState,
    gamma: &Sym3,
    h: f64,
    h_grid: &[f64],
) -> f64 {
    let (g_hat, _) = eval_g_hat(params, t, x, cs, gamma, h_grid);
    g_star_slice(params, t, x, cs, h) + 0.5 * gamma.trace_with(&sigma_sigma_t(params, t, x, h)) - g_hat
}

/// Draw a random `(t, x, co-state)` inside the default sampling box.
pub fn sample_point(params: &ModelParams, rng: &mut impl Rng) -> (f64, CyberState, CoState) {
    let t = rng.random::<f64>() * params.horizon;
    let s = rng.random::<f64>();
    let i = rng.random::<f64>() * (1.0 - s);
    let p = 0.1 + 2.9 * rng.random::<f64>();
    let mut sym = || 10.0 * rng.random::<f64>() - 5.0;
    let cs = CoState {
        y: sym() * 0.4,
        z: [sym(), sym(), sym()],
        u: (0..params.mark_count()).map(|_| sym()).collect(),
    };
    (t, CyberState { p, s, i }, cs)
}

/// Max over sampled co-states of `|sup_a inf_h G - inf_h sup_a G|` with both
/// optimisations taken by brute force on uniform grids of `A` and `H`.
pub fn isaacs_gap(params: &ModelParams, samples: usize, seed: u64, a_points: usize, h_points: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Config("isaacs_gap needs a positive sample count".into()));
    }
    let a_grid = params.a_set.grid(a_points);
    let h_grid = params.h_set.grid(h_points);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = vec![0.0; a_grid.len() * h_grid.len()];
    let mut gap: f64 = 0.0;
    for _ in 0..samples {
        let (t, x, cs) = sample_point(params, &mut rng);
        for (ja, &a) in a_grid.iter().enumerate() {
            for (jh, &h) in h_grid.iter().enumerate() {
                table[ja * h_grid.len() + jh] = eval_g(params, t, &x, &cs, a, h)?;
            }
        }
        let sup_inf = (0..a_grid.len())
            .map(|ja| {
                table[ja * h_grid.len()..(ja + 1) * h_grid.len()]
                    .iter()
                    .fold(f64::INFINITY, |m, v| m.min(*v))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let inf_sup = (0..h_grid.len())
            .map(|jh| {
                (0..a_grid.len())
                    .map(|ja| table[ja * h_grid.len() + jh])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        gap = gap.max((sup_inf - inf_sup).abs());
    }
    Ok(gap)
}

/// True when the jump term carries the price factor.
pub fn jump_scaled(params: &ModelParams) -> bool {
    params.jump_scaling == JumpScaling::AsWritten
}
