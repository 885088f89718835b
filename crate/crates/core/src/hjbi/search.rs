//! Per-node max-min control search.
//!
//! The effort is the closed-form best response and the hacker action is an
//! exact scan over the `h` grid. The contract controls `(z, u, gamma)` are
//! found by a compass search on nested box grids, coarse to fine, in the
//! coordinates
//!
//! ```text
//! (z_p, z_s, d = z_i - z_s, c1, u_k (k != k_h), gamma_pp, gamma_ss, gamma_ii [, gamma_si, gamma_ps, gamma_pi])
//! ```
//!
//! where `c1 = s d + scale sum_k slope_k u_k` is the `h`-slope of `G_h` and
//! replaces `u` of the first `h`-dependent mark `k_h`. The search starts at
//! the origin and every level grid contains the previous one, so refining the
//! finest level never lowers the result.
//!
//! Besides the constant box, every `u_k` is limited so that the post-jump `y`
//! stays on the `y` axis; the value beyond the axis is unknown and clamping it
//! would reward jumps out of the box.

use serde::{Deserialize, Serialize};

use crate::hamiltonian::{best_response_alpha, Sym3};
use crate::model::ModelParams;

use super::operator::{hacker_mark, Candidate, Evaluation, NodeCtx};
use super::SchemeFlags;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Box half-width for every `z`, `u` and `gamma` entry.
    pub radius: f64,
    /// Points per control axis on the finest level (odd).
    pub control_points: usize,
    /// Points of the hacker grid over `H`.
    pub h_points: usize,
    /// Search the off-diagonal entries of `gamma` too.
    pub full_gamma: bool,
    /// Cap on compass sweeps per level.
    pub max_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            radius: 5.0,
            control_points: 41,
            h_points: 11,
            full_gamma: false,
            max_sweeps: 200,
        }
    }
}

impl SearchConfig {
    /// Points per axis of each level, coarse to fine.
    pub fn levels(&self) -> Vec<usize> {
        let mut n = self.control_points;
        if n <= 1 || self.radius <= 0.0 {
            return Vec::new();
        }
        let mut out = vec![n];
        while n % 2 == 1 && n >= 5 {
            let m = (n - 1) / 2 + 1;
            if m % 2 == 0 || m < 11 {
                break;
            }
            out.push(m);
            n = m;
        }
        out.reverse();
        out
    }

    pub fn gamma_dims(&self) -> usize {
        if self.full_gamma {
            6
        } else {
            3
        }
    }
}

/// Contract controls at one node, in original coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPoint {
    pub z: [f64; 3],
    pub u: Vec<f64>,
    pub gamma: Sym3,
    pub h: f64,
    pub a: f64,
}

impl ControlPoint {
    pub fn zero(marks: usize, h: f64, a: f64) -> Self {
        ControlPoint {
            z: [0.0; 3],
            u: vec![0.0; marks],
            gamma: Sym3::zero(),
            h,
            a,
        }
    }

    pub fn candidate(&self) -> Candidate {
        Candidate {
            z: self.z,
            u: self.u.clone(),
            gamma: self.gamma,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.z
            .iter()
            .chain(self.u.iter())
            .fold(self.gamma.max_abs(), |m, v| m.max(v.abs()))
    }
}

/// Result of [`optimize_node`].
#[derive(Clone, Debug, PartialEq)]
pub struct NodeOptimum {
    pub q: f64,
    pub cp: ControlPoint,
    /// `false` when no candidate passed the monotonicity check and the origin
    /// was used regardless.
    pub monotone: bool,
    /// Some coordinate sits on the box boundary.
    pub radius_hit: bool,
    /// Largest `dt * rate` over the `h` grid at the optimum.
    pub dt_rate: f64,
}

struct Reparam {
    kh: Option<usize>,
    slopes: Vec<f64>,
    s: f64,
    scale: f64,
    radius: f64,
    u_lo: f64,
    u_hi: f64,
    gamma_dims: usize,
}

impl Reparam {
    fn candidate(&self, c: &[f64]) -> Option<Candidate> {
        let m = self.slopes.len();
        let d = c[2];
        let z = [c[0], c[1], c[1] + d];
        let mut u: Vec<f64> = c[3..3 + m].to_vec();
        if let Some(kh) = self.kh {
            let other: f64 = (0..m).filter(|&k| k != kh).map(|k| self.slopes[k] * u[k]).sum();
            u[kh] = (c[3 + kh] - self.s * d - self.scale * other) / (self.scale * self.slopes[kh]);
            if u[kh].abs() > self.radius * (1.0 + 1e-12) {
                return None;
            }
        }
        let tol = 1e-12 * (1.0 + self.radius);
        if u.iter().any(|v| *v < self.u_lo - tol || *v > self.u_hi + tol) {
            return None;
        }
        if z[2].abs() > self.radius * (1.0 + 1e-12) {
            return None;
        }
        let g = &c[3 + m..];
        let mut gamma = Sym3::diag([g[0], g[1], g[2]]);
        if self.gamma_dims == 6 {
            gamma.0[1][2] = g[3];
            gamma.0[2][1] = g[3];
            gamma.0[0][1] = g[4];
            gamma.0[1][0] = g[4];
            gamma.0[0][2] = g[5];
            gamma.0[2][0] = g[5];
        }
        Some(Candidate { z, u, gamma })
    }
}

/// Max-min search at one node. `dt` is the time step used for the
/// monotonicity check `dt * rate <= 1` at every `h` of the grid.
pub fn optimize_node(params: &ModelParams, flags: &SchemeFlags, ctx: &NodeCtx, search: &SearchConfig, dt: f64) -> NodeOptimum {
    let m = params.mark_count();
    let (kh, slopes) = hacker_mark(params);
    let rp = Reparam {
        kh,
        slopes,
        s: ctx.x.s,
        scale: ctx.scale,
        radius: search.radius,
        u_lo: ctx.jump_bounds().0,
        u_hi: ctx.jump_bounds().1,
        gamma_dims: search.gamma_dims(),
    };
    let nc = 3 + m + rp.gamma_dims;
    let mut ev = Evaluation {
        q: Vec::new(),
        rate: Vec::new(),
        a: 0.0,
        g_hat: 0.0,
    };

    // Returns (min_h Q, argmin index, max dt * rate) for a candidate.
    let mut eval = |cand: &Candidate| -> (f64, usize, f64) {
        let a = best_response_alpha(params, ctx.t, &ctx.x, &cand.z);
        ctx.evaluate(params, flags, cand, a, &mut ev);
        let (mut q, mut j) = (f64::INFINITY, 0);
        for (k, v) in ev.q.iter().enumerate() {
            if *v < q {
                q = *v;
                j = k;
            }
        }
        let r = ev.rate.iter().fold(0.0f64, |m, r| m.max(*r)) * dt;
        (q, j, r)
    };
    let feasible = |r: f64| r <= 1.0 + 1e-12;

    let levels = search.levels();
    let finest = levels.last().copied().unwrap_or(1);
    let half = (finest as i64 - 1) / 2;
    let unit = if half > 0 { search.radius / half as f64 } else { 0.0 };
    let mut idx = vec![0i64; nc];
    let coords = |idx: &[i64]| -> Vec<f64> { idx.iter().map(|k| *k as f64 * unit).collect() };

    let origin = rp.candidate(&coords(&idx)).expect("origin is inside the box");
    let (mut q, mut j, mut r) = eval(&origin);
    let mut best = origin;
    let monotone = feasible(r);

    if monotone {
        for (l, _) in levels.iter().enumerate() {
            let step = 1i64 << (levels.len() - 1 - l);
            for _ in 0..search.max_sweeps {
                let mut improved = false;
                for k in 0..nc {
                    for sign in [-1i64, 1] {
                        let v = idx[k] + sign * step;
                        if v.abs() > half {
                            continue;
                        }
                        idx[k] = v;
                        if let Some(c) = rp.candidate(&coords(&idx)) {
                            let (qc, jc, rc) = eval(&c);
                            if feasible(rc) && qc > q + 1e-12 * (1.0 + q.abs()) {
                                q = qc;
                                j = jc;
                                r = rc;
                                best = c;
                                improved = true;
                                continue;
                            }
                        }
                        idx[k] -= sign * step;
                    }
                }
                if !improved {
                    break;
                }
            }
        }
    }

    let radius_hit = half > 0 && idx.iter().any(|k| k.abs() == half);
    let a = best_response_alpha(params, ctx.t, &ctx.x, &best.z);
    NodeOptimum {
        q,
        cp: ControlPoint {
            z: best.z,
            u: best.u,
            gamma: best.gamma,
            h: ctx.eta[j].h,
            a,
        },
        monotone,
        radius_hit,
        dt_rate: r,
    }
}
