//! Local monotone discretisation of `Q^{z,u,gamma,eta}[v]` at one node.
//!
//! The operator is assembled as nonnegative neighbour weights times value
//! differences, plus per-mark jump terms and `-C^P`:
//!
//! ```text
//! Q = sum_k w_k (v_k - v_0) + sum_k lambda_k (v(x_k+, y + J_k) - v_0) - C^P
//! ```
//!
//! Neighbours are the `p`, `s`, `i`, `y` axis points, the anti-diagonal
//! `w = (s - d, i + d)` points carrying the `(s, i)` diffusion, and the
//! diagonal points used by the `(p, y)` and `(w, y)` cross terms.

use crate::hamiltonian::Sym3;
use crate::model::{CyberState, ModelParams, Var};

use super::grid::{bracket, Grid4};
use super::SchemeFlags;

pub const NOFF: usize = 18;

pub const P_UP: usize = 0;
pub const P_DN: usize = 1;
pub const S_UP: usize = 2;
pub const S_DN: usize = 3;
pub const I_UP: usize = 4;
pub const I_DN: usize = 5;
/// Infection direction `(s - d, i + d)`.
pub const W_UP: usize = 6;
pub const W_DN: usize = 7;
pub const Y_UP: usize = 8;
pub const Y_DN: usize = 9;
const PY_UU: usize = 10;
const PY_DD: usize = 11;
const PY_UD: usize = 12;
const PY_DU: usize = 13;
const WY_UU: usize = 14;
const WY_DD: usize = 15;
const WY_UD: usize = 16;
const WY_DU: usize = 17;

/// Index offsets `(dp, ds, di, dy)` of every neighbour.
pub const OFFSETS: [[i32; 4]; NOFF] = [
    [1, 0, 0, 0],
    [-1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, -1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, -1, 0],
    [0, -1, 1, 0],
    [0, 1, -1, 0],
    [0, 0, 0, 1],
    [0, 0, 0, -1],
    [1, 0, 0, 1],
    [-1, 0, 0, -1],
    [1, 0, 0, -1],
    [-1, 0, 0, 1],
    [0, -1, 1, 1],
    [0, 1, -1, -1],
    [0, -1, 1, -1],
    [0, 1, -1, 1],
];

/// Coefficients that depend on the hacker action only.
#[derive(Clone, Debug)]
pub struct EtaData {
    pub h: f64,
    /// `sigma_price p`.
    pub sp: f64,
    /// `sigma_tilde s i`.
    pub g: f64,
    pub lam: Vec<f64>,
    pub lam_tot: f64,
    pub cp: f64,
    /// `b^c(t, x; 0, h)`.
    pub b0: [f64; 3],
    /// Rank-one diffusion weights on `P_UP`, `P_DN` and each `W` neighbour.
    pub w_pp_up: f64,
    pub w_pp_dn: f64,
    pub w_ww: f64,
    /// Aggregated-jump mode: `p` bracket of the mean post-jump price.
    agg_p: Option<(usize, f64)>,
    /// Aggregated-jump mode: intensity-weighted mark shares.
    agg_share: Vec<f64>,
}

/// Everything the operator needs at one node of one time slice.
#[derive(Clone, Debug)]
pub struct NodeCtx {
    pub t: f64,
    pub x: CyberState,
    pub y: f64,
    pub full: usize,
    pub v0: f64,
    pub diff: [f64; NOFF],
    pub has: [bool; NOFF],
    pub dp_up: f64,
    pub dp_dn: f64,
    pub dw: f64,
    pub dy: f64,
    pub scale: f64,
    /// `k y - agent jump cost`.
    pub gh_const: f64,
    pub eta: Vec<EtaData>,
    /// Per mark: `v(p(1 - c_k), s, i, .)` along the `y` axis.
    jump_cols: Vec<Vec<f64>>,
    /// `v(., s, i, .)` over the whole `p` x `y` plane, for aggregated jumps.
    plane: Vec<f64>,
    lam0: Vec<f64>,
    y_axis_lo: f64,
    y_axis_n: usize,
    y_axis_hi: f64,
}

/// Quantities that depend on the candidate but not on `eta`.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub z: [f64; 3],
    pub u: Vec<f64>,
    pub gamma: Sym3,
}

/// Per-candidate evaluation: the value at every `eta`, the induced effort and
/// whether every `eta` passes the monotonicity check.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub q: Vec<f64>,
    pub rate: Vec<f64>,
    pub a: f64,
    pub g_hat: f64,
}

fn interp_uniform(col: &[f64], lo: f64, hi: f64, n: usize, y: f64) -> f64 {
    if n == 1 {
        return col[0];
    }
    let h = (hi - lo) / (n - 1) as f64;
    if y <= lo {
        return col[0];
    }
    if y >= hi {
        return col[n - 1];
    }
    let j = (((y - lo) / h).floor() as usize).min(n - 2);
    let w = ((y - lo - j as f64 * h) / h).clamp(0.0, 1.0);
    col[j] * (1.0 - w) + col[j + 1] * w
}

/// Build the per-`eta` coefficient block.
pub fn eta_data(params: &ModelParams, grid: &Grid4, t: f64, x: &CyberState, h: f64, ctx: &NodeGeom, flags: &SchemeFlags) -> EtaData {
    let sp = params.sigma_price_at(t, x.i, h) * x.p;
    let g = params.sigma_tilde_at(t, h) * x.s * x.i;
    let lam: Vec<f64> = (0..params.mark_count())
        .map(|k| params.intensity_raw(k, t, x, h))
        .collect();
    let lam_tot: f64 = lam.iter().sum();
    let a_pp = sp * sp;
    let (w_pp_up, w_pp_dn) = if ctx.has_p_up && ctx.has_p_dn {
        let s = ctx.dp_up + ctx.dp_dn;
        (a_pp / (ctx.dp_up * s), a_pp / (ctx.dp_dn * s))
    } else {
        (0.0, 0.0)
    };
    let w_ww = if ctx.has_w_up && ctx.has_w_dn {
        g * g / (2.0 * ctx.dw * ctx.dw)
    } else {
        0.0
    };
    let (agg_p, agg_share) = if flags.aggregated_jump && lam_tot > 0.0 {
        let share: Vec<f64> = lam.iter().map(|l| l / lam_tot).collect();
        let loss: f64 = share.iter().zip(&params.marks).map(|(w, m)| w * m.loss).sum();
        (Some(bracket(&grid.p, x.p * (1.0 - loss))), share)
    } else {
        (None, Vec::new())
    };
    EtaData {
        h,
        sp,
        g,
        cp: params.principal_cost_unchecked(t, x, h),
        b0: params.drift_unchecked(t, x, 0.0, h),
        lam,
        lam_tot,
        w_pp_up,
        w_pp_dn,
        w_ww,
        agg_p,
        agg_share,
    }
}

/// Stencil geometry at a node.
#[derive(Clone, Copy, Debug)]
pub struct NodeGeom {
    pub dp_up: f64,
    pub dp_dn: f64,
    pub dw: f64,
    pub has_p_up: bool,
    pub has_p_dn: bool,
    pub has_w_up: bool,
    pub has_w_dn: bool,
}

impl NodeCtx {
    pub fn new(params: &ModelParams, grid: &Grid4, flags: &SchemeFlags, slice: &[f64], n: usize, full: usize, h_grid: &[f64]) -> NodeCtx {
        let t = grid.time(n);
        let (x, y) = grid.state(full);
        let (ip, is, ii, _) = grid.coords(full);
        let v0 = slice[full];
        let mut diff = [0.0; NOFF];
        let mut has = [false; NOFF];
        for k in 0..NOFF {
            if let Some(f) = grid.neighbor(full, OFFSETS[k]) {
                has[k] = true;
                diff[k] = slice[f] - v0;
            }
        }
        let np = grid.p.len();
        let dp_up = if ip + 1 < np { grid.p[ip + 1] - grid.p[ip] } else { f64::NAN };
        let dp_dn = if ip > 0 { grid.p[ip] - grid.p[ip - 1] } else { f64::NAN };
        let dw = if grid.s.len() > 1 { grid.s[1] - grid.s[0] } else { f64::NAN };
        let dy = if grid.y.len() > 1 { grid.y[1] - grid.y[0] } else { f64::NAN };
        let geom = NodeGeom {
            dp_up,
            dp_dn,
            dw,
            has_p_up: has[P_UP],
            has_p_dn: has[P_DN],
            has_w_up: has[W_UP],
            has_w_dn: has[W_DN],
        };
        let eta = h_grid
            .iter()
            .map(|&h| eta_data(params, grid, t, &x, h, &geom, flags))
            .collect();

        let ny = grid.y.len();
        let column = |jp: usize| -> Vec<f64> { (0..ny).map(|iy| slice[grid.full_index(jp, is, ii, iy)]).collect() };
        let jump_cols = if flags.aggregated_jump {
            Vec::new()
        } else {
            params
                .marks
                .iter()
                .map(|m| {
                    let (jp, wp) = bracket(&grid.p, x.p * (1.0 - m.loss));
                    if np == 1 || wp == 0.0 {
                        column(jp)
                    } else {
                        let (a, b) = (column(jp), column(jp + 1));
                        a.iter().zip(&b).map(|(a, b)| a * (1.0 - wp) + b * wp).collect()
                    }
                })
                .collect()
        };
        let plane = if flags.aggregated_jump {
            (0..np).flat_map(|jp| column(jp)).collect()
        } else {
            Vec::new()
        };
        NodeCtx {
            t,
            x,
            y,
            full,
            v0,
            diff,
            has,
            dp_up,
            dp_dn,
            dw,
            dy,
            scale: params.jump_scaling.factor(x.p),
            gh_const: params.k_at(t, &x) * y - params.agent_jump_cost.eval(&x.vars(t)),
            eta,
            jump_cols,
            plane,
            lam0: params.lambda0().to_vec(),
            y_axis_lo: grid.y[0],
            y_axis_hi: grid.y[ny - 1],
            y_axis_n: ny,
        }
    }

    pub fn geom(&self) -> NodeGeom {
        NodeGeom {
            dp_up: self.dp_up,
            dp_dn: self.dp_dn,
            dw: self.dw,
            has_p_up: self.has[P_UP],
            has_p_dn: self.has[P_DN],
            has_w_up: self.has[W_UP],
            has_w_dn: self.has[W_DN],
        }
    }

    /// Bounds on every `u_k` that keep `y + J_k` inside the `y` axis.
    pub fn jump_bounds(&self) -> (f64, f64) {
        if self.y_axis_n == 1 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        ((self.y_axis_lo - self.y) / self.scale, (self.y_axis_hi - self.y) / self.scale)
    }

    /// Interpolated value after a jump of size `jy` in `y` for mark `k`.
    #[inline]
    fn jump_value(&self, k: usize, jy: f64) -> f64 {
        interp_uniform(&self.jump_cols[k], self.y_axis_lo, self.y_axis_hi, self.y_axis_n, self.y + jy)
    }

    fn aggregated_jump_value(&self, e: &EtaData, jy: f64) -> f64 {
        let (jp, wp) = e.agg_p.expect("aggregated mode");
        let ny = self.y_axis_n;
        let col_a = &self.plane[jp * ny..(jp + 1) * ny];
        let va = interp_uniform(col_a, self.y_axis_lo, self.y_axis_hi, ny, self.y + jy);
        if wp == 0.0 {
            return va;
        }
        let col_b = &self.plane[(jp + 1) * ny..(jp + 2) * ny];
        let vb = interp_uniform(col_b, self.y_axis_lo, self.y_axis_hi, ny, self.y + jy);
        va * (1.0 - wp) + vb * wp
    }

    /// `x`-drift weights for effort `a` and hacker block `e`.
    #[inline]
    fn add_x_drift(&self, e: &EtaData, a: f64, w: &mut [f64; NOFF]) {
        let bp = e.b0[0];
        if bp > 0.0 && self.has[P_UP] {
            w[P_UP] += bp / self.dp_up;
        } else if bp < 0.0 && self.has[P_DN] {
            w[P_DN] -= bp / self.dp_dn;
        }
        let mut bs = e.b0[1] - a * self.x.s;
        let mut bi = e.b0[2];
        if bs < 0.0 && bi > 0.0 && self.has[W_UP] {
            let m = (-bs).min(bi);
            w[W_UP] += m / self.dw;
            bs += m;
            bi -= m;
        } else if bs > 0.0 && bi < 0.0 && self.has[W_DN] {
            let m = bs.min(-bi);
            w[W_DN] += m / self.dw;
            bs -= m;
            bi += m;
        }
        if bs > 0.0 && self.has[S_UP] {
            w[S_UP] += bs / self.dw;
        } else if bs < 0.0 && self.has[S_DN] {
            w[S_DN] -= bs / self.dw;
        }
        if bi > 0.0 && self.has[I_UP] {
            w[I_UP] += bi / self.dw;
        } else if bi < 0.0 && self.has[I_DN] {
            w[I_DN] -= bi / self.dw;
        }
    }

    /// Total rate of the `x` part (drift, diffusion, jumps) for effort `a`.
    pub fn x_rate(&self, e: &EtaData, a: f64) -> f64 {
        let mut w = [0.0; NOFF];
        self.add_x_drift(e, a, &mut w);
        w.iter().sum::<f64>() + e.w_pp_up + e.w_pp_dn + 2.0 * e.w_ww + e.lam_tot
    }

    /// `G_hat` for a candidate over the node's `h` grid, given the effort.
    pub fn g_hat(&self, params: &ModelParams, c: &Candidate, a: f64) -> f64 {
        let x = &self.x;
        let ga = -params.effort_cost_at(self.t, x, a) - a * x.s * c.z[1];
        let gam = &c.gamma.0;
        let gq = gam[1][1] + gam[2][2] - 2.0 * gam[1][2];
        let mut hmin = f64::INFINITY;
        for e in &self.eta {
            let zb = c.z[0] * e.b0[0] + c.z[1] * e.b0[1] + c.z[2] * e.b0[2];
            let mut ju = 0.0;
            for (k, u) in c.u.iter().enumerate() {
                ju += u * (e.lam[k] - self.lam0[k]);
            }
            let tr = 0.5 * (e.sp * e.sp * gam[0][0] + e.g * e.g * gq);
            hmin = hmin.min(self.gh_const + zb + self.scale * ju + tr);
        }
        ga + hmin
    }

    /// Jump sizes in `y` and, in per-mark mode, the interpolated differences.
    fn jump_parts(&self, flags: &SchemeFlags, c: &Candidate) -> (Vec<f64>, Vec<f64>) {
        let jumps: Vec<f64> = c.u.iter().map(|u| self.scale * u).collect();
        let d = if flags.aggregated_jump {
            Vec::new()
        } else {
            (0..jumps.len()).map(|k| self.jump_value(k, jumps[k]) - self.v0).collect()
        };
        (jumps, d)
    }

    /// Value and total rate of `Q` at one hacker block.
    #[allow(clippy::too_many_arguments)]
    fn q_at(&self, flags: &SchemeFlags, c: &Candidate, a: f64, g_hat: f64, e: &EtaData, jumps: &[f64], jump_d: &[f64]) -> (f64, f64) {
        let x = &self.x;
        let gam = &c.gamma.0;
        let gq = gam[1][1] + gam[2][2] - 2.0 * gam[1][2];
        let comp: f64 = jumps.iter().zip(&self.lam0).map(|(j, l)| j * l).sum();
        // y drift: z . b^c(a, eta) + Tr/2 - G_hat - sum_k J_k lambda0_k.
        let zb = c.z[0] * e.b0[0] + c.z[1] * (e.b0[1] - a * x.s) + c.z[2] * e.b0[2];
        let tr = 0.5 * (e.sp * e.sp * gam[0][0] + e.g * e.g * gq);
        let by = zb + tr - g_hat - comp;

        let mut w = [0.0; NOFF];
        self.add_x_drift(e, a, &mut w);
        w[P_UP] += e.w_pp_up;
        w[P_DN] += e.w_pp_dn;
        w[W_UP] += e.w_ww;
        w[W_DN] += e.w_ww;
        // Outward y drift at a y face uses the linearly extrapolated ghost
        // value, so fields affine in y are transported exactly.
        if by > 0.0 {
            if self.has[Y_UP] {
                w[Y_UP] += by / self.dy;
            } else if self.has[Y_DN] {
                w[Y_DN] -= by / self.dy;
            }
        } else if by < 0.0 {
            if self.has[Y_DN] {
                w[Y_DN] -= by / self.dy;
            } else if self.has[Y_UP] {
                w[Y_UP] += by / self.dy;
            }
        }
        let (e1y, e2y) = if flags.literal_sigma_row {
            (c.z[0], c.z[1])
        } else {
            (e.sp * c.z[0], e.g * (c.z[2] - c.z[1]))
        };
        if e1y != 0.0 || e2y != 0.0 {
            self.add_y_diffusion(e, e1y, e2y, &mut w);
        }

        let mut q = 0.0;
        let mut rate = 0.0;
        for k in 0..NOFF {
            q += w[k] * self.diff[k];
            rate += w[k];
        }
        if flags.aggregated_jump {
            if e.lam_tot > 0.0 {
                let jy: f64 = e.agg_share.iter().zip(jumps).map(|(s, j)| s * j).sum();
                q += e.lam_tot * (self.aggregated_jump_value(e, jy) - self.v0);
            }
        } else {
            for (l, d) in e.lam.iter().zip(jump_d) {
                q += l * d;
            }
        }
        (q - e.cp, rate + e.lam_tot)
    }

    /// Evaluate every `eta` block of the node's `h` grid for one candidate.
    pub fn evaluate(&self, params: &ModelParams, flags: &SchemeFlags, c: &Candidate, a: f64, out: &mut Evaluation) {
        let g_hat = self.g_hat(params, c, a);
        let (jumps, jump_d) = self.jump_parts(flags, c);
        let ne = self.eta.len();
        out.q.resize(ne, 0.0);
        out.rate.resize(ne, 0.0);
        for (j, e) in self.eta.iter().enumerate() {
            let (q, r) = self.q_at(flags, c, a, g_hat, e, &jumps, &jump_d);
            out.q[j] = q;
            out.rate[j] = r;
        }
        out.a = a;
        out.g_hat = g_hat;
    }

    /// `Q` at a single hacker block `e`, with `G_hat` still taken over the
    /// node's `h` grid.
    pub fn evaluate_single(&self, params: &ModelParams, flags: &SchemeFlags, c: &Candidate, a: f64, e: &EtaData) -> (f64, f64) {
        let g_hat = self.g_hat(params, c, a);
        let (jumps, jump_d) = self.jump_parts(flags, c);
        self.q_at(flags, c, a, g_hat, e, &jumps, &jump_d)
    }

    /// `y`-row diffusion with cross terms, clipped so that no axis weight
    /// turns negative.
    fn add_y_diffusion(&self, e: &EtaData, e1y: f64, e2y: f64, w: &mut [f64; NOFF]) {
        let ayy = e1y * e1y + e2y * e2y;
        if self.has[Y_UP] && self.has[Y_DN] {
            let c = ayy / (2.0 * self.dy * self.dy);
            w[Y_UP] += c;
            w[Y_DN] += c;
        }
        let mut cross = [0.0; NOFF];
        let dy = self.dy;
        // (p, y): coefficient sp * e1y on v_py.
        let cpy = e.sp * e1y;
        if cpy != 0.0 && self.has[P_UP] && self.has[P_DN] && self.has[Y_UP] && self.has[Y_DN] {
            let (ku, kd) = (cpy.abs() / (2.0 * self.dp_up * dy), cpy.abs() / (2.0 * self.dp_dn * dy));
            if cpy > 0.0 && self.has[PY_UU] && self.has[PY_DD] {
                cross[PY_UU] += ku;
                cross[PY_DD] += kd;
                cross[P_UP] -= ku;
                cross[Y_UP] -= ku;
                cross[P_DN] -= kd;
                cross[Y_DN] -= kd;
            } else if cpy < 0.0 && self.has[PY_UD] && self.has[PY_DU] {
                cross[PY_UD] += ku;
                cross[PY_DU] += kd;
                cross[P_UP] -= ku;
                cross[Y_DN] -= ku;
                cross[P_DN] -= kd;
                cross[Y_UP] -= kd;
            }
        }
        // (w, y): coefficient g * e2y on v_wy.
        let cwy = e.g * e2y;
        if cwy != 0.0 && self.has[W_UP] && self.has[W_DN] && self.has[Y_UP] && self.has[Y_DN] {
            let k = cwy.abs() / (2.0 * self.dw * dy);
            if cwy > 0.0 && self.has[WY_UU] && self.has[WY_DD] {
                cross[WY_UU] += k;
                cross[WY_DD] += k;
                cross[W_UP] -= k;
                cross[Y_UP] -= k;
                cross[W_DN] -= k;
                cross[Y_DN] -= k;
            } else if cwy < 0.0 && self.has[WY_UD] && self.has[WY_DU] {
                cross[WY_UD] += k;
                cross[WY_DU] += k;
                cross[W_UP] -= k;
                cross[Y_DN] -= k;
                cross[W_DN] -= k;
                cross[Y_UP] -= k;
            }
        }
        let mut theta: f64 = 1.0;
        for k in 0..NOFF {
            if cross[k] < 0.0 {
                theta = theta.min(w[k].max(0.0) / -cross[k]);
            }
        }
        if theta > 0.0 {
            for k in 0..NOFF {
                if cross[k] > 0.0 {
                    w[k] += theta * cross[k];
                } else if cross[k] < 0.0 {
                    w[k] = (w[k] + theta * cross[k]).max(0.0);
                }
            }
        }
    }
}

/// First mark whose intensity depends linearly on `h`, with the slopes of
/// every mark.
pub fn hacker_mark(params: &ModelParams) -> (Option<usize>, Vec<f64>) {
    let slopes: Vec<f64> = params.marks.iter().map(|m| m.intensity.linear(Var::H)).collect();
    (slopes.iter().position(|l| *l != 0.0), slopes)
}
