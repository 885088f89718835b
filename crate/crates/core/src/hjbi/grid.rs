//! Four-dimensional `(p, s, i, y)` grid with a simplex mask on `(s, i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CyberState, ModelParams};

/// Marker for masked nodes in [`Grid4::slot`].
pub const MASKED: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub n_p: usize,
    /// Node count shared by the `s` and `i` axes.
    pub n_si: usize,
    pub n_y: usize,
    pub n_t: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// `y` bounds; `None` centres a width-4 window on the reservation value.
    pub y_bounds: Option<(f64, f64)>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::cube(17)
    }
}

impl GridConfig {
    /// `n` nodes on every axis and `4 (n - 1)` time steps.
    pub fn cube(n: usize) -> Self {
        GridConfig {
            n_p: n,
            n_si: n,
            n_y: n,
            n_t: 4 * n.saturating_sub(1).max(1),
            p_min: (-1.0f64).exp(),
            p_max: 1.0f64.exp(),
            y_bounds: None,
        }
    }
}

/// Grid axes, time stepping and the retained-node index.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid4 {
    pub p: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub y: Vec<f64>,
    pub n_t: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Full indices of retained nodes, increasing.
    pub retained: Vec<usize>,
    /// Full index to retained slot, or [`MASKED`].
    pub slot: Vec<u32>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
        .collect()
}

/// Build the grid for `params` from `config`.
pub fn build_grid(config: &GridConfig, params: &ModelParams) -> Result<Grid4> {
    let GridConfig { n_p, n_si, n_y, n_t, p_min, p_max, .. } = *config;
    if n_p == 0 || n_si == 0 || n_y == 0 || n_t == 0 {
        return Err(Error::Config("grid node counts and time steps must be positive".into()));
    }
    if !(p_min > 0.0 && p_max > p_min) && n_p > 1 {
        return Err(Error::Config(format!("price axis bounds [{p_min}, {p_max}] must satisfy 0 < min < max")));
    }
    let (y_lo, y_hi) = config
        .y_bounds
        .unwrap_or((params.reservation - 2.0, params.reservation + 2.0));
    if !(y_hi > y_lo) && n_y > 1 {
        return Err(Error::Config(format!("y-axis bounds [{y_lo}, {y_hi}] are empty")));
    }
    let p = if n_p == 1 {
        vec![params.x0.p]
    } else {
        let (a, b) = (p_min.ln(), p_max.ln());
        linspace(a, b, n_p).into_iter().map(f64::exp).collect()
    };
    let (s, i) = if n_si == 1 {
        (vec![params.x0.s], vec![params.x0.i])
    } else {
        (linspace(0.0, 1.0, n_si), linspace(0.0, 1.0, n_si))
    };
    let y = if n_y == 1 { vec![params.reservation] } else { linspace(y_lo, y_hi, n_y) };

    // U_A^{-1}(y - F^A(x)) must exist at every node.
    let y_top = *y.last().expect("nonempty axis");
    let sup = params.utility.range_sup();
    if sup.is_finite() {
        for &pp in &p {
            for &ss in &s {
                for &ii in &i {
                    if ss + ii > 1.0 + 1e-12 {
                        continue;
                    }
                    let fa = params.terminal_agent_at(&CyberState { p: pp, s: ss, i: ii });
                    if y_top - fa >= sup {
                        return Err(Error::Config(format!(
                            "y-axis top {y_top} leaves U_A^-1 undefined at (p, s, i) = ({pp}, {ss}, {ii}); lower the y bound below {}",
                            sup + fa
                        )));
                    }
                }
            }
        }
    }

    let total = n_p * s.len() * i.len() * n_y;
    let mut slot = vec![MASKED; total];
    let mut retained = Vec::new();
    for ip in 0..n_p {
        for is in 0..s.len() {
            for ii in 0..i.len() {
                if s[is] + i[ii] > 1.0 + 1e-12 {
                    continue;
                }
                for iy in 0..n_y {
                    let full = ((ip * s.len() + is) * i.len() + ii) * n_y + iy;
                    slot[full] = retained.len() as u32;
                    retained.push(full);
                }
            }
        }
    }
    Ok(Grid4 {
        p,
        s,
        i,
        y,
        n_t,
        dt: params.horizon / n_t as f64,
        horizon: params.horizon,
        retained,
        slot,
    })
}

/// Retained corners and weights of a multilinear interpolation.
#[derive(Clone, Copy, Debug)]
pub struct Corners {
    pub slots: [u32; 16],
    pub weights: [f64; 16],
    pub len: usize,
}

/// Bracket `v` on a sorted axis: lower index and weight of the upper node,
/// clamped to the axis ends.
#[inline]
pub fn bracket(axis: &[f64], v: f64) -> (usize, f64) {
    let n = axis.len();
    if n == 1 || v <= axis[0] {
        return (0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let j = axis.partition_point(|a| *a <= v).saturating_sub(1).min(n - 2);
    (j, (v - axis[j]) / (axis[j + 1] - axis[j]))
}

/// Bracket on a uniform axis.
#[inline]
pub fn bracket_uniform(axis: &[f64], v: f64) -> (usize, f64) {
    let n = axis.len();
    if n == 1 || v <= axis[0] {
        return (0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let h = (axis[n - 1] - axis[0]) / (n - 1) as f64;
    let j = (((v - axis[0]) / h).floor() as usize).min(n - 2);
    (j, ((v - axis[j]) / h).clamp(0.0, 1.0))
}

impl Grid4 {
    pub fn n_s(&self) -> usize {
        self.s.len()
    }

    pub fn n_i(&self) -> usize {
        self.i.len()
    }

    pub fn total_len(&self) -> usize {
        self.slot.len()
    }

    pub fn node_count(&self) -> usize {
        self.retained.len()
    }

    #[inline]
    pub fn full_index(&self, ip: usize, is: usize, ii: usize, iy: usize) -> usize {
        ((ip * self.s.len() + is) * self.i.len() + ii) * self.y.len() + iy
    }

    #[inline]
    pub fn coords(&self, full: usize) -> (usize, usize, usize, usize) {
        let ny = self.y.len();
        let ni = self.i.len();
        let ns = self.s.len();
        let iy = full % ny;
        let r = full / ny;
        let ii = r % ni;
        let r = r / ni;
        (r / ns, r % ns, ii, iy)
    }

    /// Full index of the neighbour at integer offset, if retained.
    #[inline]
    pub fn neighbor(&self, full: usize, d: [i32; 4]) -> Option<usize> {
        let (ip, is, ii, iy) = self.coords(full);
        let shift = |v: usize, dv: i32, n: usize| -> Option<usize> {
            let w = v as i64 + dv as i64;
            (w >= 0 && (w as usize) < n).then_some(w as usize)
        };
        let f = self.full_index(
            shift(ip, d[0], self.p.len())?,
            shift(is, d[1], self.s.len())?,
            shift(ii, d[2], self.i.len())?,
            shift(iy, d[3], self.y.len())?,
        );
        (self.slot[f] != MASKED).then_some(f)
    }

    pub fn state(&self, full: usize) -> (CyberState, f64) {
        let (ip, is, ii, iy) = self.coords(full);
        (
            CyberState {
                p: self.p[ip],
                s: self.s[is],
                i: self.i[ii],
            },
            self.y[iy],
        )
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.n_t {
            self.horizon
        } else {
            n as f64 * self.dt
        }
    }

    /// Time slice whose step contains `t`.
    pub fn slice_at(&self, t: f64) -> usize {
        ((t / self.dt + 1e-9).floor().max(0.0) as usize).min(self.n_t - 1)
    }

    /// Multilinear interpolation stencil at `(x, y)`, clamped to the box.
    /// Masked corners are dropped and the remaining weights renormalised.
    pub fn corners(&self, x: &CyberState, y: f64) -> Corners {
        let (jp, wp) = bracket(&self.p, x.p);
        let (js, ws) = bracket_uniform(&self.s, x.s);
        let (ji, wi) = bracket_uniform(&self.i, x.i);
        let (jy, wy) = bracket_uniform(&self.y, y);
        let axis = |j: usize, w: f64, n: usize| -> [(usize, f64); 2] {
            if n == 1 {
                [(0, 1.0), (0, 0.0)]
            } else {
                [(j, 1.0 - w), (j + 1, w)]
            }
        };
        let ap = axis(jp, wp, self.p.len());
        let as_ = axis(js, ws, self.s.len());
        let ai = axis(ji, wi, self.i.len());
        let ay = axis(jy, wy, self.y.len());
        let mut out = Corners {
            slots: [0; 16],
            weights: [0.0; 16],
            len: 0,
        };
        let mut total = 0.0;
        for (ip, wp) in ap {
            for (is, ws) in as_ {
                for (ii, wi) in ai {
                    for (iy, wy) in ay {
                        let w = wp * ws * wi * wy;
                        if w == 0.0 {
                            continue;
                        }
                        let slot = self.slot[self.full_index(ip, is, ii, iy)];
                        if slot == MASKED {
                            continue;
                        }
                        out.slots[out.len] = slot;
                        out.weights[out.len] = w;
                        out.len += 1;
                        total += w;
                    }
                }
            }
        }
        if out.len == 0 {
            // Every positive-weight corner is masked: fall back to the nearest
            // retained node along the hypotenuse direction.
            let is = if ws > 0.5 { js + 1 } else { js }.min(self.s.len() - 1);
            let mut ii = if wi > 0.5 { ji + 1 } else { ji }.min(self.i.len() - 1);
            while ii > 0 && self.s[is] + self.i[ii] > 1.0 + 1e-12 {
                ii -= 1;
            }
            let ip = if wp > 0.5 { jp + 1 } else { jp }.min(self.p.len() - 1);
            let iy = if wy > 0.5 { jy + 1 } else { jy }.min(self.y.len() - 1);
            out.slots[0] = self.slot[self.full_index(ip, is, ii, iy)];
            out.weights[0] = 1.0;
            out.len = 1;
        } else if total != 1.0 {
            for w in out.weights.iter_mut().take(out.len) {
                *w /= total;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_counts() {
        let m = ModelParams::default();
        let g = build_grid(&GridConfig::default(), &m).unwrap();
        assert_eq!(g.node_count(), 17 * 153 * 17);
        assert!(g.node_count() <= 17usize.pow(4));
        for w in g.p.windows(3) {
            assert!((w[1] / w[0] - w[2] / w[1]).abs() < 1e-12);
        }
        for &f in &g.retained {
            let (x, _) = g.state(f);
            assert!(x.s + x.i <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn single_point_grid() {
        let m = ModelParams::default();
        let cfg = GridConfig {
            n_p: 1,
            n_si: 1,
            n_y: 1,
            n_t: 4,
            ..GridConfig::default()
        };
        let g = build_grid(&cfg, &m).unwrap();
        assert_eq!(g.node_count(), 1);
        let (x, y) = g.state(g.retained[0]);
        assert_eq!((x, y), (m.x0, m.reservation));
    }

    #[test]
    fn coords_roundtrip_and_neighbors() {
        let m = ModelParams::default();
        let g = build_grid(&GridConfig::cube(5), &m).unwrap();
        for &f in &g.retained {
            let (a, b, c, d) = g.coords(f);
            assert_eq!(g.full_index(a, b, c, d), f);
        }
        let f = g.full_index(2, 4, 0, 2);
        assert!(g.neighbor(f, [0, 0, 1, 0]).is_none());
        assert!(g.neighbor(f, [0, -1, 1, 0]).is_some());
    }

    #[test]
    fn exponential_utility_checks_y_range() {
        let m = ModelParams::default().with(|m| m.utility = crate::model::Utility::Exponential);
        let cfg = GridConfig {
            y_bounds: Some((-1.0, 0.5)),
            ..GridConfig::cube(5)
        };
        // F^A = -i reaches -1 so y - F^A reaches 1.5.
        assert!(matches!(build_grid(&cfg, &m), Err(Error::Config(_))));
    }

    #[test]
    fn interpolation_reproduces_multilinear_fields() {
        let m = ModelParams::default();
        let g = build_grid(&GridConfig::cube(5), &m).unwrap();
        let f = |x: &CyberState, y: f64| 2.0 * x.p - x.i + 0.5 * x.s - 3.0 * y + x.p * y;
        let vals: Vec<f64> = g
            .retained
            .iter()
            .map(|&k| {
                let (x, y) = g.state(k);
                f(&x, y)
            })
            .collect();
        let x = CyberState { p: 1.37, s: 0.31, i: 0.22 };
        let c = g.corners(&x, -0.4);
        let v: f64 = (0..c.len).map(|k| c.weights[k] * vals[c.slots[k] as usize]).sum();
        assert!((v - f(&x, -0.4)).abs() < 1e-12);
    }
}
