//! Field export.
//!
//! CSV: one row per retained node of a slice with columns
//! `t, p, s, i, y, v` followed, for slices before the horizon, by
//! `z_p, z_s, z_i, u_<mark>..., gamma_pp, gamma_ss, gamma_ii, gamma_si,
//! gamma_ps, gamma_pi, h, a`. The first line is `# manifest <hash>`.
//!
//! Binary dump (little endian): magic `CCHJ`, format version `u32`, the
//! manifest hash as a `u32` length plus UTF-8 bytes, then `u64` counts
//! `n_p, n_s, n_i, n_y, n_t, marks`, the four axes, the horizon, every value
//! slice over the full grid (NaN on masked nodes) and every policy slice over
//! retained nodes.

use std::io::{Read, Write};

use super::{Grid4, PolicyField, ValueField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CCHJ";
pub const FORMAT_VERSION: u32 = 1;

pub fn csv_header(marks: &[String], with_policy: bool) -> Vec<String> {
    let mut h: Vec<String> = ["t", "p", "s", "i", "y", "v"].iter().map(|s| s.to_string()).collect();
    if with_policy {
        h.extend(["z_p", "z_s", "z_i"].iter().map(|s| s.to_string()));
        h.extend(marks.iter().map(|m| format!("u_{m}")));
        h.extend(
            ["gamma_pp", "gamma_ss", "gamma_ii", "gamma_si", "gamma_ps", "gamma_pi", "h", "a"]
                .iter()
                .map(|s| s.to_string()),
        );
    }
    h
}

/// Write slice `n` of the value field (and its policy when `n < n_t`).
pub fn write_slice_csv<W: Write>(
    grid: &Grid4,
    value: &ValueField,
    policy: &PolicyField,
    marks: &[String],
    n: usize,
    mut out: W,
    manifest_hash: &str,
) -> Result<()> {
    if n > grid.n_t {
        return Err(Error::Config(format!("slice {n} beyond the last time step {}", grid.n_t)));
    }
    writeln!(out, "# manifest {manifest_hash}")?;
    let with_policy = n < grid.n_t;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(marks, with_policy))?;
    let st = policy.stride();
    let t = grid.time(n);
    for (slot, &f) in grid.retained.iter().enumerate() {
        let (x, y) = grid.state(f);
        let mut rec: Vec<String> = [t, x.p, x.s, x.i, y, value.slices[n][f]]
            .iter()
            .map(|v| format!("{v:.17e}"))
            .collect();
        if with_policy {
            rec.extend(policy.slices[n][slot * st..(slot + 1) * st].iter().map(|v| format!("{v:.17e}")));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn put_f64s<W: Write>(out: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(grid: &Grid4, value: &ValueField, policy: &PolicyField, mut out: W, manifest_hash: &str) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(manifest_hash.len() as u32).to_le_bytes())?;
    out.write_all(manifest_hash.as_bytes())?;
    for n in [grid.p.len(), grid.s.len(), grid.i.len(), grid.y.len(), grid.n_t, policy.marks] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    put_f64s(&mut out, &grid.p)?;
    put_f64s(&mut out, &grid.s)?;
    put_f64s(&mut out, &grid.i)?;
    put_f64s(&mut out, &grid.y)?;
    put_f64s(&mut out, &[grid.horizon])?;
    for s in &value.slices {
        put_f64s(&mut out, s)?;
    }
    for s in &policy.slices {
        put_f64s(&mut out, s)?;
    }
    Ok(())
}

/// Contents of a binary dump.
#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub manifest_hash: String,
    pub axes: [Vec<f64>; 4],
    pub n_t: usize,
    pub horizon: f64,
    pub value: ValueField,
    pub policy: PolicyField,
}

pub fn read_binary<R: Read>(mut inp: R) -> Result<Dump> {
    let mut buf4 = [0u8; 4];
    inp.read_exact(&mut buf4)?;
    if &buf4 != MAGIC {
        return Err(Error::Parse("not a field dump (bad magic)".into()));
    }
    inp.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != FORMAT_VERSION {
        return Err(Error::Parse(format!("unsupported dump version {version}")));
    }
    inp.read_exact(&mut buf4)?;
    let mut hash = vec![0u8; u32::from_le_bytes(buf4) as usize];
    inp.read_exact(&mut hash)?;
    let manifest_hash = String::from_utf8(hash).map_err(|e| Error::Parse(e.to_string()))?;
    let mut dims = [0usize; 6];
    for d in dims.iter_mut() {
        let mut b = [0u8; 8];
        inp.read_exact(&mut b)?;
        *d = u64::from_le_bytes(b) as usize;
    }
    let mut f64s = |n: usize| -> Result<Vec<f64>> {
        let mut raw = vec![0u8; n * 8];
        inp.read_exact(&mut raw)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    };
    let [np, ns, ni, ny, n_t, marks] = dims;
    let axes = [f64s(np)?, f64s(ns)?, f64s(ni)?, f64s(ny)?];
    let horizon = f64s(1)?[0];
    let total = np * ns * ni * ny;
    let retained = (0..np * ns * ni)
        .filter(|k| {
            let (is, ii) = ((k / ni) % ns, k % ni);
            axes[1][is] + axes[2][ii] <= 1.0 + 1e-12
        })
        .count()
        * ny;
    let value = ValueField {
        slices: (0..=n_t).map(|_| f64s(total)).collect::<Result<_>>()?,
    };
    let st = 3 + marks + 8;
    let policy = PolicyField {
        marks,
        slices: (0..n_t).map(|_| f64s(retained * st)).collect::<Result<_>>()?,
    };
    Ok(Dump {
        manifest_hash,
        axes,
        n_t,
        horizon,
        value,
        policy,
    })
}
