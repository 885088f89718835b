//! SimBatch export.
//!
//! Path table columns, in order: `path, step, t, p, s, i, a, h`. The control
//! columns of the final row of each path repeat the last applied controls.
//! Summary lines are JSON objects with keys `path, p_T, s_T, i_T, jumps,
//! dd_weight, agent_cost, principal_cost, discount` plus `y_T` when present.
//! Both formats start with a `# manifest <hash>` line.

use std::io::Write;

use serde::Serialize;

use super::SimBatch;
use crate::error::Result;

pub const PATH_COLUMNS: [&str; 8] = ["path", "step", "t", "p", "s", "i", "a", "h"];

pub fn write_paths_csv<W: Write>(batch: &SimBatch, mut out: W, manifest_hash: &str) -> Result<()> {
    writeln!(out, "# manifest {manifest_hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PATH_COLUMNS)?;
    for (n, states) in batch.states.iter().enumerate() {
        for (k, x) in states.iter().enumerate() {
            let [a, h] = batch.controls[n][k.min(batch.n_steps - 1)];
            w.write_record(&[
                n.to_string(),
                k.to_string(),
                format!("{:.17e}", batch.times[k]),
                format!("{:.17e}", x.p),
                format!("{:.17e}", x.s),
                format!("{:.17e}", x.i),
                format!("{:.17e}", a),
                format!("{:.17e}", h),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PathSummary<'a> {
    path: usize,
    p_t: f64,
    s_t: f64,
    i_t: f64,
    jumps: &'a [usize],
    dd_weight: f64,
    agent_cost: f64,
    principal_cost: f64,
    discount: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    y_t: Option<f64>,
}

pub fn write_summary_jsonl<W: Write>(batch: &SimBatch, marks: usize, mut out: W, manifest_hash: &str) -> Result<()> {
    writeln!(out, "# manifest {manifest_hash}")?;
    for n in 0..batch.n_paths {
        let xt = batch.states[n].last().expect("nonempty path");
        let mut counts = vec![0usize; marks];
        for e in &batch.jump_log[n] {
            counts[e.mark] += 1;
        }
        let line = PathSummary {
            path: n,
            p_t: xt.p,
            s_t: xt.s,
            i_t: xt.i,
            jumps: &counts,
            dd_weight: batch.dd_weight[n],
            agent_cost: batch.agent_cost[n],
            principal_cost: batch.principal_cost[n],
            discount: batch.discount[n],
            y_t: batch.y_terminal.as_ref().map(|y| y[n]),
        };
        serde_json::to_writer(&mut out, &line)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::simulate::{simulate_paths, SimConfig};

    #[test]
    fn csv_has_documented_header_and_rows() {
        let m = ModelParams::default();
        let cfg = SimConfig {
            n_paths: 2,
            dt: 0.25,
            ..Default::default()
        };
        let b = simulate_paths(&m, &|_, _| 0.1, &|_, _| 0.2, m.x0, &cfg).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&b, &mut buf, "abc").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# manifest abc"));
        assert_eq!(lines.next(), Some("path,step,t,p,s,i,a,h"));
        assert_eq!(lines.count(), 2 * 5);
        let mut buf = Vec::new();
        write_summary_jsonl(&b, 2, &mut buf, "abc").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        assert_eq!(first["path"], 0);
        assert_eq!(first["jumps"].as_array().unwrap().len(), 2);
    }
}
