use std::sync::OnceLock;

use cyber_contract::contract::{forward_y, replay, ContractPolicy, Deviation};
use cyber_contract::hjbi::export::{csv_header, read_binary, write_binary, write_slice_csv};
use cyber_contract::hjbi::{solve_backward, GridConfig, Hjbi, SchemeFlags, SearchConfig, Solution};
use cyber_contract::simulate::SimConfig;
use cyber_contract::{CyberState, ModelParams};
use proptest::prelude::*;

fn solved() -> &'static (Hjbi, Solution) {
    static S: OnceLock<(Hjbi, Solution)> = OnceLock::new();
    S.get_or_init(|| {
        let search = SearchConfig {
            control_points: 21,
            ..Default::default()
        };
        solve_backward(&ModelParams::default(), &GridConfig::cube(5), &search, &SchemeFlags::default()).unwrap()
    })
}

#[test]
fn value_is_nonincreasing_in_y_on_every_slice() {
    let (s, sol) = solved();
    let g = &s.grid;
    let ny = g.y.len();
    let mut worst = f64::NEG_INFINITY;
    for slice in &sol.value.slices {
        for &f in g.retained.iter().filter(|f| *f % ny == 0) {
            for k in 0..ny - 1 {
                worst = worst.max(slice[f + k + 1] - slice[f + k]);
            }
        }
    }
    assert!(worst <= 1e-10, "largest increase along y: {worst}");
}

#[test]
fn binary_dump_roundtrips() {
    let (s, sol) = solved();
    let mut buf = Vec::new();
    write_binary(&s.grid, &sol.value, &sol.policy, &mut buf, "abc123").unwrap();
    let d = read_binary(&buf[..]).unwrap();
    assert_eq!(d.manifest_hash, "abc123");
    assert_eq!(d.axes, [s.grid.p.clone(), s.grid.s.clone(), s.grid.i.clone(), s.grid.y.clone()]);
    assert_eq!(d.n_t, s.grid.n_t);
    assert_eq!(d.horizon, s.grid.horizon);
    assert_eq!(d.policy, sol.policy);
    for (a, b) in d.value.slices.iter().zip(&sol.value.slices) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_binary(&bad[..]).is_err());
    assert!(read_binary(&buf[..buf.len() - 8]).is_err());
}

#[test]
fn slice_csv_parses_back_to_the_fields() {
    let (s, sol) = solved();
    let marks: Vec<String> = s.params.marks.iter().map(|m| m.name.clone()).collect();
    let mut buf = Vec::new();
    write_slice_csv(&s.grid, &sol.value, &sol.policy, &marks, 0, &mut buf, "h0").unwrap();
    let text = String::from_utf8(buf).unwrap();
    let (first, body) = text.split_once('\n').unwrap();
    assert_eq!(first, "# manifest h0");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, csv_header(&marks, true));
    let st = sol.policy.stride();
    let mut rows = 0;
    for (slot, rec) in r.records().enumerate() {
        let rec = rec.unwrap();
        let vals: Vec<f64> = rec.iter().map(|v| v.parse().unwrap()).collect();
        let f = s.grid.retained[slot];
        assert_eq!(vals[5], sol.value.slices[0][f]);
        assert_eq!(&vals[6..], &sol.policy.slices[0][slot * st..(slot + 1) * st]);
        rows += 1;
    }
    assert_eq!(rows, s.grid.retained.len());
    let mut buf = Vec::new();
    write_slice_csv(&s.grid, &sol.value, &sol.policy, &marks, s.grid.n_t, &mut buf, "h0").unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 6);
}

#[test]
fn recorded_y_paths_match_a_replay_from_the_batch() {
    let (s, sol) = solved();
    let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
    let cfg = SimConfig {
        n_paths: 25,
        dt: 1.0 / 64.0,
        seed: 11,
        ..Default::default()
    };
    let r = replay(&c, &Deviation::Scaled { factor: 0.5 }, &cfg, true).unwrap();
    let f = forward_y(r.batch.as_ref().unwrap(), &c).unwrap();
    assert_eq!(&f.y, r.y_paths.as_ref().unwrap());
    assert!(f.dk.iter().flatten().all(|d| *d >= -1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn contract_controls_stay_in_their_sets(t in 0.0f64..1.0, p in 0.2f64..4.0, si in 0.0f64..=1.0, f in 0.0f64..=1.0, y in -3.0f64..2.0) {
        let (s, sol) = solved();
        let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
        let x = CyberState { p, s: si, i: f * (1.0 - si) };
        let cc = c.controls(t, &x, y);
        let r = s.search.radius + 1e-12;
        prop_assert!(cc.z.iter().chain(cc.u.iter()).all(|v| v.abs() <= r));
        prop_assert!(cc.gamma.max_abs() <= r);
        prop_assert!(s.h_grid.contains(&cc.h));
        prop_assert!(s.params.a_set.contains(cc.a));
    }

    #[test]
    fn k_rate_is_nonnegative_on_the_contract(t in 0.0f64..1.0, p in 0.4f64..2.7, si in 0.0f64..=1.0, f in 0.0f64..=1.0, y in -2.5f64..1.5) {
        let (s, sol) = solved();
        let c = ContractPolicy::new(s, sol, s.params.reservation).unwrap();
        let x = CyberState { p, s: si, i: f * (1.0 - si) };
        let cc = c.controls(t, &x, y);
        let (_, dk) = c.y_step(t, &x, y, &cc, cc.h, 0.01, &[0.0; 3], 0);
        prop_assert!(dk >= -1e-12);
    }
}
