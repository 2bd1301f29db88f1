//! Plain-text writers and readers for trajectories, iteration logs and field
//! snapshots. Floats use `{:.16e}`, which round-trips exactly.

use nalgebra::DVector;

use crate::error::{BiotError, Result};
use crate::evolution::TrajectoryRecord;
use crate::fixedpoint::IterationLog;

pub const TRAJECTORY_HEADER: &str = "t,L2_p,V_p,sqrtB_p_sq,L2_zeta,H1_zeta,Vprime_dzeta,Linf_grad_p";
pub const ITERATION_HEADER: &str = "iter,residual,energy_bound_C,wallclock_s";

pub fn trajectory_csv(tr: &TrajectoryRecord) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for l in &tr.ledger {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            l.t, l.l2_p, l.v_p, l.b_p_sq, l.l2_zeta, l.h1_zeta, l.vprime_dzeta, l.linf_grad_p
        ));
    }
    out
}

pub fn iteration_log_csv(history: &[IterationLog]) -> String {
    let mut out = String::from(ITERATION_HEADER);
    out.push('\n');
    for h in history {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e}\n",
            h.iter, h.residual, h.energy_bound_c, h.wallclock_s
        ));
    }
    out
}

/// Header `n_vertices n_components time`, then one vertex per line.
pub fn snapshot(values: &DVector<f64>, components: usize, time: f64) -> String {
    let nv = values.len() / components;
    let mut out = format!("{nv} {components} {time:.16e}\n");
    for v in 0..nv {
        let row: Vec<String> = (0..components)
            .map(|c| format!("{:.16e}", values[v * components + c]))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> BiotError {
    BiotError::Parse {
        message: message.into(),
        position: line,
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|e| parse_err(line, format!("bad number {tok:?}: {e}")))
}

/// Inverse of [`snapshot`]: `(values, components, time)`.
pub fn read_snapshot(text: &str) -> Result<(DVector<f64>, usize, f64)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty snapshot"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(parse_err(1, "snapshot header must be `n_vertices n_components time`"));
    }
    let nv: usize = h[0].parse().map_err(|_| parse_err(1, "bad vertex count"))?;
    let nc: usize = h[1].parse().map_err(|_| parse_err(1, "bad component count"))?;
    let time = parse_f64(h[2], 1)?;
    let mut values = Vec::with_capacity(nv * nc);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split_whitespace().collect();
        if row.len() != nc {
            return Err(parse_err(i + 2, format!("expected {nc} values")));
        }
        for tok in row {
            values.push(parse_f64(tok, i + 2)?);
        }
    }
    if values.len() != nv * nc {
        return Err(parse_err(0, format!("expected {nv} vertices, found {}", values.len() / nc.max(1))));
    }
    Ok((DVector::from_vec(values), nc, time))
}

/// Parse a numeric CSV with a header line into rows.
pub fn read_csv(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        _ => return Err(parse_err(1, format!("expected header {header:?}"))),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.split(',').map(|t| parse_f64(t, i + 2)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn snapshot_round_trips_bitwise(v in proptest::collection::vec(-1e6f64..1e6, 1..20), t in 0.0f64..1.0) {
            let n = v.len() - v.len() % 2;
            prop_assume!(n > 0);
            let x = DVector::from_vec(v[..n].to_vec());
            let (y, c, s) = read_snapshot(&snapshot(&x, 2, t)).unwrap();
            prop_assert_eq!(c, 2);
            prop_assert_eq!(s.to_bits(), t.to_bits());
            for (a, b) in x.iter().zip(y.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn iteration_log_parses_back() {
        let h = vec![IterationLog { iter: 1, residual: 0.5, energy_bound_c: 2.0, wallclock_s: 0.0 }];
        let rows = read_csv(&iteration_log_csv(&h), ITERATION_HEADER).unwrap();
        assert_eq!(rows, vec![vec![1.0, 0.5, 2.0, 0.0]]);
    }

    #[test]
    fn malformed_snapshot_reports_line() {
        let err = read_snapshot("2 1 0.0\n1.0\nabc\n").unwrap_err();
        assert!(matches!(err, BiotError::Parse { position: 3, .. }));
    }
}
