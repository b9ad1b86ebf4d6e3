//! CSV traces with columns `k, ell, norm_d, w_ell, w1, u0, F_1..F_m, x_1..x_n`.
//! Metrics that were not recorded are empty fields.

use std::io::Write;

use anyhow::Result;
use mopg::algorithm::RunTrace;

pub fn header(m: usize, n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["k", "ell", "norm_d", "w_ell", "w1", "u0"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=m).map(|i| format!("F_{i}")));
    h.extend((1..=n).map(|j| format!("x_{j}")));
    h
}

/// Shortest round-tripping text, in exponent form outside `[1e-4, 1e15)`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_trace<W: Write>(trace: &RunTrace, out: W) -> Result<()> {
    let (m, n) = trace
        .records
        .first()
        .map_or((0, 0), |r| (r.f.len(), r.x.len()));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(m, n))?;
    let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    for r in &trace.records {
        let mut row = vec![
            r.k.to_string(),
            format_f64(r.ell_used),
            format_f64(r.norm_d),
            format_f64(r.w_ell),
            opt(r.w1),
            opt(r.u0),
        ];
        row.extend(r.f.iter().map(|v| format_f64(*v)));
        row.extend(r.x.iter().map(|v| format_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
