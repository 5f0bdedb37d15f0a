use std::collections::BTreeMap;

use crate::timing::{LayerKind, TimingTable};
use crate::{BenchError, Result};

pub const MIN_FIT_ROWS: usize = 4;

/// Least-squares slope of `ln(median_ms)` against `ln(H·W)` over the
/// measured rows of `kind`.
pub fn fit_loglog_slope(table: &TimingTable, kind: LayerKind) -> Result<f64> {
    let points: Vec<(f64, f64)> = table
        .measured(kind)
        .map(|r| (((r.side * r.side) as f64).ln(), r.median_ms.ln()))
        .collect();
    if points.len() < MIN_FIT_ROWS {
        return Err(BenchError::InsufficientRows {
            kind: kind.name(),
            rows: points.len(),
            needed: MIN_FIT_ROWS,
        });
    }
    if points.iter().any(|(_, y)| !y.is_finite()) {
        return Err(BenchError::Config(format!("{kind} has non-positive timings")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(BenchError::Config(format!("{kind} rows share a single side length")));
    }
    Ok(sxy / sxx)
}

/// Smallest shared side length at which the spectral median beats the
/// spatial one; `None` when it never does.
pub fn crossover_size(spatial: &TimingTable, spectral: &TimingTable) -> Result<Option<usize>> {
    let medians = |t: &TimingTable| -> BTreeMap<usize, f64> {
        t.rows
            .iter()
            .filter(|r| !r.skipped)
            .map(|r| (r.side, r.median_ms))
            .collect()
    };
    let a = medians(spatial);
    let b = medians(spectral);
    let shared: Vec<usize> = a.keys().filter(|s| b.contains_key(s)).copied().collect();
    if shared.is_empty() {
        return Err(BenchError::DisjointGrids);
    }
    Ok(shared.into_iter().find(|s| b[s] < a[s]))
}
