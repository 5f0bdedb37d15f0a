use std::fmt::Write as _;

use crate::fit::{crossover_size, fit_loglog_slope};
use crate::timing::{LayerKind, TimingTable};

/// Fitted slopes per kind and the spatial/spectral convolution crossover.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSummary {
    pub slopes: Vec<(LayerKind, Option<f64>)>,
    pub crossover: Option<usize>,
}

impl ScalingSummary {
    pub fn from_table(table: &TimingTable) -> Self {
        let slopes = LayerKind::ALL
            .into_iter()
            .filter(|k| table.rows.iter().any(|r| r.kind == *k))
            .map(|k| (k, fit_loglog_slope(table, k).ok()))
            .collect();
        let only = |kind| TimingTable {
            rows: table.rows.iter().filter(|r| r.kind == kind).cloned().collect(),
        };
        let crossover = crossover_size(&only(LayerKind::SpatialConv), &only(LayerKind::SpectralConv))
            .ok()
            .flatten();
        ScalingSummary { slopes, crossover }
    }

    pub fn slope(&self, kind: LayerKind) -> Option<f64> {
        self.slopes.iter().find(|(k, _)| *k == kind).and_then(|(_, s)| *s)
    }
}

/// Markdown table of medians plus the fitted slopes and crossover.
pub fn summary_markdown(table: &TimingTable, summary: &ScalingSummary) -> String {
    let mut out = String::from("| kind | side | kernel | reps | median ms | MAD ms |\n|---|---|---|---|---|---|\n");
    for r in &table.rows {
        if r.skipped {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | skipped | skipped |",
                r.kind, r.side, r.kernel, r.reps
            );
        } else {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {:.4} | {:.4} |",
                r.kind, r.side, r.kernel, r.reps, r.median_ms, r.mad_ms
            );
        }
    }
    out.push_str("\n| kind | log-log slope vs H·W |\n|---|---|\n");
    for (kind, slope) in &summary.slopes {
        match slope {
            Some(s) => writeln!(out, "| {kind} | {s:.4} |"),
            None => writeln!(out, "| {kind} | n/a |"),
        }
        .ok();
    }
    match summary.crossover {
        Some(side) => writeln!(
            out,
            "\nSpectral convolution is first faster than spatial at side {side}."
        ),
        None => writeln!(
            out,
            "\nSpectral convolution was not faster than spatial at any measured side."
        ),
    }
    .ok();
    out
}
