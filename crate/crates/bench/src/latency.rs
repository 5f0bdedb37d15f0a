use crate::{BenchError, Result};

/// Analytic inference latency of the optical frontend: propagation time,
/// the electronic transfer of the detected image, and the dense backend.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyModel {
    pub payload_bytes: f64,
    pub link_rate_bits_per_s: f64,
    pub backend_ms: f64,
    pub optical_ms: f64,
}

impl LatencyModel {
    /// A 100 kB image over a 2.5 Gbit/s link with a 0.28 ms backend.
    pub fn reference() -> Self {
        LatencyModel {
            payload_bytes: 100_000.0,
            link_rate_bits_per_s: 2.5e9,
            backend_ms: 0.28,
            optical_ms: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatencyBreakdown {
    pub optical_ms: f64,
    pub transduction_ms: f64,
    pub backend_ms: f64,
    pub total_ms: f64,
}

impl LatencyBreakdown {
    pub fn to_csv(&self) -> String {
        format!(
            "term,ms\noptical,{:.6}\ntransduction,{:.6}\nbackend,{:.6}\ntotal,{:.6}\n",
            self.optical_ms, self.transduction_ms, self.backend_ms, self.total_ms
        )
    }

    pub fn to_markdown(&self) -> String {
        format!(
            "| term | ms |\n|---|---|\n| optical | {:.4} |\n| transduction | {:.4} |\n| backend | {:.4} |\n| **total** | **{:.4}** |\n",
            self.optical_ms, self.transduction_ms, self.backend_ms, self.total_ms
        )
    }
}

pub fn latency_estimate(m: &LatencyModel) -> Result<LatencyBreakdown> {
    if m.link_rate_bits_per_s == 0.0 {
        return Err(BenchError::ZeroLinkRate);
    }
    let fields = [
        ("payload_bytes", m.payload_bytes),
        ("link_rate_bits_per_s", m.link_rate_bits_per_s),
        ("backend_ms", m.backend_ms),
        ("optical_ms", m.optical_ms),
    ];
    if let Some((name, v)) = fields.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
        return Err(BenchError::Config(format!(
            "latency model field {name} must be finite and nonnegative, got {v}"
        )));
    }
    let transduction_ms = m.payload_bytes * 8.0 / m.link_rate_bits_per_s * 1000.0;
    Ok(LatencyBreakdown {
        optical_ms: m.optical_ms,
        transduction_ms,
        backend_ms: m.backend_ms,
        total_ms: m.optical_ms + transduction_ms + m.backend_ms,
    })
}
