//! Column scalers. Constant columns map to zero in both modes.

use super::Dataset;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleMode {
    /// Per-column mean 0 / population standard deviation 1.
    Standard,
    /// Per-column [0, 1].
    MinMax,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scaler {
    pub mode: ScaleMode,
    /// Per column: (offset, divisor). Constant columns store divisor 0 and
    /// are mapped to 0.
    stats: Vec<(f64, f64)>,
}

pub fn scale_fit(data: &Dataset, mode: ScaleMode) -> Scaler {
    let width = data.width();
    let n = data.len() as f64;
    let mut stats = Vec::with_capacity(width);
    for c in 0..width {
        let col = data.rows.iter().map(|r| r[c]);
        match mode {
            ScaleMode::Standard => {
                let mean = col.clone().sum::<f64>() / n;
                let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                stats.push((mean, var.sqrt()));
            }
            ScaleMode::MinMax => {
                let min = col.clone().fold(f64::INFINITY, f64::min);
                let max = col.fold(f64::NEG_INFINITY, f64::max);
                stats.push((min, max - min));
            }
        }
    }
    Scaler { mode, stats }
}

pub fn scale_apply(scaler: &Scaler, data: &Dataset) -> Dataset {
    let mut out = data.clone();
    for row in out.rows.iter_mut() {
        for (v, (offset, divisor)) in row.iter_mut().zip(&scaler.stats) {
            *v = if *divisor <= f64::EPSILON {
                0.0
            } else {
                (*v - offset) / divisor
            };
        }
    }
    out
}
