//! Per-epoch logs. `metrics.csv` holds only deterministic quantities, so two
//! runs with the same configuration produce byte-identical files; wall-clock
//! times go to `timing.csv` and per-layer rewiring details to
//! `rewiring.csv`.

use std::fmt::Write as _;

use sparse_evo_core::{EpochStats, RewireReport};

pub const METRICS_HEADER: &str = "epoch,train_loss,train_accuracy,test_accuracy,edges_total,rewired";
pub const REWIRING_HEADER: &str = "epoch,layer,removed,added,dot_products,fallback";
pub const TIMING_HEADER: &str = "epoch,wall_time_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub edges_total: usize,
    /// Connections replaced during the epoch's rewiring, summed over layers.
    pub rewired: usize,
    pub wall_time_ms: u128,
}

impl EpochLog {
    pub fn new(stats: &EpochStats, wall_time_ms: u128) -> Self {
        Self {
            epoch: stats.epoch,
            train_loss: stats.train_loss,
            train_accuracy: stats.train_accuracy,
            test_accuracy: stats.test_accuracy.unwrap_or(f64::NAN),
            edges_total: stats.edges_total,
            rewired: stats.rewire.total_added(),
            wall_time_ms,
        }
    }

    pub fn metrics_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{},{}",
            self.epoch,
            self.train_loss,
            self.train_accuracy,
            self.test_accuracy,
            self.edges_total,
            self.rewired
        )
    }

    pub fn timing_row(&self) -> String {
        format!("{},{}", self.epoch, self.wall_time_ms)
    }
}

pub fn rewiring_rows(report: &RewireReport) -> String {
    let mut out = String::new();
    for l in &report.layers {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            report.epoch,
            l.layer,
            l.removed,
            l.added,
            l.dot_products,
            u8::from(l.fallback)
        );
    }
    out
}

/// Parses a `metrics.csv` body back into `(epoch, test_accuracy)` pairs and
/// the `edges_total` column.
pub fn parse_metrics(text: &str) -> Option<Vec<(usize, f64, usize)>> {
    let mut lines = text.lines();
    if lines.next()? != METRICS_HEADER {
        return None;
    }
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 6 {
                return None;
            }
            Some((
                cells[0].parse().ok()?,
                cells[3].parse().ok()?,
                cells[4].parse().ok()?,
            ))
        })
        .collect()
}
