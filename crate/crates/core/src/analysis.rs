//! Topology analytics over a trained network: how many first-layer
//! connections each input neuron holds, and how test accuracy responds when
//! inputs are switched off in degree order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sparse_net::Model;
use crate::trainer::accuracy;

/// Default number of inputs removed between evaluation points.
pub const DEFAULT_ABLATION_STEP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeProfile {
    /// First-layer connection count per input neuron.
    pub degrees: Vec<usize>,
    /// Epoch whose additions were left out of the count, if any.
    pub excluded_epoch: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationOrder {
    /// Least connected inputs first.
    Ascending,
    /// Most connected inputs first.
    Descending,
}

impl AblationOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ascending => "ascending",
            Self::Descending => "descending",
        }
    }
}

impl DegreeProfile {
    /// Input neurons sorted by degree; ties by neuron index ascending.
    pub fn order(&self, order: AblationOrder) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.degrees.len()).collect();
        match order {
            AblationOrder::Ascending => idx.sort_by_key(|&i| (self.degrees[i], i)),
            AblationOrder::Descending => {
                idx.sort_by(|&a, &b| self.degrees[b].cmp(&self.degrees[a]).then(a.cmp(&b)))
            }
        }
        idx
    }

    /// The `n` highest-degree input neurons.
    pub fn top(&self, n: usize) -> Vec<usize> {
        let mut o = self.order(AblationOrder::Descending);
        o.truncate(n);
        o
    }

    pub fn total(&self) -> usize {
        self.degrees.iter().sum()
    }
}

/// Counts first-layer connections per input neuron. With
/// `exclude_final_epoch`, connections created by the most recent rewiring
/// are not counted: they have not been trained yet.
pub fn input_degrees(model: &Model, exclude_final_epoch: bool) -> DegreeProfile {
    let first = model.topology().layer(0);
    let excluded_epoch = (exclude_final_epoch && model.epoch() > 0).then_some(model.epoch());
    let mut degrees = vec![0usize; first.n_prev()];
    for e in first.edges() {
        if Some(e.birth_epoch as usize) != excluded_epoch {
            degrees[e.source as usize] += 1;
        }
    }
    DegreeProfile {
        degrees,
        excluded_epoch,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeHistogram {
    /// `n_bins + 1` bin boundaries spanning `[0, max degree]`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl DegreeHistogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }
}

/// Equal-width histogram of degrees over `[0, max degree]`; the maximum
/// lands in the last bin.
pub fn degree_histogram(profile: &DegreeProfile, n_bins: usize) -> Result<DegreeHistogram> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let max = profile.degrees.iter().copied().max().unwrap_or(0) as f64;
    let width = max / n_bins as f64;
    let edges = (0..=n_bins).map(|i| width * i as f64).collect();
    let mut counts = vec![0usize; n_bins];
    for &d in &profile.degrees {
        let bin = if width > 0.0 {
            ((d as f64 / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Ok(DegreeHistogram { edges, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCurve {
    pub order: AblationOrder,
    /// `(inputs removed, test accuracy)`, strictly increasing in removals.
    pub points: Vec<(usize, f64)>,
}

impl AblationCurve {
    pub fn accuracy_at(&self, removed: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|(r, _)| *r == removed)
            .map(|&(_, a)| a)
    }
}

/// Removal counts evaluated: multiples of `step`, plus the full input count.
fn removal_grid(n_inputs: usize, step: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (0..n_inputs).step_by(step).collect();
    grid.push(n_inputs);
    grid
}

/// Zeroes inputs one by one in degree order (final-epoch additions
/// excluded) and records test accuracy every `step` removals. A zeroed
/// column takes the normalization-neutral value 0; the model is untouched.
pub fn ablation_curve(
    model: &Model,
    dataset: &Dataset,
    order: AblationOrder,
    step: usize,
) -> Result<AblationCurve> {
    let n = model.input_dim();
    if dataset.n_features() != n {
        return Err(Error::DimensionMismatch {
            what: "dataset feature count",
            expected: n,
            found: dataset.n_features(),
        });
    }
    if step == 0 || step >= n {
        return Err(Error::InvalidArgument(format!(
            "ablation step must lie in [1, {n}), got {step}"
        )));
    }
    let sequence = input_degrees(model, true).order(order);
    let mut points = Vec::new();
    let mut removed = 0;
    let mut current = dataset.clone();
    for target in removal_grid(n, step) {
        if target > removed {
            current = current.with_columns_set(&sequence[removed..target], 0.0);
            removed = target;
        }
        points.push((removed, accuracy(model, &current)?));
    }
    Ok(AblationCurve { order, points })
}

/// Ascending ablation curves for checkpoints of one run, on a shared grid.
pub fn snapshot_curves(
    checkpoints: &[Model],
    dataset: &Dataset,
    step: usize,
) -> Result<Vec<AblationCurve>> {
    if let Some(first) = checkpoints.first() {
        if let Some(bad) = checkpoints.iter().find(|m| m.input_dim() != first.input_dim()) {
            return Err(Error::DimensionMismatch {
                what: "checkpoint input width",
                expected: first.input_dim(),
                found: bad.input_dim(),
            });
        }
    }
    checkpoints
        .iter()
        .map(|m| ablation_curve(m, dataset, AblationOrder::Ascending, step))
        .collect()
}
