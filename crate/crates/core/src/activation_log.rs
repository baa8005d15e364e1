//! Per-epoch activation records and the absolute cosine similarity between
//! the activation vectors of connected (or connectable) neuron pairs.
//!
//! Cost is accounted with the three-dot-products-per-pair model: every
//! similarity `|a·b| / (‖a‖‖b‖)` is charged three vector products of length
//! `s`, whether or not norms are shared between entries.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::sparse_net::{Activations, Edge, ForwardPass};

/// Dot products charged per similarity entry.
pub const DOTS_PER_ENTRY: u64 = 3;

/// Recorded activations of one neuron layer over the samples of an epoch.
/// Row `i` is neuron `i`'s activation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    layer_index: usize,
    cap: Option<usize>,
    rows: Vec<Vec<f64>>,
    columns: usize,
}

impl ActivationRecord {
    pub fn new(layer_index: usize, width: usize, cap: Option<usize>) -> Self {
        Self {
            layer_index,
            cap,
            rows: vec![Vec::new(); width],
            columns: 0,
        }
    }

    /// Builds a record directly from per-neuron vectors of equal length.
    pub fn from_rows(layer_index: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let columns = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != columns) {
            return Err(Error::DimensionMismatch {
                what: "activation record row length",
                expected: columns,
                found: bad.len(),
            });
        }
        Ok(Self {
            layer_index,
            cap: None,
            rows,
            columns,
        })
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn width(&self) -> usize {
        self.rows.len()
    }

    /// Number of recorded samples.
    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        &self.rows[neuron]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Appends one column per sample of `layer_activations`, in sample order.
    /// Once the cap is reached further samples are ignored.
    pub fn record_batch(&mut self, layer_activations: &Activations) -> Result<()> {
        if layer_activations.rows() != self.width() {
            return Err(Error::DimensionMismatch {
                what: "recorded layer width",
                expected: self.width(),
                found: layer_activations.rows(),
            });
        }
        let room = self.cap.map_or(usize::MAX, |c| c.saturating_sub(self.columns));
        let take = layer_activations.cols().min(room);
        if take == 0 {
            return Ok(());
        }
        for (i, row) in self.rows.iter_mut().enumerate() {
            row.extend_from_slice(&layer_activations.row(i)[..take]);
        }
        self.columns += take;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.rows.iter_mut().for_each(Vec::clear);
        self.columns = 0;
    }

    /// Euclidean norm of every neuron's activation vector.
    pub fn norms(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| libm::sqrt(crate::sparse_net::matrix_dot(r, r)))
            .collect()
    }
}

/// Activation records for every neuron layer of a network: the input layer,
/// each hidden layer, and the softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecords {
    layers: Vec<ActivationRecord>,
}

impl EpochRecords {
    /// `widths` lists neuron-layer widths from input to output.
    pub fn new(widths: &[usize], cap: Option<usize>) -> Self {
        Self {
            layers: widths
                .iter()
                .enumerate()
                .map(|(k, &w)| ActivationRecord::new(k, w, cap))
                .collect(),
        }
    }

    pub fn from_records(layers: Vec<ActivationRecord>) -> Result<Self> {
        if let Some(first) = layers.first() {
            if let Some(bad) = layers.iter().find(|r| r.columns() != first.columns()) {
                return Err(Error::DimensionMismatch {
                    what: "recorded column count",
                    expected: first.columns(),
                    found: bad.columns(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn for_model(model: &crate::sparse_net::Model) -> Self {
        let mut widths = vec![model.input_dim()];
        widths.extend(model.topology().layers().iter().map(|l| l.n_next()));
        Self::new(&widths, model.config().activation_sample_cap)
    }

    pub fn layer(&self, k: usize) -> &ActivationRecord {
        &self.layers[k]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn columns(&self) -> usize {
        self.layers.first().map_or(0, ActivationRecord::columns)
    }

    /// Appends the inputs, post-SReLU pre-dropout hidden activations and
    /// output probabilities of a forward pass.
    pub fn record_pass(&mut self, pass: &ForwardPass) -> Result<()> {
        let expected = pass.hidden.len() + 2;
        if self.layers.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "recorded layer count",
                expected,
                found: self.layers.len(),
            });
        }
        let last = self.layers.len() - 1;
        for (k, rec) in self.layers.iter_mut().enumerate() {
            let source = if k == 0 {
                &pass.inputs
            } else if k == last {
                &pass.probs
            } else {
                &pass.hidden[k - 1]
            };
            rec.record_batch(source)?;
        }
        Ok(())
    }

    pub fn clear(&mut self) {
        self.layers.iter_mut().for_each(ActivationRecord::clear);
    }
}

/// Absolute cosine similarities for every pre/post neuron pair of a
/// bipartite layer, row-major `n_prev x n_next`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineMatrix {
    n_prev: usize,
    n_next: usize,
    values: Vec<f64>,
}

impl CosineMatrix {
    pub fn from_values(n_prev: usize, n_next: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_prev * n_next {
            return Err(Error::DimensionMismatch {
                what: "cosine matrix",
                expected: n_prev * n_next,
                found: values.len(),
            });
        }
        Ok(Self {
            n_prev,
            n_next,
            values,
        })
    }

    pub fn n_prev(&self) -> usize {
        self.n_prev
    }

    pub fn n_next(&self) -> usize {
        self.n_next
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p * self.n_next + q]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Dot products charged for computing the full matrix.
    pub fn dot_products(&self) -> u64 {
        DOTS_PER_ENTRY * (self.n_prev * self.n_next) as u64
    }
}

/// Similarities of a list of existing connections.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSimilarities {
    pub values: Vec<f64>,
    /// Dot products charged: three per edge.
    pub dot_products: u64,
}

#[inline]
fn similarity(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot.abs() / (norm_a * norm_b)).min(1.0)
}

fn check_columns(prev: &ActivationRecord, next: &ActivationRecord) -> Result<()> {
    if prev.columns() != next.columns() {
        return Err(Error::DimensionMismatch {
            what: "recorded column count",
            expected: prev.columns(),
            found: next.columns(),
        });
    }
    Ok(())
}

const BLOCK: usize = 16;

/// Fills `out` (row-major, `rows.len() x next.width()`) with the similarities
/// of previous-layer neurons `rows` against every next-layer neuron.
///
/// Each entry is computed independently, so any partition of the rows gives
/// bit-identical results.
pub fn cosine_block(
    prev: &ActivationRecord,
    next: &ActivationRecord,
    prev_norms: &[f64],
    next_norms: &[f64],
    rows: Range<usize>,
    out: &mut [f64],
) -> Result<()> {
    check_columns(prev, next)?;
    let n_next = next.width();
    let expected = rows.len() * n_next;
    if out.len() != expected {
        return Err(Error::DimensionMismatch {
            what: "cosine output block",
            expected,
            found: out.len(),
        });
    }
    // Tile next-layer neurons so their vectors stay cache resident while the
    // previous-layer rows stream past; within a tile, pairs of rows and pairs
    // of columns share one sweep over the samples.
    let entry = |p: usize, q: usize, dot: f64| {
        let (na, nb) = (prev_norms[p], next_norms[q]);
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            similarity(dot, na, nb)
        }
    };
    let single = |p: usize, q: usize| {
        if prev_norms[p] == 0.0 || next_norms[q] == 0.0 {
            0.0
        } else {
            entry(p, q, crate::sparse_net::matrix_dot(prev.row(p), next.row(q)))
        }
    };
    let start = rows.start;
    for q0 in (0..n_next).step_by(BLOCK) {
        let q1 = (q0 + BLOCK).min(n_next);
        let mut p = rows.start;
        while p < rows.end {
            if p + 1 == rows.end {
                for q in q0..q1 {
                    out[(p - start) * n_next + q] = single(p, q);
                }
                p += 1;
                continue;
            }
            let (a0, a1) = (prev.row(p), prev.row(p + 1));
            let mut q = q0;
            while q + 1 < q1 {
                let d = crate::sparse_net::matrix_dot_2x2(a0, a1, next.row(q), next.row(q + 1));
                let r0 = (p - start) * n_next;
                let r1 = r0 + n_next;
                out[r0 + q] = entry(p, q, d[0]);
                out[r0 + q + 1] = entry(p, q + 1, d[1]);
                out[r1 + q] = entry(p + 1, q, d[2]);
                out[r1 + q + 1] = entry(p + 1, q + 1, d[3]);
                q += 2;
            }
            if q < q1 {
                out[(p - start) * n_next + q] = single(p, q);
                out[(p + 1 - start) * n_next + q] = single(p + 1, q);
            }
            p += 2;
        }
    }
    Ok(())
}

/// Full similarity matrix `C[p][q] = |A_p·A_q| / (‖A_p‖‖A_q‖)`, with 0
/// wherever either vector has zero norm.
pub fn cosine_full(prev: &ActivationRecord, next: &ActivationRecord) -> Result<CosineMatrix> {
    check_columns(prev, next)?;
    let (n_prev, n_next) = (prev.width(), next.width());
    let mut values = vec![0.0; n_prev * n_next];
    cosine_block(
        prev,
        next,
        &prev.norms(),
        &next.norms(),
        0..n_prev,
        &mut values,
    )?;
    CosineMatrix::from_values(n_prev, n_next, values)
}

/// Similarities of the given connections only, without materializing the
/// full matrix.
pub fn cosine_edges(
    prev: &ActivationRecord,
    next: &ActivationRecord,
    edges: &[Edge],
) -> Result<EdgeSimilarities> {
    check_columns(prev, next)?;
    for e in edges {
        crate::sparse_net::check_edge_range(
            e.source as usize,
            e.target as usize,
            prev.width(),
            next.width(),
        )?;
    }
    let mut prev_norms: Vec<Option<f64>> = vec![None; prev.width()];
    let mut next_norms: Vec<Option<f64>> = vec![None; next.width()];
    let values = edges
        .iter()
        .map(|e| {
            let (p, q) = (e.source as usize, e.target as usize);
            let a = prev.row(p);
            let b = next.row(q);
            let na = *prev_norms[p]
                .get_or_insert_with(|| libm::sqrt(crate::sparse_net::matrix_dot(a, a)));
            let nb = *next_norms[q]
                .get_or_insert_with(|| libm::sqrt(crate::sparse_net::matrix_dot(b, b)));
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                similarity(crate::sparse_net::matrix_dot(a, b), na, nb)
            }
        })
        .collect();
    Ok(EdgeSimilarities {
        values,
        dot_products: DOTS_PER_ENTRY * edges.len() as u64,
    })
}

/// Normalizes a similarity matrix into connection-addition probabilities
/// `P[p][q] = C[p][q] / ΣΣ C`.
pub fn addition_distribution(c: &CosineMatrix) -> Result<Vec<f64>> {
    let total: f64 = c.values.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateSimilarity);
    }
    Ok(c.values.iter().map(|v| v / total).collect())
}

/// Strategy for computing full similarity matrices; lets callers with
/// threads partition the rows.
pub trait CosineBackend {
    fn cosine_full(&self, prev: &ActivationRecord, next: &ActivationRecord)
        -> Result<CosineMatrix>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialCosine;

impl CosineBackend for SequentialCosine {
    fn cosine_full(
        &self,
        prev: &ActivationRecord,
        next: &ActivationRecord,
    ) -> Result<CosineMatrix> {
        cosine_full(prev, next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(rows: &[&[f64]]) -> ActivationRecord {
        ActivationRecord::from_rows(0, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn identical_vectors_have_similarity_one() {
        let c = cosine_full(&rec(&[&[1.0, 2.0, 3.0]]), &rec(&[&[1.0, 2.0, 3.0]])).unwrap();
        assert_abs_diff_eq!(c.get(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn orthogonal_vectors_have_similarity_zero() {
        let c = cosine_full(&rec(&[&[1.0, 0.0]]), &rec(&[&[0.0, 1.0]])).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
    }

    #[test]
    fn absolute_value_of_negative_cosine() {
        // |−1 + 4 − 9| / 14 = 6/14
        let c = cosine_full(&rec(&[&[1.0, 2.0, 3.0]]), &rec(&[&[-1.0, 2.0, -3.0]])).unwrap();
        assert_abs_diff_eq!(c.get(0, 0), 6.0 / 14.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_norm_rows_and_columns_are_zero() {
        let prev = rec(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let next = rec(&[&[2.0, 1.0], &[0.0, 0.0]]);
        let c = cosine_full(&prev, &next).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
        assert_eq!(c.get(0, 1), 0.0);
        assert_eq!(c.get(1, 1), 0.0);
        assert!(c.get(1, 0) > 0.0);
    }

    #[test]
    fn column_mismatch_is_an_error() {
        let r = cosine_full(&rec(&[&[1.0, 2.0]]), &rec(&[&[1.0]]));
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn record_batches_in_arrival_order() {
        let mut r = ActivationRecord::new(0, 2, None);
        let b1 = Activations::from_vec(2, 3, vec![1., 2., 3., 10., 20., 30.]).unwrap();
        let b2 = Activations::from_vec(2, 2, vec![4., 5., 40., 50.]).unwrap();
        r.record_batch(&b1).unwrap();
        r.record_batch(&b2).unwrap();
        assert_eq!(r.columns(), 5);
        assert_eq!(r.row(0), &[1., 2., 3., 4., 5.]);
        assert_eq!(r.row(1), &[10., 20., 30., 40., 50.]);
    }

    #[test]
    fn cap_keeps_prefix() {
        let mut r = ActivationRecord::new(0, 1, Some(4));
        r.record_batch(&Activations::from_vec(1, 3, vec![1., 2., 3.]).unwrap())
            .unwrap();
        r.record_batch(&Activations::from_vec(1, 2, vec![4., 5.]).unwrap())
            .unwrap();
        assert_eq!(r.columns(), 4);
        assert_eq!(r.row(0), &[1., 2., 3., 4.]);
    }

    #[test]
    fn record_width_mismatch() {
        let mut r = ActivationRecord::new(0, 3, None);
        let b = Activations::from_vec(2, 1, vec![1., 2.]).unwrap();
        assert!(r.record_batch(&b).is_err());
    }

    #[test]
    fn empty_epoch_gives_all_zero_similarities() {
        let prev = ActivationRecord::new(0, 3, None);
        let next = ActivationRecord::new(1, 2, None);
        let c = cosine_full(&prev, &next).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            addition_distribution(&c),
            Err(Error::DegenerateSimilarity)
        ));
    }

    #[test]
    fn edge_similarities() {
        let prev = rec(&[&[1.0, 0.0, 2.0], &[0.5, 1.0, -1.0]]);
        let next = rec(&[&[1.0, 1.0, 1.0], &[3.0, -1.0, 0.0], &[0.0, 0.0, 0.0]]);
        let full = cosine_full(&prev, &next).unwrap();
        let edges = [Edge::new(0, 1, 0), Edge::new(1, 0, 0), Edge::new(1, 2, 0)];
        let sims = cosine_edges(&prev, &next, &edges).unwrap();
        assert_eq!(sims.dot_products, 9);
        for (e, v) in edges.iter().zip(&sims.values) {
            assert_abs_diff_eq!(
                *v,
                full.get(e.source as usize, e.target as usize),
                epsilon = 1e-12
            );
        }
        let none = cosine_edges(&prev, &next, &[]).unwrap();
        assert!(none.values.is_empty());
        assert_eq!(none.dot_products, 0);
        assert!(cosine_edges(&prev, &next, &[Edge::new(2, 0, 0)]).is_err());
    }

    #[test]
    fn distribution_examples() {
        let c = CosineMatrix::from_values(2, 2, vec![1., 1., 1., 1.]).unwrap();
        assert_eq!(addition_distribution(&c).unwrap(), vec![0.25; 4]);
        let c = CosineMatrix::from_values(2, 2, vec![2., 0., 0., 0.]).unwrap();
        assert_eq!(addition_distribution(&c).unwrap(), vec![1., 0., 0., 0.]);
        let c = CosineMatrix::from_values(2, 2, vec![1., 3., 2., 2.]).unwrap();
        assert_eq!(
            addition_distribution(&c).unwrap(),
            vec![0.125, 0.375, 0.25, 0.25]
        );
    }

    #[test]
    fn block_partition_is_bit_identical() {
        let prev = rec(&[&[1.0, 0.3, -2.0], &[0.1, 0.2, 0.3], &[5.0, -1.0, 0.0]]);
        let next = rec(&[&[1.0, 1.0, 1.0], &[0.7, -0.2, 0.9]]);
        let full = cosine_full(&prev, &next).unwrap();
        let (pn, nn) = (prev.norms(), next.norms());
        let mut top = vec![0.0; 2];
        let mut rest = vec![0.0; 4];
        cosine_block(&prev, &next, &pn, &nn, 0..1, &mut top).unwrap();
        cosine_block(&prev, &next, &pn, &nn, 1..3, &mut rest).unwrap();
        top.extend(rest);
        assert_eq!(top, full.values());
    }
}
