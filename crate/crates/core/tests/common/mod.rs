#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_evo_core::{
    ActivationRecord, Edge, EpochRecords, EvolutionPolicy, LayerTopology, Mode, Model,
    SparseLayer, SreluParams, Topology, TrainConfig,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random edge set where each pair is present with probability `density`.
pub fn random_layer_topology(
    n_prev: usize,
    n_next: usize,
    density: f64,
    rng: &mut impl Rng,
) -> LayerTopology {
    let mut edges = Vec::new();
    for s in 0..n_prev {
        for t in 0..n_next {
            if rng.random::<f64>() < density {
                edges.push(Edge::new(s, t, 0));
            }
        }
    }
    LayerTopology::new(n_prev, n_next, edges).unwrap()
}

/// A model with hand-picked widths, random topology and random parameters,
/// including non-default SReLU parameters.
pub fn random_model(
    widths: &[usize],
    density: f64,
    policy: EvolutionPolicy,
    config: TrainConfig,
    rng: &mut impl Rng,
) -> Model {
    let n_layers = widths.len() - 1;
    let topologies: Vec<LayerTopology> = (0..n_layers)
        .map(|k| random_layer_topology(widths[k], widths[k + 1], density, rng))
        .collect();
    let layers = topologies
        .iter()
        .enumerate()
        .map(|(k, lt)| {
            let weights = (0..lt.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let biases = (0..lt.n_next()).map(|_| rng.random_range(-0.5..0.5)).collect();
            let srelu = if k + 1 < n_layers {
                (0..lt.n_next())
                    .map(|_| {
                        SreluParams::new(
                            rng.random_range(-1.0..-0.2),
                            rng.random_range(0.0..0.5),
                            rng.random_range(0.2..1.0),
                            rng.random_range(0.5..1.5),
                        )
                    })
                    .collect()
            } else {
                Vec::new()
            };
            SparseLayer::new(lt, weights, biases, srelu).unwrap()
        })
        .collect();
    let mut config = config;
    config.hidden_dims = widths[1..widths.len() - 1].to_vec();
    Model::from_parts(Topology::from_layers(topologies).unwrap(), layers, policy, config, 0)
        .unwrap()
}

pub fn small_config() -> TrainConfig {
    TrainConfig {
        epsilon: 1.0,
        hidden_dims: vec![4],
        batch_size: 8,
        dropout_rate: 0.0,
        ..TrainConfig::default()
    }
}

pub fn random_samples(n: usize, width: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

/// Records one eval-mode pass over `samples`.
pub fn record(model: &Model, samples: &[Vec<f64>]) -> EpochRecords {
    let mut records = EpochRecords::for_model(model);
    let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
    model.forward(&refs, Mode::Eval, Some(&mut records)).unwrap();
    records
}

/// Cosine similarity written directly from its definition.
pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())).abs()
    }
}

pub fn record_from(layer_index: usize, rows: &[Vec<f64>]) -> ActivationRecord {
    ActivationRecord::from_rows(layer_index, rows.to_vec()).unwrap()
}

pub fn edge_keys(lt: &LayerTopology) -> Vec<(u32, u32)> {
    lt.edges().iter().map(Edge::key).collect()
}
