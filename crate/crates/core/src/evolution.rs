//! End-of-epoch rewiring. Every policy pairs a removal rule with an addition
//! rule; additions always match removals so each layer keeps its connection
//! count.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::activation_log::{cosine_edges, CosineBackend, CosineMatrix, EpochRecords};
use crate::error::{Error, Result};
use crate::sparse_net::{Edge, LayerTopology, Model, SparseLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RemovalRule {
    /// Smallest positive and closest-to-zero negative weights.
    Magnitude,
    /// Smallest `|w|·C` over existing connections.
    CosineWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdditionRule {
    Random,
    TopCosine,
    ProbabilisticCosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvolutionPolicy {
    #[serde(rename = "SET")]
    Set,
    #[serde(rename = "CoDASET")]
    CoDaSet,
    #[serde(rename = "CoPASET")]
    CoPaSet,
    #[serde(rename = "CoRSET")]
    CoRSet,
    #[serde(rename = "CoDACoRSET")]
    CoDaCoRSet,
    #[serde(rename = "CoPACoRSET")]
    CoPaCoRSet,
}

impl EvolutionPolicy {
    pub const ALL: [EvolutionPolicy; 6] = [
        Self::Set,
        Self::CoDaSet,
        Self::CoPaSet,
        Self::CoRSet,
        Self::CoDaCoRSet,
        Self::CoPaCoRSet,
    ];

    pub fn removal_rule(self) -> RemovalRule {
        match self {
            Self::Set | Self::CoDaSet | Self::CoPaSet => RemovalRule::Magnitude,
            Self::CoRSet | Self::CoDaCoRSet | Self::CoPaCoRSet => RemovalRule::CosineWeighted,
        }
    }

    pub fn addition_rule(self) -> AdditionRule {
        match self {
            Self::Set | Self::CoRSet => AdditionRule::Random,
            Self::CoDaSet | Self::CoDaCoRSet => AdditionRule::TopCosine,
            Self::CoPaSet | Self::CoPaCoRSet => AdditionRule::ProbabilisticCosine,
        }
    }

    pub fn from_rules(removal: RemovalRule, addition: AdditionRule) -> Self {
        use AdditionRule as A;
        use RemovalRule as R;
        match (removal, addition) {
            (R::Magnitude, A::Random) => Self::Set,
            (R::Magnitude, A::TopCosine) => Self::CoDaSet,
            (R::Magnitude, A::ProbabilisticCosine) => Self::CoPaSet,
            (R::CosineWeighted, A::Random) => Self::CoRSet,
            (R::CosineWeighted, A::TopCosine) => Self::CoDaCoRSet,
            (R::CosineWeighted, A::ProbabilisticCosine) => Self::CoPaCoRSet,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Set => "SET",
            Self::CoDaSet => "CoDASET",
            Self::CoPaSet => "CoPASET",
            Self::CoRSet => "CoRSET",
            Self::CoDaCoRSet => "CoDACoRSET",
            Self::CoPaCoRSet => "CoPACoRSET",
        }
    }
}

impl fmt::Display for EvolutionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvolutionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown policy {s:?}; expected one of SET, CoDASET, CoPASET, CoRSET, CoDACoRSET, CoPACoRSET"
                ))
            })
    }
}

/// Outcome of rewiring one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRewire {
    pub layer: usize,
    pub removed: usize,
    pub added: usize,
    /// Vector dot products charged for similarity computation.
    pub dot_products: u64,
    /// Set when cosine-driven addition found no positive similarity among
    /// candidates and fell back to uniform random addition.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewireReport {
    /// Epoch number stamped on the added connections.
    pub epoch: usize,
    pub layers: Vec<LayerRewire>,
}

impl RewireReport {
    pub fn total_removed(&self) -> usize {
        self.layers.iter().map(|l| l.removed).sum()
    }

    pub fn total_added(&self) -> usize {
        self.layers.iter().map(|l| l.added).sum()
    }

    pub fn total_dot_products(&self) -> u64 {
        self.layers.iter().map(|l| l.dot_products).sum()
    }
}

/// A connection taken out of the network, with the weight it had.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemovedEdge {
    pub edge: Edge,
    pub weight: f64,
}

/// Connections added by an addition rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Addition {
    pub edges: Vec<Edge>,
    pub fallback: bool,
}

// floor(ζ·n), tolerant to products like 0.3·10 landing just below an integer
fn fraction_count(n: usize, zeta: f64) -> usize {
    libm::floor(zeta * n as f64 + 1e-9) as usize
}

/// Number of connections the sign-split rule removes:
/// `floor(ζ·P) + floor(ζ·N)`, zero weights counting as positive.
pub fn removal_count(weights: &[f64], zeta: f64) -> usize {
    let positive = weights.iter().filter(|&&w| w >= 0.0).count();
    let negative = weights.len() - positive;
    fraction_count(positive, zeta) + fraction_count(negative, zeta)
}

/// Edge indices chosen by magnitude removal, assuming the weights are aligned
/// to edges in `(source, target)` order: the `floor(ζ·P)` smallest
/// non-negative weights followed by the `floor(ζ·N)` negative weights closest
/// to zero.
pub fn magnitude_removal_indices(weights: &[f64], zeta: f64) -> Vec<usize> {
    let mut positive: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] >= 0.0).collect();
    let mut negative: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] < 0.0).collect();
    let take_pos = fraction_count(positive.len(), zeta);
    let take_neg = fraction_count(negative.len(), zeta);
    positive.sort_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(a.cmp(&b)));
    negative.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    positive.truncate(take_pos);
    negative.truncate(take_neg);
    positive.extend(negative);
    positive
}

/// Edge indices chosen by cosine-weighted removal: the
/// `floor(ζ·P) + floor(ζ·N)` edges with the smallest `|w|·C`.
pub fn cosine_weighted_removal_indices(weights: &[f64], similarities: &[f64], zeta: f64) -> Vec<usize> {
    let count = removal_count(weights, zeta);
    let metric: Vec<f64> = weights
        .iter()
        .zip(similarities)
        .map(|(w, c)| w.abs() * c)
        .collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| metric[a].total_cmp(&metric[b]).then(a.cmp(&b)));
    order.truncate(count);
    order
}

/// Drops the given edge indices together with their weights and momentum.
fn remove_indices(
    topology: &mut LayerTopology,
    layer: &mut SparseLayer,
    indices: &[usize],
) -> Vec<RemovedEdge> {
    let mut doomed = vec![false; topology.len()];
    for &i in indices {
        doomed[i] = true;
    }
    let removed = indices
        .iter()
        .map(|&i| RemovedEdge {
            edge: topology.edges()[i],
            weight: layer.weights[i],
        })
        .collect();
    let mut keep = doomed.iter().map(|d| !d);
    topology.edges_mut().retain(|_| keep.next().unwrap());
    let mut keep = doomed.iter().map(|d| !d);
    layer.weights.retain(|_| keep.next().unwrap());
    let mut keep = doomed.iter().map(|d| !d);
    layer.velocity.weights.retain(|_| keep.next().unwrap());
    removed
}

/// Removes `floor(ζ·P)` smallest positive and `floor(ζ·N)` largest negative
/// weights. Ties go to the lexicographically smaller `(source, target)`.
pub fn remove_magnitude(
    topology: &mut LayerTopology,
    layer: &mut SparseLayer,
    zeta: f64,
) -> Vec<RemovedEdge> {
    let idx = magnitude_removal_indices(&layer.weights, zeta);
    remove_indices(topology, layer, &idx)
}

/// Removes the connections with the smallest `|w|·C`, as many as
/// [`remove_magnitude`] would.
pub fn remove_cosine_weighted(
    topology: &mut LayerTopology,
    layer: &mut SparseLayer,
    edge_similarities: &[f64],
    zeta: f64,
) -> Result<Vec<RemovedEdge>> {
    if edge_similarities.len() != topology.len() {
        return Err(Error::DimensionMismatch {
            what: "edge similarities",
            expected: topology.len(),
            found: edge_similarities.len(),
        });
    }
    let idx = cosine_weighted_removal_indices(&layer.weights, edge_similarities, zeta);
    Ok(remove_indices(topology, layer, &idx))
}

fn non_edges(topology: &LayerTopology) -> Vec<usize> {
    let occupied = topology.occupancy();
    (0..occupied.len()).filter(|&i| !occupied[i]).collect()
}

/// Up to `k` uniformly random non-edges, as flat `source * n_next + target`
/// indices.
pub fn select_random<R: Rng + ?Sized>(topology: &LayerTopology, k: usize, rng: &mut R) -> Vec<usize> {
    let capacity = topology.capacity();
    let free = capacity - topology.len();
    if k == 0 || free == 0 {
        return Vec::new();
    }
    if k >= free {
        return non_edges(topology);
    }
    if free * 2 >= capacity {
        // rejection sampling over (source, target) pairs
        let mut taken = topology.occupancy();
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let s = rng.random_range(0..topology.n_prev());
            let t = rng.random_range(0..topology.n_next());
            let flat = s * topology.n_next() + t;
            if !taken[flat] {
                taken[flat] = true;
                out.push(flat);
            }
        }
        out
    } else {
        // dense layer: sample directly among the few free slots
        let free_slots = non_edges(topology);
        index::sample(rng, free_slots.len(), k)
            .into_iter()
            .map(|i| free_slots[i])
            .collect()
    }
}

fn check_shape(topology: &LayerTopology, c: &CosineMatrix) -> Result<()> {
    if c.n_prev() != topology.n_prev() || c.n_next() != topology.n_next() {
        return Err(Error::DimensionMismatch {
            what: "cosine matrix shape",
            expected: topology.capacity(),
            found: c.n_prev() * c.n_next(),
        });
    }
    Ok(())
}

/// The `k` non-edges with the largest similarity; ties go to the
/// lexicographically smaller `(source, target)`. Returns `None` when every
/// candidate has similarity 0.
pub fn select_top_cosine(
    topology: &LayerTopology,
    c: &CosineMatrix,
    k: usize,
) -> Result<Option<Vec<usize>>> {
    check_shape(topology, c)?;
    let mut candidates = non_edges(topology);
    if k == 0 || candidates.is_empty() {
        return Ok(Some(Vec::new()));
    }
    let values = c.values();
    if candidates.iter().all(|&i| values[i] == 0.0) {
        return Ok(None);
    }
    let order = |a: &usize, b: &usize| -> Ordering {
        values[*b].total_cmp(&values[*a]).then(a.cmp(b))
    };
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(order);
    Ok(Some(candidates))
}

/// Binary indexed tree over non-negative weights supporting removal and
/// prefix-sum search.
struct SumTree {
    tree: Vec<f64>,
    weights: Vec<f64>,
}

impl SumTree {
    fn new(weights: Vec<f64>) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + ((i + 1) & (!(i + 1) + 1));
            if parent <= n {
                let v = tree[i + 1];
                tree[parent] += v;
            }
        }
        Self { tree, weights }
    }

    fn total(&self) -> f64 {
        // sum of all prefix components
        let mut i = self.weights.len();
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    fn zero(&mut self, idx: usize) {
        let w = core::mem::replace(&mut self.weights[idx], 0.0);
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] -= w;
            i += i & (!i + 1);
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.weights.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// Draws up to `k` distinct non-edges, each draw proportional to similarity
/// among the candidates still available. When no positive mass remains the
/// rest are drawn uniformly and the second value is `true`.
pub fn select_probabilistic_cosine<R: Rng + ?Sized>(
    topology: &LayerTopology,
    c: &CosineMatrix,
    k: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, bool)> {
    check_shape(topology, c)?;
    let candidates = non_edges(topology);
    let k = k.min(candidates.len());
    if k == 0 {
        return Ok((Vec::new(), false));
    }
    let values = c.values();
    let weights: Vec<f64> = candidates.iter().map(|&i| values[i]).collect();
    let mut positive = weights.iter().filter(|&&w| w > 0.0).count();
    let mut tree = SumTree::new(weights);
    let mut chosen = vec![false; candidates.len()];
    let mut out = Vec::with_capacity(k);
    while out.len() < k && positive > 0 {
        let total = tree.total();
        let mut pick = tree.find(rng.random::<f64>() * total);
        if tree.weights[pick] <= 0.0 {
            // rounding landed on an exhausted slot; take the nearest live one
            pick = nearest_positive(&tree.weights, pick);
        }
        chosen[pick] = true;
        tree.zero(pick);
        positive -= 1;
        out.push(candidates[pick]);
    }
    let fallback = out.len() < k;
    if fallback {
        let rest: Vec<usize> = (0..candidates.len()).filter(|&i| !chosen[i]).collect();
        let need = k - out.len();
        out.extend(
            index::sample(rng, rest.len(), need)
                .into_iter()
                .map(|i| candidates[rest[i]]),
        );
    }
    Ok((out, fallback))
}

fn nearest_positive(weights: &[f64], from: usize) -> usize {
    (from..weights.len())
        .find(|&i| weights[i] > 0.0)
        .or_else(|| (0..from).rev().find(|&i| weights[i] > 0.0))
        .expect("positive mass remains")
}

/// Inserts connections given as flat indices with weights drawn from the
/// initialization distribution, stamping them with `epoch`.
fn insert_edges<R: Rng + ?Sized>(
    topology: &mut LayerTopology,
    layer: &mut SparseLayer,
    flat: &[usize],
    epoch: usize,
    rng: &mut R,
) -> Vec<Edge> {
    let n_next = topology.n_next();
    let dist = crate::sparse_net::weight_distribution(topology.n_prev(), n_next);
    let added: Vec<Edge> = flat
        .iter()
        .map(|&f| Edge::new(f / n_next, f % n_next, epoch))
        .collect();
    for e in &added {
        topology.edges_mut().push(*e);
        layer.weights.push(dist.sample(rng));
        layer.velocity.weights.push(0.0);
    }
    restore_order(topology, layer);
    added
}

fn restore_order(topology: &mut LayerTopology, layer: &mut SparseLayer) {
    let edges = topology.edges_mut();
    let mut perm: Vec<usize> = (0..edges.len()).collect();
    perm.sort_unstable_by_key(|&i| edges[i].key());
    let new_edges: Vec<Edge> = perm.iter().map(|&i| edges[i]).collect();
    let new_w: Vec<f64> = perm.iter().map(|&i| layer.weights[i]).collect();
    let new_v: Vec<f64> = perm.iter().map(|&i| layer.velocity.weights[i]).collect();
    *edges = new_edges;
    layer.weights = new_w;
    layer.velocity.weights = new_v;
}

/// Adds `k` uniformly random new connections (all remaining ones if fewer
/// exist).
pub fn add_random<R: Rng + ?Sized>(
    topology: &mut LayerTopology,
    layer: &mut SparseLayer,
    k: usize,
    rng: &mut R,
    epoch: usize,
) -> Addition {
    let flat = select_random(topology, k, rng);
    Addition {
        edges: insert_edges(topology, layer, &flat, epoch, rng),
        fallback: false,
    }
}

/// Adds the `k` absent connections with the largest similarity. If no
/// candidate has positive similarity the addition is uniform random and
/// flagged.
pub fn add_top_cosine<R: Rng + ?Sized>(
    topology: &mut LayerTopology,
    layer: &mut SparseLayer,
    c: &CosineMatrix,
    k: usize,
    rng: &mut R,
    epoch: usize,
) -> Result<Addition> {
    let (flat, fallback) = match select_top_cosine(topology, c, k)? {
        Some(flat) => (flat, false),
        None => (select_random(topology, k, rng), true),
    };
    Ok(Addition {
        edges: insert_edges(topology, layer, &flat, epoch, rng),
        fallback,
    })
}

/// Adds `k` connections drawn without replacement with probability
/// proportional to similarity, renormalized after every draw.
pub fn add_probabilistic_cosine<R: Rng + ?Sized>(
    topology: &mut LayerTopology,
    layer: &mut SparseLayer,
    c: &CosineMatrix,
    k: usize,
    rng: &mut R,
    epoch: usize,
) -> Result<Addition> {
    let (flat, fallback) = select_probabilistic_cosine(topology, c, k, rng)?;
    Ok(Addition {
        edges: insert_edges(topology, layer, &flat, epoch, rng),
        fallback,
    })
}

/// Rewires every bipartite layer of `model` using the activations recorded
/// during the finished epoch, then advances the epoch counter and clears the
/// records.
///
/// Each layer consumes its own generator seeded from `rng`, so layers are
/// independent of each other's random draws.
pub fn evolve_epoch(
    model: &mut Model,
    records: &mut EpochRecords,
    backend: &dyn CosineBackend,
    rng: &mut dyn RngCore,
) -> Result<RewireReport> {
    let n_layers = model.topology().num_layers();
    if records.num_layers() != n_layers + 1 {
        return Err(Error::DimensionMismatch {
            what: "recorded layer count",
            expected: n_layers + 1,
            found: records.num_layers(),
        });
    }
    for k in 0..n_layers {
        let lt = model.topology().layer(k);
        for (rec, width) in [(k, lt.n_prev()), (k + 1, lt.n_next())] {
            if records.layer(rec).width() != width {
                return Err(Error::InvalidArgument(format!(
                    "record {rec} has width {} but layer {k} expects {width}",
                    records.layer(rec).width()
                )));
            }
        }
    }
    let policy = model.policy();
    let zeta = model.config().zeta;
    let epoch = model.epoch() + 1;
    let seeds: Vec<u64> = (0..n_layers).map(|_| rng.next_u64()).collect();
    let needs_full = policy.addition_rule() != AdditionRule::Random;

    let mut report = RewireReport {
        epoch,
        layers: Vec::with_capacity(n_layers),
    };
    let (topology, layers) = model.parts_mut();
    for (k, seed) in seeds.into_iter().enumerate() {
        let mut layer_rng = ChaCha8Rng::seed_from_u64(seed);
        let prev = records.layer(k);
        let next = records.layer(k + 1);
        let lt = topology.layer_mut(k);
        let layer = &mut layers[k];
        let mut dots = 0;

        let full = if needs_full {
            let c = backend.cosine_full(prev, next)?;
            dots += c.dot_products();
            Some(c)
        } else {
            None
        };

        let removed = match policy.removal_rule() {
            RemovalRule::Magnitude => remove_magnitude(lt, layer, zeta),
            RemovalRule::CosineWeighted => {
                let sims: Vec<f64> = match &full {
                    // reuse the full matrix rather than recomputing per edge
                    Some(c) => lt
                        .edges()
                        .iter()
                        .map(|e| c.get(e.source as usize, e.target as usize))
                        .collect(),
                    None => {
                        let s = cosine_edges(prev, next, lt.edges())?;
                        dots += s.dot_products;
                        s.values
                    }
                };
                remove_cosine_weighted(lt, layer, &sims, zeta)?
            }
        };

        let k_add = removed.len();
        let addition = match policy.addition_rule() {
            AdditionRule::Random => add_random(lt, layer, k_add, &mut layer_rng, epoch),
            AdditionRule::TopCosine => add_top_cosine(
                lt,
                layer,
                full.as_ref().expect("computed above"),
                k_add,
                &mut layer_rng,
                epoch,
            )?,
            AdditionRule::ProbabilisticCosine => add_probabilistic_cosine(
                lt,
                layer,
                full.as_ref().expect("computed above"),
                k_add,
                &mut layer_rng,
                epoch,
            )?,
        };
        report.layers.push(LayerRewire {
            layer: k,
            removed: removed.len(),
            added: addition.edges.len(),
            dot_products: dots,
            fallback: addition.fallback,
        });
    }
    model.epoch = epoch;
    records.clear();
    Ok(report)
}

impl fmt::Display for RewireReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .layers
            .iter()
            .map(|l| format!("L{}: -{}/+{}", l.layer, l.removed, l.added))
            .collect();
        write!(f, "epoch {} [{}]", self.epoch, parts.join(", "))
    }
}
