use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An active connection between neuron `source` of the previous layer and
/// neuron `target` of the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    /// Epoch in which the connection was (re)created; 0 for the initial topology.
    pub birth_epoch: u32,
}

impl Edge {
    pub fn new(source: usize, target: usize, birth_epoch: usize) -> Self {
        Self {
            source: source as u32,
            target: target as u32,
            birth_epoch: birth_epoch as u32,
        }
    }

    #[inline]
    pub fn key(&self) -> (u32, u32) {
        (self.source, self.target)
    }
}

/// Connectivity of one bipartite layer. Edges are kept sorted by
/// `(source, target)`, and parameter vectors elsewhere are aligned to that
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTopology {
    n_prev: usize,
    n_next: usize,
    edges: Vec<Edge>,
}

impl LayerTopology {
    /// Builds a layer from an edge list, checking ranges and duplicates.
    /// Edges are sorted into canonical order.
    pub fn new(n_prev: usize, n_next: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if n_prev == 0 || n_next == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "layer width of 0 in a {n_prev}x{n_next} layer"
            )));
        }
        for e in &edges {
            check_range(e.source as usize, e.target as usize, n_prev, n_next)?;
        }
        edges.sort_unstable_by_key(Edge::key);
        if let Some(w) = edges.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(Error::DuplicateEdge {
                source_index: w[0].source as usize,
                target: w[0].target as usize,
            });
        }
        Ok(Self {
            n_prev,
            n_next,
            edges,
        })
    }

    pub fn empty(n_prev: usize, n_next: usize) -> Result<Self> {
        Self::new(n_prev, n_next, Vec::new())
    }

    #[inline]
    pub fn n_prev(&self) -> usize {
        self.n_prev
    }

    #[inline]
    pub fn n_next(&self) -> usize {
        self.n_next
    }

    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.n_prev * self.n_next
    }

    pub fn contains(&self, source: usize, target: usize) -> bool {
        self.edges
            .binary_search_by_key(&(source as u32, target as u32), Edge::key)
            .is_ok()
    }

    /// Row-major `n_prev x n_next` occupancy mask.
    pub fn occupancy(&self) -> Vec<bool> {
        let mut mask = vec![false; self.capacity()];
        for e in &self.edges {
            mask[e.source as usize * self.n_next + e.target as usize] = true;
        }
        mask
    }

    pub(crate) fn edges_mut(&mut self) -> &mut Vec<Edge> {
        &mut self.edges
    }
}

pub(crate) fn check_range(source: usize, target: usize, n_prev: usize, n_next: usize) -> Result<()> {
    if source >= n_prev || target >= n_next {
        return Err(Error::EdgeOutOfRange {
            source_index: source,
            target,
            n_prev,
            n_next,
        });
    }
    Ok(())
}

/// Connectivity of the whole network, input layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    layers: Vec<LayerTopology>,
}

impl Topology {
    /// Wraps per-layer topologies, requiring consecutive widths to chain.
    pub fn from_layers(layers: Vec<LayerTopology>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("no layers".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].n_next != pair[1].n_prev {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {k} has {} outputs but layer {} expects {} inputs",
                    pair[0].n_next,
                    k + 1,
                    pair[1].n_prev
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerTopology] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &LayerTopology {
        &self.layers[k]
    }

    pub(crate) fn layer_mut(&mut self, k: usize) -> &mut LayerTopology {
        &mut self.layers[k]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.n_prev, l.n_next)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.layers.iter().map(LayerTopology::len).sum()
    }
}

/// Erdős–Rényi inclusion probability `ε(n_prev + n_next) / (n_prev·n_next)`,
/// clamped to 1.
pub fn inclusion_probability(n_prev: usize, n_next: usize, epsilon: f64) -> f64 {
    let p = epsilon * (n_prev + n_next) as f64 / (n_prev as f64 * n_next as f64);
    p.min(1.0)
}

/// Samples a sparse topology: every possible connection of every bipartite
/// layer is included independently with [`inclusion_probability`].
pub fn init_topology<R: Rng + ?Sized>(
    layer_shapes: &[(usize, usize)],
    epsilon: f64,
    rng: &mut R,
) -> Result<Topology> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut layers = Vec::with_capacity(layer_shapes.len());
    for &(n_prev, n_next) in layer_shapes {
        if n_prev == 0 || n_next == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "layer width of 0 in a {n_prev}x{n_next} layer"
            )));
        }
        let p = inclusion_probability(n_prev, n_next, epsilon);
        let mut edges = Vec::with_capacity((p * (n_prev * n_next) as f64) as usize + 16);
        for i in 0..n_prev {
            for j in 0..n_next {
                if rng.random::<f64>() < p {
                    edges.push(Edge::new(i, j, 0));
                }
            }
        }
        layers.push(LayerTopology {
            n_prev,
            n_next,
            edges,
        });
    }
    Topology::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn probability_formula() {
        assert!((inclusion_probability(500, 1000, 20.0) - 0.06).abs() < 1e-15);
        assert_eq!(inclusion_probability(2, 2, 1.0), 1.0);
        assert_eq!(inclusion_probability(1000, 2, 20.0), 1.0);
    }

    #[test]
    fn edge_count_within_four_sigma() {
        // Bernoulli sum: mean n·p = 30000, sd sqrt(n·p·(1-p)) ≈ 167.9
        let n = 500.0 * 1000.0;
        let p = 0.06;
        let mean = n * p;
        let sd = libm::sqrt(n * p * (1.0 - p));
        assert!((sd - 167.9).abs() < 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = init_topology(&[(500, 1000)], 20.0, &mut rng).unwrap();
        let count = t.layer(0).len() as f64;
        assert!((count - mean).abs() <= 4.0 * sd, "count {count}");
        assert!(t.layer(0).edges().iter().all(|e| e.birth_epoch == 0));
    }

    #[test]
    fn clamped_probability_gives_full_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = init_topology(&[(2, 2)], 1.0, &mut rng).unwrap();
        assert_eq!(t.layer(0).len(), 4);
    }

    #[test]
    fn same_seed_same_edges() {
        let shapes = [(30, 20), (20, 5)];
        let a = init_topology(&shapes, 3.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = init_topology(&shapes, 3.0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_width_is_invalid_architecture() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            init_topology(&[(0, 3)], 1.0, &mut rng),
            Err(Error::InvalidArchitecture(_))
        ));
        assert!(matches!(
            init_topology(&[(3, 4), (4, 0)], 1.0, &mut rng),
            Err(Error::InvalidArchitecture(_))
        ));
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        let dup = alloc::vec![Edge::new(0, 1, 0), Edge::new(0, 1, 0)];
        assert!(matches!(
            LayerTopology::new(2, 2, dup),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            LayerTopology::new(2, 2, alloc::vec![Edge::new(2, 0, 0)]),
            Err(Error::EdgeOutOfRange { .. })
        ));
    }

    #[test]
    fn chain_mismatch_rejected() {
        let a = LayerTopology::empty(3, 4).unwrap();
        let b = LayerTopology::empty(5, 2).unwrap();
        assert!(Topology::from_layers(alloc::vec![a, b]).is_err());
    }
}
