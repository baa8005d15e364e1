use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::srelu::SreluParams;
use super::topology::{LayerTopology, Topology};
use crate::error::{Error, Result};

/// Parameters of one bipartite layer, aligned to its [`LayerTopology`].
///
/// `weights[i]` belongs to `topology.edges()[i]`. Hidden layers carry one
/// SReLU unit per target neuron; the output layer feeds a softmax and has
/// none.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLayer {
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
    pub(crate) srelu: Vec<SreluParams>,
    pub(crate) velocity: Velocity,
}

/// Momentum buffers, one per trainable parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Velocity {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub srelu: Vec<[f64; 4]>,
}

impl SparseLayer {
    /// Assembles a layer from stored parameters; momentum starts at zero.
    pub fn new(
        topology: &LayerTopology,
        weights: Vec<f64>,
        biases: Vec<f64>,
        srelu: Vec<SreluParams>,
    ) -> Result<Self> {
        if weights.len() != topology.len() {
            return Err(Error::DimensionMismatch {
                what: "layer weights",
                expected: topology.len(),
                found: weights.len(),
            });
        }
        if biases.len() != topology.n_next() {
            return Err(Error::DimensionMismatch {
                what: "layer biases",
                expected: topology.n_next(),
                found: biases.len(),
            });
        }
        if !srelu.is_empty() && srelu.len() != topology.n_next() {
            return Err(Error::DimensionMismatch {
                what: "SReLU parameters",
                expected: topology.n_next(),
                found: srelu.len(),
            });
        }
        let velocity = Velocity {
            weights: vec![0.0; weights.len()],
            biases: vec![0.0; biases.len()],
            srelu: vec![[0.0; 4]; srelu.len()],
        };
        Ok(Self {
            weights,
            biases,
            srelu,
            velocity,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn srelu(&self) -> &[SreluParams] {
        &self.srelu
    }

    pub fn srelu_mut(&mut self) -> &mut [SreluParams] {
        &mut self.srelu
    }

    pub fn has_activation(&self) -> bool {
        !self.srelu.is_empty()
    }

    /// Drops the momentum of every parameter.
    pub fn reset_momentum(&mut self) {
        self.velocity.weights.iter_mut().for_each(|v| *v = 0.0);
        self.velocity.biases.iter_mut().for_each(|v| *v = 0.0);
        self.velocity.srelu.iter_mut().for_each(|v| *v = [0.0; 4]);
    }
}

/// Standard deviation of freshly drawn connection weights.
pub(crate) fn weight_std(n_prev: usize, n_next: usize) -> f64 {
    libm::sqrt(2.0 / (n_prev + n_next) as f64)
}

pub(crate) fn weight_distribution(n_prev: usize, n_next: usize) -> Normal<f64> {
    // std is finite and positive for any non-empty layer
    Normal::new(0.0, weight_std(n_prev, n_next)).expect("valid normal parameters")
}

/// Draws parameters for every layer of `topology`: normal weights with
/// standard deviation `sqrt(2 / (n_prev + n_next))`, zero biases, and ReLU
/// shaped SReLU units on every hidden layer.
pub fn init_weights<R: Rng + ?Sized>(topology: &Topology, rng: &mut R) -> Vec<SparseLayer> {
    let last = topology.num_layers() - 1;
    topology
        .layers()
        .iter()
        .enumerate()
        .map(|(k, lt)| {
            let dist = weight_distribution(lt.n_prev(), lt.n_next());
            let weights = (0..lt.len()).map(|_| dist.sample(rng)).collect();
            let srelu = if k < last {
                vec![SreluParams::RELU; lt.n_next()]
            } else {
                Vec::new()
            };
            SparseLayer::new(lt, weights, vec![0.0; lt.n_next()], srelu)
                .expect("shapes derived from topology")
        })
        .collect()
}

/// Dense row-major `n_prev x n_next` matrix with edge weights in place and
/// zeros elsewhere.
pub fn densify(topology: &LayerTopology, layer: &SparseLayer) -> Result<Vec<f64>> {
    if layer.weights.len() != topology.len() {
        return Err(Error::InvalidArgument(format!(
            "layer has {} weights for {} edges",
            layer.weights.len(),
            topology.len()
        )));
    }
    let mut dense = vec![0.0; topology.capacity()];
    for (e, &w) in topology.edges().iter().zip(&layer.weights) {
        dense[e.source as usize * topology.n_next() + e.target as usize] = w;
    }
    Ok(dense)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_net::Edge;

    #[test]
    fn densify_empty_is_zero() {
        let lt = LayerTopology::empty(3, 4).unwrap();
        let layer = SparseLayer::new(&lt, vec![], vec![0.0; 4], vec![]).unwrap();
        assert_eq!(densify(&lt, &layer).unwrap(), vec![0.0; 12]);
    }

    #[test]
    fn densify_single_edge() {
        let lt = LayerTopology::new(3, 4, vec![Edge::new(1, 2, 0)]).unwrap();
        let layer = SparseLayer::new(&lt, vec![0.5], vec![0.0; 4], vec![]).unwrap();
        let d = densify(&lt, &layer).unwrap();
        for (idx, &v) in d.iter().enumerate() {
            if idx == 4 + 2 {
                assert_eq!(v, 0.5);
            } else {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn parameter_count_checked() {
        let lt = LayerTopology::new(2, 2, vec![Edge::new(0, 0, 0)]).unwrap();
        assert!(SparseLayer::new(&lt, vec![], vec![0.0; 2], vec![]).is_err());
        assert!(SparseLayer::new(&lt, vec![1.0], vec![0.0; 3], vec![]).is_err());
        assert!(SparseLayer::new(&lt, vec![1.0], vec![0.0; 2], vec![SreluParams::RELU]).is_err());
    }
}
