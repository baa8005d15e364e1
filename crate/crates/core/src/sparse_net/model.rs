use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::layer::{init_weights, SparseLayer};
use super::matrix::{axpy, dot, Activations};
use super::srelu::{srelu, srelu_partials};
use super::topology::{init_topology, Topology};
use crate::activation_log::EpochRecords;
use crate::error::{Error, Result};
use crate::evolution::EvolutionPolicy;
use crate::rng::{stream, Stream};

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Sparsity constant of the initial Erdős–Rényi topology.
    pub epsilon: f64,
    /// Fraction of connections rewired after every epoch.
    pub zeta: f64,
    /// Learning rate.
    pub eta: f64,
    pub dropout_rate: f64,
    pub hidden_dims: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    /// Maximum number of samples per epoch whose activations are recorded.
    pub activation_sample_cap: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 20.0,
            zeta: 0.3,
            eta: 0.01,
            dropout_rate: 0.3,
            hidden_dims: vec![1000, 1000, 1000],
            epochs: 100,
            batch_size: 100,
            momentum: 0.9,
            seed: 0,
            activation_sample_cap: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return bad(format!("zeta must lie in (0, 1), got {}", self.zeta));
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return bad(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArchitecture("hidden layer of width 0".into()));
        }
        if self.activation_sample_cap == Some(0) {
            return bad("activation_sample_cap must be at least 1 when set".into());
        }
        Ok(())
    }

    /// Layer shapes for a network with the configured hidden widths.
    pub fn layer_shapes(&self, input_dim: usize, n_classes: usize) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_dims.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(&self.hidden_dims);
        widths.push(n_classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Forward pass mode. Training applies dropout with masks drawn from the
/// supplied generator.
pub enum Mode<'a> {
    Train(&'a mut dyn RngCore),
    Eval,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Network input, one row per input neuron.
    pub inputs: Activations,
    /// Pre-activations of every layer.
    pub pre: Vec<Activations>,
    /// Post-SReLU, pre-dropout activations of every hidden layer.
    pub hidden: Vec<Activations>,
    /// Inverted-dropout multipliers per hidden layer (train mode only).
    pub masks: Vec<Option<Activations>>,
    /// Softmax output, one row per class.
    pub probs: Activations,
}

impl ForwardPass {
    pub fn batch_size(&self) -> usize {
        self.inputs.cols()
    }

    /// Predicted class per sample.
    pub fn predictions(&self) -> Vec<usize> {
        (0..self.probs.cols())
            .map(|b| {
                let mut best = 0;
                for c in 1..self.probs.rows() {
                    if self.probs.get(c, b) > self.probs.get(best, b) {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    /// What layer `k` consumed: the input for `k = 0`, otherwise the previous
    /// hidden layer after dropout.
    fn feed(&self, k: usize) -> Feed<'_> {
        if k == 0 {
            Feed::Plain(&self.inputs)
        } else {
            match &self.masks[k - 1] {
                Some(mask) => Feed::Masked(&self.hidden[k - 1], mask),
                None => Feed::Plain(&self.hidden[k - 1]),
            }
        }
    }
}

enum Feed<'a> {
    Plain(&'a Activations),
    Masked(&'a Activations, &'a Activations),
}

impl Feed<'_> {
    fn materialize(&self) -> alloc::borrow::Cow<'_, Activations> {
        match *self {
            Feed::Plain(a) => alloc::borrow::Cow::Borrowed(a),
            Feed::Masked(a, m) => {
                let mut out = a.clone();
                for (x, &s) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
                    *x *= s;
                }
                alloc::borrow::Cow::Owned(out)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub srelu: Vec<[f64; 4]>,
}

/// Loss gradients for every trainable parameter, aligned to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    /// Flattens in [`Model::flat_params`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend_from_slice(&g.weights);
            out.extend_from_slice(&g.biases);
            for p in &g.srelu {
                out.extend_from_slice(p);
            }
        }
        out
    }
}

/// A sparse MLP together with its evolution policy and run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub(crate) topology: Topology,
    pub(crate) layers: Vec<SparseLayer>,
    pub(crate) policy: EvolutionPolicy,
    pub(crate) config: TrainConfig,
    pub(crate) epoch: usize,
}

impl Model {
    /// Initializes topology and parameters from the configured seed.
    pub fn new(
        input_dim: usize,
        n_classes: usize,
        policy: EvolutionPolicy,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        if n_classes < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        let mut rng = stream(config.seed, Stream::Init, 0);
        let shapes = config.layer_shapes(input_dim, n_classes);
        let topology = init_topology(&shapes, config.epsilon, &mut rng)?;
        let layers = init_weights(&topology, &mut rng);
        Ok(Self {
            topology,
            layers,
            policy,
            config,
            epoch: 0,
        })
    }

    /// Reassembles a model from stored parts, validating that every layer
    /// matches its topology.
    pub fn from_parts(
        topology: Topology,
        layers: Vec<SparseLayer>,
        policy: EvolutionPolicy,
        config: TrainConfig,
        epoch: usize,
    ) -> Result<Self> {
        if layers.len() != topology.num_layers() {
            return Err(Error::DimensionMismatch {
                what: "layer count",
                expected: topology.num_layers(),
                found: layers.len(),
            });
        }
        let last = layers.len() - 1;
        for (k, (lt, layer)) in topology.layers().iter().zip(&layers).enumerate() {
            if layer.weights.len() != lt.len() || layer.biases.len() != lt.n_next() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {k} parameters do not match its topology"
                )));
            }
            let expected_srelu = if k < last { lt.n_next() } else { 0 };
            if layer.srelu.len() != expected_srelu {
                return Err(Error::DimensionMismatch {
                    what: "SReLU parameters",
                    expected: expected_srelu,
                    found: layer.srelu.len(),
                });
            }
            if let Some(e) = lt.edges().iter().find(|e| e.birth_epoch as usize > epoch) {
                return Err(Error::InvalidArgument(format!(
                    "edge ({}, {}) born in epoch {} after current epoch {epoch}",
                    e.source, e.target, e.birth_epoch
                )));
            }
        }
        Ok(Self {
            topology,
            layers,
            policy,
            config,
            epoch,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn layers(&self) -> &[SparseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [SparseLayer] {
        &mut self.layers
    }

    pub fn policy(&self) -> EvolutionPolicy {
        self.policy
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Number of completed (trained and rewired) epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn input_dim(&self) -> usize {
        self.topology.layer(0).n_prev()
    }

    pub fn n_classes(&self) -> usize {
        self.topology.layers().last().map_or(0, |l| l.n_next())
    }

    pub fn edge_count(&self) -> usize {
        self.topology.edge_count()
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Topology, &mut [SparseLayer]) {
        (&mut self.topology, &mut self.layers)
    }

    /// Sparse pre-activation of layer `k`: bias plus the weighted sum over
    /// existing connections only.
    pub fn pre_activation(&self, k: usize, input: &Activations) -> Result<Activations> {
        let lt = self.topology.layer(k);
        if input.rows() != lt.n_prev() {
            return Err(Error::DimensionMismatch {
                what: "layer input width",
                expected: lt.n_prev(),
                found: input.rows(),
            });
        }
        let layer = &self.layers[k];
        let mut z = Activations::zeros(lt.n_next(), input.cols());
        for (j, &b) in layer.biases.iter().enumerate() {
            z.row_mut(j).iter_mut().for_each(|v| *v = b);
        }
        for (e, &w) in lt.edges().iter().zip(&layer.weights) {
            axpy(w, input.row(e.source as usize), z.row_mut(e.target as usize));
        }
        Ok(z)
    }

    /// Feedforward over a batch of samples. When `recorder` is given, the
    /// inputs, post-SReLU pre-dropout hidden activations and output
    /// probabilities are appended to it.
    pub fn forward(
        &self,
        samples: &[&[f64]],
        mode: Mode<'_>,
        recorder: Option<&mut EpochRecords>,
    ) -> Result<ForwardPass> {
        let inputs = Activations::from_samples(samples, self.input_dim())?;
        let mut rng = match mode {
            Mode::Train(rng) => Some(rng),
            Mode::Eval => None,
        };
        let dropout = self.config.dropout_rate;
        let n_layers = self.topology.num_layers();
        let mut pre = Vec::with_capacity(n_layers);
        let mut hidden = Vec::with_capacity(n_layers - 1);
        let mut masks = Vec::with_capacity(n_layers - 1);
        let mut feed = inputs.clone();
        for k in 0..n_layers {
            let z = self.pre_activation(k, &feed)?;
            if k + 1 == n_layers {
                pre.push(z);
                break;
            }
            let mut h = z.clone();
            for (j, p) in self.layers[k].srelu.iter().enumerate() {
                h.row_mut(j).iter_mut().for_each(|x| *x = srelu(*x, p));
            }
            feed = h.clone();
            let mask = match rng.as_mut() {
                Some(rng) if dropout > 0.0 => {
                    let keep = 1.0 - dropout;
                    let scale = 1.0 / keep;
                    let mut m = Activations::zeros(h.rows(), h.cols());
                    for (mv, x) in m.as_mut_slice().iter_mut().zip(feed.as_mut_slice()) {
                        if rng.random::<f64>() < keep {
                            *mv = scale;
                            *x *= scale;
                        } else {
                            *x = 0.0;
                        }
                    }
                    Some(m)
                }
                _ => None,
            };
            pre.push(z);
            hidden.push(h);
            masks.push(mask);
        }
        let probs = softmax_columns(pre.last().expect("at least one layer"));
        let pass = ForwardPass {
            inputs,
            pre,
            hidden,
            masks,
            probs,
        };
        if let Some(rec) = recorder {
            rec.record_pass(&pass)?;
        }
        Ok(pass)
    }

    /// Mean softmax cross-entropy of a forward pass.
    pub fn loss(&self, pass: &ForwardPass, labels: &[usize]) -> Result<f64> {
        self.check_labels(pass, labels)?;
        let logits = pass.pre.last().expect("at least one layer");
        let b = labels.len();
        let mut total = 0.0;
        for (col, &y) in labels.iter().enumerate() {
            total += log_sum_exp_column(logits, col) - logits.get(y, col);
        }
        Ok(total / b as f64)
    }

    fn check_labels(&self, pass: &ForwardPass, labels: &[usize]) -> Result<()> {
        if labels.len() != pass.batch_size() {
            return Err(Error::DimensionMismatch {
                what: "label count",
                expected: pass.batch_size(),
                found: labels.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= self.n_classes()) {
            return Err(Error::InvalidArgument(format!(
                "label {y} out of range for {} classes",
                self.n_classes()
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy loss and its gradient with respect to every weight,
    /// bias and SReLU parameter. Only existing connections get a gradient.
    pub fn gradients(&self, pass: &ForwardPass, labels: &[usize]) -> Result<(f64, Gradients)> {
        let loss = self.loss(pass, labels)?;
        let n_layers = self.topology.num_layers();
        let batch = labels.len() as f64;

        // dL/dz at the output: (softmax - onehot) / B
        let mut delta = pass.probs.clone();
        for (col, &y) in labels.iter().enumerate() {
            delta.row_mut(y)[col] -= 1.0;
        }
        delta.as_mut_slice().iter_mut().for_each(|d| *d /= batch);

        let mut layers: Vec<LayerGradients> = (0..n_layers)
            .map(|_| LayerGradients {
                weights: Vec::new(),
                biases: Vec::new(),
                srelu: Vec::new(),
            })
            .collect();
        for k in (0..n_layers).rev() {
            let lt = self.topology.layer(k);
            let layer = &self.layers[k];
            let feed = pass.feed(k);
            let input = feed.materialize();

            layers[k].weights = lt
                .edges()
                .iter()
                .map(|e| dot(input.row(e.source as usize), delta.row(e.target as usize)))
                .collect();
            layers[k].biases = (0..lt.n_next()).map(|j| delta.row(j).iter().sum()).collect();

            if k == 0 {
                break;
            }
            // back through the connections into the previous hidden layer
            let mut d_feed = Activations::zeros(lt.n_prev(), delta.cols());
            for (e, &w) in lt.edges().iter().zip(&layer.weights) {
                axpy(w, delta.row(e.target as usize), d_feed.row_mut(e.source as usize));
            }
            if let Some(mask) = &pass.masks[k - 1] {
                for (d, &s) in d_feed.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *d *= s;
                }
            }
            let z_prev = &pass.pre[k - 1];
            let units = &self.layers[k - 1].srelu;
            let mut unit_grads = vec![[0.0; 4]; units.len()];
            for (j, (p, g)) in units.iter().zip(&mut unit_grads).enumerate() {
                for (d, &x) in d_feed.row_mut(j).iter_mut().zip(z_prev.row(j)) {
                    let (dx, dp) = srelu_partials(x, p);
                    for q in 0..4 {
                        g[q] += dp[q] * *d;
                    }
                    *d *= dx;
                }
            }
            layers[k - 1].srelu = unit_grads;
            delta = d_feed;
        }
        Ok((loss, Gradients { layers }))
    }

    /// One SGD-with-momentum step on a batch: `v = μ·v − η·g; θ += v`.
    /// Returns the batch loss. A non-finite loss aborts with a divergence
    /// error carrying `epoch` and `batch_index`.
    pub fn backward_and_update(
        &mut self,
        pass: &ForwardPass,
        labels: &[usize],
        batch_index: usize,
    ) -> Result<f64> {
        let (loss, grads) = self.gradients(pass, labels)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch: self.epoch + 1,
                batch: batch_index,
            });
        }
        let eta = self.config.eta;
        let mu = self.config.momentum;
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            let v = &mut layer.velocity;
            step(&mut layer.weights, &mut v.weights, &g.weights, mu, eta);
            step(&mut layer.biases, &mut v.biases, &g.biases, mu, eta);
            for ((p, vel), grad) in layer.srelu.iter_mut().zip(&mut v.srelu).zip(&g.srelu) {
                let mut arr = p.to_array();
                step(&mut arr, vel, grad, mu, eta);
                *p = super::SreluParams::from_array(arr);
            }
        }
        Ok(loss)
    }

    /// Class predictions in eval mode, computed in chunks of the configured
    /// batch size.
    pub fn predict(&self, samples: &[&[f64]]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(self.config.batch_size.max(1)) {
            out.extend(self.forward(chunk, Mode::Eval, None)?.predictions());
        }
        Ok(out)
    }

    /// Every trainable parameter in a fixed order: per layer the weights,
    /// the biases, then `(t_left, a_left, t_right, a_right)` per unit.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
            for p in &l.srelu {
                out.extend_from_slice(&p.to_array());
            }
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.flat_params().len();
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "flat parameter vector",
                expected,
                found: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
            for p in &mut l.srelu {
                let arr = [
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                    it.next().unwrap(),
                ];
                *p = super::SreluParams::from_array(arr);
            }
        }
        Ok(())
    }
}

fn step(params: &mut [f64], velocity: &mut [f64], grads: &[f64], mu: f64, eta: f64) {
    for ((p, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        *v = mu * *v - eta * g;
        *p += *v;
    }
}

fn log_sum_exp_column(m: &Activations, col: usize) -> f64 {
    let max = (0..m.rows())
        .map(|r| m.get(r, col))
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = (0..m.rows()).map(|r| libm::exp(m.get(r, col) - max)).sum();
    max + libm::log(sum)
}

fn softmax_columns(logits: &Activations) -> Activations {
    let mut probs = Activations::zeros(logits.rows(), logits.cols());
    for col in 0..logits.cols() {
        let max = (0..logits.rows())
            .map(|r| logits.get(r, col))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for r in 0..logits.rows() {
            let e = libm::exp(logits.get(r, col) - max);
            probs.row_mut(r)[col] = e;
            sum += e;
        }
        for r in 0..logits.rows() {
            probs.row_mut(r)[col] /= sum;
        }
    }
    probs
}
