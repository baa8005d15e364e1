//! JSON persistence for trained models.
//!
//! Each layer stores its connections as `[source, target, birth_epoch,
//! weight]` quadruples. Floats are written in shortest round-trip form, so a
//! saved and reloaded model predicts bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sparse_evo_core::{
    Edge, EvolutionPolicy, LayerTopology, Model, SparseLayer, SreluParams, Topology, TrainConfig,
};

use crate::error::{IoError, Result};

pub const FORMAT: &str = "sparse-evo-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub policy: EvolutionPolicy,
    /// Completed training epochs.
    pub epoch: usize,
    pub config: TrainConfig,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub n_prev: usize,
    pub n_next: usize,
    pub edges: Vec<(u32, u32, u32, f64)>,
    pub biases: Vec<f64>,
    /// `[t_left, a_left, t_right, a_right]` per unit; empty for the output
    /// layer.
    pub srelu: Vec<[f64; 4]>,
}

impl ModelFile {
    pub fn from_model(model: &Model) -> Self {
        let layers = model
            .topology()
            .layers()
            .iter()
            .zip(model.layers())
            .map(|(lt, layer)| LayerFile {
                n_prev: lt.n_prev(),
                n_next: lt.n_next(),
                edges: lt
                    .edges()
                    .iter()
                    .zip(layer.weights())
                    .map(|(e, &w)| (e.source, e.target, e.birth_epoch, w))
                    .collect(),
                biases: layer.biases().to_vec(),
                srelu: layer.srelu().iter().map(|p| p.to_array()).collect(),
            })
            .collect();
        Self {
            format: FORMAT.to_string(),
            policy: model.policy(),
            epoch: model.epoch(),
            config: model.config().clone(),
            layers,
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format != FORMAT {
            return Err(IoError::Config(format!(
                "unsupported model format {:?}, expected {FORMAT:?}",
                self.format
            )));
        }
        let mut topologies = Vec::with_capacity(self.layers.len());
        let mut params = Vec::with_capacity(self.layers.len());
        for lf in self.layers {
            let mut edges = Vec::with_capacity(lf.edges.len());
            let mut weighted = Vec::with_capacity(lf.edges.len());
            for &(s, t, b, w) in &lf.edges {
                edges.push(Edge::new(s as usize, t as usize, b as usize));
                weighted.push(((s, t), w));
            }
            let lt = LayerTopology::new(lf.n_prev, lf.n_next, edges)?;
            // the topology keeps edges sorted, so align weights to its order
            weighted.sort_by_key(|&(key, _)| key);
            let weights = weighted.into_iter().map(|(_, w)| w).collect();
            let srelu = lf.srelu.iter().map(|&a| SreluParams::from_array(a)).collect();
            params.push((weights, lf.biases, srelu));
            topologies.push(lt);
        }
        let layers = topologies
            .iter()
            .zip(params)
            .map(|(lt, (w, b, s))| SparseLayer::new(lt, w, b, s))
            .collect::<sparse_evo_core::Result<Vec<_>>>()?;
        let topology = Topology::from_layers(topologies)?;
        Ok(Model::from_parts(
            topology,
            layers,
            self.policy,
            self.config,
            self.epoch,
        )?)
    }
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let text =
        serde_json::to_string(&ModelFile::from_model(model)).map_err(|e| IoError::json(path, e))?;
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| IoError::json(path, e))?;
    file.into_model()
}
