//! The four subcommands as library functions, so they can be driven from
//! tests as well as from the binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use sparse_evo_core::analysis::DEFAULT_ABLATION_STEP;
use sparse_evo_core::{
    ablation_curve, accuracy, degree_histogram, gen_madelon_like, input_degrees, snapshot_curves,
    AblationCurve, AblationOrder, CosineBackend, Dataset, EpochRecords, Mode, Model,
    Normalization, Trainer,
};

use crate::config::{write_config, RunConfig};
use crate::csv_io::{load_csv, write_dataset_csv};
use crate::error::{IoError, Result};
use crate::metrics::{rewiring_rows, EpochLog, METRICS_HEADER, REWIRING_HEADER, TIMING_HEADER};
use crate::model_io::{load_model, save_model};
use crate::parallel::ThreadedCosine;

pub const TEST_SPLIT_FILE: &str = "test.csv";

/// What a finished training run leaves behind in memory.
#[derive(Debug)]
pub struct TrainOutcome {
    pub out_dir: PathBuf,
    pub logs: Vec<EpochLog>,
    pub model: Model,
    pub test: Dataset,
}

impl TrainOutcome {
    pub fn final_test_accuracy(&self) -> f64 {
        self.logs.last().map_or(f64::NAN, |l| l.test_accuracy)
    }
}

/// Loads or generates the configured dataset, normalizes it and splits off
/// the test set.
pub fn load_run_data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let mut data = match (&cfg.data, cfg.generator.as_deref()) {
        (Some(path), _) => load_csv(path, &cfg.label_column, Normalization::None)?,
        (None, Some("madelon-like")) => gen_madelon_like(cfg.generator_samples, cfg.data_seed)?,
        (None, other) => {
            return Err(IoError::Config(format!("cannot resolve dataset from {other:?}")))
        }
    };
    data.normalize(cfg.normalize)?;
    let split = match cfg.test_samples {
        Some(n) => data.split_counts(n, cfg.data_seed)?,
        None => data.split(cfg.test_fraction, cfg.data_seed)?,
    };
    Ok(split)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))
}

struct LineFile {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LineFile {
    fn create(path: PathBuf, header: &str) -> Result<Self> {
        let file = File::create(&path).map_err(|e| IoError::io(&path, e))?;
        let mut me = Self {
            path,
            out: BufWriter::new(file),
        };
        me.write(&format!("{header}\n"))?;
        Ok(me)
    }

    fn write(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| IoError::io(&self.path, e))
    }
}

/// Trains with the similarity backend selected by `SPARSE_EVO_THREADS`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cmd_train_with(cfg, Box::new(ThreadedCosine::from_env()), |_| {})
}

/// Trains according to `cfg`, writing the run directory as it goes and
/// calling `on_epoch` after each epoch.
pub fn cmd_train_with(
    cfg: &RunConfig,
    backend: Box<dyn CosineBackend>,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (train, test) = load_run_data(cfg)?;
    let dir = cfg.out.clone();
    create_dir(&dir)?;
    write_config(&dir.join("run_config.json"), cfg)?;
    write_dataset_csv(&dir.join(TEST_SPLIT_FILE), &test, &cfg.label_column)?;

    let n_classes = train.n_classes().max(test.n_classes());
    let model = Model::new(train.n_features(), n_classes, cfg.policy, cfg.train_config())?;
    if cfg.checkpoints.contains(&0) {
        save_model(&dir.join("model_epoch0.json"), &model)?;
    }
    let mut trainer = Trainer::with_backend(model, backend);
    let mut metrics = LineFile::create(dir.join("metrics.csv"), METRICS_HEADER)?;
    let mut rewiring = LineFile::create(dir.join("rewiring.csv"), REWIRING_HEADER)?;
    let mut timing = LineFile::create(dir.join("timing.csv"), TIMING_HEADER)?;
    let mut logs = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let start = Instant::now();
        let stats = trainer.run_epoch(&train, Some(&test))?;
        let log = EpochLog::new(&stats, start.elapsed().as_millis());
        metrics.write(&format!("{}\n", log.metrics_row()))?;
        rewiring.write(&rewiring_rows(&stats.rewire))?;
        timing.write(&format!("{}\n", log.timing_row()))?;
        if cfg.checkpoints.contains(&stats.epoch) {
            save_model(
                &dir.join(format!("model_epoch{}.json", stats.epoch)),
                trainer.model(),
            )?;
        }
        on_epoch(&log);
        logs.push(log);
    }
    let model = trainer.into_model();
    save_model(&dir.join("model.json"), &model)?;
    Ok(TrainOutcome {
        out_dir: dir,
        logs,
        model,
        test,
    })
}

/// Accuracy of a saved model on a CSV dataset.
pub fn cmd_evaluate(
    model_path: &Path,
    data_path: &Path,
    label_column: &str,
    normalize: Normalization,
) -> Result<f64> {
    let model = load_model(model_path)?;
    let data = load_csv(data_path, label_column, normalize)?;
    Ok(accuracy(&model, &data)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeMode {
    Degrees,
    Ablation,
    Snapshots,
    Cosine,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub mode: AnalyzeMode,
    /// A model file or a glob pattern matching checkpoint files.
    pub model: String,
    pub data: PathBuf,
    pub out: PathBuf,
    pub label_column: String,
    pub normalize: Normalization,
    pub step: usize,
    pub bins: usize,
    /// Layer whose similarity matrix the cosine mode writes.
    pub layer: usize,
}

impl AnalyzeOptions {
    pub fn new(mode: AnalyzeMode, model: &str, data: &Path, out: &Path) -> Self {
        Self {
            mode,
            model: model.to_string(),
            data: data.to_path_buf(),
            out: out.to_path_buf(),
            label_column: crate::csv_io::DEFAULT_LABEL_COLUMN.to_string(),
            normalize: Normalization::None,
            step: DEFAULT_ABLATION_STEP,
            bins: 20,
            layer: 0,
        }
    }
}

/// Expands a glob pattern, or passes a plain path through.
pub fn resolve_models(pattern: &str) -> Result<Vec<PathBuf>> {
    if !pattern.contains(['*', '?', '[']) {
        return Ok(vec![PathBuf::from(pattern)]);
    }
    let paths = glob::glob(pattern)
        .map_err(|e| IoError::Config(format!("bad glob {pattern:?}: {e}")))?
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| {
            let path = e.path().to_path_buf();
            IoError::io(path, e.into())
        })?;
    if paths.is_empty() {
        return Err(IoError::Config(format!("no files match {pattern:?}")));
    }
    Ok(paths)
}

fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| IoError::io(&path, e))?;
    Ok(path)
}

fn curve_csv(curve: &AblationCurve) -> String {
    let mut text = String::from("removed,accuracy\n");
    for (removed, acc) in &curve.points {
        text.push_str(&format!("{removed},{acc:.6}\n"));
    }
    text
}

/// Runs one analysis and returns the files it wrote.
pub fn cmd_analyze(opts: &AnalyzeOptions) -> Result<Vec<PathBuf>> {
    let paths = resolve_models(&opts.model)?;
    let data = load_csv(&opts.data, &opts.label_column, opts.normalize)?;
    create_dir(&opts.out)?;
    let out = &opts.out;
    let single = || -> Result<Model> {
        match paths.as_slice() {
            [one] => load_model(one),
            _ => Err(IoError::Config(format!(
                "this mode takes one model, but {:?} matches {}",
                opts.model,
                paths.len()
            ))),
        }
    };
    let mut written = Vec::new();
    match opts.mode {
        AnalyzeMode::Degrees => {
            let model = single()?;
            let profile = input_degrees(&model, true);
            let roles = data.metadata().map(|m| &m.roles);
            let mut text = String::from("neuron,degree,role\n");
            for (i, d) in profile.degrees.iter().enumerate() {
                let role = roles.and_then(|r| r.get(i)).map_or("", |r| r.as_str());
                text.push_str(&format!("{i},{d},{role}\n"));
            }
            written.push(write_text(out.join("degrees.csv"), &text)?);
            let hist = degree_histogram(&profile, opts.bins)?;
            let mut text = String::from("bin_start,bin_end,count\n");
            for (i, c) in hist.counts.iter().enumerate() {
                text.push_str(&format!("{:.6},{:.6},{c}\n", hist.edges[i], hist.edges[i + 1]));
            }
            written.push(write_text(out.join("histogram.csv"), &text)?);
        }
        AnalyzeMode::Ablation => {
            let model = single()?;
            for order in [AblationOrder::Ascending, AblationOrder::Descending] {
                let curve = ablation_curve(&model, &data, order, opts.step)?;
                let name = format!("ablation_{}.csv", order.as_str());
                written.push(write_text(out.join(name), &curve_csv(&curve))?);
            }
        }
        AnalyzeMode::Snapshots => {
            let mut models = paths
                .iter()
                .map(|p| load_model(p))
                .collect::<Result<Vec<_>>>()?;
            models.sort_by_key(Model::epoch);
            let curves = snapshot_curves(&models, &data, opts.step)?;
            for (model, curve) in models.iter().zip(&curves) {
                let name = format!("snapshot_epoch{}.csv", model.epoch());
                written.push(write_text(out.join(name), &curve_csv(curve))?);
            }
        }
        AnalyzeMode::Cosine => {
            let model = single()?;
            let n_layers = model.topology().num_layers();
            if opts.layer >= n_layers {
                return Err(IoError::Config(format!(
                    "layer {} out of range; the model has {n_layers}",
                    opts.layer
                )));
            }
            let mut records = EpochRecords::for_model(&model);
            let samples = data.samples();
            for chunk in samples.chunks(model.config().batch_size) {
                model.forward(chunk, Mode::Eval, Some(&mut records))?;
            }
            let backend = ThreadedCosine::from_env();
            let c = backend.cosine_full(records.layer(opts.layer), records.layer(opts.layer + 1))?;
            let mut text = String::from("source");
            for q in 0..c.n_next() {
                text.push_str(&format!(",t{q}"));
            }
            text.push('\n');
            for p in 0..c.n_prev() {
                text.push_str(&p.to_string());
                for q in 0..c.n_next() {
                    text.push_str(&format!(",{:.6}", c.get(p, q)));
                }
                text.push('\n');
            }
            let name = format!("cosine_layer{}.csv", opts.layer);
            written.push(write_text(out.join(name), &text)?);
        }
    }
    Ok(written)
}

/// Writes a generated dataset and its role metadata sidecar.
pub fn cmd_gen_data(preset: &str, n_samples: usize, seed: u64, out_path: &Path) -> Result<()> {
    if preset != "madelon-like" {
        return Err(IoError::Config(format!(
            "unknown generator preset {preset:?}; expected \"madelon-like\""
        )));
    }
    let data = gen_madelon_like(n_samples, seed)?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_dataset_csv(out_path, &data, crate::csv_io::DEFAULT_LABEL_COLUMN)
}
