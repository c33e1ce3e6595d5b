//! Two-path alternating GAN training.
//!
//! Every iteration runs a latent-guided step (style from the mapping network)
//! followed by a reference-guided step (style from the encoder applied to an
//! independently drawn reference window). Each step first updates the
//! discriminator with the translator side frozen, then updates translator,
//! style encoder and mapping network with the discriminator frozen.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, NodeId, Tape, Tensor};
use crate::checkpoint::{self, find, tensor_u64, u64_tensor, Record};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::networks::{
    discriminate_nodes, encode_style_nodes, map_latent_nodes, select_label_block, step_constants, translate_nodes,
    Binding, EmotionLabel, ManipulatorParams, NetConfig,
};
use crate::objectives::{
    adv_loss_d_node, adv_loss_g_node, cycle_loss_node, jaw_series_node, l1_rows_node, speech_loss_node, LossReport,
    LossWeights, LOG_HEADER,
};
use crate::sequence::{DEFAULT_WINDOW, EXPR_DIM, LATENT_DIM};

pub const CHECKPOINT_FILE: &str = "model.nedm";
pub const LOG_FILE: &str = "train_log.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    /// Total iterations; each runs one latent and one reference step.
    pub iterations: u64,
    pub seed: u64,
    pub n_window: usize,
    pub hidden: NetConfig,
    pub weights: LossWeights,
    /// Iterations between checkpoint writes (0 = only at the end).
    pub checkpoint_interval: u64,
    /// Assemble batches on a helper thread. Batches are a pure function of
    /// `(seed, iteration)`, so results do not change.
    pub prefetch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 1e-4,
            beta1: 0.0,
            beta2: 0.99,
            epsilon: 1e-8,
            iterations: 5000,
            seed: 0,
            n_window: DEFAULT_WINDOW,
            hidden: NetConfig::default(),
            weights: LossWeights::default(),
            checkpoint_interval: 1000,
            prefetch: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid!("batch size must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(invalid!("iterations must be at least 1"));
        }
        if self.n_window < 2 {
            return Err(invalid!("window length must be at least 2"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(invalid!("learning rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid!("Adam betas must lie in [0, 1)"));
        }
        self.weights.validate()
    }

    pub fn adam(&self) -> Adam {
        Adam {
            lr: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parameters, optimizer moments (held in the parameter stores) and progress.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: ManipulatorParams,
    pub iteration: u64,
}

const ITERATION: &str = "__train.iteration";

impl TrainState {
    pub fn new(params: ManipulatorParams) -> Self {
        Self { params, iteration: 0 }
    }

    /// Model tensors, Adam state, iteration counter, then normalization statistics.
    pub fn to_records(&self) -> Vec<Record> {
        let mut r = self.params.param_records();
        for store in self.params.stores() {
            for e in store.entries() {
                r.push((format!("__adam.m/{}", e.name), e.m.clone()));
                r.push((format!("__adam.v/{}", e.name), e.v.clone()));
                r.push((format!("__adam.step/{}", e.name), u64_tensor(e.step)));
            }
        }
        r.push((ITERATION.into(), u64_tensor(self.iteration)));
        r.extend(self.params.norm_records());
        r
    }

    /// Restores a state. Plain model archives (no optimizer records) start at
    /// iteration 0 with fresh moments.
    pub fn from_records(records: &[Record]) -> Result<Self> {
        let mut params = ManipulatorParams::from_records(records)?;
        let Ok(it) = find(records, ITERATION) else {
            return Ok(Self::new(params));
        };
        let iteration = tensor_u64(it)?;
        for store in params.stores_mut() {
            for i in 0..store.len() {
                let name = store.entries()[i].name.clone();
                let m = find(records, &format!("__adam.m/{name}"))?.clone();
                let v = find(records, &format!("__adam.v/{name}"))?.clone();
                let step = tensor_u64(find(records, &format!("__adam.step/{name}"))?)?;
                let e = store.entry_mut(i);
                if m.dims() != e.value.dims() || v.dims() != e.value.dims() {
                    return Err(Error::Format(format!("{name}: optimizer moment dims mismatch")));
                }
                e.m = m;
                e.v = v;
                e.step = step;
            }
        }
        Ok(Self { params, iteration })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::write_file(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(&checkpoint::read_file(path)?)
    }
}

/// A batch of normalized windows (`N × 51` each) with their labels.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub windows: Vec<&'a [f32]>,
    pub labels: Vec<EmotionLabel>,
}

impl Batch<'_> {
    fn check(&self, n: usize) -> Result<()> {
        if self.windows.is_empty() || self.windows.len() != self.labels.len() {
            return Err(invalid!("batch needs matching, non-empty windows and labels"));
        }
        if self.windows.iter().any(|w| w.len() != n * EXPR_DIM) {
            return Err(invalid!("every window must hold {n} frames"));
        }
        Ok(())
    }
}

/// Where the target style comes from in a step.
enum StyleSource<'a> {
    Latent {
        z: &'a [[f32; LATENT_DIM]],
        targets: &'a [EmotionLabel],
    },
    Reference(&'a Batch<'a>),
}

impl StyleSource<'_> {
    fn targets(&self) -> &[EmotionLabel] {
        match self {
            StyleSource::Latent { targets, .. } => targets,
            StyleSource::Reference(b) => &b.labels,
        }
    }

    fn build(&self, tape: &mut Tape, params: &ManipulatorParams, binding: Binding, n: usize) -> Result<NodeId> {
        match self {
            StyleSource::Latent { z, targets } => {
                let rows: Vec<&[f32]> = z.iter().map(|r| r.as_slice()).collect();
                let z = tape.constant(Tensor::from_rows(&rows)?);
                map_latent_nodes(tape, params, binding, z, targets)
            }
            StyleSource::Reference(b) => {
                let steps = step_constants(tape, &b.windows, n)?;
                encode_style_nodes(tape, params, binding, &steps)
            }
        }
    }
}

fn branch_scores(tape: &mut Tape, scores: NodeId, labels: &[EmotionLabel]) -> Result<NodeId> {
    select_label_block(tape, scores, labels, 1)
}

fn finite(v: f32, what: &str) -> Result<f32> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Divergence(format!("{what} loss is {v}")))
    }
}

fn discriminator_update(
    params: &mut ManipulatorParams,
    cfg: &TrainConfig,
    content: &Batch,
    source: &StyleSource,
) -> Result<f32> {
    let n = cfg.n_window;
    let mut tape = Tape::new();
    let steps = step_constants(&mut tape, &content.windows, n)?;
    let style = source.build(&mut tape, params, Binding::Frozen, n)?;
    let fake = translate_nodes(&mut tape, params, Binding::Frozen, &steps, style)?;
    let real_all = discriminate_nodes(&mut tape, params, Binding::Trainable, &steps)?;
    let real = branch_scores(&mut tape, real_all, &content.labels)?;
    let fake_all = discriminate_nodes(&mut tape, params, Binding::Trainable, &fake)?;
    let fake = branch_scores(&mut tape, fake_all, source.targets())?;
    let loss = adv_loss_d_node(&mut tape, real, fake)?;
    let value = finite(tape.value(loss).item(), "discriminator")?;
    tape.backward_into(loss, &mut [&mut params.discriminator])?;
    params.discriminator.adam_step(&cfg.adam());
    Ok(value)
}

fn generator_update(
    params: &mut ManipulatorParams,
    cfg: &TrainConfig,
    content: &Batch,
    source: &StyleSource,
) -> Result<LossReport> {
    let n = cfg.n_window;
    let w = cfg.weights;
    let mut tape = Tape::new();
    let steps = step_constants(&mut tape, &content.windows, n)?;
    let style = source.build(&mut tape, params, Binding::Trainable, n)?;
    let fake = translate_nodes(&mut tape, params, Binding::Trainable, &steps, style)?;

    let scores = discriminate_nodes(&mut tape, params, Binding::Frozen, &fake)?;
    let scores = branch_scores(&mut tape, scores, source.targets())?;
    let adv = adv_loss_g_node(&mut tape, scores)?;

    let recovered = encode_style_nodes(&mut tape, params, Binding::Trainable, &fake)?;
    let sty = l1_rows_node(&mut tape, style, recovered)?;

    let own_style = encode_style_nodes(&mut tape, params, Binding::Trainable, &steps)?;
    let cycled = translate_nodes(&mut tape, params, Binding::Trainable, &fake, own_style)?;
    // Sequences are compared in raw expression units, as the translator's output is.
    let std = Tensor::from_rows(&vec![params.norm.std.as_slice(); content.windows.len()])?;
    let std = tape.constant(std);
    let raw = |tape: &mut Tape, xs: &[NodeId]| xs.iter().map(|&x| tape.mul(x, std)).collect::<Result<Vec<_>>>();
    let (raw_in, raw_cycled) = (raw(&mut tape, &steps)?, raw(&mut tape, &cycled)?);
    let cyc = cycle_loss_node(&mut tape, &raw_in, &raw_cycled)?;

    let jaw_in = jaw_series_node(&mut tape, &steps)?;
    let jaw_tr = jaw_series_node(&mut tape, &fake)?;
    let jaw_cyc = jaw_series_node(&mut tape, &cycled)?;
    let mouth = speech_loss_node(&mut tape, jaw_in, jaw_tr, jaw_cyc)?;

    let mut total = adv;
    for (term, weight) in [(sty, w.sty), (cyc, w.cyc), (mouth, w.mouth)] {
        if weight != 0.0 {
            let scaled = tape.scale(term, weight)?;
            total = tape.add(total, scaled)?;
        }
    }
    let report = LossReport {
        adv_d: 0.0,
        adv_g: finite(tape.value(adv).item(), "adversarial")?,
        sty: finite(tape.value(sty).item(), "style")?,
        cyc: finite(tape.value(cyc).item(), "cycle")?,
        mouth: finite(tape.value(mouth).item(), "speech")?,
        total_gem: finite(tape.value(total).item(), "total")?,
    };
    tape.backward_into(
        total,
        &mut [&mut params.translator, &mut params.style_encoder, &mut params.mapping],
    )?;
    let adam = cfg.adam();
    params.translator.adam_step(&adam);
    params.style_encoder.adam_step(&adam);
    params.mapping.adam_step(&adam);
    Ok(report)
}

fn run_step(state: &mut TrainState, cfg: &TrainConfig, content: &Batch, source: StyleSource) -> Result<LossReport> {
    content.check(cfg.n_window)?;
    if source.targets().len() != content.windows.len() {
        return Err(invalid!("style batch and content batch differ in size"));
    }
    let adv_d = discriminator_update(&mut state.params, cfg, content, &source)?;
    let mut report = generator_update(&mut state.params, cfg, content, &source)?;
    report.adv_d = adv_d;
    Ok(report)
}

/// Latent-guided step: styles `M_ỹ(z)` for the given codes and target labels.
pub fn train_step_latent(
    state: &mut TrainState,
    cfg: &TrainConfig,
    content: &Batch,
    z: &[[f32; LATENT_DIM]],
    targets: &[EmotionLabel],
) -> Result<LossReport> {
    if z.len() != targets.len() {
        return Err(invalid!("{} latent codes for {} target labels", z.len(), targets.len()));
    }
    run_step(state, cfg, content, StyleSource::Latent { z, targets })
}

/// Reference-guided step: styles `E(s̃)`, adversarial branch chosen by the reference labels.
pub fn train_step_reference(
    state: &mut TrainState,
    cfg: &TrainConfig,
    content: &Batch,
    reference: &Batch,
) -> Result<LossReport> {
    reference.check(cfg.n_window)?;
    run_step(state, cfg, content, StyleSource::Reference(reference))
}

/// Normalized clips and the index of all stride-1 training windows.
pub struct WindowPool {
    n: usize,
    clips: Vec<Vec<f32>>,
    windows: Vec<(usize, usize, EmotionLabel)>,
    labels: Vec<EmotionLabel>,
}

impl WindowPool {
    pub fn new(dataset: &Dataset, params: &ManipulatorParams, n: usize) -> Result<Self> {
        let mut clips = Vec::with_capacity(dataset.tracks.len());
        let mut windows = Vec::new();
        for (ci, (track, label)) in dataset.tracks.iter().enumerate() {
            if track.len() < n {
                return Err(invalid!("clip {ci} has {} frames, fewer than the window {n}", track.len()));
            }
            let mut data = vec![0.0; track.data().len()];
            for (src, dst) in track.frames().zip(data.chunks_exact_mut(EXPR_DIM)) {
                params.norm.normalize_frame(src, dst);
            }
            clips.push(data);
            windows.extend((0..=track.len() - n).map(|s| (ci, s, *label)));
        }
        let labels = dataset.manifest.labels().into_iter().collect();
        Ok(Self {
            n,
            clips,
            windows,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    fn window(&self, i: usize) -> (&[f32], EmotionLabel) {
        let (c, s, l) = self.windows[i];
        (&self.clips[c][s * EXPR_DIM..(s + self.n) * EXPR_DIM], l)
    }

    fn batch(&self, idx: &[usize]) -> Batch<'_> {
        let (windows, labels) = idx.iter().map(|&i| self.window(i)).unzip();
        Batch { windows, labels }
    }
}

/// Random draws of one iteration; a pure function of `(seed, iteration)`.
struct IterationDraws {
    latent_content: Vec<usize>,
    z: Vec<[f32; LATENT_DIM]>,
    targets: Vec<EmotionLabel>,
    reference_content: Vec<usize>,
    reference: Vec<usize>,
}

impl IterationDraws {
    fn sample(pool_len: usize, labels: &[EmotionLabel], batch: usize, seed: u64, iteration: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(iteration + 1);
        let idx = |rng: &mut ChaCha8Rng| (0..batch).map(|_| rng.random_range(0..pool_len)).collect::<Vec<_>>();
        let latent_content = idx(&mut rng);
        let z = (0..batch)
            .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
            .collect();
        let targets = (0..batch).map(|_| labels[rng.random_range(0..labels.len())]).collect();
        let reference_content = idx(&mut rng);
        let reference = idx(&mut rng);
        Self {
            latent_content,
            z,
            targets,
            reference_content,
            reference,
        }
    }
}

/// Owns the training state and the window pool for a run.
pub struct Trainer {
    pub config: TrainConfig,
    pub state: TrainState,
    pool: WindowPool,
}

impl Trainer {
    /// Validates the dataset against the config and prepares fresh or resumed state.
    pub fn new(config: TrainConfig, dataset: &Dataset, init: Option<TrainState>) -> Result<Self> {
        config.validate()?;
        if dataset.manifest.n_window != config.n_window {
            return Err(invalid!(
                "dataset windows are {} frames but the config asks for {}",
                dataset.manifest.n_window,
                config.n_window
            ));
        }
        let per_label = dataset.windows_per_label();
        if per_label.len() < 2 {
            return Err(invalid!("dataset must span at least 2 emotion domains"));
        }
        if let Some((label, count)) = per_label.iter().find(|(_, c)| *c < config.batch_size) {
            return Err(invalid!(
                "domain {label} has {count} windows, fewer than one batch of {}",
                config.batch_size
            ));
        }
        let state = match init {
            Some(s) => {
                if s.params.window != config.n_window {
                    return Err(invalid!("initial checkpoint uses windows of {} frames", s.params.window));
                }
                s
            }
            None => {
                let mut params = ManipulatorParams::init(config.hidden, config.seed)?;
                params.norm = dataset.manifest.norm.clone();
                params.window = config.n_window;
                TrainState::new(params)
            }
        };
        let pool = WindowPool::new(dataset, &state.params, config.n_window)?;
        Ok(Self { config, state, pool })
    }

    /// Runs one iteration (latent step then reference step).
    pub fn iterate(&mut self) -> Result<[LossReport; 2]> {
        let draws = IterationDraws::sample(
            self.pool.len(),
            &self.pool.labels,
            self.config.batch_size,
            self.config.seed,
            self.state.iteration,
        );
        self.iterate_with(&draws)
    }

    fn iterate_with(&mut self, draws: &IterationDraws) -> Result<[LossReport; 2]> {
        let cfg = &self.config;
        let content = self.pool.batch(&draws.latent_content);
        let latent = train_step_latent(&mut self.state, cfg, &content, &draws.z, &draws.targets)?;
        let content = self.pool.batch(&draws.reference_content);
        let reference = self.pool.batch(&draws.reference);
        let refd = train_step_reference(&mut self.state, cfg, &content, &reference)?;
        self.state.iteration += 1;
        Ok([latent, refd])
    }

    /// Trains until `config.iterations`, writing the log and checkpoints to `out_dir`.
    pub fn run(&mut self, out_dir: &Path, mut progress: impl FnMut(u64, &[LossReport; 2])) -> Result<PathBuf> {
        fs::create_dir_all(out_dir)?;
        let ckpt = out_dir.join(CHECKPOINT_FILE);
        let log_path = out_dir.join(LOG_FILE);
        let mut log = if self.state.iteration > 0 && log_path.exists() {
            BufWriter::new(OpenOptions::new().append(true).open(&log_path)?)
        } else {
            let mut f = BufWriter::new(File::create(&log_path)?);
            writeln!(f, "{LOG_HEADER}")?;
            f
        };
        let start = self.state.iteration;
        let end = self.config.iterations;
        let (pool_len, labels) = (self.pool.len(), self.pool.labels.clone());
        let (batch, seed, prefetch) = (self.config.batch_size, self.config.seed, self.config.prefetch);

        std::thread::scope(|scope| -> Result<()> {
            let rx = if prefetch {
                let (tx, rx) = mpsc::sync_channel(2);
                let labels = labels.clone();
                scope.spawn(move || {
                    for it in start..end {
                        if tx.send(IterationDraws::sample(pool_len, &labels, batch, seed, it)).is_err() {
                            break;
                        }
                    }
                });
                Some(rx)
            } else {
                None
            };
            for it in start..end {
                let draws = match &rx {
                    Some(rx) => rx.recv().map_err(|_| invalid!("batch prefetch thread stopped"))?,
                    None => IterationDraws::sample(pool_len, &labels, batch, seed, it),
                };
                let reports = self.iterate_with(&draws)?;
                for (k, r) in reports.iter().enumerate() {
                    writeln!(log, "{}", r.csv_row(2 * it + k as u64))?;
                }
                progress(it, &reports);
                let done = it + 1;
                if self.config.checkpoint_interval > 0 && done % self.config.checkpoint_interval == 0 && done < end {
                    log.flush()?;
                    self.state.save(&ckpt)?;
                }
            }
            Ok(())
        })?;
        log.flush()?;
        self.state.save(&ckpt)?;
        Ok(ckpt)
    }
}

/// Full training run: validates, optionally initializes from a checkpoint, trains,
/// and writes `model.nedm` plus `train_log.csv` into `out_dir`.
pub fn train(config: TrainConfig, dataset: &Dataset, out_dir: &Path, init: Option<&Path>) -> Result<TrainState> {
    let init = init.map(TrainState::load).transpose()?;
    let mut trainer = Trainer::new(config, dataset, init)?;
    trainer.run(out_dir, |_, _| {})?;
    Ok(trainer.state)
}
