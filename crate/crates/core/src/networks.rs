//! The four networks of the emotion manipulator.
//!
//! * translator `G(s, d)`: LSTM over `[ε_t ; d]`, residual output `ε_t + Δ_t`
//! * style encoder `E(s)`: LSTM, final hidden state → 16-dim style
//! * mapping network `M_y(z)`: MLP trunk with one 16-dim head per emotion
//! * discriminator `D(s)`: LSTM, final hidden state → one score per emotion
//!
//! The `*_nodes` functions build batched graphs on a caller-owned [`Tape`]; the
//! plain functions are single-sample conveniences that work in raw (not
//! normalized) expression space.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, ParameterStore, Tape, Tensor};
use crate::error::{invalid, Error, Result};
use crate::sequence::{ExpressionSequence, StyleVector, DEFAULT_WINDOW, EXPR_DIM, LATENT_DIM, STYLE_DIM};

pub const NUM_EMOTIONS: usize = 7;

/// One of the seven emotion domains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Neutral,
    Happy,
    Fear,
    Sad,
    Surprised,
    Angry,
    Disgusted,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_EMOTIONS] = [
        EmotionLabel::Neutral,
        EmotionLabel::Happy,
        EmotionLabel::Fear,
        EmotionLabel::Sad,
        EmotionLabel::Surprised,
        EmotionLabel::Angry,
        EmotionLabel::Disgusted,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| invalid!("emotion label index {i} outside 0..{NUM_EMOTIONS}"))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Surprised => "surprised",
            EmotionLabel::Angry => "angry",
            EmotionLabel::Disgusted => "disgusted",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if let Ok(i) = lower.parse::<usize>() {
            return Self::from_index(i);
        }
        Self::ALL
            .into_iter()
            .find(|l| l.name() == lower)
            .ok_or_else(|| invalid!("unknown emotion label {s:?}"))
    }
}

impl serde::Serialize for EmotionLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for EmotionLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub hidden_g: usize,
    pub hidden_e: usize,
    pub hidden_d: usize,
    pub mapping_hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden_g: 128,
            hidden_e: 64,
            hidden_d: 64,
            mapping_hidden: 64,
        }
    }
}

/// Per-dimension statistics used to whiten expression vectors before the networks.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Normalization {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            mean: vec![0.0; EXPR_DIM],
            std: vec![1.0; EXPR_DIM],
        }
    }
}

impl Normalization {
    /// Mean and standard deviation of every column over all given frames.
    /// Near-constant columns get unit scale.
    pub fn fit<'a>(frames: impl IntoIterator<Item = &'a [f32]>) -> Result<Self> {
        let mut sum = vec![0.0f64; EXPR_DIM];
        let mut sq = vec![0.0f64; EXPR_DIM];
        let mut n = 0usize;
        for f in frames {
            for k in 0..EXPR_DIM {
                let v = f[k] as f64;
                sum[k] += v;
                sq[k] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(invalid!("cannot fit normalization to zero frames"));
        }
        let mut mean = Vec::with_capacity(EXPR_DIM);
        let mut std = Vec::with_capacity(EXPR_DIM);
        for k in 0..EXPR_DIM {
            let m = sum[k] / n as f64;
            let var = (sq[k] / n as f64 - m * m).max(0.0);
            let s = var.sqrt();
            mean.push(m as f32);
            std.push(if s > 1e-6 { s as f32 } else { 1.0 });
        }
        Ok(Self { mean, std })
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != EXPR_DIM || self.std.len() != EXPR_DIM {
            return Err(invalid!("normalization statistics must have {EXPR_DIM} entries"));
        }
        if self.std.iter().any(|&s| !(s.is_finite() && s > 0.0)) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid!("normalization statistics must be finite with positive std"));
        }
        Ok(())
    }

    pub fn normalize_frame(&self, frame: &[f32], out: &mut [f32]) {
        for k in 0..EXPR_DIM {
            out[k] = (frame[k] - self.mean[k]) / self.std[k];
        }
    }
}

/// Whether a network's parameters take part in differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binding {
    Trainable,
    Frozen,
}

fn bind(tape: &mut Tape, store: &ParameterStore, index: usize, binding: Binding) -> NodeId {
    match binding {
        Binding::Trainable => tape.param(store, index),
        Binding::Frozen => tape.frozen(store, index),
    }
}

pub const TRANSLATOR_TAG: u32 = 0;
pub const STYLE_ENCODER_TAG: u32 = 1;
pub const MAPPING_TAG: u32 = 2;
pub const DISCRIMINATOR_TAG: u32 = 3;

/// Complete parameter set of G, E, M and D plus the input normalization.
#[derive(Clone, Debug)]
pub struct ManipulatorParams {
    pub config: NetConfig,
    pub translator: ParameterStore,
    pub style_encoder: ParameterStore,
    pub mapping: ParameterStore,
    pub discriminator: ParameterStore,
    pub norm: Normalization,
    /// Window length the model was trained on.
    pub window: usize,
}

// Parameter index layout inside each store, fixed by insertion order in `init`.
const LSTM_W: usize = 0;
const LSTM_B: usize = 1;
const HEAD_W: usize = 2;
const HEAD_B: usize = 3;
const FC1_W: usize = 0;
const FC1_B: usize = 1;
const FC2_W: usize = 2;
const FC2_B: usize = 3;
const HEADS_W: usize = 4;
const HEADS_B: usize = 5;

fn uniform(rng: &mut ChaCha8Rng, dims: &[usize], bound: f32) -> Tensor {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(dims.to_vec(), data).expect("dims match")
}

fn insert_lstm(store: &mut ParameterStore, prefix: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let bound = 1.0 / ((input + hidden) as f32).sqrt();
    store.insert(format!("{prefix}.lstm.weight"), uniform(rng, &[input + hidden, 4 * hidden], bound))?;
    let mut bias = uniform(rng, &[1, 4 * hidden], bound);
    bias.data_mut()[hidden..2 * hidden].fill(1.0);
    store.insert(format!("{prefix}.lstm.bias"), bias)?;
    Ok(())
}

fn insert_affine(store: &mut ParameterStore, name: &str, input: usize, output: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let bound = 1.0 / (input as f32).sqrt();
    store.insert(format!("{name}.weight"), uniform(rng, &[input, output], bound))?;
    store.insert(format!("{name}.bias"), uniform(rng, &[1, output], bound))?;
    Ok(())
}

impl ManipulatorParams {
    /// Fresh parameters with fan-in uniform initialization.
    pub fn init(config: NetConfig, seed: u64) -> Result<Self> {
        if config.hidden_g == 0 || config.hidden_e == 0 || config.hidden_d == 0 || config.mapping_hidden == 0 {
            return Err(invalid!("hidden sizes must be positive: {config:?}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut translator = ParameterStore::new(TRANSLATOR_TAG);
        insert_lstm(&mut translator, "translator", EXPR_DIM + STYLE_DIM, config.hidden_g, &mut rng)?;
        insert_affine(&mut translator, "translator.out", config.hidden_g, EXPR_DIM, &mut rng)?;

        let mut style_encoder = ParameterStore::new(STYLE_ENCODER_TAG);
        insert_lstm(&mut style_encoder, "style_encoder", EXPR_DIM, config.hidden_e, &mut rng)?;
        insert_affine(&mut style_encoder, "style_encoder.head", config.hidden_e, STYLE_DIM, &mut rng)?;

        let mut mapping = ParameterStore::new(MAPPING_TAG);
        let mh = config.mapping_hidden;
        insert_affine(&mut mapping, "mapping.fc1", LATENT_DIM, mh, &mut rng)?;
        insert_affine(&mut mapping, "mapping.fc2", mh, mh, &mut rng)?;
        insert_affine(&mut mapping, "mapping.heads", mh, NUM_EMOTIONS * STYLE_DIM, &mut rng)?;

        let mut discriminator = ParameterStore::new(DISCRIMINATOR_TAG);
        insert_lstm(&mut discriminator, "discriminator", EXPR_DIM, config.hidden_d, &mut rng)?;
        insert_affine(&mut discriminator, "discriminator.head", config.hidden_d, NUM_EMOTIONS, &mut rng)?;

        Ok(Self {
            config,
            translator,
            style_encoder,
            mapping,
            discriminator,
            norm: Normalization::default(),
            window: DEFAULT_WINDOW,
        })
    }

    pub fn stores(&self) -> [&ParameterStore; 4] {
        [&self.translator, &self.style_encoder, &self.mapping, &self.discriminator]
    }

    pub fn stores_mut(&mut self) -> [&mut ParameterStore; 4] {
        [
            &mut self.translator,
            &mut self.style_encoder,
            &mut self.mapping,
            &mut self.discriminator,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.stores()
            .iter()
            .all(|s| s.entries().iter().all(|e| e.value.is_finite()))
    }

    /// Sets the translator's output projection to zero, making it the identity map.
    pub fn zero_translator_output(&mut self) {
        self.translator.value_mut(HEAD_W).data_mut().fill(0.0);
        self.translator.value_mut(HEAD_B).data_mut().fill(0.0);
    }

    /// Zeroes the weight and bias of mapping head `label`.
    pub fn zero_mapping_head(&mut self, label: EmotionLabel) {
        let cols = label.index() * STYLE_DIM..(label.index() + 1) * STYLE_DIM;
        let w = self.mapping.value_mut(HEADS_W);
        let width = w.cols();
        for row in w.data_mut().chunks_exact_mut(width) {
            row[cols.clone()].fill(0.0);
        }
        self.mapping.value_mut(HEADS_B).data_mut()[cols].fill(0.0);
    }

    pub fn zero_style_head(&mut self) {
        self.style_encoder.value_mut(HEAD_W).data_mut().fill(0.0);
        self.style_encoder.value_mut(HEAD_B).data_mut().fill(0.0);
    }

    pub fn zero_discriminator_head_weight(&mut self) {
        self.discriminator.value_mut(HEAD_W).data_mut().fill(0.0);
    }

    pub fn discriminator_head_bias(&self) -> &[f32] {
        self.discriminator.value(HEAD_B).data()
    }
}

/// One step of an LSTM cell over a batch. `input` is `[B, in]`; state is `[B, H]`.
fn lstm_step(
    tape: &mut Tape,
    w: NodeId,
    b: NodeId,
    hidden: usize,
    input: &[NodeId],
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId)> {
    let mut parts = input.to_vec();
    parts.push(h);
    let z = tape.concat(&parts)?;
    let gates = tape.affine(z, w, b)?;
    let i = tape.slice(gates, 0, hidden)?;
    let i = tape.sigmoid(i)?;
    let f = tape.slice(gates, hidden, 2 * hidden)?;
    let f = tape.sigmoid(f)?;
    let g = tape.slice(gates, 2 * hidden, 3 * hidden)?;
    let g = tape.tanh(g)?;
    let o = tape.slice(gates, 3 * hidden, 4 * hidden)?;
    let o = tape.sigmoid(o)?;
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_next = tape.add(fc, ig)?;
    let tc = tape.tanh(c_next)?;
    let h_next = tape.mul(o, tc)?;
    Ok((h_next, c_next))
}

fn batch_of(tape: &Tape, steps: &[NodeId]) -> Result<usize> {
    let first = steps.first().ok_or_else(|| invalid!("empty sequence"))?;
    Ok(tape.value(*first).rows())
}

/// Final hidden state of an LSTM run over `steps` (each `[B, in]`).
fn lstm_final(tape: &mut Tape, store: &ParameterStore, binding: Binding, hidden: usize, steps: &[NodeId]) -> Result<NodeId> {
    let batch = batch_of(tape, steps)?;
    let w = bind(tape, store, LSTM_W, binding);
    let b = bind(tape, store, LSTM_B, binding);
    let mut h = tape.constant(Tensor::zeros(&[batch, hidden]));
    let mut c = h;
    for &x in steps {
        (h, c) = lstm_step(tape, w, b, hidden, &[x], h, c)?;
    }
    Ok(h)
}

/// Translator over normalized steps; returns the residual deltas `Δ_t`, each `[B, 51]`.
pub fn translate_delta_nodes(
    tape: &mut Tape,
    params: &ManipulatorParams,
    binding: Binding,
    steps: &[NodeId],
    style: NodeId,
) -> Result<Vec<NodeId>> {
    let store = &params.translator;
    let hidden = params.config.hidden_g;
    let batch = batch_of(tape, steps)?;
    let w = bind(tape, store, LSTM_W, binding);
    let b = bind(tape, store, LSTM_B, binding);
    let wo = bind(tape, store, HEAD_W, binding);
    let bo = bind(tape, store, HEAD_B, binding);
    let mut h = tape.constant(Tensor::zeros(&[batch, hidden]));
    let mut c = h;
    let mut deltas = Vec::with_capacity(steps.len());
    for &x in steps {
        (h, c) = lstm_step(tape, w, b, hidden, &[x, style], h, c)?;
        deltas.push(tape.affine(h, wo, bo)?);
    }
    Ok(deltas)
}

/// Translator over normalized steps: `ε_t + Δ_t`.
pub fn translate_nodes(
    tape: &mut Tape,
    params: &ManipulatorParams,
    binding: Binding,
    steps: &[NodeId],
    style: NodeId,
) -> Result<Vec<NodeId>> {
    let deltas = translate_delta_nodes(tape, params, binding, steps, style)?;
    steps.iter().zip(deltas).map(|(&x, d)| tape.add(x, d)).collect()
}

/// Style encoder over normalized steps → `[B, 16]`.
pub fn encode_style_nodes(tape: &mut Tape, params: &ManipulatorParams, binding: Binding, steps: &[NodeId]) -> Result<NodeId> {
    let store = &params.style_encoder;
    let h = lstm_final(tape, store, binding, params.config.hidden_e, steps)?;
    let w = bind(tape, store, HEAD_W, binding);
    let b = bind(tape, store, HEAD_B, binding);
    tape.affine(h, w, b)
}

/// Discriminator over normalized steps → `[B, 7]` raw scores.
pub fn discriminate_nodes(tape: &mut Tape, params: &ManipulatorParams, binding: Binding, steps: &[NodeId]) -> Result<NodeId> {
    let store = &params.discriminator;
    let h = lstm_final(tape, store, binding, params.config.hidden_d, steps)?;
    let w = bind(tape, store, HEAD_W, binding);
    let b = bind(tape, store, HEAD_B, binding);
    tape.affine(h, w, b)
}

/// `[B, k]` one-hot rows for the given labels.
pub fn one_hot(labels: &[EmotionLabel], width_per_label: usize) -> Tensor {
    let cols = NUM_EMOTIONS * width_per_label;
    let mut data = vec![0.0; labels.len() * cols];
    for (r, l) in labels.iter().enumerate() {
        let start = r * cols + l.index() * width_per_label;
        data[start..start + width_per_label].fill(1.0);
    }
    Tensor::matrix(labels.len(), cols, data).expect("dims match")
}

/// Picks, per row, the `width`-wide block belonging to that row's label from a
/// `[B, 7·width]` node. Built from a mask product and a folding matmul.
pub fn select_label_block(tape: &mut Tape, all: NodeId, labels: &[EmotionLabel], width: usize) -> Result<NodeId> {
    let mask = tape.constant(one_hot(labels, width));
    let picked = tape.mul(all, mask)?;
    let mut fold = vec![0.0; NUM_EMOTIONS * width * width];
    for k in 0..NUM_EMOTIONS {
        for j in 0..width {
            fold[(k * width + j) * width + j] = 1.0;
        }
    }
    let fold = tape.constant(Tensor::matrix(NUM_EMOTIONS * width, width, fold)?);
    tape.matmul(picked, fold)
}

/// Mapping network: `z` is `[B, 4]`, returns `[B, 16]` using each row's label head.
pub fn map_latent_nodes(
    tape: &mut Tape,
    params: &ManipulatorParams,
    binding: Binding,
    z: NodeId,
    labels: &[EmotionLabel],
) -> Result<NodeId> {
    let store = &params.mapping;
    let w1 = bind(tape, store, FC1_W, binding);
    let b1 = bind(tape, store, FC1_B, binding);
    let w2 = bind(tape, store, FC2_W, binding);
    let b2 = bind(tape, store, FC2_B, binding);
    let wh = bind(tape, store, HEADS_W, binding);
    let bh = bind(tape, store, HEADS_B, binding);
    let h = tape.affine(z, w1, b1)?;
    let h = tape.tanh(h)?;
    let h = tape.affine(h, w2, b2)?;
    let h = tape.tanh(h)?;
    let all = tape.affine(h, wh, bh)?;
    select_label_block(tape, all, labels, STYLE_DIM)
}

/// Splits a batch of normalized windows into per-timestep `[B, 51]` constants.
pub fn step_constants(tape: &mut Tape, windows: &[&[f32]], n: usize) -> Result<Vec<NodeId>> {
    let batch = windows.len();
    let mut steps = Vec::with_capacity(n);
    for t in 0..n {
        let mut data = Vec::with_capacity(batch * EXPR_DIM);
        for w in windows {
            data.extend_from_slice(&w[t * EXPR_DIM..(t + 1) * EXPR_DIM]);
        }
        steps.push(tape.constant(Tensor::matrix(batch, EXPR_DIM, data)?));
    }
    Ok(steps)
}

fn check_finite(values: &[f32], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence(format!("non-finite values in {what}")))
    }
}

fn normalized(params: &ManipulatorParams, windows: &[&ExpressionSequence]) -> Vec<Vec<f32>> {
    windows
        .iter()
        .map(|s| {
            let mut out = vec![0.0; s.data().len()];
            for (src, dst) in s.frames().zip(out.chunks_exact_mut(EXPR_DIM)) {
                params.norm.normalize_frame(src, dst);
            }
            out
        })
        .collect()
}

/// Raw-space residual deltas for a batch of equally long windows sharing one style.
/// `out[b]` is `N × 51`, such that the translation of window `b` is `window + out[b]`.
pub fn translate_deltas(params: &ManipulatorParams, windows: &[&ExpressionSequence], d: &StyleVector) -> Result<Vec<Vec<f32>>> {
    let n = windows.first().ok_or_else(|| invalid!("no windows to translate"))?.len();
    if windows.iter().any(|w| w.len() != n) {
        return Err(invalid!("windows in one batch must share a length"));
    }
    let norm = normalized(params, windows);
    let refs: Vec<&[f32]> = norm.iter().map(|v| v.as_slice()).collect();
    let mut tape = Tape::new();
    let steps = step_constants(&mut tape, &refs, n)?;
    let style_rows = vec![d.as_slice(); windows.len()];
    let style = tape.constant(Tensor::from_rows(&style_rows)?);
    let deltas = translate_delta_nodes(&mut tape, params, Binding::Frozen, &steps, style)?;
    let mut out = vec![vec![0.0; n * EXPR_DIM]; windows.len()];
    for (t, &node) in deltas.iter().enumerate() {
        let v = tape.value(node);
        for (b, o) in out.iter_mut().enumerate() {
            let row = v.row(b);
            for k in 0..EXPR_DIM {
                o[t * EXPR_DIM + k] = row[k] * params.norm.std[k];
            }
        }
    }
    for o in &out {
        check_finite(o, "translator output")?;
    }
    Ok(out)
}

/// Translate one sequence with style `d`. The output keeps the input's length.
pub fn translate(params: &ManipulatorParams, s: &ExpressionSequence, d: &StyleVector) -> Result<ExpressionSequence> {
    let delta = translate_deltas(params, &[s], d)?.pop().expect("one window");
    let data = s.data().iter().zip(&delta).map(|(x, dx)| x + dx).collect();
    ExpressionSequence::new(data)
}

/// Style codes for a batch of equally long windows.
pub fn encode_styles(params: &ManipulatorParams, windows: &[&ExpressionSequence]) -> Result<Vec<StyleVector>> {
    let n = windows.first().ok_or_else(|| invalid!("no windows to encode"))?.len();
    if windows.iter().any(|w| w.len() != n) {
        return Err(invalid!("windows in one batch must share a length"));
    }
    let norm = normalized(params, windows);
    let refs: Vec<&[f32]> = norm.iter().map(|v| v.as_slice()).collect();
    let mut tape = Tape::new();
    let steps = step_constants(&mut tape, &refs, n)?;
    let out = encode_style_nodes(&mut tape, params, Binding::Frozen, &steps)?;
    let v = tape.value(out);
    check_finite(v.data(), "style encoder output")?;
    (0..windows.len()).map(|b| StyleVector::from_slice(v.row(b))).collect()
}

pub fn encode_style(params: &ManipulatorParams, s: &ExpressionSequence) -> Result<StyleVector> {
    Ok(encode_styles(params, &[s])?.remove(0))
}

pub fn map_latent(params: &ManipulatorParams, z: &[f32; LATENT_DIM], y: EmotionLabel) -> Result<StyleVector> {
    let mut tape = Tape::new();
    let z = tape.constant(Tensor::matrix(1, LATENT_DIM, z.to_vec())?);
    let out = map_latent_nodes(&mut tape, params, Binding::Frozen, z, &[y])?;
    StyleVector::from_slice(tape.value(out).data())
}

/// Map-latent by raw label index; rejects indices outside the seven domains.
pub fn map_latent_index(params: &ManipulatorParams, z: &[f32; LATENT_DIM], label: usize) -> Result<StyleVector> {
    map_latent(params, z, EmotionLabel::from_index(label)?)
}

pub fn discriminate(params: &ManipulatorParams, s: &ExpressionSequence) -> Result<[f32; NUM_EMOTIONS]> {
    let norm = normalized(params, &[s]);
    let mut tape = Tape::new();
    let steps = step_constants(&mut tape, &[norm[0].as_slice()], s.len())?;
    let out = discriminate_nodes(&mut tape, params, Binding::Frozen, &steps)?;
    let mut scores = [0.0; NUM_EMOTIONS];
    scores.copy_from_slice(tape.value(out).data());
    Ok(scores)
}
