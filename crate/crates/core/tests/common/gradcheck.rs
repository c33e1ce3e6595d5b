//! Finite-difference gradient oracle.
//!
//! The recorded tape is re-evaluated in `f64` by a separate interpreter that only
//! reads the graph structure and the leaf values, so the analytic `f32` backward
//! pass is compared against derivatives it had no part in computing.

use ned_core::autodiff::{NodeId, OpKind, Tape, Tensor};
use ned_core::networks::{
    discriminate_nodes, encode_style_nodes, map_latent_nodes, select_label_block, step_constants, translate_nodes, Binding, EmotionLabel,
    ManipulatorParams, NetConfig, NUM_EMOTIONS,
};
use ned_core::objectives::{
    adv_loss_d_node, adv_loss_g_node, cycle_loss_node, jaw_series_node, l1_rows_node, speech_loss_node,
};
use ned_core::sequence::{EXPR_DIM, LATENT_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Step used for central differences in the `f64` replay.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug)]
struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn from_tensor(t: &Tensor) -> Mat {
    Mat {
        rows: t.rows(),
        cols: t.cols(),
        data: t.data().iter().map(|&v| v as f64).collect(),
    }
}

fn map(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    Mat {
        data: a.data.iter().map(|&v| f(v)).collect(),
        ..a.clone()
    }
}

fn zip(a: &Mat, b: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
    let data = if b.data.len() == a.data.len() {
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect()
    } else {
        assert_eq!(b.rows, 1, "broadcast operand must be a single row");
        a.data.iter().enumerate().map(|(i, &x)| f(x, b.data[i % b.cols])).collect()
    };
    Mat { data, ..a.clone() }
}

fn apply(kind: OpKind, inputs: &[&Mat]) -> Mat {
    let a = inputs[0];
    match kind {
        OpKind::MatMul => {
            let b = inputs[1];
            let mut data = vec![0.0; a.rows * b.cols];
            for i in 0..a.rows {
                for k in 0..a.cols {
                    let x = a.data[i * a.cols + k];
                    for j in 0..b.cols {
                        data[i * b.cols + j] += x * b.data[k * b.cols + j];
                    }
                }
            }
            Mat {
                rows: a.rows,
                cols: b.cols,
                data,
            }
        }
        OpKind::Add => zip(a, inputs[1], |x, y| x + y),
        OpKind::Sub => zip(a, inputs[1], |x, y| x - y),
        OpKind::Mul => zip(a, inputs[1], |x, y| x * y),
        OpKind::Div => zip(a, inputs[1], |x, y| x / y),
        OpKind::ScalarMul(c) => map(a, |x| c as f64 * x),
        OpKind::Concat => {
            let cols: usize = inputs.iter().map(|m| m.cols).sum();
            let mut data = Vec::with_capacity(a.rows * cols);
            for r in 0..a.rows {
                for m in inputs {
                    data.extend_from_slice(&m.data[r * m.cols..(r + 1) * m.cols]);
                }
            }
            Mat { rows: a.rows, cols, data }
        }
        OpKind::Tanh => map(a, f64::tanh),
        OpKind::Sigmoid => map(a, |x| 1.0 / (1.0 + (-x).exp())),
        OpKind::Sqrt => map(a, f64::sqrt),
        OpKind::Abs => map(a, f64::abs),
        OpKind::Square => map(a, |x| x * x),
        OpKind::Slice { start, end } => Mat {
            rows: a.rows,
            cols: end - start,
            data: (0..a.rows).flat_map(|r| a.data[r * a.cols + start..r * a.cols + end].to_vec()).collect(),
        },
        OpKind::SumAll => Mat {
            rows: 1,
            cols: 1,
            data: vec![a.data.iter().sum()],
        },
        OpKind::MeanAll => Mat {
            rows: 1,
            cols: 1,
            data: vec![a.data.iter().sum::<f64>() / a.data.len() as f64],
        },
    }
}

/// Re-evaluates nodes `0..=root` in `f64`, with the value of leaf `leaf`
/// entry `entry` shifted by `delta`.
pub fn replay(tape: &Tape, root: usize, leaf: usize, entry: usize, delta: f64) -> f64 {
    let mut values: Vec<Mat> = Vec::with_capacity(root + 1);
    for i in 0..=root {
        let (kind, inputs, value, _) = tape.node(i);
        let v = match kind {
            None => {
                let mut m = from_tensor(value);
                if i == leaf {
                    m.data[entry] += delta;
                }
                m
            }
            Some(k) => {
                let args: Vec<&Mat> = inputs.iter().map(|&j| &values[j]).collect();
                apply(k, &args)
            }
        };
        values.push(v);
    }
    values[root].data[0]
}

/// Central difference of the replayed root with respect to one leaf entry.
pub fn numeric_grad(tape: &Tape, root: usize, leaf: usize, entry: usize) -> f64 {
    (replay(tape, root, leaf, entry, FD_STEP) - replay(tape, root, leaf, entry, -FD_STEP)) / (2.0 * FD_STEP)
}

/// A randomly sized manipulator and one scalar objective recorded on a tape.
pub struct Instance {
    pub tape: Tape,
    pub root: NodeId,
}

fn random_windows(rng: &mut ChaCha8Rng, batch: usize, n: usize) -> Vec<Vec<f32>> {
    (0..batch)
        .map(|_| (0..n * EXPR_DIM).map(|_| rng.random_range(-1.5..1.5)).collect())
        .collect()
}

fn labels(rng: &mut ChaCha8Rng, batch: usize) -> Vec<EmotionLabel> {
    (0..batch)
        .map(|_| EmotionLabel::from_index(rng.random_range(0..NUM_EMOTIONS)).unwrap())
        .collect()
}

/// Builds instance `seed`: the full generator objective on even seeds and the
/// discriminator objective on odd ones, over hidden sizes 2 to 5.
pub fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = NetConfig {
        hidden_g: rng.random_range(2..=5),
        hidden_e: rng.random_range(2..=5),
        hidden_d: rng.random_range(2..=5),
        mapping_hidden: rng.random_range(2..=5),
    };
    let params = ManipulatorParams::init(config, rng.random()).unwrap();
    let batch = rng.random_range(2..=3);
    let n = rng.random_range(3..=4);
    let windows = random_windows(&mut rng, batch, n);
    let refs: Vec<&[f32]> = windows.iter().map(Vec::as_slice).collect();
    let source = labels(&mut rng, batch);
    let targets = labels(&mut rng, batch);
    let z: Vec<f32> = (0..batch * LATENT_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();

    let mut tape = Tape::new();
    let steps = step_constants(&mut tape, &refs, n).unwrap();
    let z = tape.constant(Tensor::matrix(batch, LATENT_DIM, z).unwrap());
    let root = if seed.is_multiple_of(2) {
        let t = Binding::Trainable;
        let style = map_latent_nodes(&mut tape, &params, t, z, &targets).unwrap();
        let fake = translate_nodes(&mut tape, &params, t, &steps, style).unwrap();
        let scores = discriminate_nodes(&mut tape, &params, Binding::Frozen, &fake).unwrap();
        let scores = select_label_block(&mut tape, scores, &targets, 1).unwrap();
        let adv = adv_loss_g_node(&mut tape, scores).unwrap();
        let recovered = encode_style_nodes(&mut tape, &params, t, &fake).unwrap();
        let sty = l1_rows_node(&mut tape, style, recovered).unwrap();
        let own = encode_style_nodes(&mut tape, &params, t, &steps).unwrap();
        let cycled = translate_nodes(&mut tape, &params, t, &fake, own).unwrap();
        let cyc = cycle_loss_node(&mut tape, &steps, &cycled).unwrap();
        let (ji, jt, jc) = (
            jaw_series_node(&mut tape, &steps).unwrap(),
            jaw_series_node(&mut tape, &fake).unwrap(),
            jaw_series_node(&mut tape, &cycled).unwrap(),
        );
        let mouth = speech_loss_node(&mut tape, ji, jt, jc).unwrap();
        let mut total = adv;
        for term in [sty, cyc, mouth] {
            total = tape.add(total, term).unwrap();
        }
        total
    } else {
        let style = map_latent_nodes(&mut tape, &params, Binding::Frozen, z, &targets).unwrap();
        let fake = translate_nodes(&mut tape, &params, Binding::Frozen, &steps, style).unwrap();
        let real = discriminate_nodes(&mut tape, &params, Binding::Trainable, &steps).unwrap();
        let real = select_label_block(&mut tape, real, &source, 1).unwrap();
        let fake = discriminate_nodes(&mut tape, &params, Binding::Trainable, &fake).unwrap();
        let fake = select_label_block(&mut tape, fake, &targets, 1).unwrap();
        adv_loss_d_node(&mut tape, real, fake).unwrap()
    };
    Instance { tape, root }
}

/// Worst relative error of one instance over `samples` randomly chosen parameter entries.
///
/// The error of an entry is `|a − n| / max(|a|, |n|, floor)`, where `floor` is
/// `1e-3` times the largest numeric gradient magnitude found among the samples,
/// so entries many orders below the gradient's scale are judged absolutely.
pub fn max_relative_error(inst: &Instance, samples: usize, seed: u64) -> f64 {
    let grads = inst.tape.backward(inst.root).unwrap();
    let root = inst.root.index();
    let leaves: Vec<usize> = (0..=root)
        .filter(|&i| {
            let (kind, _, _, requires) = inst.tape.node(i);
            kind.is_none() && requires
        })
        .collect();
    assert!(!leaves.is_empty(), "instance has no trainable leaves");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let leaf = leaves[rng.random_range(0..leaves.len())];
        let len = inst.tape.node(leaf).2.len();
        let entry = rng.random_range(0..len);
        let analytic = grads.at(leaf).map_or(0.0, |g| g[entry] as f64);
        pairs.push((analytic, numeric_grad(&inst.tape, root, leaf, entry)));
    }
    let scale = pairs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let floor = (1e-3 * scale).max(f64::MIN_POSITIVE);
    pairs
        .iter()
        .map(|&(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
