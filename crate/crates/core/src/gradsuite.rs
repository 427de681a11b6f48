//! Finite-difference gradient suites over every tape op and a tiny full model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{one_hot, LabelVolume};
use crate::error::Result;
use crate::model::{Model, ModelConfig};
use crate::ops::gradcheck::{compare, random_linear_objective, Evaluation};
use crate::ops::{grad_check, GradReport, ModeMask, ParamStore, Tape, Var};
use crate::tensor::{Dims, Field};
use crate::train::pcc_loss;

pub const STEP: f64 = 1e-5;
pub const OP_TOLERANCE: f64 = 1e-5;
pub const MODEL_TOLERANCE: f64 = 1e-4;

fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rand_field(c: usize, dims: Dims, rng: &mut ChaCha8Rng) -> Field<f64> {
    Field::from_fn(c, dims, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

type Build = Box<dyn Fn(&mut Tape<f64>, &ParamStore<f64>, &[Var]) -> Result<Var>>;

struct Case {
    label: String,
    store: ParamStore<f64>,
    inputs: Vec<Field<f64>>,
    build: Build,
}

fn cases(seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    let mut out = Vec::new();

    let mut store = ParamStore::new();
    let w = store.add("w", vec![3, 2], rand_vec(6, rng));
    let b = store.add("b", vec![3], rand_vec(3, rng));
    out.push(Case {
        label: "pointwise_linear".into(),
        store,
        inputs: vec![rand_field(2, [3, 4, 2], rng)],
        build: Box::new(move |t, s, v| t.pointwise_linear(s, v[0], w, b)),
    });

    for (dims, k) in [([4, 4, 4], [1, 1, 1]), ([5, 4, 3], [2, 1, 1]), ([6, 6, 6], [3, 3, 3])] {
        let mut store = ParamStore::new();
        let re = store.add("re", vec![2, 2], rand_vec(4, rng));
        let im = store.add("im", vec![2, 2], rand_vec(4, rng));
        let mask = ModeMask::new(k);
        out.push(Case {
            label: format!("spectral_shared {dims:?}"),
            store,
            inputs: vec![rand_field(2, dims, rng)],
            build: Box::new(move |t, s, v| t.spectral_shared(s, v[0], re, im, mask)),
        });
    }

    for (dims, k) in [([4, 4, 4], [1, 2, 1]), ([5, 3, 4], [1, 1, 2])] {
        let mask = ModeMask::new(k);
        let n = mask.table_len() * 4;
        let mut store = ParamStore::new();
        let re = store.add("re", vec![mask.table_len(), 2, 2], rand_vec(n, rng));
        let im = store.add("im", vec![mask.table_len(), 2, 2], rand_vec(n, rng));
        out.push(Case {
            label: format!("spectral_permode {dims:?}"),
            store,
            inputs: vec![rand_field(2, dims, rng)],
            build: Box::new(move |t, s, v| t.spectral_permode(s, v[0], re, im, mask)),
        });
    }

    let mut store = ParamStore::new();
    let k = store.add("k", vec![3, 2, 2, 2, 2], rand_vec(48, rng));
    let b = store.add("b", vec![3], rand_vec(3, rng));
    out.push(Case {
        label: "conv3_down".into(),
        store,
        inputs: vec![rand_field(2, [5, 4, 3], rng)],
        build: Box::new(move |t, s, v| t.conv3_down(s, v[0], k, b)),
    });

    let mut store = ParamStore::new();
    let k = store.add("k", vec![2, 3, 2, 2, 2], rand_vec(48, rng));
    let b = store.add("b", vec![3], rand_vec(3, rng));
    out.push(Case {
        label: "tconv3_up".into(),
        store,
        inputs: vec![rand_field(2, [3, 2, 2], rng)],
        build: Box::new(move |t, s, v| t.tconv3_up(s, v[0], k, b, [5, 4, 3])),
    });

    let mut store = ParamStore::new();
    let k = store.add("k", vec![2, 2, 3, 3, 3], rand_vec(108, rng));
    let b = store.add("b", vec![2], rand_vec(2, rng));
    out.push(Case {
        label: "conv3_same".into(),
        store,
        inputs: vec![rand_field(2, [3, 4, 3], rng)],
        build: Box::new(move |t, s, v| t.conv3_same(s, v[0], k, b)),
    });

    let mut store = ParamStore::new();
    let g = store.add("gamma", vec![3], rand_vec(3, rng));
    let be = store.add("beta", vec![3], rand_vec(3, rng));
    out.push(Case {
        label: "layer_norm".into(),
        store,
        inputs: vec![rand_field(3, [3, 3, 4], rng)],
        build: Box::new(move |t, s, v| t.layer_norm(s, v[0], g, be)),
    });

    // inputs straddle zero so both SELU branches are exercised
    out.push(Case {
        label: "selu".into(),
        store: ParamStore::new(),
        inputs: vec![rand_field(2, [3, 3, 3], rng).map(|x| 2.0 * x + 0.01)],
        build: Box::new(|t, _, v| Ok(t.selu(v[0]))),
    });
    out.push(Case {
        label: "softmax_channels".into(),
        store: ParamStore::new(),
        inputs: vec![rand_field(3, [3, 2, 3], rng).map(|x| 3.0 * x)],
        build: Box::new(|t, _, v| Ok(t.softmax_channels(v[0]))),
    });
    out.push(Case {
        label: "add".into(),
        store: ParamStore::new(),
        inputs: vec![rand_field(2, [2, 3, 2], rng), rand_field(2, [2, 3, 2], rng)],
        build: Box::new(|t, _, v| t.add(v[0], v[1])),
    });
    out
}

/// One report per differentiable op (several shapes for the spectral ones).
pub fn op_suite(seed: u64) -> Result<Vec<GradReport>> {
    cases(seed)
        .into_iter()
        .enumerate()
        .map(|(i, mut c)| {
            let obj = random_linear_objective(c.build, seed.wrapping_add(1 + i as u64));
            grad_check(&c.label, &mut c.store, &c.inputs, obj, STEP)
        })
        .collect()
}

/// The correlation loss as a differentiable function of the scores.
pub fn pcc_suite(seed: u64) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = LabelVolume::from_fn([3, 4, 3], |_, _, _| rng.gen_range(0..3));
    let truth = one_hot::<f64>(&labels, 3)?;
    let scores = Field::from_fn(3, [3, 4, 3], |_, _, _, _| rng.gen_range(0.0..1.0));
    let analytic = pcc_loss(&scores, &truth)?.grad;
    let mut numeric = vec![0.0; scores.len()];
    let mut p = scores.clone();
    for (k, slot) in numeric.iter_mut().enumerate() {
        let orig = scores.data()[k];
        p.data_mut()[k] = orig + STEP;
        let up = pcc_loss(&p, &truth)?.value;
        p.data_mut()[k] = orig - STEP;
        let down = pcc_loss(&p, &truth)?.value;
        p.data_mut()[k] = orig;
        *slot = (up - down) / (2.0 * STEP);
    }
    Ok(GradReport {
        label: "pcc_loss".into(),
        entries: vec![compare("scores".into(), analytic.data(), &numeric)],
    })
}

/// Width 2, two Fourier layers, deep supervision on every layer. Meant for
/// 6^3 inputs, where `k_max` truncates the middle axis of the 3^3 latent grid.
pub fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        width: 2,
        n_layers: 2,
        k_max: [1, 0, 1],
        ds_tap_stride: 1,
        ..ModelConfig::fnoseg3d()
    }
}

/// Full-model check: training loss (mean PCC over main and auxiliary
/// outputs) against every parameter and input voxel.
pub fn model_suite(config: &ModelConfig, seed: u64) -> Result<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [6, 6, 6];
    let model = Model::<f64>::build(config)?;
    let mut store = model.params().clone();
    // perturb away from the zero biases and unit norms of the initializer
    for p in store.iter_mut() {
        p.value.iter_mut().for_each(|v| *v += 0.1 * rng.gen_range(-1.0..1.0));
    }
    let labels = LabelVolume::from_fn(dims, |x, y, z| ((x + 2 * y + z) / 3 % config.out_labels) as u8);
    let truth = one_hot::<f64>(&labels, config.out_labels)?;
    let x = rand_field(config.in_channels, dims, &mut rng);
    let cfg = config.clone();
    let objective = move |tape: &mut Tape<f64>, s: &ParamStore<f64>, v: &[Var]| -> Result<Evaluation> {
        let m = Model::from_params(cfg.clone(), s.clone())?;
        let heads = m.record(tape, v[0], true)?;
        let outs: Vec<Var> = std::iter::once(heads.main).chain(heads.aux).collect();
        let w = 1.0 / outs.len() as f64;
        let mut total = 0.0;
        let mut seeds = Vec::new();
        for o in outs {
            let lg = pcc_loss(tape.value(o), &truth)?;
            total += w * lg.value;
            seeds.push((o, lg.grad.scale(w)));
        }
        Ok((total, seeds))
    };
    grad_check("model", &mut store, &[x], objective, STEP)
}
