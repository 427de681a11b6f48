use rand::Rng;

use super::config::{Architecture, ModelConfig};
use super::plan::{param_count_for, plan, Init, ParamBreakdown};
use crate::error::{Error, Result};
use crate::ops::{ModeMask, ParamId, ParamStore, Tape, Var};
use crate::scalar::Scalar;
use crate::seed;
use crate::tensor::Field;

/// Smallest accepted spatial size per axis.
pub const MIN_INPUT: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Pair(ParamId, ParamId);

#[derive(Clone, Debug)]
struct FourierIds {
    norm: Pair,
    w: Pair,
    re: ParamId,
    im: ParamId,
}

#[derive(Clone, Debug)]
enum Layout {
    Fno {
        lift: Pair,
        layers: Vec<FourierIds>,
        heads: Vec<(usize, Pair)>,
        out: Pair,
    },
    Cnn {
        down1: Pair,
        norm1: Pair,
        conv1: Pair,
        down2: Pair,
        conv2: Pair,
        conv3: Pair,
        up2: Pair,
        norm2: Pair,
        conv4: Pair,
        out: Pair,
    },
}

/// Softmax scores of the main head and, in training mode, of every
/// auxiliary head.
#[derive(Clone, Debug)]
pub struct ForwardOutput<T> {
    pub main: Field<T>,
    pub aux: Vec<Field<T>>,
}

/// Tape handles of the outputs of one recorded forward pass.
#[derive(Clone, Debug)]
pub struct Heads {
    pub main: Var,
    pub aux: Vec<Var>,
}

/// A configured network together with its parameters.
#[derive(Clone, Debug)]
pub struct Model<T> {
    config: ModelConfig,
    params: ParamStore<T>,
    layout: Layout,
}

fn init_values(init: Init, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    match init {
        Init::Zeros => vec![0.0; n],
        Init::Ones => vec![1.0; n],
        Init::Symmetric(b) => (0..n).map(|_| rng.gen_range(-b..b)).collect(),
        Init::Positive(s) => (0..n).map(|_| s * rng.gen::<f64>()).collect(),
    }
}

impl<T: Scalar> Model<T> {
    /// Allocates and initializes every parameter from `config.seed`.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        for s in plan(config) {
            let mut rng = seed::rng(config.seed, &format!("init/{}", s.name), &[]);
            let values = init_values(s.init, s.len(), &mut rng);
            params.add(s.name, s.shape, values.into_iter().map(T::from_f64_lossy).collect());
        }
        Self::from_params(config.clone(), params)
    }

    /// Wraps an existing parameter store, checking it against the plan.
    pub fn from_params(config: ModelConfig, params: ParamStore<T>) -> Result<Self> {
        config.validate()?;
        let specs = plan(&config);
        if specs.len() != params.len() {
            return Err(Error::shape(format!("{} parameters", specs.len()), params.len()));
        }
        for (s, p) in specs.iter().zip(params.iter()) {
            if s.name != p.name || s.shape != p.shape {
                return Err(Error::shape(
                    format!("{} {:?}", s.name, s.shape),
                    format!("{} {:?}", p.name, p.shape),
                ));
            }
        }
        let id = |n: &str| params.find(n).expect("name from plan");
        let pair = |p: &str, a: &str, b: &str| Pair(id(&format!("{p}.{a}")), id(&format!("{p}.{b}")));
        let (rs_a, rs_b) = if config.learnable_resampling {
            ("kernel", "bias")
        } else {
            ("weight", "bias")
        };
        let layout = match config.architecture {
            Architecture::Fno => Layout::Fno {
                lift: pair("lift", rs_a, rs_b),
                layers: (0..config.n_layers)
                    .map(|t| FourierIds {
                        norm: pair(&format!("layer{t}.norm"), "gamma", "beta"),
                        w: pair(&format!("layer{t}.w"), "weight", "bias"),
                        re: id(&format!("layer{t}.spectral.re")),
                        im: id(&format!("layer{t}.spectral.im")),
                    })
                    .collect(),
                heads: config
                    .tap_layers()
                    .into_iter()
                    .map(|t| (t, pair(&format!("head{t}"), rs_a, rs_b)))
                    .collect(),
                out: pair("out", rs_a, rs_b),
            },
            Architecture::BaselineCnn => {
                let k = |p: &str| pair(p, "kernel", "bias");
                let n = |p: &str| pair(p, "gamma", "beta");
                Layout::Cnn {
                    down1: k("down1"),
                    norm1: n("norm1"),
                    conv1: k("conv1"),
                    down2: k("down2"),
                    conv2: k("conv2"),
                    conv3: k("conv3"),
                    up2: k("up2"),
                    norm2: n("norm2"),
                    conv4: k("conv4"),
                    out: k("out"),
                }
            }
        };
        Ok(Model { config, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore<T> {
        self.params
    }

    /// Exact number of scalar learnables (complex entries count twice).
    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn breakdown(&self) -> ParamBreakdown {
        param_count_for(&self.config)
    }

    fn check_input(&self, v: &Field<T>) -> Result<()> {
        if v.channels() != self.config.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.config.in_channels,
                found: v.channels(),
            });
        }
        for (axis, &n) in v.dims().iter().enumerate() {
            if n < MIN_INPUT {
                return Err(Error::DimensionTooSmall {
                    axis,
                    size: n,
                    min: MIN_INPUT,
                });
            }
        }
        Ok(())
    }

    /// Records the network on `tape`, starting from the input variable `x`.
    pub fn record(&self, tape: &mut Tape<T>, x: Var, training: bool) -> Result<Heads> {
        self.check_input(tape.value(x))?;
        let dims = tape.value(x).dims();
        let s = &self.params;
        match &self.layout {
            Layout::Fno {
                lift,
                layers,
                heads,
                out,
            } => {
                let c = &self.config;
                let resample = |tape: &mut Tape<T>, v: Var, p: Pair, up: bool| {
                    if !c.learnable_resampling {
                        tape.pointwise_linear(s, v, p.0, p.1)
                    } else if up {
                        tape.tconv3_up(s, v, p.0, p.1, dims)
                    } else {
                        tape.conv3_down(s, v, p.0, p.1)
                    }
                };
                let mask = ModeMask::new(c.k_max);
                let mut v = resample(tape, x, *lift, false)?;
                let mut aux = Vec::new();
                let mut next_head = heads.iter().peekable();
                for (t, ids) in layers.iter().enumerate() {
                    let h = tape.layer_norm(s, v, ids.norm.0, ids.norm.1)?;
                    let a = tape.pointwise_linear(s, h, ids.w.0, ids.w.1)?;
                    let k = if c.shared_weights {
                        tape.spectral_shared(s, h, ids.re, ids.im, mask)?
                    } else {
                        tape.spectral_permode(s, h, ids.re, ids.im, mask)?
                    };
                    let u = tape.add(a, k)?;
                    let z = tape.selu(u);
                    v = if c.residual { tape.add(v, z)? } else { z };
                    while let Some(&&(tap, p)) = next_head.peek() {
                        if tap != t {
                            break;
                        }
                        next_head.next();
                        if training {
                            let logits = resample(tape, v, p, true)?;
                            aux.push(tape.softmax_channels(logits));
                        }
                    }
                }
                let logits = resample(tape, v, *out, true)?;
                Ok(Heads {
                    main: tape.softmax_channels(logits),
                    aux,
                })
            }
            Layout::Cnn {
                down1,
                norm1,
                conv1,
                down2,
                conv2,
                conv3,
                up2,
                norm2,
                conv4,
                out,
            } => {
                let a = tape.conv3_down(s, x, down1.0, down1.1)?;
                let a = tape.layer_norm(s, a, norm1.0, norm1.1)?;
                let a = tape.selu(a);
                let a = tape.conv3_same(s, a, conv1.0, conv1.1)?;
                let skip = tape.selu(a);
                let level1 = tape.value(skip).dims();
                let b = tape.conv3_down(s, skip, down2.0, down2.1)?;
                let b = tape.selu(b);
                let b = tape.conv3_same(s, b, conv2.0, conv2.1)?;
                let b = tape.selu(b);
                let b = tape.conv3_same(s, b, conv3.0, conv3.1)?;
                let b = tape.selu(b);
                let u = tape.tconv3_up(s, b, up2.0, up2.1, level1)?;
                let u = tape.add(u, skip)?;
                let u = tape.layer_norm(s, u, norm2.0, norm2.1)?;
                let u = tape.selu(u);
                let u = tape.conv3_same(s, u, conv4.0, conv4.1)?;
                let u = tape.selu(u);
                let logits = tape.tconv3_up(s, u, out.0, out.1, dims)?;
                Ok(Heads {
                    main: tape.softmax_channels(logits),
                    aux: Vec::new(),
                })
            }
        }
    }

    /// Evaluates the network. Auxiliary outputs are produced only when
    /// `training` is set and deep supervision is on.
    pub fn forward(&self, volume: &Field<T>, training: bool) -> Result<ForwardOutput<T>> {
        let mut tape = Tape::new();
        let x = tape.input(volume.clone());
        let heads = self.record(&mut tape, x, training)?;
        let aux = heads.aux.iter().map(|&a| tape.take_value(a)).collect();
        Ok(ForwardOutput {
            main: tape.take_value(heads.main),
            aux,
        })
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let mut params = ParamStore::new();
        for p in self.params.iter() {
            params.add(
                p.name.clone(),
                p.shape.clone(),
                p.value.iter().map(|v| U::from_f64_lossy(v.as_f64())).collect(),
            );
        }
        Model::from_params(self.config.clone(), params).expect("same plan")
    }
}
