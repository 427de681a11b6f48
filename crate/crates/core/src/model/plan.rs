//! Parameter layout as a pure function of the configuration.

use serde::{Deserialize, Serialize};

use super::config::{Architecture, ModelConfig, Variant};
use crate::ops::ModeMask;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform on `[-bound, bound)`.
    Symmetric(f64),
    /// Uniform on `[0, scale)`.
    Positive(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Block name: everything before the first dot.
    pub fn block(&self) -> &str {
        self.name.split('.').next().unwrap_or(&self.name)
    }
}

fn spec(name: String, shape: Vec<usize>, init: Init) -> ParamSpec {
    ParamSpec { name, shape, init }
}

fn fan_bound(fan_in: usize) -> Init {
    Init::Symmetric(1.0 / (fan_in as f64).sqrt())
}

fn down(prefix: &str, d_in: usize, d_out: usize) -> [ParamSpec; 2] {
    [
        spec(
            format!("{prefix}.kernel"),
            vec![d_out, d_in, 2, 2, 2],
            fan_bound(8 * d_in),
        ),
        spec(format!("{prefix}.bias"), vec![d_out], Init::Zeros),
    ]
}

fn up(prefix: &str, d_in: usize, d_out: usize) -> [ParamSpec; 2] {
    [
        spec(format!("{prefix}.kernel"), vec![d_in, d_out, 2, 2, 2], fan_bound(d_in)),
        spec(format!("{prefix}.bias"), vec![d_out], Init::Zeros),
    ]
}

fn linear(prefix: &str, d_in: usize, d_out: usize) -> [ParamSpec; 2] {
    [
        spec(format!("{prefix}.weight"), vec![d_out, d_in], fan_bound(d_in)),
        spec(format!("{prefix}.bias"), vec![d_out], Init::Zeros),
    ]
}

fn conv3(prefix: &str, d_in: usize, d_out: usize) -> [ParamSpec; 2] {
    [
        spec(
            format!("{prefix}.kernel"),
            vec![d_out, d_in, 3, 3, 3],
            fan_bound(27 * d_in),
        ),
        spec(format!("{prefix}.bias"), vec![d_out], Init::Zeros),
    ]
}

fn norm(prefix: &str, d: usize) -> [ParamSpec; 2] {
    [
        spec(format!("{prefix}.gamma"), vec![d], Init::Ones),
        spec(format!("{prefix}.beta"), vec![d], Init::Zeros),
    ]
}

/// Every parameter of the network described by `config`, in storage order.
pub fn plan(config: &ModelConfig) -> Vec<ParamSpec> {
    match config.architecture {
        Architecture::Fno => fno_plan(config),
        Architecture::BaselineCnn => cnn_plan(config),
    }
}

fn fno_plan(c: &ModelConfig) -> Vec<ParamSpec> {
    let (d, l) = (c.width, c.out_labels);
    let mut out = Vec::new();
    if c.learnable_resampling {
        out.extend(down("lift", c.in_channels, d));
    } else {
        out.extend(linear("lift", c.in_channels, d));
    }
    let r_scale = Init::Positive(1.0 / d as f64);
    for t in 0..c.n_layers {
        let p = format!("layer{t}");
        out.extend(norm(&format!("{p}.norm"), d));
        out.extend(linear(&format!("{p}.w"), d, d));
        let r_shape = if c.shared_weights {
            vec![d, d]
        } else {
            vec![ModeMask::new(c.k_max).table_len(), d, d]
        };
        out.push(spec(format!("{p}.spectral.re"), r_shape.clone(), r_scale));
        out.push(spec(format!("{p}.spectral.im"), r_shape, r_scale));
    }
    for t in c.tap_layers() {
        let p = format!("head{t}");
        if c.learnable_resampling {
            out.extend(up(&p, d, l));
        } else {
            out.extend(linear(&p, d, l));
        }
    }
    if c.learnable_resampling {
        out.extend(up("out", d, l));
    } else {
        out.extend(linear("out", d, l));
    }
    out
}

fn cnn_plan(c: &ModelConfig) -> Vec<ParamSpec> {
    let (w, l) = (c.width, c.out_labels);
    let mut out = Vec::new();
    out.extend(down("down1", c.in_channels, w));
    out.extend(norm("norm1", w));
    out.extend(conv3("conv1", w, w));
    out.extend(down("down2", w, w));
    out.extend(conv3("conv2", w, w));
    out.extend(conv3("conv3", w, w));
    out.extend(up("up2", w, w));
    out.extend(norm("norm2", w));
    out.extend(conv3("conv4", w, w));
    out.extend(up("out", w, l));
    out
}

/// Exact parameter total with a per-block breakdown, in plan order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBreakdown {
    pub blocks: Vec<(String, usize)>,
    pub total: usize,
}

/// Counts parameters without allocating them.
pub fn param_count_for(config: &ModelConfig) -> ParamBreakdown {
    let mut blocks: Vec<(String, usize)> = Vec::new();
    for s in plan(config) {
        match blocks.last_mut() {
            Some((name, n)) if name == s.block() => *n += s.len(),
            _ => blocks.push((s.block().to_string(), s.len())),
        }
    }
    let total = blocks.iter().map(|b| b.1).sum();
    ParamBreakdown { blocks, total }
}

/// Published sizes of the full-size presets, where one exists.
pub fn reference_count(v: Variant) -> Option<usize> {
    match v {
        Variant::Fnoseg3d => Some(29_800),
        Variant::FnoShared => Some(17_200),
        Variant::FnoOriginal => Some(165_900_000),
        Variant::BaselineCnn => None,
    }
}

/// One line of the parameter-count report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub variant: Variant,
    pub config: ModelConfig,
    pub total: usize,
    pub reference: Option<usize>,
    /// `(total - reference) / reference`.
    pub relative_gap: Option<f64>,
    pub blocks: Vec<(String, usize)>,
}

/// Counts for `variants` at full size, or at laptop size when `desk` is set
/// (no reference applies then).
pub fn param_report(variants: &[Variant], desk: bool) -> Vec<CountRow> {
    variants
        .iter()
        .map(|&variant| {
            let config = if desk {
                variant.config().desk()
            } else {
                variant.config()
            };
            let b = param_count_for(&config);
            let reference = if desk { None } else { reference_count(variant) };
            CountRow {
                variant,
                config,
                total: b.total,
                reference,
                relative_gap: reference.map(|r| (b.total as f64 - r as f64) / r as f64),
                blocks: b.blocks,
            }
        })
        .collect()
}
