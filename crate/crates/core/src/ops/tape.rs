//! Recording tape for reverse-mode differentiation of the layer vocabulary.

use super::conv;
use super::layers::{self, LayerNormCache};
use super::mask::ModeMask;
use super::param::{ParamId, ParamStore};
use super::spectral;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Dims, Field, Spectrum};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Input,
    Linear {
        x: Var,
        w: ParamId,
        b: ParamId,
    },
    SpectralShared {
        x: Var,
        re: ParamId,
        im: ParamId,
        mask: ModeMask,
        spec: Spectrum<T>,
    },
    SpectralPerMode {
        x: Var,
        re: ParamId,
        im: ParamId,
        mask: ModeMask,
        spec: Spectrum<T>,
    },
    ConvDown {
        x: Var,
        k: ParamId,
        b: ParamId,
    },
    TConvUp {
        x: Var,
        k: ParamId,
        b: ParamId,
    },
    Conv3 {
        x: Var,
        k: ParamId,
        b: ParamId,
    },
    LayerNorm {
        x: Var,
        gamma: ParamId,
        beta: ParamId,
        cache: LayerNormCache<T>,
    },
    Selu {
        x: Var,
    },
    Softmax {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
}

struct Node<T> {
    value: Field<T>,
    op: Op<T>,
}

/// Ordered record of executed operations with the intermediates their
/// backward passes need. One tape serves exactly one backward pass.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    input_grads: Vec<(Var, Field<T>)>,
    consumed: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            input_grads: Vec::new(),
            consumed: false,
        }
    }

    fn push(&mut self, value: Field<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn value(&self, v: Var) -> &Field<T> {
        &self.nodes[v.0].value
    }

    /// Moves a recorded value out, leaving an empty field behind.
    pub fn take_value(&mut self, v: Var) -> Field<T> {
        std::mem::replace(&mut self.nodes[v.0].value, Field::zeros(0, [0, 0, 0]))
    }

    pub fn input(&mut self, value: Field<T>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn pointwise_linear(&mut self, store: &ParamStore<T>, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
        let d_out = store.value(b).len();
        let y = layers::pointwise_linear(self.value(x), store.value(w), store.value(b), d_out)?;
        Ok(self.push(y, Op::Linear { x, w, b }))
    }

    pub fn spectral_shared(
        &mut self,
        store: &ParamStore<T>,
        x: Var,
        re: ParamId,
        im: ParamId,
        mask: ModeMask,
    ) -> Result<Var> {
        let d_in = self.value(x).channels();
        let d_out = store.value(re).len() / d_in.max(1);
        let (y, spec) =
            spectral::spectral_shared_forward(self.value(x), store.value(re), store.value(im), d_out, &mask)?;
        Ok(self.push(y, Op::SpectralShared { x, re, im, mask, spec }))
    }

    pub fn spectral_permode(
        &mut self,
        store: &ParamStore<T>,
        x: Var,
        re: ParamId,
        im: ParamId,
        mask: ModeMask,
    ) -> Result<Var> {
        let d_in = self.value(x).channels();
        let d_out = store.value(re).len() / (mask.table_len() * d_in).max(1);
        let (y, spec) =
            spectral::spectral_permode_forward(self.value(x), store.value(re), store.value(im), d_out, &mask)?;
        Ok(self.push(y, Op::SpectralPerMode { x, re, im, mask, spec }))
    }

    pub fn conv3_down(&mut self, store: &ParamStore<T>, x: Var, k: ParamId, b: ParamId) -> Result<Var> {
        let d_out = store.value(b).len();
        let y = conv::conv3_down(self.value(x), store.value(k), store.value(b), d_out)?;
        Ok(self.push(y, Op::ConvDown { x, k, b }))
    }

    pub fn tconv3_up(&mut self, store: &ParamStore<T>, x: Var, k: ParamId, b: ParamId, target: Dims) -> Result<Var> {
        let d_out = store.value(b).len();
        let y = conv::tconv3_up(self.value(x), store.value(k), store.value(b), d_out, target)?;
        Ok(self.push(y, Op::TConvUp { x, k, b }))
    }

    pub fn conv3_same(&mut self, store: &ParamStore<T>, x: Var, k: ParamId, b: ParamId) -> Result<Var> {
        let d_out = store.value(b).len();
        let y = conv::conv3_same(self.value(x), store.value(k), store.value(b), d_out)?;
        Ok(self.push(y, Op::Conv3 { x, k, b }))
    }

    pub fn layer_norm(&mut self, store: &ParamStore<T>, x: Var, gamma: ParamId, beta: ParamId) -> Result<Var> {
        let (y, cache) = layers::layer_norm(self.value(x), store.value(gamma), store.value(beta))?;
        Ok(self.push(y, Op::LayerNorm { x, gamma, beta, cache }))
    }

    pub fn selu(&mut self, x: Var) -> Var {
        let y = layers::selu(self.value(x));
        self.push(y, Op::Selu { x })
    }

    pub fn softmax_channels(&mut self, x: Var) -> Var {
        let y = layers::softmax_channels(self.value(x));
        self.push(y, Op::Softmax { x })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        Ok(self.push(y, Op::Add { a, b }))
    }

    /// Gradient of the loss with respect to a recorded input, after [`backward`](Self::backward).
    pub fn input_grad(&self, v: Var) -> Option<&Field<T>> {
        self.input_grads.iter().find(|(k, _)| *k == v).map(|(_, g)| g)
    }

    /// Propagates `seeds` (dL/d value for chosen outputs) back through the
    /// tape, accumulating parameter gradients into `store`.
    pub fn backward(&mut self, store: &mut ParamStore<T>, seeds: &[(Var, &Field<T>)]) -> Result<()> {
        if self.consumed || self.nodes.is_empty() {
            return Err(Error::NoForward);
        }
        let mut grads: Vec<Option<Field<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            self.nodes[v.0].value.check_same_shape(g)?;
            accumulate(&mut grads, *v, (*g).clone());
        }
        let mut input_grads = Vec::new();
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => input_grads.push((Var(i), g)),
                Op::Linear { x, w, b } => {
                    let (gx, gw, gb) = layers::pointwise_linear_backward(&g, self.value(*x), store.value(*w));
                    add_into(&mut store.get_mut(*w).grad, &gw);
                    add_into(&mut store.get_mut(*b).grad, &gb);
                    accumulate(&mut grads, *x, gx);
                }
                Op::SpectralShared { x, re, im, mask, spec } => {
                    let (gx, gre, gim) =
                        spectral::spectral_shared_backward(&g, spec, store.value(*re), store.value(*im), mask)?;
                    add_into(&mut store.get_mut(*re).grad, &gre);
                    add_into(&mut store.get_mut(*im).grad, &gim);
                    accumulate(&mut grads, *x, gx);
                }
                Op::SpectralPerMode { x, re, im, mask, spec } => {
                    let (gx, gre, gim) =
                        spectral::spectral_permode_backward(&g, spec, store.value(*re), store.value(*im), mask)?;
                    add_into(&mut store.get_mut(*re).grad, &gre);
                    add_into(&mut store.get_mut(*im).grad, &gim);
                    accumulate(&mut grads, *x, gx);
                }
                Op::ConvDown { x, k, b } => {
                    let (gx, gk, gb) = conv::conv3_down_backward(&g, self.value(*x), store.value(*k));
                    add_into(&mut store.get_mut(*k).grad, &gk);
                    add_into(&mut store.get_mut(*b).grad, &gb);
                    accumulate(&mut grads, *x, gx);
                }
                Op::TConvUp { x, k, b } => {
                    let (gx, gk, gb) = conv::tconv3_up_backward(&g, self.value(*x), store.value(*k));
                    add_into(&mut store.get_mut(*k).grad, &gk);
                    add_into(&mut store.get_mut(*b).grad, &gb);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Conv3 { x, k, b } => {
                    let (gx, gk, gb) = conv::conv3_same_backward(&g, self.value(*x), store.value(*k));
                    add_into(&mut store.get_mut(*k).grad, &gk);
                    add_into(&mut store.get_mut(*b).grad, &gb);
                    accumulate(&mut grads, *x, gx);
                }
                Op::LayerNorm { x, gamma, beta, cache } => {
                    let (gx, gg, gb) = layers::layer_norm_backward(&g, cache, store.value(*gamma));
                    add_into(&mut store.get_mut(*gamma).grad, &gg);
                    add_into(&mut store.get_mut(*beta).grad, &gb);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Selu { x } => {
                    let gx = layers::selu_backward(&g, self.value(*x));
                    accumulate(&mut grads, *x, gx);
                }
                Op::Softmax { x } => {
                    let gx = layers::softmax_backward(&g, &node.value);
                    accumulate(&mut grads, *x, gx);
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g);
                }
            }
        }
        self.input_grads = input_grads;
        self.consumed = true;
        store.mark_grads_ready();
        // cached spectra and normalizations are no longer needed
        for node in &mut self.nodes {
            if !matches!(node.op, Op::Input) {
                node.op = Op::Input;
            }
        }
        Ok(())
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Field<T>>], v: Var, g: Field<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g).expect("gradient shape matches value"),
        slot @ None => *slot = Some(g),
    }
}
