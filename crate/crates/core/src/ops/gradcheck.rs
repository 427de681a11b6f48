//! Central finite-difference verification of tape gradients (f64 only).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::param::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::tensor::Field;

/// Per-tensor comparison of analytic and numerical gradients.
#[derive(Clone, Debug, Serialize)]
pub struct GradEntry {
    pub name: String,
    pub coords: usize,
    pub max_abs_grad: f64,
    pub max_abs_error: f64,
    /// `max |analytic - numeric| / max(|analytic|, |numeric|)` over the tensor.
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradReport {
    pub label: String,
    pub entries: Vec<GradEntry>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error() <= tol
    }
}

/// Output of an objective evaluation: scalar loss plus dL/d(output) seeds.
pub type Evaluation = (f64, Vec<(Var, Field<f64>)>);

/// Wraps a single-output graph into the objective `sum(c * y)` with fixed
/// random weights `c` drawn from `seed`.
pub fn random_linear_objective<F>(
    build: F,
    seed: u64,
) -> impl Fn(&mut Tape<f64>, &ParamStore<f64>, &[Var]) -> Result<Evaluation>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>, &[Var]) -> Result<Var>,
{
    move |tape, store, inputs| {
        let y = build(tape, store, inputs)?;
        let out = tape.value(y);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Field::from_fn(out.channels(), out.dims(), |_, _, _, _| rng.gen_range(-1.0..1.0));
        let loss = out.dot(&c)?;
        Ok((loss, vec![(y, c)]))
    }
}

/// Builds a [`GradEntry`] from matching analytic and numerical gradients.
pub fn compare(name: String, analytic: &[f64], numeric: &[f64]) -> GradEntry {
    let mut max_abs_grad = 0.0f64;
    let mut max_abs_error = 0.0f64;
    let mut scale = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        max_abs_grad = max_abs_grad.max(a.abs());
        max_abs_error = max_abs_error.max((a - n).abs());
        scale = scale.max(a.abs()).max(n.abs());
    }
    // gradients at roundoff level on both sides count as agreeing zeros
    let rel_error = if scale > 1e-14 { max_abs_error / scale } else { 0.0 };
    GradEntry {
        name,
        coords: analytic.len(),
        max_abs_grad,
        max_abs_error,
        rel_error,
    }
}

/// Runs the objective once with backward, then perturbs every parameter
/// coordinate and every input element by `±h`.
pub fn grad_check<F>(
    label: &str,
    store: &mut ParamStore<f64>,
    inputs: &[Field<f64>],
    objective: F,
    h: f64,
) -> Result<GradReport>
where
    F: Fn(&mut Tape<f64>, &ParamStore<f64>, &[Var]) -> Result<Evaluation>,
{
    let eval = |store: &ParamStore<f64>, inputs: &[Field<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|f| tape.input(f.clone())).collect();
        Ok(objective(&mut tape, store, &vars)?.0)
    };

    store.zero_grad();
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|f| tape.input(f.clone())).collect();
    let (_, seeds) = objective(&mut tape, store, &vars)?;
    let seed_refs: Vec<(Var, &Field<f64>)> = seeds.iter().map(|(v, g)| (*v, g)).collect();
    tape.backward(store, &seed_refs)?;

    let mut entries = Vec::new();
    for pi in 0..store.len() {
        let id = super::param::ParamId(pi);
        let analytic = store.get(id).grad.clone();
        let mut numeric = vec![0.0; analytic.len()];
        for (k, slot) in numeric.iter_mut().enumerate() {
            let orig = store.get(id).value[k];
            store.get_mut(id).value[k] = orig + h;
            let up = eval(store, inputs)?;
            store.get_mut(id).value[k] = orig - h;
            let down = eval(store, inputs)?;
            store.get_mut(id).value[k] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        entries.push(compare(store.get(id).name.clone(), &analytic, &numeric));
    }

    for (ii, var) in vars.iter().enumerate() {
        let analytic = match tape.input_grad(*var) {
            Some(g) => g.data().to_vec(),
            None => vec![0.0; inputs[ii].len()],
        };
        let mut numeric = vec![0.0; analytic.len()];
        let mut perturbed = inputs.to_vec();
        for (k, slot) in numeric.iter_mut().enumerate() {
            let orig = inputs[ii].data()[k];
            perturbed[ii].data_mut()[k] = orig + h;
            let up = eval(store, &perturbed)?;
            perturbed[ii].data_mut()[k] = orig - h;
            let down = eval(store, &perturbed)?;
            perturbed[ii].data_mut()[k] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        entries.push(compare(format!("input{ii}"), &analytic, &numeric));
    }
    store.zero_grad();
    Ok(GradReport {
        label: label.to_string(),
        entries,
    })
}
