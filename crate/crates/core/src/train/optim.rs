use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::ParamStore;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_epochs: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            lr_max: 1e-2,
            lr_min: 1e-3,
            total_epochs: 100,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_max > self.lr_min && self.lr_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "need lr_max > lr_min > 0, got {} / {}",
                self.lr_max, self.lr_min
            )));
        }
        if self.total_epochs == 0 {
            return Err(Error::InvalidConfig("total_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cosine annealing from `lr_max` at epoch 0 to `lr_min` at `total_epochs`.
pub fn cosine_lr(epoch: usize, sched: &ScheduleConfig) -> Result<f64> {
    let t = sched.total_epochs;
    if epoch > t {
        return Err(Error::EpochOutOfRange { epoch, total: t });
    }
    // written as a convex combination so both endpoints are exact
    let w = 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / t as f64).cos());
    Ok(w * sched.lr_max + (1.0 - w) * sched.lr_min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamaxState<T> {
    pub m: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Scalar> AdamaxState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        AdamaxState {
            m: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            u: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adamax update. Gradients must come from a completed backward pass;
/// they are zeroed afterwards.
pub fn adamax_step<T: Scalar>(params: &mut ParamStore<T>, state: &mut AdamaxState<T>, lr: f64) -> Result<()> {
    if !params.grads_ready() {
        return Err(Error::StepBeforeBackward);
    }
    if state.m.len() != params.len() {
        return Err(Error::shape(format!("{} moment slots", params.len()), state.m.len()));
    }
    state.t += 1;
    let b1 = T::from_f64_lossy(state.beta1);
    let one_m_b1 = T::from_f64_lossy(1.0 - state.beta1);
    let b2 = T::from_f64_lossy(state.beta2);
    let eps = T::from_f64_lossy(state.eps);
    let step = T::from_f64_lossy(lr / (1.0 - state.beta1.powi(state.t as i32)));
    for ((p, m), u) in params.iter_mut().zip(&mut state.m).zip(&mut state.u) {
        for i in 0..p.value.len() {
            let g = p.grad[i];
            m[i] = b1 * m[i] + one_m_b1 * g;
            u[i] = (b2 * u[i]).max(g.abs());
            p.value[i] -= step * m[i] / (u[i] + eps);
        }
    }
    params.zero_grad();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_requires_backward() {
        let mut p = ParamStore::<f64>::new();
        p.add("w", vec![1], vec![0.0]);
        let mut s = AdamaxState::new(&p);
        assert!(matches!(
            adamax_step(&mut p, &mut s, 0.01),
            Err(Error::StepBeforeBackward)
        ));
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = ParamStore::<f64>::new();
        p.add("w", vec![3], vec![1.0, -2.0, 3.0]);
        let mut s = AdamaxState::new(&p);
        p.mark_grads_ready();
        adamax_step(&mut p, &mut s, 0.01).unwrap();
        assert_eq!(p.iter().next().unwrap().value, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn schedule_out_of_range() {
        let s = ScheduleConfig::default();
        assert!(matches!(cosine_lr(101, &s), Err(Error::EpochOutOfRange { .. })));
    }
}
