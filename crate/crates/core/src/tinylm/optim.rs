//! Adam with bias correction and decoupled weight decay.

use ndarray::Zip;

use super::autograd::{Gradients, Parameters};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Parameters,
    v: Parameters,
    step: u64,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One update: `p ← p − lr·wd·p`, then the bias-corrected Adam step.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !params.same_layout(grads) || !params.same_layout(&state.m) {
        return Err(Error::ShapeMismatch("adam: parameters, gradients and state differ".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    let decay = lr * weight_decay;

    for (i, (_, p)) in params.iter_mut().enumerate() {
        let id = super::autograd::ParamId(i);
        let g = grads.tensor(id);
        let m = state.m.tensor_mut(id);
        Zip::from(&mut *m).and(g).for_each(|m, &g| *m = BETA1 * *m + (1.0 - BETA1) * g);
        let v = state.v.tensor_mut(id);
        Zip::from(&mut *v).and(g).for_each(|v, &g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
        let (m, v) = (state.m.tensor(id), state.v.tensor(id));
        Zip::from(p).and(m).and(v).for_each(|p, &m, &v| {
            *p -= decay * *p;
            *p -= lr * (m / bc1) / ((v / bc2).sqrt() + EPS);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar(v: f64) -> Parameters {
        let mut p = Parameters::new();
        p.push("p", array![[v]]);
        p
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = scalar(0.37);
        let g = scalar(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-3, 0.0).unwrap();
        assert_eq!(p.get("p").unwrap()[[0, 0]], 0.37);
    }

    #[test]
    fn first_step_closed_form() {
        // m̂ = g, v̂ = g², so Δp = −lr·g/(|g| + ε).
        let mut p = scalar(0.0);
        let g = scalar(1.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-4, 0.0).unwrap();
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((p.get("p").unwrap()[[0, 0]] - expected).abs() < 1e-18);
    }

    #[test]
    fn decay_only() {
        let mut p = scalar(1.0);
        let g = scalar(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 1e-4, 0.01).unwrap();
        assert!((p.get("p").unwrap()[[0, 0]] - (1.0 - 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = scalar(1.0);
        let mut g = Parameters::new();
        g.push("p", array![[1.0, 2.0]]);
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &g, &mut s, 1e-3, 0.0).is_err());
    }
}
