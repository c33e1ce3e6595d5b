use super::tensor::Tensor;
use crate::error::{invalid, Result};

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.0,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
    touched: bool,
}

/// Named trainable tensors with gradient accumulators and Adam moments.
///
/// Gradients accumulate additively until [`ParameterStore::adam_step`] or
/// [`ParameterStore::zero_grad`] clears them.
#[derive(Clone, Debug)]
pub struct ParameterStore {
    tag: u32,
    entries: Vec<ParamEntry>,
}

impl ParameterStore {
    pub fn new(tag: u32) -> Self {
        Self {
            tag,
            entries: Vec::new(),
        }
    }

    pub fn tag(&self) -> u32 {
        self.tag
    }

    /// Registers a new parameter and returns its index.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(invalid!("duplicate parameter name {name}"));
        }
        let zeros = Tensor::zeros(value.dims());
        self.entries.push(ParamEntry {
            name,
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
            step: 0,
            touched: false,
        });
        Ok(self.entries.len() - 1)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entry_mut(&mut self, index: usize) -> &mut ParamEntry {
        &mut self.entries[index]
    }

    pub fn value(&self, index: usize) -> &Tensor {
        &self.entries[index].value
    }

    pub fn value_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].value
    }

    pub fn grad(&self, index: usize) -> &Tensor {
        &self.entries[index].grad
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub(crate) fn accumulate(&mut self, index: usize, g: &[f32]) {
        let e = &mut self.entries[index];
        for (a, &b) in e.grad.data_mut().iter_mut().zip(g) {
            *a += b;
        }
        e.touched = true;
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.data_mut().fill(0.0);
            e.touched = false;
        }
    }

    /// Bias-corrected Adam update of every parameter that received a gradient,
    /// then clears all gradients.
    pub fn adam_step(&mut self, opt: &Adam) {
        for e in &mut self.entries {
            if !e.touched {
                continue;
            }
            e.step += 1;
            let t = e.step as i32;
            let c1 = 1.0 - opt.beta1.powi(t);
            let c2 = 1.0 - opt.beta2.powi(t);
            let g = e.grad.data();
            let m = e.m.data_mut();
            for (mi, &gi) in m.iter_mut().zip(g) {
                *mi = opt.beta1 * *mi + (1.0 - opt.beta1) * gi;
            }
            let v = e.v.data_mut();
            for (vi, &gi) in v.iter_mut().zip(g) {
                *vi = opt.beta2 * *vi + (1.0 - opt.beta2) * gi * gi;
            }
            let (m, v) = (e.m.data(), e.v.data());
            for ((p, &mi), &vi) in e.value.data_mut().iter_mut().zip(m).zip(v) {
                let m_hat = mi / c1;
                let v_hat = vi / c2;
                *p -= opt.lr * m_hat / (v_hat.sqrt() + opt.epsilon);
            }
        }
        self.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn scalar_store(v: f32) -> ParameterStore {
        let mut s = ParameterStore::new(0);
        s.insert("w", Tensor::scalar(v)).unwrap();
        s
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut s = scalar_store(0.7);
        s.accumulate(0, &[3.0]);
        s.adam_step(&Adam {
            lr: 0.0,
            ..Adam::default()
        });
        assert_eq!(s.value(0).item(), 0.7);
        assert_eq!(s.grad(0).item(), 0.0);
    }

    #[test]
    fn one_step_matches_hand_formula() {
        // m = g = 1; v = 0.01; v̂ = 1 → Δ = 0.1 / (1 + 1e-8)
        let mut s = scalar_store(0.0);
        s.accumulate(0, &[1.0]);
        s.adam_step(&Adam {
            lr: 0.1,
            beta1: 0.0,
            beta2: 0.99,
            epsilon: 1e-8,
        });
        let expected = -0.1f32 / (1.0 + 1e-8);
        assert!((s.value(0).item() - expected).abs() < 1e-7);
    }

    #[test]
    fn zero_beta1_first_moment_is_gradient() {
        let mut s = scalar_store(0.0);
        for g in [1.0, -2.0, 0.5] {
            s.accumulate(0, &[g]);
            s.adam_step(&Adam::default());
            assert_eq!(s.entries()[0].m.item(), g);
        }
    }

    #[test]
    fn untouched_params_skip_update() {
        let mut s = scalar_store(1.0);
        s.adam_step(&Adam::default());
        assert_eq!(s.value(0).item(), 1.0);
        assert_eq!(s.entries()[0].step, 0);
    }

    #[test]
    fn gradients_accumulate_across_backward_calls() {
        let mut s = scalar_store(2.0);
        for _ in 0..2 {
            let mut t = Tape::new();
            let w = t.param(&s, 0);
            let y = t.square(w).unwrap();
            t.backward_into(y, &mut [&mut s]).unwrap();
        }
        assert_eq!(s.grad(0).item(), 8.0);
        s.zero_grad();
        assert_eq!(s.grad(0).item(), 0.0);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = scalar_store(0.0);
        assert!(s.insert("w", Tensor::scalar(1.0)).is_err());
    }
}
