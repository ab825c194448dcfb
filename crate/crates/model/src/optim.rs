//! Decoupled-weight-decay adaptive optimizer with a linear warmup schedule.

use crate::params::Parameters;
use crate::tensor::Matrix;

pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
    step: usize,
}

impl AdamW {
    pub fn new(params: &Parameters, weight_decay: f64) -> Self {
        let shapes: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.rows, t.cols))
            .collect();
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
            first_moment: shapes.clone(),
            second_moment: shapes,
            step: 0,
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One update with bias-corrected moments; weight decay is applied
    /// directly to the parameters, not through the gradient.
    pub fn step(&mut self, params: &mut Parameters, grads: &[Matrix], learning_rate: f64) {
        self.step += 1;
        let bias1 = 1.0 - self.beta1.powi(self.step as i32);
        let bias2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((tensor, grad), (m, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(&mut self.second_moment))
        {
            debug_assert_eq!((tensor.rows, tensor.cols), (grad.rows, grad.cols));
            for i in 0..tensor.data.len() {
                let g = grad.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * g;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m.data[i] / bias1;
                let v_hat = v.data[i] / bias2;
                tensor.data[i] -= learning_rate
                    * (m_hat / (v_hat.sqrt() + self.epsilon) + self.weight_decay * tensor.data[i]);
            }
        }
    }
}

/// Linear warmup to the base rate, then constant.
#[derive(Debug, Clone, Copy)]
pub struct WarmupSchedule {
    pub base_rate: f64,
    pub warmup_steps: usize,
}

impl WarmupSchedule {
    /// Learning rate for 1-based step `t`: `base * t / warmup` during
    /// warmup, `base` afterwards.
    pub fn rate(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 || step >= self.warmup_steps {
            self.base_rate
        } else {
            self.base_rate * step as f64 / self.warmup_steps as f64
        }
    }
}
