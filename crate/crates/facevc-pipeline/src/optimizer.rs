//! Plain SGD with classical momentum, applied in registry order.

use std::collections::HashMap;

use facevc_nn::ParameterRegistry;

pub struct Sgd {
    lr: f32,
    momentum: f32,
    clip_norm: f32,
    velocity: HashMap<String, Vec<f32>>,
}

impl Sgd {
    pub fn new(lr: f32, momentum: f32, clip_norm: f32) -> Self {
        Self {
            lr,
            momentum,
            clip_norm,
            velocity: HashMap::new(),
        }
    }

    /// One update over parameters accepted by `filter`, consuming the
    /// gradients currently held in the registry. Gradients are jointly
    /// rescaled when their global norm exceeds the clip threshold.
    pub fn step<F: Fn(&str) -> bool>(&mut self, reg: &mut ParameterRegistry, filter: F) {
        let names: Vec<String> = reg
            .names()
            .iter()
            .filter(|n| filter(n))
            .cloned()
            .collect();

        let mut norm_sq = 0.0f64;
        for name in &names {
            if let Some(grad) = reg.get(name).expect("name from registry").grad() {
                norm_sq += grad.iter().map(|&g| g as f64 * g as f64).sum::<f64>();
            }
        }
        let norm = norm_sq.sqrt();
        let scale = if self.clip_norm > 0.0 && norm > self.clip_norm as f64 {
            (self.clip_norm as f64 / norm) as f32
        } else {
            1.0
        };

        for name in names {
            let tensor = reg.get_mut(&name).expect("name from registry");
            let Some(grad) = tensor.grad().map(|g| g.to_vec()) else {
                continue;
            };
            let velocity = self
                .velocity
                .entry(name)
                .or_insert_with(|| vec![0.0; grad.len()]);
            for ((p, v), g) in tensor.data_mut().iter_mut().zip(velocity.iter_mut()).zip(&grad)
            {
                *v = self.momentum * *v + scale * g;
                *p -= self.lr * *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use facevc_nn::Tensor;

    #[test]
    fn quadratic_descent_converges() {
        let mut reg = ParameterRegistry::new();
        reg.register("x", Tensor::new(vec![1], vec![4.0]).unwrap())
            .unwrap();
        let mut opt = Sgd::new(0.1, 0.9, 0.0);
        for _ in 0..200 {
            let x = reg.get("x").unwrap().data()[0];
            reg.zero_grads();
            reg.get_mut("x").unwrap().accumulate_grad(&[2.0 * x]).unwrap();
            opt.step(&mut reg, |_| true);
        }
        assert!(reg.get("x").unwrap().data()[0].abs() < 1e-3);
    }

    #[test]
    fn filter_limits_updates() {
        let mut reg = ParameterRegistry::new();
        reg.register("a", Tensor::new(vec![1], vec![1.0]).unwrap())
            .unwrap();
        reg.register("b", Tensor::new(vec![1], vec![1.0]).unwrap())
            .unwrap();
        reg.get_mut("a").unwrap().accumulate_grad(&[1.0]).unwrap();
        reg.get_mut("b").unwrap().accumulate_grad(&[1.0]).unwrap();
        let mut opt = Sgd::new(0.5, 0.0, 0.0);
        opt.step(&mut reg, |n| n == "a");
        assert_eq!(reg.get("a").unwrap().data()[0], 0.5);
        assert_eq!(reg.get("b").unwrap().data()[0], 1.0);
    }
}
