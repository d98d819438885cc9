//! Central finite-difference oracle for reverse-mode gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, Result};
use crate::graph::{Graph, ValueId};
use crate::registry::ParameterRegistry;

/// Above this many elements in one parameter, a seeded random subset of
/// element indices is checked instead of all of them.
const SAMPLE_THRESHOLD: usize = 10_000;

/// Compares the reverse-mode gradient of `f` against central finite
/// differences for every registered parameter element, returning the largest
/// relative error (denominator `max(|g|, 1e-6)`).
///
/// `f` must rebuild its forward pass from the registry on every call and
/// return a scalar node.
pub fn grad_check<F>(reg: &mut ParameterRegistry, eps: f64, f: F) -> Result<f64>
where
    F: FnMut(&mut Graph, &ParameterRegistry) -> Result<ValueId>,
{
    grad_check_filtered(reg, eps, |_| true, f)
}

/// [`grad_check`] restricted to parameters accepted by `filter`. Needed when
/// an objective contains stop-gradients by contract (straight-through
/// quantization, fitted-density targets): each parameter group is swept only
/// through the term where its true derivative and the tape agree.
pub fn grad_check_filtered<P, F>(
    reg: &mut ParameterRegistry,
    eps: f64,
    filter: P,
    mut f: F,
) -> Result<f64>
where
    P: Fn(&str) -> bool,
    F: FnMut(&mut Graph, &ParameterRegistry) -> Result<ValueId>,
{
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(NnError::Validation(format!(
            "grad_check eps {eps} outside [1e-5, 1e-2]"
        )));
    }

    let mut g = Graph::new();
    let root = f(&mut g, reg)?;
    let base = g.scalar_value(root)?;
    if !base.is_finite() {
        return Err(NnError::Numeric(format!("objective is non-finite: {base}")));
    }
    g.backward(root)?;
    let analytic = g.param_grads();
    drop(g);

    let names: Vec<String> = reg
        .names()
        .iter()
        .filter(|n| filter(n))
        .cloned()
        .collect();
    let mut max_rel = 0.0f64;
    let mut sample_rng = ChaCha8Rng::seed_from_u64(0x6f72_61c1_e5ee_d000);

    for name in &names {
        let numel = reg.get(name)?.numel();
        let indices: Vec<usize> = if numel > SAMPLE_THRESHOLD {
            let mut all: Vec<usize> = (0..numel).collect();
            all.shuffle(&mut sample_rng);
            all.truncate(SAMPLE_THRESHOLD);
            all
        } else {
            (0..numel).collect()
        };

        for &i in &indices {
            let original = reg.get(name)?.data()[i];

            reg.get_mut(name)?.data_mut()[i] = (original as f64 + eps) as f32;
            let mut gp = Graph::new();
            let rp = f(&mut gp, reg)?;
            let fp = gp.scalar_value(rp)?;
            drop(gp);

            reg.get_mut(name)?.data_mut()[i] = (original as f64 - eps) as f32;
            let mut gm = Graph::new();
            let rm = f(&mut gm, reg)?;
            let fm = gm.scalar_value(rm)?;
            drop(gm);

            reg.get_mut(name)?.data_mut()[i] = original;

            if !fp.is_finite() || !fm.is_finite() {
                return Err(NnError::Numeric(format!(
                    "objective non-finite while perturbing {name}[{i}]"
                )));
            }

            let fd = (fp - fm) / (2.0 * eps);
            let an = analytic.get(name).map(|v| v[i]).unwrap_or(0.0);
            let denom = an.abs().max(fd.abs()).max(1e-6);
            let rel = (an - fd).abs() / denom;
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::LinearLayer;
    use crate::ops;
    use crate::tensor::Tensor;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_objective_has_zero_error() {
        let mut reg = ParameterRegistry::new();
        reg.register("unused", Tensor::zeros(vec![3]).unwrap()).unwrap();
        let err = grad_check(&mut reg, 1e-3, |g, _| Ok(g.scalar(7.0))).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn linear_squared_loss_passes() {
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let layer = LinearLayer::new(&mut reg, &mut rng, "l", 4, 3).unwrap();
        let x = Tensor::uniform(vec![5, 4], -1.0, 1.0, &mut rng).unwrap();
        let target = Tensor::uniform(vec![5, 3], -1.0, 1.0, &mut rng).unwrap();
        let err = grad_check(&mut reg, 1e-3, |g, reg| {
            let xv = g.input(&x);
            let tv = g.input(&target);
            let y = layer.forward(g, reg, xv, true)?;
            ops::mse(g, y, tv)
        })
        .unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn softmax_cross_entropy_head_passes() {
        let mut reg = ParameterRegistry::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = LinearLayer::new(&mut reg, &mut rng, "head", 6, 4).unwrap();
        let x = Tensor::uniform(vec![8, 6], -1.0, 1.0, &mut rng).unwrap();
        let mut onehot = vec![0.0f32; 8 * 4];
        for n in 0..8 {
            onehot[n * 4 + n % 4] = 1.0;
        }
        let targets = Tensor::new(vec![8, 4], onehot).unwrap();
        let err = grad_check(&mut reg, 1e-3, |g, reg| {
            let xv = g.input(&x);
            let logits = layer.forward(g, reg, xv, true)?;
            ops::cross_entropy(g, logits, &targets)
        })
        .unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn eps_outside_window_rejected() {
        let mut reg = ParameterRegistry::new();
        assert!(grad_check(&mut reg, 1e-1, |g, _| Ok(g.scalar(0.0))).is_err());
        assert!(grad_check(&mut reg, 1e-6, |g, _| Ok(g.scalar(0.0))).is_err());
    }

    #[test]
    fn non_finite_objective_is_a_numeric_error() {
        let mut reg = ParameterRegistry::new();
        reg.register("w", Tensor::zeros(vec![1]).unwrap()).unwrap();
        let res = grad_check(&mut reg, 1e-3, |g, _| Ok(g.scalar(f64::NAN)));
        assert!(matches!(res, Err(NnError::Numeric(_))));
    }
}
