use std::collections::BTreeMap;

use crate::error::{NnError, Result};
use crate::tensor::ParameterStore;

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates keyed by parameter name.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            ..Default::default()
        }
    }
}

/// One bias-corrected Adam update over every parameter in `store`.
///
/// All gradients must be present; on error nothing is modified. Gradients are
/// cleared after the update.
pub fn adam_step(store: &mut ParameterStore, state: &mut AdamState) -> Result<()> {
    if let Some((name, _)) = store.iter().find(|(_, t)| t.grad.is_none()) {
        return Err(NnError::MissingGradient(name.clone()));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (name, tensor) in store.iter_mut() {
        let grad = tensor.grad.take().expect("checked above");
        let n = grad.len();
        let m = state
            .first
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; n]);
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| vec![0.0; n]);
        for i in 0..n {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            tensor.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_store(w: f64) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::new(vec![1], vec![w]));
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = scalar_store(1.5);
        s.get_mut("w").unwrap().grad = Some(vec![0.0]);
        adam_step(&mut s, &mut AdamState::new(AdamConfig::default())).unwrap();
        assert_eq!(s.get("w").unwrap().values, vec![1.5]);
        assert!(s.get("w").unwrap().grad.is_none());
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..Default::default()
        };
        for g in [3.0, -0.2] {
            let mut s = scalar_store(0.0);
            s.get_mut("w").unwrap().grad = Some(vec![g]);
            adam_step(&mut s, &mut AdamState::new(cfg)).unwrap();
            let w = s.get("w").unwrap().values[0];
            assert!((w + 0.01 * f64::signum(g)).abs() < 1e-6, "g={g} w={w}");
        }
    }

    #[test]
    fn missing_gradient_names_parameter() {
        let mut s = scalar_store(0.0);
        s.insert("b", Tensor::zeros(vec![2]));
        s.get_mut("w").unwrap().grad = Some(vec![1.0]);
        let err = adam_step(&mut s, &mut AdamState::default()).unwrap_err();
        assert!(matches!(err, NnError::MissingGradient(ref n) if n == "b"));
        // untouched on error
        assert_eq!(s.get("w").unwrap().values, vec![0.0]);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut s = scalar_store(2.0);
        let mut st = AdamState::new(AdamConfig {
            lr: 0.0,
            ..Default::default()
        });
        for _ in 0..5 {
            s.get_mut("w").unwrap().grad = Some(vec![0.7]);
            adam_step(&mut s, &mut st).unwrap();
        }
        assert_eq!(s.get("w").unwrap().values, vec![2.0]);
    }

    /// Reference Adam on f(w) = w², written out independently.
    fn reference_bowl(w0: f64, lr: f64, steps: usize) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w -= lr * (m / (1.0 - b1.powi(t as i32))) / ((v / (1.0 - b2.powi(t as i32))).sqrt() + eps);
        }
        w
    }

    #[test]
    fn quadratic_bowl_converges() {
        let reference = reference_bowl(1.0, 0.05, 500);
        assert!(reference.abs() < 1e-2);

        let mut s = scalar_store(1.0);
        let mut st = AdamState::new(AdamConfig {
            lr: 0.05,
            ..Default::default()
        });
        for _ in 0..500 {
            let w = s.get("w").unwrap().values[0];
            s.get_mut("w").unwrap().grad = Some(vec![2.0 * w]);
            adam_step(&mut s, &mut st).unwrap();
        }
        let w = s.get("w").unwrap().values[0];
        assert!(w.abs() < 1e-2);
        assert!((w - reference).abs() < 1e-12);
    }
}
