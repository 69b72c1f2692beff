//! Adam with bias correction over a parameter store.

use super::tensor::ParamStore;

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, aligned with the store by index.
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> AdamState {
        let m = store
            .ids()
            .map(|id| {
                if store.is_learnable(id) {
                    vec![0.0; store.get(id).len()]
                } else {
                    Vec::new()
                }
            })
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState { m, v, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update over every learnable tensor; gradients are cleared
/// afterwards.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, hyper: &AdamHyper) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for id in store.ids().collect::<Vec<_>>() {
        if !store.is_learnable(id) {
            continue;
        }
        let m = &mut state.m[id.0];
        let v = &mut state.v[id.0];
        let tensor = store.get_mut(id);
        let len = tensor.len();
        // Split borrows: gradients are read while values are written.
        let grad: Vec<f64> = tensor.grad().expect("learnable tensors carry grads").to_vec();
        let values = tensor.values_mut();
        for k in 0..len {
            let g = grad[k];
            m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g;
            v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g * g;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            values[k] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    store.clear_grads();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Tensor;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut store = ParamStore::new();
        let p = store.add("p", Tensor::from_values(&[2], vec![1.5, -0.5]));
        let mut state = AdamState::new(&store);
        adam_step(&mut store, &mut state, &AdamHyper::default());
        assert_eq!(store.get(p).values(), &[1.5, -0.5]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        let p = store.add("p", Tensor::from_values(&[1], vec![0.0]));
        store.get_mut(p).grad_mut().unwrap()[0] = 1.0;
        let mut state = AdamState::new(&store);
        let hyper = AdamHyper::default();
        adam_step(&mut store, &mut state, &hyper);
        // m_hat = v_hat = 1 after bias correction, so the step is lr/(1+eps).
        let expected = -hyper.lr / (1.0 + hyper.eps);
        assert!((store.get(p).values()[0] - expected).abs() < 1e-12);
        // Gradients cleared.
        assert_eq!(store.get(p).grad().unwrap()[0], 0.0);
    }

    #[test]
    fn identical_streams_stay_identical() {
        let build = || {
            let mut store = ParamStore::new();
            let p = store.add("p", Tensor::from_values(&[2], vec![0.3, 0.7]));
            (store, p)
        };
        let (mut s1, p1) = build();
        let (mut s2, p2) = build();
        let mut a1 = AdamState::new(&s1);
        let mut a2 = AdamState::new(&s2);
        for step in 0..10 {
            let g = [0.1 * step as f64, -0.2];
            s1.get_mut(p1).grad_mut().unwrap().copy_from_slice(&g);
            s2.get_mut(p2).grad_mut().unwrap().copy_from_slice(&g);
            adam_step(&mut s1, &mut a1, &AdamHyper::default());
            adam_step(&mut s2, &mut a2, &AdamHyper::default());
            assert_eq!(s1.get(p1).values(), s2.get(p2).values());
        }
    }

    #[test]
    fn frozen_tensors_are_skipped() {
        let mut store = ParamStore::new();
        let p = store.add_frozen("ext", Tensor::from_values(&[1], vec![2.0]));
        let mut state = AdamState::new(&store);
        adam_step(&mut store, &mut state, &AdamHyper::default());
        assert_eq!(store.get(p).values(), &[2.0]);
    }
}
