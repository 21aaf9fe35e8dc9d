use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::{Float, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    /// Adam with Nesterov momentum on the first moment.
    Nadam { beta1: f64, beta2: f64, eps: f64 },
    /// `v ← μ·v + g`, `w ← w − lr·v`.
    Sgd { momentum: f64 },
}

impl OptimizerKind {
    pub fn nadam() -> Self {
        OptimizerKind::Nadam {
            beta1: 0.5,
            beta2: 0.99,
            eps: 1e-8,
        }
    }

    pub fn sgd() -> Self {
        OptimizerKind::Sgd { momentum: 0.9 }
    }

    /// Names of the per-parameter slots, in storage order.
    pub fn slot_names(&self) -> &'static [&'static str] {
        match self {
            OptimizerKind::Nadam { .. } => &["m", "v"],
            OptimizerKind::Sgd { .. } => &["velocity"],
        }
    }
}

/// Hyperparameters, step counter and per-parameter slots keyed by
/// parameter name.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T: Float> {
    pub kind: OptimizerKind,
    pub step: u64,
    pub slots: IndexMap<String, Vec<Tensor<T>>>,
}

impl<T: Float> OptimizerState<T> {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerState {
            kind,
            step: 0,
            slots: IndexMap::new(),
        }
    }

    /// Updates every trainable parameter of `store`. A missing gradient
    /// counts as zero. Nothing is modified when any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &HashMap<String, Tensor<T>>, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
        }
        for (name, p) in store.iter() {
            if let Some(g) = grads.get(name) {
                if g.shape() != p.value.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "optimizer step",
                        lhs: p.value.shape(),
                        rhs: g.shape(),
                    });
                }
                if !g.is_finite() {
                    return Err(Error::NonFinite(format!("gradient of {name}")));
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let n_slots = self.kind.slot_names().len();
        for (name, p) in store.iter_mut() {
            if !p.trainable {
                continue;
            }
            let shape = p.value.shape();
            let slots = self
                .slots
                .entry(name.to_string())
                .or_insert_with(|| (0..n_slots).map(|_| Tensor::zeros(shape)).collect());
            let g = grads.get(name);
            let grad = |i: usize| g.map_or(0.0, |g| g.data()[i].f64());
            match self.kind {
                OptimizerKind::Nadam { beta1, beta2, eps } => {
                    let (c1_next, c1, c2) = (1.0 - beta1.powi(t + 1), 1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                    let (ms, vs) = slots.split_at_mut(1);
                    let (m, v) = (ms[0].data_mut(), vs[0].data_mut());
                    for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                        let gi = grad(i);
                        let mi = beta1 * m[i].f64() + (1.0 - beta1) * gi;
                        let vi = beta2 * v[i].f64() + (1.0 - beta2) * gi * gi;
                        m[i] = T::lit(mi);
                        v[i] = T::lit(vi);
                        let m_hat = beta1 * mi / c1_next + (1.0 - beta1) * gi / c1;
                        let v_hat = vi / c2;
                        *w = T::lit(w.f64() - lr * m_hat / (v_hat.sqrt() + eps));
                    }
                }
                OptimizerKind::Sgd { momentum } => {
                    let vel = slots[0].data_mut();
                    for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                        let vi = momentum * vel[i].f64() + grad(i);
                        vel[i] = T::lit(vi);
                        *w = T::lit(w.f64() - lr * vi);
                    }
                }
            }
        }
        Ok(())
    }
}

fn expect_kind<T: Float>(state: &OptimizerState<T>, nadam: bool) -> Result<()> {
    match (state.kind, nadam) {
        (OptimizerKind::Nadam { .. }, true) | (OptimizerKind::Sgd { .. }, false) => Ok(()),
        _ => Err(Error::InvalidArgument(format!("optimizer state holds {:?}", state.kind))),
    }
}

pub fn nadam_step<T: Float>(
    store: &mut ParamStore<T>,
    grads: &HashMap<String, Tensor<T>>,
    state: &mut OptimizerState<T>,
    lr: f64,
) -> Result<()> {
    expect_kind(state, true)?;
    state.step(store, grads, lr)
}

pub fn sgd_momentum_step<T: Float>(
    store: &mut ParamStore<T>,
    grads: &HashMap<String, Tensor<T>>,
    state: &mut OptimizerState<T>,
    lr: f64,
) -> Result<()> {
    expect_kind(state, false)?;
    state.step(store, grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[(&str, f64)]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        for (n, v) in values {
            s.insert(*n, Tensor::scalar(*v), true).unwrap();
        }
        s
    }

    fn grads(values: &[(&str, f64)]) -> HashMap<String, Tensor<f64>> {
        values.iter().map(|(n, v)| (n.to_string(), Tensor::scalar(*v))).collect()
    }

    /// Scalar recurrence written out term by term.
    fn nadam_oracle(w0: f64, gs: &[f64], lr: f64) -> f64 {
        let (b1, b2, eps) = (0.5f64, 0.99f64, 1e-8);
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        for (k, &g) in gs.iter().enumerate() {
            let t = (k + 1) as f64;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = b1 * m / (1.0 - b1.powf(t + 1.0)) + (1.0 - b1) * g / (1.0 - b1.powf(t));
            let v_hat = v / (1.0 - b2.powf(t));
            w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        w
    }

    #[test]
    fn nadam_first_step_matches_oracle() {
        let mut s = store(&[("w", 1.0)]);
        let mut st = OptimizerState::new(OptimizerKind::nadam());
        nadam_step(&mut s, &grads(&[("w", 1.0)]), &mut st, 0.1).unwrap();
        let w = s.value("w").unwrap().item();
        assert_eq!(w, nadam_oracle(1.0, &[1.0], 0.1));
        // m̂ = 0.25/0.75 + 0.5/0.5, v̂ = 1
        assert!((w - (1.0 - 0.1 * (4.0 / 3.0) / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn nadam_sequence_matches_oracle() {
        let gs = [1.0, -0.5, 0.25, 2.0, 0.0];
        let mut s = store(&[("w", 0.3)]);
        let mut st = OptimizerState::new(OptimizerKind::nadam());
        for g in gs {
            st.step(&mut s, &grads(&[("w", g)]), 0.05).unwrap();
        }
        assert!((s.value("w").unwrap().item() - nadam_oracle(0.3, &gs, 0.05)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_first_step_is_a_no_op() {
        let mut s = store(&[("w", 1.0)]);
        let mut st = OptimizerState::new(OptimizerKind::nadam());
        st.step(&mut s, &grads(&[("w", 0.0)]), 0.1).unwrap();
        assert_eq!(s.value("w").unwrap().item(), 1.0);
    }

    #[test]
    fn sgd_momentum_arithmetic() {
        let mut s = store(&[("w", 1.0)]);
        let mut st = OptimizerState::new(OptimizerKind::sgd());
        sgd_momentum_step(&mut s, &grads(&[("w", 0.1)]), &mut st, 0.1).unwrap();
        assert!((st.slots["w"][0].item() - 0.1).abs() < 1e-15);
        assert!((s.value("w").unwrap().item() - 0.99).abs() < 1e-15);
        sgd_momentum_step(&mut s, &grads(&[("w", 0.1)]), &mut st, 0.1).unwrap();
        assert!((st.slots["w"][0].item() - 0.19).abs() < 1e-15);
        assert!((s.value("w").unwrap().item() - 0.971).abs() < 1e-15);
        let mut s = store(&[("w", 1.0)]);
        let mut st = OptimizerState::new(OptimizerKind::sgd());
        st.step(&mut s, &grads(&[("w", 0.0)]), 0.1).unwrap();
        assert_eq!(s.value("w").unwrap().item(), 1.0);
    }

    #[test]
    fn identical_gradients_update_identically_in_any_order() {
        for kind in [OptimizerKind::nadam(), OptimizerKind::sgd()] {
            let mut a = store(&[("x", 0.5), ("y", 0.5)]);
            let mut b = store(&[("y", 0.5), ("x", 0.5)]);
            let (mut sa, mut sb) = (OptimizerState::new(kind), OptimizerState::new(kind));
            for g in [0.3, -0.2, 0.7] {
                let gr = grads(&[("x", g), ("y", g)]);
                sa.step(&mut a, &gr, 0.01).unwrap();
                sb.step(&mut b, &gr, 0.01).unwrap();
            }
            assert_eq!(a.value("x").unwrap(), a.value("y").unwrap());
            assert_eq!(a.value("x").unwrap(), b.value("x").unwrap());
        }
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut s = store(&[("enc.weight", 1.0), ("w", 2.0)]);
        let mut st = OptimizerState::new(OptimizerKind::nadam());
        let err = st.step(&mut s, &grads(&[("enc.weight", f64::NAN), ("w", 1.0)]), 0.1).unwrap_err();
        assert!(err.to_string().contains("enc.weight"));
        assert_eq!(s.value("w").unwrap().item(), 2.0);
        assert_eq!(st.step, 0);
    }

    fn descend(kind: OptimizerKind) -> Vec<f64> {
        let mut s = store(&[("w", 1.0)]);
        let mut st = OptimizerState::new(kind);
        let mut fs = vec![1.0];
        for _ in 0..50 {
            let w = s.value("w").unwrap().item();
            st.step(&mut s, &grads(&[("w", 2.0 * w)]), 0.05).unwrap();
            fs.push(s.value("w").unwrap().item().powi(2));
        }
        fs
    }

    #[test]
    fn nadam_descends_monotonically_on_a_parabola() {
        let fs = descend(OptimizerKind::nadam());
        assert!(fs.windows(2).all(|p| p[1] < p[0]), "{fs:?}");
    }

    #[test]
    fn sgd_momentum_converges_on_a_parabola() {
        // heavy ball with μ = 0.9 and lr·L = 0.1 is underdamped: the iterate
        // overshoots, so only the envelope decays (rate √0.9 per step)
        let fs = descend(OptimizerKind::sgd());
        assert!(fs[50] < 1e-2, "{fs:?}");
        assert!(fs[1] < fs[0]);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let mut s = store(&[("w", 1.0)]);
        let mut st = OptimizerState::new(OptimizerKind::sgd());
        assert!(nadam_step(&mut s, &grads(&[("w", 1.0)]), &mut st, 0.1).is_err());
    }
}
