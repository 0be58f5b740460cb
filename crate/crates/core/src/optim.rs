use std::collections::BTreeMap;

use colsod_autograd::Tensor;

use crate::error::{config, Result};
use crate::params::ParamStore;

/// Stochastic gradient descent with heavy-ball momentum and L2 weight decay:
/// `d = g + wd·p`, `v = m·v + d`, `p -= lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: BTreeMap<String, Tensor>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) || !(0.0..1.0).contains(&momentum) || weight_decay < 0.0 {
            return Err(config(format!(
                "bad SGD settings lr={lr} momentum={momentum} weight_decay={weight_decay}"
            )));
        }
        Ok(Self {
            lr,
            momentum,
            weight_decay,
            velocity: BTreeMap::new(),
        })
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, g) in grads {
            let p = store.param_mut(name)?;
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape()));
            for ((pv, gv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
                let d = gv + self.weight_decay * *pv;
                *vv = self.momentum * *vv + d;
                *pv -= self.lr * *vv;
            }
        }
        Ok(())
    }
}
