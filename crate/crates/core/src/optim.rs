//! SGD with momentum, L2 weight decay and polynomial learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub power: f64,
    pub max_iter: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            base_lr: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            power: 0.9,
            max_iter: 2000,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0) {
            return Err(Error::Config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if !(self.power > 0.0) {
            return Err(Error::Config("power must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// base_lr * (1 - iter / max_iter)^power, zero from max_iter on.
    pub fn lr(&self, iter: usize) -> f64 {
        if iter >= self.max_iter {
            return 0.0;
        }
        self.base_lr * (1.0 - iter as f64 / self.max_iter as f64).powf(self.power)
    }
}

#[derive(Clone, Debug)]
pub struct SgdState<S> {
    pub config: SgdConfig,
    pub iter: usize,
    velocity: Vec<Vec<S>>,
    lr_mult: Vec<f64>,
}

impl<S: Scalar> SgdState<S> {
    pub fn new(config: SgdConfig) -> Result<Self> {
        config.validate()?;
        Ok(SgdState {
            config,
            iter: 0,
            velocity: Vec::new(),
            lr_mult: Vec::new(),
        })
    }

    /// Scales the learning rate of one parameter (weight decay included).
    pub fn set_lr_mult(&mut self, id: ParamId, mult: f64) {
        if self.lr_mult.len() <= id.index() {
            self.lr_mult.resize(id.index() + 1, 1.0);
        }
        self.lr_mult[id.index()] = mult;
    }

    pub fn lr(&self) -> f64 {
        self.config.lr(self.iter)
    }

    /// v <- momentum v - lr (grad + weight_decay p); p <- p + v; iter += 1.
    pub fn step(&mut self, params: &mut ParamStore<S>) -> Result<()> {
        if self.iter >= self.config.max_iter {
            return Err(Error::Contract(format!(
                "sgd_step past max_iter ({})",
                self.config.max_iter
            )));
        }
        let base_lr = self.lr();
        let mom = S::lit(self.config.momentum);
        let wd = S::lit(self.config.weight_decay);
        while self.velocity.len() < params.len() {
            let id = params.ids().nth(self.velocity.len()).unwrap();
            self.velocity.push(vec![S::zero(); params.get(id).data().len()]);
        }
        for id in params.ids() {
            if params.get(id).grad().is_none() {
                return Err(Error::Contract(format!(
                    "parameter {} has no gradient",
                    params.name(id)
                )));
            }
        }
        for id in params.ids() {
            let lr = S::lit(base_lr * self.lr_mult.get(id.index()).copied().unwrap_or(1.0));
            let v = &mut self.velocity[id.index()];
            let (data, grad) = params.get_mut(id).data_and_grad_mut();
            let grad = grad.expect("checked above");
            for ((p, g), v) in data.iter_mut().zip(grad.iter()).zip(v.iter_mut()) {
                *v = mom * *v - lr * (*g + wd * *p);
                *p = *p + *v;
            }
        }
        self.iter += 1;
        Ok(())
    }
}
