use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn default_lr() -> f64 {
    1e-4
}
fn default_rho() -> f64 {
    0.9
}
fn default_eps() -> f64 {
    1e-8
}

/// RMSprop hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmsProp {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        Self { learning_rate: default_lr(), rho: default_rho(), epsilon: default_eps() }
    }
}

impl RmsProp {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::param("learning_rate", "must be > 0"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param("rho", "must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::param("epsilon", "must be > 0"));
        }
        Ok(())
    }
}

/// Running mean of squared gradients, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState<T> {
    pub mean_square: Vec<Vec<T>>,
}

impl<T: Real> RmsPropState<T> {
    pub fn zeros_like(params: &[Vec<T>]) -> Self {
        Self { mean_square: params.iter().map(|p| vec![T::zero(); p.len()]).collect() }
    }
}

/// `s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(s)+eps)`, elementwise.
pub fn rmsprop_step<T: Real>(params: &mut [Vec<T>], grads: &[Vec<T>], state: &mut RmsPropState<T>, opt: &RmsProp) {
    let (lr, rho, eps) = (T::of(opt.learning_rate), T::of(opt.rho), T::of(opt.epsilon));
    let keep = T::one() - rho;
    for ((p, g), s) in params.iter_mut().zip(grads).zip(state.mean_square.iter_mut()) {
        debug_assert_eq!(p.len(), g.len());
        for ((pv, &gv), sv) in p.iter_mut().zip(g).zip(s.iter_mut()) {
            *sv = rho * *sv + keep * gv * gv;
            *pv -= lr * gv / (sv.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = vec![vec![0.5f64, -1.0], vec![2.0]];
        let before = params.clone();
        let grads = vec![vec![0.0; 2], vec![0.0]];
        let mut state = RmsPropState::zeros_like(&params);
        rmsprop_step(&mut params, &grads, &mut state, &RmsProp::default());
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_by_hand() {
        let opt = RmsProp { learning_rate: 0.1, rho: 0.9, epsilon: 1e-8 };
        let mut params = vec![vec![1.0f64; 3]];
        let mut state = RmsPropState::zeros_like(&params);
        rmsprop_step(&mut params, &[vec![1.0; 3]], &mut state, &opt);
        // s = 0.9*0 + 0.1*1 = 0.1, delta = -0.1 * 1 / (sqrt(0.1) + 1e-8)
        let delta = -0.1 / (0.1f64.sqrt() + 1e-8);
        for (&p, &s) in params[0].iter().zip(&state.mean_square[0]) {
            assert!((s - 0.1).abs() < 1e-15);
            assert!((p - (1.0 + delta)).abs() < 1e-12);
        }
    }

    #[test]
    fn tensors_update_independently() {
        let opt = RmsProp { learning_rate: 0.01, ..RmsProp::default() };
        let mut both = vec![vec![1.0f64, 2.0], vec![3.0]];
        let mut st = RmsPropState::zeros_like(&both);
        rmsprop_step(&mut both, &[vec![0.5, -2.0], vec![0.0]], &mut st, &opt);
        let mut alone = vec![vec![1.0f64, 2.0]];
        let mut st1 = RmsPropState::zeros_like(&alone);
        rmsprop_step(&mut alone, &[vec![0.5, -2.0]], &mut st1, &opt);
        assert_eq!(both[0], alone[0]);
        assert_eq!(both[1], vec![3.0]);
    }

    #[test]
    fn validation() {
        assert!(RmsProp { rho: 1.0, ..RmsProp::default() }.validate().is_err());
        assert!(RmsProp { learning_rate: 0.0, ..RmsProp::default() }.validate().is_err());
        assert!(RmsProp { epsilon: -1.0, ..RmsProp::default() }.validate().is_err());
    }
}
