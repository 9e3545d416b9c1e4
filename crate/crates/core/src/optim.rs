//! SGD and Adam over a flat parameter vector.

use serde::{Deserialize, Serialize};

use crate::error::{LireError, Result};
use crate::policy::{ParamTensor, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// When set, the rate follows a half-cosine from `learning_rate` to 0 over this many steps.
    pub cosine_steps: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            cosine_steps: None,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig {
            learning_rate,
            ..Default::default()
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(LireError::Config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(LireError::Config("Adam constants out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    config: OptimizerConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: usize,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, n_params: usize) -> Result<Self> {
        config.validate()?;
        let moments = if config.kind == OptimizerKind::Adam { n_params } else { 0 };
        Ok(OptimizerState {
            config,
            first_moment: vec![0.0; moments],
            second_moment: vec![0.0; moments],
            step: 0,
        })
    }

    pub fn for_policy(config: OptimizerConfig, policy: &Policy) -> Result<Self> {
        OptimizerState::new(config, policy.params().len())
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn current_learning_rate(&self) -> f64 {
        match self.config.cosine_steps {
            Some(total) if total > 0 => {
                let frac = (self.step.min(total) as f64) / total as f64;
                self.config.learning_rate * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
            _ => self.config.learning_rate,
        }
    }

    /// One descent step on `params` given `grad`.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(LireError::Shape(format!(
                "gradient has {} entries, parameters have {}",
                grad.len(),
                params.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(LireError::NonFinite(format!(
                "gradient entry {i} is {} at optimizer step {}; training aborted",
                grad[i], self.step
            )));
        }
        let lr = self.current_learning_rate();
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.len() != params.len() {
                    return Err(LireError::Shape("Adam moments do not match parameters".into()));
                }
                let (b1, b2) = (self.config.beta1, self.config.beta2);
                let t = (self.step + 1) as i32;
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.first_moment[i] = b1 * self.first_moment[i] + (1.0 - b1) * g;
                    self.second_moment[i] = b2 * self.second_moment[i] + (1.0 - b2) * g * g;
                    let m_hat = self.first_moment[i] / c1;
                    let v_hat = self.second_moment[i] / c2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + self.config.eps);
                }
            }
        }
        self.step += 1;
        Ok(())
    }
}

/// Applies one optimizer step to the policy logits.
pub fn apply_update(policy: &mut Policy, grad: &ParamTensor, opt: &mut OptimizerState) -> Result<()> {
    if !policy.params().same_shape(grad) {
        return Err(LireError::Shape("gradient shape differs from policy parameters".into()));
    }
    opt.apply(policy.params_mut().as_mut_slice(), grad.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Vocab;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_policy() -> Policy {
        Policy::random(Vocab::new(3, 3).unwrap(), 2, 1.0, &mut ChaCha8Rng::seed_from_u64(4))
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        for cfg in [OptimizerConfig::sgd(0.1), OptimizerConfig::adam(0.1)] {
            let mut p = random_policy();
            let before = p.clone();
            let mut opt = OptimizerState::for_policy(cfg, &p).unwrap();
            let zero = ParamTensor::zeros(2, 3);
            apply_update(&mut p, &zero, &mut opt).unwrap();
            let diff = before
                .params()
                .as_slice()
                .iter()
                .zip(p.params().as_slice())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff <= 1e-15);
        }
    }

    #[test]
    fn sgd_step_is_lr_times_grad() {
        let mut p = random_policy();
        let before = p.clone();
        let mut g = ParamTensor::zeros(2, 3);
        for (i, x) in g.as_mut_slice().iter_mut().enumerate() {
            *x = i as f64 * 0.25 - 1.0;
        }
        let mut opt = OptimizerState::for_policy(OptimizerConfig::sgd(0.1), &p).unwrap();
        apply_update(&mut p, &g, &mut opt).unwrap();
        for ((a, b), gi) in before.params().as_slice().iter().zip(p.params().as_slice()).zip(g.as_slice()) {
            assert_eq!(*b, a - 0.1 * gi);
        }
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(x) = (x - 3)^2; lr decays with a cosine so the final iterate settles.
        let cfg = OptimizerConfig {
            cosine_steps: Some(1000),
            ..OptimizerConfig::adam(0.1)
        };
        let mut opt = OptimizerState::new(cfg, 1).unwrap();
        let mut x = [0.0];
        for _ in 0..1000 {
            let g = [2.0 * (x[0] - 3.0)];
            opt.apply(&mut x, &g).unwrap();
        }
        assert!((x[0] - 3.0).abs() < 1e-4, "{}", x[0]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut opt = OptimizerState::new(OptimizerConfig::sgd(0.1), 2).unwrap();
        let mut x = [0.0, 0.0];
        let err = opt.apply(&mut x, &[1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, LireError::NonFinite(_)));
        assert_eq!(x, [0.0, 0.0]);
    }

    #[test]
    fn cosine_schedule_ends_at_zero() {
        let cfg = OptimizerConfig {
            cosine_steps: Some(10),
            ..OptimizerConfig::sgd(1.0)
        };
        let mut opt = OptimizerState::new(cfg, 1).unwrap();
        assert_eq!(opt.current_learning_rate(), 1.0);
        let mut x = [0.0];
        for _ in 0..10 {
            opt.apply(&mut x, &[0.0]).unwrap();
        }
        assert!(opt.current_learning_rate().abs() < 1e-15);
    }
}
