//! TOML experiment configuration. Every field has a default, so an empty file
//! is a valid configuration.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LireError, Result};
use crate::kl::KlEstimator;
use crate::math::derive_seed;
use crate::objectives::ObjectiveConfig;
use crate::optim::OptimizerConfig;
use crate::policy::{Policy, Token, Vocab};
use crate::rewards::{Predicate, RewardModel};
use crate::training::{Method, RewardProbe, TrainPlan, DEFAULT_BATCH_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global seed for data generation, training and evaluation sampling.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub vocab: VocabSpec,
    pub policy: PolicySpec,
    pub data: DataSpec,
    /// Reward model used for training and as the first evaluator.
    pub rm: RewardSpec,
    /// Second evaluator.
    pub rm_star: RewardSpec,
    pub train: TrainSpec,
    pub compare: CompareSpec,
    pub eval: EvalSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            vocab: VocabSpec::default(),
            policy: PolicySpec::default(),
            data: DataSpec::default(),
            rm: RewardSpec::ExpertLikelihood {
                seed: 7,
                scale: 2.0,
                perturb_seed: 0,
                perturb_scale: 0.0,
            },
            rm_star: RewardSpec::ExpertLikelihood {
                seed: 7,
                scale: 2.0,
                perturb_seed: 11,
                perturb_scale: 0.5,
            },
            train: TrainSpec::default(),
            compare: CompareSpec::default(),
            eval: EvalSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSpec {
    /// Token count including EOS, which is the last id.
    pub size: usize,
    /// Maximum content tokens per response.
    pub max_len: usize,
}

impl Default for VocabSpec {
    fn default() -> Self {
        VocabSpec { size: 4, max_len: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySpec {
    pub query_classes: usize,
    pub init_seed: u64,
    /// Initial logits are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec {
            query_classes: 2,
            init_seed: 1,
            init_scale: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub queries: usize,
    /// Put a human-chosen and a human-rejected anchor in every pool.
    pub anchors: bool,
    /// Draws per anchor: chosen is the best of this many expert samples,
    /// rejected the worst of this many uniform samples.
    pub anchor_samples: usize,
    pub expert_seed: u64,
    pub expert_scale: f64,
    pub sample_temperature: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            queries: 200,
            anchors: true,
            anchor_samples: 8,
            expert_seed: 7,
            expert_scale: 2.0,
            sample_temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RewardSpec {
    PatternCount {
        targets: Vec<Vec<Token>>,
        #[serde(default)]
        length_penalty: f64,
    },
    /// Log-likelihood under a random expert, optionally with extra uniform
    /// noise of half-width `perturb_scale` added to its logits.
    ExpertLikelihood {
        seed: u64,
        scale: f64,
        #[serde(default)]
        perturb_seed: u64,
        #[serde(default)]
        perturb_scale: f64,
    },
    Predicate { predicate: String },
}

/// Random logits uniform in `[-scale, scale]` from `seed`.
pub fn random_policy(vocab: Vocab, query_classes: usize, scale: f64, seed: u64) -> Policy {
    Policy::random(vocab, query_classes, scale, &mut ChaCha8Rng::seed_from_u64(seed))
}

impl RewardSpec {
    pub fn build(&self, vocab: Vocab, query_classes: usize) -> Result<RewardModel> {
        match self {
            RewardSpec::PatternCount {
                targets,
                length_penalty,
            } => RewardModel::pattern_count(vocab, targets.clone(), *length_penalty),
            RewardSpec::ExpertLikelihood {
                seed,
                scale,
                perturb_seed,
                perturb_scale,
            } => {
                check_scale("expert scale", *scale)?;
                check_scale("perturb_scale", *perturb_scale)?;
                let mut expert = random_policy(vocab, query_classes, *scale, *seed);
                if *perturb_scale > 0.0 {
                    let noise = random_policy(vocab, query_classes, *perturb_scale, *perturb_seed);
                    expert.params_mut().axpy(1.0, noise.params());
                }
                Ok(RewardModel::expert_likelihood(expert))
            }
            RewardSpec::Predicate { predicate } => {
                let p: Predicate = predicate.parse()?;
                if let Predicate::EvenCount(t) | Predicate::Contains(t) = p {
                    if t >= vocab.size {
                        return Err(LireError::Config(format!("predicate token {t} is out of range")));
                    }
                }
                Ok(RewardModel::predicate(vocab, p))
            }
        }
    }
}

fn check_scale(name: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(LireError::Config(format!("{name} must be finite and non-negative, got {x}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Lire,
    Pg,
    Dpo,
    Sft,
    BestOfN,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Lire => "lire",
            MethodName::Pg => "pg",
            MethodName::Dpo => "dpo",
            MethodName::Sft => "sft",
            MethodName::BestOfN => "best_of_n",
        }
    }

    /// Training method; `None` for best-of-n, which does not train. DPO uses
    /// `reference` as its frozen reference policy.
    pub fn training_method(self, reference: &Policy) -> Option<Method> {
        match self {
            MethodName::Lire => Some(Method::Lire),
            MethodName::Pg => Some(Method::Pg),
            MethodName::Dpo => Some(Method::Dpo {
                reference: reference.clone(),
            }),
            MethodName::Sft => Some(Method::Sft),
            MethodName::BestOfN => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub method: MethodName,
    /// Candidates per pool, M.
    pub pool_size: usize,
    /// Evolve steps, E.
    pub evolve_steps: usize,
    /// Iterate steps per evolve step, I.
    pub iterate_steps: usize,
    /// Pools per optimizer step; 0 is full batch.
    pub batch_size: usize,
    pub sample_temperature: f64,
    pub probe: RewardProbe,
    /// Write a policy checkpoint after every (evolve, iterate) cell.
    pub checkpoints: bool,
    /// Defaults: temperature 1, sft_weight 0, dpo_beta 0.1.
    pub objective: ObjectiveConfig,
    /// Defaults: SGD, learning_rate 0.05.
    pub optimizer: OptimizerConfig,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            method: MethodName::Lire,
            pool_size: 2,
            evolve_steps: 1,
            iterate_steps: 3,
            batch_size: DEFAULT_BATCH_SIZE,
            sample_temperature: 1.0,
            probe: RewardProbe::Exact,
            checkpoints: false,
            objective: ObjectiveConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSpec {
    pub methods: Vec<MethodName>,
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec {
            methods: vec![MethodName::Lire, MethodName::Sft],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub frontier_temperatures: Vec<f64>,
    pub sweep_temperatures: Vec<f64>,
    pub best_of_n: usize,
    /// Monte Carlo draws per query for KL; 0 is exact enumeration.
    pub kl_samples: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            frontier_temperatures: vec![0.5, 0.75, 1.0, 1.25, 1.5],
            sweep_temperatures: vec![1.0, 2.0, 5.0, 10.0, 20.0],
            best_of_n: 4,
            kl_samples: 0,
        }
    }
}

pub(crate) const DATA_STREAM: u64 = 1;
pub(crate) const TRAIN_STREAM: u64 = 2;
pub(crate) const EVAL_STREAM: u64 = 3;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LireError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_file(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            LireError::Config(m) => LireError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LireError::Config(e.to_string()))
    }

    pub fn vocab(&self) -> Result<Vocab> {
        Vocab::new(self.vocab.size, self.vocab.max_len)
    }

    pub fn validate(&self) -> Result<()> {
        let vocab = self.vocab()?;
        if self.policy.query_classes == 0 {
            return Err(LireError::Config("policy.query_classes must be positive".into()));
        }
        check_scale("policy.init_scale", self.policy.init_scale)?;
        check_scale("data.expert_scale", self.data.expert_scale)?;
        if self.data.anchors && self.train.pool_size < 2 {
            return Err(LireError::Config(format!(
                "train.pool_size {} leaves no room for the two anchors",
                self.train.pool_size
            )));
        }
        if self.data.anchors && self.data.anchor_samples == 0 {
            return Err(LireError::Config("data.anchor_samples must be positive".into()));
        }
        if !(self.data.sample_temperature > 0.0) {
            return Err(LireError::Config("data.sample_temperature must be positive".into()));
        }
        for t in self.eval.frontier_temperatures.iter().chain(&self.eval.sweep_temperatures) {
            if !(*t > 0.0) || !t.is_finite() {
                return Err(LireError::Config(format!("eval temperature {t} must be positive")));
            }
        }
        if self.eval.best_of_n == 0 {
            return Err(LireError::Config("eval.best_of_n must be at least 1".into()));
        }
        self.rm.build(vocab, self.policy.query_classes)?;
        self.rm_star.build(vocab, self.policy.query_classes)?;
        self.train_plan().validate()
    }

    pub fn initial_policy(&self) -> Result<Policy> {
        Ok(random_policy(self.vocab()?, self.policy.query_classes, self.policy.init_scale, self.policy.init_seed))
    }

    pub fn expert_policy(&self) -> Result<Policy> {
        Ok(random_policy(self.vocab()?, self.policy.query_classes, self.data.expert_scale, self.data.expert_seed))
    }

    pub fn reward_models(&self) -> Result<(RewardModel, RewardModel)> {
        let vocab = self.vocab()?;
        Ok((
            self.rm.build(vocab, self.policy.query_classes)?,
            self.rm_star.build(vocab, self.policy.query_classes)?,
        ))
    }

    pub fn train_plan(&self) -> TrainPlan {
        TrainPlan {
            evolve_steps: self.train.evolve_steps,
            iterate_steps: self.train.iterate_steps,
            pool_size: self.train.pool_size,
            objective: self.train.objective,
            batch_size: self.train.batch_size,
            optimizer: self.train.optimizer,
            sample_temperature: self.train.sample_temperature,
            seed: derive_seed(self.seed, TRAIN_STREAM),
            probe: self.train.probe,
        }
    }

    pub fn kl_estimator(&self) -> KlEstimator {
        match self.eval.kl_samples {
            0 => KlEstimator::Exact,
            n => KlEstimator::MonteCarlo {
                n_samples: n,
                seed: derive_seed(self.seed, EVAL_STREAM),
            },
        }
    }
}
