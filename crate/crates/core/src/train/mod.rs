//! Joint training of the navigation agent and hint decoder: data
//! preparation, rollouts, the optimization loop and split evaluation.

mod data;
mod eval;
mod rollout;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hints::{HintParts, RenderOptions};
use crate::metrics::DEFAULT_SUCCESS_THRESHOLD;
use crate::model::ModelConfig;

pub use data::{build_vocab, prepare_episodes, start_heading, PreparedEpisode, WorldSet};
pub use eval::{
    evaluate_split, read_generated_hints, score_path, score_rollout, write_generated_hints, EvalOutput, GeneratedHint,
    GENERATED_HINT_SCHEMA_VERSION,
};
pub use rollout::{
    read_rollouts, rollout, teacher_action, teacher_probe, write_rollouts, RolloutMode, RolloutOptions, RolloutRecord,
    StepRecord, ROLLOUT_SCHEMA_VERSION,
};
pub use trainer::{check_gradients, train_model, LossRecord, TrainOutcome, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// Weight of the REINFORCE term.
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Comma-separated subset of `sub,ambiguity,distinctive`, or `none`
    /// for the navigation-only baseline.
    pub hint_parts: String,
    pub single_clause: bool,
    pub prefix_len: usize,
    pub max_hint_tokens: usize,
    /// Episodes per epoch; all when unset.
    pub episode_cap: Option<usize>,
    pub d: usize,
    pub slack: usize,
    pub gamma: f64,
    pub clip_norm: f64,
    pub success_threshold: f64,
    pub paths: SplitPaths,
}

/// Input locations for CLI-driven runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPaths {
    pub worlds: Option<String>,
    pub train_episodes: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            lambda: 0.2,
            epochs: 10,
            lr: 1e-3,
            hint_parts: "sub,ambiguity,distinctive".into(),
            single_clause: false,
            prefix_len: 10,
            max_hint_tokens: 80,
            episode_cap: None,
            d: 32,
            slack: 4,
            gamma: 0.9,
            clip_norm: 5.0,
            success_threshold: DEFAULT_SUCCESS_THRESHOLD,
            paths: SplitPaths::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Invalid(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.parts()?;
        if !(self.lambda >= 0.0) {
            return Err(Error::Invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.prefix_len == 0 || self.d == 0 || self.max_hint_tokens == 0 {
            return Err(Error::Invalid("prefix_len, d and max_hint_tokens must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.clip_norm > 0.0) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Invalid("lr and clip_norm must be positive, gamma in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn parts(&self) -> Result<HintParts> {
        HintParts::parse(&self.hint_parts)
            .ok_or_else(|| Error::Invalid(format!("unknown hint part in {:?}", self.hint_parts)))
    }

    pub fn render_options(&self) -> Result<RenderOptions> {
        Ok(RenderOptions { parts: self.parts()?, single_clause: self.single_clause })
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            d: self.d,
            vocab_size,
            prefix_len: self.prefix_len,
            max_hint_tokens: self.max_hint_tokens,
            ..ModelConfig::default()
        }
    }

    pub fn rollout_options(&self) -> RolloutOptions {
        RolloutOptions {
            slack: self.slack,
            gamma: self.gamma,
            success_threshold: self.success_threshold,
            decode_hints: false,
            max_hint_tokens: self.max_hint_tokens,
        }
    }
}
