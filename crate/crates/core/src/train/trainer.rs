use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{build_vocab, prepare_episodes, PreparedEpisode, WorldSet};
use super::rollout::{run, teacher_probe, RolloutMode};
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{
    clip_global_norm, discounted_returns, grad_check, probe_loss, total_loss, Adam, Forward, GradCheckReport,
    ModelParams,
};
use crate::seed::{derive_seed, rng_for};
use crate::text::Vocab;
use crate::world::{generate_episode, generate_world, EpisodeConfig, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: u64,
    pub episode_id: String,
    pub total: f64,
    pub nav: f64,
    pub hint: f64,
    pub grad_norm: f64,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub vocab: Vocab,
    opt: Adam,
    sample_rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(config: TrainConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(config.model_config(vocab.len()), derive_seed(config.seed, "params"))?;
        let opt = Adam::new(config.lr, &params.tensors);
        let sample_rng = rng_for(config.seed, "rollout-sample");
        Ok(Trainer { config, params, vocab, opt, sample_rng })
    }

    /// Teacher pass (imitation + hint likelihood) and sampled pass
    /// (REINFORCE), then one clipped Adam step. Parameters are left
    /// untouched when the loss is not finite.
    pub fn train_episode(&mut self, prep: &PreparedEpisode, worlds: &WorldSet, epoch: usize) -> Result<LossRecord> {
        let (world, table) = worlds.get(&prep.episode.world_id)?;
        let mut grads = self.params.zeros_like();

        let probe = teacher_probe(prep, world, &self.vocab, self.config.lambda)?;
        let mut fwd = Forward::new(&self.params);
        let teacher = probe_loss(&mut fwd, &probe)?;
        let values = teacher.values(&fwd);
        fwd.tape.backward(teacher.total, &mut grads);

        let mut rl = 0.0;
        if self.config.lambda > 0.0 {
            let mut fwd = Forward::new(&self.params);
            let opts = self.config.rollout_options();
            let (record, log_probs) =
                run(&mut fwd, &self.vocab, prep, world, table, RolloutMode::Sample, &opts, &mut self.sample_rng)?;
            let rewards: Vec<f64> = record.steps.iter().map(|s| s.reward).collect();
            let returns = discounted_returns(&rewards, self.config.gamma);
            let terms: Vec<_> = record
                .steps
                .iter()
                .zip(&log_probs)
                .zip(&returns)
                .map(|((s, &lp), &ret)| fwd.weighted_nll(lp, s.action, self.config.lambda * ret))
                .collect();
            let loss = fwd.sum(&terms).ok_or_else(|| Error::UndefinedInput("empty rollout".into()))?;
            rl = fwd.tape.scalar(loss);
            fwd.tape.backward(loss, &mut grads);
        }

        let nav = values.nav + rl;
        let total = total_loss(values.hint, nav)?;
        let grad_norm = clip_global_norm(&mut grads, self.config.clip_norm);
        if !grad_norm.is_finite() {
            return Err(Error::TrainingAbort(format!("non-finite gradient on {}", prep.episode.id)));
        }
        self.opt.update(&mut self.params.tensors, &grads);
        Ok(LossRecord {
            epoch,
            step: self.opt.steps(),
            episode_id: prep.episode.id.clone(),
            total,
            nav,
            hint: values.hint,
            grad_norm,
        })
    }

    /// One pass over a seeded shuffle of `episodes`, capped by
    /// `episode_cap`.
    pub fn train_epoch(
        &mut self,
        episodes: &[PreparedEpisode],
        worlds: &WorldSet,
        epoch: usize,
    ) -> Result<Vec<LossRecord>> {
        let mut order: Vec<usize> = (0..episodes.len()).collect();
        order.shuffle(&mut rng_for(self.config.seed, &format!("epoch-order-{epoch}")));
        if let Some(cap) = self.config.episode_cap {
            order.truncate(cap);
        }
        order.iter().map(|&i| self.train_episode(&episodes[i], worlds, epoch)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub trace: Vec<LossRecord>,
}

pub fn train_model(
    config: &TrainConfig,
    episodes: &[PreparedEpisode],
    worlds: &WorldSet,
    vocab: Vocab,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), vocab)?;
    let mut trace = Vec::new();
    for epoch in 0..config.epochs {
        trace.extend(trainer.train_epoch(episodes, worlds, epoch)?);
    }
    Ok(TrainOutcome { params: trainer.params, vocab: trainer.vocab, trace })
}

/// Gradient check of the full model on a teacher probe from a freshly
/// generated world. Every step also carries a REINFORCE term so the policy
/// gradient path is exercised.
pub fn check_gradients(config: &TrainConfig, samples: usize) -> Result<GradCheckReport> {
    config.validate()?;
    let world = generate_world(derive_seed(config.seed, "gradcheck-world"), &WorldConfig::default())?;
    let episode = generate_episode(&world, derive_seed(config.seed, "gradcheck-episode"), &EpisodeConfig::default())?;
    let worlds = WorldSet::new([&world]);
    let vocab = build_vocab(std::slice::from_ref(&episode), &worlds)?;
    let prep = prepare_episodes(
        std::slice::from_ref(&episode),
        &worlds,
        &vocab,
        &config.render_options()?,
        config.max_hint_tokens,
    )?
    .remove(0);
    let mut probe = teacher_probe(&prep, &world, &vocab, config.lambda)?;
    for (t, step) in probe.steps.iter_mut().enumerate() {
        step.reinforce = step.teacher.map(|a| (a, 0.5 - 0.25 * t as f64));
    }
    let params = ModelParams::init(config.model_config(vocab.len()), derive_seed(config.seed, "params"))?;
    grad_check(&params, &probe, samples, derive_seed(config.seed, "gradcheck-samples"))
}
