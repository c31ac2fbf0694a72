use serde::{Deserialize, Serialize};

use super::data::{PreparedEpisode, WorldSet};
use super::rollout::{rollout, RolloutMode, RolloutOptions, RolloutRecord};
use crate::error::{Error, Result};
use crate::metrics::{episode_metrics, EpisodeMetrics, MetricReport, PathPair};
use crate::model::ModelParams;
use crate::seed::rng_for;
use crate::text::Vocab;
use crate::world::NodeId;

pub const GENERATED_HINT_SCHEMA_VERSION: u32 = 1;

/// One generated hint per evaluated step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedHint {
    pub schema_version: u32,
    pub episode_id: String,
    pub world_id: String,
    pub step_index: usize,
    pub node: NodeId,
    pub selected_view: Option<NodeId>,
    pub teacher_view: Option<NodeId>,
    pub text: String,
    /// Gold hint for the hop with the same index, when the episode has one.
    pub gold: Option<String>,
}

pub fn write_generated_hints(hints: &[GeneratedHint]) -> String {
    hints.iter().map(|h| serde_json::to_string(h).expect("hint serializes") + "\n").collect()
}

pub fn read_generated_hints(text: &str) -> Result<Vec<GeneratedHint>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let h: GeneratedHint = serde_json::from_str(l)?;
            if h.schema_version != GENERATED_HINT_SCHEMA_VERSION {
                return Err(Error::Schema {
                    what: "generated hint",
                    found: h.schema_version,
                    expected: GENERATED_HINT_SCHEMA_VERSION,
                });
            }
            Ok(h)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: MetricReport,
    pub per_episode: Vec<EpisodeMetrics>,
    pub rollouts: Vec<RolloutRecord>,
    pub hints: Vec<GeneratedHint>,
}

/// Scores a rollout against its episode; truncated rollouts count as
/// failures.
pub fn score_rollout(
    record: &RolloutRecord,
    reference: &[NodeId],
    worlds: &WorldSet,
    threshold: f64,
) -> Result<EpisodeMetrics> {
    score_path(&record.world_id, &record.path, record.truncated, reference, worlds, threshold)
}

/// [`score_rollout`] for a bare node sequence.
pub fn score_path(
    world_id: &str,
    path: &[NodeId],
    truncated: bool,
    reference: &[NodeId],
    worlds: &WorldSet,
    threshold: f64,
) -> Result<EpisodeMetrics> {
    let (_, table) = worlds.get(world_id)?;
    let pair = PathPair { predicted: path.to_vec(), reference: reference.to_vec(), success_threshold: threshold };
    let mut m = episode_metrics(&pair, table)?;
    if truncated {
        m.sr = 0.0;
        m.spl = 0.0;
        m.sdtw = 0.0;
    }
    Ok(m)
}

pub fn evaluate_split(
    params: &ModelParams,
    vocab: &Vocab,
    episodes: &[PreparedEpisode],
    worlds: &WorldSet,
    mode: RolloutMode,
    opts: &RolloutOptions,
    seed: u64,
) -> Result<EvalOutput> {
    let mut rng = rng_for(seed, "eval-sample");
    let mut per_episode = Vec::with_capacity(episodes.len());
    let mut rollouts = Vec::with_capacity(episodes.len());
    let mut hints = Vec::new();
    for prep in episodes {
        let (world, table) = worlds.get(&prep.episode.world_id)?;
        let record = rollout(params, vocab, prep, world, table, mode, opts, &mut rng)?;
        per_episode.push(score_rollout(&record, &prep.episode.path, worlds, opts.success_threshold)?);
        if opts.decode_hints {
            for s in &record.steps {
                hints.push(GeneratedHint {
                    schema_version: GENERATED_HINT_SCHEMA_VERSION,
                    episode_id: record.episode_id.clone(),
                    world_id: record.world_id.clone(),
                    step_index: s.step,
                    node: s.node,
                    selected_view: s.selected_view(),
                    teacher_view: s.teacher_view(),
                    text: s.generated_hint.clone().unwrap_or_default(),
                    gold: prep.gold_hints.get(s.step).filter(|g| !g.is_empty()).cloned(),
                });
            }
        }
        rollouts.push(record);
    }
    let report = MetricReport::aggregate(&per_episode)?;
    Ok(EvalOutput { report, per_episode, rollouts, hints })
}
