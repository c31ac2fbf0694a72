use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::{start_heading, PreparedEpisode};
use crate::error::{Error, Result};
use crate::model::{argmax, decode_hint_greedy, view_inputs, Forward, Probe, ProbeStep, Var};
use crate::text::{detokenize, Vocab};
use crate::world::{CandidateView, DistanceTable, NodeId, World};

pub const ROLLOUT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RolloutMode {
    Teacher,
    Sample,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutOptions {
    pub slack: usize,
    pub gamma: f64,
    pub success_threshold: f64,
    pub decode_hints: bool,
    pub max_hint_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub node: NodeId,
    pub candidates: Vec<NodeId>,
    /// Action distribution over `candidates` followed by STOP.
    pub probs: Vec<f64>,
    /// Index into `candidates`, or `candidates.len()` for STOP.
    pub teacher_action: usize,
    pub action: usize,
    pub reward: f64,
    pub generated_hint: Option<String>,
}

impl StepRecord {
    pub fn selected_view(&self) -> Option<NodeId> {
        self.candidates.get(self.action).copied()
    }

    pub fn teacher_view(&self) -> Option<NodeId> {
        self.candidates.get(self.teacher_action).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub schema_version: u32,
    pub episode_id: String,
    pub world_id: String,
    pub mode: RolloutMode,
    pub path: Vec<NodeId>,
    pub steps: Vec<StepRecord>,
    /// The step limit was reached without STOP; scored as a failure.
    pub truncated: bool,
}

pub fn write_rollouts(records: &[RolloutRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("rollout serializes"));
        out.push('\n');
    }
    out
}

pub fn read_rollouts(text: &str) -> Result<Vec<RolloutRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let r: RolloutRecord = serde_json::from_str(l)?;
            if r.schema_version != ROLLOUT_SCHEMA_VERSION {
                return Err(Error::Schema {
                    what: "rollout",
                    found: r.schema_version,
                    expected: ROLLOUT_SCHEMA_VERSION,
                });
            }
            Ok(r)
        })
        .collect()
}

fn view_index(views: &[CandidateView], node: NodeId) -> Result<usize> {
    views
        .iter()
        .position(|v| v.neighbor == node)
        .ok_or_else(|| Error::Invalid(format!("no candidate view toward {node}")))
}

/// Next node on a shortest path to the goal, or STOP (`views.len()`) at the
/// goal.
pub fn teacher_action(
    world: &World,
    table: &DistanceTable,
    node: NodeId,
    goal: NodeId,
    views: &[CandidateView],
) -> Result<usize> {
    match table.next_hop(world, node, goal)? {
        None => Ok(views.len()),
        Some(next) => view_index(views, next),
    }
}

/// Teacher-forced trajectory along the episode path with its gold hints.
pub fn teacher_probe(prep: &PreparedEpisode, world: &World, vocab: &Vocab, lambda: f64) -> Result<Probe> {
    let ep = &prep.episode;
    let mut heading = start_heading(ep, world)?;
    let mut steps = Vec::with_capacity(ep.path.len());
    for (t, &node) in ep.path.iter().enumerate() {
        let views = world.observe(node, heading)?;
        let (teacher, hint) = match ep.path.get(t + 1) {
            Some(&next) => {
                heading = world.heading_between(node, next)?;
                (view_index(&views, next)?, prep.hint_ids.as_ref().map(|h| h[t].clone()))
            }
            None => (views.len(), None),
        };
        steps.push(ProbeStep { views: view_inputs(&views, vocab)?, teacher: Some(teacher), reinforce: None, hint });
    }
    Ok(Probe { instruction: prep.instruction_ids.clone(), steps, lambda })
}

/// Runs one episode on `fwd`'s tape. Returns the record and the
/// log-probability row of every step, for losses built on top.
pub(crate) fn run<R: Rng>(
    fwd: &mut Forward,
    vocab: &Vocab,
    prep: &PreparedEpisode,
    world: &World,
    table: &DistanceTable,
    mode: RolloutMode,
    opts: &RolloutOptions,
    rng: &mut R,
) -> Result<(RolloutRecord, Vec<Var>)> {
    let ep = &prep.episode;
    let x = fwd.encode_instruction(&prep.instruction_ids)?;
    let mut state = fwd.initial_state();
    let mut node = ep.path[0];
    let mut heading = start_heading(ep, world)?;
    let mut path = vec![node];
    let max_moves = ep.hops() + opts.slack;
    let mut steps = Vec::new();
    let mut log_probs = Vec::new();
    let mut truncated = false;
    let dist = |n: NodeId| table.distance(n, ep.goal);
    for t in 0.. {
        let views = world.observe(node, heading)?;
        let inputs = view_inputs(&views, vocab)?;
        let out = fwd.step(x, state, t, &inputs)?;
        let probs = fwd.tape.value(out.probs).data.clone();
        let n = views.len();
        let teacher = match mode {
            RolloutMode::Teacher => match ep.path.get(t + 1) {
                Some(&next) => view_index(&views, next)?,
                None => n,
            },
            _ => teacher_action(world, table, node, ep.goal, &views)?,
        };
        let action = match mode {
            RolloutMode::Teacher => teacher,
            RolloutMode::Greedy => argmax(&probs),
            RolloutMode::Sample => WeightedIndex::new(&probs)
                .map_err(|e| Error::TrainingAbort(format!("bad action distribution: {e}")))?
                .sample(rng),
        };
        let generated_hint = if opts.decode_hints {
            let prefix = fwd.map_prefix(out.weighted);
            let ids = decode_hint_greedy(
                fwd.params,
                fwd.tape.value(prefix),
                &prep.instruction_ids,
                vocab.end_of_hint(),
                opts.max_hint_tokens,
            );
            let toks: Vec<&str> = ids.iter().map(|&i| vocab.token(i)).collect();
            Some(detokenize(&toks))
        } else {
            None
        };
        log_probs.push(out.log_probs);
        let candidates: Vec<NodeId> = views.iter().map(|v| v.neighbor).collect();
        let mut record = StepRecord {
            step: t,
            node,
            candidates,
            probs,
            teacher_action: teacher,
            action,
            reward: 0.0,
            generated_hint,
        };
        if action == n {
            record.reward = if dist(node)? <= opts.success_threshold { 2.0 } else { -2.0 };
            steps.push(record);
            break;
        }
        if path.len() - 1 >= max_moves {
            truncated = true;
            record.reward = -2.0;
            steps.push(record);
            break;
        }
        let next = views[action].neighbor;
        record.reward = dist(node)? - dist(next)?;
        heading = world.heading_between(node, next)?;
        node = next;
        path.push(node);
        state = out.next_state;
        steps.push(record);
    }
    let record = RolloutRecord {
        schema_version: ROLLOUT_SCHEMA_VERSION,
        episode_id: ep.id.clone(),
        world_id: ep.world_id.clone(),
        mode,
        path,
        steps,
        truncated,
    };
    Ok((record, log_probs))
}

pub fn rollout<R: Rng>(
    params: &crate::model::ModelParams,
    vocab: &Vocab,
    prep: &PreparedEpisode,
    world: &World,
    table: &DistanceTable,
    mode: RolloutMode,
    opts: &RolloutOptions,
    rng: &mut R,
) -> Result<RolloutRecord> {
    let mut fwd = Forward::new(params);
    Ok(run(&mut fwd, vocab, prep, world, table, mode, opts, rng)?.0)
}
