//! Seen/unseen dataset layout: disjoint world sets with episodes drawn from
//! each.

use serde::{Deserialize, Serialize};

use super::{generate_episode, generate_world, Episode, EpisodeConfig, World, WorldConfig};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub train_worlds: usize,
    pub unseen_worlds: usize,
    pub train_episodes: usize,
    pub unseen_episodes: usize,
    pub world: WorldConfig,
    pub episode: EpisodeConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            train_worlds: 40,
            unseen_worlds: 10,
            train_episodes: 2000,
            unseen_episodes: 400,
            world: WorldConfig::default(),
            episode: EpisodeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train_worlds: Vec<World>,
    pub unseen_worlds: Vec<World>,
    pub train_episodes: Vec<Episode>,
    pub unseen_episodes: Vec<Episode>,
}

impl Corpus {
    pub fn worlds(&self) -> impl Iterator<Item = &World> {
        self.train_worlds.iter().chain(&self.unseen_worlds)
    }
}

pub fn generate_split_worlds(seed: u64, split: &str, count: usize, cfg: &WorldConfig) -> Result<Vec<World>> {
    (0..count)
        .map(|i| {
            let mut w = generate_world(derive_seed(seed, &format!("world-{split}-{i}")), cfg)?;
            w.id = format!("{split}-w{i:03}");
            Ok(w)
        })
        .collect()
}

/// Episodes spread round-robin over `worlds`, with ids `{split}-{index}`.
pub fn generate_split_episodes(
    seed: u64,
    split: &str,
    worlds: &[World],
    count: usize,
    cfg: &EpisodeConfig,
) -> Result<Vec<Episode>> {
    if worlds.is_empty() && count > 0 {
        return Err(Error::UndefinedInput(format!("no worlds for split {split}")));
    }
    (0..count)
        .map(|i| {
            let world = &worlds[i % worlds.len()];
            let mut ep = generate_episode(world, derive_seed(seed, &format!("episode-{split}-{i}")), cfg)?;
            ep.id = format!("{split}-{i:06}");
            Ok(ep)
        })
        .collect()
}

pub fn generate_corpus(seed: u64, cfg: &CorpusConfig) -> Result<Corpus> {
    let train_worlds = generate_split_worlds(seed, "train", cfg.train_worlds, &cfg.world)?;
    let unseen_worlds = generate_split_worlds(seed, "unseen", cfg.unseen_worlds, &cfg.world)?;
    let train_episodes = generate_split_episodes(seed, "train", &train_worlds, cfg.train_episodes, &cfg.episode)?;
    let unseen_episodes = generate_split_episodes(seed, "unseen", &unseen_worlds, cfg.unseen_episodes, &cfg.episode)?;
    Ok(Corpus { train_worlds, unseen_worlds, train_episodes, unseen_episodes })
}
