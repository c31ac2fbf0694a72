use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hints::{build_hint_record, HintParts, RenderOptions};
use crate::lexicon::{pluralize, Lexicon};
use crate::text::{tokenize, Vocab};
use crate::world::{DistanceTable, Episode, World};

/// Worlds by id with their all-pairs distance tables.
#[derive(Debug, Clone, Default)]
pub struct WorldSet {
    worlds: BTreeMap<String, World>,
    tables: BTreeMap<String, DistanceTable>,
}

impl WorldSet {
    pub fn new<'a, I: IntoIterator<Item = &'a World>>(worlds: I) -> Self {
        let mut set = WorldSet::default();
        for w in worlds {
            set.insert(w.clone());
        }
        set
    }

    pub fn insert(&mut self, world: World) {
        self.tables.insert(world.id.clone(), DistanceTable::new(&world));
        self.worlds.insert(world.id.clone(), world);
    }

    pub fn get(&self, id: &str) -> Result<(&World, &DistanceTable)> {
        match (self.worlds.get(id), self.tables.get(id)) {
            (Some(w), Some(t)) => Ok((w, t)),
            _ => Err(Error::UnknownWorld(id.to_string())),
        }
    }

    pub fn worlds(&self) -> &BTreeMap<String, World> {
        &self.worlds
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }
}

/// Heading the agent faces at the start: toward the first hop.
pub fn start_heading(episode: &Episode, world: &World) -> Result<f64> {
    match episode.path.as_slice() {
        [a, b, ..] => world.heading_between(*a, *b),
        _ => Err(Error::Invalid(format!("episode {} has no hops", episode.id))),
    }
}

/// Vocabulary over the lexicon (with plurals), training instructions,
/// full-hint renderings and every object word in the given worlds. It
/// does not depend on the hint ablation.
pub fn build_vocab(episodes: &[Episode], worlds: &WorldSet) -> Result<Vocab> {
    let lexicon = Lexicon::bundled();
    let mut streams: Vec<Vec<String>> = Vec::new();
    let words: Vec<String> =
        lexicon.all_nouns().map(str::to_string).chain(lexicon.attributes.iter().cloned()).collect();
    streams.push(lexicon.all_nouns().map(pluralize).collect());
    streams.push(words);
    let full = RenderOptions { parts: HintParts::ALL, single_clause: false };
    for ep in episodes {
        let (world, _) = worlds.get(&ep.world_id)?;
        streams.push(ep.instruction.clone());
        for hop in 0..ep.hops() {
            streams.push(tokenize(&build_hint_record(ep, world, hop, &full, lexicon)?.rendered));
        }
    }
    for world in worlds.worlds().values() {
        for views in world.views.values() {
            for v in views {
                for o in &v.objects {
                    streams.push(o.phrase.split_whitespace().map(str::to_string).collect());
                }
            }
        }
    }
    Ok(Vocab::build(streams.iter().map(Vec::as_slice)))
}

/// Episode with token ids and per-hop gold hints rendered for the
/// configured hint parts.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEpisode {
    pub episode: Episode,
    pub instruction_ids: Vec<usize>,
    /// Gold hint text per hop; empty strings when the hint head is off.
    pub gold_hints: Vec<String>,
    /// Gold hint ids per hop ending with the end-of-hint id; `None` when the
    /// hint head is off.
    pub hint_ids: Option<Vec<Vec<usize>>>,
}

pub fn prepare_episodes(
    episodes: &[Episode],
    worlds: &WorldSet,
    vocab: &Vocab,
    opts: &RenderOptions,
    max_hint_tokens: usize,
) -> Result<Vec<PreparedEpisode>> {
    let lexicon = Lexicon::bundled();
    episodes
        .iter()
        .map(|ep| {
            let (world, _) = worlds.get(&ep.world_id)?;
            ep.validate(world)?;
            let mut gold_hints = Vec::new();
            let mut ids = Vec::new();
            if opts.parts.any() {
                for hop in 0..ep.hops() {
                    let text = build_hint_record(ep, world, hop, opts, lexicon)?.rendered;
                    let mut h = vocab.ids(&tokenize(&text));
                    h.push(vocab.end_of_hint());
                    if h.len() > max_hint_tokens {
                        return Err(Error::Shape(format!(
                            "hint for {} hop {hop} has {} tokens, limit {max_hint_tokens}",
                            ep.id,
                            h.len()
                        )));
                    }
                    gold_hints.push(text);
                    ids.push(h);
                }
            } else {
                gold_hints = vec![String::new(); ep.hops()];
            }
            Ok(PreparedEpisode {
                episode: ep.clone(),
                instruction_ids: vocab.ids(&ep.instruction),
                gold_hints,
                hint_ids: opts.parts.any().then_some(ids),
            })
        })
        .collect()
}
