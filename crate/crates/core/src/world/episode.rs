use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    candidate_views, dijkstra, shortest_path, CandidateView, Episode, NodeId, SubInstructionSpan, VisualObject, World,
    EPISODE_SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::lexicon::{pluralize, Lexicon};

/// Relative weights for the landmark situation planted at each hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryWeights {
    pub target: f64,
    pub multiple: f64,
    pub missing: f64,
    pub invisible: f64,
    pub none: f64,
}

impl Default for CategoryWeights {
    fn default() -> Self {
        CategoryWeights { target: 0.14, multiple: 0.27, missing: 0.14, invisible: 0.30, none: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub min_hops: usize,
    pub max_hops: usize,
    pub weights: CategoryWeights,
    pub attribute_mention_prob: f64,
    pub plural_prob: f64,
    pub max_retries: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            min_hops: 2,
            max_hops: 5,
            weights: CategoryWeights::default(),
            attribute_mention_prob: 0.5,
            plural_prob: 0.1,
            max_retries: 200,
        }
    }
}

const DIRECTIONS: [[&str; 2]; 8] = [
    ["go", "straight"],
    ["veer", "left"],
    ["turn", "left"],
    ["sharp", "left"],
    ["turn", "around"],
    ["sharp", "right"],
    ["turn", "right"],
    ["veer", "right"],
];

// Motion clauses are five tokens long whatever the landmark length, so every
// hop occupies the same number of instruction tokens.
const MOTION_ONE: &[&str] = &["and walk past the", "and walk into the", "and walk towards the", "and head to the"];
const MOTION_TWO: &[&str] = &["and pass the", "and enter the", "and approach the", "and reach the"];
const MOTION_THREE: &[&str] = &["past the", "towards the", "into the"];
const MOTION_NONE: &[&str] = &["and walk a few steps", "and continue for a while", "and keep moving a bit"];
const CLOSING: [&str; 2] = ["and", "stop"];

/// 45-degree bucket of a relative heading; 0 is straight ahead and
/// positive angles turn left.
pub fn direction_bucket(alpha: f64) -> usize {
    ((alpha / (PI / 4.0)).round() as i64).rem_euclid(8) as usize
}

pub fn direction_phrase(alpha: f64) -> [&'static str; 2] {
    DIRECTIONS[direction_bucket(alpha)]
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Plant {
    Target,
    Multiple,
    Missing,
    Invisible,
    None,
}

fn pluralizable(noun: &str) -> bool {
    !["s", "x", "z", "ch", "sh", "f"].iter().any(|s| noun.ends_with(s))
}

/// Chooses an object to mention for the requested situation, or `None` when
/// the views cannot support it.
fn pick_landmark(
    rng: &mut ChaCha8Rng,
    plant: Plant,
    views: &[CandidateView],
    target: usize,
    future: &[VisualObject],
    lexicon: &Lexicon,
) -> Option<VisualObject> {
    let visible_elsewhere: BTreeSet<&str> = views
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target)
        .flat_map(|(_, v)| v.objects.iter().map(|o| o.head_noun.as_str()))
        .collect();
    let in_target: BTreeSet<&str> = views[target].objects.iter().map(|o| o.head_noun.as_str()).collect();
    let candidates: Vec<VisualObject> = match plant {
        Plant::Target => views[target]
            .objects
            .iter()
            .filter(|o| !visible_elsewhere.contains(o.head_noun.as_str()))
            .cloned()
            .collect(),
        Plant::Multiple => {
            views[target].objects.iter().filter(|o| visible_elsewhere.contains(o.head_noun.as_str())).cloned().collect()
        }
        Plant::Missing => views
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target)
            .flat_map(|(_, v)| v.objects.iter())
            .filter(|o| !in_target.contains(o.head_noun.as_str()))
            .cloned()
            .collect(),
        Plant::Invisible => {
            let hidden = |n: &str| !in_target.contains(n) && !visible_elsewhere.contains(n);
            let ahead: Vec<VisualObject> = future.iter().filter(|o| hidden(&o.head_noun)).cloned().collect();
            if !ahead.is_empty() {
                ahead
            } else {
                lexicon.nouns.iter().filter(|n| hidden(n)).map(|n| VisualObject::new(n, &[])).collect()
            }
        }
        Plant::None => return None,
    };
    candidates.choose(rng).cloned()
}

fn motion_tokens(rng: &mut ChaCha8Rng, landmark: Option<(&[String], String)>) -> Vec<String> {
    let (templates, phrase): (&[&str], Vec<String>) = match landmark {
        None => (MOTION_NONE, Vec::new()),
        Some((attrs, head)) => {
            let mut p: Vec<String> = attrs.to_vec();
            p.push(head);
            let t = match p.len() {
                1 => MOTION_ONE,
                2 => MOTION_TWO,
                _ => MOTION_THREE,
            };
            (t, p)
        }
    };
    let mut out: Vec<String> =
        templates.choose(rng).expect("templates non-empty").split(' ').map(str::to_string).collect();
    out.extend(phrase);
    out
}

/// Samples a start/goal pair whose shortest path has an admissible hop
/// count and writes one templated sub-instruction per hop.
pub fn generate_episode(world: &World, seed: u64, cfg: &EpisodeConfig) -> Result<Episode> {
    if cfg.min_hops == 0 || cfg.min_hops > cfg.max_hops {
        return Err(Error::Invalid(format!("bad hop range {}..={}", cfg.min_hops, cfg.max_hops)));
    }
    let lexicon = Lexicon::bundled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<NodeId> = world.nodes.keys().copied().collect();
    let mut path = None;
    for _ in 0..cfg.max_retries {
        let start = *nodes.choose(&mut rng).expect("world has nodes");
        let (_, pred) = dijkstra(world, start)?;
        let hop_count = |mut n: NodeId| {
            let mut h = 0;
            while n != start {
                n = pred[&n];
                h += 1;
            }
            h
        };
        let goals: Vec<NodeId> = nodes
            .iter()
            .copied()
            .filter(|&g| g != start && pred.contains_key(&g))
            .filter(|&g| (cfg.min_hops..=cfg.max_hops).contains(&hop_count(g)))
            .collect();
        if let Some(&goal) = goals.choose(&mut rng) {
            path = Some(shortest_path(world, start, goal)?);
            break;
        }
    }
    let path =
        path.ok_or_else(|| Error::GenerationFailure(format!("no admissible start/goal pair in world {}", world.id)))?;

    let w = &cfg.weights;
    let plants = [
        (Plant::Target, w.target),
        (Plant::Multiple, w.multiple),
        (Plant::Missing, w.missing),
        (Plant::Invisible, w.invisible),
        (Plant::None, w.none),
    ];
    let total: f64 = plants.iter().map(|p| p.1).sum();
    let mut instruction: Vec<String> = Vec::new();
    let mut spans = Vec::new();
    let hops = path.len() - 1;
    for hop in 0..hops {
        let (from, to) = (path[hop], path[hop + 1]);
        let arrival =
            if hop == 0 { world.heading_between(from, to)? } else { world.heading_between(path[hop - 1], from)? };
        let views = candidate_views(world, from)?;
        let target = views.iter().position(|v| v.neighbor == to).expect("path edge has a view");
        let alpha = super::wrap_angle(views[target].heading - arrival);

        let mut roll = rng.random_range(0.0..total);
        let mut plant = Plant::None;
        for &(p, weight) in &plants {
            if roll < weight {
                plant = p;
                break;
            }
            roll -= weight;
        }
        let future: Vec<VisualObject> = match path.get(hop + 2) {
            Some(&next) => candidate_views(world, to)?
                .iter()
                .find(|v| v.neighbor == next)
                .map(|v| v.objects.clone())
                .unwrap_or_default(),
            None => Vec::new(),
        };
        let landmark = if plant == Plant::None {
            None
        } else {
            [plant, Plant::Invisible]
                .into_iter()
                .find_map(|p| pick_landmark(&mut rng, p, views, target, &future, lexicon))
        };
        let mention = landmark.map(|obj| {
            let attrs: Vec<String> =
                if rng.random_bool(cfg.attribute_mention_prob) { obj.attributes.clone() } else { Vec::new() };
            let head = if attrs.is_empty() && pluralizable(&obj.head_noun) && rng.random_bool(cfg.plural_prob) {
                pluralize(&obj.head_noun)
            } else {
                obj.head_noun.clone()
            };
            (attrs, head)
        });

        let start_token = instruction.len();
        instruction.extend(direction_phrase(alpha).iter().map(|s| s.to_string()));
        instruction.extend(motion_tokens(&mut rng, mention.as_ref().map(|(a, h)| (a.as_slice(), h.clone()))));
        if hop + 1 == hops {
            instruction.extend(CLOSING.iter().map(|s| s.to_string()));
        }
        spans.push(SubInstructionSpan { start_token, end_token: instruction.len(), hop_index: hop });
    }

    Ok(Episode {
        schema_version: EPISODE_SCHEMA_VERSION,
        id: format!("e{seed}"),
        world_id: world.id.clone(),
        goal: *path.last().expect("non-empty path"),
        path,
        instruction,
        spans,
    })
}

/// Tokens per hop before the closing "and stop".
pub const HOP_TOKENS: usize = 7;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{generate_world, WorldConfig};

    #[test]
    fn direction_buckets() {
        assert_eq!(direction_phrase(0.0), ["go", "straight"]);
        assert_eq!(direction_phrase(PI / 2.0), ["turn", "left"]);
        assert_eq!(direction_phrase(-PI / 2.0), ["turn", "right"]);
        assert_eq!(direction_phrase(-PI), ["turn", "around"]);
        assert_eq!(direction_phrase(0.3), ["go", "straight"]);
    }

    #[test]
    fn motion_clauses_are_fixed_width() {
        for t in MOTION_ONE {
            assert_eq!(t.split(' ').count() + 1, HOP_TOKENS - 2);
        }
        for t in MOTION_TWO {
            assert_eq!(t.split(' ').count() + 2, HOP_TOKENS - 2);
        }
        for t in MOTION_THREE {
            assert_eq!(t.split(' ').count() + 3, HOP_TOKENS - 2);
        }
        for t in MOTION_NONE {
            assert_eq!(t.split(' ').count(), HOP_TOKENS - 2);
        }
    }

    #[test]
    fn spans_have_fixed_width() {
        let world = generate_world(5, &WorldConfig::default()).unwrap();
        for s in 0..50 {
            let ep = generate_episode(&world, s, &EpisodeConfig::default()).unwrap();
            for span in &ep.spans {
                let expect = if span.hop_index + 1 == ep.hops() { HOP_TOKENS + 2 } else { HOP_TOKENS };
                assert_eq!(span.end_token - span.start_token, expect);
                assert_eq!(span.start_token, span.hop_index * HOP_TOKENS);
            }
        }
    }
}
