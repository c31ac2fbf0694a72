//! Procedurally generated navigation graphs and instruction-aligned episodes.

mod corpus;
mod episode;
mod generate;
mod graph;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use corpus::{generate_corpus, generate_split_episodes, generate_split_worlds, Corpus, CorpusConfig};
pub use episode::{direction_bucket, direction_phrase, generate_episode, CategoryWeights, EpisodeConfig, HOP_TOKENS};
pub use generate::{generate_world, WorldConfig};
pub use graph::{dijkstra, shortest_path, shortest_path_distance, DistanceTable};

pub const WORLD_SCHEMA_VERSION: u32 = 1;
pub const EPISODE_SCHEMA_VERSION: u32 = 1;

pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualObject {
    pub head_noun: String,
    pub attributes: Vec<String>,
    pub phrase: String,
}

impl VisualObject {
    pub fn new(head_noun: &str, attributes: &[&str]) -> Self {
        let attributes: Vec<String> = attributes.iter().map(|s| s.to_string()).collect();
        let phrase = join_phrase(&attributes, head_noun);
        VisualObject { head_noun: head_noun.to_string(), attributes, phrase }
    }

    /// Parses "wooden dining table" into attributes and head noun (the
    /// last token is the head).
    pub fn from_phrase(phrase: &str) -> Option<Self> {
        let toks: Vec<&str> = phrase.split_whitespace().collect();
        let (head, attrs) = toks.split_last()?;
        Some(Self::new(head, attrs))
    }
}

pub fn join_phrase(attributes: &[String], head_noun: &str) -> String {
    let mut parts: Vec<&str> = attributes.iter().map(String::as_str).collect();
    parts.push(head_noun);
    parts.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub neighbor: NodeId,
    /// Relative heading in radians, in `[-PI, PI)`. Views stored in a
    /// [`World`] are relative to world heading zero; [`World::observe`]
    /// re-expresses them relative to an arrival heading.
    pub heading: f64,
    /// Elevation in radians, one of `-PI/6`, `0`, `PI/6`.
    pub elevation: f64,
    pub objects: Vec<VisualObject>,
}

impl CandidateView {
    pub fn has_noun(&self, noun: &str) -> bool {
        self.objects.iter().any(|o| o.head_noun == noun)
    }

    pub fn has_phrase(&self, phrase: &str) -> bool {
        self.objects.iter().any(|o| o.phrase == phrase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub schema_version: u32,
    pub id: String,
    /// Position in meters.
    pub nodes: BTreeMap<NodeId, [f64; 3]>,
    pub edges: Vec<Edge>,
    /// Candidate views per node, ordered by neighbor id.
    pub views: BTreeMap<NodeId, Vec<CandidateView>>,
    pub object_lexicon_seed: u64,
}

impl World {
    pub fn from_json(text: &str) -> Result<Self> {
        let world: World = serde_json::from_str(text)?;
        if world.schema_version != WORLD_SCHEMA_VERSION {
            return Err(Error::Schema { what: "world", found: world.schema_version, expected: WORLD_SCHEMA_VERSION });
        }
        Ok(world)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains_key(&node)
    }

    pub fn position(&self, node: NodeId) -> Result<[f64; 3]> {
        self.nodes.get(&node).copied().ok_or(Error::UnknownNode(node))
    }

    pub fn neighbors(&self, node: NodeId) -> Result<Vec<NodeId>> {
        Ok(candidate_views(self, node)?.iter().map(|v| v.neighbor).collect())
    }

    pub fn edge_length(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.edges.iter().find(|e| (e.a == a && e.b == b) || (e.a == b && e.b == a)).map(|e| e.length)
    }

    /// Heading of the horizontal displacement from `a` to `b`.
    pub fn heading_between(&self, a: NodeId, b: NodeId) -> Result<f64> {
        let pa = self.position(a)?;
        let pb = self.position(b)?;
        Ok(wrap_angle((pb[1] - pa[1]).atan2(pb[0] - pa[0])))
    }

    /// Candidate views at `node` with headings relative to `arrival_heading`.
    pub fn observe(&self, node: NodeId, arrival_heading: f64) -> Result<Vec<CandidateView>> {
        Ok(candidate_views(self, node)?
            .iter()
            .map(|v| CandidateView { heading: wrap_angle(v.heading - arrival_heading), ..v.clone() })
            .collect())
    }

    /// Checks every structural invariant of a generated world.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invalid(format!("world {}: {m}", self.id)));
        for e in &self.edges {
            if !(e.length > 0.0) {
                return fail(format!("edge {}-{} has non-positive length", e.a, e.b));
            }
            if !self.contains(e.a) || !self.contains(e.b) {
                return fail(format!("edge {}-{} references unknown node", e.a, e.b));
            }
        }
        for (&node, views) in &self.views {
            if !(2..=8).contains(&views.len()) {
                return fail(format!("node {node} has {} views", views.len()));
            }
            let mut prev = None;
            for v in views {
                if Some(v.neighbor) <= prev {
                    return fail(format!("views at {node} not strictly ordered"));
                }
                prev = Some(v.neighbor);
                if self.edge_length(node, v.neighbor).is_none() {
                    return fail(format!("view {node}->{} has no edge", v.neighbor));
                }
                if !(-PI..PI).contains(&v.heading) {
                    return fail(format!("heading {} out of range", v.heading));
                }
                if ![-PI / 6.0, 0.0, PI / 6.0].iter().any(|b| (b - v.elevation).abs() < 1e-12) {
                    return fail(format!("elevation {} not quantized", v.elevation));
                }
                if v.objects.is_empty() {
                    return fail(format!("view {node}->{} has no objects", v.neighbor));
                }
                let mut phrases: Vec<&str> = v.objects.iter().map(|o| o.phrase.as_str()).collect();
                phrases.sort_unstable();
                phrases.dedup();
                if phrases.len() != v.objects.len() {
                    return fail(format!("duplicate phrases in view {node}->{}", v.neighbor));
                }
            }
        }
        if self.views.len() != self.nodes.len() {
            return fail("views missing for some nodes".into());
        }
        let table = DistanceTable::new(self);
        if table.has_unreachable() {
            return fail("graph is disconnected".into());
        }
        Ok(())
    }
}

/// Views at `node`, ordered by neighbor id.
pub fn candidate_views(world: &World, node: NodeId) -> Result<&[CandidateView]> {
    world.views.get(&node).map(Vec::as_slice).ok_or(Error::UnknownNode(node))
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2*PI for tiny negative inputs.
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubInstructionSpan {
    pub start_token: usize,
    pub end_token: usize,
    pub hop_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub schema_version: u32,
    pub id: String,
    pub world_id: String,
    pub path: Vec<NodeId>,
    pub instruction: Vec<String>,
    pub spans: Vec<SubInstructionSpan>,
    pub goal: NodeId,
}

impl Episode {
    pub fn hops(&self) -> usize {
        self.path.len().saturating_sub(1)
    }

    pub fn sub_instruction(&self, hop: usize) -> Option<&[String]> {
        self.spans.iter().find(|s| s.hop_index == hop).map(|s| &self.instruction[s.start_token..s.end_token])
    }

    pub fn from_json(line: &str) -> Result<Self> {
        let ep: Episode = serde_json::from_str(line)?;
        if ep.schema_version != EPISODE_SCHEMA_VERSION {
            return Err(Error::Schema { what: "episode", found: ep.schema_version, expected: EPISODE_SCHEMA_VERSION });
        }
        Ok(ep)
    }

    pub fn validate(&self, world: &World) -> Result<()> {
        let fail = |m: String| Err(Error::Invalid(format!("episode {}: {m}", self.id)));
        if self.path.is_empty() || self.path.last() != Some(&self.goal) {
            return fail("goal is not the end of the path".into());
        }
        for pair in self.path.windows(2) {
            if world.edge_length(pair[0], pair[1]).is_none() {
                return fail(format!("no edge {}-{}", pair[0], pair[1]));
            }
        }
        let mut cursor = 0;
        let mut last_hop = None;
        for s in &self.spans {
            if s.start_token != cursor || s.end_token <= s.start_token {
                return fail("spans do not partition the instruction".into());
            }
            if Some(s.hop_index) <= last_hop || s.hop_index >= self.hops() {
                return fail("hop indices not strictly increasing".into());
            }
            last_hop = Some(s.hop_index);
            cursor = s.end_token;
        }
        if cursor != self.instruction.len() || self.spans.len() != self.hops() {
            return fail("spans do not cover the instruction".into());
        }
        Ok(())
    }
}

pub fn read_episodes(text: &str) -> Result<Vec<Episode>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(Episode::from_json).collect()
}

pub fn write_episodes(episodes: &[Episode]) -> String {
    let mut out = String::new();
    for ep in episodes {
        out.push_str(&serde_json::to_string(ep).expect("episode serializes"));
        out.push('\n');
    }
    out
}
