//! Navigation hint dataset: landmark chunking, ambiguity classification,
//! distinctive objects, template rendering and the inverse parser.

mod ambiguity;
mod dataset;
mod extract;
mod parse;
mod render;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use ambiguity::{classify_ambiguity, landmark_visible, select_distinctive_objects, MAX_DISTINCTIVE};
pub use dataset::{
    build_hint_dataset, build_hint_record, dataset_stats, read_hint_records, write_hint_records, DatasetStats,
};
pub use extract::extract_landmarks;
pub use parse::{parse_hint, ClauseKind, ClauseReport, ParsedHint};
pub use render::{render_hint, render_hint_with, HintParts, RenderOptions};

pub const HINT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AmbiguityCategory {
    TargetLandmarks,
    MultipleLandmarks,
    MissingLandmarks,
    InvisibleLandmarks,
    NoLandmarks,
}

impl AmbiguityCategory {
    pub const ALL: [AmbiguityCategory; 5] = [
        AmbiguityCategory::TargetLandmarks,
        AmbiguityCategory::MultipleLandmarks,
        AmbiguityCategory::MissingLandmarks,
        AmbiguityCategory::InvisibleLandmarks,
        AmbiguityCategory::NoLandmarks,
    ];

    /// The four categories that can label an individual landmark, in
    /// rendering order.
    pub const VISIBILITY: [AmbiguityCategory; 4] = [
        AmbiguityCategory::TargetLandmarks,
        AmbiguityCategory::MultipleLandmarks,
        AmbiguityCategory::MissingLandmarks,
        AmbiguityCategory::InvisibleLandmarks,
    ];

    /// Rank used to pick one label per step; higher wins.
    pub fn precedence(self) -> u8 {
        match self {
            AmbiguityCategory::MissingLandmarks => 4,
            AmbiguityCategory::MultipleLandmarks => 3,
            AmbiguityCategory::TargetLandmarks => 2,
            AmbiguityCategory::InvisibleLandmarks => 1,
            AmbiguityCategory::NoLandmarks => 0,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            AmbiguityCategory::TargetLandmarks => "target",
            AmbiguityCategory::MultipleLandmarks => "multiple",
            AmbiguityCategory::MissingLandmarks => "missing",
            AmbiguityCategory::InvisibleLandmarks => "invisible",
            AmbiguityCategory::NoLandmarks => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkPhrase {
    /// Singular lexicon noun.
    pub head_noun: String,
    pub attributes: Vec<String>,
    /// Token range within the sub-instruction.
    pub source_span: Range<usize>,
}

impl LandmarkPhrase {
    /// Surface text as it appears in `sub_instruction`.
    pub fn surface(&self, sub_instruction: &[String]) -> String {
        sub_instruction.get(self.source_span.clone()).map(|t| t.join(" ")).unwrap_or_else(|| self.normalized())
    }

    /// Attributes plus the singular head noun.
    pub fn normalized(&self) -> String {
        crate::world::join_phrase(&self.attributes, &self.head_noun)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintRecord {
    pub schema_version: u32,
    pub episode_id: String,
    pub step_index: usize,
    pub sub_instruction: Vec<String>,
    pub landmark_groups: BTreeMap<AmbiguityCategory, Vec<LandmarkPhrase>>,
    pub distinctive_objects: Vec<String>,
    pub step_category: AmbiguityCategory,
    pub rendered: String,
}

#[cfg(test)]
mod tests;
