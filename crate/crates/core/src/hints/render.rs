use serde::{Deserialize, Serialize};

use super::{AmbiguityCategory, HintRecord, LandmarkPhrase};

/// Which hint parts are included; the ablation axes of the training setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintParts {
    pub sub: bool,
    pub ambiguity: bool,
    pub distinctive: bool,
}

impl HintParts {
    pub const ALL: HintParts = HintParts { sub: true, ambiguity: true, distinctive: true };
    pub const NONE: HintParts = HintParts { sub: false, ambiguity: false, distinctive: false };

    pub fn any(self) -> bool {
        self.sub || self.ambiguity || self.distinctive
    }

    /// Parses a comma-separated list such as `sub,ambiguity`. An empty
    /// string or `none` disables every part.
    pub fn parse(list: &str) -> Option<HintParts> {
        let mut parts = HintParts::NONE;
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "sub" => parts.sub = true,
                "ambiguity" => parts.ambiguity = true,
                "distinctive" => parts.distinctive = true,
                "none" => {}
                "all" => parts = HintParts::ALL,
                _ => return None,
            }
        }
        Some(parts)
    }
}

impl Default for HintParts {
    fn default() -> Self {
        HintParts::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RenderOptions {
    pub parts: HintParts,
    /// Render only the step category's clause instead of every non-empty
    /// group.
    pub single_clause: bool,
}

pub(crate) fn landmark_suffix(cat: AmbiguityCategory) -> Option<&'static str> {
    match cat {
        AmbiguityCategory::TargetLandmarks => Some(" are observed."),
        AmbiguityCategory::MultipleLandmarks => Some(" are observed in multiple viewpoints."),
        AmbiguityCategory::MissingLandmarks => Some(" are misleading."),
        AmbiguityCategory::InvisibleLandmarks => Some(" are not observed."),
        AmbiguityCategory::NoLandmarks => None,
    }
}

pub(crate) const SUB_PREFIX: &str = "The ";
pub(crate) const SUB_SUFFIX: &str = " needs to be executed.";
pub(crate) const DISTINCTIVE_PREFIX: &str = "However, ";
pub(crate) const DISTINCTIVE_SUFFIX: &str = " are in the targeted view.";

pub fn render_hint(record: &HintRecord) -> String {
    render_hint_with(record, &RenderOptions::default())
}

pub fn render_hint_with(record: &HintRecord, opts: &RenderOptions) -> String {
    let mut clauses: Vec<String> = Vec::new();
    if opts.parts.sub {
        clauses.push(format!("{SUB_PREFIX}{}{SUB_SUFFIX}", record.sub_instruction.join(" ")));
    }
    if opts.parts.ambiguity {
        for (&cat, group) in &record.landmark_groups {
            if group.is_empty() || (opts.single_clause && cat != record.step_category) {
                continue;
            }
            let Some(suffix) = landmark_suffix(cat) else {
                continue;
            };
            let phrases: Vec<String> =
                group.iter().map(|l: &LandmarkPhrase| l.surface(&record.sub_instruction)).collect();
            clauses.push(format!("The {}{suffix}", phrases.join(", ")));
        }
    }
    if opts.parts.distinctive && !record.distinctive_objects.is_empty() {
        clauses.push(format!("{DISTINCTIVE_PREFIX}{}{DISTINCTIVE_SUFFIX}", record.distinctive_objects.join(", ")));
    }
    clauses.join(" ")
}
