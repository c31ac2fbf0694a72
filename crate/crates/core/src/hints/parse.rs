use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::render::{landmark_suffix, DISTINCTIVE_PREFIX, DISTINCTIVE_SUFFIX, SUB_PREFIX, SUB_SUFFIX};
use super::{extract_landmarks, AmbiguityCategory, LandmarkPhrase};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClauseKind {
    SubInstruction,
    Landmarks(AmbiguityCategory),
    Distinctive,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseReport {
    pub kind: ClauseKind,
    /// Byte offset of the clause in the parsed text.
    pub offset: usize,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedHint {
    pub sub_instruction: Vec<String>,
    pub landmark_groups: BTreeMap<AmbiguityCategory, Vec<LandmarkPhrase>>,
    pub distinctive_objects: Vec<String>,
    pub clauses: Vec<ClauseReport>,
}

impl ParsedHint {
    pub fn clause_valid(&self, kind: ClauseKind) -> Option<bool> {
        let mut found = None;
        for c in self.clauses.iter().filter(|c| c.kind == kind) {
            found = Some(found.unwrap_or(true) && c.valid);
        }
        found
    }

    /// Landmark clauses whose text could not be read, keyed by the category
    /// their prefix/suffix suggested (if any).
    pub fn invalid_clauses(&self) -> impl Iterator<Item = &ClauseReport> {
        self.clauses.iter().filter(|c| !c.valid)
    }
}

const LANDMARK_ORDER: [AmbiguityCategory; 4] = [
    // Longest suffix first: "are observed in multiple viewpoints." must win
    // over "are observed.".
    AmbiguityCategory::MultipleLandmarks,
    AmbiguityCategory::InvisibleLandmarks,
    AmbiguityCategory::MissingLandmarks,
    AmbiguityCategory::TargetLandmarks,
];

fn rebuild_landmark(phrase: &str, sub: &[String], known: &[LandmarkPhrase], lexicon: &Lexicon) -> LandmarkPhrase {
    if let Some(found) = known.iter().find(|l| l.surface(sub) == phrase) {
        return found.clone();
    }
    let toks: Vec<&str> = phrase.split_whitespace().collect();
    let (head, attrs) = toks.split_last().map(|(h, a)| (*h, a)).unwrap_or(("", &[]));
    LandmarkPhrase {
        head_noun: lexicon.noun_of(head).unwrap_or_else(|| head.to_string()),
        attributes: attrs.iter().map(|s| s.to_string()).collect(),
        source_span: 0..0,
    }
}

fn split_list(inner: &str) -> Vec<String> {
    inner.split(", ").map(|s| s.trim().to_string()).collect()
}

/// Inverse of the hint templates. The sub-instruction clause is mandatory;
/// every later clause is parsed independently and flagged when malformed.
pub fn parse_hint(text: &str, lexicon: &Lexicon) -> Result<ParsedHint> {
    let lead = text.len() - text.trim_start().len();
    let body = &text[lead..];
    if !body.starts_with(SUB_PREFIX) {
        return Err(Error::Parse { offset: lead, message: "expected sub-instruction clause".into() });
    }
    let Some(end) = body[SUB_PREFIX.len()..].find(SUB_SUFFIX).map(|i| i + SUB_PREFIX.len()) else {
        return Err(Error::Parse { offset: lead, message: "unterminated sub-instruction clause".into() });
    };
    let sub_text = &body[SUB_PREFIX.len()..end];
    if sub_text.trim().is_empty() {
        return Err(Error::Parse { offset: lead + SUB_PREFIX.len(), message: "empty sub-instruction".into() });
    }
    let sub_instruction: Vec<String> = sub_text.split_whitespace().map(str::to_string).collect();
    let known = extract_landmarks(&sub_instruction, lexicon);

    let mut parsed = ParsedHint {
        sub_instruction,
        landmark_groups: BTreeMap::new(),
        distinctive_objects: Vec::new(),
        clauses: vec![ClauseReport { kind: ClauseKind::SubInstruction, offset: lead, valid: true }],
    };

    let mut pos = lead + end + SUB_SUFFIX.len();
    while pos < text.len() {
        let skip = text[pos..].len() - text[pos..].trim_start().len();
        pos += skip;
        if pos >= text.len() {
            break;
        }
        let (clause, terminated) = match text[pos..].find('.') {
            Some(dot) => (&text[pos..pos + dot + 1], true),
            None => (&text[pos..], false),
        };
        let offset = pos;
        pos += clause.len();

        if clause.starts_with(DISTINCTIVE_PREFIX) {
            let inner = clause
                .strip_prefix(DISTINCTIVE_PREFIX)
                .and_then(|c| c.strip_suffix(DISTINCTIVE_SUFFIX))
                .filter(|c| terminated && !c.trim().is_empty());
            if let Some(inner) = inner {
                parsed.distinctive_objects.extend(split_list(inner));
            }
            parsed.clauses.push(ClauseReport { kind: ClauseKind::Distinctive, offset, valid: inner.is_some() });
            continue;
        }

        let mut matched = None;
        if let Some(rest) = clause.strip_prefix("The ") {
            for cat in LANDMARK_ORDER {
                let suffix = landmark_suffix(cat).expect("visibility category");
                let trimmed = suffix.trim_end_matches('.');
                if let Some(inner) = rest.strip_suffix(suffix).filter(|_| terminated) {
                    matched = Some((cat, Some(inner)));
                    break;
                }
                if !terminated && rest.ends_with(trimmed) {
                    matched = Some((cat, None));
                    break;
                }
            }
        }
        match matched {
            Some((cat, Some(inner))) if !inner.trim().is_empty() => {
                let group = parsed.landmark_groups.entry(cat).or_default();
                for phrase in split_list(inner) {
                    group.push(rebuild_landmark(&phrase, &parsed.sub_instruction, &known, lexicon));
                }
                parsed.clauses.push(ClauseReport { kind: ClauseKind::Landmarks(cat), offset, valid: true });
            }
            Some((cat, _)) => {
                parsed.clauses.push(ClauseReport { kind: ClauseKind::Landmarks(cat), offset, valid: false })
            }
            None => parsed.clauses.push(ClauseReport { kind: ClauseKind::Unknown, offset, valid: false }),
        }
    }
    Ok(parsed)
}
