use std::collections::BTreeSet;

use super::{AmbiguityCategory, LandmarkPhrase};
use crate::error::{Error, Result};
use crate::lexicon::singularize;
use crate::world::CandidateView;

pub const MAX_DISTINCTIVE: usize = 3;

/// Noun-level visibility; attributes are not compared.
pub fn landmark_visible(landmark: &LandmarkPhrase, view: &CandidateView) -> bool {
    let head = singularize(&landmark.head_noun);
    view.objects.iter().any(|o| singularize(&o.head_noun) == head || o.head_noun == landmark.head_noun)
}

fn check_index(target_idx: usize, len: usize) -> Result<()> {
    if target_idx >= len {
        return Err(Error::IndexOutOfRange { index: target_idx, len });
    }
    Ok(())
}

/// Labels each landmark by where it is visible and picks one label for the
/// step: Missing > Multiple > Target > Invisible, NoLandmarks when empty.
pub fn classify_ambiguity(
    landmarks: &[LandmarkPhrase],
    views: &[CandidateView],
    target_idx: usize,
) -> Result<(Vec<AmbiguityCategory>, AmbiguityCategory)> {
    check_index(target_idx, views.len())?;
    let per: Vec<AmbiguityCategory> = landmarks
        .iter()
        .map(|l| {
            let in_target = landmark_visible(l, &views[target_idx]);
            let elsewhere = views.iter().enumerate().any(|(i, v)| i != target_idx && landmark_visible(l, v));
            match (in_target, elsewhere) {
                (true, false) => AmbiguityCategory::TargetLandmarks,
                (true, true) => AmbiguityCategory::MultipleLandmarks,
                (false, true) => AmbiguityCategory::MissingLandmarks,
                (false, false) => AmbiguityCategory::InvisibleLandmarks,
            }
        })
        .collect();
    let step = per.iter().copied().max_by_key(|c| c.precedence()).unwrap_or(AmbiguityCategory::NoLandmarks);
    Ok((per, step))
}

/// Phrases of target-view objects whose head noun no other candidate view
/// shows, in annotation order, at most `max_count`.
pub fn select_distinctive_objects(views: &[CandidateView], target_idx: usize, max_count: usize) -> Result<Vec<String>> {
    check_index(target_idx, views.len())?;
    let elsewhere: BTreeSet<&str> = views
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .flat_map(|(_, v)| v.objects.iter().map(|o| o.head_noun.as_str()))
        .collect();
    let mut out: Vec<String> = Vec::new();
    for o in &views[target_idx].objects {
        if out.len() == max_count {
            break;
        }
        if !elsewhere.contains(o.head_noun.as_str()) && !out.contains(&o.phrase) {
            out.push(o.phrase.clone());
        }
    }
    Ok(out)
}
