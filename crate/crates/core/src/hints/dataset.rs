use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    classify_ambiguity, extract_landmarks, render_hint_with, select_distinctive_objects, AmbiguityCategory, HintRecord,
    LandmarkPhrase, RenderOptions, HINT_SCHEMA_VERSION, MAX_DISTINCTIVE,
};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::world::{candidate_views, Episode, World};

/// Hint for hop `hop` of `episode`: the views are those at the hop's source
/// node, the target is the view toward the next path node.
pub fn build_hint_record(
    episode: &Episode,
    world: &World,
    hop: usize,
    opts: &RenderOptions,
    lexicon: &Lexicon,
) -> Result<HintRecord> {
    if hop >= episode.hops() {
        return Err(Error::IndexOutOfRange { index: hop, len: episode.hops() });
    }
    let sub_instruction = episode
        .sub_instruction(hop)
        .ok_or_else(|| Error::Invalid(format!("episode {} has no span for hop {hop}", episode.id)))?
        .to_vec();
    let views = candidate_views(world, episode.path[hop])?;
    let target_idx = views
        .iter()
        .position(|v| v.neighbor == episode.path[hop + 1])
        .ok_or_else(|| Error::Invalid(format!("episode {} hop {hop} has no edge", episode.id)))?;

    let landmarks = extract_landmarks(&sub_instruction, lexicon);
    let (per, step_category) = classify_ambiguity(&landmarks, views, target_idx)?;
    let mut landmark_groups: BTreeMap<AmbiguityCategory, Vec<LandmarkPhrase>> = BTreeMap::new();
    for (l, cat) in landmarks.into_iter().zip(per) {
        landmark_groups.entry(cat).or_default().push(l);
    }
    let distinctive_objects = if step_category == AmbiguityCategory::TargetLandmarks {
        Vec::new()
    } else {
        select_distinctive_objects(views, target_idx, MAX_DISTINCTIVE)?
    };
    let mut record = HintRecord {
        schema_version: HINT_SCHEMA_VERSION,
        episode_id: episode.id.clone(),
        step_index: hop,
        sub_instruction,
        landmark_groups,
        distinctive_objects,
        step_category,
        rendered: String::new(),
    };
    record.rendered = render_hint_with(&record, opts);
    Ok(record)
}

/// One record per (episode, hop), ordered by episode id then hop.
pub fn build_hint_dataset(
    episodes: &[Episode],
    worlds: &BTreeMap<String, World>,
    opts: &RenderOptions,
) -> Result<Vec<HintRecord>> {
    let lexicon = Lexicon::bundled();
    let mut records = Vec::new();
    for ep in episodes {
        let world = worlds.get(&ep.world_id).ok_or_else(|| Error::UnknownWorld(ep.world_id.clone()))?;
        for hop in 0..ep.hops() {
            records.push(build_hint_record(ep, world, hop, opts, lexicon)?);
        }
    }
    records.sort_by(|a, b| (&a.episode_id, a.step_index).cmp(&(&b.episode_id, b.step_index)));
    Ok(records)
}

pub fn write_hint_records(records: &[HintRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_hint_records(text: &str) -> Result<Vec<HintRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let r: HintRecord = serde_json::from_str(l)?;
            if r.schema_version != HINT_SCHEMA_VERSION {
                return Err(Error::Schema {
                    what: "hint record",
                    found: r.schema_version,
                    expected: HINT_SCHEMA_VERSION,
                });
            }
            Ok(r)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub histogram: BTreeMap<AmbiguityCategory, usize>,
    pub per_split: BTreeMap<String, usize>,
}

impl DatasetStats {
    /// Categories sorted by count, largest first.
    pub fn ranking(&self) -> Vec<(AmbiguityCategory, usize)> {
        let mut r: Vec<_> = self.histogram.iter().map(|(&c, &n)| (c, n)).collect();
        r.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        r
    }
}

pub fn dataset_stats(splits: &[(&str, &[HintRecord])]) -> Result<DatasetStats> {
    let total: usize = splits.iter().map(|(_, r)| r.len()).sum();
    if total == 0 {
        return Err(Error::UndefinedInput("empty hint dataset".into()));
    }
    let mut histogram = BTreeMap::new();
    let mut per_split = BTreeMap::new();
    for (name, records) in splits {
        *per_split.entry(name.to_string()).or_insert(0) += records.len();
        for r in records.iter() {
            *histogram.entry(r.step_category).or_insert(0) += 1;
        }
    }
    Ok(DatasetStats { total, histogram, per_split })
}
