//! Hint-quality evaluation: sub-instruction BLEU, ambiguity-clause accuracy
//! against the environment and distinctive-object accuracy against the
//! agent's selected view.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hints::{classify_ambiguity, parse_hint, AmbiguityCategory, ClauseKind, ParsedHint};
use crate::lexicon::{singularize, Lexicon};
use crate::metrics::bleu;
use crate::train::{GeneratedHint, PreparedEpisode, WorldSet};
use crate::world::{candidate_views, CandidateView};

pub const ANALYSIS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Count a multi-landmark clause as true when any listed item matches
    /// instead of requiring all of them.
    pub any_true: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub total: usize,
    pub correct: usize,
    /// `None` for an empty bucket.
    pub accuracy: Option<f64>,
}

impl Bucket {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += ok as usize;
        self.accuracy = Some(self.correct as f64 / self.total as f64);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DistinctiveTable {
    pub exact_right: Bucket,
    pub exact_wrong: Bucket,
    pub object_right: Bucket,
    pub object_wrong: Bucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HintQualityReport {
    pub schema_version: u32,
    pub any_true: bool,
    pub evaluated_steps: usize,
    /// Generated/gold pairs that entered the BLEU corpus.
    pub bleu_pairs: usize,
    pub bleu1: Option<f64>,
    pub bleu4: Option<f64>,
    pub ambiguity: BTreeMap<AmbiguityCategory, Bucket>,
    pub distinctive: DistinctiveTable,
    /// Hints whose sub-instruction clause could not be read.
    pub unparseable_hints: usize,
    /// Clauses matching no template.
    pub unknown_clauses: usize,
}

impl HintQualityReport {
    pub fn check_invariants(&self) -> Result<()> {
        let d = &self.distinctive;
        for (exact, object) in [(d.exact_right, d.object_right), (d.exact_wrong, d.object_wrong)] {
            if exact.correct > object.correct || exact.total != object.total {
                return Err(Error::Invalid("exact-mode accuracy exceeds object-mode accuracy".into()));
            }
        }
        Ok(())
    }
}

/// Sub-instruction tokens of a hint; empty when the hint is unparseable.
pub fn sub_instruction_tokens(text: &str, lexicon: &Lexicon) -> Vec<String> {
    parse_hint(text, lexicon).map(|p| p.sub_instruction).unwrap_or_default()
}

/// Corpus BLEU-1 and BLEU-4 over sub-instruction clauses.
pub fn sub_instruction_bleu(generated: &[&str], gold: &[&str]) -> Result<(f64, f64)> {
    let lexicon = Lexicon::bundled();
    let cand: Vec<Vec<String>> = generated.iter().map(|t| sub_instruction_tokens(t, lexicon)).collect();
    let refs: Vec<Vec<String>> = gold.iter().map(|t| sub_instruction_tokens(t, lexicon)).collect();
    Ok((bleu(1, &cand, &refs)?, bleu(4, &cand, &refs)?))
}

fn judge(results: &[bool], any_true: bool) -> bool {
    if any_true {
        results.iter().any(|&b| b)
    } else {
        !results.is_empty() && results.iter().all(|&b| b)
    }
}

fn ambiguity_clauses(
    parsed: &ParsedHint,
    views: &[CandidateView],
    target: usize,
    opts: &AnalysisOptions,
    out: &mut BTreeMap<AmbiguityCategory, Bucket>,
) -> Result<()> {
    for clause in &parsed.clauses {
        let ClauseKind::Landmarks(cat) = clause.kind else {
            continue;
        };
        let bucket = out.entry(cat).or_default();
        if !clause.valid {
            bucket.add(false);
            continue;
        }
        let landmarks = parsed.landmark_groups.get(&cat).map(Vec::as_slice).unwrap_or(&[]);
        let (truth, _) = classify_ambiguity(landmarks, views, target)?;
        let results: Vec<bool> = truth.iter().map(|&t| t == cat).collect();
        bucket.add(judge(&results, opts.any_true));
    }
    Ok(())
}

/// (object-mode, exact-mode) verdict for one listed object phrase.
fn distinctive_verdict(phrase: &str, views: &[CandidateView], selected: usize, lexicon: &Lexicon) -> (bool, bool) {
    let Some(last) = phrase.split_whitespace().last() else {
        return (false, false);
    };
    let noun = lexicon.noun_of(last).unwrap_or_else(|| singularize(last));
    let in_selected = views[selected].has_noun(&noun);
    let elsewhere = views.iter().enumerate().any(|(i, v)| i != selected && v.has_noun(&noun));
    let object = in_selected && !elsewhere;
    (object, object && views[selected].has_phrase(phrase))
}

pub fn analyze(hints: &[GeneratedHint], worlds: &WorldSet, opts: &AnalysisOptions) -> Result<HintQualityReport> {
    let lexicon = Lexicon::bundled();
    let mut report = HintQualityReport {
        schema_version: ANALYSIS_SCHEMA_VERSION,
        any_true: opts.any_true,
        evaluated_steps: hints.len(),
        bleu_pairs: 0,
        bleu1: None,
        bleu4: None,
        ambiguity: AmbiguityCategory::VISIBILITY.iter().map(|&c| (c, Bucket::default())).collect(),
        distinctive: DistinctiveTable::default(),
        unparseable_hints: 0,
        unknown_clauses: 0,
    };
    let mut cand = Vec::new();
    let mut refs = Vec::new();
    for h in hints {
        let parsed = parse_hint(&h.text, lexicon).ok();
        if parsed.is_none() {
            report.unparseable_hints += 1;
        }
        if let Some(gold) = &h.gold {
            cand.push(parsed.as_ref().map(|p| p.sub_instruction.clone()).unwrap_or_default());
            refs.push(sub_instruction_tokens(gold, lexicon));
        }
        let Some(parsed) = parsed else { continue };
        report.unknown_clauses += parsed.clauses.iter().filter(|c| c.kind == ClauseKind::Unknown).count();
        let (world, _) = worlds.get(&h.world_id)?;
        let views = candidate_views(world, h.node)?;
        let index_of = |n| views.iter().position(|v| v.neighbor == n);

        if let Some(target) = h.teacher_view.and_then(index_of) {
            ambiguity_clauses(&parsed, views, target, opts, &mut report.ambiguity)?;
        }

        let Some(selected) = h.selected_view.and_then(index_of) else {
            continue;
        };
        let Some(valid) = parsed.clause_valid(ClauseKind::Distinctive) else {
            continue;
        };
        let verdicts: Vec<(bool, bool)> = if valid {
            parsed.distinctive_objects.iter().map(|p| distinctive_verdict(p, views, selected, lexicon)).collect()
        } else {
            Vec::new()
        };
        let object = judge(&verdicts.iter().map(|v| v.0).collect::<Vec<_>>(), opts.any_true);
        let exact = judge(&verdicts.iter().map(|v| v.1).collect::<Vec<_>>(), opts.any_true);
        let d = &mut report.distinctive;
        if h.selected_view == h.teacher_view {
            d.object_right.add(object);
            d.exact_right.add(exact);
        } else {
            d.object_wrong.add(object);
            d.exact_wrong.add(exact);
        }
    }
    report.bleu_pairs = cand.len();
    if !cand.is_empty() {
        report.bleu1 = Some(bleu(1, &cand, &refs)?);
        report.bleu4 = Some(bleu(4, &cand, &refs)?);
    }
    Ok(report)
}

/// Gold hints laid out as if generated along teacher rollouts; the
/// closed-loop input for [`analyze`].
pub fn gold_as_generated(episodes: &[PreparedEpisode]) -> Vec<GeneratedHint> {
    let mut out = Vec::new();
    for prep in episodes {
        let ep = &prep.episode;
        for (t, gold) in prep.gold_hints.iter().enumerate() {
            out.push(GeneratedHint {
                schema_version: crate::train::GENERATED_HINT_SCHEMA_VERSION,
                episode_id: ep.id.clone(),
                world_id: ep.world_id.clone(),
                step_index: t,
                node: ep.path[t],
                selected_view: Some(ep.path[t + 1]),
                teacher_view: Some(ep.path[t + 1]),
                text: gold.clone(),
                gold: Some(gold.clone()),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::train::{build_vocab, prepare_episodes, GENERATED_HINT_SCHEMA_VERSION};
    use crate::world::{generate_corpus, CorpusConfig, Edge, VisualObject, World};

    /// Hub node 0 with views toward 1 (red sofa, lamp), 2 (lamp, clock)
    /// and 3 (wooden dining table).
    fn hub() -> WorldSet {
        let view = |n: u32, objs: Vec<VisualObject>| CandidateView {
            neighbor: n,
            heading: n as f64 - 2.0,
            elevation: 0.0,
            objects: objs,
        };
        let hub_views = vec![
            view(1, vec![VisualObject::new("sofa", &["red"]), VisualObject::new("lamp", &[])]),
            view(2, vec![VisualObject::new("lamp", &[]), VisualObject::new("clock", &[])]),
            view(3, vec![VisualObject::new("table", &["wooden", "dining"])]),
        ];
        let mut views = BTreeMap::from([(0, hub_views)]);
        for n in 1..=3 {
            views.insert(n, vec![view(0, vec![VisualObject::new("rug", &[])])]);
        }
        let world = World {
            schema_version: crate::world::WORLD_SCHEMA_VERSION,
            id: "hub".into(),
            nodes: (0..=3).map(|n| (n, [n as f64, 0.0, 0.0])).collect(),
            edges: (1..=3).map(|b| Edge { a: 0, b, length: 1.0 }).collect(),
            views,
            object_lexicon_seed: 0,
        };
        WorldSet::new([&world])
    }

    fn hint(text: &str, selected: u32, teacher: u32) -> GeneratedHint {
        GeneratedHint {
            schema_version: GENERATED_HINT_SCHEMA_VERSION,
            episode_id: "e".into(),
            world_id: "hub".into(),
            step_index: 0,
            node: 0,
            selected_view: Some(selected),
            teacher_view: Some(teacher),
            text: text.into(),
            gold: None,
        }
    }

    fn run(hints: &[GeneratedHint], any_true: bool) -> HintQualityReport {
        let r = analyze(hints, &hub(), &AnalysisOptions { any_true }).unwrap();
        r.check_invariants().unwrap();
        r
    }

    fn acc(r: &HintQualityReport, c: AmbiguityCategory) -> (usize, usize) {
        (r.ambiguity[&c].correct, r.ambiguity[&c].total)
    }

    const SUB: &str = "The pass the sofa needs to be executed.";

    #[test]
    fn misleading_claim_for_target_landmark_is_false() {
        let r = run(&[hint(&format!("{SUB} The sofa are misleading."), 1, 1)], false);
        assert_eq!(acc(&r, AmbiguityCategory::MissingLandmarks), (0, 1));
        let r = run(&[hint(&format!("{SUB} The sofa are misleading."), 1, 3)], false);
        assert_eq!(acc(&r, AmbiguityCategory::MissingLandmarks), (1, 1));
    }

    #[test]
    fn multiple_claim_for_unique_landmark_is_false() {
        let r = run(&[hint(&format!("{SUB} The sofa are observed in multiple viewpoints."), 1, 1)], false);
        assert_eq!(acc(&r, AmbiguityCategory::MultipleLandmarks), (0, 1));
        let r = run(&[hint(&format!("{SUB} The lamp are observed in multiple viewpoints."), 1, 1)], false);
        assert_eq!(acc(&r, AmbiguityCategory::MultipleLandmarks), (1, 1));
        let r = run(&[hint(&format!("{SUB} The sofa are observed."), 1, 1)], false);
        assert_eq!(acc(&r, AmbiguityCategory::TargetLandmarks), (1, 1));
        let r = run(&[hint(&format!("{SUB} The piano are not observed."), 1, 1)], false);
        assert_eq!(acc(&r, AmbiguityCategory::InvisibleLandmarks), (1, 1));
    }

    #[test]
    fn any_true_relaxes_lists() {
        let text = format!("{SUB} The sofa, piano are observed.");
        assert_eq!(acc(&run(&[hint(&text, 1, 1)], false), AmbiguityCategory::TargetLandmarks), (0, 1));
        assert_eq!(acc(&run(&[hint(&text, 1, 1)], true), AmbiguityCategory::TargetLandmarks), (1, 1));
    }

    #[test]
    fn malformed_clause_counts_as_false() {
        let r = run(&[hint(&format!("{SUB} The sofa are observed"), 1, 1)], false);
        assert_eq!(acc(&r, AmbiguityCategory::TargetLandmarks), (0, 1));
        let r = run(&[hint(&format!("{SUB} However, wooden dining table are in the targeted view"), 3, 3)], false);
        assert_eq!((r.distinctive.object_right.correct, r.distinctive.object_right.total), (0, 1));
    }

    #[test]
    fn distinctive_modes_and_buckets() {
        let right = hint(&format!("{SUB} However, wooden dining table are in the targeted view."), 3, 3);
        let attr_wrong = hint(&format!("{SUB} However, glass table are in the targeted view."), 3, 3);
        let shared = hint(&format!("{SUB} However, lamp are in the targeted view."), 2, 1);
        let r = run(&[right, attr_wrong, shared], false);
        let d = r.distinctive;
        assert_eq!((d.object_right.correct, d.object_right.total), (2, 2));
        assert_eq!((d.exact_right.correct, d.exact_right.total), (1, 2));
        assert_eq!((d.object_wrong.correct, d.object_wrong.total), (0, 1));
        assert_eq!(d.exact_wrong.accuracy, Some(0.0));
    }

    #[test]
    fn hints_without_clauses_leave_buckets_empty() {
        let mut h = hint("garbage", 1, 1);
        h.gold = Some(SUB.into());
        let r = run(&[h, hint(SUB, 1, 1)], false);
        assert_eq!(r.unparseable_hints, 1);
        assert!(r.ambiguity.values().all(|b| b.accuracy.is_none()));
        assert_eq!(r.distinctive.object_right.accuracy, None);
        assert_eq!(r.bleu_pairs, 1);
        assert_eq!(r.bleu1, Some(0.0));
    }

    #[test]
    fn sub_instruction_bleu_by_hand() {
        // Candidate "go straight and stop" against "go left and stop":
        // unigram precision 3/4, bigram 1/3 ("and stop"), no brevity penalty.
        let g = ["The go straight and stop needs to be executed. The lamp are observed."];
        let r = ["The go left and stop needs to be executed."];
        let (b1, b4) = sub_instruction_bleu(&g, &r).unwrap();
        assert!((b1 - 0.75).abs() < 1e-12);
        assert_eq!(b4, 0.0);
        let (b1, b4) = sub_instruction_bleu(&r, &r).unwrap();
        assert_eq!((b1, b4), (1.0, 1.0));
    }

    #[test]
    fn gold_hints_score_perfectly() {
        let cfg = CorpusConfig {
            train_worlds: 4,
            unseen_worlds: 0,
            train_episodes: 200,
            unseen_episodes: 0,
            ..Default::default()
        };
        let corpus = generate_corpus(6, &cfg).unwrap();
        let worlds = WorldSet::new(corpus.worlds());
        let vocab = build_vocab(&corpus.train_episodes, &worlds).unwrap();
        let preps = prepare_episodes(&corpus.train_episodes, &worlds, &vocab, &Default::default(), 80).unwrap();
        let r = analyze(&gold_as_generated(&preps), &worlds, &AnalysisOptions::default()).unwrap();
        assert_eq!(r.unparseable_hints, 0);
        assert_eq!(r.unknown_clauses, 0);
        assert_eq!((r.bleu1, r.bleu4), (Some(1.0), Some(1.0)));
        for (c, b) in &r.ambiguity {
            assert!(b.total > 0, "{c:?}");
            assert_eq!(b.accuracy, Some(1.0), "{c:?}");
        }
        let d = r.distinctive;
        assert!(d.exact_right.total > 0);
        assert_eq!(d.exact_right.accuracy, Some(1.0));
        assert_eq!(d.object_right.accuracy, Some(1.0));
        assert_eq!(d.exact_wrong.total, 0);
    }
}
