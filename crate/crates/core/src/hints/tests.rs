use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::lexicon::Lexicon;
use crate::text::tokenize;
use crate::world::{candidate_views, generate_corpus, CorpusConfig, Episode, World};

fn sub(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn hallway_record() -> HintRecord {
    let sub_instruction = sub("walk into the hallway");
    let landmarks = extract_landmarks(&sub_instruction, Lexicon::bundled());
    HintRecord {
        schema_version: HINT_SCHEMA_VERSION,
        episode_id: "e".into(),
        step_index: 0,
        sub_instruction,
        landmark_groups: BTreeMap::from([(AmbiguityCategory::MissingLandmarks, landmarks)]),
        distinctive_objects: vec!["wooden dining table".into(), "marble countertop".into()],
        step_category: AmbiguityCategory::MissingLandmarks,
        rendered: String::new(),
    }
}

fn same_content(parsed: &ParsedHint, record: &HintRecord) -> bool {
    parsed.sub_instruction == record.sub_instruction
        && parsed.landmark_groups == record.landmark_groups
        && parsed.distinctive_objects == record.distinctive_objects
        && parsed.clauses.iter().all(|c| c.valid)
}

#[test]
fn renders_missing_landmark_example() {
    let text = render_hint(&hallway_record());
    assert_eq!(
        text,
        "The walk into the hallway needs to be executed. The hallway are misleading. \
         However, wooden dining table, marble countertop are in the targeted view."
    );
    let parsed = parse_hint(&text, Lexicon::bundled()).unwrap();
    assert!(same_content(&parsed, &hallway_record()));
}

#[test]
fn landmark_free_step_renders_only_the_sub_clause() {
    let record = HintRecord {
        sub_instruction: sub("make a right turn"),
        landmark_groups: BTreeMap::new(),
        distinctive_objects: vec![],
        step_category: AmbiguityCategory::NoLandmarks,
        ..hallway_record()
    };
    assert_eq!(render_hint(&record), "The make a right turn needs to be executed.");
}

#[test]
fn ablated_parts_drop_their_clauses() {
    let r = hallway_record();
    let opts = |sub, ambiguity, distinctive| RenderOptions {
        parts: HintParts { sub, ambiguity, distinctive },
        single_clause: false,
    };
    let full = render_hint_with(&r, &opts(true, true, true));
    let sub_only = render_hint_with(&r, &opts(true, false, false));
    let sub_amb = render_hint_with(&r, &opts(true, true, false));
    assert_eq!(sub_only, "The walk into the hallway needs to be executed.");
    assert!(full.starts_with(&sub_amb) && sub_amb.starts_with(&sub_only));
    assert_eq!(render_hint_with(&r, &opts(false, false, false)), "");
}

#[test]
fn one_word_sub_instruction_parses() {
    let p = parse_hint("The walk needs to be executed.", Lexicon::bundled()).unwrap();
    assert_eq!(p.sub_instruction, vec!["walk"]);
    assert!(p.landmark_groups.is_empty() && p.distinctive_objects.is_empty());
}

#[test]
fn malformed_clauses_are_flagged() {
    let lex = Lexicon::bundled();
    let p = parse_hint("The walk needs to be executed. However, lamp are in the targeted view", lex).unwrap();
    assert_eq!(p.clause_valid(ClauseKind::Distinctive), Some(false));
    let p = parse_hint("The walk needs to be executed. Something else entirely.", lex).unwrap();
    assert_eq!(p.clauses.last().unwrap().kind, ClauseKind::Unknown);
    assert!(matches!(parse_hint("walk needs to be executed.", lex), Err(crate::Error::Parse { .. })));
    assert!(matches!(parse_hint("The walk", lex), Err(crate::Error::Parse { .. })));
    // The suffix overlaps the prefix here; this used to slice out of range.
    assert!(parse_hint("The needs to be executed.", lex).is_err());
}

#[test]
fn multiple_suffix_wins_over_observed() {
    let text = "The pass the sofa needs to be executed. The sofa are observed in multiple viewpoints.";
    let p = parse_hint(text, Lexicon::bundled()).unwrap();
    assert!(p.landmark_groups.contains_key(&AmbiguityCategory::MultipleLandmarks));
    assert!(!p.landmark_groups.contains_key(&AmbiguityCategory::TargetLandmarks));
}

fn small_corpus(seed: u64, episodes: usize) -> (BTreeMap<String, World>, Vec<Episode>) {
    let cfg = CorpusConfig {
        train_worlds: 8,
        unseen_worlds: 0,
        train_episodes: episodes,
        unseen_episodes: 0,
        ..Default::default()
    };
    let c = generate_corpus(seed, &cfg).unwrap();
    (c.train_worlds.into_iter().map(|w| (w.id.clone(), w)).collect(), c.train_episodes)
}

/// Independent exclusivity check: each listed object belongs to the target
/// view and its head noun appears in no other view.
fn brute_force_exclusive(record: &HintRecord, world: &World, ep: &Episode) -> bool {
    let views = candidate_views(world, ep.path[record.step_index]).unwrap();
    let target = ep.path[record.step_index + 1];
    record.distinctive_objects.iter().all(|phrase| {
        let head = phrase.split(' ').next_back().unwrap();
        views.iter().all(|v| {
            let has = v.objects.iter().any(|o| o.head_noun == head);
            if v.neighbor == target {
                has && v.objects.iter().any(|o| &o.phrase == phrase)
            } else {
                !has
            }
        })
    })
}

#[test]
fn dataset_invariants_over_generated_corpus() {
    let (worlds, episodes) = small_corpus(3, 1000);
    let records = build_hint_dataset(&episodes, &worlds, &RenderOptions::default()).unwrap();
    let by_id: BTreeMap<&str, &Episode> = episodes.iter().map(|e| (e.id.as_str(), e)).collect();
    assert_eq!(records.len(), episodes.iter().map(Episode::hops).sum::<usize>());
    let lex = Lexicon::bundled();
    for r in &records {
        let ep = by_id[r.episode_id.as_str()];
        let world = &worlds[&ep.world_id];
        let parsed = parse_hint(&r.rendered, lex).unwrap();
        assert!(same_content(&parsed, r), "{}", r.rendered);
        assert!(brute_force_exclusive(r, world, ep), "{}", r.rendered);
        assert!(r.distinctive_objects.len() <= MAX_DISTINCTIVE);
        if r.step_category == AmbiguityCategory::TargetLandmarks {
            assert!(r.distinctive_objects.is_empty());
        }
        let expected = r.landmark_groups.keys().max_by_key(|c| c.precedence());
        match expected {
            Some(&c) => assert_eq!(r.step_category, c),
            None => assert_eq!(r.step_category, AmbiguityCategory::NoLandmarks),
        }
        assert!(tokenize(&r.rendered).len() < 80);
    }
    let text = write_hint_records(&records);
    assert_eq!(read_hint_records(&text).unwrap(), records);
}

#[test]
fn dataset_is_order_independent_and_deterministic() {
    let (worlds, mut episodes) = small_corpus(4, 60);
    let a = build_hint_dataset(&episodes, &worlds, &RenderOptions::default()).unwrap();
    episodes.reverse();
    let b = build_hint_dataset(&episodes, &worlds, &RenderOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stats_count_every_record() {
    let (worlds, episodes) = small_corpus(5, 300);
    let records = build_hint_dataset(&episodes, &worlds, &RenderOptions::default()).unwrap();
    let stats = dataset_stats(&[("train", &records)]).unwrap();
    assert_eq!(stats.total, records.len());
    assert_eq!(stats.histogram.values().sum::<usize>(), records.len());
    let ranking = stats.ranking();
    assert!(ranking.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(dataset_stats(&[("train", &[])]).is_err());
}

#[test]
fn old_schema_is_rejected() {
    let mut r = hallway_record();
    r.rendered = render_hint(&r);
    let line = serde_json::to_string(&r).unwrap().replace("\"schema_version\":1", "\"schema_version\":7");
    assert!(matches!(read_hint_records(&line), Err(crate::Error::Schema { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn render_parse_round_trip(seed in 0u64..10_000, single in any::<bool>()) {
        let (worlds, episodes) = small_corpus(seed, 4);
        let opts = RenderOptions { parts: HintParts::ALL, single_clause: single };
        for ep in &episodes {
            let world = &worlds[&ep.world_id];
            for hop in 0..ep.hops() {
                let r = build_hint_record(ep, world, hop, &opts, Lexicon::bundled()).unwrap();
                let parsed = parse_hint(&r.rendered, Lexicon::bundled()).unwrap();
                prop_assert_eq!(&parsed.sub_instruction, &r.sub_instruction);
                prop_assert_eq!(&parsed.distinctive_objects, &r.distinctive_objects);
                if !single {
                    prop_assert_eq!(&parsed.landmark_groups, &r.landmark_groups);
                }
            }
        }
    }

    /// Decoded hints are arbitrary token soup; parsing must never panic.
    #[test]
    fn parse_never_panics(words in prop::collection::vec(prop::sample::select(vec![
        "The", "the", "needs", "to", "be", "executed.", "executed", "are", "misleading.", "However,",
        "in", "targeted", "view.", ",", ".", "lamp", "sofa,", "observed", "multiple", "viewpoints.", "",
    ]), 0..16)) {
        let text = words.join(" ");
        let _ = parse_hint(&text, Lexicon::bundled());
        let _ = parse_hint(&words.concat(), Lexicon::bundled());
    }
}
