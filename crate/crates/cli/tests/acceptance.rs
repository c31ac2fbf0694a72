//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits non-zero when any fails. Training criteria share one set of
//! runs: 5 seeds with full hints, 5 navigation-only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use navhint::analysis::{analyze, gold_as_generated, AnalysisOptions, Bucket, HintQualityReport};
use navhint::hints::{build_hint_dataset, dataset_stats, parse_hint, AmbiguityCategory, HintRecord, RenderOptions};
use navhint::lexicon::Lexicon;
use navhint::metrics::{dtw, navigation_error, ndtw, PathPair, DEFAULT_SUCCESS_THRESHOLD};
use navhint::model::ModelParams;
use navhint::train::{
    build_vocab, check_gradients, evaluate_split, prepare_episodes, train_model, RolloutMode, TrainConfig, WorldSet,
};
use navhint::world::{
    candidate_views, generate_corpus, generate_world, CorpusConfig, DistanceTable, Episode, NodeId, World, WorldConfig,
};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const MAX_HINT_TOKENS: usize = 80;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn floyd(world: &World, ids: &[NodeId]) -> Vec<Vec<f64>> {
    let n = ids.len();
    let idx = |v: NodeId| ids.iter().position(|&x| x == v).unwrap();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in &world.edges {
        let (a, b) = (idx(e.a), idx(e.b));
        d[a][b] = d[a][b].min(e.length);
        d[b][a] = d[b][a].min(e.length);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    d
}

/// Shortest distance by enumerating every simple path.
fn brute_distance(world: &World, a: NodeId, b: NodeId) -> f64 {
    fn go(world: &World, at: NodeId, goal: NodeId, seen: &mut Vec<NodeId>, acc: f64, best: &mut f64) {
        if at == goal {
            *best = best.min(acc);
            return;
        }
        for e in &world.edges {
            let next = match (e.a == at, e.b == at) {
                (true, _) => e.b,
                (_, true) => e.a,
                _ => continue,
            };
            if !seen.contains(&next) {
                seen.push(next);
                go(world, next, goal, seen, acc + e.length, best);
                seen.pop();
            }
        }
    }
    let mut best = f64::INFINITY;
    go(world, a, b, &mut vec![a], 0.0, &mut best);
    best
}

/// Every monotone alignment of an n-by-m grid from corner to corner.
fn alignments(n: usize, m: usize) -> Vec<Vec<(usize, usize)>> {
    fn go(i: usize, j: usize, n: usize, m: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        cur.push((i, j));
        if i + 1 == n && j + 1 == m {
            out.push(cur.clone());
        } else {
            for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
                if i + di < n && j + dj < m {
                    go(i + di, j + dj, n, m, cur, out);
                }
            }
        }
        cur.pop();
    }
    let mut out = Vec::new();
    go(0, 0, n, m, &mut Vec::new(), &mut out);
    out
}

/// Simple paths (no repeated node) along edges with 1..=max_len nodes.
fn simple_paths(world: &World, max_len: usize) -> Vec<Vec<NodeId>> {
    let mut out: Vec<Vec<NodeId>> = world.nodes.keys().map(|&v| vec![v]).collect();
    let mut frontier = out.clone();
    for _ in 1..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for n in world.neighbors(*p.last().unwrap()).unwrap() {
                if !p.contains(&n) {
                    let mut q = p.clone();
                    q.push(n);
                    next.push(q);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let world = generate_world(1, &WorldConfig { node_count: 10, ..WorldConfig::default() }).unwrap();
    let table = DistanceTable::new(&world);
    let ids: Vec<NodeId> = world.nodes.keys().copied().collect();
    let d = floyd(&world, &ids);
    let paths = simple_paths(&world, 5);
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let shapes: BTreeMap<(usize, usize), Vec<Vec<(usize, usize)>>> =
        (1..=5).flat_map(|n| (1..=5).map(move |m| (n, m))).map(|(n, m)| ((n, m), alignments(n, m))).collect();

    let mut worst: f64 = 0.0;
    let mut pairs = 0usize;
    for r in &paths {
        let ri: Vec<usize> = r.iter().map(|v| index[v]).collect();
        for p in &paths {
            let pi: Vec<usize> = p.iter().map(|v| index[v]).collect();
            let best = shapes[&(r.len(), p.len())]
                .iter()
                .map(|a| a.iter().map(|&(i, j)| d[ri[i]][pi[j]]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let want = (-best / (r.len() as f64 * DEFAULT_SUCCESS_THRESHOLD)).exp();
            let got = ndtw(&PathPair::new(p.clone(), r.clone()), &table).unwrap();
            worst = worst.max((got - want).abs()).max((dtw(p, r, &table).unwrap() - best).abs());
            pairs += 1;
        }
    }

    let mut ne_worst: f64 = 0.0;
    for seed in 0..10 {
        let w = generate_world(seed, &WorldConfig { node_count: 10, ..WorldConfig::default() }).unwrap();
        let t = DistanceTable::new(&w);
        let start_node = *w.nodes.keys().next().unwrap();
        for &a in w.nodes.keys() {
            for &b in w.nodes.keys() {
                let ne = navigation_error(&PathPair::new(vec![start_node, a], vec![start_node, b]), &t).unwrap();
                ne_worst = ne_worst.max((ne - brute_distance(&w, a, b)).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && ne_worst <= 1e-9 && secs < 10.0,
        format!("{pairs} path pairs, max nDTW/DTW error {worst:.1e}, max NE error {ne_worst:.1e}, {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- 2

fn teacher_sanity() -> Outcome {
    let corpus = generate_corpus(7, &CorpusConfig { train_episodes: 400, ..CorpusConfig::default() }).unwrap();
    let worlds = WorldSet::new(corpus.worlds());
    let vocab = build_vocab(&corpus.train_episodes, &worlds).unwrap();
    let config = TrainConfig::default();
    let mut episodes = corpus.train_episodes.clone();
    episodes.extend(corpus.unseen_episodes.iter().cloned());
    let prepared =
        prepare_episodes(&episodes, &worlds, &vocab, &config.render_options().unwrap(), MAX_HINT_TOKENS).unwrap();
    let params = ModelParams::init(config.model_config(vocab.len()), 0).unwrap();
    let out = evaluate_split(&params, &vocab, &prepared, &worlds, RolloutMode::Teacher, &config.rollout_options(), 0)
        .unwrap();
    let m = &out.report;
    let exact = m.sr == 1.0 && m.spl == 1.0 && m.ndtw == 1.0 && m.sdtw == 1.0 && m.ne == 0.0;
    let followed = out.rollouts.iter().zip(&episodes).all(|(r, e)| r.path == e.path);
    outcome(
        exact && followed && m.count >= 500,
        format!("{} episodes: SR {} SPL {} nDTW {} sDTW {} NE {}", m.count, m.sr, m.spl, m.ndtw, m.sdtw, m.ne),
    )
}

// ---------------------------------------------------------------- 3, 4

fn exclusive(record: &HintRecord, world: &World, ep: &Episode) -> bool {
    let views = candidate_views(world, ep.path[record.step_index]).unwrap();
    let target = ep.path[record.step_index + 1];
    record.distinctive_objects.iter().all(|phrase| {
        let head = phrase.split(' ').next_back().unwrap();
        views.iter().all(|v| {
            let has = v.objects.iter().any(|o| o.head_noun == head);
            if v.neighbor == target {
                v.objects.iter().any(|o| &o.phrase == phrase)
            } else {
                !has
            }
        })
    })
}

fn hint_round_trip() -> Outcome {
    let lex = Lexicon::bundled();
    let (mut total, mut round, mut excl, mut target_empty) = (0, 0, 0, 0);
    for seed in [0, 1] {
        let corpus = generate_corpus(seed, &CorpusConfig::default()).unwrap();
        let worlds: BTreeMap<String, World> = corpus.worlds().map(|w| (w.id.clone(), w.clone())).collect();
        let mut episodes = corpus.train_episodes.clone();
        episodes.extend(corpus.unseen_episodes.iter().cloned());
        let by_id: BTreeMap<&str, &Episode> = episodes.iter().map(|e| (e.id.as_str(), e)).collect();
        for r in build_hint_dataset(&episodes, &worlds, &RenderOptions::default()).unwrap() {
            total += 1;
            let ep = by_id[r.episode_id.as_str()];
            if let Ok(p) = parse_hint(&r.rendered, lex) {
                if p.sub_instruction == r.sub_instruction
                    && p.landmark_groups == r.landmark_groups
                    && p.distinctive_objects == r.distinctive_objects
                    && p.clauses.iter().all(|c| c.valid)
                {
                    round += 1;
                }
            }
            excl += exclusive(&r, &worlds[&ep.world_id], ep) as usize;
            target_empty +=
                (r.step_category != AmbiguityCategory::TargetLandmarks || r.distinctive_objects.is_empty()) as usize;
        }
    }
    outcome(
        total >= 10_000 && round == total && excl == total && target_empty == total,
        format!("{total} records: round trip {round}, exclusive {excl}, target-empty {target_empty}"),
    )
}

fn category_ranking() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for seed in 0..3 {
        let corpus = generate_corpus(seed, &CorpusConfig::default()).unwrap();
        let worlds: BTreeMap<String, World> = corpus.worlds().map(|w| (w.id.clone(), w.clone())).collect();
        let opts = RenderOptions::default();
        let train = build_hint_dataset(&corpus.train_episodes, &worlds, &opts).unwrap();
        let unseen = build_hint_dataset(&corpus.unseen_episodes, &worlds, &opts).unwrap();
        let stats = dataset_stats(&[("train", &train), ("unseen", &unseen)]).unwrap();
        let rank = stats.ranking();
        let top: Vec<AmbiguityCategory> = rank.iter().take(2).map(|r| r.0).collect();
        pass &=
            top.contains(&AmbiguityCategory::InvisibleLandmarks) && top.contains(&AmbiguityCategory::MultipleLandmarks);
        let shares: Vec<String> =
            rank.iter().map(|(c, n)| format!("{} {:.2}", c.short_name(), *n as f64 / stats.total as f64)).collect();
        lines.push(format!("seed {seed}: {}", shares.join(", ")));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------- 5

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let config = TrainConfig::default();
    let report = check_gradients(&config, 500).unwrap();
    let groups = ModelParams::init(config.model_config(50), 0).unwrap().tensors.len();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        report.passed
            && report.max_relative_error <= 1e-4
            && report.checked >= 500
            && report.groups == groups
            && secs < 60.0,
        format!(
            "{} samples over {}/{groups} groups, max relative error {:.2e}, {secs:.1}s",
            report.checked, report.groups, report.max_relative_error
        ),
    )
}

// ---------------------------------------------------------------- 6, 7, 8

struct Run {
    train_secs: f64,
    vocab: usize,
    train_sr: f64,
    unseen_sr: f64,
    unseen_ndtw: f64,
    analysis: Option<HintQualityReport>,
    gold: Option<HintQualityReport>,
}

fn run(seed: u64, hint_parts: &str) -> Run {
    let corpus = generate_corpus(seed, &CorpusConfig { train_episodes: 2000, ..CorpusConfig::default() }).unwrap();
    let worlds = WorldSet::new(corpus.worlds());
    let vocab = build_vocab(&corpus.train_episodes, &worlds).unwrap();
    let config = TrainConfig { seed, hint_parts: hint_parts.into(), ..TrainConfig::default() };
    let opts = config.render_options().unwrap();
    let train = prepare_episodes(&corpus.train_episodes, &worlds, &vocab, &opts, MAX_HINT_TOKENS).unwrap();
    let unseen = prepare_episodes(&corpus.unseen_episodes, &worlds, &vocab, &opts, MAX_HINT_TOKENS).unwrap();

    let start = Instant::now();
    let trained = train_model(&config, &train, &worlds, vocab.clone()).unwrap();
    let train_secs = start.elapsed().as_secs_f64();

    let ro = config.rollout_options();
    let tr = evaluate_split(&trained.params, &vocab, &train, &worlds, RolloutMode::Greedy, &ro, 0).unwrap();
    let hinted = opts.parts.any();
    let ro_hints = navhint::train::RolloutOptions { decode_hints: hinted, ..ro };
    let un = evaluate_split(&trained.params, &vocab, &unseen, &worlds, RolloutMode::Greedy, &ro_hints, 0).unwrap();
    let any = AnalysisOptions::default();
    let analysis = hinted.then(|| analyze(&un.hints, &worlds, &any).unwrap());
    let gold = hinted.then(|| analyze(&gold_as_generated(&unseen), &worlds, &any).unwrap());
    eprintln!(
        "  seed {seed} {hint_parts:>26}: {train_secs:.0}s train SR {:.3} unseen SR {:.3} nDTW {:.3} BLEU-1 {}",
        tr.report.sr,
        un.report.sr,
        un.report.ndtw,
        analysis.as_ref().and_then(|a| a.bleu1).map_or("-".into(), |b| format!("{b:.3}"))
    );
    Run {
        train_secs,
        vocab: vocab.len(),
        train_sr: tr.report.sr,
        unseen_sr: un.report.sr,
        unseen_ndtw: un.report.ndtw,
        analysis,
        gold,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn joint_training(full: &[Run]) -> Outcome {
    let three = &full[..3];
    let train_sr = mean(three.iter().map(|r| r.train_sr));
    let unseen_sr = mean(three.iter().map(|r| r.unseen_sr));
    let slowest = three.iter().map(|r| r.train_secs).fold(0.0, f64::max);
    let vocab = three.iter().map(|r| r.vocab).max().unwrap();
    outcome(
        train_sr >= 0.90 && unseen_sr >= 0.60 && slowest <= 15.0 * 60.0 && vocab <= 300,
        format!(
            "3 seeds: train SR {train_sr:.3}, unseen SR {unseen_sr:.3}, vocab <= {vocab}, slowest run {slowest:.0}s"
        ),
    )
}

fn ablation(full: &[Run], base: &[Run]) -> Outcome {
    let (fs, bs) = (mean(full.iter().map(|r| r.unseen_sr)), mean(base.iter().map(|r| r.unseen_sr)));
    let (fn_, bn) = (mean(full.iter().map(|r| r.unseen_ndtw)), mean(base.iter().map(|r| r.unseen_ndtw)));
    outcome(
        fs >= bs - 0.02 && fn_ >= bn - 0.02 && fs > bs,
        format!("5 seeds unseen: full SR {fs:.4} nDTW {fn_:.4}, baseline SR {bs:.4} nDTW {bn:.4}"),
    )
}

fn bucket_ok(b: &Bucket) -> bool {
    b.accuracy.is_none_or(|a| a == 1.0)
}

fn hint_quality(full: &[Run]) -> Outcome {
    let bleu = mean(full.iter().map(|r| r.analysis.as_ref().and_then(|a| a.bleu1).unwrap_or(0.0)));
    let gold_perfect = full.iter().all(|r| {
        let g = r.gold.as_ref().unwrap();
        let d = &g.distinctive;
        g.bleu1 == Some(1.0)
            && g.unparseable_hints == 0
            && g.ambiguity.values().all(bucket_ok)
            && g.ambiguity.values().any(|b| b.total > 0)
            && [&d.exact_right, &d.object_right].iter().all(|b| bucket_ok(b) && b.total > 0)
    });
    let ge = |o: &Bucket, e: &Bucket| match (o.accuracy, e.accuracy) {
        (Some(o), Some(e)) => o >= e,
        (None, None) => true,
        _ => false,
    };
    let object_ge_exact = full.iter().all(|r| {
        let d = &r.analysis.as_ref().unwrap().distinctive;
        ge(&d.object_right, &d.exact_right) && ge(&d.object_wrong, &d.exact_wrong)
    });
    outcome(
        bleu >= 0.70 && gold_perfect && object_ge_exact,
        format!("unseen BLEU-1 {bleu:.3} (5 seeds), gold closed loop perfect {gold_perfect}, object >= exact {object_ge_exact}"),
    )
}

// ---------------------------------------------------------------- 9

fn navhint(dir: &Path, args: &[&str]) -> bool {
    let out = Command::new(env!("CARGO_BIN_EXE_navhint")).current_dir(dir).args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("  {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.success()
}

fn snapshot(dir: &Path, base: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            snapshot(&p, base, out);
        } else if !p.to_string_lossy().ends_with("manifest.json") {
            out.push((p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
        }
    }
}

fn pipeline(dir: &Path) -> Option<Vec<(PathBuf, Vec<u8>)>> {
    let corpus = "train_worlds = 4\nunseen_worlds = 2\ntrain_episodes = 60\nunseen_episodes = 20\n";
    let train =
        "seed = 5\nepochs = 1\n[paths]\nworlds = \"data/worlds\"\ntrain_episodes = \"data/episodes/train.jsonl\"\n";
    std::fs::write(dir.join("corpus.toml"), corpus).unwrap();
    std::fs::write(dir.join("train.toml"), train).unwrap();
    let stages: &[&[&str]] = &[
        &["world", "gen", "--seed", "9", "--config", "corpus.toml", "--out", "data/worlds"],
        &["episodes", "gen", "--worlds", "data/worlds", "--split", "train", "--out", "data/episodes/train.jsonl"],
        &["episodes", "gen", "--worlds", "data/worlds", "--split", "unseen", "--out", "data/episodes/unseen.jsonl"],
        &[
            "hints",
            "build",
            "--episodes",
            "data/episodes/train.jsonl",
            "--worlds",
            "data/worlds",
            "--out",
            "data/hints.jsonl",
        ],
        &["hints", "stats", "--in", "data/hints.jsonl", "--out", "out/stats.json"],
        &["train", "--config", "train.toml", "--out", "run"],
        &[
            "eval",
            "--checkpoint",
            "run/checkpoint.json",
            "--worlds",
            "data/worlds",
            "--split",
            "unseen",
            "--config",
            "train.toml",
            "--out",
            "out/eval.json",
            "--hints-out",
            "out/hints.jsonl",
            "--rollouts-out",
            "out/rollouts.jsonl",
            "--csv",
            "out/eval.csv",
        ],
        &[
            "analyze",
            "--hints",
            "out/hints.jsonl",
            "--rollouts",
            "out/rollouts.jsonl",
            "--worlds",
            "data/worlds",
            "--out",
            "out/analysis.json",
            "--svg-dir",
            "out/svg",
        ],
        &[
            "report",
            "--eval",
            "out/eval.json",
            "--analysis",
            "out/analysis.json",
            "--stats",
            "out/stats.json",
            "--out",
            "out/report",
        ],
        &["gradcheck", "--config", "train.toml", "--samples", "60", "--out", "out/gradcheck.json"],
    ];
    for s in stages {
        if !navhint(dir, s) {
            return None;
        }
    }
    let mut files = Vec::new();
    for sub in ["data", "run", "out"] {
        snapshot(&dir.join(sub), dir, &mut files);
    }
    files.sort();
    Some(files)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    match (pipeline(a.path()), pipeline(b.path())) {
        (Some(fa), Some(fb)) => {
            let differing: Vec<String> =
                fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.display().to_string()).collect();
            outcome(
                fa.len() == fb.len() && differing.is_empty(),
                format!("{} output files compared across two runs, {} differ {differing:?}", fa.len(), differing.len()),
            )
        }
        _ => outcome(false, "a pipeline stage failed".into()),
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!("{} {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "metric oracles", metric_oracles());
    report(2, "teacher rollouts", teacher_sanity());
    report(3, "hint round trip", hint_round_trip());
    report(4, "category ranking", category_ranking());
    report(5, "gradient check", gradient_check());
    report(9, "cli determinism", determinism());

    let full: Vec<Run> = SEEDS.iter().map(|&s| run(s, "sub,ambiguity,distinctive")).collect();
    let base: Vec<Run> = SEEDS.iter().map(|&s| run(s, "none")).collect();
    report(6, "joint training", joint_training(&full));
    report(7, "ablation direction", ablation(&full, &base));
    report(8, "hint quality", hint_quality(&full));

    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
