use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use navhint::analysis::{analyze as analyze_hints, AnalysisOptions, HintQualityReport, ANALYSIS_SCHEMA_VERSION};
use navhint::hints::{
    build_hint_dataset, dataset_stats, read_hint_records, write_hint_records, DatasetStats, HintParts, RenderOptions,
};
use navhint::metrics::MetricReport;
use navhint::model::{load_checkpoint, save_checkpoint};
use navhint::train::{
    build_vocab, check_gradients, evaluate_split, prepare_episodes, read_generated_hints, read_rollouts, score_path,
    write_generated_hints, write_rollouts, RolloutMode, TrainConfig, Trainer, WorldSet,
};
use navhint::world::{
    generate_split_episodes, generate_split_worlds, read_episodes, write_episodes, CorpusConfig, Episode, World,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    AnalyzeArgs, EpisodesGenArgs, EvalArgs, GradcheckArgs, HintsBuildArgs, HintsStatsArgs, ReportArgs, TrainArgs,
    WorldGenArgs,
};
use crate::manifest::{default_path, ManifestBuilder};
use crate::report::{self, EvalReport, EVAL_SCHEMA_VERSION};

pub const INDEX_SCHEMA_VERSION: u32 = 1;
pub const STATS_SCHEMA_VERSION: u32 = 1;

/// `index.json` in a worlds directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldIndex {
    pub schema_version: u32,
    pub seed: u64,
    pub config: CorpusConfig,
    /// World ids per split (`train`, `unseen`).
    pub splits: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StatsFile {
    schema_version: u32,
    #[serde(flatten)]
    stats: DatasetStats,
}

/// One predicted trajectory; extra fields (as in rollout files) are ignored.
#[derive(Debug, Deserialize)]
struct Trajectory {
    episode_id: String,
    path: Vec<u32>,
    #[serde(default)]
    truncated: bool,
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        bail!("input not found: {}", path.display());
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn finish(builder: &ManifestBuilder, explicit: Option<&PathBuf>, primary: &Path) -> Result<()> {
    let dest = explicit.cloned().unwrap_or_else(|| default_path(primary));
    builder.write(&dest)?;
    Ok(())
}

fn load_index(dir: &Path) -> Result<WorldIndex> {
    let index: WorldIndex = parse_json(&dir.join("index.json"))?;
    ensure!(
        index.schema_version == INDEX_SCHEMA_VERSION,
        "unsupported world index schema version {} in {}",
        index.schema_version,
        dir.display()
    );
    Ok(index)
}

fn load_split_worlds(dir: &Path, index: &WorldIndex, split: &str) -> Result<Vec<World>> {
    let ids = index.splits.get(split).ok_or_else(|| anyhow!("no {split} worlds in {}", dir.display()))?;
    ids.iter()
        .map(|id| {
            let path = dir.join(format!("{id}.json"));
            World::from_json(&read_text(&path)?).with_context(|| format!("loading {}", path.display()))
        })
        .collect()
}

fn load_worlds(dir: &Path) -> Result<WorldSet> {
    let index = load_index(dir)?;
    let mut set = WorldSet::new([]);
    for split in index.splits.keys() {
        for w in load_split_worlds(dir, &index, split)? {
            set.insert(w);
        }
    }
    Ok(set)
}

fn load_episodes(path: &Path) -> Result<Vec<Episode>> {
    read_episodes(&read_text(path)?).with_context(|| format!("loading {}", path.display()))
}

pub fn world_gen(command: &str, a: WorldGenArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    m.seed(a.seed);
    let config = match &a.config {
        Some(p) => {
            let text = read_text(p)?;
            m.config(&text).input(p);
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => CorpusConfig::default(),
    };
    let mut splits = BTreeMap::new();
    for (split, count) in [("train", config.train_worlds), ("unseen", config.unseen_worlds)] {
        let worlds = generate_split_worlds(a.seed, split, count, &config.world)?;
        for w in &worlds {
            write_text(&a.out.join(format!("{}.json", w.id)), &(w.to_json() + "\n"))?;
        }
        splits.insert(split.to_string(), worlds.iter().map(|w| w.id.clone()).collect::<Vec<_>>());
    }
    let index = WorldIndex { schema_version: INDEX_SCHEMA_VERSION, seed: a.seed, config, splits };
    write_json(&a.out.join("index.json"), &index)?;
    eprintln!("wrote {} worlds to {}", index.splits.values().map(Vec::len).sum::<usize>(), a.out.display());
    m.output(&a.out);
    finish(&m, a.manifest.as_ref(), &a.out)
}

pub fn episodes_gen(command: &str, a: EpisodesGenArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    let index = load_index(&a.worlds)?;
    let world_split = if a.split == "unseen" { "unseen" } else { "train" };
    let worlds = load_split_worlds(&a.worlds, &index, world_split)?;
    let count = a.count.unwrap_or(match a.split.as_str() {
        "train" => index.config.train_episodes,
        _ => index.config.unseen_episodes,
    });
    let seed = a.seed.unwrap_or(index.seed);
    let episodes = generate_split_episodes(seed, &a.split, &worlds, count, &index.config.episode)?;
    write_text(&a.out, &write_episodes(&episodes))?;
    eprintln!("wrote {} {} episodes to {}", episodes.len(), a.split, a.out.display());
    m.seed(seed).input(&a.worlds).output(&a.out);
    finish(&m, a.manifest.as_ref(), &a.out)
}

fn parse_parts(list: &str) -> Result<HintParts> {
    HintParts::parse(list).ok_or_else(|| anyhow!("unknown hint part in {list:?}"))
}

pub fn hints_build(command: &str, a: HintsBuildArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    let worlds = load_worlds(&a.worlds)?;
    let episodes = load_episodes(&a.episodes)?;
    let opts = RenderOptions { parts: parse_parts(&a.parts)?, single_clause: a.single_clause };
    let records = build_hint_dataset(&episodes, worlds.worlds(), &opts)?;
    write_text(&a.out, &write_hint_records(&records))?;
    eprintln!("wrote {} hint records to {}", records.len(), a.out.display());
    m.input(&a.worlds).input(&a.episodes).output(&a.out);
    finish(&m, a.manifest.as_ref(), &a.out)
}

pub fn hints_stats(command: &str, a: HintsStatsArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    let mut loaded = Vec::new();
    for p in &a.input {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let records = read_hint_records(&read_text(p)?).with_context(|| format!("loading {}", p.display()))?;
        loaded.push((name, records));
    }
    let splits: Vec<(&str, &[_])> = loaded.iter().map(|(n, r)| (n.as_str(), r.as_slice())).collect();
    let stats = dataset_stats(&splits)?;
    println!("{} records", stats.total);
    for (c, n) in stats.ranking() {
        println!("{:<10} {n:>7} {:>6.1}%", c.short_name(), 100.0 * n as f64 / stats.total as f64);
    }
    for p in &a.input {
        m.input(p);
    }
    if let Some(out) = &a.out {
        write_json(out, &StatsFile { schema_version: STATS_SCHEMA_VERSION, stats })?;
        m.output(out);
        finish(&m, a.manifest.as_ref(), out)?;
    } else if let Some(dest) = &a.manifest {
        m.write(dest)?;
    }
    Ok(())
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_train_config(path: &Path) -> Result<(TrainConfig, String)> {
    let text = read_text(path)?;
    let cfg = TrainConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))?;
    Ok((cfg, text))
}

pub fn train(command: &str, a: TrainArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    let (cfg, text) = read_train_config(&a.config)?;
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let worlds_dir = resolve(&base, cfg.paths.worlds.as_deref().ok_or_else(|| anyhow!("config lacks paths.worlds"))?);
    let episodes_path = resolve(
        &base,
        cfg.paths.train_episodes.as_deref().ok_or_else(|| anyhow!("config lacks paths.train_episodes"))?,
    );
    let out = a.out.clone().unwrap_or_else(|| base.clone());

    let worlds = load_worlds(&worlds_dir)?;
    let episodes = load_episodes(&episodes_path)?;
    let vocab = build_vocab(&episodes, &worlds)?;
    let preps = prepare_episodes(&episodes, &worlds, &vocab, &cfg.render_options()?, cfg.max_hint_tokens)?;
    eprintln!("{} episodes, vocabulary {}", preps.len(), vocab.len());

    let mut trainer = Trainer::new(cfg.clone(), vocab)?;
    let mut csv = String::from("epoch,step,episode_id,total,nav,hint,grad_norm\n");
    for epoch in 0..cfg.epochs {
        let records = trainer.train_epoch(&preps, &worlds, epoch)?;
        let n = records.len().max(1) as f64;
        eprintln!(
            "epoch {epoch}: nav {:.4} hint {:.4}",
            records.iter().map(|r| r.nav).sum::<f64>() / n,
            records.iter().map(|r| r.hint).sum::<f64>() / n
        );
        for r in &records {
            writeln!(csv, "{},{},{},{},{},{},{}", r.epoch, r.step, r.episode_id, r.total, r.nav, r.hint, r.grad_norm)?;
        }
    }
    let checkpoint = out.join("checkpoint.json");
    let loss = out.join("loss.csv");
    write_text(&checkpoint, &save_checkpoint(&trainer.params, &trainer.vocab))?;
    write_text(&loss, &csv)?;
    eprintln!("wrote {}", checkpoint.display());

    m.config(&text).seed(cfg.seed).input(&a.config).input(&worlds_dir).input(&episodes_path);
    m.output(&checkpoint).output(&loss);
    let dest = a.manifest.clone().unwrap_or_else(|| out.join("manifest.json"));
    m.write(&dest)?;
    Ok(())
}

fn label_of(explicit: Option<&String>, fallback: &Path) -> String {
    explicit
        .cloned()
        .unwrap_or_else(|| fallback.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
}

pub fn eval(command: &str, a: EvalArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    let worlds = load_worlds(&a.worlds)?;
    let episodes_path = match (&a.episodes, &a.split) {
        (Some(p), _) => p.clone(),
        (None, Some(split)) => {
            let root = a.worlds.parent().unwrap_or(Path::new("."));
            root.join("episodes").join(format!("{split}.jsonl"))
        }
        (None, None) => bail!("either --episodes or --split is required"),
    };
    let episodes = load_episodes(&episodes_path)?;
    let (cfg, cfg_text) = match &a.config {
        Some(p) => {
            let (c, t) = read_train_config(p)?;
            (c, Some(t))
        }
        None => (TrainConfig::default(), None),
    };
    let mut opts = cfg.rollout_options();
    m.input(&a.worlds).input(&episodes_path);
    if let (Some(p), Some(t)) = (&a.config, &cfg_text) {
        m.input(p).config(t);
    }

    let (metrics, mode, label) = if let Some(traj_path) = &a.trajectories {
        m.input(traj_path);
        let by_id: BTreeMap<&str, &Episode> = episodes.iter().map(|e| (e.id.as_str(), e)).collect();
        let mut per_episode = Vec::new();
        for (i, line) in read_text(traj_path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let t: Trajectory =
                serde_json::from_str(line).with_context(|| format!("{} line {}", traj_path.display(), i + 1))?;
            let ep = by_id.get(t.episode_id.as_str()).ok_or_else(|| anyhow!("unknown episode {}", t.episode_id))?;
            per_episode.push(score_path(
                &ep.world_id,
                &t.path,
                t.truncated,
                &ep.path,
                &worlds,
                opts.success_threshold,
            )?);
        }
        (MetricReport::aggregate(&per_episode)?, "trajectories".to_string(), label_of(a.label.as_ref(), traj_path))
    } else {
        let ckpt_path = a.checkpoint.as_ref().ok_or_else(|| anyhow!("--checkpoint or --trajectories is required"))?;
        m.input(ckpt_path).seed(a.seed);
        let (params, vocab) =
            load_checkpoint(&read_text(ckpt_path)?).with_context(|| format!("loading {}", ckpt_path.display()))?;
        let render = cfg.render_options()?;
        if a.hints_out.is_some() {
            ensure!(render.parts.any(), "--hints-out needs a config with hint parts enabled");
            opts.decode_hints = true;
        }
        let preps = prepare_episodes(&episodes, &worlds, &vocab, &render, cfg.max_hint_tokens)?;
        let mode = match a.mode.as_str() {
            "teacher" => RolloutMode::Teacher,
            "sample" => RolloutMode::Sample,
            _ => RolloutMode::Greedy,
        };
        let out = evaluate_split(&params, &vocab, &preps, &worlds, mode, &opts, a.seed)?;
        if let Some(p) = &a.hints_out {
            write_text(p, &write_generated_hints(&out.hints))?;
            m.output(p);
        }
        if let Some(p) = &a.rollouts_out {
            write_text(p, &write_rollouts(&out.rollouts))?;
            m.output(p);
        }
        let label = a.label.clone().or_else(|| a.split.clone()).unwrap_or_else(|| label_of(None, &episodes_path));
        (out.report, a.mode.clone(), label)
    };
    metrics.check_invariants()?;
    println!(
        "{label}: SR {:.4} SPL {:.4} nDTW {:.4} sDTW {:.4} NE {:.4} over {} episodes",
        metrics.sr, metrics.spl, metrics.ndtw, metrics.sdtw, metrics.ne, metrics.count
    );
    let report = EvalReport { schema_version: EVAL_SCHEMA_VERSION, label, split: a.split.clone(), mode, metrics };
    write_json(&a.out, &report)?;
    m.output(&a.out);
    if let Some(p) = &a.csv {
        write_text(p, &report::metrics_csv(std::slice::from_ref(&report), &[]))?;
        m.output(p);
    }
    finish(&m, a.manifest.as_ref(), &a.out)
}

fn file_label(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn analyze(command: &str, a: AnalyzeArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    let worlds = load_worlds(&a.worlds)?;
    let hints =
        read_generated_hints(&read_text(&a.hints)?).with_context(|| format!("loading {}", a.hints.display()))?;
    let rollouts =
        read_rollouts(&read_text(&a.rollouts)?).with_context(|| format!("loading {}", a.rollouts.display()))?;
    let by_id: BTreeMap<&str, _> = rollouts.iter().map(|r| (r.episode_id.as_str(), r)).collect();
    for h in &hints {
        let step = by_id.get(h.episode_id.as_str()).and_then(|r| r.steps.get(h.step_index));
        let consistent = step.is_some_and(|s| s.node == h.node && s.selected_view() == h.selected_view);
        ensure!(consistent, "hint for {} step {} does not match the rollouts", h.episode_id, h.step_index);
    }
    let report = analyze_hints(&hints, &worlds, &AnalysisOptions { any_true: a.any_true })?;
    report.check_invariants()?;
    write_json(&a.out, &report)?;
    println!(
        "{} steps, BLEU-1 {:?}, BLEU-4 {:?}, {} unparseable",
        report.evaluated_steps, report.bleu1, report.bleu4, report.unparseable_hints
    );
    m.input(&a.worlds).input(&a.hints).input(&a.rollouts).output(&a.out);
    if let Some(dir) = &a.svg_dir {
        let label = label_of(None, &a.out);
        for (name, svg) in [
            ("ambiguity", report::ambiguity_svg(&label, &report)),
            ("distinctive", report::distinctive_svg(&label, &report)),
        ] {
            let p = dir.join(format!("{name}-{}.svg", file_label(&label)));
            write_text(&p, &svg)?;
            m.output(p);
        }
    }
    finish(&m, a.manifest.as_ref(), &a.out)
}

pub fn gradcheck(command: &str, a: GradcheckArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    let (cfg, text) = read_train_config(&a.config)?;
    let report = check_gradients(&cfg, a.samples)?;
    println!(
        "checked {} entries over {} groups, max relative error {:.3e}",
        report.checked, report.groups, report.max_relative_error
    );
    if let Some(w) = &report.worst {
        println!("worst: {w:?}");
    }
    m.config(&text).seed(cfg.seed).input(&a.config);
    if let Some(out) = &a.out {
        write_json(out, &report)?;
        m.output(out);
        finish(&m, a.manifest.as_ref(), out)?;
    } else if let Some(dest) = &a.manifest {
        m.write(dest)?;
    }
    ensure!(report.passed, "gradient check failed: max relative error {:.3e}", report.max_relative_error);
    Ok(())
}

pub fn report(command: &str, a: ReportArgs) -> Result<()> {
    let mut m = ManifestBuilder::new(command);
    ensure!(a.analyses.len() <= a.evals.len(), "more --analysis inputs than --eval inputs");
    let mut evals = Vec::new();
    for p in &a.evals {
        let e: EvalReport = parse_json(p)?;
        ensure!(e.schema_version == EVAL_SCHEMA_VERSION, "unsupported eval schema version in {}", p.display());
        evals.push(e);
        m.input(p);
    }
    let mut analyses = Vec::new();
    for p in &a.analyses {
        let r: HintQualityReport = parse_json(p)?;
        ensure!(r.schema_version == ANALYSIS_SCHEMA_VERSION, "unsupported analysis schema version in {}", p.display());
        analyses.push(r);
        m.input(p);
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut outputs = vec![("metrics.csv".to_string(), report::metrics_csv(&evals, &analyses))];
    if analyses.is_empty() {
        eprintln!("no analysis input; hint tables and plots skipped");
    } else {
        let labels: Vec<String> = evals.iter().map(|e| e.label.clone()).collect();
        outputs.push(("accuracy.csv".into(), report::accuracy_csv(&labels, &analyses)));
        for (label, r) in labels.iter().zip(&analyses) {
            outputs.push((format!("ambiguity-{}.svg", file_label(label)), report::ambiguity_svg(label, r)));
            outputs.push((format!("distinctive-{}.svg", file_label(label)), report::distinctive_svg(label, r)));
        }
    }
    if let Some(p) = &a.stats {
        let s: StatsFile = parse_json(p)?;
        ensure!(s.schema_version == STATS_SCHEMA_VERSION, "unsupported stats schema version in {}", p.display());
        outputs.push(("categories.csv".into(), report::categories_csv(&s.stats)));
        outputs.push(("categories.svg".into(), report::categories_svg(&s.stats)));
        m.input(p);
    }
    for (name, text) in &outputs {
        let p = a.out.join(name);
        write_text(&p, text)?;
        m.output(p);
    }
    print!("{}", outputs[0].1);
    let dest = a.manifest.clone().unwrap_or_else(|| a.out.join("manifest.json"));
    m.write(&dest)?;
    Ok(())
}
