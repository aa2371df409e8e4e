use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use itermem::eval::{self, plot, redundancy_metrics, TupleSet};
use itermem::filter::{score_and_filter, ExternalScores, RankScorer, Scorer};
use itermem::ingest::{
    self, build_random_bootstrap, pool_extractions, pools_from_items, ExtractionFile, SourceSet,
};
use itermem::neural::{self, checkpoint, Model};
use itermem::synth;
use itermem::train_data::{self, build_instances, shuffle_order, DEFAULT_MAX_INPUT_LEN};
use itermem::tuple::{Extraction, Sentence, Source, Token};
use log::{info, warn};
use serde::Serialize;

use crate::config::{PipelineConfig, ScorerKind, SourceSpec};
use crate::{Command, UserError};

pub fn dispatch(cmd: Command, cfg: PipelineConfig) -> Result<()> {
    match cmd {
        Command::Ingest {
            sentences,
            sources,
            no_confidence,
            out,
            bootstrap_out,
            strict,
        } => ingest_cmd(&cfg, sentences, &sources, &no_confidence, &out, bootstrap_out, strict),
        Command::ScoreFilter {
            sentences,
            pooled,
            scorer,
            checkpoint,
            scores,
            out,
            report,
        } => score_filter_cmd(&cfg, sentences, &pooled, scorer, checkpoint, scores, &out, report),
        Command::BuildTrain {
            sentences,
            extractions,
            out,
            shuffle_train_order,
            max_input_len,
        } => build_train_cmd(&cfg, sentences, &extractions, &out, shuffle_train_order, max_input_len),
        Command::Train {
            train,
            checkpoint_out,
            epochs,
            learning_rate,
            batch_size,
            target_loss,
            loss_out,
        } => {
            let mut tc = cfg.train.clone();
            tc.epochs = epochs.unwrap_or(tc.epochs);
            tc.learning_rate = learning_rate.unwrap_or(tc.learning_rate);
            tc.batch_size = batch_size.unwrap_or(tc.batch_size);
            tc.target_loss = target_loss.or(tc.target_loss);
            train_cmd(&cfg, tc, &train, &checkpoint_out, loss_out)
        }
        Command::Decode {
            checkpoint,
            sentences,
            out,
            max_iters,
            max_len,
        } => {
            let mut dc = cfg.decode;
            dc.max_iters = max_iters.unwrap_or(dc.max_iters);
            dc.max_len = max_len.unwrap_or(dc.max_len);
            if dc.max_iters == 0 || dc.max_len == 0 {
                return Err(UserError("--max-iters and --max-len must be positive".into()).into());
            }
            decode_cmd(&cfg, dc, checkpoint, sentences, &out)
        }
        Command::Eval {
            gold,
            pred,
            curve_out,
            svg_out,
        } => eval_cmd(&cfg, gold, &pred, curve_out, svg_out),
        Command::Redundancy { pred } => redundancy_cmd(&pred),
        Command::PrCurve {
            gold,
            pred,
            out,
            svg_out,
        } => eval_cmd(&cfg, gold, &pred, Some(out), svg_out),
        Command::ExportAttention {
            checkpoint,
            sentences,
            id,
            iteration,
            out,
        } => export_attention_cmd(&cfg, checkpoint, sentences, &id, iteration, &out),
        Command::Synth {
            out_dir,
            sentences,
            min_tuples,
            max_tuples,
        } => synth_cmd(&cfg, &out_dir, sentences, min_tuples, max_tuples),
    }
}

fn required(arg: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str, field: &str) -> Result<PathBuf> {
    arg.or_else(|| fallback.clone())
        .ok_or_else(|| UserError(format!("missing {flag} (or {field} in the config)")).into())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| UserError(format!("{}: {e}", dir.display())))?;
    }
    let f = File::create(path).map_err(|e| UserError(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn parse_source_arg(s: &str) -> Result<SourceSpec> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| UserError(format!("--source {s:?}: expected NAME=PATH")))?;
    if name.is_empty() || path.is_empty() {
        return Err(UserError(format!("--source {s:?}: expected NAME=PATH")).into());
    }
    Ok(SourceSpec {
        name: name.to_string(),
        path: PathBuf::from(path),
        confidence: true,
    })
}

fn write_items(path: &Path, items: &[(String, Extraction)], set: Option<&SourceSet>) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        let has_conf = set.is_none_or(|s| s.has_confidence(&item.1.source));
        ingest::write_extractions(&mut w, std::slice::from_ref(item), has_conf, true)?;
    }
    w.flush()?;
    Ok(())
}

fn ingest_cmd(
    cfg: &PipelineConfig,
    sentences: Option<PathBuf>,
    source_args: &[String],
    no_confidence: &[String],
    out: &Path,
    bootstrap_out: Option<PathBuf>,
    strict: bool,
) -> Result<()> {
    let sent_path = required(sentences, &cfg.paths.sentences, "--sentences", "paths.sentences")?;
    let specs: Vec<SourceSpec> = if source_args.is_empty() {
        cfg.sources.clone()
    } else {
        source_args.iter().map(|s| parse_source_arg(s)).collect::<Result<_>>()?
    };
    if specs.is_empty() {
        return Err(UserError("no sources: pass --source NAME=PATH or list sources in the config".into()).into());
    }
    for n in no_confidence {
        if !specs.iter().any(|s| &s.name == n) {
            return Err(UserError(format!("--no-confidence {n}: no such source")).into());
        }
    }
    let sentences = ingest::read_sentences(&sent_path)?;
    let mut set = SourceSet::new();
    let mut files: Vec<(Source, ExtractionFile)> = Vec::new();
    let mut malformed = 0usize;
    for spec in &specs {
        let src = Source::new(spec.name.as_str());
        let file = ingest::read_extractions(&spec.path, &src)?;
        for issue in &file.malformed {
            warn!("{}:{}: {}", spec.path.display(), issue.line, issue.message);
        }
        malformed += file.malformed.len();
        let has_conf = file.has_confidence && spec.confidence && !no_confidence.contains(&spec.name);
        set.push(src.clone(), has_conf);
        println!(
            "source {}: {} extractions, {} malformed lines, {}",
            spec.name,
            file.items.len(),
            file.malformed.len(),
            if has_conf { "ranked by confidence" } else { "file order" }
        );
        files.push((src, file));
    }
    if strict && malformed > 0 {
        return Err(UserError(format!("{malformed} malformed extraction lines")).into());
    }
    let (pools, report) = pool_extractions(&sentences, &files, &set);
    println!(
        "pooled {} extractions over {} sentences; {} duplicates removed, {} orphans",
        report.pooled,
        pools.len(),
        report.duplicates_removed,
        report.orphans
    );
    let items: Vec<(String, Extraction)> = pools
        .iter()
        .flat_map(|p| p.extractions.iter().map(move |e| (p.sentence.id.clone(), e.clone())))
        .collect();
    write_items(out, &items, Some(&set))?;
    if let Some(path) = bootstrap_out {
        let (corpus, br) = build_random_bootstrap(&pools, &set, cfg.seed);
        write_items(&path, &corpus.to_items(), Some(&set))?;
        println!(
            "bootstrap: {} sentences, {} without extractions skipped",
            corpus.pairs.len(),
            br.skipped_empty
        );
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Model<f64>> {
    if !path.exists() {
        return Err(UserError(format!("checkpoint {} does not exist", path.display())).into());
    }
    Ok(checkpoint::load(path)?)
}

#[derive(Serialize)]
struct FilterRecord<'a> {
    sentence: &'a str,
    pool_size: usize,
    selected: usize,
    objective: f64,
    warnings: &'a [String],
}

#[allow(clippy::too_many_arguments)]
fn score_filter_cmd(
    cfg: &PipelineConfig,
    sentences: Option<PathBuf>,
    pooled: &Path,
    scorer: Option<ScorerKind>,
    checkpoint: Option<PathBuf>,
    scores: Option<PathBuf>,
    out: &Path,
    report: Option<PathBuf>,
) -> Result<()> {
    let sent_path = required(sentences, &cfg.paths.sentences, "--sentences", "paths.sentences")?;
    let sentences = ingest::read_sentences(&sent_path)?;
    let file = ingest::read_extractions(pooled, &Source::new("pooled"))?;
    if !file.malformed.is_empty() {
        let first = &file.malformed[0];
        return Err(UserError(format!(
            "{}:{}: {}",
            pooled.display(),
            first.line,
            first.message
        ))
        .into());
    }
    let (pools, orphans) = pools_from_items(&sentences, &file.items);
    if orphans > 0 {
        warn!("{orphans} pooled extractions refer to unknown sentences");
    }
    let mut set = SourceSet::new();
    for (_, e) in &file.items {
        if set.get(&e.source).is_none() {
            set.push(e.source.clone(), true);
        }
    }
    let kind = scorer.unwrap_or(cfg.scorer);
    let scorer: Box<dyn Scorer> = match kind {
        ScorerKind::Rank => Box::new(RankScorer::from_pools(&pools, &set)),
        ScorerKind::Model => {
            let p = required(checkpoint, &cfg.paths.checkpoint, "--checkpoint", "paths.checkpoint")?;
            Box::new(load_model(&p)?)
        }
        ScorerKind::External => {
            let p = required(scores, &cfg.paths.scores, "--scores", "paths.scores")?;
            Box::new(ExternalScores::read(&p)?)
        }
    };
    let filtered = score_and_filter::<f64, _>(&pools, scorer.as_ref());
    let items: Vec<(String, Extraction)> = filtered
        .iter()
        .flat_map(|f| f.selected.iter().map(move |e| (f.sentence.id.clone(), e.clone())))
        .collect();
    write_items(out, &items, None)?;
    let mut warnings = 0;
    if let Some(path) = report {
        let mut w = create(&path)?;
        for f in &filtered {
            let rec = FilterRecord {
                sentence: &f.sentence.id,
                pool_size: f.pool_size,
                selected: f.selected.len(),
                objective: f.objective,
                warnings: &f.warnings,
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    for f in &filtered {
        for m in &f.warnings {
            warn!("{m}");
            warnings += 1;
        }
    }
    let pooled_n: usize = filtered.iter().map(|f| f.pool_size).sum();
    let total: f64 = filtered.iter().map(|f| f.objective).sum();
    println!(
        "selected {} of {} extractions over {} sentences; total objective {total:.6}; {warnings} scorer warnings",
        items.len(),
        pooled_n,
        filtered.len()
    );
    Ok(())
}

/// Extraction TSV, or gold TSV (four columns); per-sentence order is kept.
fn read_ordered_tuples(path: &Path) -> Result<Vec<(String, Extraction)>> {
    let text = fs::read_to_string(path).map_err(|e| UserError(format!("{}: {e}", path.display())))?;
    let four_columns = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.split('\t').count() == 4);
    if four_columns {
        let gold = eval::parse_gold(&text, path)?;
        return Ok(gold
            .into_iter()
            .flat_map(|(id, exts)| exts.into_iter().map(move |e| (id.clone(), e)))
            .collect());
    }
    let file = ingest::parse_extractions(&text, &Source::new("train"));
    if let Some(first) = file.malformed.first() {
        return Err(UserError(format!("{}:{}: {}", path.display(), first.line, first.message)).into());
    }
    Ok(file.items)
}

fn build_train_cmd(
    cfg: &PipelineConfig,
    sentences: Option<PathBuf>,
    extractions: &Path,
    out: &Path,
    shuffle: bool,
    max_input_len: Option<usize>,
) -> Result<()> {
    let sent_path = required(sentences, &cfg.paths.sentences, "--sentences", "paths.sentences")?;
    let sentences = ingest::read_sentences(&sent_path)?;
    let items = read_ordered_tuples(extractions)?;
    let (pools, orphans) = pools_from_items(&sentences, &items);
    if orphans > 0 {
        warn!("{orphans} extractions refer to unknown sentences");
    }
    let mut pairs: Vec<(Sentence, Vec<Extraction>)> = pools
        .into_iter()
        .filter(|p| !p.extractions.is_empty())
        .map(|p| (p.sentence, p.extractions))
        .collect();
    if shuffle {
        shuffle_order(&mut pairs, cfg.seed);
    }
    let cap = max_input_len.unwrap_or(DEFAULT_MAX_INPUT_LEN);
    let mut instances = Vec::new();
    for (s, exts) in &pairs {
        instances.extend(build_instances(s, exts, cap)?);
    }
    let mut w = create(out)?;
    train_data::write_instances(&mut w, &instances)?;
    w.flush()?;
    println!(
        "{} instances from {} sentences{}",
        instances.len(),
        pairs.len(),
        if shuffle { " (extraction order shuffled)" } else { "" }
    );
    Ok(())
}

fn train_cmd(
    cfg: &PipelineConfig,
    tc: neural::TrainConfig,
    train: &Path,
    checkpoint_out: &Path,
    loss_out: Option<PathBuf>,
) -> Result<()> {
    if tc.batch_size == 0 || !(tc.learning_rate > 0.0) {
        return Err(UserError("batch size and learning rate must be positive".into()).into());
    }
    let instances = train_data::read_instances(train)?;
    if instances.is_empty() {
        return Err(UserError(format!("{}: no training instances", train.display())).into());
    }
    let tokens: Vec<&Token> = instances.iter().flat_map(|i| i.input.iter().chain(&i.target)).collect();
    let mut model: Model<f64> = Model::from_corpus(cfg.model, tokens, cfg.seed);
    info!(
        "{} instances, vocabulary {}, {} parameters",
        instances.len(),
        model.vocab.len(),
        model.params.num_params()
    );
    let report = neural::train(&mut model, &instances, &tc)?;
    println!("epoch 0 loss {:.6}", report.initial_loss);
    for (i, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {} loss {l:.6}", i + 1);
    }
    if let Some(path) = loss_out {
        let mut w = create(&path)?;
        writeln!(w, "epoch,loss")?;
        writeln!(w, "0,{}", report.initial_loss)?;
        for (i, l) in report.epoch_losses.iter().enumerate() {
            writeln!(w, "{},{l}", i + 1)?;
        }
        w.flush()?;
    }
    let w = create(checkpoint_out)?;
    checkpoint::write_checkpoint(w, &model)?;
    Ok(())
}

fn decode_cmd(
    cfg: &PipelineConfig,
    dc: neural::DecodeConfig,
    checkpoint: Option<PathBuf>,
    sentences: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let ck = required(checkpoint, &cfg.paths.checkpoint, "--checkpoint", "paths.checkpoint")?;
    let sent_path = required(sentences, &cfg.paths.sentences, "--sentences", "paths.sentences")?;
    let model = load_model(&ck)?;
    let sentences = ingest::read_sentences(&sent_path)?;
    let gens = model.generate_corpus(&sentences, &dc);
    let mut items = Vec::new();
    let (mut malformed, mut capped) = (0, 0);
    for (s, g) in sentences.iter().zip(&gens) {
        malformed += g.malformed;
        if g.stop == neural::StopReason::IterationCap {
            capped += 1;
        }
        items.extend(g.extractions.iter().map(|e| (s.id.clone(), e.clone())));
    }
    let mut w = create(out)?;
    ingest::write_extractions(&mut w, &items, true, false)?;
    w.flush()?;
    println!(
        "{} extractions over {} sentences; {malformed} malformed decodes; {capped} sentences stopped at the iteration cap",
        items.len(),
        sentences.len()
    );
    Ok(())
}

fn read_predictions(path: &Path) -> Result<TupleSet> {
    let file = ingest::read_extractions(path, &Source::model())?;
    if let Some(first) = file.malformed.first() {
        return Err(UserError(format!("{}:{}: {}", path.display(), first.line, first.message)).into());
    }
    Ok(eval::group_by_sentence(file.items))
}

fn eval_cmd(
    cfg: &PipelineConfig,
    gold: Option<PathBuf>,
    pred: &Path,
    curve_out: Option<PathBuf>,
    svg_out: Option<PathBuf>,
) -> Result<()> {
    let gold_path = required(gold, &cfg.paths.gold, "--gold", "paths.gold")?;
    let golds = eval::read_gold(&gold_path)?;
    let preds = read_predictions(pred)?;
    let curve = eval::pr_curve(&preds, &golds)?;
    println!("optimal_f1 {:.4}", curve.optimal_f1);
    println!("auc {:.4}", curve.auc);
    println!("last_f1 {:.4}", curve.last_f1);
    if let Some(p) = curve_out {
        let mut w = create(&p)?;
        eval::write_curve_csv(&mut w, &curve)?;
        w.flush()?;
    }
    if let Some(p) = svg_out {
        fs::write(&p, plot::curve_svg(&curve)).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn redundancy_cmd(pred: &Path) -> Result<()> {
    let preds = read_predictions(pred)?;
    let m = redundancy_metrics(preds.values().map(Vec::as_slice));
    println!("tuples {}", m.tuples);
    println!("mno {:.4}", m.mno);
    println!("iou {:.4}", m.iou);
    Ok(())
}

fn export_attention_cmd(
    cfg: &PipelineConfig,
    checkpoint: Option<PathBuf>,
    sentences: Option<PathBuf>,
    id: &str,
    iteration: usize,
    out: &Path,
) -> Result<()> {
    let ck = required(checkpoint, &cfg.paths.checkpoint, "--checkpoint", "paths.checkpoint")?;
    let sent_path = required(sentences, &cfg.paths.sentences, "--sentences", "paths.sentences")?;
    let model = load_model(&ck)?;
    let sentences = ingest::read_sentences(&sent_path)?;
    let sentence = sentences
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| UserError(format!("no sentence {id:?} in {}", sent_path.display())))?;
    let g = model.generate_extractions(sentence, &cfg.decode);
    let it = iteration
        .checked_sub(1)
        .and_then(|i| g.iterations.get(i))
        .ok_or_else(|| {
            UserError(format!(
                "--iteration {iteration}: decoding ran {} iterations",
                g.iterations.len()
            ))
        })?;
    let w = create(out)?;
    neural::write_attention_csv(w, &it.input, &it.decoded.tokens, &it.decoded.attention)?;
    println!(
        "{} x {} attention matrix for: {}",
        it.decoded.tokens.len(),
        it.input.len(),
        it.decoded.tokens.join(" ")
    );
    Ok(())
}

fn synth_cmd(cfg: &PipelineConfig, dir: &Path, n: usize, min: usize, max: usize) -> Result<()> {
    if min == 0 || min > max || max > 16 {
        return Err(UserError("tuple counts must satisfy 1 <= min <= max <= 16".into()).into());
    }
    let corpus = synth::clause_corpus(n, min, max, cfg.seed);
    fs::create_dir_all(dir).map_err(|e| UserError(format!("{}: {e}", dir.display())))?;
    let mut w = create(&dir.join("sentences.tsv"))?;
    ingest::write_sentences(&mut w, &corpus.sentences)?;
    w.flush()?;
    let mut w = create(&dir.join("gold.tsv"))?;
    for (id, e) in corpus.gold_items() {
        writeln!(
            w,
            "{id}\t{}\t{}\t{}",
            itermem::tuple::join(&e.arg1),
            itermem::tuple::join(&e.rel),
            itermem::tuple::join(&e.arg2)
        )?;
    }
    w.flush()?;
    for (src, items) in synth::imitation_sources(&corpus, cfg.seed.wrapping_add(1)) {
        let mut w = create(&dir.join(format!("{src}.tsv")))?;
        ingest::write_extractions(&mut w, &items, true, false)?;
        w.flush()?;
    }
    println!("{} sentences, {} gold tuples in {}", corpus.sentences.len(), corpus.gold_items().len(), dir.display());
    Ok(())
}
