//! Reading extractor output, pooling extractions per sentence and building the
//! random-bootstrap corpus.
//!
//! Extraction TSV: `sentence_id<TAB>confidence<TAB>arg1<TAB>rel<TAB>arg2`, with an
//! optional sixth `source` column used by pooled and aggregated files. An empty
//! confidence field marks a source without confidences. Sentence TSV:
//! `sentence_id<TAB>raw text`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tuple::{join, Extraction, Sentence, Source};

/// A line that could not be turned into an extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionFile {
    pub items: Vec<(String, Extraction)>,
    pub malformed: Vec<LineIssue>,
    /// False when any well-formed line had an empty confidence field.
    pub has_confidence: bool,
}

fn parse_extraction_line(line: &str, source: &Source) -> std::result::Result<(String, Extraction, bool), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 && fields.len() != 6 {
        return Err(format!("expected 5 or 6 tab-separated fields, found {}", fields.len()));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err("empty sentence id".into());
    }
    let conf_field = fields[1].trim();
    let (confidence, has_conf) = if conf_field.is_empty() {
        (1.0, false)
    } else {
        let c: f64 = conf_field
            .parse()
            .map_err(|_| format!("unparseable confidence {conf_field:?}"))?;
        if !c.is_finite() {
            return Err(format!("non-finite confidence {conf_field:?}"));
        }
        (c, true)
    };
    let src = match fields.get(5).map(|s| s.trim()) {
        Some(s) if !s.is_empty() => Source::new(s),
        _ => source.clone(),
    };
    let ext = Extraction::from_text(fields[2], fields[3], fields[4], confidence, src)
        .map_err(|e| e.to_string())?;
    Ok((id.to_string(), ext, has_conf))
}

/// Parses extraction TSV text; malformed lines are reported, not fatal.
pub fn parse_extractions(text: &str, source: &Source) -> ExtractionFile {
    let mut out = ExtractionFile {
        has_confidence: true,
        ..Default::default()
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        match parse_extraction_line(line, source) {
            Ok((id, ext, has_conf)) => {
                out.has_confidence &= has_conf;
                out.items.push((id, ext));
            }
            Err(message) => out.malformed.push(LineIssue {
                line: i + 1,
                message,
            }),
        }
    }
    if out.items.is_empty() {
        out.has_confidence = false;
    }
    out
}

pub fn read_extractions(path: &Path, source: &Source) -> Result<ExtractionFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_extractions(&text, source))
}

/// Writes extraction TSV. With `with_source` the sixth column carries each source tag.
pub fn write_extractions<W: Write>(
    mut w: W,
    items: &[(String, Extraction)],
    has_confidence: bool,
    with_source: bool,
) -> std::io::Result<()> {
    for (id, e) in items {
        let conf = if has_confidence {
            format_confidence(e.confidence)
        } else {
            String::new()
        };
        write!(
            w,
            "{id}\t{conf}\t{}\t{}\t{}",
            join(&e.arg1),
            join(&e.rel),
            join(&e.arg2)
        )?;
        if with_source {
            write!(w, "\t{}", e.source)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Shortest representation that parses back to the same f64.
pub fn format_confidence(c: f64) -> String {
    format!("{c}")
}

pub fn parse_sentences(text: &str, path: &Path) -> Result<Vec<Sentence>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (id, body) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected sentence_id<TAB>text".into()))?;
        let id = id.trim();
        if !seen.insert(id.to_string()) {
            return Err(parse_err(format!("duplicate sentence id {id:?}")));
        }
        let s = Sentence::from_text(id, body).map_err(|e| parse_err(e.to_string()))?;
        out.push(s);
    }
    Ok(out)
}

pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sentences(&text, path)
}

pub fn write_sentences<W: Write>(mut w: W, sentences: &[Sentence]) -> std::io::Result<()> {
    for s in sentences {
        writeln!(w, "{}\t{}", s.id, join(&s.tokens))?;
    }
    Ok(())
}

/// Stable descending sort by confidence, or file order when the source has no
/// confidences.
pub fn order_for_bootstrap(mut exts: Vec<Extraction>, has_confidence: bool) -> Vec<Extraction> {
    if has_confidence {
        exts.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    }
    exts
}

/// A configured extractor. Rank is the position in the configured source list and
/// breaks confidence ties.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceInfo {
    pub name: Source,
    pub rank: usize,
    pub has_confidence: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SourceSet {
    sources: Vec<SourceInfo>,
}

impl SourceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a source; its rank is its position.
    pub fn push(&mut self, name: Source, has_confidence: bool) {
        if let Some(s) = self.sources.iter_mut().find(|s| s.name == name) {
            s.has_confidence = has_confidence;
            return;
        }
        let rank = self.sources.len();
        self.sources.push(SourceInfo {
            name,
            rank,
            has_confidence,
        });
    }

    pub fn get(&self, name: &Source) -> Option<&SourceInfo> {
        self.sources.iter().find(|s| &s.name == name)
    }

    pub fn rank(&self, name: &Source) -> usize {
        self.get(name).map_or(usize::MAX, |s| s.rank)
    }

    pub fn has_confidence(&self, name: &Source) -> bool {
        self.get(name).is_none_or(|s| s.has_confidence)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SourceInfo> {
        self.sources.iter()
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }
}

/// All extractions for one sentence, deduplicated slotwise.
#[derive(Debug, Clone)]
pub struct ExtractionPool {
    pub sentence: Sentence,
    pub extractions: Vec<Extraction>,
    /// Each source's own output for the sentence before cross-source dedup, in file order.
    /// A source whose tuples all duplicate a higher-ranked source is still listed here.
    pub outputs: Vec<(Source, Vec<Extraction>)>,
}

impl ExtractionPool {
    /// A pool whose per-source outputs are read off the pooled extractions.
    pub fn new(sentence: Sentence, extractions: Vec<Extraction>) -> Self {
        let mut outputs: Vec<(Source, Vec<Extraction>)> = Vec::new();
        for e in &extractions {
            match outputs.iter_mut().find(|(s, _)| s == &e.source) {
                Some((_, v)) => v.push(e.clone()),
                None => outputs.push((e.source.clone(), vec![e.clone()])),
            }
        }
        ExtractionPool {
            sentence,
            extractions,
            outputs,
        }
    }

    /// Sources with output for this sentence, in source-set rank order.
    pub fn sources(&self, set: &SourceSet) -> Vec<Source> {
        let mut out: Vec<Source> = self
            .outputs
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(s, _)| s.clone())
            .collect();
        out.sort_by_key(|s| set.rank(s));
        out
    }

    /// One source's own extractions in bootstrap order.
    pub fn by_source(&self, source: &Source, set: &SourceSet) -> Vec<Extraction> {
        let exts = self
            .outputs
            .iter()
            .find(|(s, _)| s == source)
            .map(|(_, v)| v.clone())
            .unwrap_or_default();
        order_for_bootstrap(exts, set.has_confidence(source))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoolReport {
    /// Per-source extraction counts before deduplication, in rank order.
    pub per_source: Vec<(Source, usize)>,
    pub duplicates_removed: usize,
    /// Extractions whose sentence id is missing from the sentence file.
    pub orphans: usize,
    pub pooled: usize,
}

/// Merges per-source extraction lists into per-sentence pools, in sentence-file order.
///
/// Within a pool, extractions are ordered by confidence descending, ties broken by
/// source rank and then file order. The first occurrence of a slotwise duplicate wins.
/// Extractions of a source without confidences enter with confidence 1.0, so they keep
/// their file order.
pub fn pool_extractions(
    sentences: &[Sentence],
    files: &[(Source, ExtractionFile)],
    set: &SourceSet,
) -> (Vec<ExtractionPool>, PoolReport) {
    let index: HashMap<&str, usize> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut buckets: Vec<Vec<(usize, usize, Extraction)>> = vec![Vec::new(); sentences.len()];
    let mut outputs: Vec<Vec<(Source, Vec<Extraction>)>> = vec![Vec::new(); sentences.len()];
    let mut report = PoolReport::default();
    let mut ordered: Vec<&(Source, ExtractionFile)> = files.iter().collect();
    ordered.sort_by_key(|(s, _)| set.rank(s));
    for (src, file) in ordered {
        report.per_source.push((src.clone(), file.items.len()));
        let rank = set.rank(src);
        let known = set.has_confidence(src);
        for (pos, (id, e)) in file.items.iter().enumerate() {
            let Some(&i) = index.get(id.as_str()) else {
                report.orphans += 1;
                continue;
            };
            let e = if known { e.clone() } else { e.clone().with_confidence(1.0) };
            match outputs[i].last_mut() {
                Some((s, v)) if s == src => v.push(e.clone()),
                _ => outputs[i].push((src.clone(), vec![e.clone()])),
            }
            buckets[i].push((rank, pos, e));
        }
    }
    let pools = sentences
        .iter()
        .zip(buckets)
        .zip(outputs)
        .map(|((s, mut bucket), outputs)| {
            bucket.sort_by(|a, b| {
                b.2.confidence
                    .total_cmp(&a.2.confidence)
                    .then(a.0.cmp(&b.0))
                    .then(a.1.cmp(&b.1))
            });
            let mut seen = HashSet::new();
            let mut extractions = Vec::with_capacity(bucket.len());
            for (_, _, e) in bucket {
                if seen.insert(e.clone()) {
                    extractions.push(e);
                } else {
                    report.duplicates_removed += 1;
                }
            }
            report.pooled += extractions.len();
            ExtractionPool {
                sentence: s.clone(),
                extractions,
                outputs,
            }
        })
        .collect();
    (pools, report)
}

/// Rebuilds pools from a pooled extraction file (sixth column = source).
pub fn pools_from_items(sentences: &[Sentence], items: &[(String, Extraction)]) -> (Vec<ExtractionPool>, usize) {
    let index: HashMap<&str, usize> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut exts: Vec<Vec<Extraction>> = vec![Vec::new(); sentences.len()];
    let mut orphans = 0;
    for (id, e) in items {
        match index.get(id.as_str()) {
            Some(&i) => {
                if !exts[i].contains(e) {
                    exts[i].push(e.clone());
                }
            }
            None => orphans += 1,
        }
    }
    let pools = sentences
        .iter()
        .zip(exts)
        .map(|(s, e)| ExtractionPool::new(s.clone(), e))
        .collect();
    (pools, orphans)
}

/// Sentences paired with ordered extractions, the input to training-data construction.
#[derive(Debug, Clone, Default)]
pub struct BootstrapCorpus {
    pub pairs: Vec<(Sentence, Vec<Extraction>)>,
}

impl BootstrapCorpus {
    pub fn to_items(&self) -> Vec<(String, Extraction)> {
        self.pairs
            .iter()
            .flat_map(|(s, exts)| exts.iter().map(move |e| (s.id.clone(), e.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BootstrapReport {
    pub skipped_empty: usize,
    pub chosen: Vec<(String, Source)>,
}

fn sentence_rng(seed: u64, sentence_id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(sentence_id.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// For each sentence, picks one source uniformly among those present and keeps all of
/// that source's extractions. The choice depends only on `(seed, sentence id)`.
pub fn build_random_bootstrap(
    pools: &[ExtractionPool],
    set: &SourceSet,
    seed: u64,
) -> (BootstrapCorpus, BootstrapReport) {
    let mut corpus = BootstrapCorpus::default();
    let mut report = BootstrapReport::default();
    for pool in pools {
        let present = pool.sources(set);
        if present.is_empty() {
            report.skipped_empty += 1;
            continue;
        }
        let mut rng = sentence_rng(seed, &pool.sentence.id);
        let pick = present[rng.gen_range(0..present.len())].clone();
        let exts = pool.by_source(&pick, set);
        report.chosen.push((pool.sentence.id.clone(), pick));
        corpus.pairs.push((pool.sentence.clone(), exts));
    }
    (corpus, report)
}

/// Builds the single-source bootstrap corpus: every pool's extractions in bootstrap order.
pub fn single_source_corpus(pools: &[ExtractionPool], has_confidence: bool) -> BootstrapCorpus {
    BootstrapCorpus {
        pairs: pools
            .iter()
            .map(|p| {
                (
                    p.sentence.clone(),
                    order_for_bootstrap(p.extractions.clone(), has_confidence),
                )
            })
            .collect(),
    }
}
