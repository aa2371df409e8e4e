//! Score-and-filter aggregation.
//!
//! Every pooled extraction of a sentence becomes a node with a quality score `f`;
//! every pair is weighted by the bigram similarity `R` of the two serialized tuples.
//! The kept subset maximizes `Σ f(i) - Σ_{j<k} R(j,k)` over the selected nodes, each
//! unordered pair counted once. The maximization is handed to the roof-duality solver
//! as the minimization of `Σ -f(i) x_i + Σ R(j,k) x_j x_k`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{ExtractionPool, SourceSet};
use crate::qpbo::{self, CompletionStrategy, PseudoBooleanFunction};
use crate::scalar::Scalar;
use crate::tuple::{tokenize, Extraction, Sentence, Source, Token};

fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

fn ngram_f1(a: &[Token], b: &[Token], n: usize) -> f64 {
    let ca = ngram_counts(a, n);
    let cb = ngram_counts(b, n);
    let total_a: usize = ca.values().sum();
    let total_b: usize = cb.values().sum();
    if total_a == 0 || total_b == 0 {
        return 0.0;
    }
    let matched: usize = ca
        .iter()
        .map(|(g, &k)| k.min(cb.get(g).copied().unwrap_or(0)))
        .sum();
    let p = matched as f64 / total_a as f64;
    let r = matched as f64 / total_b as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Symmetric ROUGE-2: F1 of clipped bigram overlap. Falls back to unigram F1 when
/// either side has fewer than two tokens.
pub fn rouge2(a: &[Token], b: &[Token]) -> f64 {
    if a.len() < 2 || b.len() < 2 {
        ngram_f1(a, b, 1)
    } else {
        ngram_f1(a, b, 2)
    }
}

/// Similarity of two tuples, serialized as `arg1 ++ rel ++ arg2`.
pub fn tuple_similarity(a: &Extraction, b: &Extraction) -> f64 {
    rouge2(&a.flat_tokens(), &b.flat_tokens())
}

/// Assigns a quality score in `[0, 1]` to an extraction of a sentence.
pub trait Scorer: Sync {
    fn score(&self, sentence: &Sentence, ext: &Extraction) -> Result<f64>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, sentence: &Sentence, ext: &Extraction) -> Result<f64> {
        (**self).score(sentence, ext)
    }
}

/// Rank-normalized source confidence: the extraction at 1-based rank `r` among the
/// `m` extractions its source produced for the sentence scores `1 - r / (m + 1)`.
#[derive(Debug, Clone, Default)]
pub struct RankScorer {
    scores: HashMap<(String, Extraction), f64>,
}

impl RankScorer {
    pub fn from_pools(pools: &[ExtractionPool], set: &SourceSet) -> Self {
        let mut scores = HashMap::new();
        for pool in pools {
            // ranks within the deduplicated pool, so a pooled file scores like the pools it came from
            let pooled = ExtractionPool::new(pool.sentence.clone(), pool.extractions.clone());
            for src in pooled.sources(set) {
                let ranked = pooled.by_source(&src, set);
                let m = ranked.len() as f64;
                for (r, e) in ranked.into_iter().enumerate() {
                    let s = 1.0 - (r + 1) as f64 / (m + 1.0);
                    scores.insert((pool.sentence.id.clone(), e), s);
                }
            }
        }
        RankScorer { scores }
    }
}

impl Scorer for RankScorer {
    fn score(&self, sentence: &Sentence, ext: &Extraction) -> Result<f64> {
        self.scores
            .get(&(sentence.id.clone(), ext.clone()))
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no rank for {ext} in {}", sentence.id)))
    }
}

/// Scores read from `sentence_id<TAB>arg1<TAB>rel<TAB>arg2<TAB>score`.
#[derive(Debug, Clone, Default)]
pub struct ExternalScores {
    scores: HashMap<(String, Extraction), f64>,
}

impl ExternalScores {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut scores = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", f.len())));
            }
            let score: f64 = f[4]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad score {:?}", f[4])))?;
            let e = Extraction::new(tokenize(f[1]), tokenize(f[2]), tokenize(f[3]), 1.0, Source::new("external"))
                .map_err(|e| err(e.to_string()))?;
            scores.insert((f[0].trim().to_string(), e), score);
        }
        Ok(ExternalScores { scores })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

impl Scorer for ExternalScores {
    fn score(&self, sentence: &Sentence, ext: &Extraction) -> Result<f64> {
        self.scores
            .get(&(sentence.id.clone(), ext.clone()))
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("no external score for {ext} in {}", sentence.id)))
    }
}

/// Complete graph over the pool: node scores and pairwise redundancy.
#[derive(Debug, Clone)]
pub struct RedundancyGraph<T> {
    pub nodes: Vec<Extraction>,
    pub scores: Vec<T>,
    /// Row-major `n x n`, symmetric, zero diagonal.
    redundancy: Vec<T>,
}

impl<T: Scalar> RedundancyGraph<T> {
    /// Builds a graph from explicit values. `redundancy` is row-major `n x n`; it must be
    /// symmetric with entries in `[0, 1]`. The diagonal is forced to zero.
    pub fn new(nodes: Vec<Extraction>, scores: Vec<T>, mut redundancy: Vec<T>) -> Result<Self> {
        let n = scores.len();
        if nodes.len() != n || redundancy.len() != n * n {
            return Err(Error::InvalidInput("graph dimensions disagree".into()));
        }
        for i in 0..n {
            redundancy[i * n + i] = T::zero();
            for j in 0..n {
                let r = redundancy[i * n + j];
                if !(r >= T::zero() && r <= T::one()) || r != redundancy[j * n + i] {
                    return Err(Error::InvalidInput(format!(
                        "redundancy ({i}, {j}) must be symmetric and in [0, 1]"
                    )));
                }
            }
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite node score".into()));
        }
        Ok(RedundancyGraph {
            nodes,
            scores,
            redundancy,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn redundancy(&self, j: usize, k: usize) -> T {
        self.redundancy[j * self.len() + k]
    }

    /// Selection objective of a node subset: scores minus each selected pair once.
    pub fn objective(&self, selected: &[usize]) -> T {
        let mut v = T::zero();
        for (a, &j) in selected.iter().enumerate() {
            v += self.scores[j];
            for &k in &selected[a + 1..] {
                v -= self.redundancy(j, k);
            }
        }
        v
    }

    /// The minimization form handed to the solver.
    pub fn to_pseudo_boolean(&self) -> PseudoBooleanFunction<T> {
        let n = self.len();
        let mut f = PseudoBooleanFunction::new(n);
        for (i, &s) in self.scores.iter().enumerate() {
            f.add_unary(i, T::zero(), -s).expect("finite score");
        }
        for j in 0..n {
            for k in j + 1..n {
                let r = self.redundancy(j, k);
                if r > T::zero() {
                    f.add_pairwise(j, k, [[T::zero(), T::zero()], [T::zero(), r]])
                        .expect("finite redundancy");
                }
            }
        }
        f
    }
}

/// Scores every pooled extraction and computes pairwise similarity.
/// A scorer failure gives the node score 0 and a warning.
pub fn build_graph<T: Scalar, S: Scorer + ?Sized>(
    pool: &ExtractionPool,
    scorer: &S,
) -> (RedundancyGraph<T>, Vec<String>) {
    let n = pool.extractions.len();
    let mut warnings = Vec::new();
    let scores: Vec<T> = pool
        .extractions
        .iter()
        .map(|e| match scorer.score(&pool.sentence, e) {
            Ok(s) if s.is_finite() => T::of(s.clamp(0.0, 1.0)),
            Ok(s) => {
                warnings.push(format!("{}: non-finite score {s} for {e}", pool.sentence.id));
                T::zero()
            }
            Err(err) => {
                warnings.push(format!("{}: {err}", pool.sentence.id));
                T::zero()
            }
        })
        .collect();
    let flat: Vec<Vec<Token>> = pool.extractions.iter().map(|e| e.flat_tokens()).collect();
    let mut redundancy = vec![T::zero(); n * n];
    for j in 0..n {
        for k in j + 1..n {
            let r = T::of(rouge2(&flat[j], &flat[k]));
            redundancy[j * n + k] = r;
            redundancy[k * n + j] = r;
        }
    }
    let g = RedundancyGraph {
        nodes: pool.extractions.clone(),
        scores,
        redundancy,
    };
    (g, warnings)
}

#[derive(Debug, Clone)]
pub struct Selection<T> {
    /// Selected node indices in pool order.
    pub indices: Vec<usize>,
    pub objective: T,
}

/// Maximizes the selection objective via roof duality plus exact completion.
pub fn select_subset<T: Scalar>(g: &RedundancyGraph<T>) -> Selection<T> {
    select_subset_with(g, CompletionStrategy::default())
}

pub fn select_subset_with<T: Scalar>(g: &RedundancyGraph<T>, strategy: CompletionStrategy) -> Selection<T> {
    let f = g.to_pseudo_boolean();
    let sol = qpbo::minimize(&f, strategy);
    let indices: Vec<usize> = sol
        .labeling
        .iter()
        .enumerate()
        .filter(|(_, &x)| x)
        .map(|(i, _)| i)
        .collect();
    let objective = g.objective(&indices);
    Selection { indices, objective }
}

#[derive(Debug, Clone)]
pub struct FilteredSentence {
    pub sentence: Sentence,
    /// Selected extractions, highest score first. Confidence holds the node score and
    /// source is `aggregated`.
    pub selected: Vec<Extraction>,
    pub objective: f64,
    pub pool_size: usize,
    pub warnings: Vec<String>,
}

/// Per-sentence graph construction and subset selection, run in parallel over pools.
pub fn score_and_filter<T: Scalar, S: Scorer + ?Sized>(
    pools: &[ExtractionPool],
    scorer: &S,
) -> Vec<FilteredSentence> {
    pools
        .par_iter()
        .map(|pool| {
            let (g, warnings) = build_graph::<T, S>(pool, scorer);
            let sel = select_subset(&g);
            let mut picked: Vec<(T, Extraction)> = sel
                .indices
                .iter()
                .map(|&i| (g.scores[i], g.nodes[i].clone()))
                .collect();
            // stable: equal scores keep pool order
            picked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
            FilteredSentence {
                sentence: pool.sentence.clone(),
                selected: picked
                    .into_iter()
                    .map(|(s, e)| e.with_confidence(s.to_f64_lossy()).with_source(Source::aggregated()))
                    .collect(),
                objective: sel.objective.to_f64_lossy(),
                pool_size: pool.extractions.len(),
                warnings,
            }
        })
        .collect()
}

/// Mean `rouge2` over all unordered within-sentence pairs.
pub fn mean_pairwise_similarity<'a, I>(groups: I) -> f64
where
    I: IntoIterator<Item = &'a [Extraction]>,
{
    let mut total = 0.0;
    let mut pairs = 0usize;
    for g in groups {
        for (j, a) in g.iter().enumerate() {
            for b in &g[j + 1..] {
                total += tuple_similarity(a, b);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}
