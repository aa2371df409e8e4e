use std::collections::{BTreeMap, HashSet};

use crate::tuple::Extraction;

/// English function words dropped before the redundancy metrics.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "of", "at", "by", "for", "with", "about",
    "to", "from", "in", "on", "into", "over", "under", "as", "is", "are", "was", "were",
    "be", "been", "being", "has", "have", "had", "do", "does", "did", "it", "its", "he",
    "she", "they", "them", "his", "her", "their", "this", "that", "these", "those", "who",
    "which", "what", "not", "no", ".", ",", ";", ":", "'s", "(", ")", "\"", "'", "!", "?",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RedundancyMetrics {
    /// Mean number of tuples each distinct output word appears in.
    pub mno: f64,
    /// Mean word-set intersection over union across within-sentence tuple pairs.
    pub iou: f64,
    pub tuples: usize,
}

fn content_words(e: &Extraction) -> HashSet<&str> {
    e.arg1
        .iter()
        .chain(&e.rel)
        .chain(&e.arg2)
        .map(|t| t.as_str())
        .filter(|w| !STOPWORDS.contains(w))
        .collect()
}

/// MNO is aggregated over the whole corpus (each distinct word counted once); IOU
/// averages over all unordered pairs of tuples from the same sentence. Pairs whose
/// word sets are both empty are skipped.
pub fn redundancy_metrics<'a, I>(sentences: I) -> RedundancyMetrics
where
    I: IntoIterator<Item = &'a [Extraction]>,
{
    let mut word_tuples: BTreeMap<&str, usize> = BTreeMap::new();
    let mut tuples = 0usize;
    let mut iou_sum = 0.0;
    let mut pairs = 0usize;
    for group in sentences {
        let sets: Vec<HashSet<&str>> = group.iter().map(content_words).collect();
        tuples += group.len();
        for s in &sets {
            for w in s {
                *word_tuples.entry(w).or_insert(0) += 1;
            }
        }
        for (j, a) in sets.iter().enumerate() {
            for b in &sets[j + 1..] {
                let union = a.union(b).count();
                if union == 0 {
                    continue;
                }
                iou_sum += a.intersection(b).count() as f64 / union as f64;
                pairs += 1;
            }
        }
    }
    let mno = if word_tuples.is_empty() {
        0.0
    } else {
        word_tuples.values().sum::<usize>() as f64 / word_tuples.len() as f64
    };
    let iou = if pairs == 0 { 0.0 } else { iou_sum / pairs as f64 };
    RedundancyMetrics { mno, iou, tuples }
}
