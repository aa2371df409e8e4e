//! Benchmark-style scoring of predicted tuples against gold tuples.
//!
//! Tuples are compared slot by slot with clipped token-multiset overlap. System
//! precision averages, over predictions, the best pair precision against any gold of
//! the same sentence. System recall averages, over golds, the pair recall of a greedy
//! one-to-one assignment. Sweeping a confidence threshold gives the P-R curve.

mod redundancy;
pub mod plot;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

pub use redundancy::{redundancy_metrics, RedundancyMetrics, STOPWORDS};

use crate::error::{Error, Result};
use crate::tuple::{tokenize, Extraction, Source, Token};

/// Gold (or predicted) tuples grouped by sentence id.
pub type TupleSet = BTreeMap<String, Vec<Extraction>>;

/// Reads `sentence_id<TAB>arg1<TAB>rel<TAB>arg2`.
pub fn parse_gold(text: &str, path: &Path) -> Result<TupleSet> {
    let mut out = TupleSet::new();
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
        if f.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", f.len())));
        }
        let e = Extraction::new(tokenize(f[1]), tokenize(f[2]), tokenize(f[3]), 1.0, Source::new("gold"))
            .map_err(|e| err(e.to_string()))?;
        out.entry(f[0].trim().to_string()).or_default().push(e);
    }
    Ok(out)
}

pub fn read_gold(path: &Path) -> Result<TupleSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gold(&text, path)
}

pub fn group_by_sentence(items: Vec<(String, Extraction)>) -> TupleSet {
    let mut out = TupleSet::new();
    for (id, e) in items {
        out.entry(id).or_default().push(e);
    }
    out
}

fn clipped_overlap(a: &[Token], b: &[Token]) -> usize {
    let mut counts: HashMap<&Token, usize> = HashMap::new();
    for t in b {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut matched = 0;
    for t in a {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    matched
}

/// Slot-aligned token overlap: `(matched / pred tokens, matched / gold tokens)`.
pub fn match_scores(pred: &Extraction, gold: &Extraction) -> (f64, f64) {
    let mut matched = 0;
    let mut pred_total = 0;
    let mut gold_total = 0;
    for (p, g) in pred.slots().iter().zip(gold.slots()) {
        matched += clipped_overlap(p, g);
        pred_total += p.len();
        gold_total += g.len();
    }
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    (ratio(matched, pred_total), ratio(matched, gold_total))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

impl PrPoint {
    pub fn f1(&self) -> f64 {
        f1(self.precision, self.recall)
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Greedy one-to-one assignment maximizing pair recall; returns the recall sum.
pub fn greedy_recall_sum(preds: &[&Extraction], golds: &[Extraction]) -> f64 {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in golds.iter().enumerate() {
            let (_, r) = match_scores(p, g);
            if r > 0.0 {
                pairs.push((r, pi, gi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; preds.len()];
    let mut gold_used = vec![false; golds.len()];
    let mut sum = 0.0;
    for (r, pi, gi) in pairs {
        if !pred_used[pi] && !gold_used[gi] {
            pred_used[pi] = true;
            gold_used[gi] = true;
            sum += r;
        }
    }
    sum
}

/// System precision and recall of the predictions at or above `threshold`.
///
/// With no predictions, precision is reported as 1.0.
pub fn system_pr_at(preds: &TupleSet, golds: &TupleSet, threshold: f64) -> (f64, f64) {
    let gold_total: usize = golds.values().map(Vec::len).sum();
    let mut pred_count = 0usize;
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let empty = Vec::new();
    for (id, ps) in preds {
        let kept: Vec<&Extraction> = ps.iter().filter(|e| e.confidence >= threshold).collect();
        if kept.is_empty() {
            continue;
        }
        let gs = golds.get(id).unwrap_or(&empty);
        pred_count += kept.len();
        for p in &kept {
            precision_sum += gs
                .iter()
                .map(|g| match_scores(p, g).0)
                .fold(0.0, f64::max);
        }
        recall_sum += greedy_recall_sum(&kept, gs);
    }
    let precision = if pred_count == 0 {
        1.0
    } else {
        precision_sum / pred_count as f64
    };
    let recall = if gold_total == 0 {
        0.0
    } else {
        recall_sum / gold_total as f64
    };
    (precision, recall)
}

/// Precision and recall of all predictions regardless of confidence.
pub fn system_pr(preds: &TupleSet, golds: &TupleSet) -> (f64, f64) {
    system_pr_at(preds, golds, f64::NEG_INFINITY)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Thresholds strictly decreasing, recall non-decreasing.
    pub points: Vec<PrPoint>,
    pub optimal_f1: f64,
    pub auc: f64,
    pub last_f1: f64,
}

/// Sweeps every distinct prediction confidence from high to low.
///
/// AUC is the trapezoidal area under precision over recall between the measured
/// points only; a single-point curve has area 0.
pub fn pr_curve(preds: &TupleSet, golds: &TupleSet) -> Result<PrCurve> {
    if golds.values().all(Vec::is_empty) {
        return Err(Error::EmptyGold);
    }
    let mut thresholds: Vec<f64> = preds.values().flatten().map(|e| e.confidence).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let points: Vec<PrPoint> = thresholds
        .iter()
        .map(|&t| {
            let (precision, recall) = system_pr_at(preds, golds, t);
            PrPoint {
                threshold: t,
                precision,
                recall,
            }
        })
        .collect();
    let optimal_f1 = points.iter().map(PrPoint::f1).fold(0.0, f64::max);
    let last_f1 = points.last().map_or(0.0, PrPoint::f1);
    let auc = points
        .windows(2)
        .map(|w| (w[1].recall - w[0].recall) * (w[0].precision + w[1].precision) / 2.0)
        .sum();
    Ok(PrCurve {
        points,
        optimal_f1,
        auc,
        last_f1,
    })
}

/// `threshold,precision,recall,f1` rows, then a blank line and the
/// `optimal_f1,auc,last_f1` summary.
pub fn write_curve_csv<W: Write>(mut w: W, c: &PrCurve) -> std::io::Result<()> {
    writeln!(w, "threshold,precision,recall,f1")?;
    for p in &c.points {
        writeln!(w, "{},{},{},{}", p.threshold, p.precision, p.recall, p.f1())?;
    }
    writeln!(w)?;
    writeln!(w, "optimal_f1,auc,last_f1")?;
    writeln!(w, "{},{},{}", c.optimal_f1, c.auc, c.last_f1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ext(a: &str, r: &str, b: &str, c: f64) -> Extraction {
        Extraction::from_text(a, r, b, c, Source::model()).unwrap()
    }

    fn set(items: &[(&str, Extraction)]) -> TupleSet {
        group_by_sentence(items.iter().map(|(i, e)| (i.to_string(), e.clone())).collect())
    }

    #[test]
    fn match_examples() {
        let g = ext("he", "was appointed", "commander of the order", 1.0);
        let p = ext("he", "was appointed", "commander", 1.0);
        assert_eq!(match_scores(&g, &g), (1.0, 1.0));
        let (pp, rr) = match_scores(&p, &g);
        assert_eq!(pp, 1.0);
        assert!((rr - 4.0 / 7.0).abs() < 1e-15);
        assert_eq!(match_scores(&ext("a", "b", "c", 1.0), &ext("x", "y", "z", 1.0)), (0.0, 0.0));
    }

    #[test]
    fn slots_are_aligned() {
        // same words in swapped slots do not match
        let (p, r) = match_scores(&ext("a", "b", "c", 1.0), &ext("c", "b", "a", 1.0));
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        assert!((r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn system_pr_examples() {
        let g1 = ext("a", "b", "c", 1.0);
        let g2 = ext("d", "e", "f", 1.0);
        let golds = set(&[("s", g1.clone()), ("s", g2.clone())]);
        assert_eq!(system_pr(&golds, &golds), (1.0, 1.0));
        assert_eq!(system_pr(&TupleSet::new(), &golds), (1.0, 0.0));
        assert_eq!(system_pr(&set(&[("s", g1)]), &golds), (1.0, 0.5));
    }

    #[test]
    fn predictions_on_unknown_sentence_hurt_precision() {
        let golds = set(&[("s", ext("a", "b", "c", 1.0))]);
        let preds = set(&[("s", ext("a", "b", "c", 1.0)), ("t", ext("a", "b", "c", 1.0))]);
        assert_eq!(system_pr(&preds, &golds), (0.5, 1.0));
    }

    #[test]
    fn three_prediction_curve() {
        // hand enumeration: thresholds 0.9, 0.5, 0.2
        //   0.9: {c1}         P = 1,   R = 1/2
        //   0.5: {c1, w}      P = 1/2, R = 1/2
        //   0.2: {c1, w, c2}  P = 2/3, R = 1
        let g1 = ext("a", "b", "c", 1.0);
        let g2 = ext("d", "e", "f", 1.0);
        let golds = set(&[("s", g1.clone()), ("s", g2.clone())]);
        let preds = set(&[
            ("s", g1.with_confidence(0.9)),
            ("s", ext("x", "y", "z", 0.5)),
            ("s", g2.with_confidence(0.2)),
        ]);
        let c = pr_curve(&preds, &golds).unwrap();
        let want = [(0.9, 1.0, 0.5), (0.5, 0.5, 0.5), (0.2, 2.0 / 3.0, 1.0)];
        assert_eq!(c.points.len(), 3);
        for (p, &(t, pp, rr)) in c.points.iter().zip(&want) {
            assert_eq!(p.threshold, t);
            assert!((p.precision - pp).abs() < 1e-15);
            assert!((p.recall - rr).abs() < 1e-15);
        }
        assert!((c.optimal_f1 - 0.8).abs() < 1e-12);
        assert!((c.last_f1 - 0.8).abs() < 1e-12);
        // measured recall range only: 0 + 0.5 * (1/2 + 2/3) / 2
        assert!((c.auc - 0.5 * (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn curve_needs_gold() {
        assert!(matches!(pr_curve(&TupleSet::new(), &TupleSet::new()), Err(Error::EmptyGold)));
    }

    #[test]
    fn gold_parse() {
        let g = parse_gold("s1\tHe\twas\tthere\ns1\ta\tb\t\n", Path::new("g")).unwrap();
        assert_eq!(g["s1"].len(), 2);
        assert!(parse_gold("s1\ta\tb", Path::new("g")).is_err());
        assert!(parse_gold("s1\t\tb\tc", Path::new("g")).is_err());
    }
}
