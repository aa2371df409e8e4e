//! Iterative-memory training instances.
//!
//! A sentence with `m` ordered extractions yields `m + 1` instances. Instance `k`
//! reads the sentence plus the first `k - 1` extractions and predicts extraction `k`;
//! the last one reads all of them and predicts the end-of-extractions symbol.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tuple::{join, linearize, memory_tokens, split_tokens, Extraction, Sentence, Token, CLS};

pub const DEFAULT_MAX_INPUT_LEN: usize = 300;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingInstance {
    pub input: Vec<Token>,
    pub target: Vec<Token>,
}

impl TrainingInstance {
    pub fn is_end(&self) -> bool {
        self.target.len() == 1 && self.target[0] == Token::end_of_extractions()
    }
}

/// Builds the `m + 1` instances for one sentence.
///
/// When the memory would push an input past `max_input_len`, the trailing extractions
/// are left out of the memory; every target is still emitted.
pub fn build_instances(
    sentence: &Sentence,
    exts: &[Extraction],
    max_input_len: usize,
) -> Result<Vec<TrainingInstance>> {
    let linear = exts.iter().map(linearize).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(exts.len() + 1);
    let mut in_memory = 0usize;
    let mut len = 1 + sentence.tokens.len();
    let mut memory_full = false;
    for k in 0..=linear.len() {
        if k > 0 && !memory_full {
            let add = 1 + linear[k - 1].len();
            if len + add <= max_input_len {
                len += add;
                in_memory = k;
            } else {
                memory_full = true;
            }
        }
        let input = memory_tokens(&sentence.tokens, &linear[..in_memory]);
        let target = match linear.get(k) {
            Some(t) => t.clone(),
            None => vec![Token::end_of_extractions()],
        };
        out.push(TrainingInstance { input, target });
    }
    Ok(out)
}

/// Shuffles each sentence's extraction order with a seeded RNG (ordering ablation).
pub fn shuffle_order(pairs: &mut [(Sentence, Vec<Extraction>)], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, exts) in pairs.iter_mut() {
        exts.shuffle(&mut rng);
    }
}

/// `input tokens<TAB>target tokens`, both space-joined.
pub fn write_instances<W: Write>(mut w: W, instances: &[TrainingInstance]) -> std::io::Result<()> {
    for inst in instances {
        writeln!(w, "{}\t{}", join(&inst.input), join(&inst.target))?;
    }
    Ok(())
}

pub fn parse_instances(text: &str, path: &Path) -> Result<Vec<TrainingInstance>> {
    let mut out = Vec::new();
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
        let (inp, tgt) = line
            .split_once('\t')
            .ok_or_else(|| err("expected input<TAB>target".into()))?;
        let input = split_tokens(inp).map_err(|e| err(e.to_string()))?;
        let target = split_tokens(tgt).map_err(|e| err(e.to_string()))?;
        if input.first().map(Token::as_str) != Some(CLS) {
            return Err(err("input must begin with [CLS]".into()));
        }
        if target.is_empty() {
            return Err(err("empty target".into()));
        }
        out.push(TrainingInstance { input, target });
    }
    Ok(out)
}

pub fn read_instances(path: &Path) -> Result<Vec<TrainingInstance>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instances(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuple::{parse_linearized, Source};

    fn toks(s: &str) -> Vec<Token> {
        split_tokens(s).unwrap()
    }

    fn ext(a: &str, r: &str, b: &str) -> Extraction {
        Extraction::from_text(a, r, b, 1.0, Source::model()).unwrap()
    }

    #[test]
    fn worked_example() {
        let s = Sentence::from_text("s", "I ate an apple and an orange.").unwrap();
        let exts = [ext("i", "ate", "an apple"), ext("i", "ate", "an orange")];
        let inst = build_instances(&s, &exts, DEFAULT_MAX_INPUT_LEN).unwrap();
        assert_eq!(inst.len(), 3);
        assert_eq!(inst[0].input, toks("[CLS] i ate an apple and an orange ."));
        assert_eq!(inst[0].target, toks("i <rel> ate <obj> an apple"));
        assert_eq!(
            inst[1].input,
            toks("[CLS] i ate an apple and an orange . [SEP] i <rel> ate <obj> an apple")
        );
        assert_eq!(inst[1].target, toks("i <rel> ate <obj> an orange"));
        assert!(inst[2].is_end());
        assert!(!inst[1].is_end());
    }

    #[test]
    fn counts_and_base_case() {
        let s = Sentence::from_text("s", "x").unwrap();
        for m in 0..=5 {
            let exts: Vec<_> = (0..m).map(|i| ext(&format!("a{i}"), "r", "b")).collect();
            assert_eq!(build_instances(&s, &exts, 300).unwrap().len(), m + 1);
        }
        let only = build_instances(&s, &[], 300).unwrap();
        assert_eq!(only, vec![TrainingInstance {
            input: toks("[CLS] x"),
            target: vec![Token::end_of_extractions()],
        }]);
    }

    #[test]
    fn cap_drops_trailing_memory_but_keeps_targets() {
        let s = Sentence::from_text("s", "a b c").unwrap();
        let exts = [ext("a", "b", "c"), ext("d", "e", "f"), ext("g", "h", "i")];
        // [CLS] a b c = 4, each memory entry adds 6
        let inst = build_instances(&s, &exts, 11).unwrap();
        assert_eq!(inst.len(), 4);
        assert_eq!(inst[1].input.len(), 10);
        assert_eq!(inst[2].input, inst[1].input);
        assert_eq!(inst[3].input, inst[1].input);
        let targets: Vec<Extraction> = inst[..3].iter().map(|i| parse_linearized(&i.target).unwrap()).collect();
        assert_eq!(targets, exts);
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let s = Sentence::from_text("s", "I ate an apple.").unwrap();
        let inst = build_instances(&s, &[ext("i", "ate", "an apple")], 300).unwrap();
        let mut buf = Vec::new();
        write_instances(&mut buf, &inst).unwrap();
        let back = parse_instances(std::str::from_utf8(&buf).unwrap(), Path::new("t")).unwrap();
        assert_eq!(back, inst);
        assert!(parse_instances("a b\tc", Path::new("t")).is_err());
        assert!(parse_instances("[CLS] a\t", Path::new("t")).is_err());
    }
}
