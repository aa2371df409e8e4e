use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::vocab::EOS;
use crate::error::{Error, Result};
use crate::filter::Scorer;
use crate::scalar::Scalar;
use crate::train_data::DEFAULT_MAX_INPUT_LEN;
use crate::tuple::{linearize, memory_tokens, parse_linearized, Extraction, Sentence, Token, END_OF_EXTRACTIONS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// Extractions attempted per sentence, well-formed or not.
    pub max_iters: usize,
    /// Tokens emitted per extraction before decoding is cut off.
    pub max_len: usize,
    /// Memory that would exceed this many input tokens is left out.
    pub max_input_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_iters: 16,
            max_len: 40,
            max_input_len: DEFAULT_MAX_INPUT_LEN,
        }
    }
}

/// Greedy decode of a single extraction.
#[derive(Debug, Clone)]
pub struct Decoded<T> {
    /// Emitted tokens, EOS excluded.
    pub tokens: Vec<String>,
    /// Log-probability of every emitted token, EOS included when reached.
    pub log_probs: Vec<f64>,
    /// One attention row per decoder step.
    pub attention: Vec<Vec<T>>,
    pub reached_eos: bool,
}

impl<T> Decoded<T> {
    /// `exp` of the mean token log-probability.
    pub fn confidence(&self) -> f64 {
        mean_prob(&self.log_probs)
    }
}

fn mean_prob(log_probs: &[f64]) -> f64 {
    if log_probs.is_empty() {
        return 0.0;
    }
    (log_probs.iter().sum::<f64>() / log_probs.len() as f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    EndOfExtractions,
    IterationCap,
}

/// One pass of the extraction loop.
#[derive(Debug, Clone)]
pub struct Iteration<T> {
    pub input: Vec<Token>,
    pub decoded: Decoded<T>,
    /// Index into [`Generation::extractions`] when the output parsed.
    pub extraction: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Generation<T> {
    pub extractions: Vec<Extraction>,
    pub malformed: usize,
    pub iterations: Vec<Iteration<T>>,
    pub stop: StopReason,
}

impl<T: Scalar> Model<T> {
    pub fn greedy_decode(&self, input: &[Token], max_len: usize) -> Decoded<T> {
        let enc = self.encode(input);
        let mut state = self.initial_state(&enc);
        let mut tokens: Vec<String> = Vec::new();
        let mut log_probs = Vec::new();
        let mut reached_eos = false;
        for _ in 0..max_len {
            let (dist, next) = self.decode_step(&enc, &state, tokens.last().map(String::as_str));
            state = next;
            let (tok, p) = dist.argmax(&self.vocab, &enc.source);
            log_probs.push(p.to_f64_lossy().ln());
            if tok == EOS {
                reached_eos = true;
                break;
            }
            tokens.push(tok);
        }
        Decoded {
            tokens,
            log_probs,
            attention: state.attention,
            reached_eos,
        }
    }

    /// Extracts tuples one at a time, feeding each back into the memory, until the model
    /// emits the end-of-extractions symbol or `max_iters` passes have run.
    pub fn generate_extractions(&self, sentence: &Sentence, cfg: &DecodeConfig) -> Generation<T> {
        let mut priors: Vec<Vec<Token>> = Vec::new();
        let mut extractions = Vec::new();
        let mut iterations = Vec::new();
        let mut malformed = 0usize;
        let mut stop = StopReason::IterationCap;
        for _ in 0..cfg.max_iters {
            let input = capped_memory(&sentence.tokens, &priors, cfg.max_input_len);
            let decoded = self.greedy_decode(&input, cfg.max_len);
            if decoded.tokens.len() == 1 && decoded.tokens[0] == END_OF_EXTRACTIONS {
                iterations.push(Iteration { input, decoded, extraction: None });
                stop = StopReason::EndOfExtractions;
                break;
            }
            let raw: Vec<Token> = decoded
                .tokens
                .iter()
                .filter_map(|t| Token::new(t).ok())
                .collect();
            let parsed = parse_linearized(&raw).and_then(|e| Ok((linearize(&e)?, e)));
            let extraction = match parsed {
                Ok((lin, e)) => {
                    priors.push(lin);
                    extractions.push(e.with_confidence(decoded.confidence()));
                    Some(extractions.len() - 1)
                }
                Err(_) => {
                    malformed += 1;
                    priors.push(raw);
                    None
                }
            };
            iterations.push(Iteration { input, decoded, extraction });
        }
        Generation {
            extractions,
            malformed,
            iterations,
            stop,
        }
    }

    /// [`Model::generate_extractions`] over many sentences in parallel.
    pub fn generate_corpus(&self, sentences: &[Sentence], cfg: &DecodeConfig) -> Vec<Generation<T>> {
        sentences
            .par_iter()
            .map(|s| self.generate_extractions(s, cfg))
            .collect()
    }

    /// `exp` of the mean token log-probability of the linearized extraction (EOS
    /// included) force-decoded against the sentence alone.
    pub fn score_extraction(&self, sentence: &Sentence, ext: &Extraction) -> Result<f64> {
        let target = linearize(ext)?;
        let input = memory_tokens(&sentence.tokens, &[]);
        let lp: Vec<f64> = self
            .target_probs(&input, &target)
            .into_iter()
            .map(|p| p.to_f64_lossy().ln())
            .collect();
        Ok(mean_prob(&lp))
    }
}

impl<T: Scalar> Scorer for Model<T> {
    fn score(&self, sentence: &Sentence, ext: &Extraction) -> Result<f64> {
        self.score_extraction(sentence, ext)
    }
}

/// Sentence plus as many leading priors as fit in `max_len` tokens.
pub fn capped_memory(sentence: &[Token], priors: &[Vec<Token>], max_len: usize) -> Vec<Token> {
    let mut len = 1 + sentence.len();
    let mut keep = 0;
    for p in priors {
        len += 1 + p.len();
        if len > max_len {
            break;
        }
        keep += 1;
    }
    memory_tokens(sentence, &priors[..keep])
}

/// Attention matrix as CSV: a header of input tokens, then one row per decoded token
/// labeled with that token.
pub fn write_attention_csv<W: Write, T: Scalar>(
    w: W,
    input: &[Token],
    decoded: &[String],
    rows: &[Vec<T>],
) -> Result<()> {
    let err = |e: csv::Error| Error::InvalidInput(format!("attention csv: {e}"));
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = std::iter::once("").chain(input.iter().map(|t| t.as_str())).collect();
    out.write_record(&header).map_err(err)?;
    for (tok, row) in decoded.iter().zip(rows) {
        let mut rec = vec![tok.clone()];
        rec.extend(row.iter().map(|v| format!("{:.6}", v.to_f64_lossy())));
        out.write_record(&rec).map_err(err)?;
    }
    out.flush().map_err(|e| Error::InvalidInput(format!("attention csv: {e}")))?;
    Ok(())
}

/// Force-decodes `decoded` against `input` and writes the attention rows to `path`.
pub fn export_attention<T: Scalar>(
    model: &Model<T>,
    input: &[Token],
    decoded: &[Token],
    path: &Path,
) -> Result<Vec<Vec<T>>> {
    let rows = model.forced_attention(input, decoded);
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let labels: Vec<String> = decoded.iter().map(|t| t.as_str().to_string()).collect();
    write_attention_csv(std::io::BufWriter::new(f), input, &labels, &rows)?;
    Ok(rows)
}
