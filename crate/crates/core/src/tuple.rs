//! Sentences, extractions and the token sequences the extractor reads and writes.
//!
//! An extraction is linearized as `arg1 <rel> rel <obj> arg2`. The encoder input for
//! the iterative decoder is `[CLS] sentence ([SEP] linearized-extraction)*`.

use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const REL: &str = "<rel>";
pub const OBJ: &str = "<obj>";
pub const END_OF_EXTRACTIONS: &str = "<end_of_extractions>";

/// Reserved symbols that may never appear inside an extraction slot.
pub const RESERVED: [&str; 5] = [CLS, SEP, REL, OBJ, END_OF_EXTRACTIONS];

const DETACHED: &[char] = &['.', ',', ';', '(', ')', '\'', '"', ':', '!', '?'];

/// A single lowercased word token.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    /// Builds a token from text, lowercasing it. Reserved symbols are kept verbatim.
    pub fn new(text: &str) -> Result<Self> {
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidToken(text.to_string()));
        }
        if RESERVED.contains(&text) {
            return Ok(Token(text.to_string()));
        }
        Ok(Token(text.to_lowercase()))
    }

    pub(crate) fn reserved(sym: &'static str) -> Self {
        debug_assert!(RESERVED.contains(&sym));
        Token(sym.to_string())
    }

    pub fn cls() -> Self {
        Self::reserved(CLS)
    }

    pub fn sep() -> Self {
        Self::reserved(SEP)
    }

    pub fn rel() -> Self {
        Self::reserved(REL)
    }

    pub fn obj() -> Self {
        Self::reserved(OBJ)
    }

    pub fn end_of_extractions() -> Self {
        Self::reserved(END_OF_EXTRACTIONS)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_reserved(&self) -> bool {
        RESERVED.contains(&self.0.as_str())
    }
}

impl TryFrom<String> for Token {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Token::new(&s)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl fmt::Debug for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Splits raw text into lowercased tokens.
///
/// Whitespace separates tokens, and the characters `. , ; ( ) ' " : ! ?` are detached
/// as tokens of their own. An apostrophe directly followed by a letter opens a clitic
/// token instead (`'s`, `'re`), so `Queen 's` and `Queen's` both yield `['s]`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lowered = chunk.to_lowercase();
        let chars: Vec<char> = lowered.chars().collect();
        let mut buf = String::new();
        let flush = |buf: &mut String, out: &mut Vec<Token>| {
            if !buf.is_empty() {
                out.push(Token(std::mem::take(buf)));
            }
        };
        for (i, &c) in chars.iter().enumerate() {
            if c == '\'' && chars.get(i + 1).is_some_and(|n| n.is_alphabetic()) {
                flush(&mut buf, &mut out);
                buf.push(c);
            } else if DETACHED.contains(&c) {
                flush(&mut buf, &mut out);
                out.push(Token(c.to_string()));
            } else {
                buf.push(c);
            }
        }
        flush(&mut buf, &mut out);
    }
    out
}

/// Joins tokens with single spaces.
pub fn join(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_str());
    }
    s
}

/// Parses space-joined token text without re-tokenizing punctuation.
pub fn split_tokens(text: &str) -> Result<Vec<Token>> {
    text.split_whitespace().map(Token::new).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("sentence has no tokens".into()));
        }
        Ok(Sentence {
            id: id.into(),
            tokens,
        })
    }

    pub fn from_text(id: impl Into<String>, text: &str) -> Result<Self> {
        Self::new(id, tokenize(text))
    }
}

/// Name of the system that produced an extraction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Source(pub String);

impl Source {
    pub fn new(name: impl Into<String>) -> Self {
        Source(name.into())
    }

    pub fn model() -> Self {
        Source::new("model")
    }

    pub fn aggregated() -> Self {
        Source::new("aggregated")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An `(arg1, rel, arg2)` tuple. Equality and hashing look only at the three slots.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub arg1: Vec<Token>,
    pub rel: Vec<Token>,
    pub arg2: Vec<Token>,
    pub confidence: f64,
    pub source: Source,
}

impl Extraction {
    /// Validates slots and clamps confidence into `[0, 1]`.
    pub fn new(
        arg1: Vec<Token>,
        rel: Vec<Token>,
        arg2: Vec<Token>,
        confidence: f64,
        source: Source,
    ) -> Result<Self> {
        if arg1.is_empty() {
            return Err(Error::MalformedExtraction("empty arg1".into()));
        }
        if rel.is_empty() {
            return Err(Error::MalformedExtraction("empty relation".into()));
        }
        if let Some(t) = arg1.iter().chain(&rel).chain(&arg2).find(|t| t.is_reserved()) {
            return Err(Error::MalformedExtraction(format!(
                "reserved symbol {t} inside a slot"
            )));
        }
        if confidence.is_nan() {
            return Err(Error::MalformedExtraction("confidence is NaN".into()));
        }
        Ok(Extraction {
            arg1,
            rel,
            arg2,
            confidence: confidence.clamp(0.0, 1.0),
            source,
        })
    }

    /// Tokenizes each slot from raw text.
    pub fn from_text(arg1: &str, rel: &str, arg2: &str, confidence: f64, source: Source) -> Result<Self> {
        Self::new(tokenize(arg1), tokenize(rel), tokenize(arg2), confidence, source)
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence.clamp(0.0, 1.0);
        self
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = source;
        self
    }

    pub fn slots(&self) -> [&[Token]; 3] {
        [&self.arg1, &self.rel, &self.arg2]
    }

    /// `arg1 ++ rel ++ arg2` without markers.
    pub fn flat_tokens(&self) -> Vec<Token> {
        self.arg1
            .iter()
            .chain(&self.rel)
            .chain(&self.arg2)
            .cloned()
            .collect()
    }
}

impl PartialEq for Extraction {
    fn eq(&self, other: &Self) -> bool {
        self.arg1 == other.arg1 && self.rel == other.rel && self.arg2 == other.arg2
    }
}

impl Eq for Extraction {}

impl Hash for Extraction {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.arg1.hash(state);
        self.rel.hash(state);
        self.arg2.hash(state);
    }
}

impl fmt::Display for Extraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "( {} ; {} ; {} )",
            join(&self.arg1),
            join(&self.rel),
            join(&self.arg2)
        )
    }
}

/// `arg1 <rel> rel <obj> arg2`. The `<obj>` marker is present even when arg2 is empty.
pub fn linearize(ext: &Extraction) -> Result<Vec<Token>> {
    if let Some(t) = ext.slots().iter().flat_map(|s| s.iter()).find(|t| t.is_reserved()) {
        return Err(Error::MalformedExtraction(format!(
            "reserved symbol {t} inside a slot"
        )));
    }
    let mut out = Vec::with_capacity(ext.arg1.len() + ext.rel.len() + ext.arg2.len() + 2);
    out.extend(ext.arg1.iter().cloned());
    out.push(Token::rel());
    out.extend(ext.rel.iter().cloned());
    out.push(Token::obj());
    out.extend(ext.arg2.iter().cloned());
    Ok(out)
}

/// Inverse of [`linearize`] for decoder output.
///
/// Splits on the first `<rel>` and the first `<obj>` after it; any later marker is
/// dropped. Other reserved symbols are dropped as well.
pub fn parse_linearized(tokens: &[Token]) -> Result<Extraction> {
    let rel_at = tokens
        .iter()
        .position(|t| t.as_str() == REL)
        .ok_or_else(|| Error::MalformedExtraction("missing <rel>".into()))?;
    let obj_at = tokens[rel_at + 1..]
        .iter()
        .position(|t| t.as_str() == OBJ)
        .map(|p| p + rel_at + 1)
        .ok_or_else(|| Error::MalformedExtraction("missing <obj>".into()))?;
    let keep = |ts: &[Token]| -> Vec<Token> {
        ts.iter().filter(|t| !t.is_reserved()).cloned().collect()
    };
    Extraction::new(
        keep(&tokens[..rel_at]),
        keep(&tokens[rel_at + 1..obj_at]),
        keep(&tokens[obj_at + 1..]),
        1.0,
        Source::model(),
    )
}

/// A sentence together with the extractions already produced for it.
#[derive(Debug, Clone)]
pub struct MemoryInput<'a> {
    pub sentence: &'a Sentence,
    pub prior_extractions: &'a [Extraction],
}

/// `[CLS] sentence ([SEP] linearize(ext))*`.
pub fn build_memory_input(m: &MemoryInput<'_>) -> Result<Vec<Token>> {
    let priors = m
        .prior_extractions
        .iter()
        .map(linearize)
        .collect::<Result<Vec<_>>>()?;
    Ok(memory_tokens(&m.sentence.tokens, &priors))
}

/// Same layout as [`build_memory_input`] over already linearized (possibly malformed)
/// extractions.
pub fn memory_tokens(sentence: &[Token], priors: &[Vec<Token>]) -> Vec<Token> {
    let len = 1 + sentence.len() + priors.iter().map(|p| p.len() + 1).sum::<usize>();
    let mut out = Vec::with_capacity(len);
    out.push(Token::cls());
    out.extend(sentence.iter().cloned());
    for p in priors {
        out.push(Token::sep());
        out.extend(p.iter().cloned());
    }
    out
}
