//! Seeded synthetic corpora: clause-chained sentences whose gold tuples are the
//! clauses in order, plus three imitation extractors with different noise profiles.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tuple::{split_tokens, tokenize, Extraction, Sentence, Source, Token};

const SUBJECTS: &[&str] = &[
    "alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy",
    "mallory", "oscar", "peggy", "trent", "victor", "walter",
];

const RELATIONS: &[&str] = &[
    "visited", "met", "painted", "was appointed to", "bought", "sold", "founded", "joined",
    "left", "praised", "criticized", "wrote about", "built", "studied at", "worked for",
];

const OBJECTS: &[&str] = &[
    "the old castle", "the city council", "a small bakery", "the royal academy",
    "a red bicycle", "the museum", "the harbor", "a famous novel", "the new bridge",
    "the university", "the river port", "a local newspaper", "the town hall",
    "the orchestra", "the garden",
];

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub sentences: Vec<Sentence>,
    /// Gold tuples per sentence, in clause order.
    pub gold: Vec<Vec<Extraction>>,
}

impl SynthCorpus {
    pub fn gold_items(&self) -> Vec<(String, Extraction)> {
        self.sentences
            .iter()
            .zip(&self.gold)
            .flat_map(|(s, g)| g.iter().map(move |e| (s.id.clone(), e.clone())))
            .collect()
    }

    pub fn pairs(&self) -> Vec<(Sentence, Vec<Extraction>)> {
        self.sentences.iter().cloned().zip(self.gold.iter().cloned()).collect()
    }
}

fn toks(s: &str) -> Vec<Token> {
    split_tokens(s).expect("static vocabulary")
}

/// `n` sentences with between `min_tuples` and `max_tuples` clauses each, joined by
/// `,` and a final `and`. Subjects are distinct within a sentence.
pub fn clause_corpus(n: usize, min_tuples: usize, max_tuples: usize, seed: u64) -> SynthCorpus {
    assert!(min_tuples >= 1 && min_tuples <= max_tuples && max_tuples <= SUBJECTS.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(n);
    let mut gold = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.gen_range(min_tuples..=max_tuples);
        let subjects: Vec<&str> = SUBJECTS.choose_multiple(&mut rng, k).copied().collect();
        let mut text = String::new();
        let mut tuples = Vec::with_capacity(k);
        for (c, subj) in subjects.iter().enumerate() {
            let rel = RELATIONS[rng.gen_range(0..RELATIONS.len())];
            let obj = OBJECTS[rng.gen_range(0..OBJECTS.len())];
            if c > 0 {
                text.push_str(if c + 1 == k { " and " } else { " , " });
            }
            text.push_str(&format!("{subj} {rel} {obj}"));
            tuples.push(
                Extraction::new(toks(subj), toks(rel), toks(obj), 1.0, Source::new("gold"))
                    .expect("well-formed clause"),
            );
        }
        text.push_str(" .");
        sentences.push(Sentence::new(format!("s{:04}", i + 1), tokenize(&text)).expect("non-empty"));
        gold.push(tuples);
    }
    SynthCorpus { sentences, gold }
}

/// The bundled 50-sentence corpus.
pub fn toy_corpus() -> SynthCorpus {
    clause_corpus(50, 1, 4, 7)
}

fn near_duplicate(e: &Extraction, rng: &mut ChaCha8Rng) -> Extraction {
    let mut d = e.clone();
    match rng.gen_range(0..3) {
        0 if d.arg2.len() > 1 => {
            d.arg2.remove(0);
        }
        1 => d.arg2.push(Token::new("there").expect("token")),
        _ => d.rel.push(Token::new("then").expect("token")),
    }
    d
}

/// Three imitation extractors over a corpus:
///
/// * `openie4`: precise, drops a tuple now and then, confidences in `[0.6, 0.95]`;
/// * `clausie`: every gold tuple plus near-duplicate variants, confidences in `[0.3, 0.9]`;
/// * `rnnoie`: gold tuples, some with swapped arguments, plus a near-duplicate, confidences in `[0.4, 0.9]`.
pub fn imitation_sources(corpus: &SynthCorpus, seed: u64) -> Vec<(Source, Vec<(String, Extraction)>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut openie = Vec::new();
    let mut clausie = Vec::new();
    let mut rnnoie = Vec::new();
    for (s, golds) in corpus.sentences.iter().zip(&corpus.gold) {
        let id = &s.id;
        for g in golds {
            if golds.len() == 1 || rng.gen_bool(0.85) {
                let c = rng.gen_range(0.6..0.95);
                openie.push((id.clone(), g.clone().with_confidence(c).with_source(Source::new("openie4"))));
            }
            let c = rng.gen_range(0.3..0.9);
            clausie.push((id.clone(), g.clone().with_confidence(c).with_source(Source::new("clausie"))));
            if rng.gen_bool(0.6) {
                let d = near_duplicate(g, &mut rng);
                let c = rng.gen_range(0.3..0.9);
                clausie.push((id.clone(), d.with_confidence(c).with_source(Source::new("clausie"))));
            }
            let c = rng.gen_range(0.4..0.9);
            let r = if rng.gen_bool(0.2) && !g.arg2.is_empty() {
                let mut w = g.clone();
                std::mem::swap(&mut w.arg1, &mut w.arg2);
                w
            } else {
                g.clone()
            };
            rnnoie.push((id.clone(), r.with_confidence(c).with_source(Source::new("rnnoie"))));
            if rng.gen_bool(0.3) {
                let d = near_duplicate(g, &mut rng);
                let c = rng.gen_range(0.4..0.9);
                rnnoie.push((id.clone(), d.with_confidence(c).with_source(Source::new("rnnoie"))));
            }
        }
    }
    vec![
        (Source::new("openie4"), openie),
        (Source::new("clausie"), clausie),
        (Source::new("rnnoie"), rnnoie),
    ]
}
