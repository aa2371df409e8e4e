#![allow(dead_code)]

use itermem::neural::{batch_gradient, Model, ModelConfig};
use itermem::train_data::{build_instances, TrainingInstance, DEFAULT_MAX_INPUT_LEN};
use itermem::tuple::{split_tokens, Extraction, Sentence, Source, Token};

pub fn toks(s: &str) -> Vec<Token> {
    split_tokens(s).unwrap()
}

pub fn ext(a: &str, r: &str, b: &str) -> Extraction {
    Extraction::new(toks(a), toks(r), toks(b), 1.0, Source::model()).unwrap()
}

/// Three sentences; with a frequency cutoff of 2 some words are copy-only, and the
/// last instance has a target word found neither in the vocabulary nor the input.
pub fn micro_corpus() -> Vec<TrainingInstance> {
    let data = [
        ("m1", "alice met bob and bob met carol .", vec![ext("alice", "met", "bob"), ext("bob", "met", "carol")]),
        ("m2", "carol visited the museum .", vec![ext("carol", "visited", "the museum")]),
        ("m3", "zed met alice .", vec![ext("zed", "met", "alice")]),
    ];
    let mut out = Vec::new();
    for (id, text, exts) in data {
        let s = Sentence::from_text(id, text).unwrap();
        out.extend(build_instances(&s, &exts, DEFAULT_MAX_INPUT_LEN).unwrap());
    }
    out.push(TrainingInstance {
        input: toks("[CLS] bob met carol ."),
        target: toks("bob <rel> met <obj> quux"),
    });
    out
}

pub fn micro_model(instances: &[TrainingInstance], seed: u64) -> Model<f64> {
    let cfg = ModelConfig {
        embed_dim: 4,
        hidden_dim: 3,
        attn_dim: 3,
        vocab_min_freq: 2,
    };
    let tokens: Vec<&Token> = instances.iter().flat_map(|i| i.input.iter().chain(&i.target)).collect();
    Model::from_corpus(cfg, tokens, seed)
}

/// Worst per-group relative error `|bp - fd| / max(|bp|, |fd|)` (norms over the group)
/// between the analytic gradient and central differences.
pub fn gradient_check(model: &Model<f64>, instances: &[TrainingInstance], eps: f64) -> Vec<(String, f64)> {
    let refs: Vec<&TrainingInstance> = instances.iter().collect();
    let (_, grad) = batch_gradient(model, &refs);
    let loss = |m: &Model<f64>| batch_gradient_loss(m, &refs);
    let mut out = Vec::new();
    let names: Vec<(&'static str, usize)> = model.params.groups().iter().map(|(n, g)| (*n, g.len())).collect();
    for (gi, (name, len)) in names.into_iter().enumerate() {
        let analytic = grad.groups()[gi].1.to_vec();
        let mut fd = vec![0.0; len];
        for k in 0..len {
            let mut plus = model.clone();
            plus.params.groups_mut()[gi].1[k] += eps;
            let mut minus = model.clone();
            minus.params.groups_mut()[gi].1[k] -= eps;
            fd[k] = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        }
        let diff: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nf: f64 = fd.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = if na.max(nf) == 0.0 { 0.0 } else { diff / na.max(nf) };
        out.push((name.to_string(), rel));
    }
    out
}

fn batch_gradient_loss(m: &Model<f64>, batch: &[&TrainingInstance]) -> f64 {
    let tokens: usize = batch.iter().map(|i| i.target.len() + 1).sum();
    let sum: f64 = batch.iter().map(|i| m.nll(&i.input, &i.target, None).0).sum();
    sum / tokens as f64
}

use itermem::filter::RedundancyGraph;
use itermem::neural::{train, TrainConfig, TrainReport};
use itermem::qpbo::PseudoBooleanFunction;
use itermem::synth::{toy_corpus, SynthCorpus};
use rand::Rng;

/// Unary costs in [-2, 2] for both labels; the only pair term is θ(1,1) in [0, 2].
pub fn random_supermodular<R: Rng>(rng: &mut R, n: usize) -> PseudoBooleanFunction<f64> {
    let mut f = PseudoBooleanFunction::new(n);
    for i in 0..n {
        f.add_unary(i, rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0)).unwrap();
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.5) {
                let w = rng.gen_range(0.0..=2.0);
                f.add_pairwise(i, j, [[0.0, 0.0], [0.0, w]]).unwrap();
            }
        }
    }
    f
}

/// Every table entry in [-2, 2].
pub fn random_general<R: Rng>(rng: &mut R, n: usize) -> PseudoBooleanFunction<f64> {
    let mut f = PseudoBooleanFunction::new(n);
    for i in 0..n {
        f.add_unary(i, rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0)).unwrap();
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.4) {
                let mut t = [[0.0; 2]; 2];
                for row in &mut t {
                    for v in row.iter_mut() {
                        *v = rng.gen_range(-2.0..=2.0);
                    }
                }
                f.add_pairwise(i, j, t).unwrap();
            }
        }
    }
    f
}

/// Scores in [0, 1]; about half of the pairs carry redundancy in (0, 1].
pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> RedundancyGraph<f64> {
    let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let mut r = vec![0.0; n * n];
    for j in 0..n {
        for k in j + 1..n {
            if rng.gen_bool(0.5) {
                let v = rng.gen_range(0.0..=1.0);
                r[j * n + k] = v;
                r[k * n + j] = v;
            }
        }
    }
    let nodes = (0..n).map(|i| ext(&format!("n{i}"), "r", "")).collect();
    RedundancyGraph::new(nodes, scores, r).unwrap()
}

/// Best objective over all subsets by enumeration.
pub fn best_subset(g: &RedundancyGraph<f64>) -> (f64, Vec<usize>) {
    let n = g.len();
    let mut best = (0.0, Vec::new());
    for mask in 1u32..(1 << n) {
        let sel: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let v = g.objective(&sel);
        if v > best.0 {
            best = (v, sel);
        }
    }
    best
}

pub fn toy_instances(corpus: &SynthCorpus) -> Vec<TrainingInstance> {
    corpus
        .pairs()
        .iter()
        .flat_map(|(s, g)| build_instances(s, g, DEFAULT_MAX_INPUT_LEN).unwrap())
        .collect()
}

pub fn toy_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.5,
        epochs: 200,
        batch_size: 8,
        clip_norm: 5.0,
        seed: 1,
        target_loss: Some(0.003),
    }
}

/// The bundled toy corpus memorized by a default-size model.
pub fn memorized_toy() -> (Model<f64>, SynthCorpus, TrainReport) {
    let corpus = toy_corpus();
    let inst = toy_instances(&corpus);
    let tokens: Vec<&Token> = inst.iter().flat_map(|i| i.input.iter().chain(&i.target)).collect();
    let mut model = Model::from_corpus(ModelConfig::default(), tokens, 1);
    let report = train(&mut model, &inst, &toy_train_config()).unwrap();
    (model, corpus, report)
}
