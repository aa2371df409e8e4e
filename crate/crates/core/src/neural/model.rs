//! Forward and backward passes of the attention/copy encoder-decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gru::{self, GruCache};
use super::linalg::{add_assign, axpy, dot, sigmoid, softmax};
use super::params::{ModelConfig, ModelParams};
use super::vocab::{Vocab, BOS_ID, EOS, UNK, UNK_ID};
use crate::scalar::Scalar;
use crate::tuple::Token;

/// Encoder-decoder together with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ModelParams<T>,
}

/// Encoder states for one input.
#[derive(Debug, Clone)]
pub struct Encoded<T> {
    /// Input tokens, as written (copy candidates).
    pub source: Vec<String>,
    /// Forward state followed by backward state, per position.
    pub states: Vec<Vec<T>>,
    ids: Vec<usize>,
    /// `U_a H_j + b_a`, computed once per input.
    keys: Vec<Vec<T>>,
    fwd: Vec<GruCache<T>>,
    bwd: Vec<GruCache<T>>,
}

/// Decoder state between steps.
#[derive(Debug, Clone)]
pub struct DecodeState<T> {
    pub hidden: Vec<T>,
    /// Context of the previous step, fed back as decoder input.
    pub context: Vec<T>,
    /// Attention weights of every step taken so far.
    pub attention: Vec<Vec<T>>,
    pub emitted: Vec<String>,
    pub log_prob: f64,
}

/// Output mixture of one step.
#[derive(Debug, Clone)]
pub struct StepDistribution<T> {
    /// Generation distribution over the vocabulary.
    pub generate: Vec<T>,
    /// Attention over input positions.
    pub alpha: Vec<T>,
    /// Probability of generating rather than copying.
    pub gate: T,
}

impl<T: Scalar> StepDistribution<T> {
    /// Mixed probability of a token string given the source it attends over.
    pub fn prob(&self, vocab: &Vocab, source: &[String], token: &str) -> T {
        let gen = match vocab.get(token) {
            Some(id) => self.gate * self.generate[id],
            None => T::zero(),
        };
        let copy: T = source
            .iter()
            .zip(&self.alpha)
            .filter(|(s, _)| s.as_str() == token)
            .map(|(_, &a)| a)
            .sum();
        gen + (T::one() - self.gate) * copy
    }

    /// Highest-probability token over the vocabulary and the source words, with its
    /// probability. Ties go to the lower vocabulary index, then the earlier source word.
    pub fn argmax(&self, vocab: &Vocab, source: &[String]) -> (String, T) {
        let one = T::one();
        let mut p: Vec<T> = self.generate.iter().map(|&v| self.gate * v).collect();
        let mut extra: Vec<(&str, T)> = Vec::new();
        for (s, &a) in source.iter().zip(&self.alpha) {
            let m = (one - self.gate) * a;
            match vocab.get(s) {
                Some(id) => p[id] += m,
                None => match extra.iter_mut().find(|(w, _)| *w == s.as_str()) {
                    Some(e) => e.1 += m,
                    None => extra.push((s.as_str(), m)),
                },
            }
        }
        let mut best = (vocab.token(0).to_string(), p[0]);
        for (id, &v) in p.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (vocab.token(id).to_string(), v);
            }
        }
        for (w, v) in extra {
            if v > best.1 {
                best = (w.to_string(), v);
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
struct StepCache<T> {
    prev_id: usize,
    gru: GruCache<T>,
    hidden: Vec<T>,
    /// `tanh(W_a s + keys_j)` per position.
    act: Vec<Vec<T>>,
    alpha: Vec<T>,
    context: Vec<T>,
    generate: Vec<T>,
    gate: T,
}

/// A target token resolved against the vocabulary and the source.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Target {
    /// Vocabulary index that generates it, if any.
    gen: Option<usize>,
    /// Source positions that copy it.
    copy: Vec<usize>,
    /// Index fed to the next step.
    feed: usize,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&config, vocab.len(), &mut rng);
        Model { config, vocab, params }
    }

    /// Builds the vocabulary from the tokens of a training corpus.
    pub fn from_corpus<'a, I>(config: ModelConfig, tokens: I, seed: u64) -> Self
    where
        I: IntoIterator<Item = &'a Token>,
    {
        let vocab = Vocab::build(tokens, config.vocab_min_freq);
        Self::new(config, vocab, seed)
    }

    fn embed(&self, id: usize) -> &[T] {
        self.params.embedding.row(id)
    }

    pub fn encode(&self, input: &[Token]) -> Encoded<T> {
        let source: Vec<String> = input.iter().map(|t| t.as_str().to_string()).collect();
        self.encode_strs(source)
    }

    pub(crate) fn encode_strs(&self, source: Vec<String>) -> Encoded<T> {
        let p = &self.params;
        let ids: Vec<usize> = source.iter().map(|s| self.vocab.id(s)).collect();
        let xs: Vec<&[T]> = ids.iter().map(|&i| self.embed(i)).collect();
        let (f, fwd) = gru::run(&p.enc_fwd, &xs, false);
        let (b, bwd) = gru::run(&p.enc_bwd, &xs, true);
        let states: Vec<Vec<T>> = f
            .into_iter()
            .zip(b)
            .map(|(mut f, b)| {
                f.extend(b);
                f
            })
            .collect();
        let keys = states
            .iter()
            .map(|h| {
                let mut k = p.att_b.clone();
                p.att_u.matvec_add(h, &mut k);
                k
            })
            .collect();
        Encoded {
            source,
            states,
            ids,
            keys,
            fwd,
            bwd,
        }
    }

    pub fn initial_state(&self, enc: &Encoded<T>) -> DecodeState<T> {
        let p = &self.params;
        let mut s = p.init_b.clone();
        p.init_w.matvec_add(&enc.states[0], &mut s);
        for v in &mut s {
            *v = v.tanh();
        }
        DecodeState {
            hidden: s,
            context: vec![T::zero(); 2 * self.config.hidden_dim],
            attention: Vec::new(),
            emitted: Vec::new(),
            log_prob: 0.0,
        }
    }

    fn step_inner(&self, enc: &Encoded<T>, hidden: &[T], context: &[T], prev_id: usize) -> StepCache<T> {
        let p = &self.params;
        let mut x = self.embed(prev_id).to_vec();
        x.extend_from_slice(context);
        let (s, gc) = gru::step(&p.dec, &x, hidden);
        let q = p.att_w.matvec(&s);
        let mut act = Vec::with_capacity(enc.keys.len());
        let mut scores = Vec::with_capacity(enc.keys.len());
        for k in &enc.keys {
            let a: Vec<T> = k.iter().zip(&q).map(|(&k, &q)| (k + q).tanh()).collect();
            scores.push(dot(&p.att_v, &a));
            act.push(a);
        }
        let alpha = softmax(&scores);
        let mut c = vec![T::zero(); 2 * self.config.hidden_dim];
        for (&a, h) in alpha.iter().zip(&enc.states) {
            axpy(a, h, &mut c);
        }
        let mut o = s.clone();
        o.extend_from_slice(&c);
        let mut logits = p.out_b.clone();
        p.out_w.matvec_add(&o, &mut logits);
        let generate = softmax(&logits);
        let gate = sigmoid(
            dot(&p.gate_w[..o.len()], &o) + dot(&p.gate_w[o.len()..], self.embed(prev_id)) + p.gate_b[0],
        );
        StepCache {
            prev_id,
            gru: gc,
            hidden: s,
            act,
            alpha,
            context: c,
            generate,
            gate,
        }
    }

    /// One decoder step from `state` given the previously emitted token (`None` at the
    /// first step).
    pub fn decode_step(
        &self,
        enc: &Encoded<T>,
        state: &DecodeState<T>,
        prev: Option<&str>,
    ) -> (StepDistribution<T>, DecodeState<T>) {
        let prev_id = prev.map_or(BOS_ID, |w| self.vocab.id(w));
        let c = self.step_inner(enc, &state.hidden, &state.context, prev_id);
        let mut next = state.clone();
        next.hidden = c.hidden;
        next.context = c.context;
        next.attention.push(c.alpha.clone());
        (
            StepDistribution {
                generate: c.generate,
                alpha: c.alpha,
                gate: c.gate,
            },
            next,
        )
    }

    pub(crate) fn resolve_targets(&self, source: &[String], target: &[Token]) -> Vec<Target> {
        target
            .iter()
            .map(|t| t.as_str())
            .chain(std::iter::once(EOS))
            .map(|w| {
                let copy: Vec<usize> = source
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.as_str() == w)
                    .map(|(j, _)| j)
                    .collect();
                match self.vocab.get(w) {
                    Some(id) => Target { gen: Some(id), copy, feed: id },
                    None if !copy.is_empty() => Target { gen: None, copy, feed: UNK_ID },
                    None => Target {
                        gen: Some(UNK_ID),
                        copy: source
                            .iter()
                            .enumerate()
                            .filter(|(_, s)| s.as_str() == UNK)
                            .map(|(j, _)| j)
                            .collect(),
                        feed: UNK_ID,
                    },
                }
            })
            .collect()
    }

    fn teacher_forced(&self, enc: &Encoded<T>, targets: &[Target]) -> (Vec<T>, Vec<StepCache<T>>, DecodeState<T>) {
        let init = self.initial_state(enc);
        let mut hidden = init.hidden.clone();
        let mut context = init.context.clone();
        let mut prev = BOS_ID;
        let mut probs = Vec::with_capacity(targets.len());
        let mut caches = Vec::with_capacity(targets.len());
        for t in targets {
            let c = self.step_inner(enc, &hidden, &context, prev);
            probs.push(target_prob(&c, t));
            hidden = c.hidden.clone();
            context = c.context.clone();
            prev = t.feed;
            caches.push(c);
        }
        (probs, caches, init)
    }

    /// Per-token probabilities of `target` followed by EOS under teacher forcing.
    pub fn target_probs(&self, input: &[Token], target: &[Token]) -> Vec<T> {
        let enc = self.encode(input);
        let targets = self.resolve_targets(&enc.source, target);
        self.teacher_forced(&enc, &targets).0
    }

    /// Attention rows while force-decoding exactly `decoded` (no EOS appended).
    pub fn forced_attention(&self, input: &[Token], decoded: &[Token]) -> Vec<Vec<T>> {
        let enc = self.encode(input);
        let mut targets = self.resolve_targets(&enc.source, decoded);
        targets.pop();
        self.teacher_forced(&enc, &targets)
            .1
            .into_iter()
            .map(|c| c.alpha)
            .collect()
    }

    /// Summed negative log-likelihood of `target` + EOS, its token count, and (when `grad`
    /// is given) the gradient of the sum scaled by `scale`, accumulated into `grad`.
    pub fn nll(
        &self,
        input: &[Token],
        target: &[Token],
        grad: Option<(&mut ModelParams<T>, T)>,
    ) -> (T, usize) {
        let enc = self.encode(input);
        let targets = self.resolve_targets(&enc.source, target);
        let (probs, caches, init) = self.teacher_forced(&enc, &targets);
        let loss: T = probs.iter().map(|p| -p.ln()).sum();
        if let Some((g, scale)) = grad {
            self.backward(&enc, &targets, &probs, &caches, &init, g, scale);
        }
        (loss, targets.len())
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        enc: &Encoded<T>,
        targets: &[Target],
        probs: &[T],
        caches: &[StepCache<T>],
        init: &DecodeState<T>,
        g: &mut ModelParams<T>,
        scale: T,
    ) {
        let p = &self.params;
        let one = T::one();
        let hd = self.config.hidden_dim;
        let ed = self.config.embed_dim;
        let len = enc.states.len();
        let mut d_states = vec![vec![T::zero(); 2 * hd]; len];
        let mut d_keys = vec![vec![T::zero(); self.config.attn_dim]; len];
        let mut ds_next = vec![T::zero(); hd];
        let mut dc_next = vec![T::zero(); 2 * hd];
        for (t, c) in caches.iter().enumerate().rev() {
            let tgt = &targets[t];
            let dp = -scale / probs[t];
            let copy_mass: T = tgt.copy.iter().map(|&j| c.alpha[j]).sum();
            let gen_p = tgt.gen.map(|i| c.generate[i]).unwrap_or(T::zero());
            let dgate = dp * (gen_p - copy_mass);
            let mut dalpha = vec![T::zero(); len];
            for &j in &tgt.copy {
                dalpha[j] += dp * (one - c.gate);
            }
            let mut ds = ds_next.clone();
            let mut dc = dc_next.clone();
            // output projection
            if let Some(k) = tgt.gen {
                let dpk = dp * c.gate * c.generate[k];
                let mut dlogits: Vec<T> = c.generate.iter().map(|&v| -dpk * v).collect();
                dlogits[k] += dpk;
                let mut o = c.hidden.clone();
                o.extend_from_slice(&c.context);
                g.out_w.outer_add(&dlogits, &o);
                add_assign(&mut g.out_b, &dlogits);
                let mut do_ = vec![T::zero(); 3 * hd];
                p.out_w.matvec_t_add(&dlogits, &mut do_);
                add_assign(&mut ds, &do_[..hd]);
                add_assign(&mut dc, &do_[hd..]);
            }
            // gate
            let dag = dgate * c.gate * (one - c.gate);
            let emb = self.embed(c.prev_id);
            {
                let (gs, rest) = g.gate_w.split_at_mut(hd);
                let (gc, ge) = rest.split_at_mut(2 * hd);
                axpy(dag, &c.hidden, gs);
                axpy(dag, &c.context, gc);
                axpy(dag, emb, ge);
            }
            g.gate_b[0] += dag;
            axpy(dag, &p.gate_w[..hd], &mut ds);
            axpy(dag, &p.gate_w[hd..3 * hd], &mut dc);
            let mut demb = vec![T::zero(); ed];
            axpy(dag, &p.gate_w[3 * hd..], &mut demb);
            // context = sum alpha_j H_j
            for j in 0..len {
                dalpha[j] += dot(&dc, &enc.states[j]);
                axpy(c.alpha[j], &dc, &mut d_states[j]);
            }
            // softmax over scores
            let mean = dot(&c.alpha, &dalpha);
            let mut du_sum = vec![T::zero(); self.config.attn_dim];
            for j in 0..len {
                let de = c.alpha[j] * (dalpha[j] - mean);
                if de == T::zero() {
                    continue;
                }
                axpy(de, &c.act[j], &mut g.att_v);
                for ((dk, (&a, &v)), du) in d_keys[j]
                    .iter_mut()
                    .zip(c.act[j].iter().zip(&p.att_v))
                    .zip(du_sum.iter_mut())
                {
                    let d = de * v * (one - a * a);
                    *dk += d;
                    *du += d;
                }
            }
            g.att_w.outer_add(&du_sum, &c.hidden);
            p.att_w.matvec_t_add(&du_sum, &mut ds);
            // decoder cell
            let (dx, dh) = gru::backward(&p.dec, &mut g.dec, &c.gru, &ds);
            add_assign(&mut demb, &dx[..ed]);
            add_assign(g.embedding.row_mut(c.prev_id), &demb);
            dc_next = dx[ed..].to_vec();
            ds_next = dh;
        }
        // initial state s0 = tanh(W H_0 + b); the first context is constant zero
        let da: Vec<T> = ds_next
            .iter()
            .zip(&init.hidden)
            .map(|(&d, &s)| d * (one - s * s))
            .collect();
        g.init_w.outer_add(&da, &enc.states[0]);
        add_assign(&mut g.init_b, &da);
        p.init_w.matvec_t_add(&da, &mut d_states[0]);
        // keys = U_a H_j + b_a
        for j in 0..len {
            g.att_u.outer_add(&d_keys[j], &enc.states[j]);
            add_assign(&mut g.att_b, &d_keys[j]);
            p.att_u.matvec_t_add(&d_keys[j], &mut d_states[j]);
        }
        // encoder
        let df: Vec<Vec<T>> = d_states.iter().map(|d| d[..hd].to_vec()).collect();
        let db: Vec<Vec<T>> = d_states.iter().map(|d| d[hd..].to_vec()).collect();
        let dxf = gru::run_backward(&p.enc_fwd, &mut g.enc_fwd, &enc.fwd, &df, false);
        let dxb = gru::run_backward(&p.enc_bwd, &mut g.enc_bwd, &enc.bwd, &db, true);
        for ((&id, a), b) in enc.ids.iter().zip(&dxf).zip(&dxb) {
            let row = g.embedding.row_mut(id);
            add_assign(row, a);
            add_assign(row, b);
        }
    }
}

fn target_prob<T: Scalar>(c: &StepCache<T>, t: &Target) -> T {
    let gen = t.gen.map(|i| c.gate * c.generate[i]).unwrap_or(T::zero());
    let copy: T = t.copy.iter().map(|&j| c.alpha[j]).sum();
    gen + (T::one() - c.gate) * copy
}
