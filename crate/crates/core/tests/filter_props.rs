mod common;

use common::{best_subset, ext, random_graph};
use itermem::filter::{rouge2, score_and_filter, select_subset, tuple_similarity, RankScorer, RedundancyGraph};
use itermem::ingest::{parse_extractions, pool_extractions, SourceSet};
use itermem::synth::{clause_corpus, imitation_sources};
use itermem::tuple::{tokenize, Source};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn permuted(g: &RedundancyGraph<f64>, perm: &[usize]) -> RedundancyGraph<f64> {
    let n = g.len();
    let mut r = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            r[a * n + b] = g.redundancy(perm[a], perm[b]);
        }
    }
    RedundancyGraph::new(
        perm.iter().map(|&i| g.nodes[i].clone()).collect(),
        perm.iter().map(|&i| g.scores[i]).collect(),
        r,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn selection_is_optimal(seed in any::<u64>(), n in 1usize..=12) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let sel = select_subset(&g);
        let (best, _) = best_subset(&g);
        prop_assert!((sel.objective - best).abs() <= 1e-9);
    }

    #[test]
    fn selection_ignores_node_order(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let a = select_subset(&g);
        let b = select_subset(&permuted(&g, &perm));
        prop_assert!((a.objective - b.objective).abs() <= 1e-9);
        // random real scores make the optimum unique almost surely
        let mut mapped: Vec<usize> = b.indices.iter().map(|&i| perm[i]).collect();
        mapped.sort_unstable();
        prop_assert_eq!(mapped, a.indices);
    }

    #[test]
    fn raising_a_score_keeps_the_node(seed in any::<u64>(), n in 2usize..=10, bump in 0.0f64..1.0) {
        let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let sel = select_subset(&g);
        for &i in &sel.indices {
            let mut scores = g.scores.clone();
            scores[i] += bump;
            let r: Vec<f64> = (0..n * n).map(|k| g.redundancy(k / n, k % n)).collect();
            let h = RedundancyGraph::new(g.nodes.clone(), scores, r).unwrap();
            let (_, best) = best_subset(&h);
            prop_assert!(best.contains(&i));
            prop_assert!(select_subset(&h).indices.contains(&i));
        }
    }

    #[test]
    fn no_redundancy_selects_positive_scores(scores in prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 1..12)) {
        let n = scores.len();
        let nodes = (0..n).map(|i| ext(&format!("n{i}"), "r", "")).collect();
        let g = RedundancyGraph::new(nodes, scores.clone(), vec![0.0; n * n]).unwrap();
        let expected: Vec<usize> = (0..n).filter(|&i| scores[i] > 0.0).collect();
        prop_assert_eq!(select_subset(&g).indices, expected);
    }

    #[test]
    fn full_redundancy_selects_at_most_one(scores in prop::collection::vec(0.001f64..=1.0, 1..12)) {
        let n = scores.len();
        let mut r = vec![1.0; n * n];
        for i in 0..n {
            r[i * n + i] = 0.0;
        }
        let nodes = (0..n).map(|i| ext(&format!("n{i}"), "r", "")).collect();
        let g = RedundancyGraph::new(nodes, scores, r).unwrap();
        prop_assert!(select_subset(&g).indices.len() <= 1);
    }

    #[test]
    fn rouge2_is_a_symmetric_similarity(a in "[a-c ]{0,16}", b in "[a-c ]{0,16}") {
        let (x, y) = (tokenize(&a), tokenize(&b));
        let s = rouge2(&x, &y);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, rouge2(&y, &x));
        if !x.is_empty() {
            prop_assert_eq!(rouge2(&x, &x), 1.0);
        }
    }
}

#[test]
fn stuttering_tuples_are_redundant() {
    // Three near-duplicate tuples of one sentence, elisions filled in from the sentence.
    let t1 = ext(
        "he",
        "was appointed",
        "commander of the order of the british empire in the 1948 queen 's birthday honours",
    );
    let t2 = ext(
        "he",
        "was appointed",
        "commander of the order of the british empire in the 1948 queen 's birthday honours and was knighted in the 1953 coronation honours",
    );
    let t4 = ext("he", "was appointed", "commander of the order of the british empire in the 1948");
    let t3 = ext("queen 's birthday honours", "was knighted", "in the 1953 coronation honours");
    for (a, b) in [(&t1, &t2), (&t1, &t4), (&t2, &t4)] {
        assert!(tuple_similarity(a, b) > 0.5, "{a} / {b}");
    }
    assert!(tuple_similarity(&t1, &t3) < 0.5);
}

#[test]
fn report_objective_matches_recomputation() {
    let corpus = clause_corpus(30, 1, 4, 21);
    let sources = imitation_sources(&corpus, 22);
    let mut set = SourceSet::new();
    let mut files = Vec::new();
    for (src, items) in sources {
        set.push(src.clone(), true);
        let mut buf = Vec::new();
        itermem::ingest::write_extractions(&mut buf, &items, true, false).unwrap();
        files.push((src.clone(), parse_extractions(std::str::from_utf8(&buf).unwrap(), &src)));
    }
    let (pools, _) = pool_extractions(&corpus.sentences, &files, &set);
    let scorer = RankScorer::from_pools(&pools, &set);
    let out = score_and_filter::<f64, _>(&pools, &scorer);
    for (pool, f) in pools.iter().zip(&out) {
        let mut objective = 0.0;
        for (a, e) in f.selected.iter().enumerate() {
            objective += e.confidence;
            for b in &f.selected[a + 1..] {
                objective -= tuple_similarity(e, b);
            }
        }
        assert!((objective - f.objective).abs() < 1e-9);
        assert!(f.selected.iter().all(|e| e.source == Source::aggregated()));
        assert!(f.selected.iter().all(|e| pool.extractions.contains(e)));
        let scores: Vec<f64> = f.selected.iter().map(|e| e.confidence).collect();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    }
}
