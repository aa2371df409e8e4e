mod common;

use common::{random_general, random_supermodular};
use itermem::qpbo::{
    complete_labeling, exhaustive_solve, max_flow, minimize, solve_roof_duality, CompletionStrategy, FlowNetwork,
    Label,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn persistent_labels_never_hurt(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_general(&mut rng, n);
        let partial = solve_roof_duality(&f);
        for _ in 0..10 {
            let y: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let mut z = y.clone();
            partial.apply(&mut z);
            prop_assert!(f.energy(&z).unwrap() <= f.energy(&y).unwrap() + 1e-9);
        }
    }

    #[test]
    fn completion_is_optimal(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_general(&mut rng, n);
        let (_, best) = exhaustive_solve(&f).unwrap();
        let x = complete_labeling(&f, &solve_roof_duality(&f), CompletionStrategy::default()).unwrap();
        prop_assert!((f.energy(&x).unwrap() - best).abs() <= 1e-9);
    }

    #[test]
    fn submodular_is_fully_labeled(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = itermem::qpbo::PseudoBooleanFunction::<f64>::new(n);
        for i in 0..n {
            f.add_unary(i, rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0)).unwrap();
        }
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.5) {
                    let c = rng.gen_range(0.01..=2.0);
                    f.add_pairwise(i, j, [[0.0, c], [c, 0.0]]).unwrap();
                }
            }
        }
        prop_assert!(f.is_submodular());
        let partial = solve_roof_duality(&f);
        prop_assert!(partial.unlabeled().is_empty());
        let x: Vec<bool> = partial.0.iter().map(|l| *l == Label::One).collect();
        let (_, best) = exhaustive_solve(&f).unwrap();
        prop_assert!((f.energy(&x).unwrap() - best).abs() <= 1e-9);
    }

    #[test]
    fn flow_equals_cut(seed in any::<u64>(), nodes in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = FlowNetwork::<f64>::new(nodes, 0, nodes - 1);
        for _ in 0..nodes * 3 {
            let a = rng.gen_range(0..nodes);
            let b = rng.gen_range(0..nodes);
            net.add_edge(a, b, rng.gen_range(0.0..5.0));
        }
        let cut = max_flow(&net);
        prop_assert!((cut.flow - cut.cut_capacity).abs() < 1e-9);
        prop_assert!(cut.source_side[0]);
        prop_assert!(!cut.source_side[nodes - 1]);
    }
}

#[test]
fn fifteen_variables_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..40 {
        let f = random_supermodular(&mut rng, 15);
        let sol = minimize(&f, CompletionStrategy::default());
        let (_, best) = exhaustive_solve(&f).unwrap();
        assert!(sol.partial.unlabeled().len() <= 20);
        assert!((sol.energy - best).abs() <= 1e-9);
    }
}

#[test]
fn single_precision_solver() {
    let mut f = itermem::PseudoBooleanFunction32::new(2);
    f.add_unary(0, 0.0, -1.0).unwrap();
    f.add_unary(1, 0.0, -1.0).unwrap();
    f.add_pairwise(0, 1, [[0.0, 0.0], [0.0, 5.0]]).unwrap();
    let sol = minimize(&f, CompletionStrategy::default());
    assert_eq!(sol.energy, -1.0f32);
    assert_eq!(sol.labeling.iter().filter(|&&x| x).count(), 1);
}
