use gst_core::autodiff::{softmax_slice, Array, Graph};
use gst_core::env::{generate_corpus, EnvConfig, Scene, Split};
use gst_core::tracker::{update_belief, GstModel, ModelConfig, NormConfig};
use proptest::prelude::*;

fn normalized(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

fn step(prev: &[f64], hat: &[f64]) -> Vec<f64> {
    let mut g = Graph::new();
    let p = g.constant(Array::column(prev.to_vec()));
    let h = g.constant(Array::column(hat.to_vec()));
    let (pi, underflow) = update_belief(&mut g, p, h, NormConfig::default()).unwrap();
    assert!(!underflow);
    g.value(pi).data().to_vec()
}

fn belief_and_scores(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (3..=max).prop_flat_map(|m| {
        (
            prop::collection::vec(0.01f64..1.0, m),
            prop::collection::vec(-4.0f64..4.0, m),
            prop::collection::vec(-4.0f64..4.0, m),
        )
    })
}

proptest! {
    #[test]
    fn update_conserves_mass((raw, s1, _) in belief_and_scores(20)) {
        let pi = step(&normalized(&raw), &softmax_slice(&s1));
        prop_assert!(pi.iter().all(|p| *p >= 0.0));
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_change_is_a_fixpoint((raw, _, _) in belief_and_scores(20)) {
        let prev = normalized(&raw);
        let m = prev.len();
        let pi = step(&prev, &vec![1.0 / m as f64; m]);
        for (a, b) in pi.iter().zip(&prev) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_belief_is_absorbing((raw, s1, _) in belief_and_scores(20), zero in 0usize..3) {
        let mut prev = normalized(&raw);
        prev[zero] = 0.0;
        let prev = normalized(&prev);
        let pi = step(&prev, &softmax_slice(&s1));
        prop_assert_eq!(pi[zero], 0.0);
    }

    #[test]
    fn two_updates_compose_into_one((raw, s1, s2) in belief_and_scores(20)) {
        let prev = normalized(&raw);
        let (h1, h2) = (softmax_slice(&s1), softmax_slice(&s2));
        let chained = step(&step(&prev, &h1), &h2);
        let swapped = step(&step(&prev, &h2), &h1);
        let product: Vec<f64> = h1.iter().zip(&h2).map(|(a, b)| a * b).collect();
        let once = step(&prev, &product);
        for i in 0..prev.len() {
            prop_assert!((chained[i] - once[i]).abs() < 1e-12);
            prop_assert!((chained[i] - swapped[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn belief_moves_toward_the_larger_change((raw, s1, _) in belief_and_scores(20)) {
        let prev = normalized(&raw);
        let hat = softmax_slice(&s1);
        let pi = step(&prev, &hat);
        // Odds between any two objects scale by the ratio of their changes.
        for i in 0..prev.len() {
            for k in 0..prev.len() {
                let lhs = pi[i] * prev[k] * hat[k];
                let rhs = pi[k] * prev[i] * hat[i];
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}

fn permuted(scene: &Scene, perm: &[usize]) -> Scene {
    Scene { objects: perm.iter().map(|&i| scene.objects[i].clone()).collect(), ..scene.clone() }
}

fn run(model: &GstModel, store: &gst_core::autodiff::ParameterStore, scene: &Scene, game: &gst_core::env::GameRecord) -> Vec<Vec<f64>> {
    let mut g = Graph::with_params(store);
    let trace = model
        .track_dialogue(&mut g, scene, game.rounds.iter().map(|qa| (&qa.question, qa.answer)), 5)
        .unwrap();
    trace.state_values(&g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tracking_is_permutation_equivariant(seed in 0u64..1000, rot in 1usize..10) {
        let env = EnvConfig::default();
        let game = generate_corpus(&env, Split::Train, 1, seed).unwrap().remove(0);
        let m = game.scene.len();
        let perm: Vec<usize> = (0..m).map(|i| (i + rot) % m).collect();
        let (model, store) = GstModel::init(ModelConfig { dim: 8, scorer_hidden: 8, ..ModelConfig::default() }, seed).unwrap();
        let base = run(&model, &store, &game.scene, &game);
        let moved = run(&model, &store, &permuted(&game.scene, &perm), &game);
        for (a, b) in base.iter().zip(&moved) {
            for (new, &old) in perm.iter().enumerate() {
                prop_assert!((b[new] - a[old]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn zero_scorer_keeps_the_belief_uniform() {
    let env = EnvConfig::default();
    let (model, mut store) = GstModel::init(ModelConfig { dim: 8, scorer_hidden: 8, ..ModelConfig::default() }, 3).unwrap();
    for v in store.values_mut(model.uogs.w2) {
        *v = 0.0;
    }
    for game in generate_corpus(&env, Split::Train, 20, 4).unwrap() {
        let m = game.scene.len() as f64;
        for pi in run(&model, &store, &game.scene, &game) {
            assert!(pi.iter().all(|p| (p - 1.0 / m).abs() < 1e-15));
        }
    }
}
