use gst_core::env::{
    evaluate_template, generate_corpus, generate_scene, play_game, template_inventory, Answer, EnvConfig, GameOptions,
    GameStatus, PosteriorGuesser, Scene, SpatialPredicate, Split, Template, UniformGuesser, Vocabulary, NUM_ATTRIBUTES,
};
use gst_core::tracker::StopPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent evaluator on integers: boxes have integer pixel coordinates,
/// so `2·centre = 2x + w` is exact and every band test is an integer compare.
fn brute_force(scene: &Scene, i: usize, t: &Template) -> Answer {
    let o = &scene.objects[i];
    let [x, y, w, h] = o.bbox.map(|v| v as i64);
    let (w_img, h_img) = (scene.width as i64, scene.height as i64);
    let (cx2, cy2) = (2 * x + w, 2 * y + h);
    let tri = |b: bool| if b { Answer::Yes } else { Answer::No };
    let half = |c2: i64, extent: i64, low: bool| match c2.cmp(&extent) {
        std::cmp::Ordering::Equal => Answer::NotApplicable,
        std::cmp::Ordering::Less => tri(low),
        std::cmp::Ordering::Greater => tri(!low),
    };
    // centre in (E/3, 2E/3)  ⇔  2E < 3·c2 < 4E
    let band = |c2: i64, extent: i64| {
        let c6 = 3 * c2;
        if c6 == 2 * extent || c6 == 4 * extent {
            Answer::NotApplicable
        } else {
            tri(c6 > 2 * extent && c6 < 4 * extent)
        }
    };
    match *t {
        Template::Category(k) => tri(o.category_id == k),
        Template::Attribute(a) => {
            let colour = o.category_id % 4;
            tri(if a < 4 { a == colour } else { o.attribute_ids.contains(&a) })
        }
        Template::Spatial(p) => match p {
            SpatialPredicate::LeftHalf => half(cx2, w_img, true),
            SpatialPredicate::RightHalf => half(cx2, w_img, false),
            SpatialPredicate::TopHalf => half(cy2, h_img, true),
            SpatialPredicate::BottomHalf => half(cy2, h_img, false),
            SpatialPredicate::MiddleColumn => band(cx2, w_img),
            SpatialPredicate::MiddleRow => band(cy2, h_img),
        },
        Template::FreeText => unreachable!(),
    }
}

#[test]
fn oracle_agrees_with_integer_evaluator() {
    let env = EnvConfig::default();
    let mut checked = 0;
    for seed in 0..50 {
        let scene = generate_scene(seed, &env).unwrap();
        for t in template_inventory(env.num_categories) {
            for i in 0..scene.len() {
                assert_eq!(evaluate_template(&scene, i, &t).unwrap(), brute_force(&scene, i, &t), "{seed} {i} {t:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 50 * 3 * (8 + NUM_ATTRIBUTES));
}

#[test]
fn boundary_centres_are_not_applicable() {
    let env = EnvConfig::default();
    let mut scene = generate_scene(1, &env).unwrap();
    // Centre exactly at x = 320 and y = 160 (one third of 480).
    scene.objects[0].bbox = [300.0, 150.0, 40.0, 20.0];
    let left = Template::Spatial(SpatialPredicate::LeftHalf);
    let row = Template::Spatial(SpatialPredicate::MiddleRow);
    assert_eq!(evaluate_template(&scene, 0, &left).unwrap(), Answer::NotApplicable);
    assert_eq!(evaluate_template(&scene, 0, &row).unwrap(), Answer::NotApplicable);
    assert_eq!(brute_force(&scene, 0, &left), Answer::NotApplicable);
    assert_eq!(brute_force(&scene, 0, &row), Answer::NotApplicable);
}

#[test]
fn exact_posterior_with_greedy_questions_solves_eight_object_scenes() {
    let env = EnvConfig { min_objects: 8, max_objects: 8, ..EnvConfig::default() };
    let vocab = Vocabulary::standard();
    let opts = GameOptions::greedy(env.j_max, env.num_categories);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let wins = (0..1000u64)
        .filter(|&i| {
            let scene = generate_scene(i + 10_000, &env).unwrap();
            let target = rng.gen_range(0..8);
            play_game(&scene, target, &PosteriorGuesser, &opts, &vocab, &mut rng).unwrap().success()
        })
        .count();
    assert!(wins >= 950, "{wins}/1000");
}

#[test]
fn stop_thresholds_at_the_extremes() {
    let env = EnvConfig::default();
    let vocab = Vocabulary::standard();
    let scenes: Vec<_> = (0..30).map(|i| generate_scene(i, &env).unwrap()).collect();
    let play = |stop: StopPolicy, scene: &Scene| {
        let opts = GameOptions { stop, ..GameOptions::greedy(env.j_max, env.num_categories) };
        play_game(scene, 0, &PosteriorGuesser, &opts, &vocab, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    };
    for scene in &scenes {
        assert_eq!(play(StopPolicy::ConfidenceThreshold(1.01), scene).rounds.len(), env.j_max);
        assert_eq!(play(StopPolicy::GainThreshold(0.0), scene).rounds.len(), env.j_max);
        assert_eq!(play(StopPolicy::ConfidenceThreshold(0.0), scene).rounds.len(), 1);
    }
    // A belief that never moves has zero gain and stops after one round.
    let opts = GameOptions { stop: StopPolicy::GainThreshold(1e-9), ..GameOptions::greedy(env.j_max, env.num_categories) };
    let r = play_game(&scenes[0], 0, &UniformGuesser, &opts, &vocab, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(r.rounds.len(), 1);
}

#[test]
fn corpora_are_reproducible_and_splits_disjoint() {
    let env = EnvConfig::default();
    let a = generate_corpus(&env, Split::Train, 40, 5).unwrap();
    let b = generate_corpus(&env, Split::Train, 40, 5).unwrap();
    assert_eq!(a, b);
    let val = generate_corpus(&env, Split::Val, 40, 5).unwrap();
    assert!(a.iter().all(|g| val.iter().all(|v| v.scene != g.scene)));
    for g in &a {
        g.validate(env.j_max).unwrap();
        assert!(matches!(g.status, GameStatus::Success | GameStatus::Failure));
        assert!(g.rounds.iter().all(|qa| evaluate_template(&g.scene, g.target_index, &qa.question.template).unwrap() == qa.answer));
    }
}
