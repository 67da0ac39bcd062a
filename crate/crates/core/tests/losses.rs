use gst_core::autodiff::{Array, Graph, Var};
use gst_core::losses::{rl_step_loss, sl_loss, SupervisionConfig, Terms};
use proptest::prelude::*;

fn states(g: &mut Graph<'_>, rows: &[Vec<f64>]) -> Vec<Var> {
    rows.iter().map(|r| g.constant(Array::column(r.clone()))).collect()
}

#[test]
fn three_round_game_by_hand() {
    let rows = vec![
        vec![0.25, 0.25, 0.25, 0.25],
        vec![0.4, 0.2, 0.2, 0.2],
        vec![0.5, 0.5, 0.0, 0.0],
        vec![0.8, 0.2, 0.0, 0.0],
    ];
    let mut g = Graph::new();
    let s = states(&mut g, &rows);
    let b = sl_loss(&mut g, &s, 0, &SupervisionConfig::default()).unwrap();
    let es = -(0.4f64.ln() + 0.5f64.ln()) / 2.0;
    let ps = -(0.8f64.ln());
    let is = -((0.15f64 + 1.1).ln() + (0.1f64 + 1.1).ln() + (0.3f64 + 1.1).ln());
    assert!((b.es - es).abs() < 1e-12);
    assert!((b.ps - ps).abs() < 1e-12);
    assert!((b.is_ - is).abs() < 1e-12);
    assert!((b.total - (0.7 * (es + ps) + 0.3 * is)).abs() < 1e-12);

    // Target with zero mass is clamped rather than infinite.
    let b = sl_loss(&mut g, &s, 3, &SupervisionConfig { terms: Terms::PS_ONLY, ..Default::default() }).unwrap();
    assert!((b.ps + 1e-12f64.ln()).abs() < 1e-9);
}

#[test]
fn single_round_has_no_early_term() {
    let mut g = Graph::new();
    let s = states(&mut g, &[vec![0.5, 0.5, 0.0], vec![0.9, 0.05, 0.05]]);
    let b = sl_loss(&mut g, &s, 0, &SupervisionConfig::default()).unwrap();
    assert_eq!(b.es, 0.0);
    assert!((b.ps + 0.9f64.ln()).abs() < 1e-12);
}

#[test]
fn invalid_offsets_and_empty_traces_are_rejected() {
    let mut g = Graph::new();
    let s = states(&mut g, &[vec![0.5, 0.5], vec![0.6, 0.4]]);
    for c in [1.0, 0.5, f64::NAN] {
        assert!(sl_loss(&mut g, &s, 0, &SupervisionConfig { c, ..Default::default() }).is_err());
    }
    assert!(sl_loss(&mut g, &s[..1], 0, &SupervisionConfig::default()).is_err());
}

#[test]
fn failed_self_play_games_contribute_nothing() {
    let mut g = Graph::new();
    let s = states(&mut g, &[vec![0.5, 0.5], vec![0.6, 0.4]]);
    let cfg = SupervisionConfig::default();
    let hit = rl_step_loss(&mut g, &s, 1, 1, 1.0, &cfg).unwrap().unwrap();
    let sl = sl_loss(&mut g, &s, 1, &cfg).unwrap();
    assert_eq!(hit.total, sl.total);
    assert!(rl_step_loss(&mut g, &s, 1, 0, 0.0, &cfg).unwrap().is_none());
    assert!(rl_step_loss(&mut g, &s, 1, 0, 1.0, &cfg).is_err());
}

fn trace(m: usize, j: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, m), j + 1).prop_map(|rows| {
        rows.into_iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.into_iter().map(|x| x / s).collect()
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn loss_ignores_object_order(rows in (3usize..10, 1usize..6).prop_flat_map(|(m, j)| trace(m, j)), rot in 1usize..10, t in 0usize..3) {
        let m = rows[0].len();
        let perm: Vec<usize> = (0..m).map(|i| (i + rot) % m).collect();
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&i| r[i]).collect()).collect();
        let new_t = perm.iter().position(|&i| i == t).unwrap();
        let mut g = Graph::new();
        let a = states(&mut g, &rows);
        let b = states(&mut g, &moved);
        let cfg = SupervisionConfig::default();
        let la = sl_loss(&mut g, &a, t, &cfg).unwrap();
        let lb = sl_loss(&mut g, &b, new_t, &cfg).unwrap();
        prop_assert_eq!(la.total, lb.total);
    }

    #[test]
    fn incremental_term_rewards_rising_belief(rows in trace(4, 3)) {
        let mut g = Graph::new();
        let cfg = SupervisionConfig { terms: Terms::WITHOUT_ES_PS, ..Default::default() };
        let s = states(&mut g, &rows);
        let b = sl_loss(&mut g, &s, 0, &cfg).unwrap();
        let rises = rows.windows(2).all(|w| w[1][0] >= w[0][0]);
        if rises {
            prop_assert!(b.is_ <= -3.0 * 1.1f64.ln() + 1e-12);
        }
        prop_assert!(b.is_.is_finite());
    }
}
