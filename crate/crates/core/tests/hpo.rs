mod common;

use commbench::hpo::{Dimension, ParamValue, SearchSpace, Study, StudyConfig};
use proptest::prelude::*;

fn dimension(i: usize, kind: u8, a: f64, b: f64, conditional: bool) -> Dimension {
    let name = format!("p{i}");
    let (lo, hi) = (a.min(b), a.max(b) + 0.5);
    let d = match kind {
        0 => Dimension::uniform(&name, lo, hi),
        1 => Dimension::log_uniform(&name, lo + 1e-3, hi + 1e-3),
        2 => Dimension::int_uniform(&name, lo as i64, hi as i64 + 1),
        _ => Dimension::categorical(&name, vec!["a".into(), ParamValue::Int(3), ParamValue::Float(0.5)]),
    };
    if conditional {
        d.when("root", ParamValue::Bool(true))
    } else {
        d
    }
}

fn space_strategy() -> impl Strategy<Value = SearchSpace> {
    prop::collection::vec((0u8..4, 0.0f64..10.0, 0.0f64..10.0, any::<bool>()), 1..6).prop_map(|dims| {
        let mut all = vec![Dimension::categorical("root", vec![ParamValue::Bool(true), ParamValue::Bool(false)])];
        all.extend(dims.into_iter().enumerate().map(|(i, (k, a, b, c))| dimension(i, k, a, b, c)));
        SearchSpace::new(all).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn suggestions_stay_in_the_space(space in space_strategy(), seed in any::<u64>(), objectives in 1usize..3) {
        let config = StudyConfig { max_trials: 30, n_startup: 5, ..StudyConfig::default() };
        let mut study = Study::new(space.clone(), config, seed).unwrap();
        for i in 0..30 {
            let params = study.suggest().unwrap();
            prop_assert!(space.validate(&params).is_ok(), "{:?}: {:?}", params, space.validate(&params));
            let outcome = if i % 7 == 3 {
                Err("diverged".to_string())
            } else {
                Ok((0..objectives).map(|k| ((i * 31 + k * 17) % 11) as f64).collect())
            };
            study.tell(params, outcome);
        }
        prop_assert_eq!(study.remaining(), 0);
    }

    #[test]
    fn studies_replay_from_their_seed(seed in any::<u64>()) {
        prop_assert_eq!(common::bandit_tpe(25, seed), common::bandit_tpe(25, seed));
    }
}

#[test]
fn tpe_beats_random_search_on_deceptive_bandit() {
    let tpe: Vec<f64> = (0..20).map(|s| common::bandit_tpe(100, s)).collect();
    let random: Vec<f64> = (0..20).map(|s| common::bandit_random(100, s)).collect();
    let (t, r) = (common::median(tpe), common::median(random));
    assert!(t > r, "tpe median {t} vs random median {r}");
}

#[test]
fn tpe_finds_sphere_minimum() {
    for seed in 0..20 {
        let best = common::sphere_tpe(100, seed);
        assert!(best <= 0.05, "seed {seed}: {best}");
    }
}
