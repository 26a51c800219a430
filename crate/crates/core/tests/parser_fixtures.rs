use ndarray::Array;

use pomdp_lambda::parser::{envs, parse_pomdp, to_cassandra};
use pomdp_lambda::Pomdp;

fn max_gap<D: ndarray::Dimension>(a: &Array<f64, D>, b: &Array<f64, D>) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn assert_same(a: &Pomdp<f64>, b: &Pomdp<f64>, what: &str) {
    assert_eq!(a.gamma(), b.gamma(), "{what}");
    assert_eq!(a.terminal(), b.terminal(), "{what}");
    assert_eq!(max_gap(a.transitions(), b.transitions()), 0.0, "{what}");
    assert_eq!(max_gap(a.phi(), b.phi()), 0.0, "{what}");
    assert_eq!(max_gap(a.p0(), b.p0()), 0.0, "{what}");
    assert!(max_gap(a.rewards(), b.rewards()) < 1e-12, "{what}");
}

#[test]
fn every_fixture_parses_validates_and_round_trips() {
    for (name, text) in envs::FIXTURES {
        let src = parse_pomdp::<f64>(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(src.pomdp.validate().passed(), "{name}");
        let again = parse_pomdp::<f64>(&to_cassandra(&src)).unwrap();
        assert_same(&src.pomdp, &again.pomdp, name);
        assert_eq!(src.state_names, again.state_names);
        assert_eq!(src.action_names, again.action_names);
        assert_eq!(src.obs_names, again.obs_names);
    }
}

#[test]
fn builtin_environments_round_trip_through_the_text_format() {
    for name in ["tmaze", "tmaze-mdp", "parity", "tk-equality"] {
        let src = envs::by_name::<f64>(name).unwrap();
        let again = parse_pomdp::<f64>(&to_cassandra(&src)).unwrap();
        assert_same(&src.pomdp, &again.pomdp, name);
    }
}

#[test]
fn f32_fixtures_agree_with_f64() {
    for (name, text) in envs::FIXTURES {
        let wide = parse_pomdp::<f64>(text).unwrap().pomdp;
        let narrow = parse_pomdp::<f32>(text).unwrap().pomdp;
        assert!(narrow.validate().passed(), "{name}");
        let gap = wide
            .transitions()
            .iter()
            .zip(narrow.transitions())
            .fold(0.0f64, |m, (a, b)| m.max((a - *b as f64).abs()));
        assert!(gap < 1e-6, "{name}: {gap}");
    }
}

#[test]
fn tiger_structure() {
    let src = envs::tiger::<f64>();
    let p = &src.pomdp;
    assert_eq!((p.n_states(), p.n_actions(), p.n_obs()), (5, 3, 4));
    let done = src.state_index("done").unwrap();
    assert!(p.terminal()[done]);
    assert_eq!(p.terminal().iter().filter(|&&t| t).count(), 1);
    let left = src.state_index("tiger-left-2").unwrap();
    let heard_left = src.obs_index("left").unwrap();
    assert_eq!(p.phi()[[left, heard_left]], 0.85);
    assert_eq!(p.p0().sum(), 1.0);
    // Listening costs something; opening the tiger's door is the worst move.
    let listen = src.action_index("listen").unwrap();
    let open_left = src.action_index("open-left").unwrap();
    assert!(p.rewards()[[left, listen]] < 0.0);
    assert!(p.rewards()[[left, open_left]] < p.rewards()[[left, listen]]);
}

#[test]
fn wildcards_expand_over_every_index() {
    let text = "discount: 0.9\nstates: 3\nactions: a b\nobservations: 2\n\
                T: * : * : 2 1\nO: * : * : 0 0.5\nO: * : * : 1 0.5\nR: * : * : * : * 1.5\n";
    let p = parse_pomdp::<f64>(text).unwrap().pomdp;
    for s in 0..3 {
        for a in 0..2 {
            assert_eq!(p.transitions()[[s, a, 2]], 1.0);
            assert_eq!(p.rewards()[[s, a]], 1.5);
        }
        assert_eq!(p.phi().row(s).to_vec(), vec![0.5, 0.5]);
    }
    // Default start is uniform.
    assert!(p.p0().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn parsing_defers_stochasticity_checks_to_validation() {
    let text = "discount: 0.9\nstates: 2\nactions: 1\nobservations: 1\n\
                T: 0 : 0\n0.5 0.4\nT: 0 : 1\n0 1\nO: 0 uniform\n";
    let src = parse_pomdp::<f64>(text).unwrap();
    assert!(!src.pomdp.validate().passed());
}
