mod common;

use common::fixture;
use evalcards_core::metrics::{linearity_of_session, transition_matrix, Level};
use evalcards_core::synth::{
    generate_bundle, generate_bundle_with, Archetype, SynthError, SynthProfile,
};
use evalcards_core::Execution;
use proptest::prelude::*;

fn profile(archetype: Archetype, n_users: u32, n_tasks: usize, seed: u64) -> SynthProfile {
    SynthProfile {
        archetype,
        n_users,
        tasks: (0..n_tasks).map(|t| format!("task-{t}")).collect(),
        dwell_ms: (500, 90_000),
        iteration_pair: None,
        seed,
    }
}

fn arb_fixture() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("visus"), Just("distil"), Just("tworavens")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linear_sessions_only_move_forward(name in arb_fixture(), users in 1u32..6, tasks in 1usize..3, seed in any::<u64>()) {
        let model = fixture(name);
        let out = generate_bundle(&model, &profile(Archetype::Linear, users, tasks, seed)).unwrap();
        let order = model.canonical_order();
        for s in &out.bundle.sessions {
            prop_assert!(linearity_of_session(s, &order).unwrap().value >= 0.95);
        }
        let m = transition_matrix(&out.bundle.sessions, &model, Level::L3, false).unwrap();
        prop_assert_eq!(m.below_diagonal_total(), 0);
    }

    #[test]
    fn reversed_sessions_only_move_backward(name in arb_fixture(), users in 1u32..6, seed in any::<u64>()) {
        let model = fixture(name);
        let out = generate_bundle(&model, &profile(Archetype::Reversed, users, 2, seed)).unwrap();
        let order = model.canonical_order();
        for s in &out.bundle.sessions {
            prop_assert_eq!(linearity_of_session(s, &order).unwrap().value, 0.0);
        }
    }

    #[test]
    fn iteration_pair_dominates_off_diagonal(
        name in arb_fixture(),
        a in 0usize..18,
        b in 0usize..18,
        users in 1u32..6,
        seed in any::<u64>(),
    ) {
        let model = fixture(name);
        let (a, b) = (a % model.len(), b % model.len());
        prop_assume!(a != b);
        let mut p = profile(Archetype::Iterative, users, 2, seed);
        p.iteration_pair = Some((model.components[a].comp_id.clone(), model.components[b].comp_id.clone()));
        let out = generate_bundle(&model, &p).unwrap();
        let m = transition_matrix(&out.bundle.sessions, &model, Level::L3, false).unwrap();
        let pair_min = m.counts[a][b].min(m.counts[b][a]);
        for i in 0..model.len() {
            for j in 0..model.len() {
                let is_pair = (i, j) == (a, b) || (i, j) == (b, a);
                if i != j && !is_pair {
                    prop_assert!(m.counts[i][j] < pair_min, "cell ({i},{j}) = {} vs pair {pair_min}", m.counts[i][j]);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic_and_mode_free(name in arb_fixture(), seed in any::<u64>(), arch in 0usize..3) {
        let model = fixture(name);
        let archetype = [Archetype::Linear, Archetype::Nonlinear, Archetype::Reversed][arch];
        let p = profile(archetype, 4, 2, seed);
        let seq = generate_bundle_with(&model, &p, Execution::Sequential).unwrap();
        let par = generate_bundle_with(&model, &p, Execution::Parallel).unwrap();
        prop_assert_eq!(&seq, &par);
        prop_assert_eq!(seq.bundle.sessions.len(), 8);
        prop_assert_eq!(seq.survey.sus.len(), 4);
        prop_assert_eq!(seq.survey.ratings.len(), 4 * model.len());
        for s in &seq.bundle.sessions {
            prop_assert!(s.validate(&model).is_ok());
            prop_assert!(s.records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        }
    }
}

#[test]
fn study_scale_profile_yields_82_sessions() {
    let model = fixture("visus");
    let out = generate_bundle(&model, &profile(Archetype::Nonlinear, 41, 2, 2020)).unwrap();
    assert_eq!(out.bundle.sessions.len(), 82);
    assert_eq!(out.bundle.users().len(), 41);
}

#[test]
fn profile_errors_are_specific() {
    let model = fixture("visus");
    let mut p = profile(Archetype::Iterative, 2, 1, 1);
    assert!(matches!(
        generate_bundle(&model, &p),
        Err(SynthError::MissingIterationPair)
    ));
    p.iteration_pair = Some(("see_pdp".into(), "not_here".into()));
    assert!(
        matches!(generate_bundle(&model, &p), Err(SynthError::IterationPairNotInModel(c)) if c == "not_here")
    );
    p.iteration_pair = Some(("see_pdp".into(), "see_pdp".into()));
    assert!(matches!(
        generate_bundle(&model, &p),
        Err(SynthError::DegenerateIterationPair)
    ));
}

#[test]
fn profile_toml_round_trips() {
    let mut p = profile(Archetype::Iterative, 3, 2, 99);
    p.iteration_pair = Some(("a".into(), "b".into()));
    assert_eq!(SynthProfile::from_toml(&p.to_toml()).unwrap(), p);
    assert!(SynthProfile::from_toml("archetype = \"linear\"\nunknown = 1\n").is_err());
}
