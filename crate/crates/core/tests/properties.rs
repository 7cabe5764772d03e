use evalkit_core::analysis::{kendall_tau_b, rank_systems, Scores};
use evalkit_core::dialogue::{Corpus, Dialogue, DialogueAct, Speaker, ITEM_SLOT};
use evalkit_core::metrics::{
    evaluate_system, segment_rounds, utility_report, EvaluateOptions, Factor, GroundTruth,
    MetricKind, RoundOutcome,
};
use proptest::prelude::*;

const USER: &[&str] = &["Disclose", "Inquire", "Accept", "Reject", "Other"];
const SYSTEM: &[&str] = &["Recommend", "Request", "Respond", "Other"];
const TITLES: &[&str] = &["A", "B", "C"];

#[derive(Debug, Clone)]
struct TurnSpec {
    user: bool,
    acts: Vec<(usize, Option<usize>)>,
    items: Vec<usize>,
    text: String,
}

fn turn() -> impl Strategy<Value = TurnSpec> {
    (
        any::<bool>(),
        prop::collection::vec((0usize..5, prop::option::of(0usize..3)), 0..3),
        prop::collection::vec(0usize..3, 0..3),
        "[a-z ]{0,12}",
    )
        .prop_map(|(user, acts, items, text)| TurnSpec {
            user,
            acts,
            items,
            text,
        })
}

fn build(id: &str, crs: &str, turns: &[TurnSpec]) -> Dialogue {
    let mut d = Dialogue::new(id, crs);
    for t in turns {
        let (speaker, intents) = if t.user {
            (Speaker::User, USER)
        } else {
            (Speaker::System, SYSTEM)
        };
        let u = d.push(speaker, t.text.clone());
        u.acts = t
            .acts
            .iter()
            .map(|(i, title)| {
                let act = DialogueAct::new(intents[i % intents.len()]);
                match title {
                    Some(k) => act.with_slot(ITEM_SLOT, TITLES[*k]),
                    None => act,
                }
            })
            .collect();
        if !t.user {
            u.items = t.items.iter().map(|k| TITLES[*k].to_string()).collect();
        }
    }
    d
}

fn dialogue() -> impl Strategy<Value = Vec<TurnSpec>> {
    prop::collection::vec(turn(), 1..12)
}

fn corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec((dialogue(), 0usize..3), 1..8).prop_map(|ds| {
        let mut dialogues: Vec<Dialogue> = ds
            .iter()
            .enumerate()
            .map(|(i, (turns, sys))| build(&format!("d{i:02}"), ["x", "y", "z"][*sys], turns))
            .collect();
        // Make sure the corpus counts as annotated.
        dialogues[0].utterances[0]
            .acts
            .push(DialogueAct::new("Other"));
        Corpus::new(dialogues)
    })
}

fn has(d: &Dialogue, i: usize, intent: &str) -> bool {
    d.utterances[i].acts.iter().any(|a| a.is(intent))
}

fn is_decision(d: &Dialogue, i: usize) -> bool {
    d.utterances[i].speaker == Speaker::User && (has(d, i, "Accept") || has(d, i, "Reject"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rounds_are_well_formed(turns in dialogue()) {
        let mut d = build("d", "x", &turns);
        d.utterances[0].acts.push(DialogueAct::new("Other"));
        let rounds = segment_rounds(&d).unwrap();
        for pair in rounds.windows(2) {
            prop_assert!(pair[0].end_index < pair[1].start_index);
        }
        for (k, r) in rounds.iter().enumerate() {
            prop_assert_eq!(d.utterances[r.start_index].speaker, Speaker::System);
            prop_assert!(has(&d, r.start_index, "Recommend"));
            let first_decision = (r.start_index + 1..d.len()).find(|&i| is_decision(&d, i));
            match r.outcome {
                RoundOutcome::Unresolved => {
                    prop_assert_eq!(first_decision, None);
                    prop_assert_eq!(r.end_index, d.len());
                    prop_assert_eq!(k, rounds.len() - 1);
                }
                outcome => {
                    prop_assert_eq!(Some(r.end_index), first_decision);
                    let first = d.utterances[r.end_index].acts.iter().find(|a| a.is("Accept") || a.is("Reject")).unwrap();
                    let expected = if first.is("Accept") { RoundOutcome::Accepted } else { RoundOutcome::Rejected };
                    prop_assert_eq!(outcome, expected);
                }
            }
        }
        // Every system recommendation falls inside some round.
        for i in 0..d.len() {
            if d.utterances[i].speaker == Speaker::System && has(&d, i, "Recommend") {
                prop_assert!(rounds.iter().any(|r| r.start_index <= i && i <= r.end_index));
            }
        }
    }

    #[test]
    fn text_mutation_leaves_reports_unchanged(c in corpus(), replacement in "[A-Za-z!? ]{0,20}") {
        let mut gt = GroundTruth::new();
        for d in &c.dialogues {
            for u in &d.utterances {
                gt.insert(d.dialogue_id.clone(), u.index, vec!["A".into()]);
            }
        }
        let metrics = [MetricKind::SuccessRate, MetricKind::Srrr, MetricKind::Rdl, MetricKind::RecallAt(1)];
        let options = EvaluateOptions { ground_truth: Some(&gt) };
        let before = evaluate_system(&c, &metrics, &options).unwrap();
        let mut mutated = c.clone();
        for d in &mut mutated.dialogues {
            for u in &mut d.utterances {
                u.text = format!("{replacement}{}", u.text.to_uppercase());
            }
        }
        prop_assert_eq!(before, evaluate_system(&mutated, &metrics, &options).unwrap());
    }

    #[test]
    fn permutation_leaves_system_scores_unchanged(c in corpus(), seed in any::<u64>()) {
        let metrics = [MetricKind::SuccessRate, MetricKind::Srrr, MetricKind::Rdl];
        let options = EvaluateOptions::default();
        let before = evaluate_system(&c, &metrics, &options).unwrap();
        let mut shuffled = c.clone();
        let n = shuffled.dialogues.len();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.dialogues.swap(i, (state >> 33) as usize % (i + 1));
        }
        let after = evaluate_system(&shuffled, &metrics, &options).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert_eq!(&b.per_system, &a.per_system);
        }
    }

    #[test]
    fn power_of_two_weight_scaling_keeps_ranking(
        c in corpus(),
        w in (1u32..5, 1u32..5, 1u32..5, 1u32..5),
        exponent in -6i32..8,
        scale_rewards in any::<bool>(),
    ) {
        let k = 2f64.powi(exponent);
        let report = |kr: f64, kc: f64| {
            let rewards = [
                Factor::accepted_items().with_weight(w.0 as f64 * kr).unwrap(),
                Factor::success().with_weight(w.1 as f64 * kr).unwrap(),
            ];
            let costs = [
                Factor::dialogue_length().with_weight(w.2 as f64 * kc).unwrap(),
                Factor::round_count().with_weight(w.3 as f64 * kc).unwrap(),
            ];
            utility_report(&c, "u", &rewards, &costs).unwrap().per_system
        };
        let base = report(1.0, 1.0);
        let scaled = if scale_rewards { report(k, 1.0) } else { report(1.0, k) };
        prop_assume!(base.len() >= 2);
        let a = rank_systems(&base).unwrap();
        let b = rank_systems(&scaled).unwrap();
        prop_assert_eq!(a.order(), b.order());
        prop_assert_eq!(a.ranks(), b.ranks());
    }

    #[test]
    fn arbitrary_weight_scaling_keeps_strict_order(
        c in corpus(),
        k in 0.01f64..100.0,
        scale_rewards in any::<bool>(),
    ) {
        let report = |kr: f64, kc: f64| {
            let rewards = [Factor::accepted_items().with_weight(kr).unwrap()];
            let costs = [Factor::dialogue_length().with_weight(kc).unwrap()];
            utility_report(&c, "u", &rewards, &costs).unwrap().per_system
        };
        let base = report(1.0, 1.0);
        let scaled = if scale_rewards { report(k, 1.0) } else { report(1.0, k) };
        for (x, bx) in &base {
            for (y, by) in &base {
                if bx - by > 1e-9 {
                    prop_assert!(scaled[x] > scaled[y], "{x} vs {y}");
                }
                if bx == by {
                    let rel = (scaled[x] - scaled[y]).abs() / scaled[x].abs().max(1e-300);
                    prop_assert!(rel < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tau_b_invariant_under_increasing_transforms(
        xs in prop::collection::vec(0u8..20, 2..12),
        ys in prop::collection::vec(0u8..20, 12),
    ) {
        let x: Scores = xs.iter().enumerate().map(|(i, v)| (format!("s{i}"), *v as f64 / 10.0)).collect();
        let y: Scores = x.keys().zip(&ys).map(|(k, v)| (k.clone(), *v as f64 / 10.0)).collect();
        let Ok(tau) = kendall_tau_b(&x, &y) else { return Ok(()); };
        prop_assert!((-1.0..=1.0).contains(&tau));
        let transforms: [fn(f64) -> f64; 4] = [|v| 3.0 * v + 1.0, |v| v * v * v, f64::exp, |v| (v + 1.0).ln()];
        for f in transforms {
            let fx: Scores = x.iter().map(|(k, v)| (k.clone(), f(*v))).collect();
            let fy: Scores = y.iter().map(|(k, v)| (k.clone(), f(*v))).collect();
            prop_assert_eq!(kendall_tau_b(&fx, &y).unwrap(), tau);
            prop_assert_eq!(kendall_tau_b(&x, &fy).unwrap(), tau);
        }
        prop_assert_eq!(kendall_tau_b(&y, &x).unwrap(), tau);
        // Ranks are a decreasing transform of scores in both arguments.
        let rx = rank_systems(&x).unwrap().ranks();
        let ry = rank_systems(&y).unwrap().ranks();
        prop_assert_eq!(kendall_tau_b(&rx, &ry).unwrap(), tau);
    }

    #[test]
    fn tau_b_of_self_and_negation(xs in prop::collection::hash_set(0u16..1000, 2..15)) {
        let x: Scores = xs.iter().enumerate().map(|(i, v)| (format!("s{i}"), *v as f64)).collect();
        let neg: Scores = x.iter().map(|(k, v)| (k.clone(), -v)).collect();
        prop_assert_eq!(kendall_tau_b(&x, &x).unwrap(), 1.0);
        prop_assert_eq!(kendall_tau_b(&x, &neg).unwrap(), -1.0);
    }
}

#[test]
fn hand_traced_two_round_fixture() {
    let mut d = Dialogue::new("d", "x");
    for (speaker, intent) in [
        (Speaker::System, "Recommend"),
        (Speaker::User, "Inquire"),
        (Speaker::System, "Respond"),
        (Speaker::User, "Reject"),
        (Speaker::System, "Recommend"),
        (Speaker::User, "Accept"),
    ] {
        d.push(speaker, "...").acts.push(DialogueAct::new(intent));
    }
    let outcomes: Vec<_> = segment_rounds(&d)
        .unwrap()
        .iter()
        .map(|r| r.outcome)
        .collect();
    assert_eq!(
        outcomes,
        vec![RoundOutcome::Rejected, RoundOutcome::Accepted]
    );
}
