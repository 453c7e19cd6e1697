use acbo_core::acbo::{bayes_update, entropy, information_gain, predictive_response_prob, Posterior};
use acbo_core::dag::{random_dag, Intervention, RelationTemplate, VarPair};
use acbo_core::indep::{
    all_ci_statements, consistent_dags, d_separated, parse_premise, render_premise, CiPolicy, Hypothesis, SearchConfig,
};
use acbo_core::kernel::{delta_similarity, TokenSeq};
use acbo_core::oracle::effective_error;
use proptest::prelude::*;

fn dag_strategy(max_d: usize) -> impl Strategy<Value = acbo_core::Dag> {
    (2..=max_d, 0.0f64..0.8, any::<u64>()).prop_map(|(d, p, s)| random_dag(d, p, s).unwrap())
}

fn posterior_strategy() -> impl Strategy<Value = (Posterior, Vec<bool>)> {
    (2usize..12)
        .prop_flat_map(|n| (prop::collection::vec(0.01f64..1.0, n), prop::collection::vec(any::<bool>(), n)))
        .prop_map(|(w, preds)| (Posterior::from_weights(w).unwrap(), preds))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn premise_text_round_trips(g in dag_strategy(5), full in any::<bool>()) {
        let policy = if full { CiPolicy::Full } else { CiPolicy::MinimalSeparators { max_size: 2 } };
        let (text, p) = render_premise(&g, policy).unwrap();
        let back = parse_premise(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.text().unwrap(), text);
        prop_assert!(p.satisfied_by(&g));
    }

    #[test]
    fn dsep_is_symmetric(g in dag_strategy(7), seed in any::<u64>()) {
        let d = g.num_vars();
        let x = (seed % d as u64) as usize;
        let y = (x + 1 + (seed / 7 % (d as u64 - 1)) as usize) % d;
        let cond: Vec<usize> = (0..d).filter(|&v| v != x && v != y && (seed >> v) & 1 == 1).collect();
        prop_assert_eq!(d_separated(&g, x, y, &cond).unwrap(), d_separated(&g, y, x, &cond).unwrap());
    }

    #[test]
    fn adjacent_pairs_are_never_separated(g in dag_strategy(6)) {
        for s in all_ci_statements(&g, g.num_vars().saturating_sub(2)) {
            if g.adjacent(s.x, s.y) {
                prop_assert!(!s.independent);
            }
        }
    }

    #[test]
    fn mutilation_cuts_incoming_edges_only(g in dag_strategy(7), t in 0usize..7) {
        let t = t % g.num_vars();
        let m = g.mutilate(Intervention::new(t));
        prop_assert_eq!(m.parents_mask(t), 0);
        prop_assert_eq!(m.children_mask(t), g.children_mask(t));
        prop_assert_eq!(m.edge_count(), g.edge_count() - g.parents_mask(t).count_ones() as usize);
    }

    #[test]
    fn interventional_effect_is_descendancy(g in dag_strategy(7)) {
        let d = g.num_vars();
        for pair in VarPair::all(d) {
            let desc = g.descendants(pair.source).contains(&pair.sink);
            prop_assert_eq!(g.r_hat(pair), desc);
            let parent = g.relation_holds(RelationTemplate::Parent, pair.source, pair.sink).unwrap();
            let ancestor = g.relation_holds(RelationTemplate::Ancestor, pair.source, pair.sink).unwrap();
            prop_assert_eq!(desc, parent || ancestor);
            prop_assert!(!(parent && ancestor));
        }
    }

    #[test]
    fn posterior_update_stays_normalized((pi, preds) in posterior_strategy(), eta in 0.001f64..0.49, r in 0u8..2) {
        let next = bayes_update(&pi, &preds, r, eta).unwrap();
        let total: f64 = next.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(next.weights().iter().all(|&w| w >= 0.0));
        // agreeing hypotheses gain relative to disagreeing ones
        for i in 0..preds.len() {
            for j in 0..preds.len() {
                if preds[i] == (r == 1) && preds[j] != (r == 1) {
                    let before = pi.weights()[i] / pi.weights()[j];
                    let after = next.weights()[i] / next.weights()[j];
                    prop_assert!(after > before);
                }
            }
        }
    }

    #[test]
    fn information_gain_is_bounded((pi, preds) in posterior_strategy(), eta in 0.0f64..0.49) {
        let ig = information_gain(&pi, &preds, eta);
        prop_assert!(ig >= -1e-12);
        prop_assert!(ig <= entropy(&pi) + 1e-12);
        prop_assert!(ig <= 1.0 + 1e-12);
        let p1 = predictive_response_prob(&pi, &preds, eta);
        prop_assert!((0.0..=1.0).contains(&p1));
        if preds.iter().all(|&b| b == preds[0]) {
            prop_assert!(ig.abs() < 1e-12);
        }
    }

    #[test]
    fn majority_voting_reduces_error(eta in 0.0f64..0.49, m in 0usize..6) {
        let m = 2 * m + 1;
        let e = effective_error(eta, m);
        prop_assert!(e <= eta + 1e-15);
        prop_assert!(effective_error(eta, m + 2) <= e + 1e-15);
    }

    #[test]
    fn consistent_graphs_reproduce_the_premise(g in dag_strategy(4)) {
        let (_, p) = render_premise(&g, CiPolicy::Full).unwrap();
        let found = consistent_dags(&p, &SearchConfig::exact()).unwrap();
        prop_assert!(found.contains(&g));
        for c in &found {
            prop_assert!(p.satisfied_by(c));
            prop_assert!(acbo_core::indep::markov_equivalent(c, &g).unwrap());
        }
        let h = Hypothesis::new(RelationTemplate::Confounder, 0, 1).unwrap();
        let all_hold = found.iter().all(|c| h.holds_in(c).unwrap());
        prop_assert_eq!(acbo_core::indep::entails(&p, &h, &SearchConfig::exact()).unwrap(), all_hold);
    }

    #[test]
    fn prefix_sharing_bounds_delta(shared in 0usize..30, extra_a in 1usize..10, extra_b in 1usize..10) {
        let base: Vec<String> = (0..shared).map(|i| format!("w{i}")).collect();
        let mut a = base.clone();
        let mut b = base;
        a.extend((0..extra_a).map(|i| format!("a{i}")));
        b.extend((0..extra_b).map(|i| format!("b{i}")));
        let (a, b) = (TokenSeq::new(a).unwrap(), TokenSeq::new(b).unwrap());
        let l = a.len().max(b.len()) as f64;
        let delta = delta_similarity(&a, &b).unwrap();
        prop_assert!(delta >= 0.0);
        prop_assert!(delta <= 2.0 * (l - shared as f64) / l + 1e-12);
    }
}
