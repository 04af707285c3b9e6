use bcsreach::bcs::{solve_np, verify_certificate, Answer, Certificate};
use bcsreach::generators::{random_instance, RandomLimits};
use bcsreach::instance::{parse_instance, serialize_instance};
use bcsreach::monoid::{
    context_decomposition, context_switches, is_identity, is_irreducible, is_right_invertible, reduce_to_irreducible,
    syntactic_inverse_word,
};
use bcsreach::polytime::{has_induced_p4_or_c4, is_transitive_forest, solve_poly, to_promise};
use bcsreach::saturation::saturate;
use bcsreach::{Op, Polarity, StorageGraph, Sym};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph_strategy() -> impl Strategy<Value = StorageGraph> {
    (1usize..=4, any::<u8>(), any::<u8>()).prop_map(|(n, edges, loops)| {
        let mut g = StorageGraph::anonymous(n);
        let mut bit = 0;
        for a in 0..n {
            for b in a + 1..n {
                if edges >> bit & 1 == 1 {
                    g.add_edge(a as Sym, b as Sym);
                }
                bit += 1;
            }
            if loops >> a & 1 == 1 {
                g.add_loop(a as Sym);
            }
        }
        g
    })
}

fn graph_and_word() -> impl Strategy<Value = (StorageGraph, Vec<Op>)> {
    graph_strategy().prop_flat_map(|g| {
        let n = g.len() as Sym;
        let word = prop::collection::vec((0..n, any::<bool>()), 0..12).prop_map(|v| {
            v.into_iter()
                .map(|(sym, pos)| Op { sym, pol: if pos { Polarity::Pos } else { Polarity::Neg } })
                .collect::<Vec<_>>()
        });
        (Just(g), word)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normal_form_is_idempotent_and_irreducible((g, w) in graph_and_word()) {
        let nf = reduce_to_irreducible(&g, &w);
        prop_assert!(is_irreducible(&g, &nf));
        prop_assert_eq!(reduce_to_irreducible(&g, &nf), nf.clone());
        prop_assert_eq!(is_identity(&g, &w), nf.is_empty());
        prop_assert!(nf.len() <= w.len());
    }

    #[test]
    fn switches_match_decomposition((g, w) in graph_and_word()) {
        prop_assume!(!w.is_empty());
        let d = context_decomposition(&g, &w).unwrap();
        prop_assert_eq!(context_switches(&g, &w), d.contexts.len() as i64 - 1);
        prop_assert_eq!(d.contexts.concat(), w);
    }

    #[test]
    fn right_inverse_cancels((g, w) in graph_and_word()) {
        if is_right_invertible(&g, &w) {
            let mut ww = w.clone();
            ww.extend(syntactic_inverse_word(&g, &reduce_to_irreducible(&g, &w)).unwrap());
            prop_assert!(is_identity(&g, &ww));
        }
    }

    #[test]
    fn saturation_is_idempotent_and_quadratic(seed in any::<u64>()) {
        let inst = random_instance(seed, &RandomLimits::default());
        prop_assume!(inst.system.is_dependent());
        let sat = saturate(&inst.system).unwrap();
        let n = inst.system.num_states();
        prop_assert!(sat.added.len() <= n * n);
        let again = saturate(&sat.system()).unwrap();
        prop_assert!(again.added.is_empty());
    }

    #[test]
    fn instance_round_trip(seed in any::<u64>()) {
        let inst = random_instance(seed, &RandomLimits::default());
        prop_assert_eq!(&random_instance(seed, &RandomLimits::default()), &inst);
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(serialize_instance(&back), text);
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn certificates_survive_text(seed in any::<u64>()) {
        let inst = random_instance(seed, &RandomLimits::default());
        let k = inst.k.unwrap_or(1);
        let out = solve_np(&inst.system, inst.q_init, inst.q_fin, k).unwrap();
        if let Some(cert) = out.certificate {
            prop_assert_eq!(out.answer, Answer::Yes);
            let back = Certificate::parse(&cert.to_text(&inst.system), &inst.system).unwrap();
            prop_assert_eq!(&back, &cert);
            prop_assert!(verify_certificate(&inst.system, inst.q_init, inst.q_fin, k, &back));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn promise_paths_stay_within_k(seed in any::<u64>()) {
        let inst = random_instance(seed, &RandomLimits::default());
        let k = inst.k.unwrap_or(1);
        let (promise, init, _) = to_promise(&inst.system, inst.q_init, inst.q_fin, k).unwrap();
        let adj = promise.system.adjacency();
        let g = inst.graph();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..500 {
            let mut q = init;
            let mut word = Vec::new();
            for _ in 0..rng.gen_range(0..=10) {
                let out = &adj[q];
                if out.is_empty() {
                    break;
                }
                let t = out[rng.gen_range(0..out.len())];
                word.extend(t.label);
                q = t.to;
            }
            prop_assert!(context_switches(g, &word) <= k as i64);
        }
    }

    #[test]
    fn poly_matches_np_on_forests(seed in any::<u64>()) {
        let inst = random_instance(seed, &RandomLimits::default());
        prop_assume!(is_transitive_forest(inst.graph()));
        let k = inst.k.unwrap_or(1);
        let np = solve_np(&inst.system, inst.q_init, inst.q_fin, k).unwrap().answer;
        let poly = solve_poly(&inst.system, inst.q_init, inst.q_fin, k).unwrap();
        prop_assert_eq!(np, if poly { Answer::Yes } else { Answer::No });
    }
}

#[test]
fn forest_checks_agree_up_to_six_vertices() {
    for n in 1..=6usize {
        let pairs: Vec<(Sym, Sym)> =
            (0..n as Sym).flat_map(|a| (a + 1..n as Sym).map(move |b| (a, b))).collect();
        for mask in 0u32..1 << pairs.len() {
            let mut g = StorageGraph::anonymous(n);
            for (i, &(a, b)) in pairs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    g.add_edge(a, b);
                }
            }
            assert_eq!(is_transitive_forest(&g), !has_induced_p4_or_c4(&g), "n={n} mask={mask:#x}");
        }
    }
}
