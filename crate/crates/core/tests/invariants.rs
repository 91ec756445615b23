use nck_scma::channel::{modulate, sample_channel, transmit, ChannelDims, Fading};
use nck_scma::codebook::parse_codebook;
use nck_scma::detector::ScmaGraph;
use nck_scma::ldpc::parse_alist;
use nck_scma::Codebook;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bundled() -> Codebook {
    parse_codebook(include_str!("../data/codebooks/scma_4x6.json")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resource_samples_ignore_users_not_on_it(
        symbols in proptest::collection::vec(0usize..4, 6),
        user in 0usize..6,
        other in 0usize..4,
        seed in any::<u64>(),
    ) {
        let cb = bundled();
        let dims = ChannelDims { codewords: 1, codewords_per_tti: 1, users: 6, resources: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = sample_channel(&cb, dims, Fading::RayleighIid, 0.0, &mut rng);
        let base = transmit(&modulate(&cb, &symbols), &ch, &mut rng).unwrap();
        let mut changed = symbols.clone();
        changed[user] = other;
        let moved = transmit(&modulate(&cb, &changed), &ch, &mut rng).unwrap();
        for r in 0..4 {
            if !cb.resources_of(user).contains(&r) {
                prop_assert_eq!(base.sample(0, r), moved.sample(0, r));
            }
        }
    }

    #[test]
    fn svn_message_ignores_its_own_function_node(
        msgs in proptest::collection::vec(0.01f64..1.0, 48),
        bump in 0.01f64..1.0,
        user in 0usize..6,
    ) {
        let cb = bundled();
        let graph = ScmaGraph::new(&cb);
        let prior = [0.25; 4];
        let mut base = vec![0.0; msgs.len()];
        graph.svn_update(user, &msgs, &prior, &mut base, 1.0);
        for &e in graph.var_edges(user) {
            let mut perturbed = msgs.clone();
            perturbed[e * 4] += bump;
            let mut out = vec![0.0; msgs.len()];
            graph.svn_update(user, &perturbed, &prior, &mut out, 1.0);
            for k in 0..4 {
                prop_assert_eq!(out[e * 4 + k], base[e * 4 + k]);
            }
        }
    }

    #[test]
    fn ldpc_messages_are_extrinsic(
        llrs in proptest::collection::vec(-8.0f64..8.0, 12),
        prior in proptest::collection::vec(-8.0f64..8.0, 7),
        bump in 0.5f64..4.0,
    ) {
        let code = parse_alist(include_str!("../data/codes/hamming_7_4.alist")).unwrap();
        let e_count = code.edges();
        prop_assume!(e_count == llrs.len());
        let mut to_vars = vec![0.0; e_count];
        code.check_pass(&llrs, &mut to_vars);
        let mut to_checks = vec![0.0; e_count];
        let mut totals = vec![0.0; code.len()];
        code.variable_pass(&llrs, &prior, &mut to_checks, &mut totals);
        for e in 0..e_count {
            let mut p = llrs.clone();
            p[e] += bump;
            let mut out = vec![0.0; e_count];
            code.check_pass(&p, &mut out);
            prop_assert_eq!(out[e], to_vars[e]);
            let mut back = vec![0.0; e_count];
            code.variable_pass(&p, &prior, &mut back, &mut totals);
            prop_assert!((back[e] - to_checks[e]).abs() < 1e-12);
        }
    }
}
