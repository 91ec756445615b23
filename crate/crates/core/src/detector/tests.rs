use super::*;
use crate::channel::{modulate, sample_channel, transmit, ChannelDims, Fading};
use crate::codebook::load_codebook;
use crate::harq::map_round;
use crate::interleave::interleaver_bank;
use crate::ldpc::load_alist;
use crate::oracle;
use crate::schedule::{build_schedule, derive_config, Layout};
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(p: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(p)
}

struct Setup {
    cb: Codebook,
    code: LdpcCode,
    schedule: Schedule,
    pis: Vec<Vec<Interleaver>>,
}

impl Setup {
    fn bundled(k_eq: usize, t: usize, k_in: usize, layout: Layout) -> Self {
        let cb = load_codebook(data("codebooks/scma_4x6.json")).unwrap();
        let code = load_alist(data("codes/peg_264_132.alist")).unwrap();
        let cfg = derive_config(k_eq, t, k_in, code.len(), cb.bits_per_symbol()).unwrap();
        let schedule = build_schedule(&cfg, layout).unwrap();
        let pis = interleaver_bank(code.len(), cb.users(), t, 11);
        Setup { cb, code, schedule, pis }
    }

    fn codewords(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<u8>>> {
        (0..self.cb.users())
            .map(|_| {
                (0..self.schedule.config.packets)
                    .map(|_| {
                        let info: Vec<u8> = (0..self.code.info_len()).map(|_| rng.random::<bool>() as u8).collect();
                        self.code.encode(&info).unwrap()
                    })
                    .collect()
            })
            .collect()
    }

    fn channel(&self, fading: Fading, n0: f64, cws: &[Vec<Vec<u8>>], rng: &mut ChaCha8Rng) -> (ChannelRealization, ReceivedBlock) {
        let sym = map_round(&self.cb, &self.schedule, &self.pis, cws).unwrap();
        let dims = ChannelDims {
            codewords: self.schedule.codewords(),
            codewords_per_tti: self.schedule.config.codewords_per_packet,
            users: self.cb.users(),
            resources: self.cb.resources(),
        };
        let ch = sample_channel(&self.cb, dims, fading, n0, rng);
        let rx = transmit(&modulate(&self.cb, &sym), &ch, rng).unwrap();
        (ch, rx)
    }

    fn zero_buffers(&self) -> SoftBuffer {
        let c = &self.schedule.config;
        SoftBuffer::zeros(self.cb.users(), c.packets, c.pair_count(), self.code.len())
    }

    fn fresh_cases(&self) -> Vec<Vec<NcnCase>> {
        vec![vec![NcnCase::AllSuccess; self.schedule.config.packets]; self.cb.users()]
    }

    fn input<'a>(
        &'a self,
        ch: &'a ChannelRealization,
        rx: &'a ReceivedBlock,
        buffers: &'a SoftBuffer,
        cases: &'a [Vec<NcnCase>],
    ) -> RoundInput<'a> {
        RoundInput {
            codebook: &self.cb,
            code: &self.code,
            schedule: &self.schedule,
            interleavers: &self.pis,
            received: rx,
            channel: ch,
            buffers,
            cases,
        }
    }
}

#[test]
fn noiseless_type_a_decodes_in_one_pass() {
    let s = Setup::bundled(3, 2, 1, Layout::TypeA);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cws = s.codewords(&mut rng);
    let (ch, rx) = s.channel(Fading::AwgnUnit, 1e-6, &cws, &mut rng);
    let (buf, cases) = (s.zero_buffers(), s.fresh_cases());
    let res = JointDetector::new(DetectorConfig::default())
        .unwrap()
        .detect_round(&s.input(&ch, &rx, &buf, &cases))
        .unwrap();
    assert!(res.iterations <= 2, "{} iterations", res.iterations);
    assert!(res.all_ok());
    assert_eq!(res.decoded, cws);
}

#[test]
fn detection_is_deterministic() {
    let s = Setup::bundled(4, 3, 2, Layout::TypeC);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cws = s.codewords(&mut rng);
    let (ch, rx) = s.channel(Fading::RayleighIid, 0.4, &cws, &mut rng);
    let (buf, cases) = (s.zero_buffers(), s.fresh_cases());
    let mut det = JointDetector::new(DetectorConfig::default()).unwrap();
    let a = det.detect_round(&s.input(&ch, &rx, &buf, &cases)).unwrap();
    let b = det.detect_round(&s.input(&ch, &rx, &buf, &cases)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn hopeless_round_reports_failure() {
    let s = Setup::bundled(3, 2, 1, Layout::TypeA);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cws = s.codewords(&mut rng);
    let (ch, rx) = s.channel(Fading::RayleighIid, 100.0, &cws, &mut rng);
    let (buf, cases) = (s.zero_buffers(), s.fresh_cases());
    let cfg = DetectorConfig {
        max_iter: 4,
        ..DetectorConfig::default()
    };
    let res = JointDetector::new(cfg).unwrap().detect_round(&s.input(&ch, &rx, &buf, &cases)).unwrap();
    assert_eq!(res.iterations, 4);
    assert_eq!(res.trace.len(), 4);
    assert!(!res.all_ok());
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let s = Setup::bundled(3, 2, 1, Layout::TypeA);
    let other = Setup::bundled(4, 2, 2, Layout::TypeA);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cws = other.codewords(&mut rng);
    let (ch, rx) = other.channel(Fading::AwgnUnit, 0.1, &cws, &mut rng);
    let (buf, cases) = (s.zero_buffers(), s.fresh_cases());
    let err = JointDetector::new(DetectorConfig::default())
        .unwrap()
        .detect_round(&s.input(&ch, &rx, &buf, &cases))
        .unwrap_err();
    assert!(matches!(err, Error::Dimension(_)));
    assert!(JointDetector::new(DetectorConfig {
        max_iter: 0,
        ..DetectorConfig::default()
    })
    .is_err());
}

#[test]
fn messages_stay_normalised() {
    let s = Setup::bundled(4, 2, 2, Layout::TypeA);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cws = s.codewords(&mut rng);
    let (ch, rx) = s.channel(Fading::RayleighIid, 0.5, &cws, &mut rng);
    let (buf, cases) = (s.zero_buffers(), s.fresh_cases());
    let input = s.input(&ch, &rx, &buf, &cases);
    let cfg = DetectorConfig::default();
    let mut round = Round::new(&input, &cfg);
    // Fresh state: uniform messages, zero LLRs.
    assert!(round.i_msg.iter().all(|&x| x == 0.25));
    assert!(round.lam_svn.iter().chain(&round.lam_lvn).chain(&round.q).all(|&x| x == 0.0));
    round.fn_pass();
    round.svn_pass();
    round.fn_pass();
    for v in round.i_msg.chunks(4).chain(round.g_msg.chunks(4)) {
        assert_abs_diff_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(v.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn repeated_identical_slots_double_evidence() {
    // Two direct repetitions see the same channel and the same samples.
    let s = Setup::bundled(2, 1, 2, Layout::KScma);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cws = s.codewords(&mut rng);
    let (mut ch, mut rx) = s.channel(Fading::RayleighIid, 0.3, &cws, &mut rng);
    let len = s.schedule.config.codewords_per_packet;
    let (per_y, per_h) = (rx.resources, s.cb.users() * s.cb.resources());
    rx.y.copy_within(0..len * per_y, len * per_y);
    ch.h.copy_within(0..len * per_h, len * per_h);
    let (buf, cases) = (s.zero_buffers(), s.fresh_cases());
    let input = s.input(&ch, &rx, &buf, &cases);
    let cfg = DetectorConfig::default();
    let mut round = Round::new(&input, &cfg);
    round.fn_pass();
    round.accumulate_evidence();
    let block = round.block();
    let mut post = vec![0.0; 4];
    let mut bits = vec![0.0; 2];
    for pos in 0..len {
        for j in 0..s.cb.users() {
            round.graph.symbol_evidence(j, &round.i_msg[pos * block..(pos + 1) * block], &mut post);
            s.cb.marginalize_into(&post, &mut bits);
            for (b, &bit) in bits.iter().enumerate() {
                assert_abs_diff_eq!(round.evidence.initial[j][0][pos * 2 + b], 2.0 * bit, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn coded_slot_prior_matches_xor_enumeration() {
    let s = Setup::bundled(3, 2, 1, Layout::TypeA);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cws = s.codewords(&mut rng);
    let (ch, rx) = s.channel(Fading::RayleighIid, 0.3, &cws, &mut rng);
    let (buf, cases) = (s.zero_buffers(), s.fresh_cases());
    let input = s.input(&ch, &rx, &buf, &cases);
    let cfg = DetectorConfig::default();
    let mut round = Round::new(&input, &cfg);
    for x in round.lam_svn.iter_mut() {
        *x = rng.random_range(-8.0..8.0);
    }
    let n = round.n;
    let coded = SlotKind::Coded { pair: 0, rep: 0 };
    let mut bits = vec![0.0; 2];
    for j in 0..s.cb.users() {
        for pos in [0, 17, 131] {
            round.svn_prior_bits(coded, j, pos, &mut bits);
            let prior = s.cb.inverse_marginalize(&bits).unwrap();
            let la = &round.lam_svn[(j * 2) * n + pos * 2..(j * 2) * n + pos * 2 + 2];
            let lb = &round.lam_svn[(j * 2 + 1) * n + pos * 2..(j * 2 + 1) * n + pos * 2 + 2];
            for (p, q) in prior.iter().zip(oracle::xor_symbol_distribution(&s.cb, la, lb)) {
                assert_abs_diff_eq!(*p, q, epsilon = 1e-9);
            }
        }
    }
    // A zero-LLR partner makes the coded prior uniform.
    for x in round.lam_svn[n..2 * n].iter_mut() {
        *x = 0.0;
    }
    round.svn_prior_bits(coded, 0, 5, &mut bits);
    assert_eq!(bits, vec![0.0, 0.0]);
}

#[test]
fn extrinsic_evidence_equals_full_product_under_flat_priors() {
    let cb = load_codebook(data("codebooks/scma_4x6.json")).unwrap();
    let post = [0.1, 0.2, 0.3, 0.4];
    let mut a = vec![0.0; 2];
    let mut b = vec![0.0; 2];
    extrinsic_bits(&cb, &post, &[0.0, 0.0], &mut a);
    cb.marginalize_into(&post, &mut b);
    for (x, y) in a.iter().zip(&b) {
        assert_abs_diff_eq!(x, y, epsilon = 1e-12);
    }
    // Bit 0's extrinsic LLR weights symbols by bit 1's prior.
    let l1: f64 = 1.3;
    extrinsic_bits(&cb, &post, &[5.0, l1], &mut a);
    let q = 1.0 / (1.0 + (-l1).exp());
    let want = ((0.1 * q + 0.2 * (1.0 - q)) / (0.3 * q + 0.4 * (1.0 - q))).ln();
    assert_abs_diff_eq!(a[0], want, epsilon = 1e-12);
}

#[test]
fn single_packet_joint_posteriors_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = DetectorConfig {
        max_iter: 20,
        early_stop: false,
        ..DetectorConfig::default()
    };
    let mut det = JointDetector::new(cfg).unwrap();
    for _ in 0..10 {
        let toy = oracle::toy_round(&mut rng, 1.0).unwrap();
        let buffers = SoftBuffer::zeros(1, 1, 0, 7);
        let res = det
            .detect_round(&RoundInput {
                codebook: &toy.codebook,
                code: &toy.code,
                schedule: &toy.schedule,
                interleavers: &toy.interleavers,
                received: &toy.received,
                channel: &toy.channel,
                buffers: &buffers,
                cases: &[vec![NcnCase::AllSuccess]],
            })
            .unwrap();
        let exact =
            oracle::joint_map_llrs(&toy.codebook, &toy.code, &toy.schedule, &toy.interleavers, &toy.received, &toy.channel)
                .unwrap();
        for (p, q) in res.posteriors[0][0].iter().zip(&exact[0][0]) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-6);
        }
    }
}
