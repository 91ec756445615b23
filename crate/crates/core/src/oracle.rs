//! Brute-force references and the small topologies they run on.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{modulate, sample_channel, transmit, ChannelDims, ChannelRealization, Fading, ReceivedBlock};
use crate::codebook::Codebook;
use crate::detector::{
    ncn_update, Branch, DetectorConfig, JointDetector, NcnCase, RoundDetector, RoundInput, SlotMpa, SoftBuffer,
};
use crate::error::{Error, Result};
use crate::harq::map_round;
use crate::interleave::Interleaver;
use crate::ldpc::LdpcCode;
use crate::llr::prob_zero;
use crate::schedule::{build_schedule, derive_config, soft_xor, Layout, Schedule};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Two users, two resources, `M = 4`. User 0 occupies both resources and
/// user 1 only the second, so the single-slot factor graph is a tree.
pub fn toy_mpa_codebook() -> Codebook {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let qpsk = [c(s, s), c(-s, s), c(s, -s), c(-s, -s)];
    let rot = Complex64::from_polar(1.0, 0.4);
    let u0 = (0..4).map(|m| vec![qpsk[m] * s, qpsk[(m + 2) % 4] * rot * s]).collect();
    let u1 = (0..4).map(|m| vec![c(0.0, 0.0), qpsk[m] * rot.conj()]).collect();
    Codebook::new(vec![vec![true, false], vec![true, true]], vec![u0, u1]).expect("valid toy codebook")
}

/// Two BPSK users on orthogonal resources.
pub fn toy_identity_codebook() -> Codebook {
    let cw = |j: usize, sign: f64| {
        let mut v = vec![c(0.0, 0.0); 2];
        v[j] = c(sign, 0.0);
        v
    };
    let users = (0..2).map(|j| vec![cw(j, 1.0), cw(j, -1.0)]).collect();
    Codebook::new(vec![vec![true, false], vec![false, true]], users).expect("valid toy codebook")
}

/// One binary user spread over two resources with distinct phases.
pub fn toy_spread_codebook() -> Codebook {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = Complex64::from_polar(s, 0.3);
    let b = Complex64::from_polar(s, -1.1);
    Codebook::new(vec![vec![true], vec![true]], vec![vec![vec![a, b], vec![-a, -b]]]).expect("valid toy codebook")
}

/// A length-7 code whose Tanner graph is a tree (checks `{0,1,2}`,
/// `{2,3,4}`, `{4,5,6}`).
pub fn tree_code() -> LdpcCode {
    LdpcCode::from_checks(7, vec![vec![0, 1, 2], vec![2, 3, 4], vec![4, 5, 6]]).expect("valid tree code")
}

/// `P(x₁ ⊕ x₂ = 1)` for independent bits with LLRs `l1`, `l2`.
pub fn xor_probability(l1: f64, l2: f64) -> f64 {
    let (p1, p2) = (prob_zero(l1), prob_zero(l2));
    let mut p = 0.0;
    for (a, pa) in [(0, p1), (1, 1.0 - p1)] {
        for (b, pb) in [(0, p2), (1, 1.0 - p2)] {
            if a ^ b == 1 {
                p += pa * pb;
            }
        }
    }
    p
}

/// Symbol distribution of the XOR of two symbols whose bits are
/// independent with the given LLRs.
pub fn xor_symbol_distribution(cb: &Codebook, la: &[f64], lb: &[f64]) -> Vec<f64> {
    let m = cb.order();
    let dist = |l: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|s| {
                (0..cb.bits_per_symbol())
                    .map(|i| if cb.bit_of(s, i) == 0 { prob_zero(l[i]) } else { 1.0 - prob_zero(l[i]) })
                    .product()
            })
            .collect()
    };
    let (pa, pb) = (dist(la), dist(lb));
    let mut out = vec![0.0; m];
    for a in 0..m {
        for b in 0..m {
            out[a ^ b] += pa[a] * pb[b];
        }
    }
    out
}

/// Exact symbol posteriors at one codeword position by enumerating all
/// `M^J` hypotheses. `h[j][r]`, `priors[j][m]`.
pub fn slot_map_posteriors(
    cb: &Codebook,
    y: &[Complex64],
    h: &[Vec<Complex64>],
    n0: f64,
    priors: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let (users, m) = (cb.users(), cb.order());
    let mut post = vec![vec![0.0; m]; users];
    let mut hyp = vec![0usize; users];
    for idx in 0..m.pow(users as u32) {
        let mut rest = idx;
        for x in hyp.iter_mut() {
            *x = rest % m;
            rest /= m;
        }
        let mut w: f64 = (0..users).map(|j| priors[j][hyp[j]]).product();
        for (r, &yr) in y.iter().enumerate() {
            let s: Complex64 = (0..users).map(|j| h[j][r] * cb.entry(j, hyp[j], r)).sum();
            w *= (-(yr - s).norm_sqr() / n0).exp();
        }
        for j in 0..users {
            post[j][hyp[j]] += w;
        }
    }
    for p in &mut post {
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
    }
    post
}

/// All codewords of a (small) code.
pub fn codewords(code: &LdpcCode) -> Vec<Vec<u8>> {
    let k = code.info_len();
    (0..1usize << k)
        .map(|i| {
            let info: Vec<u8> = (0..k).map(|b| ((i >> b) & 1) as u8).collect();
            code.encode(&info).expect("info length matches")
        })
        .collect()
}

/// Exact bit LLRs (code order, `[user][packet][n]`) of one round by
/// enumerating every combination of codewords over all users and packets.
pub fn joint_map_llrs(
    cb: &Codebook,
    code: &LdpcCode,
    schedule: &Schedule,
    interleavers: &[Vec<Interleaver>],
    received: &ReceivedBlock,
    channel: &ChannelRealization,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let book = codewords(code);
    let (users, packets, n) = (cb.users(), schedule.config.packets, code.len());
    let slots = users * packets;
    let total = (book.len() as f64).powi(slots as i32);
    if total > (1u64 << 22) as f64 {
        return Err(Error::Invalid(format!("{total} hypotheses is too many to enumerate")));
    }
    let mut p0 = vec![0.0; slots * n];
    let mut p1 = vec![0.0; slots * n];
    let mut logw = Vec::with_capacity(total as usize);
    let mut choice = vec![0usize; slots];
    for idx in 0..total as usize {
        let mut rest = idx;
        for x in choice.iter_mut() {
            *x = rest % book.len();
            rest /= book.len();
        }
        let cws: Vec<Vec<Vec<u8>>> = (0..users)
            .map(|j| (0..packets).map(|t| book[choice[j * packets + t]].clone()).collect())
            .collect();
        let symbols = map_round(cb, schedule, interleavers, &cws)?;
        let mut d = 0.0;
        for l in 0..received.codewords() {
            for r in 0..cb.resources() {
                let s: Complex64 = (0..users)
                    .map(|j| channel.coeff(l, j, r) * cb.entry(j, symbols[l * users + j], r))
                    .sum();
                d += (received.sample(l, r) - s).norm_sqr();
            }
        }
        logw.push(-d / channel.n0);
    }
    let peak = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (idx, lw) in logw.iter().enumerate() {
        let w = (lw - peak).exp();
        let mut rest = idx;
        for k in 0..slots {
            let cw = &book[rest % book.len()];
            rest /= book.len();
            for (v, &bit) in cw.iter().enumerate() {
                if bit == 0 {
                    p0[k * n + v] += w;
                } else {
                    p1[k * n + v] += w;
                }
            }
        }
    }
    Ok((0..users)
        .map(|j| {
            (0..packets)
                .map(|t| {
                    let k = j * packets + t;
                    (0..n).map(|v| (p0[k * n + v] / p1[k * n + v]).ln()).collect()
                })
                .collect()
        })
        .collect())
}

/// Outcome of one check inside a named suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub const SUITES: &[&str] = &["soft-xor", "mpa", "joint-map", "ncn", "xor-prior"];

/// Runs one named suite (or `all`).
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>> {
    match name {
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        "soft-xor" => Ok(vec![soft_xor_suite(seed)]),
        "mpa" => Ok(vec![mpa_suite(seed)]),
        "joint-map" => joint_map_suite(seed).map(|c| vec![c]),
        "ncn" => Ok(ncn_suite(seed)),
        "xor-prior" => Ok(vec![xor_prior_suite(seed)]),
        _ => Err(Error::Invalid(format!("unknown oracle suite {name:?}; available: all, {}", SUITES.join(", ")))),
    }
}

fn check(name: &str, worst: f64, tol: f64) -> Check {
    Check {
        name: name.into(),
        passed: worst <= tol,
        detail: format!("max error {worst:.3e} (tolerance {tol:.0e})"),
    }
}

fn soft_xor_suite(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let worst = (0..10_000)
        .map(|_| {
            let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            (prob_zero(-soft_xor(a, b)) - xor_probability(a, b)).abs()
        })
        .fold(0.0, f64::max);
    check("soft XOR vs enumeration", worst, 1e-9)
}

fn mpa_suite(seed: u64) -> Check {
    let cb = toy_mpa_codebook();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let h: Vec<Vec<Complex64>> = (0..2)
            .map(|_| (0..2).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        let n0 = rng.random_range(0.05..2.0);
        let y: Vec<Complex64> = (0..2).map(|_| c(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))).collect();
        let mut mpa = SlotMpa::new(&cb, &y, &h, n0);
        mpa.iterate(3);
        let exact = slot_map_posteriors(&cb, &y, &h, n0, &[vec![0.25; 4], vec![0.25; 4]]);
        for (p, q) in mpa.posteriors().iter().flatten().zip(exact.iter().flatten()) {
            worst = worst.max((p - q).abs());
        }
    }
    check("single-slot MPA vs MAP enumeration", worst, 1e-6)
}

/// The uncoupled toy round used by the joint MAP comparison: one spread
/// BPSK user, the tree code, `T = 1` with two repetitions.
pub struct ToyRound {
    pub codebook: Codebook,
    pub code: LdpcCode,
    pub schedule: Schedule,
    pub interleavers: Vec<Vec<Interleaver>>,
    pub received: ReceivedBlock,
    pub channel: ChannelRealization,
}

pub fn toy_round(rng: &mut ChaCha8Rng, n0: f64) -> Result<ToyRound> {
    let codebook = toy_spread_codebook();
    let code = tree_code();
    let cfg = derive_config(2, 1, 2, code.len(), 1)?;
    let schedule = build_schedule(&cfg, Layout::KScma)?;
    let mut perm: Vec<usize> = (0..code.len()).collect();
    rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), rng);
    let interleavers = vec![vec![Interleaver::from_permutation(perm)]];
    let book = codewords(&code);
    let cw = book[rng.random_range(0..book.len())].clone();
    let symbols = map_round(&codebook, &schedule, &interleavers, &[vec![cw]])?;
    let dims = ChannelDims {
        codewords: schedule.codewords(),
        codewords_per_tti: cfg.codewords_per_packet,
        users: 1,
        resources: 2,
    };
    let channel = sample_channel(&codebook, dims, Fading::RayleighIid, n0, rng);
    let received = transmit(&modulate(&codebook, &symbols), &channel, rng)?;
    Ok(ToyRound {
        codebook,
        code,
        schedule,
        interleavers,
        received,
        channel,
    })
}

fn joint_map_suite(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut det = JointDetector::new(DetectorConfig {
        max_iter: 20,
        early_stop: false,
        ..DetectorConfig::default()
    })?;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let toy = toy_round(&mut rng, 1.5)?;
        let buffers = SoftBuffer::zeros(1, 1, 0, toy.code.len());
        let res = det.detect_round(&RoundInput {
            codebook: &toy.codebook,
            code: &toy.code,
            schedule: &toy.schedule,
            interleavers: &toy.interleavers,
            received: &toy.received,
            channel: &toy.channel,
            buffers: &buffers,
            cases: &[vec![NcnCase::AllSuccess]],
        })?;
        let exact = joint_map_llrs(&toy.codebook, &toy.code, &toy.schedule, &toy.interleavers, &toy.received, &toy.channel)?;
        for (p, q) in res.posteriors[0][0].iter().zip(&exact[0][0]) {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(check("joint detector vs joint MAP enumeration", worst, 1e-6))
}

fn ncn_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut identity_gap: f64 = 0.0;
    let mut regression_gap: f64 = 0.0;
    for _ in 0..1000 {
        let mut v = || rng.random_range(-15.0..15.0);
        let (ia, fa, ib, fb, iw, fw) = (v(), v(), v(), v(), v(), v());
        let zero_f = Branch {
            i_partner: ib,
            f_partner: 0.0,
            i_pair: iw,
            f_pair: 0.0,
        };
        identity_gap = identity_gap
            .max((ncn_update(NcnCase::AllFail, ia, 0.0, &[zero_f]) - ncn_update(NcnCase::AllSuccess, ia, 0.0, &[zero_f])).abs());
        let b = Branch {
            i_partner: ib,
            f_partner: fb,
            i_pair: iw,
            f_pair: fw,
        };
        let direct = ia + fa + soft_xor(ib, iw) + soft_xor(fb, fw);
        regression_gap = regression_gap.max((ncn_update(NcnCase::PartialFail, ia, fa, &[b]) - direct).abs());
    }
    vec![
        check("all-fail rule with empty buffers equals fresh rule", identity_gap, 0.0),
        check("partial-fail rule vs direct evaluation", regression_gap, 1e-12),
    ]
}

fn xor_prior_suite(seed: u64) -> Check {
    let cb = crate::codebook::parse_codebook(include_str!("../data/codebooks/scma_4x6.json")).expect("bundled codebook");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let la: Vec<f64> = (0..2).map(|_| rng.random_range(-12.0..12.0)).collect();
        let lb: Vec<f64> = (0..2).map(|_| rng.random_range(-12.0..12.0)).collect();
        let bits: Vec<f64> = la.iter().zip(&lb).map(|(&a, &b)| soft_xor(a, b)).collect();
        let prior = cb.inverse_marginalize(&bits).expect("two bits");
        for (p, q) in prior.iter().zip(xor_symbol_distribution(&cb, &la, &lb)) {
            worst = worst.max((p - q).abs());
        }
    }
    check("coded-slot prior vs XOR enumeration", worst, 1e-9)
}
