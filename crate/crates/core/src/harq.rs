//! HARQ control for one group of `T` packets per user.
//!
//! Every round transmits the full schedule for the packets currently in
//! flight. After a round each packet is acknowledged when its syndrome is
//! satisfied. Unacknowledged packets are retransmitted (with soft buffers)
//! until `N_re` retransmissions are spent; acknowledged or exhausted slots
//! are refilled with fresh payloads, which are re-paired with the pending
//! packets. A group ends when every one of its original packets is resolved;
//! refill packets are not scored.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{sample_channel, transmit, ChannelDims, Fading};
use crate::codebook::{bits_to_index, Codebook};
use crate::detector::{NcnCase, RoundDetector, RoundInput, RoundResult, SoftBuffer};
use crate::error::{Error, Result};
use crate::interleave::Interleaver;
use crate::ldpc::LdpcCode;
use crate::schedule::{Schedule, SlotKind};

/// Combining rule for one user given the previous round's ACK flags over its
/// `T` packet slots. `None` is the first round.
pub fn classify_case(previous_acks: Option<&[bool]>) -> NcnCase {
    match previous_acks {
        None => NcnCase::AllSuccess,
        Some(acks) if acks.iter().all(|&a| a) => NcnCase::AllSuccess,
        Some(acks) if acks.iter().all(|&a| !a) => NcnCase::AllFail,
        Some(_) => NcnCase::PartialFail,
    }
}

/// Rule applied to one packet: new packets start fresh, retransmitted ones
/// follow their user's case.
pub fn packet_case(user_case: NcnCase, retransmitted: bool) -> NcnCase {
    if retransmitted {
        user_case
    } else {
        NcnCase::AllSuccess
    }
}

/// Adds a round's evidence to the buffers of packets that stay pending and
/// clears everything else. A pair buffer survives only while both of its
/// packets stay pending. `pending` is `[user][packet]`.
pub fn update_buffers(buffers: &mut SoftBuffer, evidence: &SoftBuffer, pending: &[Vec<bool>], pairs: &[(usize, usize)]) {
    for (j, flags) in pending.iter().enumerate() {
        for (t, &keep) in flags.iter().enumerate() {
            accumulate(&mut buffers.initial[j][t], &evidence.initial[j][t], keep);
        }
        for (w, &(a, b)) in pairs.iter().enumerate() {
            accumulate(&mut buffers.coded[j][w], &evidence.coded[j][w], flags[a] && flags[b]);
        }
    }
}

fn accumulate(buf: &mut [f64], ev: &[f64], keep: bool) {
    if keep {
        for (f, &i) in buf.iter_mut().zip(ev) {
            *f += i;
        }
    } else {
        buf.fill(0.0);
    }
}

/// Symbol indices of one round, flattened `[codeword][user]`. Direct slots
/// carry the interleaved codeword of their packet, coded slots the XOR of
/// both interleaved codewords. `codewords` is `[user][packet]`, code order.
pub fn map_round(
    cb: &Codebook,
    schedule: &Schedule,
    interleavers: &[Vec<Interleaver>],
    codewords: &[Vec<Vec<u8>>],
) -> Result<Vec<usize>> {
    let cfg = &schedule.config;
    let (users, b, len) = (cb.users(), cb.bits_per_symbol(), cfg.codewords_per_packet);
    if codewords.len() != users || codewords.iter().any(|c| c.len() != cfg.packets) {
        return Err(Error::Dimension(format!("expected {users} x {} codewords", cfg.packets)));
    }
    let interleaved: Vec<Vec<Vec<u8>>> = codewords
        .iter()
        .zip(interleavers)
        .map(|(cws, pis)| {
            cws.iter()
                .zip(pis)
                .map(|(c, pi)| {
                    if c.len() != len * b || pi.len() != c.len() {
                        return Err(Error::LengthMismatch {
                            expected: len * b,
                            got: c.len(),
                        });
                    }
                    Ok(pi.interleaved(c))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut symbols = vec![0usize; schedule.codewords() * users];
    let mut bits = vec![0u8; b];
    for slot in &schedule.slots {
        for pos in 0..len {
            let l = slot.offset + pos;
            for j in 0..users {
                let range = pos * b..(pos + 1) * b;
                match slot.kind {
                    SlotKind::Initial { packet, .. } => bits.copy_from_slice(&interleaved[j][packet][range]),
                    SlotKind::Coded { pair, .. } => {
                        let (ta, tb) = cfg.pairs[pair];
                        for (i, x) in bits.iter_mut().enumerate() {
                            *x = interleaved[j][ta][range.start + i] ^ interleaved[j][tb][range.start + i];
                        }
                    }
                }
                symbols[l * users + j] = bits_to_index(&bits);
            }
        }
    }
    Ok(symbols)
}

/// Fixed ingredients shared by every group of an experiment point.
#[derive(Debug, Clone, Copy)]
pub struct GroupSetup<'a> {
    pub codebook: &'a Codebook,
    pub code: &'a LdpcCode,
    pub schedule: &'a Schedule,
    pub interleavers: &'a [Vec<Interleaver>],
    pub fading: Fading,
    pub n0: f64,
    /// Maximum number of retransmission rounds `N_re`.
    pub max_retx: usize,
}

/// Independent random streams of one group.
#[derive(Debug, Clone)]
pub struct GroupStreams {
    pub payload: ChaCha8Rng,
    pub fading: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketOutcome {
    pub user: usize,
    pub packet: usize,
    pub success: bool,
    /// Rounds in which the packet was transmitted.
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupReport {
    /// One entry per original packet, `user`-major.
    pub outcomes: Vec<PacketOutcome>,
    pub rounds: usize,
    /// TTIs spent, `rounds · N_R`.
    pub ttis: usize,
    /// Detector iterations summed over rounds.
    pub iterations: usize,
    /// Per-round syndrome traces.
    pub traces: Vec<Vec<usize>>,
}

impl GroupReport {
    pub fn correct(&self) -> usize {
        self.outcomes.iter().filter(|o| o.success).count()
    }
}

#[derive(Debug, Clone)]
struct InFlight {
    codeword: Vec<u8>,
    original: bool,
    rounds: usize,
}

fn fresh_packet(code: &LdpcCode, rng: &mut ChaCha8Rng, original: bool) -> Result<InFlight> {
    let info: Vec<u8> = (0..code.info_len()).map(|_| rng.random::<bool>() as u8).collect();
    Ok(InFlight {
        codeword: code.encode(&info)?,
        original,
        rounds: 0,
    })
}

/// Runs one HARQ group to completion and scores its original packets.
pub fn run_group<D: RoundDetector + ?Sized>(
    setup: &GroupSetup<'_>,
    detector: &mut D,
    streams: &mut GroupStreams,
) -> Result<GroupReport> {
    let cb = setup.codebook;
    let cfg = &setup.schedule.config;
    let (users, packets) = (cb.users(), cfg.packets);
    let mut flight: Vec<Vec<InFlight>> = (0..users)
        .map(|_| (0..packets).map(|_| fresh_packet(setup.code, &mut streams.payload, true)).collect())
        .collect::<Result<_>>()?;
    let mut buffers = SoftBuffer::zeros(users, packets, cfg.pair_count(), setup.code.len());
    let mut previous: Option<Vec<Vec<bool>>> = None;
    let mut outcomes = Vec::with_capacity(users * packets);
    let mut report = GroupReport {
        outcomes: Vec::new(),
        rounds: 0,
        ttis: 0,
        iterations: 0,
        traces: Vec::new(),
    };
    let dims = ChannelDims {
        codewords: setup.schedule.codewords(),
        codewords_per_tti: cfg.codewords_per_packet,
        users,
        resources: cb.resources(),
    };
    while flight.iter().flatten().any(|p| p.original) {
        let cases: Vec<Vec<NcnCase>> = (0..users)
            .map(|j| {
                let user_case = classify_case(previous.as_ref().map(|p| p[j].as_slice()));
                flight[j].iter().map(|p| packet_case(user_case, p.rounds > 0)).collect()
            })
            .collect();
        let codewords: Vec<Vec<Vec<u8>>> = flight
            .iter()
            .map(|row| row.iter().map(|p| p.codeword.clone()).collect())
            .collect();
        let symbols = map_round(cb, setup.schedule, setup.interleavers, &codewords)?;
        let channel = sample_channel(cb, dims, setup.fading, setup.n0, &mut streams.fading);
        let tx = crate::channel::modulate(cb, &symbols);
        let received = transmit(&tx, &channel, &mut streams.noise)?;
        let result: RoundResult = detector.detect_round(&RoundInput {
            codebook: cb,
            code: setup.code,
            schedule: setup.schedule,
            interleavers: setup.interleavers,
            received: &received,
            channel: &channel,
            buffers: &buffers,
            cases: &cases,
        })?;
        report.rounds += 1;
        report.ttis += cfg.total_slots;
        report.iterations += result.iterations;
        report.traces.push(result.trace.clone());

        let mut pending = vec![vec![false; packets]; users];
        for j in 0..users {
            for t in 0..packets {
                let p = &mut flight[j][t];
                p.rounds += 1;
                let ack = result.syndrome_ok[j][t];
                let exhausted = p.rounds > setup.max_retx;
                if !ack && !exhausted {
                    pending[j][t] = true;
                    continue;
                }
                if p.original {
                    outcomes.push(PacketOutcome {
                        user: j,
                        packet: t,
                        success: ack && result.decoded[j][t] == p.codeword,
                        rounds: p.rounds,
                    });
                }
                *p = fresh_packet(setup.code, &mut streams.payload, false)?;
            }
        }
        update_buffers(&mut buffers, &result.evidence, &pending, &cfg.pairs);
        previous = Some(result.syndrome_ok);
    }
    outcomes.sort_by_key(|o| (o.user, o.packet));
    report.outcomes = outcomes;
    Ok(report)
}
