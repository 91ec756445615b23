//! Joint SCMA / network-coding / LDPC iterative receiver.
//!
//! One round of a HARQ group is detected on a composite factor graph:
//! SCMA function and variable nodes per codeword position, an NC check node
//! per user and packet, and one LDPC instance per user and packet. Each
//! outer iteration runs, in order:
//!
//! 1. function-node updates at every codeword position,
//! 2. a parity-check pass in every LDPC instance,
//! 3. accumulation of SCMA bit evidence over the repetitions of each packet
//!    and each XOR pair,
//! 4. NC check node combining,
//! 5. the LVN decision and syndrome check,
//! 6. the LVN update with the NCN message as prior,
//! 7. LDPC totals fed back (interleaved) as SVN priors,
//! 8. SVN updates; coded slots use the soft XOR of both packets' priors.
//!
//! Bit evidence and NCN messages live in the interleaved domain; LDPC
//! messages in code order.

mod mpa;
mod ncn;

pub use mpa::{FnMode, ScmaGraph, SlotMpa};
pub use ncn::{ncn_update, Branch, NcnCase};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, ReceivedBlock};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::interleave::Interleaver;
use crate::ldpc::LdpcCode;
use crate::llr::{clip, hard_bit, prob_zero, LLR_MAX};
use crate::schedule::{soft_xor, Schedule, SlotKind};

/// How the SCMA bit evidence handed to the NC check node is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceMode {
    /// Marginal of the product of all incoming function-node messages.
    #[default]
    FullProduct,
    /// As above, with the other bits of each symbol weighted by their SVN
    /// priors.
    Extrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub max_iter: usize,
    /// Magnitude bound applied to NCN outputs and LDPC feedback.
    pub llr_clip: f64,
    /// Weight of the new SVN message; 1 disables damping.
    pub damping: f64,
    /// Stop as soon as every packet's syndrome is satisfied.
    pub early_stop: bool,
    pub fn_mode: FnMode,
    pub evidence: EvidenceMode,
    /// Add the partner packet's LDPC feedback to its evidence in the XOR
    /// branch of the NC check node. When off, that branch sees SCMA
    /// evidence only.
    pub partner_feedback: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            max_iter: 50,
            llr_clip: LLR_MAX,
            damping: 1.0,
            early_stop: true,
            fn_mode: FnMode::SumProduct,
            evidence: EvidenceMode::FullProduct,
            partner_feedback: true,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("detector max_iter must be at least 1".into()));
        }
        if !(self.llr_clip > 0.0 && self.llr_clip.is_finite()) {
            return Err(Error::Config(format!("llr_clip must be positive and finite, got {}", self.llr_clip)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

/// Per-bit LLRs for every packet and XOR pair of every user, interleaved
/// domain. Used both for a round's SCMA evidence and for HARQ soft buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBuffer {
    /// `[user][packet][η]`.
    pub initial: Vec<Vec<Vec<f64>>>,
    /// `[user][pair][η]`.
    pub coded: Vec<Vec<Vec<f64>>>,
}

impl SoftBuffer {
    pub fn zeros(users: usize, packets: usize, pairs: usize, bits: usize) -> Self {
        SoftBuffer {
            initial: vec![vec![vec![0.0; bits]; packets]; users],
            coded: vec![vec![vec![0.0; bits]; pairs]; users],
        }
    }

    pub fn users(&self) -> usize {
        self.initial.len()
    }

    pub fn packets(&self) -> usize {
        self.initial.first().map_or(0, Vec::len)
    }

    pub fn pairs(&self) -> usize {
        self.coded.first().map_or(0, Vec::len)
    }

    pub fn bits(&self) -> usize {
        self.initial.first().and_then(|p| p.first()).map_or(0, Vec::len)
    }

    pub fn is_zero(&self) -> bool {
        self.initial
            .iter()
            .chain(&self.coded)
            .flatten()
            .flatten()
            .all(|&x| x == 0.0)
    }
}

/// Everything one round of detection needs.
#[derive(Debug, Clone, Copy)]
pub struct RoundInput<'a> {
    pub codebook: &'a Codebook,
    pub code: &'a LdpcCode,
    pub schedule: &'a Schedule,
    /// `[user][packet]`.
    pub interleavers: &'a [Vec<Interleaver>],
    pub received: &'a ReceivedBlock,
    pub channel: &'a ChannelRealization,
    pub buffers: &'a SoftBuffer,
    /// Combining rule per `[user][packet]`.
    pub cases: &'a [Vec<NcnCase>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    /// Hard-decided codewords, code order, `[user][packet]`.
    pub decoded: Vec<Vec<Vec<u8>>>,
    pub syndrome_ok: Vec<Vec<bool>>,
    /// Final LVN LLRs, code order, `[user][packet]`.
    pub posteriors: Vec<Vec<Vec<f64>>>,
    /// SCMA bit evidence of the last iteration, for HARQ buffering.
    pub evidence: SoftBuffer,
    pub iterations: usize,
    /// Unsatisfied syndromes after each iteration.
    pub trace: Vec<usize>,
}

impl RoundResult {
    pub fn all_ok(&self) -> bool {
        self.syndrome_ok.iter().flatten().all(|&ok| ok)
    }
}

/// Anything that can detect one HARQ round.
pub trait RoundDetector {
    fn detect_round(&mut self, input: &RoundInput<'_>) -> Result<RoundResult>;
}

/// The message-passing receiver.
#[derive(Debug, Clone)]
pub struct JointDetector {
    cfg: DetectorConfig,
}

impl JointDetector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(JointDetector { cfg })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }
}

impl RoundDetector for JointDetector {
    fn detect_round(&mut self, input: &RoundInput<'_>) -> Result<RoundResult> {
        check_dims(input)?;
        Round::new(input, &self.cfg).run()
    }
}

fn check_dims(input: &RoundInput<'_>) -> Result<()> {
    let cfg = &input.schedule.config;
    let cb = input.codebook;
    let users = cb.users();
    let bits = cfg.codewords_per_packet * cb.bits_per_symbol();
    let dim = |what: String| Err(Error::Dimension(what));
    if input.code.len() != bits || cfg.coded_bits != bits {
        return dim(format!(
            "code length {} vs {} codewords x {} bits per symbol",
            input.code.len(),
            cfg.codewords_per_packet,
            cb.bits_per_symbol()
        ));
    }
    if input.received.codewords() != input.schedule.codewords() || input.received.resources != cb.resources() {
        return dim(format!(
            "received block has {} codewords on {} resources, schedule needs {} on {}",
            input.received.codewords(),
            input.received.resources,
            input.schedule.codewords(),
            cb.resources()
        ));
    }
    let d = &input.channel.dims;
    if d.codewords != input.schedule.codewords() || d.users != users || d.resources != cb.resources() {
        return dim(format!("channel realisation {d:?} does not match the round"));
    }
    if input.interleavers.len() != users
        || input
            .interleavers
            .iter()
            .any(|row| row.len() != cfg.packets || row.iter().any(|p| p.len() != bits))
    {
        return dim(format!("expected {users} x {} interleavers of length {bits}", cfg.packets));
    }
    let b = input.buffers;
    if b.users() != users || b.packets() != cfg.packets || b.pairs() != cfg.pair_count() || b.bits() != bits {
        return dim("soft buffer shape does not match the round".into());
    }
    if input.cases.len() != users || input.cases.iter().any(|c| c.len() != cfg.packets) {
        return dim(format!("expected {users} x {} NCN cases", cfg.packets));
    }
    Ok(())
}

/// Message state of one round.
struct Round<'a> {
    input: &'a RoundInput<'a>,
    cfg: &'a DetectorConfig,
    graph: ScmaGraph,
    users: usize,
    packets: usize,
    order: usize,
    bits_per_symbol: usize,
    /// Codewords per packet.
    len: usize,
    /// Coded bits per packet.
    n: usize,
    ldpc_edges: usize,
    /// Slots with the target of their evidence, ordered by offset.
    slots: Vec<SlotKind>,
    offsets: Vec<usize>,
    lik: Vec<f64>,
    i_msg: Vec<f64>,
    g_msg: Vec<f64>,
    /// PN→LVN, `[instance][edge]`, instance `j * T + t`.
    q: Vec<f64>,
    /// LVN→PN.
    s: Vec<f64>,
    /// Σ Q per variable, `[instance][n]`.
    q_tot: Vec<f64>,
    /// NCN→LVN, interleaved, `[instance][η]`.
    lam_lvn: Vec<f64>,
    /// NCN→SVN bit priors, interleaved, `[instance][η]`.
    lam_svn: Vec<f64>,
    evidence: SoftBuffer,
}

impl<'a> Round<'a> {
    fn new(input: &'a RoundInput<'a>, cfg: &'a DetectorConfig) -> Self {
        let cb = input.codebook;
        let graph = ScmaGraph::new(cb);
        let sc = &input.schedule.config;
        let (users, packets) = (cb.users(), sc.packets);
        let n = input.code.len();
        let positions = input.schedule.codewords();
        let order = cb.order();
        let mut lik = vec![0.0; positions * graph.likelihood_len()];
        let stride = graph.likelihood_len();
        for l in 0..positions {
            graph.likelihoods(
                cb,
                |r| input.received.sample(l, r),
                |j, r| input.channel.coeff(l, j, r),
                input.channel.n0,
                &mut lik[l * stride..(l + 1) * stride],
            );
        }
        let msgs = positions * graph.edge_count() * order;
        let instances = users * packets;
        let ldpc_edges = input.code.edges();
        let (slots, offsets) = input
            .schedule
            .slots_by_offset()
            .into_iter()
            .map(|s| (s.kind, s.offset))
            .unzip();
        Round {
            input,
            cfg,
            users,
            packets,
            order,
            bits_per_symbol: cb.bits_per_symbol(),
            len: sc.codewords_per_packet,
            n,
            ldpc_edges,
            slots,
            offsets,
            lik,
            i_msg: vec![1.0 / order as f64; msgs],
            g_msg: vec![1.0 / order as f64; msgs],
            q: vec![0.0; instances * ldpc_edges],
            s: vec![0.0; instances * ldpc_edges],
            q_tot: vec![0.0; instances * n],
            lam_lvn: vec![0.0; instances * n],
            lam_svn: vec![0.0; instances * n],
            evidence: SoftBuffer::zeros(users, packets, sc.pair_count(), n),
            graph,
        }
    }

    fn block(&self) -> usize {
        self.graph.edge_count() * self.order
    }

    fn run(mut self) -> Result<RoundResult> {
        let code = self.input.code;
        let instances = self.users * self.packets;
        let mut trace = Vec::new();
        let mut decoded = vec![vec![0u8; self.n]; instances];
        let mut posts = vec![vec![0.0; self.n]; instances];
        let mut ok = vec![false; instances];
        let mut prior = vec![0.0; self.n];
        let mut iterations = 0;
        for it in 1..=self.cfg.max_iter {
            iterations = it;
            self.fn_pass();
            for k in 0..instances {
                let e = k * self.ldpc_edges..(k + 1) * self.ldpc_edges;
                code.check_pass(&self.s[e.clone()], &mut self.q[e]);
            }
            self.accumulate_evidence();
            self.ncn_pass();
            let mut failed = 0;
            for k in 0..instances {
                let (j, t) = (k / self.packets, k % self.packets);
                let pi = &self.input.interleavers[j][t];
                let nr = k * self.n..(k + 1) * self.n;
                code.check_totals(&self.q[k * self.ldpc_edges..(k + 1) * self.ldpc_edges], &mut self.q_tot[nr.clone()]);
                pi.deinterleave(&self.lam_lvn[nr.clone()], &mut prior);
                for (v, p) in posts[k].iter_mut().enumerate() {
                    *p = self.q_tot[nr.start + v] + prior[v];
                }
                for (d, &p) in decoded[k].iter_mut().zip(&posts[k]) {
                    *d = hard_bit(p);
                }
                ok[k] = code.syndrome_ok(&decoded[k]);
                failed += usize::from(!ok[k]);
            }
            trace.push(failed);
            if failed == 0 && self.cfg.early_stop {
                break;
            }
            for k in 0..instances {
                let (j, t) = (k / self.packets, k % self.packets);
                let pi = &self.input.interleavers[j][t];
                let nr = k * self.n..(k + 1) * self.n;
                let er = k * self.ldpc_edges..(k + 1) * self.ldpc_edges;
                pi.deinterleave(&self.lam_lvn[nr.clone()], &mut prior);
                code.variable_pass(&self.q[er.clone()], &prior, &mut self.s[er], &mut self.q_tot[nr.clone()]);
                let clip = self.cfg.llr_clip;
                let tot: Vec<f64> = self.q_tot[nr.clone()].iter().map(|x| x.clamp(-clip, clip)).collect();
                pi.interleave(&tot, &mut self.lam_svn[nr]);
            }
            self.svn_pass();
        }
        Ok(RoundResult {
            decoded: by_user(decoded, self.packets),
            syndrome_ok: by_user(ok, self.packets),
            posteriors: by_user(posts, self.packets),
            evidence: self.evidence,
            iterations,
            trace,
        })
    }

    fn fn_pass(&mut self) {
        let block = self.block();
        let stride = self.graph.likelihood_len();
        let resources = self.input.codebook.resources();
        for l in 0..self.input.schedule.codewords() {
            let lik = &self.lik[l * stride..(l + 1) * stride];
            let g = &self.g_msg[l * block..(l + 1) * block];
            let i = &mut self.i_msg[l * block..(l + 1) * block];
            for r in 0..resources {
                self.graph.fn_update(r, lik, g, i, self.cfg.fn_mode);
            }
        }
    }

    /// Bit-level SVN prior for user `j` at slot-relative position `pos`.
    fn svn_prior_bits(&self, kind: SlotKind, j: usize, pos: usize, out: &mut [f64]) {
        let b = self.bits_per_symbol;
        let base = |t: usize| (j * self.packets + t) * self.n + pos * b;
        match kind {
            SlotKind::Initial { packet, .. } => out.copy_from_slice(&self.lam_svn[base(packet)..base(packet) + b]),
            SlotKind::Coded { pair, .. } => {
                let (ta, tb) = self.input.schedule.config.pairs[pair];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = soft_xor(self.lam_svn[base(ta) + i], self.lam_svn[base(tb) + i]);
                }
            }
        }
    }

    fn accumulate_evidence(&mut self) {
        let cb = self.input.codebook;
        let (order, b, block) = (self.order, self.bits_per_symbol, self.block());
        for row in self.evidence.initial.iter_mut().chain(self.evidence.coded.iter_mut()) {
            for v in row.iter_mut() {
                v.fill(0.0);
            }
        }
        let mut post = vec![0.0; order];
        let mut bits = vec![0.0; b];
        let mut prior = vec![0.0; b];
        for (&kind, &offset) in self.slots.iter().zip(&self.offsets) {
            for pos in 0..self.len {
                let l = offset + pos;
                let i = &self.i_msg[l * block..(l + 1) * block];
                for j in 0..self.users {
                    self.graph.symbol_evidence(j, i, &mut post);
                    match self.cfg.evidence {
                        EvidenceMode::FullProduct => cb.marginalize_into(&post, &mut bits),
                        EvidenceMode::Extrinsic => {
                            self.svn_prior_bits(kind, j, pos, &mut prior);
                            extrinsic_bits(cb, &post, &prior, &mut bits);
                        }
                    }
                    let target = match kind {
                        SlotKind::Initial { packet, .. } => &mut self.evidence.initial[j][packet],
                        SlotKind::Coded { pair, .. } => &mut self.evidence.coded[j][pair],
                    };
                    for (acc, &x) in target[pos * b..(pos + 1) * b].iter_mut().zip(&bits) {
                        *acc += x;
                    }
                }
            }
        }
    }

    fn ncn_pass(&mut self) {
        let sc = &self.input.schedule.config;
        let f = self.input.buffers;
        let e = &self.evidence;
        let clip = self.cfg.llr_clip;
        let feedback = self.cfg.partner_feedback;
        let partners: Vec<Vec<(usize, usize)>> = (0..self.packets).map(|t| sc.pairs_of(t).collect()).collect();
        let mut branches = Vec::with_capacity(sc.packets);
        for j in 0..self.users {
            for (t, pairs) in partners.iter().enumerate() {
                let case = self.input.cases[j][t];
                let out = &mut self.lam_lvn[(j * self.packets + t) * self.n..(j * self.packets + t + 1) * self.n];
                for (eta, o) in out.iter_mut().enumerate() {
                    branches.clear();
                    branches.extend(pairs.iter().map(|&(w, partner)| Branch {
                        i_partner: e.initial[j][partner][eta]
                            + if feedback { self.lam_svn[(j * self.packets + partner) * self.n + eta] } else { 0.0 },
                        f_partner: f.initial[j][partner][eta],
                        i_pair: e.coded[j][w][eta],
                        f_pair: f.coded[j][w][eta],
                    }));
                    let v = ncn_update(case, e.initial[j][t][eta], f.initial[j][t][eta], &branches);
                    *o = v.clamp(-clip, clip);
                }
            }
        }
    }

    fn svn_pass(&mut self) {
        let cb = self.input.codebook;
        let (order, b, block) = (self.order, self.bits_per_symbol, self.block());
        let mut prior_bits = vec![0.0; b];
        let mut prior = vec![0.0; order];
        for idx in 0..self.slots.len() {
            let (kind, offset) = (self.slots[idx], self.offsets[idx]);
            for pos in 0..self.len {
                let l = offset + pos;
                for j in 0..self.users {
                    self.svn_prior_bits(kind, j, pos, &mut prior_bits);
                    cb.inverse_marginalize_into(&prior_bits, &mut prior);
                    let i = &self.i_msg[l * block..(l + 1) * block];
                    let g = &mut self.g_msg[l * block..(l + 1) * block];
                    self.graph.svn_update(j, i, &prior, g, self.cfg.damping);
                }
            }
        }
    }
}

/// Splits an instance-major vector into `[user][packet]`.
fn by_user<T>(flat: Vec<T>, packets: usize) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(flat.len() / packets);
    let mut it = flat.into_iter().peekable();
    while it.peek().is_some() {
        out.push(it.by_ref().take(packets).collect());
    }
    out
}

/// Bit LLRs of a symbol posterior with the other bits of the symbol weighted
/// by their priors.
fn extrinsic_bits(cb: &Codebook, post: &[f64], prior_llrs: &[f64], out: &mut [f64]) {
    let b = cb.bits_per_symbol();
    let p0: Vec<f64> = prior_llrs.iter().map(|&l| prob_zero(l)).collect();
    let mut w = vec![0.0; post.len()];
    for (i, o) in out.iter_mut().enumerate() {
        for (m, x) in w.iter_mut().enumerate() {
            let mut p = post[m];
            for (i2, &q) in p0.iter().enumerate().take(b) {
                if i2 != i {
                    p *= if cb.bit_of(m, i2) == 0 { q } else { 1.0 - q };
                }
            }
            *x = p;
        }
        let (mut s0, mut s1) = (0.0, 0.0);
        for (m, &x) in w.iter().enumerate() {
            if cb.bit_of(m, i) == 0 {
                s0 += x;
            } else {
                s1 += x;
            }
        }
        *o = match (s0 > 0.0, s1 > 0.0) {
            (true, true) => clip((s0 / s1).ln()),
            (true, false) => LLR_MAX,
            (false, true) => -LLR_MAX,
            (false, false) => 0.0,
        };
    }
}

#[cfg(test)]
mod tests;
