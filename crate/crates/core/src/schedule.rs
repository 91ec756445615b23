//! Network-coded K-repetition schemes and their per-TTI transmission plans.
//!
//! A scheme is the triple `(K_eq, T, K_in)`: `T` distinct packets, each sent
//! `K_in` times directly, followed by `K_nc` repetitions of every pairwise XOR
//! of the packets. With `W = C(T, 2)` pairs a group occupies
//! `N_R = T·K_in + W·K_nc` TTIs and
//!
//! ```text
//! K_eq = K_in + 2 (N_R − T·K_in) / T,     K_nc = (K_eq − K_in) / (T − 1).
//! ```
//!
//! `T = 1` is plain K-repetition with `K = K_in = K_eq`.
//!
//! Packet and pair indices are 0-based. Pairs are ordered lexicographically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llr::boxplus_all;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NckConfig {
    pub k_eq: usize,
    /// `T`.
    pub packets: usize,
    /// `K_in`.
    pub initial_reps: usize,
    /// `K_nc`.
    pub coded_reps: usize,
    /// Ξ, each pair `(t_α, t_β)` with `t_α < t_β`.
    pub pairs: Vec<(usize, usize)>,
    /// `N_R`.
    pub total_slots: usize,
    /// `L`, codewords per packet.
    pub codewords_per_packet: usize,
    /// `N`, coded bits per packet.
    pub coded_bits: usize,
}

impl NckConfig {
    /// `W`.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// `N̄_R = N_R / T`.
    pub fn slots_per_packet(&self) -> f64 {
        self.total_slots as f64 / self.packets as f64
    }

    /// Pairs containing packet `t`, with the partner packet.
    pub fn pairs_of(&self, t: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().enumerate().filter_map(move |(w, &(a, b))| {
            if a == t {
                Some((w, b))
            } else if b == t {
                Some((w, a))
            } else {
                None
            }
        })
    }
}

/// `K_eq` recomputed from `(K_in, N_R, T)`, as a reduced fraction.
pub fn equivalent_repetitions(initial_reps: usize, total_slots: usize, packets: usize) -> (i64, i64) {
    let (k, n, t) = (initial_reps as i64, total_slots as i64, packets as i64);
    let num = k * t + 2 * (n - t * k);
    let g = gcd(num.unsigned_abs(), t.unsigned_abs()) as i64;
    (num / g, t / g)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

pub fn derive_config(
    k_eq: usize,
    packets: usize,
    initial_reps: usize,
    coded_bits: usize,
    bits_per_symbol: usize,
) -> Result<NckConfig> {
    let infeasible = |reason: String| Error::InfeasibleScheme {
        k_eq,
        packets,
        initial_reps,
        reason,
    };
    if packets == 0 || initial_reps == 0 {
        return Err(infeasible("T and K_in must be at least 1".into()));
    }
    if k_eq < initial_reps {
        return Err(infeasible("K_eq must be at least K_in".into()));
    }
    if bits_per_symbol == 0 || coded_bits == 0 || !coded_bits.is_multiple_of(bits_per_symbol) {
        return Err(infeasible(format!(
            "N = {coded_bits} must be a positive multiple of b = {bits_per_symbol}"
        )));
    }
    let (coded_reps, pairs) = if packets == 1 {
        if k_eq != initial_reps {
            return Err(infeasible("with T = 1 (K-repetition) K_eq must equal K_in".into()));
        }
        (0, Vec::new())
    } else {
        let diff = k_eq - initial_reps;
        if !diff.is_multiple_of(packets - 1) {
            return Err(infeasible(format!(
                "K_nc = ({k_eq} - {initial_reps}) / {} is not an integer",
                packets - 1
            )));
        }
        let pairs: Vec<(usize, usize)> = (0..packets)
            .flat_map(|a| (a + 1..packets).map(move |b| (a, b)))
            .collect();
        (diff / (packets - 1), pairs)
    };
    let total_slots = packets * initial_reps + pairs.len() * coded_reps;
    // Reported rather than adjusted if it ever fails.
    let (num, den) = equivalent_repetitions(initial_reps, total_slots, packets);
    if den != 1 || num != k_eq as i64 {
        return Err(infeasible(format!(
            "N_R = {total_slots} gives K_eq = {num}/{den}, not {k_eq}"
        )));
    }
    Ok(NckConfig {
        k_eq,
        packets,
        initial_reps,
        coded_reps,
        pairs,
        total_slots,
        codewords_per_packet: coded_bits / bits_per_symbol,
        coded_bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    TypeA,
    TypeB,
    TypeC,
    KScma,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "a" | "typea" => Ok(Layout::TypeA),
            "b" | "typeb" => Ok(Layout::TypeB),
            "c" | "typec" => Ok(Layout::TypeC),
            "k" | "kscma" | "krep" => Ok(Layout::KScma),
            _ => Err(Error::Config(format!("unknown layout {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    Initial { packet: usize, rep: usize },
    Coded { pair: usize, rep: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub kind: SlotKind,
    /// First codeword index of this slot in the round's codeword sequence.
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub config: NckConfig,
    pub layout: Layout,
    /// Slots in transmission order.
    pub slots: Vec<Slot>,
    /// Slot counts after which HARQ feedback is returned within a round. The
    /// end of the round is always a decision point and is not listed.
    pub feedback_points: Vec<usize>,
}

impl Schedule {
    pub fn codewords(&self) -> usize {
        self.config.total_slots * self.config.codewords_per_packet
    }

    /// Slots ordered by codeword offset.
    pub fn slots_by_offset(&self) -> Vec<Slot> {
        let mut s = self.slots.clone();
        s.sort_by_key(|s| s.offset);
        s
    }
}

/// Codeword offset of a slot (`l₁` for direct, `l₂` for coded repetitions).
pub fn slot_offset(cfg: &NckConfig, kind: SlotKind) -> usize {
    let l = cfg.codewords_per_packet;
    match kind {
        SlotKind::Initial { packet, rep } => packet * cfg.initial_reps * l + rep * l,
        SlotKind::Coded { pair, rep } => {
            cfg.packets * l * cfg.initial_reps + pair * cfg.coded_reps * l + rep * l
        }
    }
}

pub fn build_schedule(cfg: &NckConfig, layout: Layout) -> Result<Schedule> {
    let mismatch = |why: &str| Error::Config(format!("layout {layout:?}: {why}"));
    match layout {
        Layout::KScma if cfg.packets != 1 => return Err(mismatch("requires T = 1")),
        Layout::TypeA | Layout::TypeB if cfg.packets < 2 => return Err(mismatch("requires T >= 2")),
        Layout::TypeC if cfg.packets < 3 => return Err(mismatch("requires T >= 3")),
        _ => {}
    }
    // Packet-major initial slots and pair-major coded slots.
    let initial: Vec<SlotKind> = (0..cfg.packets)
        .flat_map(|packet| (0..cfg.initial_reps).map(move |rep| SlotKind::Initial { packet, rep }))
        .collect();
    let coded: Vec<SlotKind> = (0..cfg.pair_count())
        .flat_map(|pair| (0..cfg.coded_reps).map(move |rep| SlotKind::Coded { pair, rep }))
        .collect();
    let (kinds, feedback_points) = match layout {
        Layout::KScma => (initial, Vec::new()),
        Layout::TypeA => {
            let fb = initial.len();
            (initial.into_iter().chain(coded).collect(), vec![fb])
        }
        Layout::TypeC => (initial.into_iter().chain(coded).collect(), Vec::new()),
        Layout::TypeB => {
            // Two RTTs; direct repetitions go repetition-major so each RTT
            // carries a copy of every packet where possible.
            let mut direct: Vec<SlotKind> = (0..cfg.initial_reps)
                .flat_map(|rep| (0..cfg.packets).map(move |packet| SlotKind::Initial { packet, rep }))
                .collect();
            let mut coded = coded;
            let first_direct = direct.len().div_ceil(2);
            let first_coded = coded.len().div_ceil(2);
            let rest_direct = direct.split_off(first_direct);
            let rest_coded = coded.split_off(first_coded);
            let mut kinds = direct;
            kinds.extend(coded);
            let fb = kinds.len();
            kinds.extend(rest_direct);
            kinds.extend(rest_coded);
            (kinds, vec![fb])
        }
    };
    let slots = kinds
        .into_iter()
        .map(|kind| Slot {
            kind,
            offset: slot_offset(cfg, kind),
        })
        .collect();
    Ok(Schedule {
        config: cfg.clone(),
        layout,
        slots,
        feedback_points,
    })
}

pub fn xor_packets(a: &[u8], b: &[u8]) -> Result<Vec<u8>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x ^ y).collect())
}

/// LLR of the XOR of two independent bits: `2 atanh(tanh(L1/2) tanh(L2/2))`.
pub fn soft_xor(l1: f64, l2: f64) -> f64 {
    boxplus_all([l1, l2])
}
