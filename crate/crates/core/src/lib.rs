//! Link-level simulation of LDPC-coded uplink SCMA with network-coded
//! K-repetition HARQ.
//!
//! The crate is organised bottom-up:
//!
//! - [`codebook`]: SCMA codebooks, bit mapping and the symbol/bit conversions.
//! - [`ldpc`]: alist-loaded parity-check codes, encoding and BP primitives.
//! - [`schedule`]: `(K_eq, T, K_in)` schemes, per-TTI slot plans, packet XOR.
//! - [`channel`]: Rayleigh/AWGN channel realisations and superposition.
//! - [`detector`]: the joint SCMA / network-coding / LDPC iterative receiver.
//! - [`harq`]: retransmission control and soft-buffer management.
//! - [`harness`]: Monte Carlo sweeps, metrics and CSV output.
//! - [`oracle`]: brute-force reference computations used for verification.

pub mod channel;
pub mod codebook;
pub mod detector;
pub mod error;
pub mod harness;
pub mod harq;
pub mod interleave;
pub mod ldpc;
pub mod llr;
pub mod oracle;
pub mod schedule;
pub mod seed;

pub use codebook::{load_codebook, Codebook};
pub use error::{Error, Result};
pub use ldpc::{load_alist, LdpcCode};
pub use schedule::{build_schedule, derive_config, Layout, NckConfig, Schedule};
