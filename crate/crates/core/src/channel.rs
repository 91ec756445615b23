//! Uplink channel: per-user fading, superposition on shared resources and
//! complex Gaussian noise.
//!
//! The received sample on resource `r` of codeword position `l` is
//! `Y[l][r] = Σ_{j ∈ ξ_r} h[l][j][r] · X_j[l][r] + n`, with `n ~ CN(0, N0)`.
//! The receiver is assumed to know `h` exactly.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fading {
    /// Independent `CN(0, 1)` per codeword position, user and resource.
    #[default]
    RayleighIid,
    /// Constant over the codewords of one TTI, independent across TTIs.
    BlockPerTti,
    /// `h = 1` everywhere.
    AwgnUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// SNR is energy per transmitted codeword over `N0`.
    #[default]
    EsN0,
    /// SNR is energy per information bit over `N0`.
    EbN0,
}

/// Noise variance for an SNR in dB with unit-energy codewords.
pub fn snr_to_n0(snr_db: f64, convention: SnrConvention, code_rate: f64, bits_per_symbol: usize) -> f64 {
    let es_n0 = 10f64.powf(-snr_db / 10.0);
    match convention {
        SnrConvention::EsN0 => es_n0,
        SnrConvention::EbN0 => es_n0 / (code_rate * bits_per_symbol as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelDims {
    /// Total codeword positions in the round.
    pub codewords: usize,
    /// Codeword positions per TTI (for block fading).
    pub codewords_per_tti: usize,
    pub users: usize,
    pub resources: usize,
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub dims: ChannelDims,
    /// Flattened `[l][j][r]`; zero where the user does not occupy `r`.
    pub h: Vec<Complex64>,
    pub n0: f64,
}

impl ChannelRealization {
    #[inline]
    pub fn coeff(&self, l: usize, j: usize, r: usize) -> Complex64 {
        let d = &self.dims;
        self.h[(l * d.users + j) * d.resources + r]
    }
}

#[derive(Debug, Clone)]
pub struct ReceivedBlock {
    pub resources: usize,
    /// Flattened `[l][r]`.
    pub y: Vec<Complex64>,
}

impl ReceivedBlock {
    pub fn codewords(&self) -> usize {
        self.y.len() / self.resources
    }

    #[inline]
    pub fn sample(&self, l: usize, r: usize) -> Complex64 {
        self.y[l * self.resources + r]
    }
}

fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_channel<R: Rng + ?Sized>(
    cb: &Codebook,
    dims: ChannelDims,
    fading: Fading,
    n0: f64,
    rng: &mut R,
) -> ChannelRealization {
    let (users, resources) = (dims.users, dims.resources);
    let sig = cb.signature();
    let per_l = users * resources;
    let mut h = vec![Complex64::new(0.0, 0.0); dims.codewords * per_l];
    match fading {
        Fading::AwgnUnit => {
            for l in 0..dims.codewords {
                for j in 0..users {
                    for r in 0..resources {
                        if sig[r][j] {
                            h[l * per_l + j * resources + r] = Complex64::new(1.0, 0.0);
                        }
                    }
                }
            }
        }
        Fading::RayleighIid => {
            for l in 0..dims.codewords {
                for j in 0..users {
                    for r in 0..resources {
                        if sig[r][j] {
                            h[l * per_l + j * resources + r] = cn01(rng);
                        }
                    }
                }
            }
        }
        Fading::BlockPerTti => {
            let per_tti = dims.codewords_per_tti.max(1);
            let ttis = dims.codewords.div_ceil(per_tti);
            for tti in 0..ttis {
                let mut block = vec![Complex64::new(0.0, 0.0); per_l];
                for j in 0..users {
                    for r in 0..resources {
                        if sig[r][j] {
                            block[j * resources + r] = cn01(rng);
                        }
                    }
                }
                let end = ((tti + 1) * per_tti).min(dims.codewords);
                for l in tti * per_tti..end {
                    h[l * per_l..(l + 1) * per_l].copy_from_slice(&block);
                }
            }
        }
    }
    ChannelRealization { dims, h, n0 }
}

/// Superimposes per-user codewords (`tx` flattened `[l][j][r]`) through the
/// channel and adds noise.
pub fn transmit<R: Rng + ?Sized>(tx: &[Complex64], ch: &ChannelRealization, rng: &mut R) -> Result<ReceivedBlock> {
    let d = &ch.dims;
    if tx.len() != d.codewords * d.users * d.resources {
        return Err(Error::Dimension(format!(
            "transmit: {} samples for {} codewords x {} users x {} resources",
            tx.len(),
            d.codewords,
            d.users,
            d.resources
        )));
    }
    let sigma = ch.n0.sqrt();
    let mut y = Vec::with_capacity(d.codewords * d.resources);
    for l in 0..d.codewords {
        for r in 0..d.resources {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..d.users {
                let idx = (l * d.users + j) * d.resources + r;
                acc += ch.h[idx] * tx[idx];
            }
            if sigma > 0.0 {
                acc += cn01(rng) * sigma;
            }
            y.push(acc);
        }
    }
    Ok(ReceivedBlock {
        resources: d.resources,
        y,
    })
}

/// Builds the `[l][j][r]` transmit array from per-position symbol indices
/// (`symbols` flattened `[l][j]`).
pub fn modulate(cb: &Codebook, symbols: &[usize]) -> Vec<Complex64> {
    let mut tx = Vec::with_capacity(symbols.len() * cb.resources());
    for (idx, &m) in symbols.iter().enumerate() {
        let j = idx % cb.users();
        tx.extend_from_slice(cb.codeword(j, m));
    }
    tx
}
