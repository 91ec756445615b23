//! SCMA codebooks and the symbol/bit domain conversions.
//!
//! A codebook holds, for each of `J` users, `M = 2^b` complex codewords of
//! length `R`. The binary signature matrix (`R x J`) fixes which resources
//! each user occupies and is the topology of the detection factor graph.
//!
//! Bit labels are big-endian: bit 0 of a symbol is its most significant bit,
//! so `bits = (1, 0)` selects codeword 2.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{CodebookViolation, Error, Result};
use crate::llr::{clip, prob_zero, LLR_MAX};

const ENERGY_TOL: f64 = 1e-6;
/// Largest resource degree the detector tables support.
pub const MAX_USERS_PER_RESOURCE: usize = 8;
const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Codebook {
    users: usize,
    resources: usize,
    order: usize,
    bits: usize,
    /// Flattened `[user][symbol][resource]`.
    codewords: Vec<Complex64>,
    /// `[resource][user]`.
    signature: Vec<Vec<bool>>,
    users_on: Vec<Vec<usize>>,
    resources_of: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct CodebookFile {
    #[serde(rename = "J")]
    users: usize,
    #[serde(rename = "R")]
    resources: usize,
    #[serde(rename = "M")]
    order: usize,
    signature: Vec<Vec<u8>>,
    codewords: Vec<Vec<Vec<[f64; 2]>>>,
}

impl Codebook {
    /// Builds a codebook from a `[resource][user]` signature and
    /// `[user][symbol][resource]` codewords.
    ///
    /// Checks shape, `M = 2^b`, sparsity against the signature and unit
    /// average energy. Regularity and overloading are file-level
    /// requirements checked by [`load_codebook`], so small test topologies
    /// can be built here.
    pub fn new(signature: Vec<Vec<bool>>, codewords: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let resources = signature.len();
        let users = codewords.len();
        let order = codewords.first().map_or(0, Vec::len);
        let shape_err = |location: String| Error::Codebook {
            location,
            kind: CodebookViolation::Shape,
        };
        if resources == 0 || users == 0 || order == 0 {
            return Err(shape_err("dimensions".into()));
        }
        if !(2..=16).contains(&order) || !order.is_power_of_two() {
            return Err(Error::Codebook {
                location: format!("M = {order}"),
                kind: CodebookViolation::Order,
            });
        }
        for (r, row) in signature.iter().enumerate() {
            if row.len() != users {
                return Err(shape_err(format!("signature[{r}]")));
            }
        }
        let mut flat = Vec::with_capacity(users * order * resources);
        for (j, user) in codewords.iter().enumerate() {
            if user.len() != order {
                return Err(shape_err(format!("codewords[{j}]")));
            }
            for (m, cw) in user.iter().enumerate() {
                if cw.len() != resources {
                    return Err(shape_err(format!("codewords[{j}][{m}]")));
                }
                for (r, x) in cw.iter().enumerate() {
                    if signature[r][j] == (x.norm() <= ZERO_TOL) {
                        return Err(Error::Codebook {
                            location: format!("codewords[{j}][{m}][{r}]"),
                            kind: CodebookViolation::Sparsity,
                        });
                    }
                }
                flat.extend_from_slice(cw);
            }
            let energy: f64 = user
                .iter()
                .map(|cw| cw.iter().map(Complex64::norm_sqr).sum::<f64>())
                .sum::<f64>()
                / order as f64;
            if (energy - 1.0).abs() > ENERGY_TOL {
                return Err(Error::Codebook {
                    location: format!("codewords[{j}] (energy {energy:.9})"),
                    kind: CodebookViolation::Energy,
                });
            }
        }
        let users_on: Vec<Vec<usize>> = (0..resources)
            .map(|r| (0..users).filter(|&j| signature[r][j]).collect())
            .collect();
        if let Some(r) = users_on.iter().position(|u| u.len() > MAX_USERS_PER_RESOURCE) {
            return Err(shape_err(format!("signature[{r}] has more than {MAX_USERS_PER_RESOURCE} users")));
        }
        let resources_of = (0..users)
            .map(|j| (0..resources).filter(|&r| signature[r][j]).collect())
            .collect();
        Ok(Codebook {
            users,
            resources,
            order,
            bits: order.trailing_zeros() as usize,
            codewords: flat,
            signature,
            users_on,
            resources_of,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    /// Codebook size `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn signature(&self) -> &[Vec<bool>] {
        &self.signature
    }

    /// Users sharing resource `r`.
    pub fn users_on(&self, r: usize) -> &[usize] {
        &self.users_on[r]
    }

    /// Resources occupied by user `j`.
    pub fn resources_of(&self, j: usize) -> &[usize] {
        &self.resources_of[j]
    }

    pub fn codeword(&self, j: usize, m: usize) -> &[Complex64] {
        let start = (j * self.order + m) * self.resources;
        &self.codewords[start..start + self.resources]
    }

    #[inline]
    pub fn entry(&self, j: usize, m: usize, r: usize) -> Complex64 {
        self.codewords[(j * self.order + m) * self.resources + r]
    }

    /// Column weight `d_v`, if every user occupies the same number of resources.
    pub fn user_degree(&self) -> Option<usize> {
        uniform(self.resources_of.iter().map(Vec::len))
    }

    /// Row weight `d_f`, if every resource carries the same number of users.
    pub fn resource_degree(&self) -> Option<usize> {
        uniform(self.users_on.iter().map(Vec::len))
    }

    /// Maps `b` bits (big-endian) to user `j`'s codeword.
    pub fn map_bits(&self, j: usize, bits: &[u8]) -> &[Complex64] {
        debug_assert_eq!(bits.len(), self.bits);
        self.codeword(j, bits_to_index(bits))
    }

    /// Bit `i` (0 = most significant) of symbol index `m`.
    #[inline]
    pub fn bit_of(&self, m: usize, i: usize) -> u8 {
        ((m >> (self.bits - 1 - i)) & 1) as u8
    }

    /// The ℳ operator: symbol probabilities to per-bit LLRs.
    pub fn marginalize(&self, symbol_probs: &[f64]) -> Result<Vec<f64>> {
        if symbol_probs.len() != self.order {
            return Err(Error::LengthMismatch {
                expected: self.order,
                got: symbol_probs.len(),
            });
        }
        if !symbol_probs.iter().any(|&p| p > 0.0) {
            return Err(Error::Invalid("marginalize: all-zero symbol vector".into()));
        }
        let mut out = vec![0.0; self.bits];
        self.marginalize_into(symbol_probs, &mut out);
        Ok(out)
    }

    /// Unchecked ℳ for hot loops; a zero vector yields zero LLRs.
    pub(crate) fn marginalize_into(&self, probs: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let shift = self.bits - 1 - i;
            let (mut p0, mut p1) = (0.0, 0.0);
            for (m, &p) in probs.iter().enumerate() {
                if (m >> shift) & 1 == 0 {
                    p0 += p;
                } else {
                    p1 += p;
                }
            }
            *o = ratio_llr(p0, p1);
        }
    }

    /// The ℳ⁻¹ operator: per-bit LLRs to a normalised product-form symbol
    /// distribution.
    pub fn inverse_marginalize(&self, llrs: &[f64]) -> Result<Vec<f64>> {
        if llrs.len() != self.bits {
            return Err(Error::LengthMismatch {
                expected: self.bits,
                got: llrs.len(),
            });
        }
        let mut out = vec![0.0; self.order];
        self.inverse_marginalize_into(llrs, &mut out);
        Ok(out)
    }

    pub(crate) fn inverse_marginalize_into(&self, llrs: &[f64], out: &mut [f64]) {
        // Both bit probabilities come from the sigmoid directly; `1 - P(0)`
        // would lose the small one to cancellation.
        let mut p = [[0.0f64; 2]; 16];
        for (i, &l) in llrs.iter().enumerate() {
            let l = clip(l);
            p[i] = [prob_zero(l), prob_zero(-l)];
        }
        let mut total = 0.0;
        for (m, o) in out.iter_mut().enumerate() {
            let mut q = 1.0;
            for (i, pi) in p.iter().enumerate().take(self.bits) {
                q *= pi[(m >> (self.bits - 1 - i)) & 1];
            }
            *o = q;
            total += q;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }
}

fn uniform(mut it: impl Iterator<Item = usize>) -> Option<usize> {
    let first = it.next()?;
    it.all(|d| d == first).then_some(first)
}

/// Big-endian bit vector to symbol index.
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

#[inline]
fn ratio_llr(p0: f64, p1: f64) -> f64 {
    match (p0 > 0.0, p1 > 0.0) {
        (true, true) => clip((p0 / p1).ln()),
        (true, false) => LLR_MAX,
        (false, true) => -LLR_MAX,
        (false, false) => 0.0,
    }
}

/// Loads a codebook from its JSON description and enforces every file-level
/// invariant, including regularity and `J > R`.
pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_codebook(&text).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
        Error::Codebook { location, kind } => {
            let line = locate_path(&text, &location);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("{location}: {kind}"),
            }
        }
        other => other,
    })
}

/// Parses codebook JSON text. Errors carry structural locations; the file
/// loader turns them into line numbers.
pub fn parse_codebook(text: &str) -> Result<Codebook> {
    let file: CodebookFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: Default::default(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if file.signature.len() != file.resources {
        return Err(Error::Codebook {
            location: "signature".into(),
            kind: CodebookViolation::Shape,
        });
    }
    if file.codewords.len() != file.users {
        return Err(Error::Codebook {
            location: "codewords".into(),
            kind: CodebookViolation::Shape,
        });
    }
    if file.codewords.iter().any(|u| u.len() != file.order) {
        return Err(Error::Codebook {
            location: "codewords".into(),
            kind: CodebookViolation::Shape,
        });
    }
    let mut signature = Vec::with_capacity(file.resources);
    for (r, row) in file.signature.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (j, &v) in row.iter().enumerate() {
            match v {
                0 => out.push(false),
                1 => out.push(true),
                _ => {
                    return Err(Error::Codebook {
                        location: format!("signature[{r}][{j}]"),
                        kind: CodebookViolation::Shape,
                    })
                }
            }
        }
        signature.push(out);
    }
    let codewords = file
        .codewords
        .iter()
        .map(|u| {
            u.iter()
                .map(|cw| cw.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                .collect()
        })
        .collect();
    let cb = Codebook::new(signature, codewords)?;
    if cb.user_degree().is_none() || cb.resource_degree().is_none() {
        return Err(Error::Codebook {
            location: "signature".into(),
            kind: CodebookViolation::Irregular,
        });
    }
    if cb.users <= cb.resources {
        return Err(Error::Codebook {
            location: format!("J = {}, R = {}", cb.users, cb.resources),
            kind: CodebookViolation::NotOverloaded,
        });
    }
    Ok(cb)
}

/// Finds the 1-based line of a location like `codewords[2][1][3]` or
/// `signature` in JSON text. Falls back to line 1.
fn locate_path(text: &str, location: &str) -> usize {
    let key_end = location
        .find(['[', ' '])
        .unwrap_or(location.len());
    let key = &location[..key_end];
    let indices: Vec<usize> = location[key_end..]
        .split(['[', ']'])
        .filter_map(|s| s.parse().ok())
        .collect();
    let Some(start) = text.find(&format!("\"{key}\"")) else {
        return 1;
    };
    let bytes = text.as_bytes();
    let Some(open) = text[start..].find('[').map(|o| start + o) else {
        return line_of(text, start);
    };
    // Walk into nested arrays, counting elements at each depth.
    let mut pos = open;
    for &target in &indices {
        let mut depth = 0usize;
        let mut count = 0usize;
        let mut found = None;
        let mut i = pos + 1;
        while i < bytes.len() {
            match bytes[i] {
                b'[' | b'{' => {
                    if depth == 0 && count == target && found.is_none() {
                        found = Some(i);
                        break;
                    }
                    depth += 1;
                }
                b']' | b'}' => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                b',' if depth == 0 => count += 1,
                c if depth == 0 && count == target && !c.is_ascii_whitespace() => {
                    found = Some(i);
                    break;
                }
                _ => {}
            }
            i += 1;
        }
        match found {
            Some(p) => pos = p,
            None => break,
        }
    }
    line_of(text, pos)
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}
