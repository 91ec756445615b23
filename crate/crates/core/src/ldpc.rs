//! Binary LDPC codes loaded from alist files.
//!
//! Besides the parity-check structure, a code carries a systematic encoder
//! derived from `H` by Gaussian elimination over GF(2). The information bits
//! occupy the non-pivot columns, so encoder output is in `H`'s column order.
//!
//! Edges are numbered check-major: the edges of check `c` are
//! `check_start[c]..check_start[c + 1]`. Message buffers used by decoders are
//! indexed by edge.

use std::path::Path;

use crate::error::{Error, Result};
use crate::llr::{boxplus_all, clip, from_tanh_product, hard_bit, tanh_half, LLR_MAX};

#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    checks: usize,
    row_adj: Vec<Vec<usize>>,
    col_adj: Vec<Vec<usize>>,
    check_start: Vec<usize>,
    edge_var: Vec<usize>,
    /// Edge ids incident to each variable, ordered as `col_adj`.
    var_edges: Vec<Vec<usize>>,
    encoder: Encoder,
}

#[derive(Debug, Clone)]
struct Encoder {
    words: usize,
    /// Reduced rows of `H`, one per pivot, as bitsets over the columns.
    rows: Vec<Vec<u64>>,
    pivots: Vec<usize>,
    info_positions: Vec<usize>,
}

impl LdpcCode {
    /// Builds a code from the variable lists of each check.
    pub fn from_checks(n: usize, row_adj: Vec<Vec<usize>>) -> Result<Self> {
        let checks = row_adj.len();
        let mut col_adj = vec![Vec::new(); n];
        for (c, row) in row_adj.iter().enumerate() {
            for &v in row {
                if v >= n {
                    return Err(Error::Ldpc(format!("check {c} references bit {v} >= N = {n}")));
                }
                if col_adj[v].contains(&c) {
                    return Err(Error::Ldpc(format!("duplicate entry ({c}, {v})")));
                }
                col_adj[v].push(c);
            }
        }
        let mut check_start = Vec::with_capacity(checks + 1);
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); n];
        check_start.push(0);
        for row in &row_adj {
            for &v in row {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            check_start.push(edge_var.len());
        }
        let encoder = Encoder::new(n, &row_adj);
        if encoder.pivots.len() < checks {
            log::warn!(
                "parity-check matrix has rank {} < {} checks; information length is {}",
                encoder.pivots.len(),
                checks,
                n - encoder.pivots.len()
            );
        }
        Ok(LdpcCode {
            n,
            checks,
            row_adj,
            col_adj,
            check_start,
            edge_var,
            var_edges,
            encoder,
        })
    }

    /// Codeword length `N`.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of parity checks `C`.
    pub fn checks(&self) -> usize {
        self.checks
    }

    pub fn rank(&self) -> usize {
        self.encoder.pivots.len()
    }

    pub fn info_len(&self) -> usize {
        self.n - self.rank()
    }

    pub fn rate(&self) -> f64 {
        self.info_len() as f64 / self.n as f64
    }

    /// Columns carrying the information bits, in order.
    pub fn info_positions(&self) -> &[usize] {
        &self.encoder.info_positions
    }

    /// Variables of check `c` (φ_c).
    pub fn check_vars(&self, c: usize) -> &[usize] {
        &self.row_adj[c]
    }

    /// Checks of variable `v` (ψ_v).
    pub fn var_checks(&self, v: usize) -> &[usize] {
        &self.col_adj[v]
    }

    pub fn edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.info_len() {
            return Err(Error::LengthMismatch {
                expected: self.info_len(),
                got: info.len(),
            });
        }
        let enc = &self.encoder;
        let mut x = vec![0u64; enc.words];
        for (&pos, &b) in enc.info_positions.iter().zip(info) {
            if b & 1 == 1 {
                x[pos / 64] |= 1 << (pos % 64);
            }
        }
        let mut out = vec![0u8; self.n];
        for (&pos, &b) in enc.info_positions.iter().zip(info) {
            out[pos] = b & 1;
        }
        for (row, &p) in enc.rows.iter().zip(&enc.pivots) {
            let parity = row
                .iter()
                .zip(&x)
                .map(|(a, b)| (a & b).count_ones())
                .sum::<u32>()
                & 1;
            out[p] = parity as u8;
        }
        Ok(out)
    }

    /// True iff `H · bits = 0` over GF(2).
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        debug_assert_eq!(bits.len(), self.n);
        self.row_adj
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ bits[v]) & 1 == 0)
    }

    /// Number of unsatisfied checks.
    pub fn syndrome_weight(&self, bits: &[u8]) -> usize {
        self.row_adj
            .iter()
            .filter(|row| row.iter().fold(0u8, |acc, &v| acc ^ bits[v]) & 1 == 1)
            .count()
    }

    /// Parity-check pass: variable-to-check edge messages in, check-to-variable
    /// edge messages out, each the box-plus of the other edges of its check.
    pub fn check_pass(&self, to_checks: &[f64], to_vars: &mut [f64]) {
        let mut prefix = Vec::new();
        let mut halves = Vec::new();
        for c in 0..self.checks {
            let (lo, hi) = (self.check_start[c], self.check_start[c + 1]);
            let deg = hi - lo;
            if deg == 1 {
                to_vars[lo] = LLR_MAX;
                continue;
            }
            prefix.clear();
            halves.clear();
            let mut acc = 1.0;
            for &m in &to_checks[lo..hi] {
                let t = tanh_half(m);
                prefix.push(acc);
                halves.push(t);
                acc *= t;
            }
            let mut suffix = 1.0;
            for k in (0..deg).rev() {
                to_vars[lo + k] = from_tanh_product(prefix[k] * suffix);
                suffix *= halves[k];
            }
        }
    }

    /// Variable pass: `to_checks[e] = prior[v] + sum of the other incoming
    /// check messages`. Writes the full sum of check messages (without the
    /// prior) into `check_totals`.
    pub fn variable_pass(
        &self,
        to_vars: &[f64],
        prior: &[f64],
        to_checks: &mut [f64],
        check_totals: &mut [f64],
    ) {
        for v in 0..self.n {
            let edges = &self.var_edges[v];
            let sum: f64 = edges.iter().map(|&e| to_vars[e]).sum();
            check_totals[v] = sum;
            let total = sum + prior[v];
            for &e in edges {
                to_checks[e] = clip(total - to_vars[e]);
            }
        }
    }

    /// Sum of check messages per variable.
    pub fn check_totals(&self, to_vars: &[f64], out: &mut [f64]) {
        for (v, o) in out.iter_mut().enumerate() {
            *o = self.var_edges[v].iter().map(|&e| to_vars[e]).sum();
        }
    }
}

impl Encoder {
    fn new(n: usize, row_adj: &[Vec<usize>]) -> Self {
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = row_adj
            .iter()
            .map(|row| {
                let mut bits = vec![0u64; words];
                for &v in row {
                    bits[v / 64] ^= 1 << (v % 64);
                }
                bits
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..rows.len()).find(|&i| rows[i][w] & b != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot_row = rows[rank].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != rank && row[w] & b != 0 {
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        *x ^= y;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rows.truncate(rank);
        let info_positions = (0..n).filter(|c| !pivots.contains(c)).collect();
        Encoder {
            words,
            rows,
            pivots,
            info_positions,
        }
    }
}

/// Parses a MacKay-format alist file.
pub fn load_alist(path: impl AsRef<Path>) -> Result<LdpcCode> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_alist(&text).map_err(|e| match e {
        Error::Parse { line, msg, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
        other => other,
    })
}

pub fn parse_alist(text: &str) -> Result<LdpcCode> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut last_line = 0;
    let mut next_nums = |want: Option<usize>, what: &str| -> Result<Vec<usize>> {
        let (ln, l) = lines.next().ok_or_else(|| Error::Parse {
            path: Default::default(),
            line: last_line + 1,
            msg: format!("unexpected end of file reading {what}"),
        })?;
        last_line = ln;
        let nums = l
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: Default::default(),
                line: ln,
                msg: format!("{what}: {e}"),
            })?;
        if let Some(w) = want {
            if nums.len() != w {
                return Err(Error::Parse {
                    path: Default::default(),
                    line: ln,
                    msg: format!("{what}: expected {w} entries, found {}", nums.len()),
                });
            }
        }
        Ok(nums)
    };
    let dims = next_nums(Some(2), "dimensions")?;
    let (n, m) = (dims[0], dims[1]);
    let maxw = next_nums(Some(2), "maximum weights")?;
    let col_w = next_nums(Some(n), "column weights")?;
    let row_w = next_nums(Some(m), "row weights")?;
    let bad = |line: usize, msg: String| Error::Parse {
        path: Default::default(),
        line,
        msg,
    };
    let mut cols = Vec::with_capacity(n);
    for (v, &w) in col_w.iter().enumerate() {
        let entries = next_nums(None, "column entries")?;
        let nz: Vec<usize> = entries.iter().copied().filter(|&x| x != 0).collect();
        if nz.len() != w || entries.len() > maxw[0].max(w) {
            return Err(bad(last_line, format!("column {} lists {} entries, weight says {w}", v + 1, nz.len())));
        }
        if nz.iter().any(|&c| c > m) {
            return Err(bad(last_line, format!("column {} references check > {m}", v + 1)));
        }
        cols.push(nz.into_iter().map(|c| c - 1).collect::<Vec<_>>());
    }
    let mut rows = Vec::with_capacity(m);
    for (c, &w) in row_w.iter().enumerate() {
        let entries = next_nums(None, "row entries")?;
        let nz: Vec<usize> = entries.iter().copied().filter(|&x| x != 0).collect();
        if nz.len() != w || entries.len() > maxw[1].max(w) {
            return Err(bad(last_line, format!("row {} lists {} entries, weight says {w}", c + 1, nz.len())));
        }
        if nz.iter().any(|&v| v > n) {
            return Err(bad(last_line, format!("row {} references bit > {n}", c + 1)));
        }
        rows.push(nz.into_iter().map(|v| v - 1).collect::<Vec<_>>());
    }
    // The two halves must describe the same matrix.
    for (v, col) in cols.iter().enumerate() {
        for &c in col {
            if !rows[c].contains(&v) {
                return Err(bad(last_line, format!("entry ({}, {}) in column list but not row list", c + 1, v + 1)));
            }
        }
    }
    let total_cols: usize = col_w.iter().sum();
    let total_rows: usize = row_w.iter().sum();
    if total_cols != total_rows {
        return Err(bad(last_line, format!("column weights sum to {total_cols}, row weights to {total_rows}")));
    }
    LdpcCode::from_checks(n, rows)
}

/// Single check-node output: `2 atanh(prod tanh(L/2))` over the other edges.
pub fn check_node_update(incoming: &[f64]) -> f64 {
    boxplus_all(incoming.iter().copied())
}

#[derive(Debug, Clone)]
pub struct BpOutcome {
    pub bits: Vec<u8>,
    /// Posterior LLRs (channel plus all check messages).
    pub llrs: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Flooding sum-product decoding, stopping at the first zero syndrome.
pub fn bp_decode(code: &LdpcCode, channel_llrs: &[f64], max_iter: usize) -> BpOutcome {
    bp_decode_with(code, channel_llrs, max_iter, true)
}

/// As [`bp_decode`]; with `early_stop = false` every iteration runs.
pub fn bp_decode_with(code: &LdpcCode, channel_llrs: &[f64], max_iter: usize, early_stop: bool) -> BpOutcome {
    assert!(max_iter >= 1, "max_iter must be at least 1");
    assert_eq!(channel_llrs.len(), code.len());
    let e = code.edges();
    let mut to_checks = vec![0.0; e];
    for (v, edges) in code.var_edges.iter().enumerate() {
        for &ed in edges {
            to_checks[ed] = clip(channel_llrs[v]);
        }
    }
    let mut to_vars = vec![0.0; e];
    let mut totals = vec![0.0; code.len()];
    let mut llrs = vec![0.0; code.len()];
    let mut bits = vec![0u8; code.len()];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        code.check_pass(&to_checks, &mut to_vars);
        code.variable_pass(&to_vars, channel_llrs, &mut to_checks, &mut totals);
        for v in 0..code.len() {
            llrs[v] = totals[v] + channel_llrs[v];
            bits[v] = hard_bit(llrs[v]);
        }
        converged = code.syndrome_ok(&bits);
        if converged && early_stop {
            break;
        }
    }
    BpOutcome {
        bits,
        llrs,
        converged,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code(name: &str) -> LdpcCode {
        load_alist(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/codes").join(name)).unwrap()
    }

    /// Dense GF(2) product, independent of the code's adjacency bookkeeping.
    fn h_times(text: &str, x: &[u8]) -> Vec<u8> {
        let code = parse_alist(text).unwrap();
        (0..code.checks())
            .map(|c| code.check_vars(c).iter().fold(0, |a, &v| a ^ x[v]))
            .collect()
    }

    #[test]
    fn tree_and_hamming_dimensions() {
        for name in ["tree_7_4.alist", "hamming_7_4.alist"] {
            let c = code(name);
            assert_eq!((c.len(), c.checks(), c.info_len()), (7, 3, 4), "{name}");
        }
    }

    #[test]
    fn bundled_264_codes() {
        let half = code("peg_264_132.alist");
        assert_eq!((half.len(), half.checks()), (264, 132));
        assert_eq!(half.info_len(), 132);
        let high = code("peg_264_44.alist");
        assert_eq!(high.info_len(), 220);
        assert_abs_diff_eq!(high.rate(), 5.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn adjacency_mirrors() {
        let c = code("peg_264_132.alist");
        for v in 0..c.len() {
            for &ch in c.var_checks(v) {
                assert!(c.check_vars(ch).contains(&v));
            }
        }
        let nnz: usize = (0..c.checks()).map(|ch| c.check_vars(ch).len()).sum();
        assert_eq!(nnz, c.edges());
    }

    #[test]
    fn malformed_alist() {
        // Column weight says 2 but only one entry listed.
        let text = "3 1\n2 3\n2 1 1\n3\n1 0\n1\n1\n1 2 3\n";
        let err = parse_alist(text).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err:?}");
        // Row list disagrees with column list.
        let text = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 2\n";
        assert!(parse_alist(text).is_err());
        assert!(parse_alist("3 1\n1 3\n").is_err());
    }

    #[test]
    fn rank_deficient_code_adjusts_info_length() {
        // Third row is the sum of the first two.
        let c = LdpcCode::from_checks(4, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(c.rank(), 2);
        assert_eq!(c.info_len(), 2);
    }

    #[test]
    fn encode_examples() {
        let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/codes/hamming_7_4.alist")).unwrap();
        let c = parse_alist(&text).unwrap();
        assert_eq!(c.encode(&[0; 4]).unwrap(), vec![0; 7]);
        let x = c.encode(&[1, 0, 0, 0]).unwrap();
        assert_eq!(h_times(&text, &x), vec![0, 0, 0]);
        assert_eq!(x[c.info_positions()[0]], 1);
        assert!(c.encode(&[1, 0]).is_err());
    }

    #[test]
    fn encode_exhaustive_small_codes() {
        for name in ["tree_7_4.alist", "hamming_7_4.alist"] {
            let c = code(name);
            for word in 0..16u8 {
                let info: Vec<u8> = (0..4).map(|i| (word >> i) & 1).collect();
                let x = c.encode(&info).unwrap();
                assert!(c.syndrome_ok(&x));
                for (k, &p) in c.info_positions().iter().enumerate() {
                    assert_eq!(x[p], info[k]);
                }
            }
        }
    }

    #[test]
    fn encode_random_large_code() {
        let c = code("peg_264_44.alist");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let info: Vec<u8> = (0..c.info_len()).map(|_| rng.random_range(0..2)).collect();
            let x = c.encode(&info).unwrap();
            assert!(c.syndrome_ok(&x));
        }
    }

    #[test]
    fn syndrome_single_flip() {
        for name in ["tree_7_4.alist", "hamming_7_4.alist", "peg_264_132.alist"] {
            let c = code(name);
            let mut x = c.encode(&vec![1; c.info_len()]).unwrap();
            assert!(c.syndrome_ok(&x));
            x[3] ^= 1;
            assert!(!c.syndrome_ok(&x), "{name}");
            assert!(c.syndrome_ok(&vec![0; c.len()]));
        }
    }

    #[test]
    fn check_node_examples() {
        assert_abs_diff_eq!(check_node_update(&[LLR_MAX, 1.7]), 1.7, epsilon = 1e-9);
        let expect = 2.0 * ((0.5f64).tanh() * (1.0f64).tanh()).atanh();
        assert_abs_diff_eq!(check_node_update(&[1.0, 2.0]), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(check_node_update(&[1.0, 2.0]), 0.7354, epsilon = 1e-4);
        assert_eq!(check_node_update(&[3.0, 0.0, -2.0]), 0.0);
        assert_eq!(check_node_update(&[]), LLR_MAX);
    }

    proptest! {
        #[test]
        fn check_node_symmetry_and_contraction(
            v in proptest::collection::vec(-15.0f64..15.0, 1..6),
            flip in 0usize..6,
        ) {
            let out = check_node_update(&v);
            let mut rev = v.clone();
            rev.reverse();
            // Product order changes rounding, which atanh amplifies near saturation.
            prop_assert!((check_node_update(&rev) - out).abs() < 1e-9);
            let mut neg = v.clone();
            let k = flip % v.len();
            neg[k] = -neg[k];
            prop_assert!((check_node_update(&neg) + out).abs() < 1e-12);
            let min = v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            prop_assert!(out.abs() <= min + 1e-9);
        }

        #[test]
        fn encoder_is_linear(a in proptest::collection::vec(0u8..2, 132), b in proptest::collection::vec(0u8..2, 132)) {
            let c = code("peg_264_132.alist");
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let xa = c.encode(&a).unwrap();
            let xb = c.encode(&b).unwrap();
            let sum: Vec<u8> = xa.iter().zip(&xb).map(|(x, y)| x ^ y).collect();
            prop_assert_eq!(sum, c.encode(&ab).unwrap());
        }
    }

    #[test]
    fn bp_noiseless_converges_in_one() {
        let c = code("peg_264_132.alist");
        let x = c.encode(&vec![1; c.info_len()]).unwrap();
        let llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
        let out = bp_decode(&c, &llrs, 50);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.bits, x);
    }

    #[test]
    fn bp_recovers_erased_bit() {
        let c = code("hamming_7_4.alist");
        let x = c.encode(&[1, 0, 1, 1]).unwrap();
        for erased in 0..7 {
            let mut llrs: Vec<f64> = x.iter().map(|&b| if b == 0 { 8.0 } else { -8.0 }).collect();
            llrs[erased] = 0.0;
            let out = bp_decode(&c, &llrs, 10);
            assert_eq!(out.bits, x, "erased {erased}");
            assert!(out.converged);
        }
    }

    #[test]
    fn bp_all_zero_llrs_tie_rule() {
        let c = code("peg_264_132.alist");
        let out = bp_decode(&c, &vec![0.0; c.len()], 5);
        assert_eq!(out.bits, vec![0; c.len()]);
        // The all-zero word satisfies every check.
        assert!(out.converged);
    }

    #[test]
    fn bp_matches_exhaustive_map_on_tree_code() {
        let c = code("tree_7_4.alist");
        let words: Vec<Vec<u8>> = (0..16u8)
            .map(|w| c.encode(&(0..4).map(|i| (w >> i) & 1).collect::<Vec<_>>()).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let ch: Vec<f64> = (0..7).map(|_| rng.random_range(-6.0..6.0)).collect();
            let out = bp_decode_with(&c, &ch, 10, false);
            for v in 0..7 {
                let (mut p0, mut p1) = (0.0, 0.0);
                for w in &words {
                    let lik: f64 = w.iter().zip(&ch).map(|(&b, &l)| if b == 0 { l / 2.0 } else { -l / 2.0 }).sum::<f64>().exp();
                    if w[v] == 0 { p0 += lik } else { p1 += lik }
                }
                let map = (p0 / p1).ln();
                assert_abs_diff_eq!(out.llrs[v], map, epsilon = 1e-6);
                assert_eq!(out.bits[v], hard_bit(map));
            }
        }
    }
}
