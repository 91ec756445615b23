//! Sum-product kernels on the SCMA factor graph of one codeword position.
//!
//! Messages live on edges `(r, j)` of the signature. For one codeword
//! position the function-to-variable messages `I` and variable-to-function
//! messages `G` are stored edge-major as `E x M` probability vectors, each
//! normalised to sum 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;

const MAX_ORDER: usize = 16;
const MAX_DEGREE: usize = crate::codebook::MAX_USERS_PER_RESOURCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FnMode {
    /// Exact marginalisation over interfering symbols.
    #[default]
    SumProduct,
    /// Maximum over interfering symbols instead of the sum.
    MaxLog,
}

/// Edge bookkeeping for one codebook's factor graph.
#[derive(Debug, Clone)]
pub struct ScmaGraph {
    order: usize,
    edges: Vec<(usize, usize)>,
    /// Edges at each function node, in `users_on(r)` order.
    fn_edges: Vec<Vec<usize>>,
    /// Edges at each variable node, in `resources_of(j)` order.
    var_edges: Vec<Vec<usize>>,
    /// Per function node: symbol digits of every combination, `[combo][k]`.
    fn_digits: Vec<Vec<u8>>,
    /// Start of each function node's table within a position's likelihoods,
    /// then the total length.
    lik_start: Vec<usize>,
    lik_len: usize,
}

impl ScmaGraph {
    pub fn new(cb: &Codebook) -> Self {
        let order = cb.order();
        assert!(order <= MAX_ORDER, "at most {MAX_ORDER} codewords per user");
        let mut edges = Vec::new();
        let mut fn_edges = Vec::with_capacity(cb.resources());
        for r in 0..cb.resources() {
            let mut here = Vec::new();
            for &j in cb.users_on(r) {
                here.push(edges.len());
                edges.push((r, j));
            }
            fn_edges.push(here);
        }
        let var_edges = (0..cb.users())
            .map(|j| {
                cb.resources_of(j)
                    .iter()
                    .map(|&r| edges.iter().position(|&e| e == (r, j)).expect("edge exists"))
                    .collect()
            })
            .collect();
        let mut fn_digits = Vec::with_capacity(cb.resources());
        let mut lik_start = Vec::with_capacity(cb.resources() + 1);
        let mut lik_len = 0;
        for r in 0..cb.resources() {
            let d = cb.users_on(r).len();
            assert!(d <= MAX_DEGREE, "at most {MAX_DEGREE} users per resource");
            let combos = order.pow(d as u32);
            let mut digits = Vec::with_capacity(combos * d);
            for c in 0..combos {
                let mut rest = c;
                for _ in 0..d {
                    digits.push((rest % order) as u8);
                    rest /= order;
                }
            }
            fn_digits.push(digits);
            lik_start.push(lik_len);
            lik_len += combos;
        }
        lik_start.push(lik_len);
        ScmaGraph {
            order,
            edges,
            fn_edges,
            var_edges,
            fn_digits,
            lik_start,
            lik_len,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `(resource, user)` of an edge.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn fn_edges(&self, r: usize) -> &[usize] {
        &self.fn_edges[r]
    }

    pub fn var_edges(&self, j: usize) -> &[usize] {
        &self.var_edges[j]
    }

    /// Length of the likelihood table of one codeword position.
    pub fn likelihood_len(&self) -> usize {
        self.lik_len
    }

    /// Fills the likelihood tables of one codeword position:
    /// `exp(-|y_r − Σ h x|² / N0)` for every symbol combination at every
    /// function node, scaled so the largest entry per node is 1.
    ///
    /// `y` is indexed by resource, `coeff(j, r)` returns the channel gain.
    pub fn likelihoods(
        &self,
        cb: &Codebook,
        y: impl Fn(usize) -> Complex64,
        coeff: impl Fn(usize, usize) -> Complex64,
        n0: f64,
        out: &mut [f64],
    ) {
        let n0 = n0.max(f64::MIN_POSITIVE);
        let order = self.order;
        for r in 0..self.fn_edges.len() {
            let users = cb.users_on(r);
            let d = users.len();
            let table = &mut out[self.lik_start[r]..self.lik_start[r + 1]];
            // Faded constellation points per user on this resource.
            let points: Vec<Complex64> = users
                .iter()
                .flat_map(|&j| {
                    let h = coeff(j, r);
                    (0..order).map(move |m| h * cb.entry(j, m, r))
                })
                .collect();
            let yr = y(r);
            let digits = &self.fn_digits[r];
            let mut dmin = f64::INFINITY;
            for (c, t) in table.iter_mut().enumerate() {
                let mut s = yr;
                for k in 0..d {
                    s -= points[k * order + digits[c * d + k] as usize];
                }
                let dist = s.norm_sqr();
                dmin = dmin.min(dist);
                *t = dist;
            }
            for t in table.iter_mut() {
                *t = (-(*t - dmin) / n0).exp();
            }
        }
    }

    /// Function-node update at resource `r` for one codeword position.
    ///
    /// `lik` is the position's full likelihood table, `g` and `i_out` the
    /// position's `E x M` message blocks.
    pub fn fn_update(&self, r: usize, lik: &[f64], g: &[f64], i_out: &mut [f64], mode: FnMode) {
        let edges = &self.fn_edges[r];
        let table = &lik[self.lik_start[r]..self.lik_start[r + 1]];
        let max_log = mode == FnMode::MaxLog;
        match edges.len() {
            1 => fn_node::<1>(self.order, edges, table, g, i_out, max_log),
            2 => fn_node::<2>(self.order, edges, table, g, i_out, max_log),
            3 => fn_node::<3>(self.order, edges, table, g, i_out, max_log),
            4 => fn_node::<4>(self.order, edges, table, g, i_out, max_log),
            5 => fn_node::<5>(self.order, edges, table, g, i_out, max_log),
            6 => fn_node::<6>(self.order, edges, table, g, i_out, max_log),
            7 => fn_node::<7>(self.order, edges, table, g, i_out, max_log),
            8 => fn_node::<8>(self.order, edges, table, g, i_out, max_log),
            d => unreachable!("resource degree {d} exceeds {MAX_DEGREE}"),
        }
    }

    /// Variable-node update for user `j`: toward each function node, the
    /// product of the prior and the other function nodes' messages.
    /// `damping = 1` keeps only the new message.
    pub fn svn_update(&self, j: usize, i_msgs: &[f64], prior: &[f64], g_out: &mut [f64], damping: f64) {
        let order = self.order;
        let edges = &self.var_edges[j];
        let mut tmp = [0.0f64; 64];
        for &v in edges {
            let new = &mut tmp[..order];
            new.copy_from_slice(&prior[..order]);
            for &u in edges {
                if u != v {
                    for (x, &y) in new.iter_mut().zip(&i_msgs[u * order..(u + 1) * order]) {
                        *x *= y;
                    }
                }
            }
            normalize(new);
            let out = &mut g_out[v * order..(v + 1) * order];
            if damping >= 1.0 {
                out.copy_from_slice(new);
            } else {
                for (o, &x) in out.iter_mut().zip(new.iter()) {
                    *o = damping * x + (1.0 - damping) * *o;
                }
                normalize(out);
            }
        }
    }

    /// `Π_{r ∈ ζ_j} I_{r→j}`, normalised.
    pub fn symbol_evidence(&self, j: usize, i_msgs: &[f64], out: &mut [f64]) {
        let order = self.order;
        out[..order].fill(1.0);
        for &u in &self.var_edges[j] {
            for (x, &y) in out.iter_mut().zip(&i_msgs[u * order..(u + 1) * order]) {
                *x *= y;
            }
        }
        normalize(&mut out[..order]);
    }
}

/// Function-node update for a resource of degree `D`. The first user's
/// symbol runs fastest in the table, so for each setting of the others their
/// leave-one-out products are fixed across a row.
fn fn_node<const D: usize>(order: usize, edges: &[usize], table: &[f64], g: &[f64], i_out: &mut [f64], max_log: bool) {
    let mut gs = [[0.0f64; MAX_ORDER]; D];
    for (dst, &e) in gs.iter_mut().zip(edges) {
        dst[..order].copy_from_slice(&g[e * order..(e + 1) * order]);
    }
    let mut out = [[0.0f64; MAX_ORDER]; D];
    let mut digits = [0usize; D];
    for row in table.chunks_exact(order) {
        let mut excl = [1.0f64; D];
        let mut prefix = 1.0;
        for k in 1..D {
            excl[k] = prefix;
            prefix *= gs[k][digits[k]];
        }
        let mut suffix = 1.0;
        for k in (1..D).rev() {
            excl[k] *= suffix;
            suffix *= gs[k][digits[k]];
        }
        if max_log {
            let mut best: f64 = 0.0;
            for ((o, &w), &x) in out[0].iter_mut().zip(row).zip(&gs[0]) {
                *o = o.max(w * prefix);
                best = best.max(w * x);
            }
            for k in 1..D {
                let o = &mut out[k][digits[k]];
                *o = o.max(best * excl[k]);
            }
        } else {
            let mut acc = 0.0;
            for ((o, &w), &x) in out[0].iter_mut().zip(row).zip(&gs[0]) {
                *o += w * prefix;
                acc += w * x;
            }
            for k in 1..D {
                out[k][digits[k]] += acc * excl[k];
            }
        }
        for dg in digits.iter_mut().skip(1) {
            *dg += 1;
            if *dg < order {
                break;
            }
            *dg = 0;
        }
    }
    for (o, &e) in out.iter().zip(edges) {
        let dst = &mut i_out[e * order..(e + 1) * order];
        dst.copy_from_slice(&o[..order]);
        normalize(dst);
    }
}

/// Scales to sum 1; a zero or non-finite vector becomes uniform.
pub(crate) fn normalize(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    if s > 0.0 && s.is_finite() {
        let inv = 1.0 / s;
        p.iter_mut().for_each(|x| *x *= inv);
    } else {
        let u = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|x| *x = u);
    }
}

/// Message passing restricted to a single codeword position, for uncoded
/// multi-user detection.
#[derive(Debug, Clone)]
pub struct SlotMpa<'a> {
    cb: &'a Codebook,
    graph: ScmaGraph,
    lik: Vec<f64>,
    /// Function-to-variable messages, `E x M`.
    pub i: Vec<f64>,
    /// Variable-to-function messages, `E x M`.
    pub g: Vec<f64>,
    priors: Vec<Vec<f64>>,
    mode: FnMode,
}

impl<'a> SlotMpa<'a> {
    /// `y[r]` received samples, `h[j][r]` channel gains.
    pub fn new(cb: &'a Codebook, y: &[Complex64], h: &[Vec<Complex64>], n0: f64) -> Self {
        let graph = ScmaGraph::new(cb);
        let mut lik = vec![0.0; graph.likelihood_len()];
        graph.likelihoods(cb, |r| y[r], |j, r| h[j][r], n0, &mut lik);
        let m = cb.order();
        let e = graph.edge_count();
        SlotMpa {
            cb,
            lik,
            i: vec![1.0 / m as f64; e * m],
            g: vec![1.0 / m as f64; e * m],
            priors: vec![vec![1.0 / m as f64; m]; cb.users()],
            graph,
            mode: FnMode::SumProduct,
        }
    }

    pub fn with_mode(mut self, mode: FnMode) -> Self {
        self.mode = mode;
        self
    }

    /// Per-user symbol priors (default uniform).
    pub fn set_priors(&mut self, priors: Vec<Vec<f64>>) {
        self.priors = priors;
    }

    pub fn graph(&self) -> &ScmaGraph {
        &self.graph
    }

    pub fn fn_update(&mut self) {
        for r in 0..self.cb.resources() {
            self.graph.fn_update(r, &self.lik, &self.g, &mut self.i, self.mode);
        }
    }

    pub fn svn_update(&mut self) {
        for j in 0..self.cb.users() {
            self.graph.svn_update(j, &self.i, &self.priors[j], &mut self.g, 1.0);
        }
    }

    pub fn iterate(&mut self, rounds: usize) {
        for _ in 0..rounds {
            self.fn_update();
            self.svn_update();
        }
    }

    /// Symbol posteriors: prior times all incoming function messages.
    pub fn posteriors(&self) -> Vec<Vec<f64>> {
        let m = self.cb.order();
        (0..self.cb.users())
            .map(|j| {
                let mut p = vec![0.0; m];
                self.graph.symbol_evidence(j, &self.i, &mut p);
                for (x, &q) in p.iter_mut().zip(&self.priors[j]) {
                    *x *= q;
                }
                normalize(&mut p);
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::load_codebook;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Two users on one shared resource, plus user 0 alone on another.
    fn toy() -> Codebook {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let qpsk = [c(s, s), c(-s, s), c(s, -s), c(-s, -s)];
        let u0 = (0..4).map(|m| vec![qpsk[m] * s, qpsk[(m + 1) % 4] * s]).collect();
        let rot = c(0.0, 1.0).powf(0.3);
        let u1 = (0..4).map(|m| vec![c(0.0, 0.0), qpsk[m] * rot]).collect();
        Codebook::new(vec![vec![true, false], vec![true, true]], vec![u0, u1]).unwrap()
    }

    #[test]
    fn degree_one_noiseless_is_delta() {
        let cb = toy();
        let h = vec![vec![c(1.0, 0.0); 2]; 2];
        let y = vec![cb.entry(0, 2, 0), cb.entry(0, 2, 1) + cb.entry(1, 0, 1)];
        let mut mpa = SlotMpa::new(&cb, &y, &h, 1e-9);
        mpa.fn_update();
        // Edge 0 is (r0, user 0), a degree-1 function node.
        assert_abs_diff_eq!(mpa.i[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shared_resource_matches_enumeration() {
        let cb = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let graph = ScmaGraph::new(&cb);
        for _ in 0..20 {
            let h: Vec<Vec<Complex64>> = (0..2).map(|_| (0..2).map(|_| c(rng.random(), rng.random())).collect()).collect();
            let y = [c(rng.random(), rng.random()), c(rng.random(), rng.random())];
            let n0 = 0.3;
            let mut lik = vec![0.0; graph.likelihood_len()];
            graph.likelihoods(&cb, |r| y[r], |j, r| h[j][r], n0, &mut lik);
            let g: Vec<f64> = (0..graph.edge_count() * 4).map(|_| rng.random_range(0.1..1.0)).collect();
            let mut i = vec![0.0; g.len()];
            graph.fn_update(1, &lik, &g, &mut i, FnMode::SumProduct);
            // Brute force over the M² combinations at resource 1.
            let (e0, e1) = (graph.fn_edges(1)[0], graph.fn_edges(1)[1]);
            let mut expect = [0.0; 4];
            for (m0, ex) in expect.iter_mut().enumerate() {
                for m1 in 0..4 {
                    let s = y[1] - h[0][1] * cb.entry(0, m0, 1) - h[1][1] * cb.entry(1, m1, 1);
                    *ex += (-s.norm_sqr() / n0).exp() * g[e1 * 4 + m1];
                }
            }
            let tot: f64 = expect.iter().sum();
            for m in 0..4 {
                assert_abs_diff_eq!(i[e0 * 4 + m], expect[m] / tot, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_collision_gives_symmetric_messages() {
        // Two users with identical constellations on one resource, h = 1:
        // swapping their symbols gives the same superposition.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let pts = [c(1.0, 0.0), c(0.0, 1.0)];
        let cw = |m: usize| vec![pts[m]];
        let cb = Codebook::new(vec![vec![true, true]], vec![vec![cw(0), cw(1)], vec![cw(0), cw(1)]]).unwrap();
        let y = vec![(pts[0] + pts[1]) * s];
        let h = vec![vec![c(1.0, 0.0)]; 2];
        let mut mpa = SlotMpa::new(&cb, &y, &h, 0.5);
        mpa.fn_update();
        assert_abs_diff_eq!(mpa.i[0], mpa.i[1], epsilon = 1e-12);
        assert_abs_diff_eq!(mpa.i[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn svn_excludes_target_edge() {
        let cb = load_codebook(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/codebooks/scma_4x6.json")).unwrap();
        let graph = ScmaGraph::new(&cb);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut i: Vec<f64> = (0..graph.edge_count() * 4).map(|_| rng.random_range(0.05..1.0)).collect();
        let prior = [0.1, 0.2, 0.3, 0.4];
        let mut g = vec![0.0; i.len()];
        graph.svn_update(0, &i, &prior, &mut g, 1.0);
        let (v0, v1) = (graph.var_edges(0)[0], graph.var_edges(0)[1]);
        // d_v = 2: G toward v0 is prior times I from v1 only.
        let mut expect: Vec<f64> = (0..4).map(|m| prior[m] * i[v1 * 4 + m]).collect();
        normalize(&mut expect);
        for m in 0..4 {
            assert_abs_diff_eq!(g[v0 * 4 + m], expect[m], epsilon = 1e-14);
        }
        // Perturbing the message from v0 leaves G toward v0 unchanged.
        let before = g[v0 * 4..v0 * 4 + 4].to_vec();
        for m in 0..4 {
            i[v0 * 4 + m] = rng.random_range(0.05..1.0);
        }
        graph.svn_update(0, &i, &prior, &mut g, 1.0);
        assert_eq!(&g[v0 * 4..v0 * 4 + 4], &before[..]);
        // A delta prior pins G regardless of I.
        graph.svn_update(0, &i, &[0.0, 0.0, 1.0, 0.0], &mut g, 1.0);
        assert_eq!(&g[v1 * 4..v1 * 4 + 4], &[0.0, 0.0, 1.0, 0.0]);
        for e in 0..graph.edge_count() {
            let s: f64 = g[e * 4..e * 4 + 4].iter().sum();
            if graph.edge(e).1 == 0 {
                assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn max_log_picks_best_combination() {
        let cb = toy();
        let h = vec![vec![c(1.0, 0.0); 2]; 2];
        let y = vec![cb.entry(0, 1, 0), cb.entry(0, 1, 1) + cb.entry(1, 3, 1)];
        let mut mpa = SlotMpa::new(&cb, &y, &h, 0.01).with_mode(FnMode::MaxLog);
        mpa.iterate(2);
        let post = mpa.posteriors();
        assert!(post[0][1] > 0.99);
        assert!(post[1][3] > 0.99);
    }
}
