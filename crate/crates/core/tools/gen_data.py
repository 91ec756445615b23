#!/usr/bin/env python3
"""Regenerate the bundled codebooks and parity-check matrices.

Run from the crate root:  python3 tools/gen_data.py
Output is deterministic for the fixed seeds below.
"""
import itertools
import json
import os

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")


# ---------------------------------------------------------------------------
# LDPC: progressive edge growth
# ---------------------------------------------------------------------------

def peg(n, m, dv, seed):
    rng = np.random.default_rng(seed)
    var_adj = [[] for _ in range(n)]
    chk_adj = [[] for _ in range(m)]
    for v in range(n):
        for k in range(dv):
            deg = np.array([len(c) for c in chk_adj])
            if k == 0:
                cands = np.flatnonzero(deg == deg.min())
            else:
                # BFS from v over the current graph; pick among the checks
                # reached last (or never reached).
                seen_c = set(var_adj[v])
                seen_v = {v}
                frontier = set(var_adj[v])
                while True:
                    nv = set()
                    for c in frontier:
                        nv.update(chk_adj[c])
                    nv -= seen_v
                    seen_v |= nv
                    nc = set()
                    for u in nv:
                        nc.update(var_adj[u])
                    nc -= seen_c
                    if not nc:
                        unreached = [c for c in range(m) if c not in seen_c]
                        pool = unreached if unreached else list(frontier)
                        break
                    if len(seen_c | nc) == m:
                        pool = [c for c in range(m) if c not in seen_c]
                        break
                    seen_c |= nc
                    frontier = nc
                pool = np.array(sorted(pool))
                pdeg = deg[pool]
                cands = pool[pdeg == pdeg.min()]
            c = int(rng.choice(cands))
            var_adj[v].append(c)
            chk_adj[c].append(v)
    return var_adj, chk_adj


def write_alist(path, n, m, var_adj, chk_adj, header=None):
    mc = max(len(a) for a in var_adj)
    mr = max(len(a) for a in chk_adj)
    lines = [f"{n} {m}", f"{mc} {mr}",
             " ".join(str(len(a)) for a in var_adj),
             " ".join(str(len(a)) for a in chk_adj)]
    for a in var_adj:
        row = sorted(x + 1 for x in a)
        lines.append(" ".join(str(x) for x in row + [0] * (mc - len(row))))
    for a in chk_adj:
        row = sorted(x + 1 for x in a)
        lines.append(" ".join(str(x) for x in row + [0] * (mr - len(row))))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def gf2_rank(n, chk_adj):
    rows = []
    for a in chk_adj:
        r = 0
        for v in a:
            r |= 1 << v
        rows.append(r)
    rank = 0
    for col in range(n):
        piv = None
        for i in range(rank, len(rows)):
            if rows[i] >> col & 1:
                piv = i
                break
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i] >> col & 1:
                rows[i] ^= rows[rank]
        rank += 1
    return rank


def girth4_free(var_adj):
    pairs = set()
    for v, a in enumerate(var_adj):
        for c1, c2 in itertools.combinations(sorted(a), 2):
            if (c1, c2) in pairs:
                return False
            pairs.add((c1, c2))
    return True


def gen_codes():
    out = os.path.join(DATA, "codes")
    # Cycle-free (7,4) code: a chain of three weight-3 checks.
    chk = [[0, 1, 2], [2, 3, 4], [4, 5, 6]]
    var = [[c for c, a in enumerate(chk) if v in a] for v in range(7)]
    write_alist(os.path.join(out, "tree_7_4.alist"), 7, 3, var, chk)
    # Textbook Hamming (7,4).
    chk = [[0, 1, 2, 4], [0, 1, 3, 5], [0, 2, 3, 6]]
    var = [[c for c, a in enumerate(chk) if v in a] for v in range(7)]
    write_alist(os.path.join(out, "hamming_7_4.alist"), 7, 3, var, chk)
    for name, n, m, seed in [("peg_264_132", 264, 132, 7), ("peg_264_44", 264, 44, 11)]:
        var, chk = peg(n, m, 3, seed)
        write_alist(os.path.join(out, name + ".alist"), n, m, var, chk)
        print(name, "rank", gf2_rank(n, chk), "4-cycle free", girth4_free(var),
              "row weights", sorted(set(len(a) for a in chk)))


# ---------------------------------------------------------------------------
# SCMA codebooks: rotated Gray-QPSK mother constellation
# ---------------------------------------------------------------------------

QPSK = np.exp(1j * (np.pi / 4 + np.pi / 2 * np.array([0, 1, 3, 2])))  # Gray order


def build(signature, phases):
    r_count, j_count = signature.shape
    cw = np.zeros((j_count, 4, r_count), dtype=complex)
    for j in range(j_count):
        res = np.flatnonzero(signature[:, j])
        for k, r in enumerate(res):
            # Second dimension uses a relabelled constellation for
            # signal-space diversity across the user's resources.
            labels = np.arange(4) if k % 2 == 0 else np.array([0, 3, 1, 2])
            cw[j, :, r] = QPSK[labels] * np.exp(1j * phases[r, j])
    energy = np.mean(np.sum(np.abs(cw) ** 2, axis=2), axis=1)
    cw /= np.sqrt(energy)[:, None, None]
    return cw


def min_superposition_distance(signature, cw):
    worst = np.inf
    for r in range(signature.shape[0]):
        users = np.flatnonzero(signature[r])
        sums = []
        for combo in itertools.product(range(4), repeat=len(users)):
            sums.append(sum(cw[u, m, r] for u, m in zip(users, combo)))
        sums = np.array(sums)
        d = np.abs(sums[:, None] - sums[None, :])
        d[np.diag_indices_from(d)] = np.inf
        worst = min(worst, d.min())
    return worst


def search(signature, seed, tries):
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(tries):
        phases = np.zeros(signature.shape)
        for r in range(signature.shape[0]):
            users = np.flatnonzero(signature[r])
            base = rng.uniform(0, np.pi / 2)
            step = np.pi / 2 / len(users)
            for k, u in enumerate(users):
                phases[r, u] = base + k * step + rng.normal(0, 0.15)
        cw = build(signature, phases)
        d = min_superposition_distance(signature, cw)
        if best is None or d > best[0]:
            best = (d, cw)
    return best


def write_codebook(path, signature, cw, note):
    j_count, m_count, r_count = cw.shape
    doc = {
        "J": int(j_count),
        "R": int(r_count),
        "M": int(m_count),
        "note": note,
        "signature": signature.astype(int).tolist(),
        "codewords": [[[[round(float(x.real), 12), round(float(x.imag), 12)]
                        for x in cw[j, m]] for m in range(m_count)]
                      for j in range(j_count)],
    }
    with open(path, "w") as f:
        f.write("{\n")
        f.write(f'  "J": {doc["J"]},\n  "R": {doc["R"]},\n  "M": {doc["M"]},\n')
        f.write(f'  "note": {json.dumps(note)},\n')
        f.write('  "signature": [\n')
        f.write(",\n".join("    " + json.dumps(r) for r in doc["signature"]))
        f.write("\n  ],\n")
        f.write('  "codewords": [\n')
        users = []
        for j in range(j_count):
            syms = ",\n".join("      " + json.dumps(s) for s in doc["codewords"][j])
            users.append("    [\n" + syms + "\n    ]")
        f.write(",\n".join(users))
        f.write("\n  ]\n}\n")


def gen_codebooks():
    out = os.path.join(DATA, "codebooks")
    f46 = np.array([[1, 1, 1, 0, 0, 0],
                    [1, 0, 0, 1, 1, 0],
                    [0, 1, 0, 1, 0, 1],
                    [0, 0, 1, 0, 1, 1]])
    d, cw = search(f46, 46, 400)
    print("4x6 min superposition distance", d)
    write_codebook(os.path.join(out, "scma_4x6.json"), f46, cw,
                   "Stand-in 4x6 codebook: rotated Gray-QPSK per resource, "
                   "natural (big-endian) bit labels, unit average energy.")
    f510 = np.zeros((5, 10), dtype=int)
    for j, (a, b) in enumerate(itertools.combinations(range(5), 2)):
        f510[a, j] = 1
        f510[b, j] = 1
    d, cw = search(f510, 510, 60)
    print("5x10 min superposition distance", d)
    write_codebook(os.path.join(out, "scma_5x10.json"), f510, cw,
                   "Stand-in 5x10 codebook: rotated Gray-QPSK per resource, "
                   "natural (big-endian) bit labels, unit average energy.")


if __name__ == "__main__":
    gen_codes()
    gen_codebooks()
