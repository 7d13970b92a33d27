"""Pure-Python implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``OPINIONSCAPE_PURE=1`` is set. Signatures and results match ``_kernels.pyx``.
"""

from __future__ import annotations

import numpy as np

MAX_PASSES = 200


def expand_pairs(tag_ptr, tag_idx, users):
    """Emit one (low, high, user) triple per unordered tag pair in each record."""
    ptr = np.asarray(tag_ptr).tolist()
    tags = np.asarray(tag_idx).tolist()
    owners = np.asarray(users).tolist()
    out_a: list[int] = []
    out_b: list[int] = []
    out_u: list[int] = []
    for r in range(len(ptr) - 1):
        s, e = ptr[r], ptr[r + 1]
        if e - s < 2:
            continue
        row = tags[s:e]
        u = owners[r]
        for i in range(len(row)):
            x = row[i]
            for j in range(i + 1, len(row)):
                y = row[j]
                if x < y:
                    out_a.append(x)
                    out_b.append(y)
                else:
                    out_a.append(y)
                    out_b.append(x)
                out_u.append(u)
    return (
        np.array(out_a, dtype=np.int32),
        np.array(out_b, dtype=np.int32),
        np.array(out_u, dtype=np.int32),
    )


def core_numbers(indptr, indices):
    """Bucket-sort peeling (Batagelj-Zaversnik). Graph must be simple and symmetric."""
    ptr = np.asarray(indptr).tolist()
    adj = np.asarray(indices).tolist()
    n = len(ptr) - 1
    if n == 0:
        return np.zeros(0, dtype=np.int32)
    deg = [ptr[v + 1] - ptr[v] for v in range(n)]
    md = max(deg)
    bin_ = [0] * (md + 1)
    for d in deg:
        bin_[d] += 1
    start = 0
    for d in range(md + 1):
        num = bin_[d]
        bin_[d] = start
        start += num
    pos = [0] * n
    vert = [0] * n
    for v in range(n):
        pos[v] = bin_[deg[v]]
        vert[pos[v]] = v
        bin_[deg[v]] += 1
    for d in range(md, 0, -1):
        bin_[d] = bin_[d - 1]
    bin_[0] = 0
    for i in range(n):
        v = vert[i]
        dv = deg[v]
        for k in range(ptr[v], ptr[v + 1]):
            u = adj[k]
            du = deg[u]
            if du > dv:
                pu = pos[u]
                pw = bin_[du]
                w = vert[pw]
                if u != w:
                    pos[u] = pw
                    vert[pu] = w
                    pos[w] = pu
                    vert[pw] = u
                bin_[du] += 1
                deg[u] = du - 1
    return np.array(deg, dtype=np.int32)


def local_moving(indptr, indices, weights, strength, order, community, m2, resolution, tol):
    """One Louvain local-moving phase; mutates ``community`` in place.

    Returns the number of node moves performed over all passes.
    """
    ptr = np.asarray(indptr).tolist()
    adj = np.asarray(indices).tolist()
    w = np.asarray(weights).tolist()
    k = np.asarray(strength).tolist()
    comm = np.asarray(community).tolist()
    n = len(ptr) - 1
    tot = [0.0] * n
    for v in range(n):
        tot[comm[v]] += k[v]
    visit = np.asarray(order).tolist()
    moves = 0
    for _ in range(MAX_PASSES):
        moved = 0
        for v in visit:
            cv = comm[v]
            kv = k[v]
            links: dict[int, float] = {}
            for e in range(ptr[v], ptr[v + 1]):
                u = adj[e]
                if u == v:
                    continue
                c = comm[u]
                links[c] = links.get(c, 0.0) + w[e]
            tot[cv] -= kv
            best = cv
            best_gain = links.get(cv, 0.0) - resolution * kv * tot[cv] / m2
            for c, wc in links.items():
                gain = wc - resolution * kv * tot[c] / m2
                if gain > best_gain + tol:
                    best = c
                    best_gain = gain
            tot[best] += kv
            if best != cv:
                comm[v] = best
                moved += 1
        moves += moved
        if moved == 0:
            break
    community[:] = comm
    return moves


def deviation_norms(indptr, indices, freqs, reference):
    """Euclidean norm of ``row - reference`` for each sparse row, densely over all columns."""
    t = np.asarray(reference, dtype=np.float64)
    ptr = np.asarray(indptr)
    n = len(ptr) - 1
    out = np.empty(n, dtype=np.float64)
    chunk = max(1, (1 << 20) // max(1, t.size))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        block = np.zeros((e - s, t.size), dtype=np.float64)
        lo, hi = ptr[s], ptr[e]
        rows = np.repeat(np.arange(e - s), np.diff(ptr[s : e + 1]))
        block[rows, np.asarray(indices)[lo:hi]] = np.asarray(freqs)[lo:hi]
        block -= t
        out[s:e] = np.sqrt(np.einsum("ij,ij->i", block, block))
    return out
