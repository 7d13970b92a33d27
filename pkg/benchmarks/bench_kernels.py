"""Time each hot kernel under the compiled and pure-Python backends.

    python benchmarks/bench_kernels.py [--scale 1.0] [--repeat 3]

Inputs are synthetic and sized so the pure-Python side finishes in seconds;
``--scale`` grows them linearly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np
import scipy.sparse as sp

from opinionscape import kernels


def tweet_arrays(rng, n_tweets: int, n_tags: int, n_users: int):
    sizes = rng.choice([0, 0, 0, 1, 2, 3, 4], size=n_tweets)
    ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    idx = np.concatenate([rng.choice(n_tags, size=s, replace=False) for s in sizes]).astype(np.int32)
    users = rng.integers(0, n_users, size=n_tweets).astype(np.int32)
    return ptr, idx, users


def random_graph(rng, n: int, avg_degree: float) -> sp.csr_matrix:
    m = int(n * avg_degree / 2)
    a = rng.integers(0, n, size=m)
    b = rng.integers(0, n, size=m)
    keep = a != b
    w = rng.integers(1, 10, size=int(keep.sum())).astype(np.float64)
    g = sp.coo_matrix((w, (a[keep], b[keep])), shape=(n, n)).tocsr()
    g = (g + g.T).tocsr()
    g.sum_duplicates()
    g.sort_indices()
    return g


def cases(scale: float, seed: int):
    rng = np.random.default_rng(seed)
    ptr, idx, users = tweet_arrays(rng, int(200_000 * scale), 2_000, 20_000)
    yield "expand_pairs", lambda k: k.expand_pairs(ptr, idx, users), f"{len(users):,} tweets"

    g = random_graph(rng, int(20_000 * scale), 8.0)
    ip, ix = g.indptr.astype(np.int64), g.indices.astype(np.int32)
    yield "core_numbers", lambda k: k.core_numbers(ip, ix), f"{g.shape[0]:,} nodes / {g.nnz // 2:,} edges"

    data = g.data.astype(np.float64)
    strength = np.asarray(g.sum(axis=1)).ravel()
    order = rng.permutation(g.shape[0]).astype(np.int64)
    m2 = float(strength.sum())

    def moving(k):
        community = np.arange(g.shape[0], dtype=np.int64)
        return k.local_moving(ip, ix, data, strength, order, community, m2, 1.0, 1e-12 * m2)

    yield "local_moving", moving, f"{g.shape[0]:,} nodes, one level"

    n_rows, n_topics = int(50_000 * scale), 200
    c = sp.random(n_rows, n_topics, density=0.02, format="csr", random_state=seed, dtype=np.float64)
    c.data = np.ceil(c.data * 5)
    sums = np.maximum(np.asarray(c.sum(axis=1)).ravel(), 1)
    freqs = c.data / np.repeat(sums, np.diff(c.indptr))
    t = rng.dirichlet(np.ones(n_topics))
    cp, ci = c.indptr.astype(np.int64), c.indices.astype(np.int32)
    yield "deviation_norms", lambda k: k.deviation_norms(cp, ci, freqs, t), f"{n_rows:,} x {n_topics} rows"


def best_of(fn, backend, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(backend)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--scale", type=float, default=1.0, help="input size multiplier (default: 1.0)")
    parser.add_argument("--repeat", type=int, default=3, help="timing repetitions, best kept (default: 3)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if kernels.compiled is None:
        print("compiled extension not built; only the fallback can be timed")
    print(f"{'kernel':<16} {'input':<28} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for name, fn, desc in cases(args.scale, args.seed):
        py = best_of(fn, kernels.fallback, args.repeat)
        if kernels.compiled is None:
            print(f"{name:<16} {desc:<28} {py:>10.4f} {'-':>11} {'-':>8}")
            continue
        cc = best_of(fn, kernels.compiled, args.repeat)
        print(f"{name:<16} {desc:<28} {py:>10.4f} {cc:>11.4f} {py / cc:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
