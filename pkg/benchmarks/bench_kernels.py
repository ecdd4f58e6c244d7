"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 20,80,200] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from pairweight import kernels


def make_case(n, dim=16, classes=None, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    labels = rng.integers(0, classes or max(2, n // 5), size=n)
    same = labels[:, None] == labels[None, :]
    pos = same & ~np.eye(n, dtype=bool)
    neg = ~same
    d = kernels.load_backend("python").pairwise_distances(z)
    i, j, k = np.nonzero(pos[:, :, None] & neg[:, None, :])
    trip = np.stack([i, j, k], axis=1).astype(np.int64)
    return {"z": z, "labels": labels, "pos": pos, "neg": neg, "d": d, "trip": trip,
            "w": rng.random(d.shape), "wt": rng.random(len(trip)), "g": rng.normal(size=d.shape)}


def calls(mod, c):
    n = len(c["d"])
    return {
        "pairwise_distances": lambda: mod.pairwise_distances(c["z"]),
        "distance_backward": lambda: mod.distance_backward(c["g"], c["z"], c["d"]),
        "weighted_pair_loss": lambda: mod.weighted_pair_loss(c["d"], c["pos"], c["neg"], c["w"],
                                                             c["w"], 0.0, 0.8, n),
        "weighted_triplet_loss": lambda: mod.weighted_triplet_loss(c["d"], c["trip"], c["wt"],
                                                                   0.1, n),
        "first_hit_rank": lambda: mod.first_hit_rank(c["d"], c["labels"]),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="20,80,200")
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is timed")
    print(f"{'kernel':<22} {'N':>5} " + " ".join(f"{b + ' ms':>12}" for b in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for n in (int(s) for s in args.sizes.split(",")):
        case = make_case(n)
        per = {b: calls(kernels.load_backend(b), case) for b in backends}
        for name in per["python"]:
            ms = {b: 1e3 * min(timeit.repeat(per[b][name], number=1, repeat=args.repeat))
                  for b in backends}
            row = f"{name:<22} {n:>5} " + " ".join(f"{ms[b]:>12.4f}" for b in backends)
            if len(backends) == 2:
                row += f"  {ms['python'] / ms['compiled']:>10.1f}x"
            print(row)


if __name__ == "__main__":
    main()
