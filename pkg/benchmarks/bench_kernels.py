"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from ordgrade import _kernels_py

try:
    from ordgrade import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    logits = rng.normal(size=(4096, 5)) * 2
    gold = rng.integers(0, 5, 4096)
    x = rng.integers(1, 6, 2000).astype(float)
    y = x + rng.normal(size=2000)
    tokens = [f"response:word{k}".encode() for k in rng.integers(0, 500, 5000)]
    return {
        "emd_loss_grad (4096x5, p=2)": lambda k: k.emd_loss_grad(logits, gold, 2.0, 2.0, 1.0, 1e-12, True),
        "emd_loss_grad (4096x5, p=1.5, a=1)": lambda k: k.emd_loss_grad(logits, gold, 1.5, 1.0, 1.0, 1e-12, True),
        "kendall_counts (n=2000)": lambda k: k.kendall_counts(x, y),
        "hash_tokens (5000 tokens)": lambda k: k.hash_tokens(tokens, np.zeros(256)),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':<38}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name, fn in cases(rng).items():
        py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<38}{py:>12.2f}{cy:>14.2f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
