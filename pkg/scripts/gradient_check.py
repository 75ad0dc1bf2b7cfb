"""Compare MLP backprop gradients with central finite differences.

    python scripts/gradient_check.py --sizes 23,8,8,3 --batch 8
"""
import argparse
import sys

import numpy as np

from fluency.classifiers.mlp import he_uniform_init, loss_and_grads


def numeric_grads(params, X, Y, eps):
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = loss_and_grads(params, X, Y)[0]
            flat[i] = old - eps
            down = loss_and_grads(params, X, Y)[0]
            flat[i] = old
            gflat[i] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="23,8,8,3", help="layer widths, input first")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)
    params = he_uniform_init(sizes, rng, np.float64)
    for b in params[1::2]:
        b[:] = rng.uniform(-0.1, 0.1, b.shape)
    X = rng.standard_normal((args.batch, sizes[0]))
    Y = np.eye(sizes[-1])[rng.integers(0, sizes[-1], args.batch)]

    _, analytic = loss_and_grads(params, X, Y)
    numeric = numeric_grads(params, X, Y, args.eps)
    worst = 0.0
    for i, (a, n) in enumerate(zip(analytic, numeric)):
        rel = float(np.max(np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-8)))
        worst = max(worst, rel)
        kind = "W" if i % 2 == 0 else "b"
        print(f"{kind}{i // 2 + 1} {str(a.shape):>10}  max rel err {rel:.3e}")
    print(f"worst {worst:.3e} (tolerance {args.tol:g})")
    return 0 if worst < args.tol else 1


if __name__ == "__main__":
    sys.exit(main())
