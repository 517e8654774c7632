"""Derive the Lloyd-Max distortion table for a unit-variance Gaussian source.

Prints the normalized MSE of the optimal b-level scalar quantizer for
b = 1..5; the values are embedded in ``milac.hardware``.
"""
import argparse

import numpy as np
from scipy.special import ndtr

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _pdf(x):
    return np.exp(-0.5 * x * x) / SQRT_2PI


def lloyd_max(bits, tol=1e-15, max_iter=2_000_000):
    n = 2 ** bits
    levels = np.linspace(-2.0, 2.0, n) if n > 1 else np.zeros(1)
    for it in range(max_iter):
        edges = np.concatenate(([-np.inf], 0.5 * (levels[1:] + levels[:-1]), [np.inf]))
        mass = ndtr(edges[1:]) - ndtr(edges[:-1])
        new = (_pdf(edges[:-1]) - _pdf(edges[1:])) / mass
        new = 0.5 * (new - new[::-1])  # symmetric source
        step = np.max(np.abs(new - levels))
        levels = new
        if step < tol:
            break
    edges = np.concatenate(([-np.inf], 0.5 * (levels[1:] + levels[:-1]), [np.inf]))
    mass = ndtr(edges[1:]) - ndtr(edges[:-1])
    # centroid condition: E[(X - Q(X))^2] = 1 - E[Q(X)^2]
    return 1.0 - float(np.sum(mass * levels**2)), levels, it


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-bits", type=int, default=5)
    args = ap.parse_args()
    for b in range(1, args.max_bits + 1):
        beta, levels, it = lloyd_max(b)
        print(f"{b}: {beta!r}  ({it} iterations)")
