"""Independent reference computations used as test oracles.

Nothing here imports the code under test's numerical kernels: similarities
are evaluated with scalar loops and gradients by central differences.
"""

import math

import numpy as np


def cosine_loop(x, y):
    dot = sum(a * b for a, b in zip(x, y))
    nx = math.sqrt(sum(a * a for a in x))
    ny = math.sqrt(sum(b * b for b in y))
    return dot / (nx * ny)


def blend_loop(a, x, b, y):
    return [a * xi + b * yi for xi, yi in zip(x, y)]


def central_diff(f, params, eps=1e-5):
    params = np.array(params, dtype=np.float64)
    g = np.zeros_like(params)
    for i in range(params.size):
        old = params[i]
        params[i] = old + eps
        up = f(params)
        params[i] = old - eps
        down = f(params)
        params[i] = old
        g[i] = (up - down) / (2 * eps)
    return g


def max_rel_error(analytic, numeric, floor=1e-6):
    """Elementwise |a - n| / max(|a|, |n|, floor), maximised.

    The floor keeps components whose true value is ~0 from dividing
    central-difference round-off (about 1e-11) by a vanishing magnitude.
    """
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    den = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / den))


def pairwise_pick(pool, i, highest):
    """Brute-force argmax/argmin of cosine over the pool, smallest index on ties."""
    best, best_s = None, None
    for j, w in enumerate(pool):
        if j == i:
            continue
        s = cosine_loop(pool[i], w)
        if best is None or (s > best_s if highest else s < best_s):
            best, best_s = j, s
    return best
