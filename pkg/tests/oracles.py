"""Independent reference computations used by the tests.

Nothing here imports the package; each oracle reaches its answer by a
different route (enumeration, recurrences on other objects, finite
differences, grid search).
"""
from fractions import Fraction
from itertools import product
from math import comb

import mpmath
import numpy as np


def set_partitions(items):
    """Yield every partition of ``items`` as a list of blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def partition_counts(n):
    """counts[k] = number of partitions of {1..n} into k blocks."""
    counts = [0] * (n + 1)
    for part in set_partitions(list(range(n))):
        counts[len(part)] += 1
    return counts


def bell_triangle(n_max):
    """Bell numbers B_0..B_n_max from the Aitken/Peirce triangle."""
    bells = [1]
    row = [1]
    for _ in range(n_max):
        new = [row[-1]]
        for v in row:
            new.append(new[-1] + v)
        row = new
        bells.append(row[0])
    return bells


def richardson_derivative(k, z, h=mpmath.mpf("1e-3"), dps=60):
    """k-th derivative of log(1+e^z) by central differences plus one Richardson step."""
    with mpmath.workdps(dps):
        f = lambda t: mpmath.log(1 + mpmath.exp(t))
        z = mpmath.mpf(z)

        def central(step):
            total = mpmath.mpf(0)
            for i in range(k + 1):
                total += (-1) ** i * comb(k, i) * f(z + (mpmath.mpf(k) / 2 - i) * step)
            return total / step**k

        coarse, fine = central(h), central(h / 2)
        return float((4 * fine - coarse) / 3)


def coordinate_moment_convolution(m, x, beta, delta):
    """E[(sum_j c_j (xi_j - 1))^m] by combining per-coordinate raw moments.

    Exact rational arithmetic given rational inputs.
    """
    delta = Fraction(delta)
    keep = 1 - delta
    dist = [Fraction(1)] + [Fraction(0)] * m  # raw moments of the running sum
    for xj, bj in zip(x, beta):
        c = Fraction(xj) * Fraction(bj)
        lo, hi = -c, c * delta / keep
        single = [delta * lo**r + keep * hi**r for r in range(m + 1)]
        dist = [sum(comb(r, s) * dist[s] * single[r - s] for s in range(r + 1))
                for r in range(m + 1)]
    return dist[m]


def brute_force_masks(x, beta, delta, fn):
    """sum over masks of P(mask) * fn(x~ . beta - x . beta), via itertools.product."""
    x = np.asarray(x, float)
    beta = np.asarray(beta, float)
    base = float(x @ beta)
    total = 0.0
    for bits in product((0, 1), repeat=len(x)):
        bits = np.array(bits)
        w = np.prod(np.where(bits == 1, 1 - delta, delta))
        total += w * fn(float((x * bits / (1 - delta)) @ beta) - base)
    return total


def grid_minimizer(f, lo, hi, levels=(0.05, 2e-3, 1e-4, 5e-6)):
    """Minimise a 2-D function by successively refined dense grids."""
    step = levels[0]
    axis = np.arange(lo, hi + step / 2, step)
    centre = None
    for i, step in enumerate(levels):
        if i:
            span = 3 * levels[i - 1]
            axes = [np.arange(c - span, c + span + step / 2, step) for c in centre]
        else:
            axes = [axis, axis]
        g0, g1 = np.meshgrid(*axes, indexing="ij")
        vals = f(np.stack([g0.ravel(), g1.ravel()], axis=1))
        best = int(np.argmin(vals))
        centre = (g0.ravel()[best], g1.ravel()[best])
    return np.array(centre)


def block_counts_by_rgs(n):
    """counts[k] = partitions of {1..n} into k blocks, by listing every
    restricted growth string a_1..a_n (a_1 = 0, a_i <= 1 + max(a_1..a_{i-1})).

    Vectorised over all strings so n = 12 (4.2 million partitions) stays fast.
    """
    maxes = np.zeros(1, dtype=np.int8)
    for _ in range(n - 1):
        parts = [maxes[maxes + 1 >= v] for v in range(int(maxes.max()) + 2)]
        grown = [np.maximum(p, v).astype(np.int8) for v, p in enumerate(parts)]
        maxes = np.concatenate(grown)
    counts = np.bincount(maxes.astype(np.int64) + 1, minlength=n + 1)
    return counts.tolist()


def central_difference(f, beta, h=1e-6):
    """Coordinate-wise central differences of a scalar function."""
    g = np.zeros_like(beta)
    for idx in np.ndindex(beta.shape):
        e = np.zeros_like(beta)
        e[idx] = h
        g[idx] = (f(beta + e) - f(beta - e)) / (2 * h)
    return g
