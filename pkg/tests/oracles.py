"""Independent reference implementations used as test oracles.

Nothing here imports the package's estimators: binning, counting and the
information sums are written out directly from their textbook definitions.
"""
from collections import Counter
from math import log2

import numpy as np


def bin_equal_width(x, bins):
    """Equal-width bins over [min, max]; top edge closed; constant input -> bin 0."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return [0] * len(x)
    edges = np.histogram_bin_edges(x, bins=bins, range=(lo, hi))
    return [int(v) for v in np.clip(np.digitize(x, edges[1:-1], right=False), 0, bins - 1)]


def entropy_bits(*columns):
    """Joint Shannon entropy of one or more aligned symbol columns."""
    rows = list(zip(*columns))
    n = len(rows)
    return -sum(c / n * log2(c / n) for c in Counter(rows).values())


def mi_double_sum(sx, sy):
    """I(X;Y) = sum_x sum_y p(x,y) log2(p(x,y) / (p(x) p(y))), enumerating both alphabets."""
    n = len(sx)
    px, py, pxy = Counter(sx), Counter(sy), Counter(zip(sx, sy))
    total = 0.0
    for x in sorted(px):
        for y in sorted(py):
            joint = pxy.get((x, y), 0) / n
            if joint > 0:
                total += joint * log2(joint / ((px[x] / n) * (py[y] / n)))
    return total


def mi_from_signals(x, y, bins):
    return mi_double_sum(bin_equal_width(x, bins), bin_equal_width(y, bins))


def coinfo3_closed_form(sx, sy, sz):
    """H(X)+H(Y)+H(Z) - H(XY) - H(XZ) - H(YZ) + H(XYZ)."""
    return (entropy_bits(sx) + entropy_bits(sy) + entropy_bits(sz)
            - entropy_bits(sx, sy) - entropy_bits(sx, sz) - entropy_bits(sy, sz)
            + entropy_bits(sx, sy, sz))


# Independence bound for two 64-sample 3-D windows at B = 8: the 95th
# percentile of pair_mi_3d over 1000 time-permutation surrogates of one pair
# of independently seeded Gaussian random walks (seeds 1 and 2, surrogate
# permutations from default_rng(12345)).  Computed once and frozen.
THETA_INDEP = 0.631662711247848


def random_walk(seed, n=64):
    return np.cumsum(np.random.default_rng(seed).normal(size=(n, 3)), axis=0)
