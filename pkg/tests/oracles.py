"""Slow, loop-based reference implementations used as test oracles."""

import math

import numpy as np


def brute_force_run(values, eps=0.01, near_band=8, row_start=0, col_start=0, d_floor=1e-6):
    """Scan every cell for the minimum, then grow the diagonal run cell by cell.

    Returns ``(i_min, j_min, d_min, k1, k2, l, f_video)`` or None.
    """
    rows, cols = len(values), len(values[0])
    best = None
    for r in range(rows):
        for c in range(cols):
            i, j = r + row_start, c + col_start
            d = values[r][c]
            if j - i <= near_band or d != d:
                continue
            if best is None or d < best[0]:
                best = (d, i, j)
    if best is None:
        return None
    d_min, i, j = best
    gap = j - i

    def cell(a, b):
        ra, cb = a - row_start, b - col_start
        if 0 <= ra < rows and 0 <= cb < cols:
            return values[ra][cb]
        return None

    def ok(a, b):
        v = cell(a, b)
        return v is not None and abs(v - d_min) <= eps

    k1 = 0
    for k in range(1, gap):
        if all(ok(i - s, j - s) for s in range(1, k + 1)):
            k1 = k
        else:
            break
    k2 = 0
    for k in range(1, gap - k1):
        if all(ok(i + s, j + s) for s in range(1, k + 1)):
            k2 = k
        else:
            break
    length = k1 + k2 + 1
    f = -max(d_min, d_floor) / (length * gap)
    return i, j, d_min, k1, k2, length, f


def pair_count_auc(scores, labels):
    """Fraction of (positive, negative) pairs ordered correctly, ties counting half."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def mcc_direct(tp, fp, tn, fn):
    num = tp * tn - fp * fn
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return 0.0 if den == 0 else num / den


def random_run_matrix(rng, size=30):
    """Random square matrix of one of three flavours: uniform, planted run, coarse ties."""
    kind = rng.integers(3)
    if kind == 0:
        m = rng.uniform(0, 1, (size, size))
    elif kind == 1:
        m = rng.uniform(0.2, 1, (size, size))
        i = int(rng.integers(0, size - 10))
        j = int(rng.integers(i + 1, size))
        length = int(rng.integers(1, size - j + 1))
        base = rng.uniform(0, 0.05)
        for k in range(length):
            m[i + k, j + k] = base + rng.uniform(-0.012, 0.012)
        m = np.clip(m, 0, 1)
    else:
        # few distinct levels: many exact ties and eps-close neighbours
        m = rng.integers(0, 6, (size, size)) * 0.005
    return m
