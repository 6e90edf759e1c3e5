"""Closed-form security analysis and the exhaustive small-field secrecy oracle.

Covers the combination count C(k, t) behind combination selection, the
probability of guessing the t correct shares out of all shares in memory
(log-space with an exact rational anchor for small sizes), the probability
of tracking a share's identity through shuffling rounds, and a brute-force
enumeration over GF(2^8) confirming that t-1 shares reveal nothing about
the secret.
"""

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class SecurityParams:
    """Inputs to the probability formulas.

    total: shares resident in memory (a 32 GB memory at 16 B/share holds
    2 * 10^9).  n_accesses: accesses between write-backs, the shuffle
    exponent.
    """

    total: int = 2 * 10**9
    k: int = 32
    t: int = 16
    d: int = 16
    s: int = 4
    n_accesses: int = 1


def comb(k, t):
    """Exact binomial coefficient C(k, t)."""
    if t < 0 or k < 0:
        raise ValueError("arguments must be nonnegative")
    if t > k:
        raise ValueError(f"t={t} exceeds k={k}")
    return math.comb(k, t)


def _ln_comb(n, t):
    """ln C(n, t) as a sum of t log terms (t is small, so this is exact
    to near machine precision, unlike lgamma at large n)."""
    acc = 0.0
    for i in range(t):
        acc += math.log(n - i)
    return acc - math.lgamma(t + 1)


class P1Result(NamedTuple):
    value: float
    log10: float
    warning: Optional[str]


def p1(params):
    """Probability of guessing t correct shares: k * C(total/k, t) / C(total, t).

    Computed in log space so 32 GB-scale parameters do not overflow; the
    returned ``value`` may underflow to zero while ``log10`` stays exact.
    """
    total, k, t = params.total, params.k, params.t
    if total < 1 or k < 1 or t < 0:
        raise ValueError("need total >= 1, k >= 1, t >= 0")
    warning = None
    if total % k != 0:
        warning = f"total {total} not divisible by k {k}; using floor"
        warnings.warn(warning)
    per_block = total // k
    if t > per_block:
        # no block holds t shares, so the guess can never succeed
        warning = f"t={t} exceeds shares per block {per_block}; probability 0"
        warnings.warn(warning)
        return P1Result(0.0, float("-inf"), warning)
    if t == 0:
        warning = "degenerate t=0: formula reduces to k"
        warnings.warn(warning)
        return P1Result(float(k), math.log10(k), warning)
    ln = math.log(k) + _ln_comb(per_block, t) - _ln_comb(total, t)
    return P1Result(math.exp(ln), ln / math.log(10), warning)


def p1_exact(params):
    """Exact rational evaluation; the correctness anchor for small totals."""
    total, k, t = params.total, params.k, params.t
    if total % k != 0:
        warnings.warn(f"total {total} not divisible by k {k}; using floor")
    per_block = total // k
    if t > per_block:
        return Fraction(0)
    if t == 0:
        return Fraction(k)
    return Fraction(k * math.comb(per_block, t), math.comb(total, t))


def p2(params):
    """Probability of tracking one share through n shuffled accesses:
    (1 / ((t+d) * s * n))^n."""
    t, d, s, n = params.t, params.d, params.s, params.n_accesses
    if t + d < 1 or s < 1 or n < 1:
        raise ValueError("need t+d >= 1, s >= 1, n >= 1")
    pool = (t + d) * s * n
    return (1.0 / pool) ** n


# -- exhaustive secrecy oracle over GF(2^8) ---------------------------------

_GF8_POLY = 0x11B  # x^8 + x^4 + x^3 + x + 1


def _gf256_mul_table():
    table = np.zeros((256, 256), dtype=np.uint8)
    for a in range(256):
        row = table[a]
        for b in range(256):
            x, y, r = a, b, 0
            while y:
                if y & 1:
                    r ^= x
                y >>= 1
                x <<= 1
                if x & 0x100:
                    x ^= _GF8_POLY
            row[b] = r
    return table


_MUL8 = None


def _mul8():
    global _MUL8
    if _MUL8 is None:
        _MUL8 = _gf256_mul_table()
    return _MUL8


class SecrecyVerdict(NamedTuple):
    passed: bool
    t: int
    k: int
    xs: tuple
    views_checked: int
    detail: str


def secrecy_exhaustive(params, xs=None, rng=None):
    """Enumerate every polynomial over GF(2^8) and check that (t-1)-share
    views are uniform over all 256 candidate secrets.

    params must be small: t <= 3, k <= 8, w == 1, n_seed == 0 (anything
    larger is refused as intractable).  xs optionally fixes the share
    x-coordinates; passing a set containing 0 demonstrates the leak that
    the nonzero-x rule prevents (the verdict comes back failed).
    """
    t, k = params.t, params.k
    if t > 3 or k > 8 or params.w != 1 or params.n_seed != 0:
        raise ValueError(
            "enumeration is tractable only for t <= 3, k <= 8, w=1, n_seed=0"
        )
    if xs is None:
        rng = rng or np.random.default_rng(0)
        xs = tuple(int(v) for v in rng.choice(np.arange(1, 256), size=k, replace=False))
    else:
        xs = tuple(int(v) for v in xs)
        if len(xs) != k or len(set(xs)) != k:
            raise ValueError("xs must be k distinct values")
    mul = _mul8()
    secrets = np.arange(256, dtype=np.uint16)
    views = 0
    from itertools import combinations

    if t == 2:
        # y = s ^ a1*x at one revealed position
        for (i,) in combinations(range(k), 1):
            xi = xs[i]
            col = mul[:, xi].astype(np.uint16)  # a1 -> a1*xi
            ref = None
            for s_val in range(256):
                keys = col ^ np.uint16(s_val)
                counts = np.bincount(keys, minlength=256)
                if ref is None:
                    ref = counts
                elif not np.array_equal(ref, counts):
                    return SecrecyVerdict(
                        False, t, k, xs, views,
                        f"view at x={xi} distinguishes secrets",
                    )
            views += 1
    elif t == 3:
        sq = [int(mul[x, x]) for x in xs]
        a_grid = np.arange(256)
        for i, j in combinations(range(k), 2):
            yi = (
                mul[:, xs[i]].astype(np.uint16)[:, None]
                ^ mul[:, sq[i]].astype(np.uint16)[None, :]
            )
            yj = (
                mul[:, xs[j]].astype(np.uint16)[:, None]
                ^ mul[:, sq[j]].astype(np.uint16)[None, :]
            )
            base_keys = (yi.astype(np.uint32) << 8) | yj.astype(np.uint32)
            ref = None
            for s_val in range(256):
                sk = np.uint32((s_val << 8) | s_val)
                counts = np.bincount((base_keys ^ sk).ravel(), minlength=65536)
                if ref is None:
                    ref = counts
                elif not np.array_equal(ref, counts):
                    return SecrecyVerdict(
                        False, t, k, xs, views,
                        f"view at x=({xs[i]},{xs[j]}) distinguishes secrets",
                    )
            views += 1
    else:  # t == 1: a share IS the secret; only the degenerate k=0 view is safe
        return SecrecyVerdict(
            False, t, k, xs, 0, "t=1 offers no secrecy (every share is f(x)=s)"
        )
    return SecrecyVerdict(
        True, t, k, xs, views, "all views uniform over the 256 candidate secrets"
    )
