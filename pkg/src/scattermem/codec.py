"""Share codec: data segmentation, reconstruction, and seed-based integrity.

A 64-byte block is split into ``w`` 8-byte segments which become the low
coefficients of a degree-(t-1) polynomial over GF(2^64).  The top ``n_seed``
coefficients are derived from a keyed seed function of (key, address, write
counter), the middle ones are drawn fresh from the caller's RNG.  A share is
a point (x, f(x)) with x != 0; any t shares recover the polynomial, and the
recovered seed coefficients certify integrity and freshness.

x = 0 is never used as an evaluation point: f(0) equals the first data
segment, which would sit in memory as plaintext.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .field import MASK64

_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class CodecParams:
    """Codec geometry.

    k: shares generated per logical block.
    t: shares required for reconstruction (defaults to k/2, k must be even).
    w: 8-byte data segments per block (block size is 8*w bytes).
    n_seed: integrity seed coefficients placed at the top of the polynomial.
    """

    k: int = 32
    t: Optional[int] = None
    w: int = 8
    n_seed: int = 1

    def __post_init__(self):
        if self.t is None:
            if self.k % 2 != 0:
                raise ValueError("k must be even when t is defaulted to k/2")
            object.__setattr__(self, "t", self.k // 2)
        if not 1 <= self.t <= self.k:
            raise ValueError(f"need 1 <= t <= k, got t={self.t} k={self.k}")
        if self.w < 1 or self.n_seed < 0:
            raise ValueError("w must be >= 1 and n_seed >= 0")
        if self.w + self.n_seed > self.t:
            raise ValueError(
                f"w + n_seed must not exceed t ({self.w}+{self.n_seed} > {self.t})"
            )

    @property
    def degree(self):
        """Polynomial degree; t evaluations pin a degree-(t-1) polynomial."""
        return self.t - 1

    @property
    def block_bytes(self):
        return 8 * self.w

    @property
    def n_random(self):
        return self.t - self.w - self.n_seed


class Share(NamedTuple):
    """One point (x, f(x)); serializes to 16 bytes, little-endian x then y."""

    x: int
    y: int

    def to_bytes(self):
        return self.x.to_bytes(8, "little") + self.y.to_bytes(8, "little")

    @classmethod
    def from_bytes(cls, raw):
        if len(raw) != 16:
            raise ValueError(f"share must be 16 bytes, got {len(raw)}")
        return cls(int.from_bytes(raw[:8], "little"), int.from_bytes(raw[8:], "little"))


@dataclass(frozen=True)
class SeedContext:
    """Inputs to the seed derivation: secret key, block address, freshness counter.

    write_counter must strictly increase with each write of the same address;
    the controller owns that bookkeeping.
    """

    seed_key: int  # 128-bit secret
    logical_addr: int
    write_counter: int


def _mix64(z):
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(ctx, seed_index, n_seed):
    """Keyed pseudorandom coefficient for one seed slot.

    Deterministic in (seed_key, logical_addr, write_counter, seed_index).
    A multiply-xor-shift construction; not claimed cryptographically strong,
    swappable behind this signature.
    """
    if not 0 <= seed_index < n_seed:
        raise ValueError(f"seed_index {seed_index} out of range (n_seed={n_seed})")
    h = ctx.seed_key & MASK64
    for word in (
        ctx.seed_key >> 64,
        ctx.logical_addr,
        ctx.write_counter,
        seed_index,
    ):
        h = _mix64(h ^ ((word * _GOLDEN) & MASK64))
    return h


def block_to_segments(block, params):
    """64-byte block -> w little-endian uint64 segments (a bijection)."""
    if len(block) != params.block_bytes:
        raise ValueError(
            f"block must be {params.block_bytes} bytes, got {len(block)}"
        )
    return np.frombuffer(bytes(block), dtype="<u8").astype(np.uint64)


def segments_to_block(segments, params):
    segments = np.asarray(segments, dtype=np.uint64)
    if segments.size != params.w:
        raise ValueError(f"expected {params.w} segments, got {segments.size}")
    return segments.astype("<u8").tobytes()


def build_polynomial(segments, params, ctx, rng):
    """Coefficient vector: data at degrees 0..w-1, seeds on top, RNG between.

    Randomness contract (relied on by test stubs): the random middle
    coefficients are drawn first with ``rng.integers(0, 2**64, size=n_random,
    dtype=uint64)``; x values are drawn separately by the caller.
    """
    coeffs = np.zeros(params.t, dtype=np.uint64)
    coeffs[: params.w] = segments
    if params.n_random > 0:
        coeffs[params.w : params.w + params.n_random] = rng.integers(
            0, 2**64, size=params.n_random, dtype=np.uint64
        )
    for i in range(params.n_seed):
        coeffs[params.t - params.n_seed + i] = derive_seed(ctx, i, params.n_seed)
    return coeffs


def draw_x_values(k, rng):
    """k distinct nonzero evaluation points; redraws on the (rare) collision."""
    while True:
        xs = rng.integers(1, 2**64, size=k, dtype=np.uint64)
        if np.unique(xs).size == k:
            return xs


def segment_arrays(segments, params, ctx, rng):
    """Array-form segmentation: returns (xs, ys) uint64 arrays of length k."""
    coeffs = build_polynomial(segments, params, ctx, rng)
    xs = draw_x_values(params.k, rng)
    ys = kernels.poly_eval_many(coeffs, xs)
    return xs, ys


def segment_block(block, params, ctx, rng):
    """Split one block into k shares (see module docstring for the layout)."""
    xs, ys = segment_arrays(block_to_segments(block, params), params, ctx, rng)
    return [Share(int(x), int(y)) for x, y in zip(xs, ys)]


def _shares_to_arrays(shares):
    xs = np.fromiter((s[0] for s in shares), dtype=np.uint64, count=len(shares))
    ys = np.fromiter((s[1] for s in shares), dtype=np.uint64, count=len(shares))
    if np.unique(xs).size != xs.size:
        raise ValueError("shares must have distinct x values")
    return xs, ys


def interpolate_coefficients(shares):
    """Full coefficient vector of the unique polynomial through the shares.

    O(t^2) Lagrange-basis expansion; the integrity check compares
    coefficients, which point evaluation alone cannot provide.
    """
    xs, ys = _shares_to_arrays(shares)
    return [int(c) for c in kernels.lagrange_coefficients(xs, ys)]


def barycentric_eval(shares, x):
    """f(x) via the first-form barycentric formula.

    Weights are w_i = inverse of prod_{j != i}(x_i ^ x_j).  x must differ
    from every node; for a stored node the caller already has its y.
    """
    xs, ys = _shares_to_arrays(shares)
    if not 0 <= x < 2**64:
        raise ValueError("x out of field range")
    if np.uint64(x) in xs:
        raise ValueError("x collides with an interpolation node; use its stored y")
    if len(shares) == 1:
        return int(ys[0])
    return int(kernels.barycentric_eval(xs, ys, np.uint64(x)))


def reconstruct_arrays(xs, ys, params, ctx):
    """Array-form reconstruction: returns (segments, integrity_ok)."""
    if xs.size != params.t:
        raise ValueError(f"need exactly t={params.t} shares, got {xs.size}")
    if np.unique(xs).size != xs.size:
        raise ValueError("shares must have distinct x values")
    coeffs = kernels.lagrange_coefficients(xs, ys)
    ok = True
    for i in range(params.n_seed):
        expected = derive_seed(ctx, i, params.n_seed)
        if int(coeffs[params.t - params.n_seed + i]) != expected:
            ok = False
            break
    return coeffs[: params.w].copy(), ok


def reconstruct(shares, params, ctx):
    """Rebuild the block from exactly t shares; verify the seed coefficients.

    Returns (block_bytes, integrity_ok).  A failed check is a return value,
    not an exception; the caller decides whether to alarm.
    """
    xs, ys = _shares_to_arrays(shares)
    segments, ok = reconstruct_arrays(xs, ys, params, ctx)
    return segments_to_block(segments, params), ok
