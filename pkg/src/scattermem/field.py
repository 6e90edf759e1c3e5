"""Scalar arithmetic in GF(2^64).

Field elements are 64-bit integers read as polynomials over GF(2), reduced
modulo the pentanomial x^64 + x^4 + x^3 + x + 1.  An 8-byte data segment maps
bijectively onto a field element, which is why a binary extension field is
used instead of a prime field near 2^64.  Addition is XOR, so every element
is its own additive negation; subtraction and addition coincide everywhere in
this package.

These scalar helpers operate on plain Python ints and are convenient for
tests and small call sites; bulk work goes through :mod:`scattermem.kernels`.
"""

MASK64 = (1 << 64) - 1
REDUCE_POLY = 0x1B  # low bits of the modulus; bit 64 is implicit
ORDER = 1 << 64


def _check(a):
    if not 0 <= a < ORDER:
        raise ValueError(f"field element out of range: {a:#x}")
    return a


def gf_add(a, b):
    """Field addition (XOR)."""
    return _check(a) ^ _check(b)


def gf_mul(a, b):
    """Carry-less product reduced modulo x^64 + x^4 + x^3 + x + 1."""
    _check(a)
    _check(b)
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> 64:
            a = (a & MASK64) ^ REDUCE_POLY
    return r


def gf_pow(a, n):
    """a raised to a nonnegative integer power."""
    if n < 0:
        raise ValueError("negative exponent")
    _check(a)
    result = 1
    base = a
    while n:
        if n & 1:
            result = gf_mul(result, base)
        base = gf_mul(base, base)
        n >>= 1
    return result


def gf_inv(a):
    """Multiplicative inverse of a nonzero element.

    Computed as a^(2^64 - 2); constant algorithmic shape, trivially swappable
    for extended Euclid if speed ever matters here.
    """
    if _check(a) == 0:
        raise ValueError("zero has no multiplicative inverse")
    return gf_pow(a, ORDER - 2)
