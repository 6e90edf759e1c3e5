"""Pure numpy/Python fallback for the GF(2^64) batch kernels.

Same contracts as ``_gf_numba``; selected via ``SCATTERMEM_NO_NUMBA=1`` or
when numba is unavailable.  Elementwise operations are vectorized with numpy
(64 masked passes per multiply); the interpolation routines, which are
inherently scalar-sequential, fall back to Python integers.
"""

import numpy as np

MASK64 = (1 << 64) - 1
REDUCE = 0x1B  # low bits of x^64 + x^4 + x^3 + x + 1

_U1 = np.uint64(1)
_U63 = np.uint64(63)
_URED = np.uint64(REDUCE)


def _mul_int(a, b):
    """Scalar carry-less multiply with reduction, on Python ints."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> 64:
            a = (a & MASK64) ^ REDUCE
    return r


def _inv_int(a):
    """a^(2^64 - 2) by square-and-multiply, on Python ints."""
    # exponent 2^64 - 2 = 0b111...1110
    result = 1
    base = _mul_int(a, a)  # a^2, consumes the low zero bit
    for _ in range(63):
        result = _mul_int(result, base)
        base = _mul_int(base, base)
    return result


def mul_vec(a, b):
    """Elementwise GF(2^64) product of two uint64 arrays."""
    a = np.array(a, dtype=np.uint64, copy=True)
    b = np.array(b, dtype=np.uint64, copy=True)
    r = np.zeros_like(a)
    for _ in range(64):
        r ^= a * (b & _U1)
        hi = a >> _U63
        a = (a << _U1) ^ (hi * _URED)
        b >>= _U1
    return r


def inv_vec(a):
    """Elementwise inverse of nonzero uint64 arrays (zero maps to zero)."""
    a = np.asarray(a, dtype=np.uint64)
    result = np.ones_like(a)
    base = mul_vec(a, a)
    for _ in range(63):
        result = mul_vec(result, base)
        base = mul_vec(base, base)
    return result


def poly_eval_many(coeffs, xs):
    """Evaluate the coefficient-form polynomial at each x (Horner)."""
    xs = np.asarray(xs, dtype=np.uint64)
    ys = np.full(xs.shape, np.uint64(coeffs[-1]), dtype=np.uint64)
    for k in range(len(coeffs) - 2, -1, -1):
        ys = mul_vec(ys, xs) ^ np.uint64(coeffs[k])
    return ys


def eval_one(coeffs, x):
    """Scalar Horner evaluation; returns a Python int."""
    acc = 0
    x = int(x)
    for c in reversed([int(c) for c in coeffs]):
        acc = _mul_int(acc, x) ^ c
    return acc


def _batch_inverse(vals):
    """Invert a list of nonzero Python ints with one field inversion."""
    n = len(vals)
    prefix = [0] * n
    acc = 1
    for i, v in enumerate(vals):
        acc = _mul_int(acc, v)
        prefix[i] = acc
    inv_acc = _inv_int(acc)
    out = [0] * n
    for i in range(n - 1, 0, -1):
        out[i] = _mul_int(inv_acc, prefix[i - 1])
        inv_acc = _mul_int(inv_acc, vals[i])
    out[0] = inv_acc
    return out


def lagrange_coefficients(xs, ys):
    """Coefficients of the unique degree-(t-1) polynomial through t points."""
    xs = [int(v) for v in xs]
    ys = [int(v) for v in ys]
    t = len(xs)
    # master polynomial m(z) = prod (z ^ x_i), degree t
    m = [0] * (t + 1)
    m[0] = 1
    for i, xi in enumerate(xs):
        for k in range(i + 1, 0, -1):
            m[k] = m[k - 1] ^ _mul_int(m[k], xi)
        m[0] = _mul_int(m[0], xi)

    # synthetic division q_i = m / (z ^ x_i); denominator = q_i(x_i)
    quotients = []
    denoms = []
    for xi in xs:
        q = [0] * t
        q[t - 1] = m[t]
        for k in range(t - 2, -1, -1):
            q[k] = m[k + 1] ^ _mul_int(q[k + 1], xi)
        acc = 0
        for k in range(t - 1, -1, -1):
            acc = _mul_int(acc, xi) ^ q[k]
        quotients.append(q)
        denoms.append(acc)

    inv_denoms = _batch_inverse(denoms)
    coeffs = [0] * t
    for q, yi, invd in zip(quotients, ys, inv_denoms):
        scale = _mul_int(yi, invd)
        for k in range(t):
            coeffs[k] ^= _mul_int(q[k], scale)
    return np.array(coeffs, dtype=np.uint64)


def barycentric_weights(xs):
    """w_i = inverse of prod_{j != i} (x_i ^ x_j)."""
    xs = [int(v) for v in xs]
    t = len(xs)
    denoms = []
    for i in range(t):
        acc = 1
        for j in range(t):
            if j != i:
                acc = _mul_int(acc, xs[i] ^ xs[j])
        denoms.append(acc)
    return np.array(_batch_inverse(denoms), dtype=np.uint64)


def barycentric_eval(xs, ys, x):
    """First-form barycentric evaluation at x (x must avoid the nodes)."""
    xs_i = [int(v) for v in xs]
    ys_i = [int(v) for v in ys]
    x = int(x)
    weights = [int(w) for w in barycentric_weights(xs)]
    diffs = [x ^ xi for xi in xs_i]
    inv_diffs = _batch_inverse(diffs)
    master = 1
    acc = 0
    for xi, yi, wi, invd in zip(xs_i, ys_i, weights, inv_diffs):
        master = _mul_int(master, x ^ xi)
        acc ^= _mul_int(_mul_int(wi, invd), yi)
    return _mul_int(master, acc)
