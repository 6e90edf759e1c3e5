"""Numba kernels for GF(2^64) batch arithmetic (the default hot path)."""

import numpy as np
from numba import njit, uint64

U0 = np.uint64(0)
U1 = np.uint64(1)
U63 = np.uint64(63)
URED = np.uint64(0x1B)  # low bits of x^64 + x^4 + x^3 + x + 1


@njit(uint64(uint64, uint64), cache=True)
def _mul(a, b):
    r = U0
    for _ in range(64):
        r ^= a * (b & U1)
        hi = a >> U63
        a = (a << U1) ^ (hi * URED)
        b >>= U1
    return r


@njit(uint64(uint64), cache=True)
def _inv(a):
    # a^(2^64 - 2) by square-and-multiply
    result = U1
    base = _mul(a, a)
    for _ in range(63):
        result = _mul(result, base)
        base = _mul(base, base)
    return result


@njit(cache=True)
def mul_vec(a, b):
    out = np.empty(a.size, dtype=np.uint64)
    for i in range(a.size):
        out[i] = _mul(a[i], b[i])
    return out


@njit(cache=True)
def inv_vec(a):
    out = np.empty(a.size, dtype=np.uint64)
    for i in range(a.size):
        out[i] = _inv(a[i])
    return out


@njit(cache=True)
def poly_eval_many(coeffs, xs):
    t = coeffs.size
    ys = np.empty(xs.size, dtype=np.uint64)
    for j in range(xs.size):
        x = xs[j]
        acc = coeffs[t - 1]
        for k in range(t - 2, -1, -1):
            acc = _mul(acc, x) ^ coeffs[k]
        ys[j] = acc
    return ys


@njit(uint64(uint64[:], uint64), cache=True)
def eval_one(coeffs, x):
    acc = U0
    for k in range(coeffs.size - 1, -1, -1):
        acc = _mul(acc, x) ^ coeffs[k]
    return acc


@njit(cache=True)
def _batch_inverse(vals):
    n = vals.size
    prefix = np.empty(n, dtype=np.uint64)
    acc = U1
    for i in range(n):
        acc = _mul(acc, vals[i])
        prefix[i] = acc
    inv_acc = _inv(acc)
    out = np.empty(n, dtype=np.uint64)
    for i in range(n - 1, 0, -1):
        out[i] = _mul(inv_acc, prefix[i - 1])
        inv_acc = _mul(inv_acc, vals[i])
    out[0] = inv_acc
    return out


@njit(cache=True)
def lagrange_coefficients(xs, ys):
    t = xs.size
    m = np.zeros(t + 1, dtype=np.uint64)
    m[0] = U1
    for i in range(t):
        xi = xs[i]
        for k in range(i + 1, 0, -1):
            m[k] = m[k - 1] ^ _mul(m[k], xi)
        m[0] = _mul(m[0], xi)

    quotients = np.empty((t, t), dtype=np.uint64)
    denoms = np.empty(t, dtype=np.uint64)
    for i in range(t):
        xi = xs[i]
        quotients[i, t - 1] = m[t]
        for k in range(t - 2, -1, -1):
            quotients[i, k] = m[k + 1] ^ _mul(quotients[i, k + 1], xi)
        acc = U0
        for k in range(t - 1, -1, -1):
            acc = _mul(acc, xi) ^ quotients[i, k]
        denoms[i] = acc

    inv_denoms = _batch_inverse(denoms)
    coeffs = np.zeros(t, dtype=np.uint64)
    for i in range(t):
        scale = _mul(ys[i], inv_denoms[i])
        for k in range(t):
            coeffs[k] ^= _mul(quotients[i, k], scale)
    return coeffs


@njit(cache=True)
def barycentric_weights(xs):
    t = xs.size
    denoms = np.empty(t, dtype=np.uint64)
    for i in range(t):
        acc = U1
        for j in range(t):
            if j != i:
                acc = _mul(acc, xs[i] ^ xs[j])
        denoms[i] = acc
    return _batch_inverse(denoms)


@njit(uint64(uint64[:], uint64[:], uint64), cache=True)
def barycentric_eval(xs, ys, x):
    t = xs.size
    weights = barycentric_weights(xs)
    diffs = np.empty(t, dtype=np.uint64)
    for i in range(t):
        diffs[i] = x ^ xs[i]
    inv_diffs = _batch_inverse(diffs)
    master = U1
    acc = U0
    for i in range(t):
        master = _mul(master, diffs[i])
        acc ^= _mul(_mul(weights[i], inv_diffs[i]), ys[i])
    return _mul(master, acc)
