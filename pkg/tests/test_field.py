"""GF(2^64) scalar arithmetic against independent bit-level oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scattermem import field

MASK64 = (1 << 64) - 1
MODULUS = (1 << 64) | 0x1B  # x^64 + x^4 + x^3 + x + 1, all 65 bits


def oracle_clmul(a, b):
    """Schoolbook carry-less multiply: XOR of shifted copies, no reduction."""
    acc = 0
    for bit in range(b.bit_length()):
        if (b >> bit) & 1:
            acc ^= a << bit
    return acc


def oracle_reduce(v):
    """Polynomial long division remainder modulo the full 65-bit modulus."""
    while v.bit_length() > 64:
        v ^= MODULUS << (v.bit_length() - 65)
    return v


def oracle_mul(a, b):
    return oracle_reduce(oracle_clmul(a, b))


def oracle_pow(a, n):
    """Square-and-multiply built purely on the oracle multiply."""
    result = 1
    base = a
    while n:
        if n & 1:
            result = oracle_mul(result, base)
        base = oracle_mul(base, base)
        n >>= 1
    return result


class TestAdd:
    def test_xor_definition(self):
        assert field.gf_add(0x5, 0x3) == 0x6

    def test_additive_identity(self, rng):
        for _ in range(100):
            a = int(rng.integers(0, 2**64, dtype=np.uint64))
            assert field.gf_add(a, 0) == a

    def test_characteristic_two(self, rng):
        for _ in range(100):
            a = int(rng.integers(0, 2**64, dtype=np.uint64))
            assert field.gf_add(a, a) == 0


class TestMul:
    def test_multiplicative_identity(self, rng):
        for _ in range(100):
            a = int(rng.integers(0, 2**64, dtype=np.uint64))
            assert field.gf_mul(a, 1) == a

    def test_small_product_no_reduction(self):
        # x * (x + 1) = x^2 + x, no bits near the modulus
        assert field.gf_mul(0x2, 0x3) == 0x6
        assert field.gf_mul(0x2, 0x3) == oracle_mul(0x2, 0x3)

    def test_exhaustive_8bit_against_oracle(self):
        for a in range(256):
            for b in range(256):
                assert field.gf_mul(a, b) == oracle_mul(a, b), (a, b)

    def test_wide_random_against_oracle(self, rng):
        for _ in range(500):
            a = int(rng.integers(0, 2**64, dtype=np.uint64))
            b = int(rng.integers(0, 2**64, dtype=np.uint64))
            assert field.gf_mul(a, b) == oracle_mul(a, b)

    def test_range_check(self):
        with pytest.raises(ValueError):
            field.gf_mul(1 << 64, 1)


class TestInv:
    def test_one_is_self_inverse(self):
        assert field.gf_inv(1) == 1

    def test_inverse_definition_randomized(self, rng):
        for _ in range(10_000):
            a = int(rng.integers(1, 2**64, dtype=np.uint64))
            assert field.gf_mul(a, field.gf_inv(a)) == 1

    def test_inv_of_two_matches_exponentiation_oracle(self):
        expected = oracle_pow(0x2, 2**64 - 2)
        assert field.gf_inv(0x2) == expected
        assert oracle_mul(0x2, expected) == 1

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            field.gf_inv(0)


class TestAlgebra:
    def test_distributivity_randomized(self, rng):
        # a * (b + c) == a*b + a*c over 10^4 random triples
        triples = rng.integers(0, 2**64, size=(10_000, 3), dtype=np.uint64)
        for a, b, c in triples.tolist():
            left = field.gf_mul(a, field.gf_add(b, c))
            right = field.gf_add(field.gf_mul(a, b), field.gf_mul(a, c))
            assert left == right

    @settings(max_examples=200, deadline=None)
    @given(
        st.integers(0, MASK64),
        st.integers(0, MASK64),
        st.integers(0, MASK64),
    )
    def test_associativity(self, a, b, c):
        assert field.gf_mul(field.gf_mul(a, b), c) == field.gf_mul(
            a, field.gf_mul(b, c)
        )

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, MASK64), st.integers(0, MASK64))
    def test_commutativity(self, a, b):
        assert field.gf_mul(a, b) == field.gf_mul(b, a)

    def test_pow_matches_oracle(self, rng):
        for _ in range(50):
            a = int(rng.integers(0, 2**64, dtype=np.uint64))
            n = int(rng.integers(0, 1000))
            assert field.gf_pow(a, n) == oracle_pow(a, n)
