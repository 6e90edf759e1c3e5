"""Security math: combination counts, guessing probabilities, secrecy oracle."""

import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from scattermem.analysis import (
    SecurityParams,
    comb,
    p1,
    p1_exact,
    p2,
    secrecy_exhaustive,
)
from scattermem.codec import CodecParams


def pascal_oracle(n_max):
    """Independent big-integer Pascal triangle."""
    rows = [[1]]
    for n in range(1, n_max + 1):
        prev = rows[-1]
        rows.append(
            [1] + [prev[i - 1] + prev[i] for i in range(1, n)] + [1]
        )
    return rows


class TestComb:
    def test_paper_count_exact(self):
        assert comb(32, 16) == 601_080_390
        assert comb(32, 16) > 600_000_000  # "over 600 million"

    def test_edges(self):
        assert comb(10, 0) == 1
        assert comb(10, 10) == 1

    def test_pascal_rule_up_to_64(self):
        rows = pascal_oracle(64)
        for n in range(65):
            for t in range(n + 1):
                assert comb(n, t) == rows[n][t]

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            comb(5, 6)
        with pytest.raises(ValueError):
            comb(-1, 0)


class TestP1:
    def test_paper_value_within_5_percent(self):
        r = p1(SecurityParams(total=2 * 10**9, k=32, t=16))
        assert abs(r.value - 2.65e-23) / 2.65e-23 < 0.05

    def test_log10_consistent(self):
        r = p1(SecurityParams())
        assert r.log10 == pytest.approx(math.log10(r.value), rel=1e-9)

    def test_matches_exact_to_10_digits_small_totals(self):
        for total, k, t in [
            (64, 8, 4),
            (640, 32, 10),
            (2048, 16, 8),
            (10_000, 10, 5),
            (9984, 32, 16),
        ]:
            params = SecurityParams(total=total, k=k, t=t)
            exact = float(p1_exact(params))
            approx = p1(params).value
            assert abs(approx - exact) / exact < 1e-10, (total, k, t)

    def test_degenerate_t0_returns_k_with_warning(self):
        with pytest.warns(UserWarning, match="degenerate"):
            r = p1(SecurityParams(total=64, k=8, t=0))
        assert r.value == 8.0

    def test_indivisible_total_warns_and_floors(self):
        with pytest.warns(UserWarning, match="floor"):
            r = p1(SecurityParams(total=65, k=8, t=4))
        exact = Fraction(8 * math.comb(8, 4), math.comb(65, 4))
        assert r.value == pytest.approx(float(exact), rel=1e-9)

    def test_tiny_degenerate_cases_match_exact(self):
        # single-block memories and similar edge geometries
        for total, k, t in [(64, 64, 1), (48, 16, 3), (320, 32, 8)]:
            params = SecurityParams(total=total, k=k, t=t)
            assert p1(params).value == pytest.approx(
                float(p1_exact(params)), rel=1e-9
            )

    def test_t_larger_than_per_block_is_probability_zero(self):
        with pytest.warns(UserWarning, match="probability 0"):
            r = p1(SecurityParams(total=64, k=32, t=3))
        assert r.value == 0.0
        assert p1_exact(SecurityParams(total=64, k=32, t=3)) == 0


class TestP2:
    def test_direct_substitution_n1(self):
        assert p2(SecurityParams(t=16, d=16, s=4, n_accesses=1)) == 1 / 128

    def test_n2(self):
        assert p2(SecurityParams(n_accesses=2)) == pytest.approx((1 / 256) ** 2)

    def test_strictly_decreasing_in_n(self):
        vals = [p2(SecurityParams(n_accesses=n)) for n in range(1, 21)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(ValueError):
            p2(SecurityParams(t=0, d=0, n_accesses=1))


class TestSecrecyOracle:
    def test_t2_passes(self):
        v = secrecy_exhaustive(CodecParams(k=6, t=2, w=1, n_seed=0))
        assert v.passed
        assert v.views_checked == 6

    def test_t3_passes(self):
        v = secrecy_exhaustive(CodecParams(k=8, t=3, w=1, n_seed=0))
        assert v.passed
        assert v.views_checked == 28

    def test_zero_x_sabotage_fails(self):
        v = secrecy_exhaustive(
            CodecParams(k=4, t=2, w=1, n_seed=0), xs=[0, 5, 9, 200]
        )
        assert not v.passed
        assert "x=0" in v.detail

    def test_zero_x_sabotage_fails_t3(self):
        v = secrecy_exhaustive(
            CodecParams(k=4, t=3, w=1, n_seed=0), xs=[0, 5, 9, 200]
        )
        assert not v.passed

    def test_large_parameters_refused(self):
        with pytest.raises(ValueError, match="tractable"):
            secrecy_exhaustive(CodecParams(k=32, t=16, w=8, n_seed=1))

    def test_duplicate_xs_rejected(self):
        with pytest.raises(ValueError):
            secrecy_exhaustive(
                CodecParams(k=3, t=2, w=1, n_seed=0), xs=[1, 1, 2]
            )
