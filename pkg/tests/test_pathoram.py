"""Path ORAM: transaction counts, path invariant, stash behavior."""

import numpy as np
import pytest
from scipy import stats as scistats

from scattermem.pathoram import OramConfig, OramStashOverflow, PathOram


def toy(rng, height=4, fill=0.9):
    cfg = OramConfig(height=height)
    n = int(cfg.capacity_blocks * fill)
    return PathOram(cfg, n, rng), cfg


class TestConfig:
    def test_default_access_overhead_is_108(self):
        cfg = OramConfig()
        assert cfg.height == 27 and cfg.bucket_size == 4
        assert cfg.path_blocks == 108

    def test_capacity_respects_utilization(self):
        cfg = OramConfig(height=4)
        assert cfg.num_buckets == 30  # depths 1..4 of a binary tree
        assert cfg.capacity_blocks == 60


class TestInit:
    def test_zero_blocks_all_dummy(self, rng):
        o = PathOram(OramConfig(height=4), 0, rng)
        o.check_invariants()

    def test_over_capacity_rejected(self, rng):
        cfg = OramConfig(height=4)
        with pytest.raises(ValueError):
            PathOram(cfg, cfg.capacity_blocks + 1, rng)

    def test_every_block_readable_immediately(self, rng):
        o, cfg = toy(rng)
        for b in range(o.n_blocks):
            res = o.access("R", b)
            assert res.reads == cfg.path_blocks
        o.check_invariants()


class TestAccess:
    def test_transaction_count_constant(self, rng):
        o, cfg = toy(rng)
        for _ in range(200):
            res = o.access("R", int(rng.integers(0, o.n_blocks)))
            assert (res.reads, res.writes) == (cfg.path_blocks, cfg.path_blocks)

    def test_default_height_counts_108(self, rng):
        o = PathOram(OramConfig(), 32, rng, store_data=False)
        reads = o.batch_fetch([5])
        writes = o.batch_finish([5])
        assert (reads, writes) == (108, 108)

    def test_write_read_roundtrip(self, rng):
        o, _ = toy(rng)
        payload = bytes(range(64))
        o.access("W", 3, payload)
        assert o.access("R", 3).data == payload

    def test_remap_draws_fresh_leaf(self, rng):
        o, cfg = toy(rng)
        changes = 0
        for _ in range(200):
            before = int(o.pos[7])
            o.access("R", 7)
            if int(o.pos[7]) != before:
                changes += 1
        # 2^-height chance of drawing the same leaf; nearly all must change
        assert changes >= 180

    def test_batch_counts_scale_with_paths(self, rng):
        o, cfg = toy(rng, height=6, fill=0.5)
        blocks = [0, 1, 2, 3, 4]
        assert o.batch_fetch(blocks) == 5 * cfg.path_blocks
        assert o.batch_finish(blocks) == 5 * cfg.path_blocks
        o.check_invariants()

    def test_unknown_block_rejected(self, rng):
        o, _ = toy(rng)
        with pytest.raises(ValueError):
            o.access("R", o.n_blocks + 1)


class TestInvariants:
    def test_path_invariant_toy_10k_accesses(self):
        rng = np.random.default_rng(123)
        o, _ = toy(rng)
        for i in range(10_000):
            o.access("R", int(rng.integers(0, o.n_blocks)))
            if i % 1000 == 999:
                o.check_invariants()
        o.check_invariants()
        assert o.overflows == 0

    def test_leaf_uniformity_chi_square(self):
        rng = np.random.default_rng(11)
        o, cfg = toy(rng)
        leaves = []
        for _ in range(10_000):
            o.access("R", 0)
            leaves.append(int(o.pos[0]))
        counts = np.bincount(leaves, minlength=cfg.leaves)
        expected = len(leaves) / cfg.leaves
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        p = 1 - scistats.chi2.cdf(chi2, df=cfg.leaves - 1)
        assert p > 0.01, f"leaf choice not uniform (p={p:.4f})"

    def test_stash_bounded_under_load(self):
        rng = np.random.default_rng(31)
        o, cfg = toy(rng, fill=1.0)  # worst case: at capacity
        for _ in range(5000):
            o.access("R", int(rng.integers(0, o.n_blocks)))
        assert o.overflows == 0
        assert o.stash_peak_blocks < cfg.stash_capacity_blocks


class TestBackendEquivalence:
    def test_python_fallback_matches_numba(self):
        # identical rng draws must produce identical position/stash traces
        import subprocess
        import sys

        script = """
import numpy as np
from scattermem.pathoram import OramConfig, PathOram
rng = np.random.default_rng(55)
o = PathOram(OramConfig(height=5), 40, rng)
for i in range(500):
    o.access("R", int(rng.integers(0, 40)))
print(o.pos.tolist())
print(sorted(o.stash_blocks()))
print(o.stash_peak_blocks)
"""
        import os

        runs = {}
        for flag in ("0", "1"):
            env = dict(os.environ, SCATTERMEM_NO_NUMBA=flag)
            out = subprocess.run(
                [sys.executable, "-c", script],
                capture_output=True,
                text=True,
                env=env,
                check=True,
            )
            runs[flag] = out.stdout
        assert runs["0"] == runs["1"]
