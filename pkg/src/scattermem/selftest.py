"""Quick cross-module invariant suite behind ``scattermem selftest``.

A fast subset of the property checks from the test suite, runnable without
pytest: field algebra, codec roundtrip and tamper detection, layout
consistency, stash watermarks, Path ORAM path invariants, controller access
shape, the security formulas, and engine determinism.  Each check prints a
PASS/FAIL line; the exit code is the failure count.
"""

import numpy as np

from . import field
from .analysis import SecurityParams, comb, p1, p1_exact, secrecy_exhaustive
from .codec import CodecParams, SeedContext, Share, reconstruct, segment_block
from .controller import SsmConfig, SsmController
from .engine import ExperimentConfig, compare, to_csv
from .layout import GeometryConfig, init_layout
from .pathoram import OramConfig, PathOram
from .stash import StashConfig, needs_shuffle
from .workloads import TraceSpec


def _check_field():
    rng = np.random.default_rng(1)
    for _ in range(200):
        a, b, c = (int(v) for v in rng.integers(0, 2**64, 3, dtype=np.uint64))
        assert field.gf_mul(a, field.gf_add(b, c)) == field.gf_add(
            field.gf_mul(a, b), field.gf_mul(a, c)
        ), "distributivity"
        if a:
            assert field.gf_mul(a, field.gf_inv(a)) == 1, "inverse"
    assert field.gf_mul(2, 3) == 6


def _check_codec():
    params = CodecParams()
    rng = np.random.default_rng(2)
    ctx = SeedContext(seed_key=12345, logical_addr=7, write_counter=3)
    block = bytes(rng.integers(0, 256, 64, dtype=np.uint8))
    shares = segment_block(block, params, ctx, rng)
    idx = rng.choice(params.k, params.t, replace=False)
    sub = [shares[int(i)] for i in idx]
    out, ok = reconstruct(sub, params, ctx)
    assert out == block and ok, "roundtrip"
    bad = list(sub)
    bad[0] = Share(bad[0].x, bad[0].y ^ 1)
    _, ok = reconstruct(bad, params, ctx)
    assert not ok, "corruption must fail the check"
    stale = SeedContext(seed_key=12345, logical_addr=7, write_counter=4)
    _, ok = reconstruct(sub, params, stale)
    assert not ok, "stale counter must fail the check"


def _check_layout():
    rng = np.random.default_rng(3)
    m = init_layout(GeometryConfig(1, 4, 64), CodecParams(), rng)
    occupied = m.occupied_count()
    assert occupied == 32, f"expected 32 occupied, got {occupied}"
    m.check_consistency()


def _check_stash():
    cfg = StashConfig()
    assert needs_shuffle(cfg, 24576) and not needs_shuffle(cfg, 24560)


def _check_pathoram():
    cfg = OramConfig(height=4)
    rng = np.random.default_rng(4)
    o = PathOram(cfg, int(cfg.capacity_blocks * 0.9), rng)
    for _ in range(500):
        o.access("R", int(rng.integers(0, o.n_blocks)))
    o.check_invariants()
    assert cfg.path_blocks == 16


def _check_controller():
    cfg = SsmConfig(geom=GeometryConfig(64))
    rng = np.random.default_rng(5)
    c = SsmController(cfg, rng, record_transactions=True)
    res = c.ssm_read(0)
    assert res.reads == 32 and res.writes == 32, "constant access shape"
    payload = bytes(range(64))
    c.ssm_write(1, payload)
    back = c.ssm_read(1)
    assert back.data == payload and back.integrity, "write/read roundtrip"
    c.map.check_consistency()


def _check_analysis():
    assert comb(32, 16) == 601080390
    r = p1(SecurityParams())
    assert abs(r.value - 2.65e-23) / 2.65e-23 < 0.05, "guessing probability"
    small = SecurityParams(total=2048, k=16, t=8)
    exact = float(p1_exact(small))
    assert abs(p1(small).value - exact) / exact < 1e-10
    v = secrecy_exhaustive(CodecParams(k=4, t=2, w=1, n_seed=0))
    assert v.passed, "secrecy enumeration"


def _check_engine():
    ecfg = ExperimentConfig(
        logical_blocks=64,
        trace=TraceSpec(kind="rand", count=64, seed=9),
        oram=OramConfig(height=8),
        seed=9,
    )
    a = to_csv(compare(["np", "ssm"], ecfg))
    b = to_csv(compare(["np", "ssm"], ecfg))
    assert a == b, "determinism"
    assert ",np," in a and a.strip().splitlines()[1:], "np row present"


CHECKS = [
    ("field algebra", _check_field),
    ("codec roundtrip + tamper detection", _check_codec),
    ("layout placement", _check_layout),
    ("stash watermarks", _check_stash),
    ("path oram invariants", _check_pathoram),
    ("controller access shape", _check_controller),
    ("security formulas", _check_analysis),
    ("engine determinism", _check_engine),
]


def run_all(verbose=True):
    failures = 0
    for name, fn in CHECKS:
        try:
            fn()
            if verbose:
                print(f"PASS  {name}")
        except Exception as exc:  # report and continue
            failures += 1
            if verbose:
                print(f"FAIL  {name}: {exc}")
    if verbose:
        print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return failures
