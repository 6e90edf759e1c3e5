"""Trace generation and parsing."""

import gzip

import numpy as np
import pytest
from scipy import stats as scistats

from scattermem.workloads import (
    AccessEvent,
    TraceError,
    TraceSpec,
    events_of,
    gen_trace,
    load_trace,
    parse_trace,
    write_trace,
)


class TestGenerate:
    def test_sequential_stride_one(self):
        spec = TraceSpec(kind="seq", count=4, read_fraction=1.0)
        is_read, addrs = gen_trace(spec, 100)
        assert addrs.tolist() == [0, 1, 2, 3]
        assert is_read.all()

    def test_sequential_wraps(self):
        spec = TraceSpec(kind="seq", count=5, stride=3, read_fraction=1.0)
        _, addrs = gen_trace(spec, 7)
        assert addrs.tolist() == [0, 3, 6, 2, 5]

    def test_random_deterministic_per_seed(self):
        spec = TraceSpec(kind="rand", count=1000, seed=42)
        a = gen_trace(spec, 512)
        b = gen_trace(spec, 512)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_random_uniform_chi_square(self):
        spec = TraceSpec(kind="rand", count=100_000, seed=7)
        _, addrs = gen_trace(spec, 1024)
        counts = np.bincount(addrs, minlength=1024)
        expected = len(addrs) / 1024
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        p = 1 - scistats.chi2.cdf(chi2, df=1023)
        assert p > 0.01

    def test_exact_count(self):
        for kind in ("seq", "rand", "conv", "dlrm"):
            spec = TraceSpec(kind=kind, count=777, seed=1)
            is_read, addrs = gen_trace(spec, 256)
            assert len(addrs) == 777 and len(is_read) == 777
            assert addrs.min() >= 0 and addrs.max() < 256

    def test_read_fraction_within_3_sigma(self):
        spec = TraceSpec(kind="rand", count=10_000, read_fraction=0.7, seed=3)
        is_read, _ = gen_trace(spec, 64)
        reads = int(is_read.sum())
        sigma = np.sqrt(10_000 * 0.7 * 0.3)
        assert abs(reads - 7000) <= 3 * sigma

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError):
            TraceSpec(kind="zipf")


class TestParse:
    def test_basic_lines(self, tmp_path):
        p = tmp_path / "t.trace"
        p.write_text("R 0x40\nW 0x80\n")
        events = list(parse_trace(p))
        assert events == [AccessEvent("R", 1), AccessEvent("W", 2)]

    def test_comments_and_blanks_skipped(self, tmp_path):
        p = tmp_path / "t.trace"
        p.write_text("# c\n\nR 0x0\n")
        assert list(parse_trace(p)) == [AccessEvent("R", 0)]

    def test_malformed_op_reports_line(self, tmp_path):
        p = tmp_path / "t.trace"
        p.write_text("X 0x0\n")
        with pytest.raises(TraceError, match=":1:"):
            list(parse_trace(p))

    def test_bad_address_reports_line(self, tmp_path):
        p = tmp_path / "t.trace"
        p.write_text("R 0x0\nW zzz\n")
        with pytest.raises(TraceError, match=":2:"):
            list(parse_trace(p))

    def test_decimal_addresses(self, tmp_path):
        p = tmp_path / "t.trace"
        p.write_text("R 128\n")
        assert list(parse_trace(p)) == [AccessEvent("R", 2)]

    def test_gzip_by_extension(self, tmp_path):
        p = tmp_path / "t.trace.gz"
        with gzip.open(p, "wt") as fh:
            fh.write("R 0x40\n")
        assert list(parse_trace(p)) == [AccessEvent("R", 1)]


class TestRoundtrip:
    def test_write_then_parse(self, tmp_path):
        spec = TraceSpec(kind="rand", count=200, seed=5)
        is_read, addrs = gen_trace(spec, 64)
        p = tmp_path / "out.trace"
        write_trace(events_of(is_read, addrs), p)
        back_r, back_a = load_trace(
            TraceSpec(kind="file", path=str(p)), 64
        )
        assert np.array_equal(back_r, is_read)
        assert np.array_equal(back_a, addrs)

    def test_load_rejects_out_of_range(self, tmp_path):
        p = tmp_path / "t.trace"
        p.write_text("R 0x10000\n")
        with pytest.raises(TraceError, match="outside geometry"):
            load_trace(TraceSpec(kind="file", path=str(p)), 16)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "t.trace"
        p.write_text("# nothing\n")
        with pytest.raises(TraceError, match="no events"):
            load_trace(TraceSpec(kind="file", path=str(p)), 16)
