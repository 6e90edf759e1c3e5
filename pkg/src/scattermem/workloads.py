"""Trace generation and trace-file parsing.

Synthetic kinds: ``seq`` walks addresses with a stride, ``rand`` draws them
uniformly; ``conv`` is a strided multi-pass sweep shaped like convolution
weight streaming and ``dlrm`` mixes a sequential dense region with random
embedding-style lookups.  Text traces use one access per line, ``R <addr>``
or ``W <addr>`` with hex or decimal byte addresses; addresses quantize to
64-byte blocks.  Files ending in ``.gz`` are transparently decompressed.
"""

import gzip
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

import numpy as np

BLOCK_BYTES = 64

OP_READ = "R"
OP_WRITE = "W"

KINDS = ("seq", "rand", "conv", "dlrm", "file")


class AccessEvent(NamedTuple):
    op: str
    addr: int


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceSpec:
    kind: str = "rand"
    count: int = 100000
    read_fraction: float = 0.5
    stride: int = 1
    seed: int = 0
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trace kind {self.kind!r}; choose from {KINDS}")
        if self.kind != "file" and self.count <= 0:
            raise ValueError("count must be positive")
        if not 0 <= self.read_fraction <= 1:
            raise ValueError("read_fraction must be in [0, 1]")
        if self.kind == "file" and not self.path:
            raise ValueError("file traces need a path")


def _ops_for(spec, rng, count):
    if spec.read_fraction >= 1.0:
        return np.ones(count, dtype=bool)
    if spec.read_fraction <= 0.0:
        return np.zeros(count, dtype=bool)
    return rng.random(count) < spec.read_fraction


def gen_trace(spec, logical_blocks):
    """Synthetic trace as parallel arrays (is_read: bool[], addr: int64[])."""
    if logical_blocks < 1:
        raise ValueError("geometry must contain at least one block")
    rng = np.random.default_rng(spec.seed)
    n = spec.count
    if spec.kind == "seq":
        addrs = (np.arange(n, dtype=np.int64) * spec.stride) % logical_blocks
    elif spec.kind == "rand":
        addrs = rng.integers(0, logical_blocks, size=n, dtype=np.int64)
    elif spec.kind == "conv":
        # repeated strided sweeps over a window, like weight/feature reuse
        window = max(1, logical_blocks // 4)
        stride = max(1, spec.stride)
        sweep = (np.arange(n, dtype=np.int64) * stride) % window
        base = (np.arange(n, dtype=np.int64) // window) % max(
            1, logical_blocks - window
        )
        addrs = (base + sweep) % logical_blocks
    elif spec.kind == "dlrm":
        # half dense sequential, half random embedding-table lookups
        dense = logical_blocks // 2
        emb_lo = dense
        pick = rng.random(n) < 0.5
        seq_part = np.arange(n, dtype=np.int64) % max(1, dense)
        rnd_part = rng.integers(emb_lo, logical_blocks, size=n, dtype=np.int64)
        addrs = np.where(pick, rnd_part, seq_part)
    else:
        raise ValueError(f"gen_trace cannot generate kind {spec.kind!r}")
    is_read = _ops_for(spec, rng, n)
    return is_read, addrs


def parse_trace(path):
    """Iterate AccessEvents from a text trace file.

    Lines are ``R <addr>`` / ``W <addr>``; ``#`` comments and blank lines
    are skipped; addresses are divided by 64 into block ids.
    """
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 2 or parts[0] not in (OP_READ, OP_WRITE):
                raise TraceError(f"{path}:{lineno}: malformed trace line {text!r}")
            try:
                byte_addr = int(parts[1], 0)
            except ValueError:
                raise TraceError(
                    f"{path}:{lineno}: bad address {parts[1]!r}"
                ) from None
            if byte_addr < 0:
                raise TraceError(f"{path}:{lineno}: negative address")
            yield AccessEvent(parts[0], byte_addr // BLOCK_BYTES)


def load_trace(spec, logical_blocks):
    """Resolve a spec to (is_read, addrs) arrays, from file or generator."""
    if spec.kind == "file":
        ops = []
        addrs = []
        for ev in parse_trace(spec.path):
            if ev.addr >= logical_blocks:
                raise TraceError(
                    f"trace address block {ev.addr} outside geometry "
                    f"({logical_blocks} blocks)"
                )
            ops.append(ev.op == OP_READ)
            addrs.append(ev.addr)
        if not addrs:
            raise TraceError(f"trace {spec.path} contains no events")
        return np.array(ops, dtype=bool), np.array(addrs, dtype=np.int64)
    return gen_trace(spec, logical_blocks)


def write_trace(events, path):
    """Write AccessEvents as text, one ``op 0x<byteaddr>`` per line."""
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt") as fh:
        for ev in events:
            fh.write(f"{ev.op} {ev.addr * BLOCK_BYTES:#x}\n")


def events_of(is_read, addrs):
    for r, a in zip(is_read.tolist(), addrs.tolist()):
        yield AccessEvent(OP_READ if r else OP_WRITE, a)
