"""Counter-mode memory-protection cost model and the non-protected baseline.

Models an SGX-style engine: per-block version numbers (VN) feed a keystream,
a per-block MAC authenticates ciphertext, and a Merkle tree over the VN
storage (arity 8, root tag held on-chip) defeats replay.  VN and MAC
metadata live in separate 32 KB 4-way LRU caches; Merkle nodes share the VN
cache.  A keyed multiply-xor-shift mix stands in for AES and the hash: the
model exists to count transactions and latency charges, not to provide
cryptography.  Each keystream, MAC, or node-hash computation is charged as
one AES-latency unit.

Transactions are tagged with an address space so tests can count data vs
metadata traffic: spaces are DATA, VN, MAC, and NODE0.. for Merkle levels.
"""

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .codec import _mix64

SPACE_DATA = "data"
SPACE_VN = "vn"
SPACE_MAC = "mac"


def space_node(level):
    return f"node{level}"


@dataclass(frozen=True)
class CtrConfig:
    vn_bits: int = 56
    mac_bits: int = 56
    tree_arity: int = 8
    metadata_cache_bytes: int = 32768  # each, for the VN and MAC caches
    cache_ways: int = 4
    line_bytes: int = 64
    aes_latency_cycles: int = 40
    clock_ghz: float = 3.0

    def __post_init__(self):
        if self.tree_arity < 2:
            raise ValueError("tree_arity must be >= 2")

    @property
    def rekey_threshold(self):
        return 1 << self.vn_bits

    @property
    def aes_ns(self):
        return self.aes_latency_cycles / self.clock_ghz


class SetAssocCache:
    """Set-associative LRU cache over integer line keys."""

    def __init__(self, capacity_bytes, ways, line_bytes=64):
        n_lines = capacity_bytes // line_bytes
        self.n_sets = max(1, n_lines // ways)
        self.ways = ways
        self._sets = [[] for _ in range(self.n_sets)]  # MRU first

    def _set_of(self, key):
        return self._sets[hash(key) % self.n_sets]

    def lookup(self, key):
        ways = self._set_of(key)
        if key in ways:
            ways.remove(key)
            ways.insert(0, key)
            return True
        return False

    def insert(self, key):
        ways = self._set_of(key)
        if key in ways:
            ways.remove(key)
        elif len(ways) >= self.ways:
            ways.pop()
        ways.insert(0, key)

    def flush(self):
        for ways in self._sets:
            ways.clear()


class CtrResult(NamedTuple):
    data: Optional[bytes]
    reads: int
    writes: int
    aes_ops: int
    mac_alarm: bool
    replay_alarm: bool
    transactions: Optional[List[Tuple[str, str, int]]]

    @property
    def alarm(self):
        return self.mac_alarm or self.replay_alarm


class CtrModel:
    """Functional model over n_blocks 64-byte lines."""

    def __init__(self, cfg, n_blocks, rng, record_transactions=False):
        self.cfg = cfg
        self.n = n_blocks
        self.record = record_transactions
        self.key = int(rng.integers(0, 2**64, dtype=np.uint64))
        arity = cfg.tree_arity
        self.vns = np.zeros(n_blocks, dtype=np.uint64)
        self.macs = np.zeros(n_blocks, dtype=np.uint64)
        self.cipher = np.zeros((n_blocks, 8), dtype=np.uint64)  # 64B as 8 words
        self.vn_lines = max(1, math.ceil(n_blocks / arity))
        # Merkle levels above the VN lines; the last stored level has one
        # node whose hash is the on-chip root tag.
        sizes = []
        size = self.vn_lines
        while size > 1:
            size = math.ceil(size / arity)
            sizes.append(size)
        self.level_sizes = sizes
        self.height = len(sizes)
        self.nodes = [np.zeros(size * arity, dtype=np.uint64) for size in sizes]
        self.vn_cache = SetAssocCache(
            cfg.metadata_cache_bytes, cfg.cache_ways, cfg.line_bytes
        )
        self.mac_cache = SetAssocCache(
            cfg.metadata_cache_bytes, cfg.cache_ways, cfg.line_bytes
        )
        self.rekey_events = 0
        self._mac_mask = (1 << cfg.mac_bits) - 1
        for addr in range(n_blocks):
            self.cipher[addr] = self._keystream(addr, 0)  # zero plaintext
            self.macs[addr] = self._mac_of(addr, 0, self.cipher[addr])
        self._rebuild_tree()

    # -- keyed mixing primitives ------------------------------------------

    def _keystream(self, addr, vn):
        words = np.empty(8, dtype=np.uint64)
        h = _mix64(self.key ^ _mix64(addr * 8 + 1) ^ _mix64(vn))
        for i in range(8):
            h = _mix64(h + i + 1)
            words[i] = h
        return words

    def _mac_of(self, addr, vn, cipher_words):
        h = _mix64(self.key ^ _mix64(addr * 8 + 3) ^ _mix64(vn))
        for w in cipher_words:
            h = _mix64(h ^ int(w))
        return h & self._mac_mask

    def _leaf_hash(self, line):
        lo = line * self.cfg.tree_arity
        hi = min(lo + self.cfg.tree_arity, self.n)
        h = _mix64(self.key ^ _mix64(line * 8 + 5))
        for vn in self.vns[lo:hi]:
            h = _mix64(h ^ int(vn))
        return h

    def _node_hash(self, level, idx):
        arity = self.cfg.tree_arity
        h = _mix64(self.key ^ _mix64((level + 1) * 2**32 + idx * 8 + 7))
        for tag in self.nodes[level][idx * arity : (idx + 1) * arity]:
            h = _mix64(h ^ int(tag))
        return h

    def _rebuild_tree(self):
        if self.height:
            for line in range(self.vn_lines):
                self.nodes[0][line] = self._leaf_hash(line)
            for lvl in range(1, self.height):
                for idx in range(self.level_sizes[lvl - 1]):
                    self.nodes[lvl][idx] = self._node_hash(lvl - 1, idx)
            self.root_tag = self._node_hash(self.height - 1, 0)
        else:
            self.root_tag = self._leaf_hash(0)

    # -- VN verification walk ---------------------------------------------

    def _verify_vn_line(self, tx, line):
        """Walk from the VN line upward until a cached-verified node or root.

        Returns (extra_reads, aes_ops, replay_alarm).  Reads the VN line
        itself only on a VN-cache miss; Merkle nodes live in the VN cache.
        """
        reads = 0
        aes = 0
        if self.vn_cache.lookup(("vn", line)):
            return reads, aes, False
        reads += 1
        tx.append(("R", SPACE_VN, line))
        self.vn_cache.insert(("vn", line))
        child_tag = self._leaf_hash(line)
        aes += 1
        child_idx = line
        arity = self.cfg.tree_arity
        for lvl in range(self.height):
            parent = child_idx // arity
            hit = self.vn_cache.lookup(("node", lvl, parent))
            if not hit:
                reads += 1
                tx.append(("R", space_node(lvl), parent))
                self.vn_cache.insert(("node", lvl, parent))
            stored = int(self.nodes[lvl][parent * arity + child_idx % arity])
            if stored != child_tag:
                return reads, aes, True
            if hit:
                return reads, aes, False
            child_tag = self._node_hash(lvl, parent)
            aes += 1
            child_idx = parent
        return reads, aes, child_tag != self.root_tag

    def _update_vn_path(self, tx, line):
        """Write-through update of the Merkle chain after a VN change."""
        writes = 1
        tx.append(("W", SPACE_VN, line))
        self.vn_cache.insert(("vn", line))
        child_tag = self._leaf_hash(line)
        aes = 1
        child_idx = line
        arity = self.cfg.tree_arity
        for lvl in range(self.height):
            parent = child_idx // arity
            self.nodes[lvl][parent * arity + child_idx % arity] = child_tag
            child_tag = self._node_hash(lvl, parent)
            aes += 1
            writes += 1
            tx.append(("W", space_node(lvl), parent))
            self.vn_cache.insert(("node", lvl, parent))
            child_idx = parent
        self.root_tag = child_tag
        return writes, aes

    # -- operations ---------------------------------------------------------

    def read(self, addr):
        if not 0 <= addr < self.n:
            raise ValueError(f"address {addr} out of range")
        tx = []
        reads = 1
        tx.append(("R", SPACE_DATA, addr))
        vn = int(self.vns[addr])
        ks = self._keystream(addr, vn)
        aes = 1
        plain = (self.cipher[addr] ^ ks).astype("<u8").tobytes()
        mac_line = addr // self.cfg.tree_arity
        if not self.mac_cache.lookup(("mac", mac_line)):
            reads += 1
            tx.append(("R", SPACE_MAC, mac_line))
            self.mac_cache.insert(("mac", mac_line))
        aes += 1
        mac_alarm = self._mac_of(addr, vn, self.cipher[addr]) != int(self.macs[addr])
        vn_line = addr // self.cfg.tree_arity
        extra, walk_aes, replay = self._verify_vn_line(tx, vn_line)
        reads += extra
        aes += walk_aes
        return CtrResult(
            plain, reads, 0, aes, mac_alarm, replay, tx if self.record else None
        )

    def write(self, addr, data):
        if not 0 <= addr < self.n:
            raise ValueError(f"address {addr} out of range")
        buf = np.frombuffer(bytes(data), dtype="<u8")
        if buf.size != 8:
            raise ValueError("data must be 64 bytes")
        tx = []
        vn_line = addr // self.cfg.tree_arity
        extra, aes, replay = self._verify_vn_line(tx, vn_line)
        reads = extra
        if int(self.vns[addr]) + 1 >= self.cfg.rekey_threshold:
            self.rekey_events += 1
            self.vns[addr] = 0
        else:
            self.vns[addr] += np.uint64(1)
        vn = int(self.vns[addr])
        ks = self._keystream(addr, vn)
        aes += 1
        self.cipher[addr] = buf.astype(np.uint64) ^ ks
        self.macs[addr] = self._mac_of(addr, vn, self.cipher[addr])
        aes += 1
        writes = 2
        tx.append(("W", SPACE_DATA, addr))
        tx.append(("W", SPACE_MAC, addr // self.cfg.tree_arity))
        self.mac_cache.insert(("mac", addr // self.cfg.tree_arity))
        w_extra, w_aes = self._update_vn_path(tx, vn_line)
        writes += w_extra
        aes += w_aes
        return CtrResult(
            None, reads, writes, aes, False, replay, tx if self.record else None
        )

    # -- test harness hooks -------------------------------------------------

    def snapshot(self, addr):
        """Capture (cipher, vn, mac) for a later replay injection."""
        return (
            self.cipher[addr].copy(),
            int(self.vns[addr]),
            int(self.macs[addr]),
        )

    def inject(self, addr, snapshot):
        """Overwrite memory with an old (cipher, vn, mac) triple."""
        cipher, vn, mac = snapshot
        self.cipher[addr] = cipher
        self.vns[addr] = np.uint64(vn)
        self.macs[addr] = np.uint64(mac)

    def flush_caches(self):
        self.vn_cache.flush()
        self.mac_cache.flush()


class NpModel:
    """Non-protected passthrough: one transaction per access."""

    def __init__(self, n_blocks):
        self.n = n_blocks
        self.data = np.zeros((n_blocks, 8), dtype=np.uint64)

    def read(self, addr):
        if not 0 <= addr < self.n:
            raise ValueError(f"address {addr} out of range")
        return CtrResult(
            self.data[addr].astype("<u8").tobytes(),
            1, 0, 0, False, False,
            [("R", SPACE_DATA, addr)],
        )

    def write(self, addr, data):
        if not 0 <= addr < self.n:
            raise ValueError(f"address {addr} out of range")
        buf = np.frombuffer(bytes(data), dtype="<u8")
        self.data[addr] = buf.astype(np.uint64)
        return CtrResult(None, 0, 1, 0, False, False, [("W", SPACE_DATA, addr)])
