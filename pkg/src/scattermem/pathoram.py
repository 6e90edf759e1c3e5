"""Functional Path ORAM model.

A binary tree with 2^height leaves; buckets live at depths 1..height, so a
path touches exactly height buckets of ``bucket_size`` block slots each and
an access costs height x bucket_size block reads plus the same number of
write-backs.  (The depth-0 root bucket is omitted: blocks whose new leaf
diverges from the accessed path at the first bit simply wait in the stash
for a later access, which the 32 KB stash absorbs easily at the default
utilization.)

Only real blocks are materialized; bucket occupancy is a sparse hash map
from tree node to packed block ids, so the default height of 27 costs
memory proportional to the block count, not the tree.  The hot access loop
runs under numba with a pure-Python fallback (see ``_accel``).

Block *content* is addressed by block id and never moves; the tree state
models positions, stash occupancy, and transaction counts.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ._accel import USE_NUMBA

BLOCK_BYTES = 64

_EMPTY16 = 0xFFFF
_EMPTY_PACKED = 0xFFFFFFFFFFFFFFFF


class OramStashOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class OramConfig:
    height: int = 27           # leaves = 2^height; a path reads height buckets
    bucket_size: int = 4
    stash_bytes: int = 32768
    utilization: float = 0.5   # fraction of bucket slots that may hold real blocks

    def __post_init__(self):
        if self.height < 1:
            raise ValueError("height must be >= 1")
        if not 1 <= self.bucket_size <= 4:
            raise ValueError("bucket_size must be in 1..4 (packed storage)")
        if not 0 < self.utilization <= 1:
            raise ValueError("utilization must be in (0, 1]")

    @property
    def leaves(self):
        return 1 << self.height

    @property
    def num_buckets(self):
        # depths 1..height of a binary tree
        return (1 << (self.height + 1)) - 2

    @property
    def capacity_blocks(self):
        return int(self.utilization * self.num_buckets * self.bucket_size)

    @property
    def stash_capacity_blocks(self):
        return self.stash_bytes // BLOCK_BYTES

    @property
    def path_blocks(self):
        """Blocks transferred per path direction (the access overhead)."""
        return self.height * self.bucket_size


class OramResult(NamedTuple):
    data: Optional[bytes]
    reads: int
    writes: int


if USE_NUMBA:
    from numba import njit, types, uint64
    from numba.typed import Dict

    _U1 = np.uint64(1)
    _U16 = np.uint64(16)
    _UMASK16 = np.uint64(0xFFFF)
    _UEMPTY = np.uint64(_EMPTY_PACKED)

    @njit(cache=True)
    def _nb_fetch(tree, leaves, height, stash, stash_len):
        base = _U1 << uint64(height)
        for i in range(leaves.size):
            node = base + uint64(leaves[i])
            for _ in range(height):
                if node in tree:
                    packed = tree[node]
                    for z in range(4):
                        bid = (packed >> (_U16 * uint64(z))) & _UMASK16
                        if bid != _UMASK16:
                            stash[stash_len] = np.int64(bid)
                            stash_len += 1
                    del tree[node]
                node >>= _U1
        return stash_len

    @njit(cache=True)
    def _nb_evict(tree, pos, leaves, height, z_cap, stash, stash_len):
        n_nodes = leaves.size * height
        nodes = np.empty(n_nodes, dtype=np.uint64)
        w = 0
        base = _U1 << uint64(height)
        for i in range(leaves.size):
            node = base + uint64(leaves[i])
            for _ in range(height):
                nodes[w] = node
                w += 1
                node >>= _U1
        nodes = np.sort(nodes)
        prev = uint64(0)
        for i in range(n_nodes - 1, -1, -1):  # descending ids = deepest first
            node = nodes[i]
            if node == prev:
                continue
            prev = node
            # levels below this node: leaf ancestor check shifts by k
            k = uint64(0)
            nl = node
            while nl < base:
                nl <<= _U1
                k += _U1
            packed = _UEMPTY
            cnt = 0
            j = 0
            while j < stash_len and cnt < z_cap:
                bid = stash[j]
                if (base + uint64(pos[bid])) >> k == node:
                    shift = _U16 * uint64(cnt)
                    packed &= ~(_UMASK16 << shift)
                    packed |= uint64(bid) << shift
                    cnt += 1
                    stash_len -= 1
                    stash[j] = stash[stash_len]
                else:
                    j += 1
            if cnt > 0:
                tree[node] = packed
        return stash_len

    def _new_tree():
        return Dict.empty(types.uint64, types.uint64)

else:

    def _py_fetch(tree, leaves, height, stash, stash_len):
        base = 1 << height
        for leaf in leaves:
            node = base + int(leaf)
            for _ in range(height):
                blocks = tree.pop(node, None)
                if blocks is not None:
                    for bid in blocks:
                        stash[stash_len] = bid
                        stash_len += 1
                node >>= 1
        return stash_len

    def _py_evict(tree, pos, leaves, height, z_cap, stash, stash_len):
        base = 1 << height
        nodes = set()
        for leaf in leaves:
            node = base + int(leaf)
            for _ in range(height):
                nodes.add(node)
                node >>= 1
        for node in sorted(nodes, reverse=True):
            k = 0
            nl = node
            while nl < base:
                nl <<= 1
                k += 1
            bucket = []
            j = 0
            while j < stash_len and len(bucket) < z_cap:
                bid = int(stash[j])
                if (base + int(pos[bid])) >> k == node:
                    bucket.append(bid)
                    stash_len -= 1
                    stash[j] = stash[stash_len]
                else:
                    j += 1
            if bucket:
                tree[node] = bucket
        return stash_len

    def _new_tree():
        return {}


class PathOram:
    """Path ORAM over ``n_blocks`` real blocks (ids 0..n_blocks-1)."""

    def __init__(self, cfg, n_blocks, rng, store_data=True):
        if n_blocks > cfg.capacity_blocks:
            raise ValueError(
                f"{n_blocks} blocks exceed capacity "
                f"{cfg.capacity_blocks} at utilization {cfg.utilization}"
            )
        if n_blocks >= _EMPTY16:
            raise ValueError(f"block count must stay below {_EMPTY16}")
        self.cfg = cfg
        self.n_blocks = n_blocks
        self.rng = rng
        self.pos = rng.integers(0, cfg.leaves, size=max(n_blocks, 1), dtype=np.int64)
        self.tree = _new_tree()
        self.stash = np.full(n_blocks + 1, -1, dtype=np.int64)
        self.stash_len = 0
        self.data = (
            np.zeros((n_blocks, BLOCK_BYTES), dtype=np.uint8) if store_data else None
        )
        self.stash_peak_blocks = 0
        self.overflows = 0
        self.reads_total = 0
        self.writes_total = 0
        self._batch_leaves = None
        self._init_place()

    # -- setup -----------------------------------------------------------

    def _init_place(self):
        """Greedy placement of every block as deep as possible on its path."""
        base = 1 << self.cfg.height
        occupancy = {}
        order = self.rng.permutation(self.n_blocks)
        for bid in order:
            node = base + int(self.pos[bid])
            placed = False
            for _ in range(self.cfg.height):
                got = occupancy.setdefault(node, [])
                if len(got) < self.cfg.bucket_size:
                    got.append(int(bid))
                    placed = True
                    break
                node >>= 1
            if not placed:
                self.stash[self.stash_len] = int(bid)
                self.stash_len += 1
        for node, blocks in occupancy.items():
            self._tree_set(node, blocks)
        self._note_stash()

    def _tree_set(self, node, blocks):
        if USE_NUMBA:
            packed = _EMPTY_PACKED
            for i, bid in enumerate(blocks):
                packed &= ~(0xFFFF << (16 * i))
                packed |= bid << (16 * i)
            self.tree[np.uint64(node)] = np.uint64(packed)
        else:
            self.tree[node] = list(blocks)

    # -- access ----------------------------------------------------------

    def batch_fetch(self, blocks):
        """Read the paths of the given blocks into the stash.

        Returns the read-transaction count: height x bucket_size per path
        (overlapping buckets are still charged per path, matching the
        constant access overhead).
        """
        blocks = np.asarray(blocks, dtype=np.int64)
        leaves = self.pos[blocks].copy()
        if USE_NUMBA:
            self.stash_len = int(
                _nb_fetch(self.tree, leaves, self.cfg.height, self.stash, self.stash_len)
            )
        else:
            self.stash_len = _py_fetch(
                self.tree, leaves, self.cfg.height, self.stash, self.stash_len
            )
        self._batch_leaves = leaves
        reads = blocks.size * self.cfg.path_blocks
        self.reads_total += reads
        return reads

    def batch_finish(self, blocks):
        """Remap the accessed blocks and write the fetched paths back."""
        blocks = np.asarray(blocks, dtype=np.int64)
        if self._batch_leaves is None or self._batch_leaves.size != blocks.size:
            raise RuntimeError("batch_finish without matching batch_fetch")
        self.pos[blocks] = self.rng.integers(
            0, self.cfg.leaves, size=blocks.size, dtype=np.int64
        )
        if USE_NUMBA:
            self.stash_len = int(
                _nb_evict(
                    self.tree,
                    self.pos,
                    self._batch_leaves,
                    self.cfg.height,
                    self.cfg.bucket_size,
                    self.stash,
                    self.stash_len,
                )
            )
        else:
            self.stash_len = _py_evict(
                self.tree,
                self.pos,
                self._batch_leaves,
                self.cfg.height,
                self.cfg.bucket_size,
                self.stash,
                self.stash_len,
            )
        self._batch_leaves = None
        self._note_stash()
        writes = blocks.size * self.cfg.path_blocks
        self.writes_total += writes
        return writes

    def access(self, op, block, data=None):
        """One full access: fetch path, serve, remap, write path back."""
        if not 0 <= block < self.n_blocks:
            raise ValueError(f"unknown block {block}")
        reads = self.batch_fetch([block])
        out = None
        if self.data is not None:
            if op == "W":
                if data is None:
                    raise ValueError("write needs data")
                buf = np.frombuffer(bytes(data), dtype=np.uint8)
                if buf.size != BLOCK_BYTES:
                    raise ValueError(f"data must be {BLOCK_BYTES} bytes")
                self.data[block] = buf
            out = self.data[block].tobytes()
        writes = self.batch_finish([block])
        return OramResult(out, reads, writes)

    def _note_stash(self):
        self.stash_peak_blocks = max(self.stash_peak_blocks, self.stash_len)
        if self.stash_len > self.cfg.stash_capacity_blocks:
            self.overflows += 1
            raise OramStashOverflow(
                f"stash holds {self.stash_len} blocks, capacity "
                f"{self.cfg.stash_capacity_blocks}"
            )

    # -- inspection ------------------------------------------------------

    def _bucket_blocks(self, node):
        if USE_NUMBA:
            key = np.uint64(node)
            if key not in self.tree:
                return []
            packed = int(self.tree[key])
            return [
                (packed >> (16 * z)) & 0xFFFF
                for z in range(4)
                if ((packed >> (16 * z)) & 0xFFFF) != _EMPTY16
            ]
        return list(self.tree.get(node, []))

    def stash_blocks(self):
        return [int(b) for b in self.stash[: self.stash_len]]

    def check_invariants(self):
        """Every block is in the stash or in a bucket on its mapped path."""
        base = 1 << self.cfg.height
        located = {int(b): "stash" for b in self.stash_blocks()}
        seen = len(located)
        keys = list(self.tree.keys())
        for node in keys:
            blocks = self._bucket_blocks(int(node))
            k = 0
            nl = int(node)
            while nl < base:
                nl <<= 1
                k += 1
            for bid in blocks:
                assert bid not in located, f"block {bid} duplicated"
                path_node = (base + int(self.pos[bid])) >> k
                assert path_node == int(node), (
                    f"block {bid} stored off its path (node {node})"
                )
                located[bid] = "tree"
                seen += 1
        assert seen == self.n_blocks, f"{self.n_blocks - seen} blocks unaccounted"
