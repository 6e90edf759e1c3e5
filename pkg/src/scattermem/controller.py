"""Scattered-memory controller: read/write protocol over the share memory.

Every access fetches exactly t+d physical blocks and writes exactly t+d
back, independent of stash state or operation type, so the transaction
shape is constant.  A read picks t real shares (one of the C(k,t)
combinations, minus stash hits served from the cache), pads with dummy
blocks, reconstructs, and verifies the seed coefficients.  A write
regenerates all k shares under an incremented counter, fetches the k blocks
holding the old shares plus dummies, and lands the new shares one per
fetched block.

Write-back repacks the fetched frames from the stash pool: every fetched
share is remapped to a fresh random slot among the frames, evicted stash
entries fill leftover slots, and random retained residents pad the frames
full.  Evicted entries that find no slot are simply dropped; their cached
value matches their mapped slot, so no write is needed (they were remapped
when their own frame was last fetched).

Variants: ``op_type_protection`` (the "plus" mode) runs reads and writes
through the identical regenerate-all-shares round so the two are
indistinguishable on the bus; ``oram_backend`` delegates every physical
block access to a Path ORAM instance over the share blocks.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .codec import (
    CodecParams,
    SeedContext,
    Share,
    block_to_segments,
    reconstruct_arrays,
    segment_arrays,
    segments_to_block,
)
from .layout import GeometryConfig, ShareLocation, init_layout
from .pathoram import OramConfig, PathOram
from .stash import ShareStash, StashConfig, StashEntry

OP_READ = "R"
OP_WRITE = "W"


class CapacityError(RuntimeError):
    pass


@dataclass(frozen=True)
class SsmConfig:
    codec: CodecParams = field(default_factory=CodecParams)
    geom: GeometryConfig = field(default_factory=lambda: GeometryConfig(1024))
    stash: StashConfig = field(default_factory=StashConfig)
    d: int = 16                       # dummy blocks fetched per access
    op_type_protection: bool = False  # regenerate on reads too ("plus")
    oram_backend: bool = False        # physical accesses through Path ORAM
    oram: OramConfig = field(default_factory=OramConfig)

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("d must be >= 0")
        if self.codec.k > self.frame_count:
            raise ValueError(
                f"k={self.codec.k} shares cannot land in {self.frame_count} "
                "fetched blocks; increase d"
            )

    @property
    def frame_count(self):
        return self.codec.t + self.d


@dataclass
class ControllerStats:
    ops: int = 0
    reads: int = 0
    writes: int = 0
    block_reads: int = 0
    block_writes: int = 0
    stash_hits: int = 0
    shuffles: int = 0
    tamper_alarms: int = 0
    segmentations: int = 0
    reconstructions: int = 0


@dataclass
class AccessResult:
    op: str
    addr: int
    data: Optional[bytes]
    integrity: bool
    tamper_alarm: bool
    reads: int
    writes: int
    stash_hits: int
    segmentations: int
    reconstructions: int
    transactions: Optional[List[Tuple[str, int]]] = None
    touched: Optional[np.ndarray] = None
    used_ordinals: Optional[List[int]] = None  # share indices reconstructed from


def _sample_excluding(n_total, count, excluded, rng):
    """count distinct ints from [0, n_total) avoiding `excluded` (a set)."""
    avail = n_total - len(excluded)
    if count > avail:
        raise CapacityError(
            f"cannot sample {count} blocks from {n_total} with "
            f"{len(excluded)} excluded"
        )
    if count * 2 >= avail:
        pool = np.array([v for v in range(n_total) if v not in excluded])
        idx = rng.choice(avail, size=count, replace=False)
        return pool[idx]
    out = []
    seen = set(excluded)
    while len(out) < count:
        for v in rng.integers(0, n_total, size=2 * count):
            v = int(v)
            if v not in seen:
                seen.add(v)
                out.append(v)
                if len(out) == count:
                    break
    return np.array(out, dtype=np.int64)


class SsmController:
    def __init__(
        self,
        cfg,
        rng,
        record_transactions=False,
        record_touched=False,
        init_fill=True,
    ):
        self.cfg = cfg
        self.rng = rng
        self.record_transactions = record_transactions
        self.record_touched = record_touched
        self.params = cfg.codec
        self.map = init_layout(cfg.geom, cfg.codec, rng)
        self.geom = self.map.geom
        self._check_stash_headroom()
        self.stash = ShareStash(cfg.stash)
        self.mem = np.zeros((self.geom.physical_blocks, self.geom.s, 2), dtype=np.uint64)
        self.counters = np.zeros(self.geom.logical_blocks, dtype=np.uint64)
        self.seed_key = int(rng.integers(0, 2**64, dtype=np.uint64)) | (
            int(rng.integers(0, 2**64, dtype=np.uint64)) << 64
        )
        self.stats = ControllerStats()
        self._last_move_arrays = (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
        self.oram = None
        if cfg.oram_backend:
            if self.geom.physical_blocks > cfg.oram.capacity_blocks:
                raise ValueError(
                    "physical share blocks exceed the ORAM capacity; "
                    "raise oram height"
                )
            self.oram = PathOram(
                cfg.oram, self.geom.physical_blocks, rng, store_data=False
            )
        if init_fill:
            self.initialize_memory()

    def _check_stash_headroom(self):
        cfg = self.cfg
        worst = cfg.stash.low_bytes + (cfg.frame_count * self.geom.s + cfg.codec.k) * 16
        if worst > cfg.stash.capacity_bytes:
            raise ValueError(
                "stash too small for the access inflow: capacity "
                f"{cfg.stash.capacity_bytes} < low watermark + worst-case "
                f"round inflow {worst:.0f}; enlarge the stash or shrink t+d"
            )

    @property
    def map_bytes(self):
        return self.map.forward_bytes

    @property
    def _last_moves(self):
        lgs, js, slot_ids = self._last_move_arrays
        s = self.geom.s
        return [
            (lg, j, ShareLocation(slot // s, slot % s))
            for lg, j, slot in zip(lgs.tolist(), js.tolist(), slot_ids.tolist())
        ]

    def _ctx(self, addr):
        return SeedContext(self.seed_key, addr, int(self.counters[addr]))

    # -- setup -------------------------------------------------------------

    def initialize_memory(self):
        """Zero-fill every logical block (counted as the initial write)."""
        zero = np.zeros(self.params.w, dtype=np.uint64)
        flat = self.mem.reshape(-1, 2)
        for lg in range(self.geom.logical_blocks):
            self.counters[lg] = 1
            xs, ys = segment_arrays(zero, self.params, self._ctx(lg), self.rng)
            slots = self.map.forward[lg]
            flat[slots, 0] = xs
            flat[slots, 1] = ys

    # -- public operations ---------------------------------------------------

    def access(self, op, addr, data=None):
        if self.cfg.op_type_protection:
            return self.ssm_access_plus(op, addr, data)
        if op == OP_READ:
            return self.ssm_read(addr)
        if op == OP_WRITE:
            return self.ssm_write(addr, data)
        raise ValueError(f"unknown op {op!r}")

    def ssm_read(self, addr):
        self._check_addr(addr)
        hits, hit_shares = self._probe_stash(addr)
        t = self.params.t
        use_hits = hits
        if len(hits) > t:
            pick = self.rng.choice(len(hits), size=t, replace=False)
            use_hits = [hits[int(i)] for i in pick]
        r = t - len(use_hits)
        slots = self.map.forward[addr]
        blocks_of_addr = slots // self.geom.s
        non_hit = np.array([j for j in range(self.params.k) if j not in set(hits)])
        chosen = self.rng.choice(non_hit.size, size=r, replace=False) if r else []
        chosen_js = [int(non_hit[int(i)]) for i in chosen]
        real_blocks = blocks_of_addr[chosen_js] if chosen_js else np.empty(0, np.int64)
        frames = self._frames_around(real_blocks)
        reads, resident = self._fetch(frames)

        use_js = list(use_hits) + chosen_js
        pairs = [
            hit_shares.get(j) or self.stash.get_raw((addr, j)) for j in use_js
        ]
        xs = np.array([p[0] for p in pairs], dtype=np.uint64)
        ys = np.array([p[1] for p in pairs], dtype=np.uint64)
        segments, ok = reconstruct_arrays(xs, ys, self.params, self._ctx(addr))
        data_out = segments_to_block(segments, self.params)
        self.stats.reconstructions += 1

        writes = self._repack_with_retry(frames, None, resident)
        return self._finish(
            OP_READ, addr, data_out, ok, reads, writes, len(hits),
            segmentations=0, reconstructions=1, frames=frames,
            used_ordinals=use_js,
        )

    def ssm_write(self, addr, data):
        self._check_addr(addr)
        if data is None:
            raise ValueError("write needs data")
        hits, _ = self._probe_stash(addr)
        blocks_of_addr = self.map.forward[addr] // self.geom.s
        frames = self._frames_around(blocks_of_addr)
        reads, resident = self._fetch(frames)

        self.counters[addr] += np.uint64(1)
        xs, ys = segment_arrays(
            block_to_segments(data, self.params), self.params, self._ctx(addr), self.rng
        )
        self._insert_regenerated(addr, xs, ys)
        self.stats.segmentations += 1

        writes = self._repack_with_retry(frames, addr, resident)
        return self._finish(
            OP_WRITE, addr, None, True, reads, writes, len(hits),
            segmentations=1, reconstructions=0, frames=frames,
        )

    def ssm_access_plus(self, op, addr, data=None):
        """Uniform read/write round: fetch all k current blocks plus dummies,
        regenerate every share under a fresh counter, write back."""
        self._check_addr(addr)
        if op == OP_WRITE and data is None:
            raise ValueError("write needs data")
        hits, _ = self._probe_stash(addr)
        blocks_of_addr = self.map.forward[addr] // self.geom.s
        frames = self._frames_around(blocks_of_addr)
        reads, resident = self._fetch(frames)

        t, k = self.params.t, self.params.k
        reconstructions = 0
        ok = True
        if op == OP_READ:
            pick = self.rng.choice(k, size=t, replace=False)
            pairs = [self.stash.get_raw((addr, int(j))) for j in pick]
            xs = np.array([p[0] for p in pairs], dtype=np.uint64)
            ys = np.array([p[1] for p in pairs], dtype=np.uint64)
            segments, ok = reconstruct_arrays(xs, ys, self.params, self._ctx(addr))
            payload = segments_to_block(segments, self.params)
            reconstructions = 1
            self.stats.reconstructions += 1
            data_out = payload
        else:
            payload = bytes(data)
            data_out = None

        self.counters[addr] += np.uint64(1)
        nxs, nys = segment_arrays(
            block_to_segments(payload, self.params), self.params, self._ctx(addr), self.rng
        )
        self._insert_regenerated(addr, nxs, nys)
        self.stats.segmentations += 1

        writes = self._repack_with_retry(frames, addr, resident)
        return self._finish(
            op, addr, data_out, ok, reads, writes, len(hits),
            segmentations=1, reconstructions=reconstructions, frames=frames,
            used_ordinals=[int(j) for j in pick] if op == OP_READ else None,
        )

    # -- shared machinery ----------------------------------------------------

    def _check_addr(self, addr):
        if not 0 <= addr < self.geom.logical_blocks:
            raise ValueError(f"unknown logical block {addr}")

    def _probe_stash(self, addr):
        hits = []
        shares = {}
        for j in range(self.params.k):
            share = self.stash.lookup((addr, j))
            if share is not None:
                hits.append(j)
                shares[j] = (share.x, share.y)
        self.stats.stash_hits += len(hits)
        return hits, shares

    def _frames_around(self, real_blocks):
        """real blocks plus uniform dummies, shuffled into the frame list."""
        want = self.cfg.frame_count - len(real_blocks)
        dummies = _sample_excluding(
            self.geom.physical_blocks, want, set(int(b) for b in real_blocks), self.rng
        )
        frames = np.concatenate(
            [np.asarray(real_blocks, dtype=np.int64), dummies.astype(np.int64)]
        )
        self.rng.shuffle(frames)
        return frames

    def _fetch(self, frames):
        """Pull every resident share of the frames into the stash.

        Returns (read transactions, resident origins).  The origin list
        doubles as the mandatory re-placement set for the repack.
        """
        s = self.geom.s
        k = self.params.k
        owners = self.map.reverse.reshape(-1, s)[frames].ravel()
        occupied = owners >= 0
        owner_list = owners[occupied].tolist()
        words = self.mem[frames].reshape(-1, 2)[occupied].tolist()
        stash = self.stash
        fresh = []
        resident = []
        for owner, (x, y) in zip(owner_list, words):
            origin = (owner // k, owner % k)
            resident.append(origin)
            if origin not in stash:
                fresh.append((origin, x, y, False))
        stash.insert_bulk_raw(fresh)
        if self.oram is not None:
            reads = self.oram.batch_fetch(frames)
        else:
            reads = frames.size
        self.stats.block_reads += reads
        return reads, resident

    def _insert_regenerated(self, addr, xs, ys):
        self.stash.insert_bulk_raw(
            [
                ((addr, j), x, y, True)
                for j, (x, y) in enumerate(zip(xs.tolist(), ys.tolist()))
            ]
        )

    def shuffle_round(self, frames):
        """Repack the given fetched frames from the stash pool.

        frames must be the blocks of a fetch whose resident shares are in
        the stash (``_fetch`` guarantees that during an access).  Every
        frame is written back fully packed; evicted and padding shares are
        assigned uniformly at random.  Returns the applied move batch as
        (logical, ordinal, ShareLocation) tuples.
        """
        frames = np.asarray(frames, dtype=np.int64)
        s = self.geom.s
        owners = self.map.reverse.reshape(-1, s)[frames].ravel()
        k = self.params.k
        resident = [
            (owner // k, owner % k) for owner in owners[owners >= 0].tolist()
        ]
        for origin in resident:
            if origin not in self.stash:
                raise ValueError(
                    f"share {origin} lives in the frames but not in the stash; "
                    "fetch before shuffling"
                )
        self._repack_with_retry(frames, None, resident)
        return self._last_moves

    def _repack_with_retry(self, frames, regen, resident, attempts=8):
        for _ in range(attempts):
            try:
                return self._repack(frames, regen, resident)
            except _AssignWedge:
                continue
        raise CapacityError(
            "could not place shares into the fetched frames; geometry too tight"
        )

    def _repack(self, frames, regen, resident):
        """Vacate the frames, reassign shares, commit map + memory + stash."""
        s = self.geom.s
        k = self.params.k
        total_slots = frames.size * s

        mandatory = dict.fromkeys(resident)
        if regen is not None:
            for j in range(k):
                mandatory[(regen, j)] = None

        target = self.stash.occupancy_bytes - self.cfg.stash.low_bytes
        evicted = self.stash.pop_random_raw(self.rng, target)
        evicted_by_origin = {e[0]: e for e in evicted}

        p_lg = []
        p_j = []
        p_x = []
        p_y = []
        get_raw = self.stash.get_raw
        for origin in mandatory:
            e = evicted_by_origin.get(origin)
            if e is None:
                v = get_raw(origin)
                x, y = v[0], v[1]
            else:
                x, y = e[1], e[2]
            p_lg.append(origin[0])
            p_j.append(origin[1])
            p_x.append(x)
            p_y.append(y)

        leftover = total_slots - len(p_lg)
        floaters = [e for e in evicted if e[0] not in mandatory]
        if floaters and leftover > 0:
            order = self.rng.permutation(len(floaters))[:leftover].tolist()
            for i in order:
                origin, x, y, _ = floaters[i]
                p_lg.append(origin[0])
                p_j.append(origin[1])
                p_x.append(x)
                p_y.append(y)
            leftover = total_slots - len(p_lg)
        if leftover > 0:
            pool = [o for o in self.stash.origins() if o not in mandatory]
            if pool:
                order = self.rng.permutation(len(pool))[:leftover].tolist()
                for i in order:
                    origin = pool[i]
                    v = get_raw(origin)
                    p_lg.append(origin[0])
                    p_j.append(origin[1])
                    p_x.append(v[0])
                    p_y.append(v[1])

        lgs = np.array(p_lg, dtype=np.int64)
        try:
            slot_ids = self._assign_slots(lgs, frames)
        except _AssignWedge:
            self.stash.insert_bulk_raw(evicted)  # restore before the retry
            raise

        js = np.array(p_j, dtype=np.int64)
        self.map.remap_arrays(lgs, js, slot_ids, full_check=False)
        self._last_move_arrays = (lgs, js, slot_ids)
        self.mem[frames] = 0
        flat_mem = self.mem.reshape(-1, 2)
        flat_mem[slot_ids, 0] = np.array(p_x, dtype=np.uint64)
        flat_mem[slot_ids, 1] = np.array(p_y, dtype=np.uint64)
        if regen is not None:
            for j in range(k):
                self.stash.set_clean((regen, j))

        self.stats.shuffles += 1
        if self.oram is not None:
            writes = self.oram.batch_finish(frames)
        else:
            writes = frames.size
        self.stats.block_writes += writes
        return writes

    def _assign_slots(self, lgs, frames):
        """Pick a physical slot for each placement, one lg per frame at most.

        Shares of the same logical block must land in distinct physical
        blocks; within the batch that means distinct frames.  Groups of two
        or more get distinct frames by sampling without replacement;
        singletons carry no constraint and fill the remaining capacity in
        shuffled order.  Returns flat slot ids aligned with ``lgs``.
        """
        n = lgs.size
        n_frames = frames.size
        s = self.geom.s
        if n > n_frames * s:
            raise _AssignWedge
        frames_list = frames.tolist()
        slot_orders = self.rng.permuted(
            np.tile(np.arange(s), (n_frames, 1)), axis=1
        ).tolist()
        fill = [0] * n_frames
        free = [s] * n_frames
        result = [0] * n

        lgs_list = lgs.tolist()
        groups = {}
        for idx, lg in enumerate(lgs_list):
            prev = groups.get(lg)
            if prev is None:
                groups[lg] = idx
            elif isinstance(prev, int):
                groups[lg] = [prev, idx]
            else:
                prev.append(idx)
        multi = [v for v in groups.values() if not isinstance(v, int)]

        singles = None
        multi.sort(key=len, reverse=True)
        for items in multi:
            # prefer emptier frames (random within a tier): keeps occupancy
            # balanced so large same-lg groups always find distinct frames
            sel = []
            need = len(items)
            for cnt in range(s, 0, -1):
                tier = [i for i in range(n_frames) if free[i] == cnt]
                if not tier:
                    continue
                remaining = need - len(sel)
                if len(tier) <= remaining:
                    sel.extend(tier)
                else:
                    pick = self.rng.choice(len(tier), size=remaining, replace=False)
                    sel.extend(tier[ci] for ci in pick.tolist())
                if len(sel) == need:
                    break
            if len(sel) < need:
                raise _AssignWedge
            for idx, fi in zip(items, sel):
                free[fi] -= 1
                slot = slot_orders[fi][fill[fi]]
                fill[fi] += 1
                result[idx] = frames_list[fi] * s + slot
        if multi:
            in_multi = set()
            for items in multi:
                in_multi.update(items)
            singles = [i for i in range(n) if i not in in_multi]
        else:
            singles = range(n)

        if singles:
            pool = np.repeat(np.arange(n_frames), free)
            n_singles = len(singles)
            if n_singles > pool.size:
                raise _AssignWedge
            picks = self.rng.permutation(pool)[:n_singles].tolist()
            for idx, fi in zip(singles, picks):
                slot = slot_orders[fi][fill[fi]]
                fill[fi] += 1
                result[idx] = frames_list[fi] * s + slot
        return np.array(result, dtype=np.int64)

    def _finish(
        self, op, addr, data, integrity, reads, writes, hits,
        segmentations, reconstructions, frames, used_ordinals=None,
    ):
        tamper = not integrity
        if tamper:
            self.stats.tamper_alarms += 1
        self.stats.ops += 1
        if op == OP_READ:
            self.stats.reads += 1
        else:
            self.stats.writes += 1
        transactions = None
        if self.record_transactions and self.oram is None:
            transactions = [("R", int(f)) for f in frames] + [
                ("W", int(f)) for f in frames
            ]
        return AccessResult(
            op=op,
            addr=addr,
            data=data,
            integrity=integrity,
            tamper_alarm=tamper,
            reads=reads,
            writes=writes,
            stash_hits=hits,
            segmentations=segmentations,
            reconstructions=reconstructions,
            transactions=transactions,
            touched=frames.copy() if self.record_touched else None,
            used_ordinals=used_ordinals,
        )

    # -- test support --------------------------------------------------------

    def read_all_check(self):
        """Reconstruct every logical block; returns the list of failures."""
        bad = []
        for lg in range(self.geom.logical_blocks):
            res = self.ssm_read(lg)
            if not res.integrity:
                bad.append(lg)
        return bad


class _AssignWedge(Exception):
    pass
