"""Scatter layout: the 1-to-k logical-to-physical share map.

Physical memory is an array of 64-byte blocks, each holding ``s`` share
slots (s = 4 for 16-byte shares).  Every logical block owns k slots spread
over k *distinct* physical blocks, so fetching t blocks yields exactly t
shares of the target and the access shape stays constant.  The map keeps a
forward table (logical, ordinal) -> slot and a reverse table slot -> owner,
mutually consistent at all times.

The map is a flat in-memory table; its forward-table footprint is reported
in stats so storage claims can be sanity-checked.  Recursive or hash-computed
map storage is out of scope.
"""

import io
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

FREE = -1

_MAGIC = b"SCATMAP1"


class ShareLocation(NamedTuple):
    block: int
    slot: int


@dataclass(frozen=True)
class GeometryConfig:
    """Physical geometry of the scattered share memory.

    physical_blocks defaults to ceil(logical_blocks * k / s * slack): enough
    slots for every share plus slack so shuffling always finds free
    destinations.
    """

    logical_blocks: int
    s: int = 4
    physical_blocks: Optional[int] = None
    slack: float = 1.1

    def __post_init__(self):
        if self.logical_blocks < 1 or self.s < 1:
            raise ValueError("logical_blocks and s must be positive")
        if self.slack < 1.0:
            raise ValueError("slack must be >= 1.0")

    def resolve(self, k):
        """Return a copy with physical_blocks filled in and validated for k."""
        phys = self.physical_blocks
        if phys is None:
            phys = math.ceil(self.logical_blocks * k / self.s * self.slack)
            phys = max(phys, k)
        geom = GeometryConfig(self.logical_blocks, self.s, phys, self.slack)
        if geom.physical_blocks * geom.s < geom.logical_blocks * k:
            raise ValueError(
                f"insufficient capacity: {geom.physical_blocks}x{geom.s} slots "
                f"< {geom.logical_blocks}x{k} shares"
            )
        if geom.physical_blocks < k:
            raise ValueError(
                f"need at least k={k} physical blocks for distinct placement, "
                f"got {geom.physical_blocks}"
            )
        return geom


class SsmMap:
    """Forward/reverse share map over the physical slot space."""

    def __init__(self, geom, k):
        self.geom = geom
        self.k = k
        self.n_slots = geom.physical_blocks * geom.s
        self.forward = np.full((geom.logical_blocks, k), FREE, dtype=np.int64)
        self.reverse = np.full(self.n_slots, FREE, dtype=np.int64)

    # -- queries ---------------------------------------------------------

    def lookup(self, logical):
        """The k current locations of a logical block's shares."""
        if not 0 <= logical < self.geom.logical_blocks:
            raise ValueError(f"unknown logical block {logical}")
        s = self.geom.s
        return [ShareLocation(int(v) // s, int(v) % s) for v in self.forward[logical]]

    def slots_of(self, logical):
        """Raw slot ids of one logical block (fast path, no allocation of tuples)."""
        return self.forward[logical]

    def owner(self, block, slot):
        """(logical, ordinal) owning a slot, or None if FREE."""
        v = int(self.reverse[block * self.geom.s + slot])
        if v == FREE:
            return None
        return divmod(v, self.k)

    def free_slots_in(self, blocks):
        """All FREE slots within the given physical blocks."""
        s = self.geom.s
        out = []
        for b in blocks:
            base = b * s
            for z in range(s):
                if self.reverse[base + z] == FREE:
                    out.append(ShareLocation(int(b), z))
        return out

    def occupied_count(self):
        return int(np.count_nonzero(self.reverse != FREE))

    @property
    def forward_bytes(self):
        return self.forward.nbytes

    # -- mutation --------------------------------------------------------

    def remap(self, moves):
        """Atomically apply a batch of share moves.

        moves: sequence of (logical, ordinal, ShareLocation).  Every target
        slot must be FREE or vacated by the batch itself, and each logical
        block's shares must still land in distinct physical blocks.  On any
        violation the batch is rejected and the map is unchanged.
        """
        if not moves:
            return
        s = self.geom.s
        n = len(moves)
        lgs = np.fromiter((m[0] for m in moves), dtype=np.int64, count=n)
        js = np.fromiter((m[1] for m in moves), dtype=np.int64, count=n)
        targets = np.fromiter(
            (m[2].block * s + m[2].slot for m in moves), dtype=np.int64, count=n
        )
        self.remap_arrays(lgs, js, targets)

    def remap_arrays(self, lgs, js, targets, full_check=True):
        """Array-form remap: parallel vectors of logical ids, ordinals, slot ids.

        full_check=False skips the cross-check of moves against unchanged
        shares; valid only when every share resident in a target block is
        itself part of the batch (the controller's full-frame repack
        guarantees that).  Duplicate (lg, block) pairs among the moves are
        still rejected.
        """
        s = self.geom.s
        n = len(lgs)
        if n and (
            lgs.min() < 0
            or lgs.max() >= self.geom.logical_blocks
            or js.min() < 0
            or js.max() >= self.k
            or targets.min() < 0
            or targets.max() >= self.n_slots
        ):
            raise ValueError("move batch out of range")
        origins = lgs * self.k + js
        o_sorted = np.sort(origins)
        if n > 1 and (o_sorted[1:] == o_sorted[:-1]).any():
            raise ValueError("duplicate move for a share in one batch")
        t_sorted = np.sort(targets)
        if n > 1 and (t_sorted[1:] == t_sorted[:-1]).any():
            raise ValueError("two moves target the same slot")

        sources = self.forward[lgs, js]
        vacated = sources[sources != FREE]
        occupied = targets[self.reverse[targets] != FREE]
        if occupied.size and not np.isin(occupied, vacated).all():
            raise ValueError("a target slot is occupied and not vacated by the batch")

        # distinct-physical-block rule among the moves themselves
        pair = lgs * self.geom.physical_blocks + targets // s
        p_sorted = np.sort(pair)
        if n > 1 and (p_sorted[1:] == p_sorted[:-1]).any():
            raise ValueError("move would co-locate two shares of a logical block")

        if full_check:
            # ... and against the unchanged shares of every touched block
            touched, row_idx = np.unique(lgs, return_inverse=True)
            rows = self.forward[touched]
            rows[row_idx, js] = targets
            blocks = rows // s
            # give FREE entries per-column unique negatives: never collide
            free_mask = rows == FREE
            if free_mask.any():
                blocks = np.where(free_mask, -2 - np.arange(self.k)[None, :], blocks)
            blocks.sort(axis=1)
            if (blocks[:, 1:] == blocks[:, :-1]).any():
                raise ValueError(
                    "move would co-locate two shares of a logical block"
                )

        self.reverse[vacated] = FREE
        self.reverse[targets] = origins
        self.forward[lgs, js] = targets

    # -- integrity -------------------------------------------------------

    def check_consistency(self):
        """Assert forward/reverse agreement and the distinct-block rule."""
        s = self.geom.s
        owners = {}
        for slot in np.flatnonzero(self.reverse != FREE):
            owners[int(slot)] = int(self.reverse[slot])
        fwd_count = 0
        for lg in range(self.geom.logical_blocks):
            blocks = set()
            for j in range(self.k):
                slot = int(self.forward[lg, j])
                if slot == FREE:
                    continue
                fwd_count += 1
                assert owners.get(slot) == lg * self.k + j, (
                    f"reverse mismatch at slot {slot}"
                )
                block = slot // s
                assert block not in blocks, f"co-located shares for block {lg}"
                blocks.add(block)
        assert fwd_count == len(owners), "orphaned reverse entries"

    # -- serialization ---------------------------------------------------

    def dump(self, fh):
        """Deterministic binary dump: header then the forward table."""
        header = np.array(
            [self.geom.logical_blocks, self.k, self.geom.s, self.geom.physical_blocks],
            dtype="<u8",
        )
        fh.write(_MAGIC)
        fh.write(header.tobytes())
        fh.write(self.forward.astype("<i8").tobytes())

    @classmethod
    def load(cls, fh):
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not a scattermem map file")
        header = np.frombuffer(fh.read(32), dtype="<u8")
        logical, k, s, phys = (int(v) for v in header)
        geom = GeometryConfig(logical, s, phys)
        m = cls(geom, k)
        fwd = np.frombuffer(fh.read(logical * k * 8), dtype="<i8").reshape(logical, k)
        m.forward = fwd.astype(np.int64)
        for lg in range(logical):
            for j in range(k):
                slot = int(m.forward[lg, j])
                if slot != FREE:
                    m.reverse[slot] = lg * k + j
        m.check_consistency()
        return m


def init_layout(geom, params, rng):
    """Random initial placement of every logical block's k shares.

    Each block's shares go to k distinct physical blocks (one random free
    slot in each); remaining slots stay FREE.  Emptier blocks are preferred
    (random tie-breaking within an occupancy tier), which keeps occupancy
    balanced and makes exact-fit geometries placeable.
    """
    geom = geom.resolve(params.k)
    m = SsmMap(geom, params.k)
    s = geom.s
    free_count = np.full(geom.physical_blocks, s, dtype=np.int64)
    for lg in range(geom.logical_blocks):
        chosen = []
        need = params.k
        for cnt in range(s, 0, -1):
            tier = np.flatnonzero(free_count == cnt)
            if tier.size == 0:
                continue
            if tier.size <= need:
                picked = tier
            else:
                picked = rng.choice(tier, size=need, replace=False)
            chosen.extend(int(b) for b in picked)
            need -= picked.size
            if need == 0:
                break
        if need > 0:
            raise ValueError(
                "placement ran out of physical blocks with free slots; "
                "increase slack or physical_blocks"
            )
        order = rng.permutation(params.k)
        for j, block in zip(order.tolist(), chosen):
            base = block * s
            free = [z for z in range(s) if m.reverse[base + z] == FREE]
            slot = free[int(rng.integers(0, len(free)))]
            m.reverse[base + slot] = lg * params.k + j
            m.forward[lg, j] = base + slot
            free_count[block] -= 1
    return m
