"""On-controller share cache with occupancy watermarks.

The stash holds 16-byte shares keyed by (logical block, ordinal).  It serves
two roles: a partial cache that lets reads complete with fewer fresh memory
fetches, and the shuffling pool from which write-back rounds draw shares.
Hitting the high watermark signals that eviction is overdue; the controller
drains to the low watermark on every write-back round.

Entries are stored compactly as (x, y, dirty) tuples; ``StashEntry`` objects
are materialized only at the API boundary.  A dirty entry carries a value not
yet present at its mapped memory slot and must be placed before it may leave
the stash.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

from .codec import Share

ENTRY_BYTES = 16


class StashOverflowError(RuntimeError):
    pass


@dataclass(frozen=True)
class StashConfig:
    capacity_bytes: int = 32768
    high_watermark: float = 0.75
    low_watermark: float = 0.5

    def __post_init__(self):
        if not 0 < self.low_watermark < self.high_watermark <= 1:
            raise ValueError("need 0 < low_watermark < high_watermark <= 1")
        if self.capacity_bytes < ENTRY_BYTES:
            raise ValueError("capacity too small for a single share")

    @property
    def high_bytes(self):
        return self.high_watermark * self.capacity_bytes

    @property
    def low_bytes(self):
        return self.low_watermark * self.capacity_bytes


class StashEntry(NamedTuple):
    origin: Tuple[int, int]
    share: Share
    dirty: bool


def needs_shuffle(cfg, occupancy_bytes):
    """True iff occupancy has reached the high watermark."""
    return occupancy_bytes >= cfg.high_bytes


class ShareStash:
    def __init__(self, cfg):
        self.cfg = cfg
        self._entries = {}  # (logical, ordinal) -> (x, y, dirty)
        self.hits = 0
        self.misses = 0
        self.peak_bytes = 0

    def __len__(self):
        return len(self._entries)

    def __contains__(self, origin):
        return origin in self._entries

    @property
    def occupancy_bytes(self):
        return len(self._entries) * ENTRY_BYTES

    def insert(self, entries):
        """Add or overwrite entries by origin key.

        Raises StashOverflowError if the insert would exceed capacity; the
        controller's watermark policy is responsible for never getting here.
        """
        for e in entries:
            self._entries[e.origin] = (e.share.x, e.share.y, e.dirty)
        if self.occupancy_bytes > self.cfg.capacity_bytes:
            raise StashOverflowError(
                f"stash occupancy {self.occupancy_bytes} exceeds "
                f"capacity {self.cfg.capacity_bytes}"
            )
        self.peak_bytes = max(self.peak_bytes, self.occupancy_bytes)

    def insert_raw(self, origin, x, y, dirty=False):
        self._entries[origin] = (x, y, dirty)
        if self.occupancy_bytes > self.cfg.capacity_bytes:
            raise StashOverflowError(
                f"stash occupancy {self.occupancy_bytes} exceeds "
                f"capacity {self.cfg.capacity_bytes}"
            )
        self.peak_bytes = max(self.peak_bytes, self.occupancy_bytes)

    def lookup(self, origin):
        """Share for an origin, or None; counts the hit or miss."""
        v = self._entries.get(origin)
        if v is None:
            self.misses += 1
            return None
        self.hits += 1
        return Share(v[0], v[1])

    def get_raw(self, origin):
        return self._entries.get(origin)

    def remove(self, origin):
        return self._entries.pop(origin, None)

    def set_clean(self, origin):
        v = self._entries.get(origin)
        if v is not None and v[2]:
            self._entries[origin] = (v[0], v[1], False)

    def origins(self):
        return list(self._entries.keys())

    def entries(self):
        return [
            StashEntry(o, Share(v[0], v[1]), v[2]) for o, v in self._entries.items()
        ]

    def insert_bulk_raw(self, items):
        """Insert (origin, x, y, dirty) tuples; one overflow check at the end."""
        entries = self._entries
        for origin, x, y, dirty in items:
            entries[origin] = (x, y, dirty)
        if self.occupancy_bytes > self.cfg.capacity_bytes:
            raise StashOverflowError(
                f"stash occupancy {self.occupancy_bytes} exceeds "
                f"capacity {self.cfg.capacity_bytes}"
            )
        self.peak_bytes = max(self.peak_bytes, self.occupancy_bytes)

    def pop_random_raw(self, rng, target_bytes):
        """Uniform random eviction, raw form: [(origin, x, y, dirty), ...]."""
        if target_bytes <= 0:
            return []
        count = min(math.ceil(target_bytes / ENTRY_BYTES), len(self._entries))
        keys = list(self._entries.keys())
        idx = rng.permutation(len(keys))[:count]
        entries = self._entries
        out = []
        for i in idx.tolist():
            origin = keys[i]
            x, y, dirty = entries.pop(origin)
            out.append((origin, x, y, dirty))
        return out

    def select_evictions(self, rng, target_bytes):
        """Remove and return a uniformly random subset of >= target_bytes.

        When invoked by the controller's watermark policy the target is
        occupancy minus the low watermark, so eviction drains to it.
        """
        return [
            StashEntry(origin, Share(x, y), dirty)
            for origin, x, y, dirty in self.pop_random_raw(rng, target_bytes)
        ]
