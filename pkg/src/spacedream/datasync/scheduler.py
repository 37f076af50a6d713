"""Priority scheduling of fragment transmissions.

There are no acknowledgements, so importance is expressed purely through
ordering and repetition: an entry is sent resend_count times, waiting at
least min_resend_interval between sends of the same fragment. Among
eligible entries the order is priority (desc), sends done (asc, so round
0 of everything precedes round 1 of anything at equal priority), recency
(newer boot generations and newer files first), fragment index (asc).

Metadata and header-copy fragments ride one priority level above their
file's data and get two extra sends: if they are lost the whole file is
unusable, not just one kilobyte of it.

Entries whose budget is spent retire. Retired entries are optionally
recycled into a lowest-priority backlog that is served only when nothing
live is eligible, soaking up otherwise idle downlink time.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .fragmenting import FileFragments
from .wire import Fragment

META_PRIORITY_BOOST = 1
META_EXTRA_SENDS = 2


def fragment_key(frag: Fragment) -> tuple:
    """Identity of one fragment across resends."""
    return (frag.file_id, frag.generation, frag.kind, frag.frag_index)


@dataclass(frozen=True)
class TransferConfig:
    priority: int = 0
    resend_count: int = 1
    min_resend_interval: float = 0.0

    def __post_init__(self):
        if self.resend_count < 1:
            raise ValueError("resend_count must be >= 1")
        if self.min_resend_interval < 0:
            raise ValueError("min_resend_interval must be >= 0")


class _Entry:
    __slots__ = ("fragment", "priority", "budget", "interval", "generation",
                 "order", "sends_done", "last_sent", "seq")

    def __init__(self, fragment: Fragment, priority: int, budget: int,
                 interval: float, order: int, seq: int):
        self.fragment = fragment
        self.priority = priority
        self.budget = budget
        self.interval = interval
        self.generation = fragment.generation
        self.order = order
        self.sends_done = 0
        self.last_sent = float("-inf")
        self.seq = seq

    def rank(self):
        return (-self.priority, self.sends_done, -self.generation, -self.order,
                self.fragment.frag_index, self.seq)


class SendScheduler:
    def __init__(self, *, recycle_retired: bool = True):
        self.recycle_retired = recycle_retired
        self._ready: list[tuple] = []     # (rank, seq, entry) eligible now
        self._cooldown: list[tuple] = []  # (eligible_at, seq, entry)
        self._backlog: list[tuple] = []   # (eligible_at, seq, entry) retired
        self._order = 0
        self._seq = 0
        self.sent_fragments = 0
        self.retired_fragments = 0

    # -- intake ------------------------------------------------------------

    def add_file(self, ff: FileFragments, cfg: TransferConfig) -> int:
        """Queue a fragmented file; later files outrank earlier ones at
        equal priority."""
        self._order += 1
        order = self._order
        for frag in (ff.metadata, *ff.header_copies):
            self._add(frag, cfg.priority + META_PRIORITY_BOOST,
                      cfg.resend_count + META_EXTRA_SENDS,
                      cfg.min_resend_interval, order)
        for frag in ff.data:
            self._add(frag, cfg.priority, cfg.resend_count,
                      cfg.min_resend_interval, order)
        return 1 + len(ff.header_copies) + len(ff.data)

    def add_fragment(self, frag: Fragment, cfg: TransferConfig) -> None:
        self._order += 1
        self._add(frag, cfg.priority, cfg.resend_count,
                  cfg.min_resend_interval, self._order)

    def _add(self, frag, priority, budget, interval, order):
        self._seq += 1
        entry = _Entry(frag, priority, budget, interval, order, self._seq)
        heapq.heappush(self._ready, (entry.rank(), entry.seq, entry))

    # -- dispatch ------------------------------------------------------------

    def next_fragment(self, now: float, max_wire_size: int | None = None,
                      exclude: set | None = None) -> Fragment | None:
        """Pop the next fragment to transmit, or None if nothing is
        eligible. Never skips ahead past a too-large or excluded head
        entry: that would undermine strict priority order. `exclude`
        holds fragment_key() values already packed into the current
        packet; repeats of the same fragment must ride in separate
        packets or a single loss would eat every copy at once."""
        self._promote(now)
        if self._ready:
            rank, seq, entry = self._ready[0]
            if self._blocked(entry, max_wire_size, exclude):
                return None
            heapq.heappop(self._ready)
            return self._dispatch(entry, now, retired=False)
        return self._next_retired(now, max_wire_size, exclude)

    @staticmethod
    def _blocked(entry: _Entry, max_wire_size, exclude) -> bool:
        if max_wire_size is not None and entry.fragment.wire_size > max_wire_size:
            return True
        return exclude is not None and fragment_key(entry.fragment) in exclude

    def _promote(self, now: float) -> None:
        while self._cooldown and self._cooldown[0][0] <= now:
            _, seq, entry = heapq.heappop(self._cooldown)
            heapq.heappush(self._ready, (entry.rank(), entry.seq, entry))

    def _dispatch(self, entry: _Entry, now: float, retired: bool) -> Fragment:
        entry.sends_done += 1
        entry.last_sent = now
        self.sent_fragments += 1
        if retired or entry.sends_done >= entry.budget:
            if not retired:
                self.retired_fragments += 1
            if self.recycle_retired:
                heapq.heappush(self._backlog,
                               (now + max(entry.interval, 1e-6), entry.seq, entry))
        else:
            heapq.heappush(self._cooldown,
                           (now + entry.interval, entry.seq, entry))
        return entry.fragment

    def _next_retired(self, now, max_wire_size, exclude=None):
        if not self._backlog or self._backlog[0][0] > now:
            return None
        _, seq, entry = self._backlog[0]
        if self._blocked(entry, max_wire_size, exclude):
            return None
        heapq.heappop(self._backlog)
        return self._dispatch(entry, now, retired=True)

    # -- introspection ---------------------------------------------------------

    @property
    def live_count(self) -> int:
        """Entries still holding unsent budget."""
        return len(self._ready) + len(self._cooldown)

    @property
    def backlog_count(self) -> int:
        return len(self._backlog)

    def next_wakeup(self, now: float) -> float | None:
        """Earliest time anything becomes eligible, None if queues empty."""
        self._promote(now)
        if self._ready:
            return now
        times = [h[0][0] for h in (self._cooldown, self._backlog) if h]
        return min(times) if times else None
