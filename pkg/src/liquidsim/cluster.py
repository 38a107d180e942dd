"""Cluster state: node fragment stores, interface meters, census.

Meters are the measurement surface of the whole simulator, so their
semantics are strict: every read and write of fragment data is metered at
the node interface where it crosses, reads can be spread over an interval
(paced repairers) or instantaneous, and failing a node erases its data but
never its meters.  Storer traffic lands in a separate phase bucket so that
repair-traffic totals stay clean.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ConfigError, InvariantViolation, MissingFragmentError


@dataclass
class InterfaceMeter:
    bitsRead: int = 0
    bitsWritten: int = 0


class NodeStore:
    """One node: capacity-bounded map (objectId, efi) -> payload."""

    __slots__ = ("nodeId", "capacity", "fragments", "flens", "usedBits", "meter")

    def __init__(self, node_id: int, capacity: int):
        self.nodeId = node_id
        self.capacity = capacity
        self.fragments: dict = {}
        self.flens: dict = {}
        self.usedBits = 0
        self.meter = InterfaceMeter()


class ClusterState:
    def __init__(self, N: int, capacity: int, detail_meters: bool = False):
        if N < 1 or capacity <= 0:
            raise ConfigError("need N >= 1 and positive capacity")
        self.N = N
        self.capacity = capacity
        self.nodes = [NodeStore(i, capacity) for i in range(N)]
        self.now = 0.0
        self.detail_meters = detail_meters
        self.phase = "store"
        # phase -> totals; the repair read log feeds the peak-rate window
        self.phase_read: dict = {"store": 0, "repair": 0}
        self.phase_written: dict = {"store": 0, "repair": 0}
        self.read_log: list = []  # (t0, t1, bits) spread entries, t0 == t1 for impulses
        # objectId -> {efi: set of holder node ids}; census source of truth
        self.object_index: dict = {}

    def begin_phase(self, phase: str) -> None:
        if phase not in self.phase_read:
            raise ConfigError(f"unknown phase {phase!r}")
        self.phase = phase

    # -- mutation ---------------------------------------------------------

    def store_fragment(self, node_id: int, object_id, efi: int, payload,
                       flen: int, t: float) -> None:
        node = self.nodes[node_id]
        key = (object_id, efi)
        overwrite = key in node.fragments
        if not overwrite:
            if node.usedBits + flen > node.capacity:
                raise CapacityError(
                    f"node {node_id}: {node.usedBits}+{flen} exceeds {node.capacity}")
            node.usedBits += flen
            holders = self.object_index.setdefault(object_id, {})
            holders.setdefault(efi, set()).add(node_id)
        elif node.flens[key] != flen:
            raise ConfigError("overwrite must keep fragment length")
        node.fragments[key] = payload
        node.flens[key] = flen
        node.meter.bitsWritten += flen
        self.phase_written[self.phase] += flen
        self.now = max(self.now, t)
        if node.usedBits > node.capacity:
            raise InvariantViolation(f"node {node_id} over capacity")

    def read_fragment(self, node_id: int, object_id, efi: int, t: float):
        node = self.nodes[node_id]
        key = (object_id, efi)
        if key not in node.fragments:
            raise MissingFragmentError((node_id, object_id, efi))
        flen = node.flens[key]
        node.meter.bitsRead += flen
        self.phase_read[self.phase] += flen
        self.read_log.append((t, t, flen))
        self.now = max(self.now, t)
        return node.fragments[key]

    def meter_read_spread(self, node_bits, t0: float, t1: float) -> None:
        """Meter paced reads: node_bits is {nodeId: bits} streamed over [t0, t1].

        The caller is responsible for fragment presence; this only meters.
        """
        if t1 < t0:
            raise ConfigError("t1 must be >= t0")
        total = 0
        for node_id, bits in node_bits.items():
            self.nodes[node_id].meter.bitsRead += bits
            total += bits
        self.phase_read[self.phase] += total
        if total:
            self.read_log.append((t0, t1, total))
        self.now = max(self.now, t1)

    def meter_write_bulk(self, node_bits, t: float) -> None:
        """Meter writes without touching fragment storage.

        Symbolic placements track fragment presence in their own arrays;
        this keeps the per-node and per-phase write meters honest for them.
        """
        total = 0
        for node_id, bits in node_bits.items():
            self.nodes[node_id].meter.bitsWritten += bits
            total += bits
        self.phase_written[self.phase] += total
        self.now = max(self.now, t)

    def fail_node(self, node_id: int, t: float) -> None:
        node = self.nodes[node_id]
        for (object_id, efi) in node.fragments:
            holders = self.object_index[object_id]
            holders[efi].discard(node_id)
            if not holders[efi]:
                del holders[efi]
        node.fragments.clear()
        node.flens.clear()
        node.usedBits = 0  # meters intentionally retained
        self.now = max(self.now, t)

    def delete_fragment(self, node_id: int, object_id, efi: int) -> None:
        """Free a slot without metering; moving data meters only the copy."""
        node = self.nodes[node_id]
        key = (object_id, efi)
        if key not in node.fragments:
            raise MissingFragmentError((node_id, object_id, efi))
        node.usedBits -= node.flens.pop(key)
        del node.fragments[key]
        holders = self.object_index[object_id]
        holders[efi].discard(node_id)
        if not holders[efi]:
            del holders[efi]

    # -- census and meters -------------------------------------------------

    def distinct_counts(self) -> dict:
        return {obj: len(c) for obj, c in self.object_index.items()}

    def recoverable(self, k: int, codec=None, retained=None) -> bool:
        """Every known object has >= k distinct EFIs.

        With a byte codec and retained source data, additionally decode each
        object from its stored fragments and bit-compare.
        """
        for obj, holders in self.object_index.items():
            if len(holders) < k:
                return False
        if codec is not None and codec.backend == "byte":
            if retained is None:
                raise ConfigError("byte census needs retained source data")
            from . import erasure
            for obj, source in retained.items():
                frags = self.gather_fragments(obj, k)
                if erasure.decode(frags, codec) != source:
                    raise InvariantViolation(f"object {obj} decodes to wrong bytes")
        return True

    def gather_fragments(self, object_id, k: int) -> dict:
        """Up to k distinct-EFI payloads for an object, preferring low EFIs.
        Bookkeeping access, not metered."""
        out = {}
        holders = self.object_index.get(object_id, {})
        for efi in sorted(holders):
            if len(out) == k:
                break
            node_id = min(holders[efi])  # deterministic pick
            out[efi] = self.nodes[node_id].fragments[(object_id, efi)]
        return out

    def assert_capacity(self) -> None:
        for node in self.nodes:
            if node.usedBits > node.capacity:
                raise InvariantViolation(f"node {node.nodeId} over capacity")
            expect = sum(node.flens.values())
            if node.usedBits != expect:
                raise InvariantViolation(
                    f"node {node.nodeId} usedBits {node.usedBits} != sum {expect}")

    def meter_window(self, t0: float, t1: float, window: float | None = None):
        """(bitsRead, bitsWritten, avgReadRate, peakReadRate) over [t0, t1].

        bitsWritten has no timing log; the window's written total is the
        repair-phase total (writes happen inside [t0, t1] for whole trials).
        """
        if t1 <= t0:
            raise ConfigError("need t1 > t0")
        cum = _CumulativeReads(self.read_log)
        bits_read = cum.closed(t1) - cum.open(t0)
        avg = bits_read / (t1 - t0)
        if window is None or window >= t1 - t0:
            peak = bits_read / (window if window else (t1 - t0))
        else:
            peak = cum.peak(t0, t1, window)
        return bits_read, self.phase_written["repair"], avg, peak


class _CumulativeReads:
    """Piecewise-linear cumulative read curve with impulse jumps.

    Spread entries contribute linearly over [s0, s1]; impulses (s0 == s1)
    jump the curve.  open(t) excludes an impulse at exactly t, closed(t)
    includes it, so closed(a+w) - open(a) is the closed-window [a, a+w] sum.
    """

    def __init__(self, log):
        events: dict = {}

        def ev(t):
            return events.setdefault(t, [0.0, 0.0])  # [slope delta, jump]

        for (s0, s1, bits) in log:
            if s1 > s0:
                rate = bits / (s1 - s0)
                ev(s0)[0] += rate
                ev(s1)[0] -= rate
            else:
                ev(s0)[1] += bits
        self.t = sorted(events)
        self.before = []  # value approaching t[j] from the left
        self.after = []   # value after the jump at t[j]
        self.slope = []   # slope on [t[j], t[j+1])
        c = 0.0
        s = 0.0
        prev = None
        for tj in self.t:
            if prev is not None:
                c += s * (tj - prev)
            self.before.append(c)
            c += events[tj][1]
            self.after.append(c)
            s += events[tj][0]
            self.slope.append(s)
            prev = tj

    def _locate(self, t: float) -> int:
        return bisect.bisect_right(self.t, t) - 1

    def open(self, t: float) -> float:
        if not self.t or t <= self.t[0]:
            return 0.0
        j = self._locate(t)
        if self.t[j] == t:
            return self.before[j]
        return self.after[j] + self.slope[j] * (t - self.t[j])

    def closed(self, t: float) -> float:
        if not self.t or t < self.t[0]:
            return 0.0
        j = self._locate(t)
        return self.after[j] + self.slope[j] * (t - self.t[j])

    def peak(self, t0: float, t1: float, w: float) -> float:
        hi = max(t0, t1 - w)
        cand = set([t0, hi])
        for tj in self.t:
            if t0 <= tj <= hi:
                cand.add(tj)
            if t0 <= tj - w <= hi:
                cand.add(tj - w)
        best = 0.0
        for a in cand:
            got = self.closed(a + w) - self.open(a)
            if got > best:
                best = got
        return best / w
