"""Repair from pre-positioned helper fragments with rotating labels.

Every node stores one primary fragment of each object.  Each node also
anchors one group of r objects and keeps a staircase of helper fragments
for it: the group object at position j has helpers 0..j staged at the
anchor.  Repairing a failed node then costs one fragment move per group
plus one decode per group instead of a whole-object decode per lost
fragment, which pushes per-failure read traffic down toward the capacity
bound.  After the moves, every group shifts its object order by one, each
anchor regenerates one helper set, and the fragment labels rotate so the
next failure finds the staircases ready again.

The Poisson variant tracks repair slack with a counter capped at b:
failures decrement it, completed steps increment it.  Recoverability is
witnessed by a census of nodes holding their full primary complement and
exactly the staircase pattern; the witness set keeps at least k + counter
members while the counter stays non-negative.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import erasure
from .cluster import ClusterState
from .errors import (ConfigError, DecodeError, InvariantViolation,
                     MissingFragmentError)
from .liquid import RepairCounter

log = logging.getLogger(__name__)


class OpCounts(NamedTuple):
    fragmentReads: int
    fragmentWrites: int


class PrimaryNodeSet(NamedTuple):
    members: frozenset


@dataclass
class AdvancedInvariantWitness:
    """Census outcome: which nodes satisfy each storage bullet."""
    primaryOk: np.ndarray   # (N,) bool, full primary complement present
    helperOk: np.ndarray    # (N,) bool, staircase matches the expected pattern

    def members(self) -> list:
        return [int(x) for x in np.flatnonzero(self.primaryOk & self.helperOk)]


@dataclass
class EfiRotation:
    """Physical fragment labels currently serving the N primary and r
    helper roles.

    Fragments are keyed by physical label, so a completed repair step
    relabels by list surgery alone: the donated front helper label becomes
    the repaired node's primary label, and that node's old primary label
    joins the back of the helper list.
    """
    primaryEfis: list
    helperEfis: list
    pendingNode: Optional[int] = None

    def begin_step(self, node: int) -> None:
        if self.pendingNode is not None:
            raise InvariantViolation("a repair step is already in flight")
        self.pendingNode = node

    def new_helper_efis(self) -> list:
        """Helper labels once the in-flight step commits."""
        if self.pendingNode is None:
            raise InvariantViolation("no repair step in flight")
        return self.helperEfis[1:] + [self.primaryEfis[self.pendingNode]]

    def commit_step(self) -> None:
        node = self.pendingNode
        if node is None:
            raise InvariantViolation("no repair step in flight")
        donated = self.helperEfis[0]
        self.helperEfis = self.new_helper_efis()
        self.primaryEfis[node] = donated
        self.pendingNode = None

    def assert_distinct(self) -> None:
        labels = self.primaryEfis + self.helperEfis
        if sorted(labels) != list(range(len(labels))):
            raise InvariantViolation("labels are not a permutation of 0..n-1")


@dataclass
class GroupLayout:
    N: int
    r: int
    k: int                  # decode threshold: N-1 periodic, N-cap poisson
    flen: int
    clen: int
    beta: float
    variant: str
    counterCap: int
    codec: erasure.CodecParams
    rot: np.ndarray         # (N,) int64, completed rotations per group
    P: np.ndarray           # (N, N, r) bool: node holds primary of (group, phys)
    H: np.ndarray           # (N, r, r) bool: anchor holds helper m of (anchor, phys)
    tri: np.ndarray         # (r, r, r) bool staircase patterns indexed by rot % r
    sources: Optional[dict] = None   # byte backend: (group, phys) -> object bytes

    def front_phys(self, group: int) -> int:
        """Physical index of the group's position-0 object."""
        return int(self.rot[group]) % self.r

    def phys_at(self, group: int, position: int) -> int:
        return (int(self.rot[group]) + position) % self.r


@dataclass
class AdvancedStepRecord:
    node: int
    bitsRead: int
    bitsWritten: int
    counts: dict            # {"generate"|"move"|"update": [OpCounts, ...]}
    futile: bool = False    # target failed mid-step; it queues again
    startTime: float = 0.0
    endTime: float = 0.0


def r_for_target_overhead(N: int, beta: float) -> int:
    """Helper count giving storage overhead close to beta at large N."""
    if not 0.0 < beta < 1.0:
        raise ConfigError("beta must be in (0, 1)")
    return max(1, round(2.0 * beta * N / (1.0 - beta)))


def _staircase_patterns(r: int) -> np.ndarray:
    tri = np.zeros((r, r, r), dtype=bool)
    for v in range(r):
        for p in range(r):
            tri[v, p, : (p - v) % r + 1] = True
    return tri


def advanced_store(N: int, clen: int, r: int, *, variant: str = "periodic",
                   eps: float = 0.0, backend: str = "auto", payload_rng=None):
    """Build the initial cluster; returns (ClusterState, GroupLayout, EfiRotation).

    Every node gets N*r primary fragments plus the r(r+1)/2 helper
    staircase for its own group, filling capacity clen exactly.
    """
    if N < 2 or r < 1:
        raise ConfigError("need N >= 2 and r >= 1")
    if variant == "periodic":
        if eps:
            raise ConfigError("periodic variant takes no eps")
        cap = 1
    elif variant == "poisson":
        if not 0.0 <= eps < 1.0:
            raise ConfigError("poisson variant needs eps in [0, 1)")
        cap = int(math.floor(eps / 2.0 * N + 1e-9)) + 1
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    k = N - cap
    if k < 1:
        raise ConfigError(f"slack cap {cap} leaves no decode threshold at N={N}")
    divisor = r * N + r * (r + 1) // 2
    if clen % divisor:
        raise ConfigError(
            f"clen {clen} not divisible by r*(N + (r+1)/2) = {divisor}")
    flen = clen // divisor
    beta = (r + 1 + 2 * cap) / (2 * N + r + 1)
    if r * (1.0 - beta) > 2.0 * N * (beta - eps / 2.0) + 1e-9:
        raise InvariantViolation("helper count exceeds what the overhead buys")
    codec = erasure.make_codec(N + r, k, flen, backend=backend)

    state = ClusterState(N=N, capacity=clen)
    tri = _staircase_patterns(r)
    layout = GroupLayout(N=N, r=r, k=k, flen=flen, clen=clen, beta=beta,
                         variant=variant, counterCap=cap, codec=codec,
                         rot=np.zeros(N, dtype=np.int64),
                         P=np.ones((N, N, r), dtype=bool),
                         H=np.tile(tri[0], (N, 1, 1)), tri=tri)
    rotation = EfiRotation(primaryEfis=list(range(N)),
                           helperEfis=list(range(N, N + r)))

    if codec.backend == "byte":
        if payload_rng is None:
            raise ConfigError("byte backend needs payload_rng")
        layout.sources = {}
        for g in range(N):
            for p in range(r):
                src = payload_rng.bytes(k * flen // 8)
                layout.sources[(g, p)] = src
                frags = erasure.encode(src, range(N + p + 1), codec)
                for m in range(N):
                    state.store_fragment(m, (g, p), m, frags[m], flen, t=0.0)
                for e in range(N, N + p + 1):
                    state.store_fragment(g, (g, p), e, frags[e], flen, t=0.0)
        for nid, node in enumerate(state.nodes):
            if node.usedBits != clen:
                raise InvariantViolation(f"node {nid} stored {node.usedBits} bits")
    else:
        state.meter_write_bulk({m: clen for m in range(N)}, t=0.0)
    return state, layout, rotation


def _pick_primary_sources(layout, group, phys, exclude, need):
    picked = []
    for node in np.flatnonzero(layout.P[:, group, phys]):
        node = int(node)
        if node == exclude:
            continue
        picked.append(node)
        if len(picked) == need:
            return picked
    raise DecodeError(
        f"object ({group},{phys}) has {len(picked)} primary sources, need {need}")


def _decode_object(state, layout, rotation, group, phys, srcs):
    frags = {}
    for m in srcs:
        efi = rotation.primaryEfis[m]
        payload = state.nodes[m].fragments.get(((group, phys), efi))
        if payload is None:
            raise InvariantViolation(f"primary map out of sync at node {m}")
        frags[efi] = payload
    data = erasure.decode(frags, layout.codec)
    if data != layout.sources[(group, phys)]:
        raise InvariantViolation(f"decode mismatch for object ({group},{phys})")
    return data


def _add_reads(reads, nodes, bits):
    for m in nodes:
        reads[m] = reads.get(m, 0) + bits


def generate_helpers(state: ClusterState, layout: GroupLayout,
                     rotation: EfiRotation, group: int, *, t=None,
                     collect=None, exclude=None) -> OpCounts:
    """Rebuild the helper staircase for a group at its anchor node.

    Decodes each of the r group objects from k primary fragments and
    writes helpers 0..j for the object at position j.  Reads accumulate
    into collect for the caller to meter; with collect=None they are
    metered here as an impulse at t.
    """
    if t is None:
        t = state.now
    reads = {} if collect is None else collect
    byte = layout.codec.backend == "byte"
    writes = 0
    for j in range(layout.r):
        p = layout.phys_at(group, j)
        srcs = _pick_primary_sources(layout, group, p, exclude, layout.k)
        _add_reads(reads, srcs, layout.flen)
        if byte:
            data = _decode_object(state, layout, rotation, group, p, srcs)
            labels = rotation.helperEfis[: j + 1]
            frags = erasure.encode(data, labels, layout.codec)
            for e in labels:
                state.store_fragment(group, (group, p), e, frags[e],
                                     layout.flen, t=t)
        layout.H[group, p, : j + 1] = True
        writes += j + 1
    if not byte:
        state.meter_write_bulk({group: writes * layout.flen}, t=t)
    if collect is None:
        state.meter_read_spread(reads, t, t)
    return OpCounts(layout.k * layout.r, writes)


def move_helpers(state: ClusterState, layout: GroupLayout,
                 rotation: EfiRotation, fromNode: int, toNode: int, *,
                 t=None, collect=None) -> OpCounts:
    """Hand every position-0 helper of fromNode's group to toNode, where
    the donated fragments take over the primary role.

    fromNode == toNode relabels in place; the copy is still metered.
    """
    if t is None:
        t = state.now
    if not layout.H[fromNode, :, 0].all():
        raise MissingFragmentError(
            f"node {fromNode} lacks position-0 helpers to donate")
    reads = {} if collect is None else collect
    _add_reads(reads, [fromNode], layout.r * layout.flen)
    donated = rotation.helperEfis[0]
    if layout.codec.backend == "byte":
        for p in range(layout.r):
            obj = (fromNode, p)
            payload = state.nodes[fromNode].fragments.get((obj, donated))
            if payload is None:
                raise InvariantViolation(
                    f"helper map out of sync at node {fromNode}")
            state.store_fragment(toNode, obj, donated, payload, layout.flen, t=t)
            if fromNode != toNode:
                state.delete_fragment(fromNode, obj, donated)
    else:
        state.meter_write_bulk({toNode: layout.r * layout.flen}, t=t)
    layout.P[toNode, fromNode, :] = True
    layout.H[fromNode, :, 0] = False
    if collect is None:
        state.meter_read_spread(reads, t, t)
    return OpCounts(layout.r, layout.r)


def update_helpers(state: ClusterState, layout: GroupLayout,
                   rotation: EfiRotation, group: int, *, t=None,
                   collect=None, exclude=None) -> OpCounts:
    """Shift the group order by one and rebuild the full helper set for
    the object that moved to the back.

    Requires an in-flight step on rotation: the new back object's helpers
    take the post-step labels, ending with the repaired node's old primary
    label.  The other objects already hold exactly the helpers their new
    position needs, one label down from where they sat before.
    """
    if t is None:
        t = state.now
    r = layout.r
    p0 = layout.front_phys(group)
    srcs = _pick_primary_sources(layout, group, p0, exclude, layout.k)
    reads = {} if collect is None else collect
    _add_reads(reads, srcs, layout.flen)
    labels = rotation.new_helper_efis()
    if layout.codec.backend == "byte":
        data = _decode_object(state, layout, rotation, group, p0, srcs)
        frags = erasure.encode(data, labels, layout.codec)
        for e in labels:
            state.store_fragment(group, (group, p0), e, frags[e],
                                 layout.flen, t=t)
    else:
        state.meter_write_bulk({group: r * layout.flen}, t=t)
    layout.H[group, :, : r - 1] = layout.H[group, :, 1:].copy()
    layout.H[group, :, r - 1] = False
    layout.rot[group] += 1
    layout.H[group, p0, :] = True
    if collect is None:
        state.meter_read_spread(reads, t, t)
    return OpCounts(layout.k, r)


def _wipe_node(state, layout, node) -> None:
    # formatting the replacement is free; only repair traffic is metered
    store = state.nodes[node]
    for object_id, efi in list(store.fragments):
        state.delete_fragment(node, object_id, efi)
    layout.P[node] = False
    layout.H[node] = False


def advanced_fail_node(state: ClusterState, layout: GroupLayout, t: float,
                       node: int) -> None:
    state.fail_node(node, t)
    layout.P[node] = False
    layout.H[node] = False


def advanced_repair_step(state: ClusterState, layout: GroupLayout,
                         rotation: EfiRotation, failedNode: int, *,
                         t0=None, t1=None) -> AdvancedStepRecord:
    """One full periodic repair step for failedNode, run synchronously.

    Generates the target's own staircase first, then per group (ascending,
    including the target's own) moves the donated helpers in and updates
    the staircase.  Reads are metered as one stream over [t0, t1]; writes
    land at t1.  The Poisson variant instead drives the same chain through
    AdvancedPoissonRepairer, one paced sub-operation at a time.
    """
    if t0 is None:
        t0 = state.now
    if t1 is None:
        t1 = t0
    rotation.begin_step(failedNode)
    _wipe_node(state, layout, failedNode)
    collect = {}
    counts = {"generate": [], "move": [], "update": []}
    counts["generate"].append(
        generate_helpers(state, layout, rotation, failedNode, t=t1,
                         collect=collect, exclude=failedNode))
    for group in range(layout.N):
        if not layout.H[group, :, 0].all():
            counts["generate"].append(
                generate_helpers(state, layout, rotation, group, t=t1,
                                 collect=collect, exclude=failedNode))
        counts["move"].append(
            move_helpers(state, layout, rotation, group, failedNode, t=t1,
                         collect=collect))
        counts["update"].append(
            update_helpers(state, layout, rotation, group, t=t1,
                           collect=collect, exclude=failedNode))
    rotation.commit_step()
    rotation.assert_distinct()
    state.meter_read_spread(collect, t0, t1)
    written = sum(c.fragmentWrites for seq in counts.values() for c in seq)
    return AdvancedStepRecord(node=failedNode, bitsRead=sum(collect.values()),
                              bitsWritten=written * layout.flen,
                              counts=counts, startTime=t0, endTime=t1)


def census(layout: GroupLayout) -> AdvancedInvariantWitness:
    N, r = layout.N, layout.r
    primaryOk = layout.P.reshape(N, -1).all(axis=1)
    expected = layout.tri[layout.rot % r]
    helperOk = (layout.H == expected).all(axis=(1, 2))
    return AdvancedInvariantWitness(primaryOk=primaryOk, helperOk=helperOk)


def witness_set(layout: GroupLayout) -> PrimaryNodeSet:
    return PrimaryNodeSet(members=frozenset(census(layout).members()))


def assert_advanced_invariant(layout: GroupLayout, minimum=None) -> None:
    """Require at least `minimum` witness members (all N by default)."""
    got = len(census(layout).members())
    need = layout.N if minimum is None else minimum
    if got < need:
        raise InvariantViolation(f"witness set has {got} members, need {need}")


def recoverable_census(layout: GroupLayout) -> bool:
    """True when every object still reaches its decode threshold."""
    N = layout.N
    full = layout.P.reshape(N, -1).all(axis=1)
    if int(full.sum()) >= layout.k:
        return True
    per_object = (layout.P.sum(axis=0, dtype=np.int64)
                  + layout.H.sum(axis=2, dtype=np.int64))
    return int(per_object.min()) >= layout.k


def node_used_bits(layout: GroupLayout) -> np.ndarray:
    N = layout.N
    frags = (layout.P.reshape(N, -1).sum(axis=1, dtype=np.int64)
             + layout.H.reshape(N, -1).sum(axis=1, dtype=np.int64))
    return frags * layout.flen


def check_advanced_sync(state: ClusterState, layout: GroupLayout,
                        rotation: EfiRotation) -> None:
    """Cross-check the byte store against the placement arrays.

    Only meaningful between steps, when labels are committed; symbolic
    layouts have nothing to compare.
    """
    if layout.codec.backend != "byte":
        return
    for node in range(layout.N):
        expected = set()
        for g in range(layout.N):
            for p in range(layout.r):
                if layout.P[node, g, p]:
                    expected.add(((g, p), rotation.primaryEfis[node]))
        for p in range(layout.r):
            for m in range(layout.r):
                if layout.H[node, p, m]:
                    expected.add(((node, p), rotation.helperEfis[m]))
        actual = set(state.nodes[node].fragments)
        if actual != expected:
            raise InvariantViolation(
                f"node {node}: store and placement arrays disagree "
                f"({len(actual)} vs {len(expected)} fragments)")


@dataclass(frozen=True)
class AdvancedSchedule:
    """Timing contract for the Poisson variant.

    Sub-operations are paced so their reads stream at rateProof, the
    conservative ceiling with the larger leading coefficient; rateTheorem
    carries the headline coefficient and is reported for comparison.
    """
    lam: float
    N: int
    beta: float
    epsPrime: float
    counterCap: int
    clen: int
    rateTheorem: float
    rateProof: float
    genTimeBound: float          # ceiling for one helper regeneration
    moveUpdateTimeBound: float   # ceiling for a step's N move+update pairs
    deltaTheorem: float          # unrecoverability bound per M failures

    def subop_duration(self, bits: int) -> float:
        return bits / self.rateProof

    def steps_time_bound(self, m: int) -> float:
        """Time for m - cap steps keeping pace with m failures."""
        return (1.0 - self.epsPrime) / (self.lam * self.N) * (
            m - self.counterCap / (2.0 * self.beta + 1.0))


def advanced_schedule(counter: RepairCounter, variant: str, lam: float,
                      N: int, beta: float, eps: float, *,
                      clen: int) -> AdvancedSchedule:
    if variant != "poisson":
        raise ConfigError("schedule applies to the poisson variant only")
    if not 0.0 <= eps < 1.0:
        raise ConfigError("eps must be in [0, 1)")
    if lam <= 0.0 or N < 2 or clen < 1:
        raise ConfigError("need lam > 0, N >= 2, clen >= 1")
    epsp = eps / 2.0
    if beta <= epsp:
        raise ConfigError(f"beta {beta} must exceed eps/2 = {epsp}")
    base = (1.0 - beta) / (1.0 - epsp) * lam * N * clen
    half = 1.0 / (2.0 * (beta - epsp))
    return AdvancedSchedule(
        lam=lam, N=N, beta=beta, epsPrime=epsp, counterCap=counter.cap,
        clen=clen,
        rateTheorem=base * (1.0 + half),
        rateProof=base * (2.0 + half),
        genTimeBound=(1.0 - epsp) / (lam * N) * 2.0 * beta / (2.0 * beta + 1.0),
        moveUpdateTimeBound=(1.0 - epsp) / (lam * N),
        deltaTheorem=math.exp(
            -eps * eps * (1.0 - epsp) * beta * N / (4.0 * (2.0 * beta + 1.0))))


@dataclass
class _SubOp:
    kind: str       # "generate" or "moveupdate"
    group: int
    t0: float
    t1: float


class AdvancedPoissonRepairer:
    """Drives repair steps as chains of paced sub-operations.

    One step is in flight at a time; failed nodes queue oldest-first and
    the next step starts whenever the queue is non-empty, so the counter
    never strands a broken node.  Each sub-operation commits atomically at
    its end time, binding reads to sources alive at completion.  A donor
    failing mid-sub-operation aborts it with pro-rata read metering and
    the chain re-plans, regenerating the donor's helpers before retrying
    the move.  The step's own target failing does not stop the chain: the
    finished step leaves the target outside the witness census, the
    counter still ticks up at completion, and the node queues again.
    """

    def __init__(self, state: ClusterState, layout: GroupLayout,
                 rotation: EfiRotation, schedule: AdvancedSchedule):
        if layout.variant != "poisson":
            raise ConfigError("repairer drives the poisson variant only")
        self.state = state
        self.layout = layout
        self.rotation = rotation
        self.schedule = schedule
        self.counter = RepairCounter.at_cap(layout.counterCap)
        self.queue = deque()
        self.halted = False
        self.records = []
        self.stepNode: Optional[int] = None
        self.futile = False
        self.stepStart = 0.0
        self.stage = "idle"          # "gen_target" | "chain"
        self.nextGroup = 0
        self.subop: Optional[_SubOp] = None
        self.stepCounts = None
        self.stepBitsRead = 0
        self.stepBitsWritten = 0

    @property
    def idle(self) -> bool:
        return self.stepNode is None

    def next_completion(self) -> Optional[float]:
        return self.subop.t1 if self.subop is not None else None

    def on_failure(self, t: float, node: int) -> None:
        advanced_fail_node(self.state, self.layout, t, node)
        self.counter.value -= 1
        self.counter.minSeen = min(self.counter.minSeen, self.counter.value)
        if self.counter.value < 0:
            self.halted = True
        if node == self.stepNode:
            self.futile = True
        if node not in self.queue:
            self.queue.append(node)
        if self.subop is not None and node == self.subop.group:
            self._abort_subop(t)
            self._plan(t)
        elif self.stepNode is None and not self.halted:
            self._start_step(t)

    def on_subop_complete(self, t: float) -> Optional[AdvancedStepRecord]:
        """Commit the due sub-operation; returns the step record when the
        whole chain just finished."""
        sub = self.subop
        if sub is None:
            raise InvariantViolation("no sub-operation in flight")
        if abs(t - sub.t1) > 1e-9 * max(1.0, abs(sub.t1)):
            raise InvariantViolation(
                f"completion at {t}, schedule says {sub.t1}")
        self.subop = None
        collect = {}
        if sub.kind == "generate":
            c = generate_helpers(self.state, self.layout, self.rotation,
                                 sub.group, t=t, collect=collect,
                                 exclude=self.stepNode)
            self.stepCounts["generate"].append(c)
            written = c.fragmentWrites
        else:
            cm = move_helpers(self.state, self.layout, self.rotation,
                              sub.group, self.stepNode, t=t, collect=collect)
            cu = update_helpers(self.state, self.layout, self.rotation,
                                sub.group, t=t, collect=collect,
                                exclude=self.stepNode)
            self.stepCounts["move"].append(cm)
            self.stepCounts["update"].append(cu)
            written = cm.fragmentWrites + cu.fragmentWrites
            self.nextGroup += 1
        self.state.meter_read_spread(collect, sub.t0, t)
        self.stepBitsRead += sum(collect.values())
        self.stepBitsWritten += written * self.layout.flen
        return self._plan(t)

    def _start_step(self, t: float) -> None:
        if not self.queue:
            return
        node = self.queue.popleft()
        self.stepNode = node
        self.futile = False
        self.stepStart = t
        self.stage = "gen_target"
        self.nextGroup = 0
        self.stepCounts = {"generate": [], "move": [], "update": []}
        self.stepBitsRead = 0
        self.stepBitsWritten = 0
        self.rotation.begin_step(node)
        _wipe_node(self.state, self.layout, node)
        self._plan(t)

    def _plan(self, t: float) -> Optional[AdvancedStepRecord]:
        if self.stepNode is None:
            return None
        layout = self.layout
        if self.stage == "gen_target":
            if layout.H[self.stepNode, :, 0].all():
                self.stage = "chain"
            else:
                self._launch("generate", self.stepNode, t)
                return None
        if self.nextGroup < layout.N:
            group = self.nextGroup
            if layout.H[group, :, 0].all():
                self._launch("moveupdate", group, t)
            else:
                self._launch("generate", group, t)
            return None
        return self._finish_step(t)

    def _launch(self, kind: str, group: int, t: float) -> None:
        layout = self.layout
        if kind == "generate":
            bits = layout.k * layout.r * layout.flen
        else:
            bits = (layout.r + layout.k) * layout.flen
        self.subop = _SubOp(kind=kind, group=group, t0=t,
                            t1=t + self.schedule.subop_duration(bits))

    def _finish_step(self, t: float) -> AdvancedStepRecord:
        self.rotation.commit_step()
        self.rotation.assert_distinct()
        record = AdvancedStepRecord(
            node=self.stepNode, bitsRead=self.stepBitsRead,
            bitsWritten=self.stepBitsWritten, counts=self.stepCounts,
            futile=self.futile, startTime=self.stepStart, endTime=t)
        self.records.append(record)
        self.counter.value = min(self.counter.value + 1, self.counter.cap)
        self.stepNode = None
        self.futile = False
        self.stepCounts = None
        self.stepBitsRead = 0
        self.stepBitsWritten = 0
        if not self.halted:
            self._start_step(t)
        return record

    def _read_map(self, sub: _SubOp) -> dict:
        """Planned per-node read bits of a sub-operation, re-derived from
        the current placement; used only to attribute aborted reads."""
        layout = self.layout
        reads = {}
        try:
            if sub.kind == "generate":
                for j in range(layout.r):
                    p = layout.phys_at(sub.group, j)
                    srcs = _pick_primary_sources(layout, sub.group, p,
                                                 self.stepNode, layout.k)
                    _add_reads(reads, srcs, layout.flen)
            else:
                _add_reads(reads, [sub.group], layout.r * layout.flen)
                p0 = layout.front_phys(sub.group)
                srcs = _pick_primary_sources(layout, sub.group, p0,
                                             self.stepNode, layout.k)
                _add_reads(reads, srcs, layout.flen)
        except DecodeError:
            log.warning("aborted sub-operation reads under-attributed: "
                        "sources already gone")
        return reads

    def _abort_subop(self, t: float) -> None:
        sub = self.subop
        self.subop = None
        if t <= sub.t0:
            return
        frac = min(1.0, (t - sub.t0) / (sub.t1 - sub.t0))
        scaled = {}
        for node, bits in self._read_map(sub).items():
            part = int(bits * frac + 0.5)
            if part:
                scaled[node] = part
        if scaled:
            self.state.meter_read_spread(scaled, sub.t0, t)
            self.stepBitsRead += sum(scaled.values())
