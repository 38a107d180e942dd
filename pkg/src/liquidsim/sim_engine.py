"""Deterministic trial driver and experiment aggregation.

run_trial merges a trial's failure sequence with repair-completion events
into one time-ordered loop (completions win ties), runs invariant
assertions after events, and scores recoverability by fragment census.  A
trial ends the moment the census goes unrecoverable; metrics (bits moved,
average and peak read rates, counter minimum) come from the cluster
meters.  run_experiment fans trials out over independent Philox streams,
so sequential and pooled execution produce identical reports.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
from typing import Optional

import numpy as np

from . import advanced_liquid as adv
from . import bounds, failure_gen, liquid, rng
from .errors import ConfigError, DecodeError, InvariantViolation

log = logging.getLogger(__name__)

CSV_HEADER = ("trial,seed,recoverable,first_loss_time,bits_read,"
              "bits_written,avg_read_rate,peak_read_rate,counter_min")

# fault injection trips after this many processed events
_FAULT_AFTER_EVENTS = 3


@dataclass(frozen=True)
class Scenario:
    """Everything a trial needs; immutable so worker processes share it."""
    sysParams: bounds.SystemParams
    repairer: str                     # "liquid" | "advancedLiquid"
    variant: str                      # "periodic" | "poisson"
    codecBackend: str = "auto"
    eps: bounds.EpsilonSet = field(default_factory=bounds.EpsilonSet)
    failureCount: int = 0
    trials: int = 1
    seed: int = 0
    peakWindow: Optional[float] = None
    period: float = 1.0               # periodic inter-failure spacing
    advancedR: Optional[int] = None   # helper count; derived from beta if None
    stepDuration: Optional[float] = None   # liquid poisson override; inf disables
    idModel: str = "uniform"
    assertEvery: int = 1              # invariant checks every Kth event
    collectTrace: bool = False
    faultInjection: bool = False      # test hook: corrupt state mid-trial

    def __post_init__(self):
        if self.repairer not in ("liquid", "advancedLiquid"):
            raise ConfigError(f"unknown repairer {self.repairer!r}")
        if self.variant not in ("periodic", "poisson"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == "poisson" and self.sysParams.lam <= 0:
            raise ConfigError("poisson variant needs lam > 0")
        if self.failureCount < 0 or self.trials < 1:
            raise ConfigError("need failureCount >= 0 and trials >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")
        if self.period <= 0:
            raise ConfigError("period must be positive")
        if self.peakWindow is not None and self.peakWindow <= 0:
            raise ConfigError("peakWindow must be positive")
        if self.stepDuration is not None and not self.stepDuration > 0:
            raise ConfigError("stepDuration must be positive (inf disables)")
        if self.assertEvery < 1:
            raise ConfigError("assertEvery must be >= 1")


@dataclass
class TrialResult:
    trial: int
    seed: int
    recoverableThroughout: bool
    firstLossTime: Optional[float]
    totalBitsRead: int
    totalBitsWritten: int
    avgReadRate: float
    peakReadRate: float
    counterMin: int
    perStepTrace: Optional[list] = None


@dataclass
class GsEstimate:
    mean: float
    ci99: float            # half-width of the 99% confidence interval
    trials: int


@dataclass
class ExperimentReport:
    results: list
    unrecoverableFraction: float
    meanAvgReadRate: float
    maxPeakReadRate: float
    readPerFailure: float
    lowerBoundPerFailure: Optional[float]
    boundReport: Optional[bounds.BoundReport]
    ratios: dict


def _failures(scenario: Scenario, streamId: int) -> failure_gen.FailureSeq:
    g = rng.stream(scenario.seed, streamId, rng.SUB_FAILURE_TIMES)
    sp = scenario.sysParams
    if scenario.variant == "periodic":
        return failure_gen.gen_periodic(scenario.period, scenario.failureCount,
                                        scenario.idModel, g, sp.N)
    return failure_gen.gen_poisson(sp.lam, sp.N, scenario.failureCount, g,
                                   scenario.idModel)


class _LiquidDriver:
    completionKind = "step"

    def __init__(self, scenario: Scenario, streamId: int):
        sp = scenario.sysParams
        payload = rng.stream(scenario.seed, streamId, rng.SUB_PAYLOAD)
        self.state, self.layout = liquid.liquid_store(
            sp.xlen, sp.N, sp.clen, sp.beta, variant=scenario.variant,
            eps=scenario.eps.eps, backend=scenario.codecBackend,
            payload_rng=payload)
        self.counter = liquid.RepairCounter.at_cap(self.layout.counterCap)
        if scenario.variant == "periodic":
            dur = scenario.period / 2.0    # step lands mid-gap
        elif scenario.stepDuration is not None:
            dur = scenario.stepDuration
        else:
            dur = (1.0 - scenario.eps.eps / 2.0) / (sp.lam * sp.N)
        self.schedule = liquid.StepSchedule(stepDuration=dur)

    def next_completion(self) -> Optional[float]:
        step = self.schedule.inProgress
        return step[1] if step is not None else None

    def on_failure(self, t: float, node: int) -> None:
        liquid.liquid_on_failure(self.state, self.layout, self.counter,
                                 self.schedule, t, node)

    def on_completion(self, t: float) -> None:
        try:
            liquid.liquid_on_step_complete(self.state, self.layout,
                                           self.counter, self.schedule, t)
        except DecodeError as e:
            log.warning("repair stalled at t=%g: %s", t, e)
            self.schedule.halted = True
            self.schedule.inProgress = None

    def recoverable(self) -> bool:
        counts = (len(e) for e in self.layout.perObjectEfis.values())
        return min(counts) >= self.layout.k

    def check_invariant(self) -> None:
        if self.counter.value >= 0:
            liquid.assert_liquid_invariant(self.layout, self.counter.value)

    def counter_value(self) -> int:
        return self.counter.value

    def counter_min(self) -> int:
        return self.counter.minSeen

    def inject_fault(self) -> None:
        back = self.layout.objectOrder[-1]
        efis = self.layout.perObjectEfis[back]
        efis.discard(max(efis))


class _AdvancedPeriodicDriver:
    completionKind = "step"

    def __init__(self, scenario: Scenario, streamId: int):
        sp = scenario.sysParams
        r = scenario.advancedR or adv.r_for_target_overhead(sp.N, sp.beta)
        payload = rng.stream(scenario.seed, streamId, rng.SUB_PAYLOAD)
        self.state, self.layout, self.rotation = adv.advanced_store(
            sp.N, sp.clen, r, variant="periodic",
            backend=scenario.codecBackend, payload_rng=payload)
        self.counter = liquid.RepairCounter.at_cap(1)
        self.period = scenario.period
        self.pending: Optional[tuple] = None

    def next_completion(self) -> Optional[float]:
        return self.pending[1] if self.pending is not None else None

    def on_failure(self, t: float, node: int) -> None:
        adv.advanced_fail_node(self.state, self.layout, t, node)
        self.counter.value -= 1
        self.counter.minSeen = min(self.counter.minSeen, self.counter.value)
        if self.pending is not None:
            raise InvariantViolation("periodic steps must not overlap")
        self.pending = (t, t + self.period / 2.0, node)

    def on_completion(self, t: float) -> None:
        t0, _, node = self.pending
        self.pending = None
        try:
            adv.advanced_repair_step(self.state, self.layout, self.rotation,
                                     node, t0=t0, t1=t)
            self.counter.value = min(self.counter.value + 1, self.counter.cap)
        except DecodeError as e:
            log.warning("repair stalled at t=%g: %s", t, e)

    def recoverable(self) -> bool:
        return adv.recoverable_census(self.layout)

    def check_invariant(self) -> None:
        need = self.layout.N - 1 if self.pending is not None else self.layout.N
        adv.assert_advanced_invariant(self.layout, need)

    def counter_value(self) -> int:
        return self.counter.value

    def counter_min(self) -> int:
        return self.counter.minSeen

    def inject_fault(self) -> None:
        self.layout.P[0, 0, 0] = False
        self.layout.P[1, 0, 0] = False


class _AdvancedPoissonDriver:
    completionKind = "subop"

    def __init__(self, scenario: Scenario, streamId: int):
        sp = scenario.sysParams
        r = scenario.advancedR or adv.r_for_target_overhead(sp.N, sp.beta)
        payload = rng.stream(scenario.seed, streamId, rng.SUB_PAYLOAD)
        state, layout, rotation = adv.advanced_store(
            sp.N, sp.clen, r, variant="poisson", eps=scenario.eps.eps,
            backend=scenario.codecBackend, payload_rng=payload)
        sched = adv.advanced_schedule(
            liquid.RepairCounter.at_cap(layout.counterCap), "poisson",
            sp.lam, sp.N, layout.beta, scenario.eps.eps, clen=sp.clen)
        self.rep = adv.AdvancedPoissonRepairer(state, layout, rotation, sched)
        self.state = state
        self.layout = layout

    def next_completion(self) -> Optional[float]:
        return self.rep.next_completion()

    def on_failure(self, t: float, node: int) -> None:
        self.rep.on_failure(t, node)

    def on_completion(self, t: float) -> None:
        try:
            self.rep.on_subop_complete(t)
        except DecodeError as e:
            log.warning("repair stalled at t=%g: %s", t, e)
            self.rep.subop = None
            self.rep.halted = True

    def recoverable(self) -> bool:
        return adv.recoverable_census(self.layout)

    def check_invariant(self) -> None:
        c = self.rep.counter.value
        if c >= 0:
            members = len(adv.census(self.layout).members())
            if members < self.layout.k + c:
                raise InvariantViolation(
                    f"witness set {members} below k + counter = "
                    f"{self.layout.k + c}")

    def counter_value(self) -> int:
        return self.rep.counter.value

    def counter_min(self) -> int:
        return self.rep.counter.minSeen

    def inject_fault(self) -> None:
        self.layout.P[0, 0, 0] = False
        self.layout.P[1, 0, 0] = False


def _make_driver(scenario: Scenario, streamId: int):
    if scenario.repairer == "liquid":
        return _LiquidDriver(scenario, streamId)
    if scenario.variant == "periodic":
        return _AdvancedPeriodicDriver(scenario, streamId)
    return _AdvancedPoissonDriver(scenario, streamId)


def run_trial(scenario: Scenario, streamId: int) -> TrialResult:
    """One deterministic trial; pure function of (scenario, streamId).

    Completions due at or before a failure's timestamp are processed first.
    After the last failure the schedule drains (no new failures arrive, so
    the pending work is finite), which keeps per-failure totals exact.
    """
    driver = _make_driver(scenario, streamId)
    seq = _failures(scenario, streamId)
    state = driver.state
    state.begin_phase("repair")
    times, ids = seq.times, seq.ids
    M = len(times)
    trace = [] if scenario.collectTrace else None
    events = 0
    last_t = 0.0
    lost_at: Optional[float] = None

    def post_event(t, kind, bits_r, bits_w):
        nonlocal events, last_t, lost_at
        events += 1
        last_t = max(last_t, t)
        if trace is not None:
            trace.append((t, kind, driver.counter_value(), bits_r, bits_w))
        if scenario.faultInjection and events == _FAULT_AFTER_EVENTS:
            driver.inject_fault()
        if not driver.recoverable():
            lost_at = t
        elif events % scenario.assertEvery == 0:
            driver.check_invariant()

    def run_completions(horizon):
        while lost_at is None:
            t_c = driver.next_completion()
            if t_c is None or t_c > horizon:
                break
            before_r = state.phase_read["repair"]
            before_w = state.phase_written["repair"]
            driver.on_completion(t_c)
            post_event(t_c, driver.completionKind,
                       state.phase_read["repair"] - before_r,
                       state.phase_written["repair"] - before_w)

    fi = 0
    while fi < M and lost_at is None:
        t_fail = float(times[fi])
        run_completions(t_fail)
        if lost_at is not None:
            break
        driver.on_failure(t_fail, int(ids[fi]))
        fi += 1
        post_event(t_fail, "failure", 0, 0)
    run_completions(math.inf)

    t_end = lost_at if lost_at is not None else last_t
    bits_read = state.phase_read["repair"]
    bits_written = state.phase_written["repair"]
    if t_end > 0:
        _, _, avg, peak = state.meter_window(0.0, t_end, scenario.peakWindow)
    else:
        avg = peak = 0.0
    return TrialResult(trial=streamId, seed=scenario.seed,
                       recoverableThroughout=lost_at is None,
                       firstLossTime=lost_at, totalBitsRead=bits_read,
                       totalBitsWritten=bits_written, avgReadRate=avg,
                       peakReadRate=peak, counterMin=driver.counter_min(),
                       perStepTrace=trace)


def _trial_star(args):
    return run_trial(*args)


def run_experiment(scenario: Scenario, jobs: int = 1) -> ExperimentReport:
    """Trials 0..trials-1 on independent streams, plus bound comparisons.

    jobs > 1 uses a process pool; results are ordered by streamId either
    way, so the report is identical.
    """
    tasks = [(scenario, s) for s in range(scenario.trials)]
    if jobs > 1:
        with Pool(processes=jobs) as pool:
            results = pool.map(_trial_star, tasks)
    else:
        results = [run_trial(*t) for t in tasks]

    n = len(results)
    unrec = sum(1 for r in results if not r.recoverableThroughout) / n
    mean_avg = sum(r.avgReadRate for r in results) / n
    max_peak = max(r.peakReadRate for r in results)
    M = scenario.failureCount
    read_per_failure = (sum(r.totalBitsRead for r in results) / n / M
                        if M else 0.0)

    report = None
    lower = None
    ratios = {}
    try:
        phase = bounds.derive_phase_params(scenario.sysParams)
        report = bounds.poisson_bounds(scenario.sysParams, phase, scenario.eps)
        lower = ((1.0 - phase.betaPrime) * scenario.sysParams.clen
                 / bounds.lni(2.0 * phase.betaPrime))
        if lower > 0:
            ratios["readPerFailureOverLower"] = read_per_failure / lower
        if report.poissonRate > 0:
            ratios["peakOverPoissonCeiling"] = max_peak / report.poissonRate
    except ConfigError as e:
        log.info("bound report unavailable: %s", e)

    return ExperimentReport(results=results, unrecoverableFraction=unrec,
                            meanAvgReadRate=mean_avg,
                            maxPeakReadRate=max_peak,
                            readPerFailure=read_per_failure,
                            lowerBoundPerFailure=lower, boundReport=report,
                            ratios=ratios)


def monte_carlo_gs(N: int, i: int, trials: int, seed: int) -> GsEstimate:
    """Empirical draws-until-i-new-distinct-failures, with a 99% CI.

    Counts uniform node failures after a window-opening one until i
    additional distinct nodes have failed.
    """
    if not 1 <= i < N:
        raise ConfigError("need 1 <= i < N")
    if trials < 2:
        raise ConfigError("need at least 2 trials for a CI")
    g = rng.stream(seed, 0, rng.SUB_GS)
    counts = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        seen = {int(g.integers(0, N))}
        draws = 0
        while len(seen) <= i:
            draws += 1
            seen.add(int(g.integers(0, N)))
        counts[t] = draws
    mean = float(counts.mean())
    sd = float(counts.std(ddof=1))
    z99 = 2.5758293035489004
    return GsEstimate(mean=mean, ci99=z99 * sd / math.sqrt(trials),
                      trials=trials)


def json_safe(obj):
    """Replace non-finite floats with strings so output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    return obj


def result_row(r: TrialResult) -> str:
    loss = "" if r.firstLossTime is None else repr(float(r.firstLossTime))
    return ",".join([
        str(r.trial), str(r.seed),
        "true" if r.recoverableThroughout else "false", loss,
        str(r.totalBitsRead), str(r.totalBitsWritten),
        repr(float(r.avgReadRate)), repr(float(r.peakReadRate)),
        str(r.counterMin)])


def write_csv(path, results) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in results:
            fh.write(result_row(r) + "\n")


def summary_lines(report: ExperimentReport) -> list:
    """JSON-lines summary: aggregates first, then the bound report."""
    agg = {
        "trials": len(report.results),
        "unrecoverableFraction": report.unrecoverableFraction,
        "meanAvgReadRate": report.meanAvgReadRate,
        "maxPeakReadRate": report.maxPeakReadRate,
        "readPerFailure": report.readPerFailure,
        "lowerBoundPerFailure": report.lowerBoundPerFailure,
        "ratios": report.ratios,
    }
    lines = [json.dumps(json_safe(agg), sort_keys=True)]
    if report.boundReport is not None:
        d = asdict(report.boundReport)
        d["gammaTableLen"] = len(d.pop("gammaTable"))
        lines.append(json.dumps(json_safe({"boundReport": d}),
                                sort_keys=True))
    return lines


def write_summary(path, report: ExperimentReport) -> None:
    with open(path, "w") as fh:
        for line in summary_lines(report):
            fh.write(line + "\n")
