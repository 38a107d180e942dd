"""Liquid repair against a Poisson failure storm.

With memoryless failures the inter-arrival gaps bunch, so the repair
counter wanders below its resting cap.  A dip below zero is the repairer's
own loss detector; the fragment census is the ground truth.  This run
shows the two agreeing trial by trial, and the peak read rate staying
under the provisioned ceiling even in the dippiest trials.
"""

from liquidsim import EpsilonSet, Scenario, SystemParams, run_experiment

N = 50
beta = 0.3
clen = 3000
eps = 0.4                  # repairer slack: larger eps, deeper safe dips
lam = 0.01                 # per-node failure rate
k = round((1 - beta) * N)

# The provisioned step time (1 - eps/2)/(lam*N) runs the repairer at 80%
# utilization, where a long enough run practically guarantees a dip.  Give
# it double speed here so the 30 trials split into survivors and losses
# and both sides of the detector agreement are on display.
scenario = Scenario(
    sysParams=SystemParams(N=N, clen=clen, xlen=k * clen, lam=lam),
    repairer="liquid",
    variant="poisson",
    eps=EpsilonSet(eps=eps),
    failureCount=200,
    trials=30,
    seed=11,
    peakWindow=1.0 / (lam * N),
    stepDuration=0.5 / (lam * N),
)

report = run_experiment(scenario)

print(f"{'trial':>5} {'counter_min':>11} {'recoverable':>11} {'loss_time':>10}")
for res in report.results:
    loss = f"{res.firstLossTime:.1f}" if res.firstLossTime is not None else "-"
    print(f"{res.trial:>5} {res.counterMin:>11} "
          f"{str(res.recoverableThroughout):>11} {loss:>10}")

dipped = sum(1 for r in report.results if r.counterMin < 0)
lost = sum(1 for r in report.results if not r.recoverableThroughout)
print()
print(f"trials with a negative dip: {dipped} / {scenario.trials}")
print(f"trials with census loss:    {lost} / {scenario.trials}")
# the two detectors agree per trial, not just in aggregate
assert all((r.counterMin < 0) == (not r.recoverableThroughout)
           for r in report.results)

# At most one step is in flight and its reads are paced flat across the
# step, so the peak rate can never exceed the single-step slope.  At the
# provisioned pace that slope sits under the planning ceiling
# (1-b)/((1-e)b)*lam*N*clen; our doubled speed doubles the slope too.
count = int((1 - eps / 2) * (N - k))
flen = clen // count
slope = k * flen / scenario.stepDuration
ceiling = (1 - beta) / ((1 - eps) * beta) * lam * N * clen
print(f"max peak read rate:  {report.maxPeakReadRate:.1f} bits/s")
print(f"single-step slope:   {slope:.1f} bits/s")
print(f"ceiling at provisioned pace: {ceiling:.1f} bits/s")
assert report.maxPeakReadRate <= slope + 1e-9
print(f"mean read bits per failure: {report.readPerFailure:.0f}")
print(f"lower bound per failure:    {report.lowerBoundPerFailure:.0f}")
