"""Periodic liquid repair at desk scale, with real bytes on the wire.

One failure per period, one repair step per failure, and the repair queue
never grows: the counter sits at its cap the whole run.  Every step reads
exactly k fragments and decodes them with the GF(256) codec, so the traced
per-step totals are constant and the per-failure average lands on the
closed form (1-beta)/beta * clen.
"""

from liquidsim import Scenario, SystemParams, run_trial

N = 20
beta = 0.2
clen = 800                   # bits per node
k = round((1 - beta) * N)    # 16 fragments decode an object
r = N - k                    # 4 queued objects, so each fragment is clen/r bits

scenario = Scenario(
    sysParams=SystemParams(N=N, clen=clen, xlen=k * clen),
    repairer="liquid",
    variant="periodic",
    codecBackend="byte",
    failureCount=200,
    seed=7,
    collectTrace=True,
)

res = run_trial(scenario, streamId=0)
print(f"recoverable throughout: {res.recoverableThroughout}")
print(f"counter min:            {res.counterMin}")

steps = [e for e in res.perStepTrace if e[1] == "step"]
reads = sorted({e[3] for e in steps})
print(f"repair steps:           {len(steps)}")
print(f"distinct per-step read totals: {reads}")
assert reads == [k * clen // r]

perFailure = res.totalBitsRead / scenario.failureCount
print(f"read bits per failure:  {perFailure:.1f}")
print(f"closed form (1-b)/b*clen: {(1 - beta) / beta * clen:.1f}")

# writes vary: a step writes only the fragments currently missing, at most
# one full fragment per elapsed failure
writes = sorted({e[4] for e in steps})
print(f"per-step write totals span {writes[0]}..{writes[-1]} bits")
