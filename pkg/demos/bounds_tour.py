"""Walk the closed-form bound report for one large cluster.

The report answers two questions about a system that repairs lazily:
how much source data can it promise to keep (capacity), and how many
bits per failure must ANY repairer read to keep that promise.  Nothing
here simulates; it is all arithmetic, so the numbers come out instantly
even at exabyte scale.
"""

from liquidsim import EpsilonSet, lni, phase_from_overhead, poisson_bounds

N = 100_000
clen = 10 ** 16             # bits per node
betaPrime = 0.1             # fraction of raw capacity reserved as repair slack
lam = 1.0 / (3 * 365 * 86400)   # one failure per node per 3 years

sysParams, phase = phase_from_overhead(N, clen, betaPrime, vlen=10 ** 13,
                                       lam=lam)
print(f"nodes           {N}")
print(f"node capacity   {clen:.4g} bits")
print(f"stored object   {phase.olen:.6g} bits in F={phase.F} chunks")
print(f"slack fraction  {phase.betaPrime}")
print()

# The core failure probability collapses double-exponentially as the
# concentration epsilon grows.
for epsC in (0.05, 0.1, 0.2):
    rep = poisson_bounds(sysParams, phase, EpsilonSet(epsC=epsC))
    print(f"eps_c={epsC:<5} core failure probability {rep.deltaCore:.4g}")
print()

rep = poisson_bounds(sysParams, phase, EpsilonSet())
print("per-failure read lower bounds, default epsilons:")
print(f"  core model     {rep.coreRatePerFailure:.6g} bits/failure")
print(f"  uniform model  {rep.uniformRatePerFailure:.6g} bits/failure")
print(f"  poisson model  {rep.poissonRate:.6g} bits/s, windows of "
      f"{rep.DeltaWindow:.4g} s")
print(f"  failure prob per model: distinct={rep.deltaDistinct:.3g} "
      f"uniform={rep.deltaUniform:.3g} poisson={rep.deltaPoisson:.3g}")
print(f"  capacity bound {rep.capacity:.6g} bits   vacuous={rep.vacuous}")
print()

# Sanity anchor: the asymptotic per-failure bound is
# (1 - beta') / ln(1/(1 - 2 beta')) * clen, which tends to clen/(2 beta')
# from below as beta' -> 0.  Small slack means expensive repair.
print(f"asymptotic ratio {rep.asymptoticRatio:.6f}")
print(f"check: (1-b)/lni(2b) = "
      f"{(1 - betaPrime) / lni(2 * betaPrime):.6f}")
print(f"naive 1/(2b)     {1 / (2 * betaPrime):.6f}")
