# Storage overhead buys repair bandwidth.  Sweep the slack fraction beta
# and compare three per-failure read costs, all in units of one node's
# capacity clen:
#
#   floor    (1-b) / ln(1/(1-2b))     no repairer can beat this
#   grouped  (1+2b) / (2b)            advanced repairer, large-N read cost
#   plain    (1-b) / b                liquid repair reads k fragments per step
#
# The grouped repairer tracks the floor within 25% already at b=0.05 and
# closes in as b shrinks, while plain liquid pays roughly double.

from liquidsim import lni

print(f"{'beta':>6} {'usable':>7} {'floor':>8} {'grouped':>8} {'plain':>8} "
      f"{'grouped/floor':>14}")
for beta in (0.3, 0.2, 0.1, 0.05, 0.02, 0.01):
    floor = (1 - beta) / lni(2 * beta)
    grouped = (1 + 2 * beta) / (2 * beta)
    plain = (1 - beta) / beta
    print(f"{beta:>6} {1 - beta:>7.2f} {floor:>8.2f} {grouped:>8.2f} "
          f"{plain:>8.2f} {grouped / floor:>14.4f}")

print()
print("both columns blow up like 1/(2b) as beta -> 0: cheap repair needs")
print("slack, and the grouped construction spends almost none of it badly.")

# the ratio approaches 1 from above and is monotone in beta
ratios = [((1 + 2 * b) / (2 * b)) / ((1 - b) / lni(2 * b))
          for b in (0.05, 0.02, 0.01)]
assert all(x > y > 1 for x, y in zip(ratios, ratios[1:]))
