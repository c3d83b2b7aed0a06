"""Message counts per election as the network grows."""

from qelect.harness import sweep_complexity

res = sweep_complexity(["quantum", "chang-roberts", "hirschberg-sinclair", "bully"], [8, 16, 32, 64],
                       seeds=[0, 1])
print(f"{'protocol':>22} {'n':>4} {'worst':>7} {'mean':>8}")
for row in res.rows:
    print(f"{row['protocol']:>22} {row['n']:>4} {row['worst_messages']:>7} {row['mean_messages']:>8.1f}")
print()
for name, slope in res.extra["slopes"].items():
    print(f"log-log slope {name}: {slope:.3f}")
