"""An adversary that withholds the trigger forever: nothing happens, forever."""

from qelect.harness import experiment_flp_stall

res = experiment_flp_stall(n=8, target="trigger", limit=50_000)
for row in res.rows:
    print(row)
for v in res.verdicts:
    print(v.line())
