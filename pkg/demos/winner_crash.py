"""Crash the node that the shares point at and watch the window take over."""

from qelect.election_quantum import QuantumElection, QuantumParams, fallback_window
from qelect.simnet import Synchronous

n, f = 8, 2
for seed in range(100):
    q = QuantumElection(QuantumParams(n=n, f=f, bound=3), Synchronous(3), seed=seed)
    q.start()
    if q.predicted_b() == 5:
        break

b = q.predicted_b()
print(f"seed {seed}: the next election will measure B={b}; window {fallback_window(b, f, n)}")
rep = q.election_round(crashes=[b])
print(f"node {b} crashed at the trigger; new leader {rep.leader} after {rep.messages} messages")
for rec in q.net.log:
    if isinstance(rec, dict) and rec["type"] == "fallback":
        print(f"  t={rec['t']} node {rec['node']} starts Bully among {rec['members']}")
print(f"bound 3(n-1) + (f+1)^2 = {3 * (n - 1) + (f + 1) ** 2}")
