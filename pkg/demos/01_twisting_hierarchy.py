"""How far does each squeezing witness see into a twisted spin state?

We start ten qubits in a coherent state along +x and let one-axis twisting
act.  At every time we ask three witnesses of increasing power (the linear
Ramsey parameter, a seven-operator quadratic family and the full nine-operator
family) how much metrological gain they can certify, and compare against the
best single-angle classical Fisher information and the quantum Fisher
information, which no witness can exceed.

Run:  python demos/01_twisting_hierarchy.py
"""

import numpy as np

from spinmetro import build_oat, coherent_spin_state, evolve, hierarchy_scan, max_classical_fisher, qfi_pure

N = 10
times = np.linspace(0.0, 1.2, 13)

psi0 = coherent_spin_state(N, "x")
oat = build_oat(N, chi=1.0)
states = [evolve(psi0, oat, t) for t in times]

scan = hierarchy_scan(states, families=("s1", "sexp-main", "s2"))
f_opt = [max_classical_fisher(s)[1] / N for s in states]
f_q = [qfi_pure(s) / N for s in states]

print(f"{'chi*t':>6} {'linear':>8} {'7-op':>8} {'9-op':>8} {'F_opt/N':>8} {'F_Q/N':>8}")
for i, t in enumerate(times):
    print(f"{t:6.2f} {scan['s1'][i]:8.3f} {scan['sexp-main'][i]:8.3f} {scan['s2'][i]:8.3f} {f_opt[i]:8.3f} {f_q[i]:8.3f}")

# Around chi*t = 0.2 the quadratic witnesses read slightly above F_opt/N
# even though F_opt/N stays below F_Q/N; see the acceptance notes in the
# README for the full comparison.
#
# Linear squeezing peaks early and then collapses as the state wraps around
# the sphere.  The quadratic families keep certifying gain for longer because
# they can see the banana-shaped distribution's curvature.
best = {k: times[np.argmax(v)] for k, v in scan.items()}
print("\nbest twisting time per witness:", {k: round(float(v), 2) for k, v in best.items()})
