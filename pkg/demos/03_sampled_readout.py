"""A finite-shot experiment with imperfect readout, and how to undo it.

Real devices misread qubits: a 0 reads as 1 with probability 1 - F0 and a 1
reads as 0 with probability 1 - F1.  Here we sample 10-qubit measurements
with randomly drawn fidelities, estimate the linear squeezing parameter and
the Fisher information from the shots, and compare raw versus
confusion-corrected numbers with the exact values.

Run:  python demos/03_sampled_readout.py      (takes a few seconds)
"""

import numpy as np

from spinmetro import ConfusionModel, build_oat, coherent_spin_state, evolve, fisher_exact, fisher_sampled, max_classical_fisher
from spinmetro.measurement import LINEAR_IDS, apply_confusion, correct_readout, estimate_moments, sample_readout, substream
from spinmetro.squeezing import squeeze_parameter, squeezing, vc_from_moments

N, SHOTS, SEED = 10, 200_000, 3
state = evolve(coherent_spin_state(N, "x", "full"), build_oat(N, 1.0, "full"), 0.2)
model = ConfusionModel.random(N, substream(SEED, 1))
print("per-qubit F0:", np.round(model.f0, 3))
print("per-qubit F1:", np.round(model.f1, 3))

# one batch of shots per measurement direction, corrupted by the readout model
noisy = [apply_confusion(sample_readout(state, d, SHOTS, SEED, (k,)), model, SEED, (k,)) for k, d in enumerate(LINEAR_IDS)]


def xi2_from(records, corrected):
    data = [correct_readout(r, model) if corrected else r for r in records]
    v, c = vc_from_moments(estimate_moments(data, N), "s1")
    return squeeze_parameter(v, c, N, "s1").xi2


print(f"\nlinear squeezing xi^2: exact {squeezing(state, 's1').xi2:.4f}, "
      f"raw {xi2_from(noisy, False):.4f}, corrected {xi2_from(noisy, True):.4f}")

# Readout errors blur the J_z distribution, so the raw Fisher estimate is low.
alpha, _ = max_classical_fisher(state)
exact = fisher_exact(state, alpha, -0.05).F
raw = fisher_sampled(state, alpha, -0.05, SHOTS, SEED, simulate_errors=model)
fixed = fisher_sampled(state, alpha, -0.05, SHOTS, SEED, confusion=model, simulate_errors=model)
print(f"Fisher information:   exact {exact:.2f}, raw {raw.F:.2f} +/- {raw.std:.2f}, corrected {fixed.F:.2f} +/- {fixed.std:.2f}")
