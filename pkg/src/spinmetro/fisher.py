"""Phase imprinting, J_z outcome statistics and Fisher-information estimates.

The interferometer applies exp(-i J_x alpha) (tomography rotation) and then
exp(-i J_y theta) (the phase to be sensed), and reads out J_z.  The Fisher
information about theta at theta = 0 is extracted from the squared Hellinger
distance between the outcome distributions at 0 and at theta,
d^2(theta) = F theta^2 / 8 + O(theta^3).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateFit, InsufficientShots, LengthMismatch, ZeroTheta
from .measurement import (
    FISHER_SCHEME,
    BootstrapScheme,
    ConfusionModel,
    ShotRecord,
    apply_confusion,
    bootstrap_groups,
    correct_readout,
    sample_readout,
)
from .spin import StateVector, hamming_weights, rotate, spin_mean_and_covariance

DEFAULT_THETA = -0.05
DEFAULT_ALPHA_GRID = np.linspace(-0.6, 0.6, 61)
DEFAULT_THETA_GRID = np.array([-0.1, -0.08, -0.06, -0.04, -0.02, 0.02, 0.04, 0.06, 0.08, 0.1])


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """P_z for z = N/2, N/2 - 1, ..., -N/2 (descending, like the Dicke basis)."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("need a 1-d distribution over N+1 >= 2 outcomes")
        if np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-10:
            raise ValueError("probabilities must be non-negative and sum to one")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def n_qubits(self) -> int:
        return self.probabilities.size - 1

    @property
    def z_values(self) -> np.ndarray:
        n = self.n_qubits
        return n / 2 - np.arange(n + 1)

    def mean(self) -> float:
        return float(self.probabilities @ self.z_values)


def imprint(state: StateVector, alpha: float, theta: float) -> StateVector:
    """exp(-i J_y theta) exp(-i J_x alpha) |psi>."""
    return rotate(rotate(state, "x", alpha), "y", theta)


def pz(state: StateVector) -> OutcomeDistribution:
    """Exact Born distribution of J_z."""
    p = np.abs(state.amplitudes) ** 2
    if state.representation.kind == "full":
        p = np.bincount(hamming_weights(state.n_qubits), weights=p, minlength=state.n_qubits + 1)
    return OutcomeDistribution(p / p.sum())


def hellinger_sq(p, q) -> float:
    """1 - sum_z sqrt(P_z Q_z), clipped to [0, 1]."""
    a = p.probabilities if isinstance(p, OutcomeDistribution) else np.asarray(p, dtype=float)
    b = q.probabilities if isinstance(q, OutcomeDistribution) else np.asarray(q, dtype=float)
    if a.shape != b.shape:
        raise LengthMismatch(f"distributions of length {a.size} and {b.size}")
    bc = float(np.sum(np.sqrt(np.clip(a, 0, None) * np.clip(b, 0, None))))
    return min(1.0, max(0.0, 1.0 - bc))


@dataclass
class FisherEstimate:
    F: float
    method: str  # "single" or "fit"
    alpha: float
    theta: float | None = None
    thetas: list | None = None
    std: float | None = None
    coefficients: list | None = None
    provenance: dict = field(default_factory=dict)

    def per_qubit(self, n_qubits) -> float:
        return self.F / n_qubits

    def to_dict(self) -> dict:
        out = {
            "F": float(self.F),
            "method": self.method,
            "alpha": float(self.alpha),
            "theta": None if self.theta is None else float(self.theta),
            "thetas": None if self.thetas is None else [float(t) for t in self.thetas],
            "std": None if self.std is None else float(self.std),
            "coefficients": self.coefficients,
            "provenance": self.provenance,
        }
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def fisher_single(d2: float, theta: float, alpha: float = 0.0) -> FisherEstimate:
    """F = 8 d^2 / theta^2."""
    if theta == 0:
        raise ZeroTheta("theta must be nonzero")
    return FisherEstimate(8.0 * d2 / theta**2, "single", alpha, theta=float(theta))


def fisher_fit(thetas, d2_values, cubic: bool = True, alpha: float = 0.0) -> FisherEstimate:
    """Least-squares d^2 = c2 theta^2 (+ c3 theta^3); F = 8 c2."""
    th = np.asarray(thetas, dtype=float)
    d2 = np.asarray(d2_values, dtype=float)
    if th.shape != d2.shape:
        raise LengthMismatch("theta grid and d2 values differ in length")
    cols = [th**2, th**3] if cubic else [th**2]
    a = np.column_stack(cols)
    if th.size < a.shape[1] or np.linalg.matrix_rank(a) < a.shape[1]:
        raise DegenerateFit(f"theta grid {th.tolist()} cannot determine {a.shape[1]} coefficients")
    coef, *_ = np.linalg.lstsq(a, d2, rcond=None)
    return FisherEstimate(8.0 * coef[0], "fit", alpha, thetas=th.tolist(), coefficients=[float(c) for c in coef])


def hellinger_curve(state: StateVector, alpha: float, thetas) -> np.ndarray:
    p0 = pz(imprint(state, alpha, 0.0))
    return np.array([hellinger_sq(p0, pz(imprint(state, alpha, t))) for t in np.atleast_1d(thetas)])


def fisher_exact(state: StateVector, alpha: float = 0.0, theta: float = DEFAULT_THETA) -> FisherEstimate:
    """Single-theta Hellinger estimate from exact distributions."""
    return fisher_single(float(hellinger_curve(state, alpha, [theta])[0]), theta, alpha)


def fisher_exact_fit(state, alpha=0.0, thetas=DEFAULT_THETA_GRID, cubic=True) -> FisherEstimate:
    return fisher_fit(thetas, hellinger_curve(state, alpha, thetas), cubic, alpha)


def classical_fisher(state: StateVector, alpha: float = 0.0, step: float = 1e-5, floor: float = 1e-14) -> float:
    """sum_z (dP_z/dtheta)^2 / P_z at theta = 0 by central differences."""
    p0 = pz(imprint(state, alpha, 0.0)).probabilities
    pp = pz(imprint(state, alpha, step)).probabilities
    pm = pz(imprint(state, alpha, -step)).probabilities
    dp = (pp - pm) / (2 * step)
    keep = p0 > floor
    return float(np.sum(dp[keep] ** 2 / p0[keep]))


def optimize_alpha(state: StateVector, theta: float = DEFAULT_THETA, alpha_grid=DEFAULT_ALPHA_GRID):
    """Grid argmax of the single-theta Fisher estimate; ties go to the smallest |alpha|.

    Returns ``(alpha_opt, estimate, values)`` where ``values`` holds F on the grid.
    """
    grid = np.atleast_1d(np.asarray(alpha_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("alpha grid is empty")
    values = np.array([fisher_exact(state, a, theta).F for a in grid])
    best = values.max()
    tol = 1e-9 * max(1.0, abs(best))
    cands = np.flatnonzero(values >= best - tol)
    k = min(cands, key=lambda i: (abs(grid[i]), grid[i]))
    return float(grid[k]), FisherEstimate(float(values[k]), "single", float(grid[k]), theta=float(theta)), values


def max_classical_fisher(state: StateVector, alpha_grid=None) -> tuple[float, float]:
    """Best tomography angle for the classical Fisher information, refined off-grid.

    A coarse grid (default 181 points over [-pi/2, pi/2]) brackets the peak and
    a bounded Brent search between the neighbouring grid points polishes it.
    Returns ``(alpha, F)``.
    """
    grid = np.linspace(-np.pi / 2, np.pi / 2, 181) if alpha_grid is None else np.sort(np.asarray(alpha_grid, dtype=float))
    values = np.array([classical_fisher(state, a) for a in grid])
    k = int(values.argmax())
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if hi <= lo:
        return float(grid[k]), float(values[k])
    res = minimize_scalar(lambda a: -classical_fisher(state, a), bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
    if -res.fun > values[k]:
        return float(res.x), float(-res.fun)
    return float(grid[k]), float(values[k])


def qfi_pure(state: StateVector) -> float:
    """4 x the largest eigenvalue of the collective-spin covariance matrix."""
    _, cov = spin_mean_and_covariance(state)
    return float(4.0 * np.linalg.eigvalsh(cov)[-1])


# --- sampled mode ---------------------------------------------------------------------


def _branch_distribution(record: ShotRecord, confusion: ConfusionModel | None) -> np.ndarray:
    if confusion is not None:
        return correct_readout(record, confusion).excitation_distribution()
    return record.excitation_distribution()


def sample_branches(state, alpha, theta, shots, seed, confusion=None, alpha_index=0, theta_index=0, stream=()):
    """Sampled J_z records for the theta = 0 and theta branches.

    The zero branch depends only on (seed, alpha_index), so it is shared by
    every theta at the same alpha.  ``stream`` prefixes the RNG substream key
    (the pipeline passes the time-point index).
    """
    if shots < 1000:
        raise InsufficientShots("fisher sampling needs at least 1000 shots per branch")
    records = {}
    for name, th, key in (("zero", 0.0, (*stream, alpha_index, 0)), ("theta", theta, (*stream, alpha_index, 1 + theta_index))):
        rec = sample_readout(imprint(state, alpha, th), "z", shots, seed, substream_key=key)
        if confusion is not None:
            rec = apply_confusion(rec, confusion, seed, substream_key=key)
        records[name] = rec
    return records


def fisher_from_records(records, theta, confusion=None) -> float:
    d2 = hellinger_sq(_branch_distribution(records["zero"], confusion), _branch_distribution(records["theta"], confusion))
    return 8.0 * d2 / theta**2


def fisher_sampled(
    state: StateVector,
    alpha: float,
    theta: float = DEFAULT_THETA,
    shots: int = 200_000,
    seed: int = 0,
    scheme: BootstrapScheme = FISHER_SCHEME,
    confusion: ConfusionModel | None = None,
    simulate_errors: ConfusionModel | None = None,
    stream=(),
) -> FisherEstimate:
    """Shot-sampled single-theta estimate with bootstrap standard deviation.

    ``simulate_errors`` corrupts the bitstrings; ``confusion`` is the model
    used for correction (usually the same object).  Both need a full-space
    state.
    """
    if theta == 0:
        raise ZeroTheta("theta must be nonzero")
    records = sample_branches(state, alpha, theta, shots, seed, simulate_errors, stream=stream)
    f_all = fisher_from_records(records, theta, confusion)
    boot = bootstrap_groups(records, scheme, lambda agg: fisher_from_records(agg, theta, confusion), seed=seed)
    prov = {
        "shots": int(shots),
        "seed": int(seed),
        "scheme": {"groups": scheme.groups, "subsample": scheme.subsample, "repeats": scheme.repeats},
        "corrected": confusion is not None,
        "bootstrap_mean": boot.mean,
    }
    return FisherEstimate(f_all, "single", float(alpha), theta=float(theta), std=boot.std, provenance=prov)
