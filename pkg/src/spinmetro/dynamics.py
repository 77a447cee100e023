"""Twisting Hamiltonians and exact time evolution.

Time is whatever unit makes ``chi * t`` dimensionless; the CLI converts
nanoseconds and rad/ns at its boundary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import CapacityExceeded, InvalidCoupling
from .spin import (
    FULL_MAX_QUBITS,
    Representation,
    StateVector,
    _check_same,
    _resolve,
    _symmetric_isometry,
    coherent_spin_state,
    dicke_embed,
    dicke_project,
    hamming_weights,
    magnetic_numbers,
    make_state,
)


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    """Symmetric qubit-qubit couplings chi_ij; the diagonal is forced to zero."""

    chi: np.ndarray

    def __post_init__(self):
        c = np.array(self.chi, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise InvalidCoupling(f"coupling matrix must be square, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InvalidCoupling("coupling matrix has non-finite entries")
        asym = np.max(np.abs(c - c.T)) if c.size else 0.0
        if asym > 1e-9:
            raise InvalidCoupling(f"coupling matrix asymmetric by {asym:.3g}")
        c = (c + c.T) / 2
        np.fill_diagonal(c, 0.0)
        c.setflags(write=False)
        object.__setattr__(self, "chi", c)

    @property
    def n_qubits(self) -> int:
        return self.chi.shape[0]

    @classmethod
    def uniform(cls, n_qubits, chi):
        return cls(np.full((n_qubits, n_qubits), float(chi)))

    def mean_coupling(self) -> float:
        n = self.n_qubits
        if n < 2:
            return 0.0
        return float(self.chi[np.triu_indices(n, 1)].mean())

    def is_uniform(self, tol=1e-12) -> bool:
        n = self.n_qubits
        if n < 2:
            return True
        vals = self.chi[np.triu_indices(n, 1)]
        return bool(np.ptp(vals) <= tol * max(1.0, abs(vals).max()))


def load_coupling_csv(path) -> CouplingMatrix:
    """Read an N x N comma-separated coupling matrix (one row per qubit)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    try:
        data = np.array([[float(x) for x in r] for r in rows])
    except ValueError as exc:
        raise InvalidCoupling(f"{path}: non-numeric entry ({exc})") from None
    return CouplingMatrix(data)


def save_coupling_csv(coupling: CouplingMatrix, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in coupling.chi:
            w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Hermitian generator with a lazily computed, reusable spectral decomposition."""

    matrix: object
    representation: Representation
    label: str
    params: dict = field(default_factory=dict)
    diagonal: np.ndarray | None = None

    @cached_property
    def _blocks(self):
        """List of (indices, eigenvalues, eigenvectors) over invariant blocks.

        Full-space XY Hamiltonians conserve the excitation number, so they are
        diagonalised one Hamming-weight sector at a time.
        """
        if self.diagonal is not None:
            return None
        n = self.representation.n_qubits
        if self.representation.kind == "full":
            weights = hamming_weights(n)
            csr = sp.csr_matrix(self.matrix)
            blocks = []
            for k in range(n + 1):
                idx = np.flatnonzero(weights == k)
                sub = csr[idx][:, idx].toarray()
                w, v = np.linalg.eigh(sub)
                blocks.append((idx, w, v))
            return blocks
        dense = self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)
        w, v = np.linalg.eigh(dense)
        return [(np.arange(dense.shape[0]), w, v)]

    def eigenvalues(self) -> np.ndarray:
        if self.diagonal is not None:
            return np.sort(self.diagonal)
        return np.sort(np.concatenate([b[1] for b in self._blocks]))

    def propagate(self, amplitudes, t):
        if self.diagonal is not None:
            return np.exp(-1j * self.diagonal * t) * amplitudes
        out = np.zeros_like(amplitudes, dtype=complex)
        for idx, w, v in self._blocks:
            out[idx] = v @ (np.exp(-1j * w * t) * (v.conj().T @ amplitudes[idx]))
        return out

    def energy(self, state: StateVector) -> float:
        _check_same(self.representation, state.representation)
        return float(np.vdot(state.amplitudes, self.matrix @ state.amplitudes).real)


def build_oat(n_qubits, chi, representation="dicke") -> Hamiltonian:
    """One-axis twisting H = -chi J_z**2 (diagonal in either basis)."""
    if not np.isfinite(chi):
        raise ValueError("chi must be finite")
    rep = _resolve(n_qubits, representation)
    if rep.kind == "dicke":
        m = magnetic_numbers(rep.n_qubits)
    else:
        m = (rep.n_qubits - 2 * hamming_weights(rep.n_qubits)) / 2.0
    diag = -float(chi) * m**2
    diag.setflags(write=False)
    mat = np.diag(diag) if rep.kind == "dicke" else sp.diags(diag, format="csr")
    return Hamiltonian(mat, rep, "oat", {"chi": float(chi)}, diagonal=diag)


def build_xy(coupling: CouplingMatrix) -> Hamiltonian:
    """H = sum_{i<j} chi_ij (s+_i s-_j + h.c.) in the full 2**N space."""
    if not isinstance(coupling, CouplingMatrix):
        coupling = CouplingMatrix(coupling)
    n = coupling.n_qubits
    if n > FULL_MAX_QUBITS:
        raise CapacityExceeded(f"XY model needs the full space; N <= {FULL_MAX_QUBITS}")
    rep = Representation.full(n)
    idx = np.arange(2**n, dtype=np.int64)
    rows, cols, vals = [], [], []
    for i in range(n):
        bi = 1 << (n - 1 - i)
        for j in range(i + 1, n):
            c = coupling.chi[i, j]
            if c == 0:
                continue
            bj = 1 << (n - 1 - j)
            differ = ((idx & bi) != 0) != ((idx & bj) != 0)
            src = idx[differ]
            rows.append(src ^ (bi | bj))
            cols.append(src)
            vals.append(np.full(src.size, c))
    if rows:
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2**n, 2**n),
            dtype=complex,
        )
    else:
        mat = sp.csr_matrix((2**n, 2**n), dtype=complex)
    return Hamiltonian(mat, rep, "xy", {"coupling": coupling})


def evolve(state: StateVector, hamiltonian: Hamiltonian, t) -> StateVector:
    """exp(-i H t) |psi>."""
    _check_same(state.representation, hamiltonian.representation)
    if t == 0:
        return state
    return make_state(hamiltonian.propagate(state.amplitudes, float(t)), state.representation)


def trajectory(state: StateVector, hamiltonian: Hamiltonian, times):
    return [evolve(state, hamiltonian, t) for t in times]


@dataclass
class EquivalenceReport:
    residual: float
    times: np.ndarray
    infidelities: np.ndarray
    z_rate: float
    chi_mean: float


def uniform_equivalence_report(n_qubits, chi, times=None, coupling=None) -> EquivalenceReport:
    """Compare XY evolution with OAT plus a compensating z-rotation.

    Starting from the coherent state along +x, the XY trajectory is compared with
    ``exp(-i(-chi J_z**2 + b J_z) t)`` where ``chi`` is the mean coupling and
    ``b`` is the J_z-linear part of the XY Hamiltonian restricted to the
    symmetric sector (zero for uniform couplings).  The residual is the largest
    state infidelity on the time grid, global phase excluded.
    """
    if coupling is None:
        coupling = CouplingMatrix.uniform(n_qubits, chi)
    elif not isinstance(coupling, CouplingMatrix):
        coupling = CouplingMatrix(coupling)
    n = coupling.n_qubits
    chi_mean = coupling.mean_coupling()
    if times is None:
        scale = abs(chi_mean) if chi_mean else 1.0
        times = np.linspace(0, np.pi / scale, 10)
    times = np.asarray(times, dtype=float)

    h_xy = build_xy(coupling)
    # symmetric-sector projection of H_xy, fitted as a + b m + c m^2
    iso = _symmetric_isometry(n)
    h_sym = (iso.T @ (h_xy.matrix @ iso)).toarray()
    m = magnetic_numbers(n)
    design = np.column_stack([np.ones_like(m), m, m**2])
    coef, *_ = np.linalg.lstsq(design, np.real(np.diag(h_sym)), rcond=None)
    z_rate = float(coef[1]) if n > 1 else 0.0

    oat = build_oat(n, chi_mean, "dicke")
    z_term = z_rate * m
    psi_full = coherent_spin_state(n, "x", "full")
    psi_dicke = coherent_spin_state(n, "x", "dicke")
    infid = []
    for t in times:
        a = evolve(psi_full, h_xy, t)
        b_amp = np.exp(-1j * z_term * t) * oat.propagate(psi_dicke.amplitudes, t)
        b = dicke_embed(StateVector(b_amp, psi_dicke.representation))
        infid.append(max(0.0, 1.0 - abs(np.vdot(b.amplitudes, a.amplitudes)) ** 2))
    infid = np.array(infid)
    return EquivalenceReport(float(infid.max()), times, infid, z_rate, chi_mean)


def symmetric_leakage(state: StateVector) -> float:
    """1 - weight of the symmetric component of a full-space state."""
    return 1.0 - dicke_project(state, check=False)[1]
