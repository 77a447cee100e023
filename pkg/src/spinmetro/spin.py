"""Collective spin operators for N qubits.

Two representations are supported:

* ``full``: the 2**N computational basis.  Qubit 0 is the most significant bit
  of the basis index and ``|0>`` is the spin-up state (sigma_z = +1), so the
  N=1 operator J_z is ``diag(1/2, -1/2)``.
* ``dicke``: the (N+1)-dimensional symmetric sector with j = N/2.  Basis
  vectors are ordered by *descending* magnetic number, ``m = j, j-1, ..., -j``;
  index ``k`` holds ``m = j - k`` (equivalently ``k`` qubits in ``|1>``).

Full-space operators are stored as CSR sparse matrices, Dicke operators as
dense arrays.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import CapacityExceeded, InvalidDirection, NonSymmetricState, ReprMismatch

FULL_MAX_QUBITS = 14
DICKE_MAX_QUBITS = 512

_AXES = {
    "x": (1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
}


@dataclass(frozen=True)
class Direction:
    """Unit vector in R^3."""

    n: tuple

    def __post_init__(self):
        v = np.asarray(self.n, dtype=float).reshape(-1)
        if v.shape != (3,) or not np.all(np.isfinite(v)):
            raise InvalidDirection(f"direction must be a finite 3-vector, got {self.n!r}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise InvalidDirection(f"direction {tuple(v)} is not a unit vector")
        object.__setattr__(self, "n", tuple(float(c) for c in v))

    @classmethod
    def normalized(cls, v):
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidDirection(f"cannot normalise {v!r}")
        return cls(tuple(v / norm))

    @property
    def vector(self):
        return np.array(self.n)

    def __neg__(self):
        return Direction(tuple(-c for c in self.n))


def as_direction(d) -> Direction:
    """Coerce ``'x'``/``'-y'``/3-vectors/Direction into a Direction."""
    if isinstance(d, Direction):
        return d
    if isinstance(d, str):
        sign = -1.0 if d.startswith("-") else 1.0
        key = d.lstrip("+-")
        if key not in _AXES:
            raise InvalidDirection(f"unknown axis {d!r}")
        return Direction(tuple(sign * c for c in _AXES[key]))
    return Direction(tuple(np.asarray(d, dtype=float).reshape(-1)))


@dataclass(frozen=True)
class Representation:
    kind: str
    n_qubits: int

    def __post_init__(self):
        if self.kind not in ("full", "dicke"):
            raise ValueError(f"unknown representation kind {self.kind!r}")
        if int(self.n_qubits) < 1:
            raise ValueError("need at least one qubit")
        cap = FULL_MAX_QUBITS if self.kind == "full" else DICKE_MAX_QUBITS
        if self.n_qubits > cap:
            raise CapacityExceeded(
                f"{self.kind} representation supports N <= {cap}, got N={self.n_qubits}"
            )

    @classmethod
    def full(cls, n):
        return cls("full", int(n))

    @classmethod
    def dicke(cls, n):
        return cls("dicke", int(n))

    @property
    def dim(self) -> int:
        return 2**self.n_qubits if self.kind == "full" else self.n_qubits + 1

    @property
    def j(self) -> float:
        return self.n_qubits / 2


def _resolve(n_qubits, repr_) -> Representation:
    if isinstance(repr_, Representation):
        if repr_.n_qubits != n_qubits:
            raise ReprMismatch(f"representation is for N={repr_.n_qubits}, not N={n_qubits}")
        return repr_
    return Representation(str(repr_), int(n_qubits))


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    representation: Representation

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape[0] != self.representation.dim:
            raise ValueError(
                f"expected {self.representation.dim} amplitudes, got {a.shape[0]}"
            )
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n_qubits(self) -> int:
        return self.representation.n_qubits

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        _check_same(self.representation, other.representation)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.overlap(other)) ** 2


def make_state(amplitudes, representation, normalize=True) -> StateVector:
    a = np.asarray(amplitudes, dtype=complex)
    if normalize:
        a = a / np.linalg.norm(a)
    return StateVector(a, representation)


@dataclass(frozen=True, eq=False)
class CollectiveOperator:
    """Hermitian operator with a per-power product cache.

    ``matrix`` is dense for Dicke and CSR sparse for the full space.
    """

    matrix: object
    representation: Representation
    label: str = ""
    _powers: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def power(self, k: int):
        if k < 1:
            raise ValueError("power must be >= 1")
        if k == 1:
            return self.matrix
        cached = self._powers.get(k)
        if cached is not None:
            return cached
        result = self.power(k - 1) @ self.matrix
        if sp.issparse(result):
            result = result.tocsr()
        with self._lock:
            self._powers.setdefault(k, result)
        return self._powers[k]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def apply(self, vec):
        return self.matrix @ vec


def _check_same(a: Representation, b: Representation):
    if a != b:
        raise ReprMismatch(f"representation mismatch: {a} vs {b}")


# --- basis-level building blocks ---------------------------------------------------


@lru_cache(maxsize=None)
def _popcounts(n: int) -> np.ndarray:
    idx = np.arange(2**n, dtype=np.int64)
    counts = np.zeros(2**n, dtype=np.int64)
    for bit in range(n):
        counts += (idx >> bit) & 1
    counts.setflags(write=False)
    return counts


def hamming_weights(n: int) -> np.ndarray:
    """Number of qubits in |1> for every full-space basis index."""
    return _popcounts(n)


@lru_cache(maxsize=None)
def _full_ladder(n: int):
    """J_+ and diag(J_z) in the full space."""
    dim = 2**n
    idx = np.arange(dim, dtype=np.int64)
    rows, cols = [], []
    for q in range(n):
        bit = 1 << (n - 1 - q)
        src = idx[(idx & bit) != 0]  # qubit q in |1>
        rows.append(src ^ bit)
        cols.append(src)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    jplus = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(dim, dim))
    jz = (n - 2 * _popcounts(n)) / 2.0
    return jplus, jz


@lru_cache(maxsize=None)
def _dicke_ladder(n: int):
    j = n / 2
    m = j - np.arange(n + 1)
    jplus = np.zeros((n + 1, n + 1))
    for k in range(1, n + 1):
        jplus[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jplus.setflags(write=False)
    m.setflags(write=False)
    return jplus, m


def magnetic_numbers(n: int) -> np.ndarray:
    """J_z eigenvalues in Dicke-basis order (descending)."""
    return _dicke_ladder(n)[1]


def _operator_matrix(nvec, rep: Representation):
    nx, ny, nz = nvec
    if rep.kind == "dicke":
        jplus, m = _dicke_ladder(rep.n_qubits)
        jminus = jplus.T
        mat = (nx / 2) * (jplus + jminus) + (ny / 2j) * (jplus - jminus) + nz * np.diag(m)
        return mat.astype(complex)
    jplus, jz = _full_ladder(rep.n_qubits)
    jminus = jplus.T.tocsr()
    mat = (nx / 2) * (jplus + jminus) + (ny / 2j) * (jplus - jminus) + nz * sp.diags(jz)
    return sp.csr_matrix(mat, dtype=complex)


@lru_cache(maxsize=4096)
def _cached_operator(nvec: tuple, rep: Representation, label: str) -> CollectiveOperator:
    return CollectiveOperator(_operator_matrix(nvec, rep), rep, label)


def collective_operator(direction, representation, n_qubits=None, label=None) -> CollectiveOperator:
    """J_n = n_x J_x + n_y J_y + n_z J_z.

    ``representation`` may be a Representation or ``'full'``/``'dicke'`` together
    with ``n_qubits``.  Operators are memoised so their power caches are shared.
    """
    d = as_direction(direction)
    rep = representation if isinstance(representation, Representation) else _resolve(n_qubits, representation)
    if label is None:
        label = f"J[{d.n[0]:.6g},{d.n[1]:.6g},{d.n[2]:.6g}]"
    return _cached_operator(d.n, rep, label)


def spin_components(representation):
    """(J_x, J_y, J_z) in the given representation."""
    return tuple(collective_operator(a, representation, label=f"J_{a}") for a in "xyz")


# --- states --------------------------------------------------------------------------


def _css_single(d: Direction):
    nx, ny, nz = d.n
    theta = np.arccos(np.clip(nz, -1.0, 1.0))
    phi = np.arctan2(ny, nx)
    return np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)


def coherent_spin_state(n_qubits, direction, representation="dicke") -> StateVector:
    """Product state with every spin along ``direction``."""
    d = as_direction(direction)
    rep = _resolve(n_qubits, representation)
    up, down = _css_single(d)
    n = rep.n_qubits
    if rep.kind == "dicke":
        k = np.arange(n + 1)
        binom = np.array([comb(n, int(kk)) for kk in k], dtype=float)
        amps = np.sqrt(binom) * up ** (n - k) * down**k
    else:
        single = np.array([up, down], dtype=complex)
        amps = np.array([1.0 + 0j])
        for _ in range(n):
            amps = np.kron(amps, single)
    return make_state(amps, rep)


def dicke_state(n_qubits, m) -> StateVector:
    """Symmetric basis state |j=N/2, m>."""
    rep = Representation.dicke(n_qubits)
    k = rep.j - m
    if abs(k - round(k)) > 1e-12 or not 0 <= round(k) <= n_qubits:
        raise ValueError(f"m={m} not allowed for N={n_qubits}")
    amps = np.zeros(rep.dim, dtype=complex)
    amps[int(round(k))] = 1.0
    return StateVector(amps, rep)


def basis_state(n_qubits, bits) -> StateVector:
    """Computational basis state from a bitstring such as ``'0110'``."""
    if len(bits) != n_qubits or set(bits) - {"0", "1"}:
        raise ValueError(f"bad bitstring {bits!r} for N={n_qubits}")
    rep = Representation.full(n_qubits)
    amps = np.zeros(rep.dim, dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(amps, rep)


def ghz_state(n_qubits, representation="dicke") -> StateVector:
    """(|0...0> + |1...1>)/sqrt(2), the cat state along z."""
    rep = _resolve(n_qubits, representation)
    amps = np.zeros(rep.dim, dtype=complex)
    amps[0] = amps[-1] = 1.0
    return make_state(amps, rep)


def random_symmetric_state(n_qubits, rng) -> StateVector:
    rep = Representation.dicke(n_qubits)
    amps = rng.normal(size=rep.dim) + 1j * rng.normal(size=rep.dim)
    return make_state(amps, rep)


def random_product_state(n_qubits, rng, representation="full") -> StateVector:
    """Product of independently oriented qubits (full space only)."""
    rep = _resolve(n_qubits, representation)
    if rep.kind != "full":
        raise ReprMismatch("non-identical product states live in the full space")
    amps = np.array([1.0 + 0j])
    for _ in range(n_qubits):
        q = rng.normal(size=2) + 1j * rng.normal(size=2)
        amps = np.kron(amps, q / np.linalg.norm(q))
    return make_state(amps, rep)


# --- symmetric-sector maps -----------------------------------------------------------


@lru_cache(maxsize=None)
def _symmetric_isometry(n: int):
    """Sparse (2**n, n+1) matrix whose columns are the Dicke states."""
    if n > FULL_MAX_QUBITS:
        raise CapacityExceeded(f"full representation supports N <= {FULL_MAX_QUBITS}")
    w = _popcounts(n)
    norms = np.array([1 / np.sqrt(comb(n, k)) for k in range(n + 1)])
    return sp.csr_matrix((norms[w], (np.arange(2**n), w)), shape=(2**n, n + 1))


def dicke_project(full_state: StateVector, check=True):
    """Project a full-space state onto the symmetric sector.

    Returns ``(dicke_state, weight)`` where ``weight`` is the squared norm of the
    projection.  With ``check=True`` a weight deficit above 1e-8 raises
    NonSymmetricState; otherwise the renormalised projection is returned.
    """
    rep = full_state.representation
    if rep.kind != "full":
        raise ReprMismatch("dicke_project expects a full-space state")
    iso = _symmetric_isometry(rep.n_qubits)
    amps = iso.T @ full_state.amplitudes
    weight = float(np.vdot(amps, amps).real)
    if check and weight < 1 - 1e-8:
        raise NonSymmetricState(f"symmetric weight {weight:.12g} < 1 - 1e-8")
    if weight == 0:
        raise NonSymmetricState("state has no symmetric component")
    return make_state(amps, Representation.dicke(rep.n_qubits)), weight


def dicke_embed(state: StateVector) -> StateVector:
    """Dicke-basis state expressed in the full 2**N space."""
    if state.representation.kind != "dicke":
        raise ReprMismatch("dicke_embed expects a Dicke state")
    iso = _symmetric_isometry(state.n_qubits)
    return StateVector(iso @ state.amplitudes, Representation.full(state.n_qubits))


# --- rotations and moments -----------------------------------------------------------


@lru_cache(maxsize=1024)
def _dicke_eig(nvec: tuple, n: int):
    mat = _operator_matrix(nvec, Representation.dicke(n))
    return np.linalg.eigh(mat)


def rotate(state: StateVector, axis, angle) -> StateVector:
    """exp(-i J_axis angle) |psi>."""
    if not np.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    d = as_direction(axis)
    if angle == 0:
        return state
    rep = state.representation
    if rep.kind == "dicke":
        w, v = _dicke_eig(d.n, rep.n_qubits)
        amps = v @ (np.exp(-1j * w * angle) * (v.conj().T @ state.amplitudes))
        return make_state(amps, rep)
    # product of single-qubit rotations, applied qubit by qubit
    nx, ny, nz = d.n
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    u = np.array(
        [[c - 1j * s * nz, -1j * s * (nx - 1j * ny)], [-1j * s * (nx + 1j * ny), c + 1j * s * nz]]
    )
    n = rep.n_qubits
    psi = np.array(state.amplitudes)
    for q in range(n):
        psi = psi.reshape(2**q, 2, 2 ** (n - q - 1))
        psi = np.einsum("ab,ibj->iaj", u, psi)
    return make_state(psi.reshape(-1), rep)


def expectation(state: StateVector, op: CollectiveOperator, power: int = 1) -> float:
    """<psi| op**power |psi> as a real number."""
    if power not in (1, 2, 3, 4):
        raise ValueError("power must be in 1..4")
    _check_same(state.representation, op.representation)
    v = state.amplitudes
    w = v
    for _ in range(power):
        w = op.matrix @ w
    val = np.vdot(v, w)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"expectation has imaginary part {val.imag:.3g}")
    return float(val.real)


def spin_mean_and_covariance(state: StateVector):
    """Mean spin vector and symmetrised 3x3 covariance of (J_x, J_y, J_z)."""
    ops = spin_components(state.representation)
    vecs = [op.matrix @ state.amplitudes for op in ops]
    psi = state.amplitudes
    mean = np.array([np.vdot(psi, w).real for w in vecs])
    second = np.array([[np.vdot(a, b).real for b in vecs] for a in vecs])
    return mean, second - np.outer(mean, mean)
