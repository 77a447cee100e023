"""Single-shot readout simulation, readout-error model/correction and moments.

Direction ids are ASCII: a ``b`` after a letter marks it as barred (negated),
a trailing ``'`` marks the sqrt(3) family.  ``"zxb"`` is (J_z - J_x)/sqrt(2),
``"yzb'"`` is (J_y - sqrt(3) J_z)/2 and ``"xbyz"`` is (-J_x + J_y + J_z)/sqrt(3).

Outcome conventions: bit ``0`` is spin up, a bitstring with ``k`` ones has
J = N/2 - k.  Dicke-mode records are keyed by ``str(k)`` instead of bitstrings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    InsufficientShots,
    InvalidConfusion,
    MissingDirection,
    SingularConfusion,
)
from .spin import (
    Direction,
    StateVector,
    collective_operator,
    expectation,
    hamming_weights,
    rotate,
)

_S2 = 1 / np.sqrt(2)
_S3 = 1 / np.sqrt(3)
_R3 = np.sqrt(3) / 2

# fixed order used everywhere (tables, CSV rows, RNG substream indices)
DIRECTION_VECTORS = {
    "x": (1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
    "xy": (_S2, _S2, 0.0),
    "yz": (0.0, _S2, _S2),
    "zx": (_S2, 0.0, _S2),
    "xyb": (_S2, -_S2, 0.0),
    "yzb": (0.0, _S2, -_S2),
    "zxb": (-_S2, 0.0, _S2),
    "xy'": (0.5, _R3, 0.0),
    "yz'": (0.0, 0.5, _R3),
    "zx'": (_R3, 0.0, 0.5),
    "xyb'": (0.5, -_R3, 0.0),
    "yzb'": (0.0, 0.5, -_R3),
    "zxb'": (-_R3, 0.0, 0.5),
    "xyz": (_S3, _S3, _S3),
    "xbyz": (-_S3, _S3, _S3),
    "xybz": (_S3, -_S3, _S3),
    "xyzb": (_S3, _S3, -_S3),
}
DIRECTION_IDS = tuple(DIRECTION_VECTORS)
LINEAR_IDS = ("x", "y", "z", "xy", "yz", "zx")


@dataclass(frozen=True)
class MeasurementDirection:
    id: str
    n: Direction


def directions_19() -> list[MeasurementDirection]:
    return [MeasurementDirection(k, Direction.normalized(v)) for k, v in DIRECTION_VECTORS.items()]


def get_direction(direction_id: str) -> MeasurementDirection:
    if direction_id not in DIRECTION_VECTORS:
        raise MissingDirection(f"unknown measurement direction {direction_id!r}")
    return MeasurementDirection(direction_id, Direction.normalized(DIRECTION_VECTORS[direction_id]))


# --- RNG -----------------------------------------------------------------------------


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based Philox generator for the substream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def direction_index(direction_id: str) -> int:
    return DIRECTION_IDS.index(direction_id)


# --- shot records ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShotRecord:
    """Histogram of single-shot outcomes for one measurement direction.

    ``outcomes`` holds integer outcome labels: full-space basis indices for
    ``kind == "bits"`` and excitation numbers k for ``kind == "dicke"``.
    """

    direction: str
    n_qubits: int
    kind: str
    outcomes: np.ndarray
    counts_array: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        o = np.asarray(self.outcomes, dtype=np.int64)
        c = np.asarray(self.counts_array, dtype=np.int64)
        order = np.argsort(o)
        o, c = o[order], c[order]
        keep = c > 0
        object.__setattr__(self, "outcomes", o[keep])
        object.__setattr__(self, "counts_array", c[keep])

    @property
    def shots(self) -> int:
        return int(self.counts_array.sum())

    @property
    def n_outcomes(self) -> int:
        return 2**self.n_qubits if self.kind == "bits" else self.n_qubits + 1

    @property
    def counts(self) -> dict:
        if self.kind == "bits":
            fmt = f"0{self.n_qubits}b"
            return {format(int(o), fmt): int(c) for o, c in zip(self.outcomes, self.counts_array)}
        return {str(int(o)): int(c) for o, c in zip(self.outcomes, self.counts_array)}

    def distribution(self) -> np.ndarray:
        """Empirical probabilities over all outcomes."""
        p = np.zeros(self.n_outcomes)
        p[self.outcomes] = self.counts_array / self.shots
        return p

    def excitation_distribution(self) -> np.ndarray:
        """Empirical P(k ones), k = 0..N."""
        if self.kind == "dicke":
            return self.distribution()
        w = hamming_weights(self.n_qubits)[self.outcomes]
        return np.bincount(w, weights=self.counts_array, minlength=self.n_qubits + 1) / self.shots

    def shot_array(self) -> np.ndarray:
        return np.repeat(self.outcomes, self.counts_array)

    @classmethod
    def from_counts(cls, direction, n_qubits, counts: Mapping[str, int], seed=None, kind=None):
        if kind is None:
            kind = "bits" if all(len(k) == n_qubits and set(k) <= {"0", "1"} for k in counts) else "dicke"
        base = 2 if kind == "bits" else 10
        outcomes = np.array([int(k, base) for k in counts], dtype=np.int64)
        return cls(direction, n_qubits, kind, outcomes, np.array(list(counts.values())), seed)

    @classmethod
    def from_shots(cls, direction, n_qubits, kind, shots: np.ndarray, seed=None):
        o, c = np.unique(np.asarray(shots, dtype=np.int64), return_counts=True)
        return cls(direction, n_qubits, kind, o, c, seed)


def write_shot_record(record: ShotRecord, path):
    """One ``outcome,count`` line per observed outcome."""
    with open(path, "w", newline="") as fh:
        for k, v in record.counts.items():
            fh.write(f"{k},{v}\n")


def read_shot_record(path, direction, n_qubits, seed=None) -> ShotRecord:
    counts = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, val = line.split(",")
            counts[key.strip()] = int(val)
    return ShotRecord.from_counts(direction, n_qubits, counts, seed)


def _frame_rotation(d: Direction):
    """(axis, angle) of the rotation R about ``axis`` with R z = d."""
    z = np.array([0.0, 0.0, 1.0])
    v = d.vector
    cross = np.cross(z, v)
    s = np.linalg.norm(cross)
    if s < 1e-15:
        return ((1.0, 0.0, 0.0), 0.0) if v[2] > 0 else ((1.0, 0.0, 0.0), np.pi)
    return tuple(cross / s), float(np.arctan2(s, v[2]))


def measurement_frame(state: StateVector, direction) -> StateVector:
    """State rotated so that measuring J_z on it measures J_direction on ``state``."""
    if isinstance(direction, MeasurementDirection):
        d = direction.n
    elif isinstance(direction, str):
        d = get_direction(direction).n
    else:
        d = Direction.normalized(direction)
    axis, angle = _frame_rotation(d)
    # R(angle) carries z onto d.  With U = exp(+i J_axis angle) we get
    # U^dagger J_z U = J_{R z} = J_d, i.e. rotate() by -angle.
    return rotate(state, axis, -angle)


def born_probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def sample_readout(state: StateVector, direction, shots: int, seed: int, substream_key=()) -> ShotRecord:
    """Sample ``shots`` single-shot readouts of J_direction.

    Full-space states yield bitstrings; Dicke states yield excitation numbers.
    The generator is ``substream(seed, direction_index, *substream_key)``.
    """
    if shots < 1:
        raise InsufficientShots("need at least one shot")
    md = direction if isinstance(direction, MeasurementDirection) else get_direction(direction)
    rotated = measurement_frame(state, md)
    p = born_probabilities(rotated)
    p = p / p.sum()
    rng = substream(seed, direction_index(md.id), *substream_key)
    counts = rng.multinomial(int(shots), p)
    kind = "bits" if state.representation.kind == "full" else "dicke"
    idx = np.flatnonzero(counts)
    return ShotRecord(md.id, state.n_qubits, kind, idx, counts[idx], seed)


# --- readout errors ------------------------------------------------------------------

# measured (F0, F1) per device qubit label
DEVICE_FIDELITIES = {
    1: (0.977, 0.921), 2: (0.986, 0.879), 3: (0.975, 0.912), 4: (0.989, 0.918),
    5: (0.975, 0.909), 6: (0.975, 0.925), 8: (0.987, 0.906), 9: (0.989, 0.926),
    10: (0.995, 0.903), 11: (0.994, 0.897), 12: (0.981, 0.920), 13: (0.980, 0.916),
    14: (0.983, 0.896), 15: (0.978, 0.913), 16: (0.987, 0.934), 17: (0.984, 0.942),
    18: (0.982, 0.912), 19: (0.98, 0.900), 20: (0.985, 0.918),
}
QUBITS_10 = (6, 9, 10, 11, 12, 13, 14, 17, 18, 20)
QUBITS_19 = QUBITS_10 + (1, 2, 3, 4, 5, 8, 15, 16, 19)
F0_RANGE = (0.975, 0.995)
F1_RANGE = (0.879, 0.942)


@dataclass(frozen=True, eq=False)
class ConfusionModel:
    """Independent per-qubit readout errors.

    ``f0[j]`` (``f1[j]``) is the probability that qubit j prepared in |0> (|1>)
    is detected as |0> (|1>).
    """

    f0: np.ndarray
    f1: np.ndarray

    def __post_init__(self):
        f0 = np.atleast_1d(np.asarray(self.f0, dtype=float))
        f1 = np.atleast_1d(np.asarray(self.f1, dtype=float))
        if f0.shape != f1.shape or f0.ndim != 1:
            raise InvalidConfusion("f0 and f1 must be 1-d arrays of equal length")
        bad = ~((f0 > 0.5) & (f0 <= 1) & (f1 > 0.5) & (f1 <= 1))
        if np.any(bad):
            raise InvalidConfusion(f"fidelities must lie in (0.5, 1]; offending qubits {np.flatnonzero(bad)}")
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "f1", f1)

    @property
    def n_qubits(self) -> int:
        return self.f0.size

    @classmethod
    def ideal(cls, n_qubits):
        return cls(np.ones(n_qubits), np.ones(n_qubits))

    @classmethod
    def from_device(cls, qubits=QUBITS_10):
        f = np.array([DEVICE_FIDELITIES[q] for q in qubits])
        return cls(f[:, 0], f[:, 1])

    @classmethod
    def random(cls, n_qubits, rng):
        """Fidelities drawn uniformly from the ranges of the device table."""
        return cls(rng.uniform(*F0_RANGE, n_qubits), rng.uniform(*F1_RANGE, n_qubits))

    @classmethod
    def unchecked(cls, f0, f1):
        obj = object.__new__(cls)
        object.__setattr__(obj, "f0", np.asarray(f0, dtype=float))
        object.__setattr__(obj, "f1", np.asarray(f1, dtype=float))
        return obj

    def matrices(self) -> np.ndarray:
        """Per-qubit 2x2 matrices A[measured, prepared]."""
        a = np.empty((self.n_qubits, 2, 2))
        a[:, 0, 0] = self.f0
        a[:, 1, 0] = 1 - self.f0
        a[:, 0, 1] = 1 - self.f1
        a[:, 1, 1] = self.f1
        return a


def load_confusion_csv(path) -> ConfusionModel:
    """CSV with header ``qubit,f0,f1`` (one row per qubit, in qubit order)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(r for r in fh if not r.startswith("#")))
    if not rows or not {"f0", "f1"} <= set(rows[0]):
        raise InvalidConfusion(f"{path}: expected columns qubit,f0,f1")
    return ConfusionModel([float(r["f0"]) for r in rows], [float(r["f1"]) for r in rows])


def apply_confusion(record: ShotRecord, model: ConfusionModel, seed: int, substream_key=()) -> ShotRecord:
    """Flip every measured bit independently according to ``model``."""
    if record.kind != "bits":
        raise InvalidConfusion("readout errors act on bitstrings, not Dicke-mode records")
    n = record.n_qubits
    if model.n_qubits != n:
        raise InvalidConfusion(f"model has {model.n_qubits} qubits, record has {n}")
    shots = record.shot_array()
    rng = substream(seed, direction_index(record.direction), 7919, *substream_key)
    out = shots.copy()
    for q in range(n):
        bit = 1 << (n - 1 - q)
        is_one = (shots & bit) != 0
        keep = np.where(is_one, model.f1[q], model.f0[q])
        flip = rng.random(shots.size) >= keep
        out[flip] ^= bit
    return ShotRecord.from_shots(record.direction, n, "bits", out, record.seed)


@dataclass(frozen=True, eq=False)
class CorrectedDistribution:
    """Readout-corrected joint distribution over bitstrings.

    ``probabilities`` is the clipped and renormalised joint distribution;
    ``quasi`` keeps the unclipped inverse image.  The excitation-number
    marginal is built from ``quasi`` and clipped only after summing, which
    avoids the bias that joint-level clipping introduces when most of the
    2**N bins hold a handful of shots.
    """

    direction: str
    n_qubits: int
    probabilities: np.ndarray
    clipped_mass: float
    shots: int
    quasi: np.ndarray | None = None

    def excitation_distribution(self) -> np.ndarray:
        w = hamming_weights(self.n_qubits)
        src = self.probabilities if self.quasi is None else self.quasi
        pk = np.bincount(w, weights=src, minlength=self.n_qubits + 1)
        pk = np.clip(pk, 0.0, None)
        return pk / pk.sum()


def invert_confusion(distribution: np.ndarray, model: ConfusionModel) -> np.ndarray:
    """Apply the inverse tensor-product confusion map to a joint distribution.

    Acts qubit by qubit on a (2,)*N view, so the cost is O(N 2**N).
    """
    f0, f1 = np.asarray(model.f0), np.asarray(model.f1)
    det = f0 + f1 - 1
    if np.any(det <= 0):
        raise SingularConfusion(f"F0 + F1 <= 1 for qubits {np.flatnonzero(det <= 0)}")
    n = model.n_qubits
    p = np.asarray(distribution, dtype=float).reshape((2,) * n) if n else distribution
    for q in range(n):
        inv = np.array([[f1[q], f1[q] - 1], [f0[q] - 1, f0[q]]]) / det[q]
        p = np.moveaxis(np.tensordot(inv, p, axes=([1], [q])), 0, q)
    return p.reshape(-1)


def correct_readout(record: ShotRecord, model: ConfusionModel) -> CorrectedDistribution:
    """Invert the confusion model on the empirical distribution of ``record``.

    Negative quasi-probabilities are clipped to zero and the remainder
    renormalised; the clipped (absolute) mass is reported.
    """
    if record.kind != "bits":
        raise InvalidConfusion("readout correction needs bitstring records")
    if model.n_qubits != record.n_qubits:
        raise InvalidConfusion(f"model has {model.n_qubits} qubits, record has {record.n_qubits}")
    q = invert_confusion(record.distribution(), model)
    return _clip(record.direction, record.n_qubits, q, record.shots)


def _clip(direction, n, q, shots) -> CorrectedDistribution:
    neg = q < 0
    clipped = float(-q[neg].sum())
    p = np.where(neg, 0.0, q)
    p = p / p.sum()
    return CorrectedDistribution(direction, n, p, clipped, shots, q)


# --- moments ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentRow:
    moments: tuple  # <J>, <J^2>, <J^3>, <J^4>
    shots: int | None
    exact: bool


@dataclass(frozen=True, eq=False)
class MomentTable:
    n_qubits: int
    rows: dict = field(default_factory=dict)

    def __contains__(self, direction_id):
        return direction_id in self.rows

    def moment(self, direction_id: str, k: int) -> float:
        try:
            row = self.rows[direction_id]
        except KeyError:
            raise MissingDirection(f"moment table has no direction {direction_id!r}") from None
        return row.moments[k - 1]

    @property
    def exact(self) -> bool:
        return all(r.exact for r in self.rows.values())

    def directions(self):
        return [d for d in DIRECTION_IDS if d in self.rows]

    def to_csv(self, path, comment=None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["direction", "k1", "k2", "k3", "k4", "shots"])
            for d in self.directions():
                r = self.rows[d]
                w.writerow([d, *(repr(float(m)) for m in r.moments), "" if r.shots is None else r.shots])

    @classmethod
    def from_csv(cls, path, n_qubits):
        rows = {}
        with open(path, newline="") as fh:
            for r in csv.DictReader(line for line in fh if not line.startswith("#")):
                shots = int(r["shots"]) if r["shots"] else None
                rows[r["direction"]] = MomentRow(
                    tuple(float(r[f"k{k}"]) for k in range(1, 5)), shots, shots is None
                )
        return cls(n_qubits, rows)


def moments_from_excitations(pk: np.ndarray, n_qubits: int) -> tuple:
    """Raw moments <J^k>, k=1..4, from P(k ones)."""
    jval = n_qubits / 2 - np.arange(n_qubits + 1)
    return tuple(float(np.dot(pk, jval**k)) for k in range(1, 5))


def estimate_moments(data, n_qubits: int) -> MomentTable:
    """Empirical moment table from ShotRecords and/or CorrectedDistributions.

    ``data`` is an iterable of records or a mapping direction -> record.
    """
    items = data.values() if isinstance(data, Mapping) else data
    rows = {}
    for rec in items:
        rows[rec.direction] = MomentRow(
            moments_from_excitations(rec.excitation_distribution(), n_qubits), rec.shots, False
        )
    return MomentTable(n_qubits, rows)


def exact_moments(state: StateVector, directions: Sequence[str] = DIRECTION_IDS) -> MomentTable:
    """Moments computed directly from the state (no sampling)."""
    rows = {}
    for d in directions:
        op = collective_operator(DIRECTION_VECTORS[d], state.representation, label=f"J_{d}")
        rows[d] = MomentRow(tuple(expectation(state, op, k) for k in range(1, 5)), None, True)
    return MomentTable(state.n_qubits, rows)


def exact_moments_from_distribution(state: StateVector, directions: Sequence[str] = DIRECTION_IDS) -> MomentTable:
    """Same as exact_moments but via the Born distribution in each measurement frame."""
    rows = {}
    n = state.n_qubits
    for d in directions:
        p = born_probabilities(measurement_frame(state, d))
        if state.representation.kind == "full":
            p = np.bincount(hamming_weights(n), weights=p, minlength=n + 1)
        rows[d] = MomentRow(moments_from_excitations(p, n), None, True)
    return MomentTable(n, rows)


# --- grouping / bootstrap ---------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapScheme:
    """Split shots into ``groups``; evaluate on ``subsample`` groups ``repeats`` times.

    ``repeats=None`` evaluates every group on its own (one value per group).
    """

    groups: int
    subsample: int = 1
    repeats: int | None = None

    def __post_init__(self):
        if self.groups < 1 or self.subsample < 1 or self.subsample > self.groups:
            raise ValueError(f"invalid bootstrap scheme {self}")
        if self.repeats is not None and self.repeats < 1:
            raise ValueError("repeats must be positive")


RSP_SCHEME = BootstrapScheme(80)
NLSP_SCHEME = BootstrapScheme(84, 40, 10)
FISHER_SCHEME = BootstrapScheme(240, 60, 10)


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    std: float
    values: np.ndarray


def split_groups(record: ShotRecord, groups: int, rng: np.random.Generator) -> list[ShotRecord]:
    """Shuffle the shots of ``record`` and cut them into equal groups (remainder dropped)."""
    if record.shots < groups:
        raise InsufficientShots(f"{record.shots} shots cannot fill {groups} groups")
    shots = rng.permutation(record.shot_array())
    per = record.shots // groups
    return [
        ShotRecord.from_shots(record.direction, record.n_qubits, record.kind, shots[g * per:(g + 1) * per], record.seed)
        for g in range(groups)
    ]


def merge_records(records: Sequence[ShotRecord]) -> ShotRecord:
    first = records[0]
    o = np.concatenate([r.outcomes for r in records])
    c = np.concatenate([r.counts_array for r in records])
    uniq, inv = np.unique(o, return_inverse=True)
    return ShotRecord(first.direction, first.n_qubits, first.kind, uniq, np.bincount(inv, weights=c).astype(np.int64), first.seed)


def bootstrap_groups(
    records: Mapping[str, ShotRecord],
    scheme: BootstrapScheme,
    reducer: Callable[[dict], float],
    seed: int = 0,
) -> BootstrapResult:
    """Evaluate ``reducer`` on group aggregates and return mean and std.

    ``records`` maps a key (direction id or branch name) to a ShotRecord; every
    entry is split into ``scheme.groups`` groups.  The reducer receives a dict
    with the same keys mapped to aggregated ShotRecords.
    """
    keys = list(records)
    split = {}
    for i, k in enumerate(keys):
        split[k] = split_groups(records[k], scheme.groups, substream(seed, 1009, i))
    if scheme.repeats is None:
        picks = [[g] for g in range(scheme.groups)] if scheme.subsample == 1 else None
        if picks is None:
            raise ValueError("repeats=None requires subsample=1")
    else:
        rng = substream(seed, 2003)
        picks = [rng.choice(scheme.groups, scheme.subsample, replace=False) for _ in range(scheme.repeats)]
    values = []
    for sel in picks:
        agg = {k: merge_records([split[k][g] for g in sel]) for k in keys}
        values.append(float(reducer(agg)))
    values = np.array(values)
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return BootstrapResult(float(values.mean()), std, values)
