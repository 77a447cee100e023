"""Experiment configuration: one JSON file, physical units spelled out in field names.

Example::

    {
      "n_qubits": 10,
      "hamiltonian": {"model": "oat", "chi_rad_per_ns": -0.0082},
      "time": {"chit_dimensionless": {"start": 0, "stop": 1.2, "num": 25}},
      "families": ["s1", "sexp", "s2"],
      "seed": 7
    }

Time is given either as ``chit_dimensionless`` (chi * t) or as ``t_ns``;
giving both is an error.  Every referenced file is opened and parsed during
validation, before anything is computed or written.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import CouplingMatrix, load_coupling_csv
from .errors import ConfigError, SpinMetroError
from .fisher import DEFAULT_ALPHA_GRID, DEFAULT_THETA, DEFAULT_THETA_GRID
from .measurement import ConfusionModel, load_confusion_csv
from .spin import DICKE_MAX_QUBITS, FULL_MAX_QUBITS
from .squeezing import FAMILIES

_TOP_KEYS = {
    "n_qubits", "representation", "hamiltonian", "time", "families", "mode",
    "shots_per_direction", "confusion_csv", "theta_rad", "theta_grid_rad",
    "alpha_grid_rad", "seed", "output_dir", "husimi", "workers", "validate",
}


@dataclass
class ExperimentConfig:
    n_qubits: int
    representation: str
    model: str
    chi_rad_per_ns: float | None
    coupling: CouplingMatrix | None
    coupling_path: str | None
    time_unit: str  # "chit_dimensionless" or "t_ns"
    times: np.ndarray  # as given by the user
    families: list
    mode: str
    shots_per_direction: int
    confusion: ConfusionModel | None
    confusion_path: str | None
    theta_rad: float
    theta_grid_rad: np.ndarray
    alpha_grid_rad: np.ndarray
    seed: int
    output_dir: str
    husimi: dict
    workers: int
    validate: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        # where results go and how many threads compute them do not change them
        content = {k: v for k, v in self.raw.items() if k not in ("output_dir", "workers")}
        blob = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def evolution_chi_and_times(self):
        """(chi used by the solver, solver times) for the OAT model.

        In dimensionless mode only the sign of chi matters, so the solver runs
        with chi = +-1 and t = chi*t.
        """
        if self.time_unit == "t_ns":
            return self.chi_rad_per_ns, self.times
        return float(np.sign(self.chi_rad_per_ns) or 1.0), self.times

    def xy_times(self):
        if self.time_unit == "t_ns":
            return self.times
        chi_bar = abs(self.coupling.mean_coupling())
        if chi_bar == 0:
            raise ConfigError("hamiltonian.coupling_csv_rad_per_ns", "mean coupling is zero; chi*t is undefined")
        return self.times / chi_bar


def _grid(value, path):
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "num"}
        if extra or not {"start", "stop", "num"} <= set(value):
            raise ConfigError(path, "range must have exactly start, stop, num")
        num = value["num"]
        if not isinstance(num, int) or isinstance(num, bool) or num < 1:
            raise ConfigError(f"{path}.num", "must be a positive integer")
        arr = np.linspace(_number(value["start"], f"{path}.start"), _number(value["stop"], f"{path}.stop"), num)
    elif isinstance(value, list):
        if not value:
            raise ConfigError(path, "must not be empty")
        arr = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])
    else:
        raise ConfigError(path, "expected a list of numbers or {start, stop, num}")
    return arr


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    return float(v)


def _int(v, path, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return v


def _file(base: Path, rel, path) -> Path:
    if not isinstance(rel, str):
        raise ConfigError(path, "expected a file path string")
    p = Path(rel)
    if not p.is_absolute():
        p = base / p
    if not p.is_file():
        raise ConfigError(path, f"file not found: {p}")
    return p


def parse_config(raw: dict, base_dir=".") -> ExperimentConfig:
    """Validate a decoded JSON object; relative paths resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("$", "top level must be a JSON object")
    base = Path(base_dir)
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    if "n_qubits" not in raw:
        raise ConfigError("n_qubits", "required")
    n = _int(raw["n_qubits"], "n_qubits", 1)

    ham = raw.get("hamiltonian")
    if not isinstance(ham, dict):
        raise ConfigError("hamiltonian", "required object")
    model = ham.get("model")
    chi = None
    coupling = None
    coupling_path = None
    if model == "oat":
        extra = set(ham) - {"model", "chi_rad_per_ns"}
        if extra:
            raise ConfigError(f"hamiltonian.{sorted(extra)[0]}", "unknown field for model oat")
        if "chi_rad_per_ns" not in ham:
            raise ConfigError("hamiltonian.chi_rad_per_ns", "required for model oat")
        chi = _number(ham["chi_rad_per_ns"], "hamiltonian.chi_rad_per_ns")
        if chi == 0:
            raise ConfigError("hamiltonian.chi_rad_per_ns", "must be nonzero")
    elif model == "xy":
        extra = set(ham) - {"model", "coupling_csv_rad_per_ns"}
        if extra:
            raise ConfigError(f"hamiltonian.{sorted(extra)[0]}", "unknown field for model xy")
        if "coupling_csv_rad_per_ns" not in ham:
            raise ConfigError("hamiltonian.coupling_csv_rad_per_ns", "required for model xy")
        p = _file(base, ham["coupling_csv_rad_per_ns"], "hamiltonian.coupling_csv_rad_per_ns")
        try:
            coupling = load_coupling_csv(p)
        except SpinMetroError as exc:
            raise ConfigError("hamiltonian.coupling_csv_rad_per_ns", str(exc)) from None
        if coupling.n_qubits != n:
            raise ConfigError("hamiltonian.coupling_csv_rad_per_ns", f"matrix is {coupling.n_qubits}x{coupling.n_qubits}, n_qubits is {n}")
        coupling_path = str(p)
    else:
        raise ConfigError("hamiltonian.model", f"expected 'oat' or 'xy', got {model!r}")

    tm = raw.get("time")
    if not isinstance(tm, dict):
        raise ConfigError("time", "required object with chit_dimensionless or t_ns")
    keys = set(tm)
    if keys == {"chit_dimensionless", "t_ns"}:
        raise ConfigError("time", "give either chit_dimensionless or t_ns, not both")
    if len(keys) != 1 or not keys <= {"chit_dimensionless", "t_ns"}:
        raise ConfigError("time", "expected exactly one of chit_dimensionless, t_ns")
    unit = keys.pop()
    times = _grid(tm[unit], f"time.{unit}")

    conf = None
    conf_path = None
    if raw.get("confusion_csv") is not None:
        p = _file(base, raw["confusion_csv"], "confusion_csv")
        try:
            conf = load_confusion_csv(p)
        except SpinMetroError as exc:
            raise ConfigError("confusion_csv", str(exc)) from None
        if conf.n_qubits != n:
            raise ConfigError("confusion_csv", f"model has {conf.n_qubits} qubits, n_qubits is {n}")
        conf_path = str(p)

    default_rep = "full" if (model == "xy" or conf is not None) else "dicke"
    rep = raw.get("representation", default_rep)
    if rep not in ("dicke", "full"):
        raise ConfigError("representation", f"expected 'dicke' or 'full', got {rep!r}")
    if rep == "dicke" and model == "xy":
        raise ConfigError("representation", "the xy model needs the full representation")
    if rep == "dicke" and conf is not None:
        raise ConfigError("representation", "readout errors need bitstrings; use the full representation")
    cap = FULL_MAX_QUBITS if rep == "full" else DICKE_MAX_QUBITS
    if n > cap:
        raise ConfigError("n_qubits", f"{rep} representation supports at most {cap} qubits")

    fams = raw.get("families", ["s1", "sexp", "s2"])
    if not isinstance(fams, list) or not fams:
        raise ConfigError("families", "expected a non-empty list")
    for i, f in enumerate(fams):
        if f not in FAMILIES:
            raise ConfigError(f"families[{i}]", f"unknown family {f!r}; choose from {sorted(FAMILIES)}")

    mode = raw.get("mode", "exact")
    if mode not in ("exact", "sampled"):
        raise ConfigError("mode", f"expected 'exact' or 'sampled', got {mode!r}")
    shots = _int(raw.get("shots_per_direction", 200_000), "shots_per_direction", 1000)

    theta = _number(raw.get("theta_rad", DEFAULT_THETA), "theta_rad")
    if theta == 0:
        raise ConfigError("theta_rad", "must be nonzero")
    theta_grid = _grid(raw["theta_grid_rad"], "theta_grid_rad") if "theta_grid_rad" in raw else DEFAULT_THETA_GRID.copy()
    if np.any(theta_grid == 0):
        raise ConfigError("theta_grid_rad", "must not contain 0")
    alpha_grid = _grid(raw["alpha_grid_rad"], "alpha_grid_rad") if "alpha_grid_rad" in raw else DEFAULT_ALPHA_GRID.copy()

    seed = _int(raw.get("seed", 0), "seed", 0)
    out = raw.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir", "expected a non-empty path string")

    hus = raw.get("husimi", {})
    if not isinstance(hus, dict) or set(hus) - {"n_theta", "n_phi", "density", "binary"}:
        raise ConfigError("husimi", "allowed fields: n_theta, n_phi, density, binary")
    husimi = {
        "n_theta": _int(hus.get("n_theta", 61), "husimi.n_theta", 2),
        "n_phi": _int(hus.get("n_phi", 120), "husimi.n_phi", 2),
        "density": bool(hus.get("density", False)),
        "binary": bool(hus.get("binary", False)),
    }

    workers = raw.get("workers")
    workers = (os.cpu_count() or 1) if workers is None else _int(workers, "workers", 1)

    val = raw.get("validate", {})
    if not isinstance(val, dict) or set(val) - {"n_list", "trials"}:
        raise ConfigError("validate", "allowed fields: n_list, trials")
    n_list = val.get("n_list", [2, 3, 4, 5, 6])
    if not isinstance(n_list, list) or not n_list:
        raise ConfigError("validate.n_list", "expected a non-empty list of integers")
    validate = {
        "n_list": [_int(v, f"validate.n_list[{i}]", 1) for i, v in enumerate(n_list)],
        "trials": _int(val.get("trials", 50), "validate.trials", 1),
    }

    return ExperimentConfig(
        n_qubits=n, representation=rep, model=model, chi_rad_per_ns=chi, coupling=coupling,
        coupling_path=coupling_path, time_unit=unit, times=times, families=list(fams), mode=mode,
        shots_per_direction=shots, confusion=conf, confusion_path=conf_path, theta_rad=theta,
        theta_grid_rad=theta_grid, alpha_grid_rad=alpha_grid, seed=seed, output_dir=out,
        husimi=husimi, workers=workers, validate=validate, raw=raw,
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read, apply top-level overrides (from the command line) and validate."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config ({exc.strerror})") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if overrides and isinstance(raw, dict):
        raw = {**raw, **{k: v for k, v in overrides.items() if v is not None}}
    return parse_config(raw, p.parent)
