"""Husimi Q function on a (theta, phi) grid.

Q(theta, phi) = |<theta, phi|psi>|^2 with |theta, phi> the spin coherent state
pointing along (sin theta cos phi, sin theta sin phi, cos theta).  Values lie
in [0, 1]; ``density=True`` multiplies by (N+1)/(4 pi) so that Q integrates
to one over the sphere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gammaln

from .spin import StateVector, _symmetric_isometry

_MAGIC = b"SQGRID01"


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    thetas: np.ndarray
    phis: np.ndarray
    values: np.ndarray | None = None
    density: bool = False

    def __post_init__(self):
        th = np.asarray(self.thetas, dtype=float)
        ph = np.asarray(self.phis, dtype=float)
        if th.ndim != 1 or ph.ndim != 1 or th.size < 2 or ph.size < 2:
            raise ValueError("grid needs at least 2 theta and 2 phi samples")
        if th.min() < 0 or th.max() > np.pi + 1e-12 or ph.min() < 0 or ph.max() >= 2 * np.pi:
            raise ValueError("theta must lie in [0, pi] and phi in [0, 2 pi)")
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "phis", ph)
        if self.values is not None:
            v = np.asarray(self.values, dtype=float)
            if v.shape != (th.size, ph.size):
                raise ValueError(f"values shape {v.shape} does not match grid {(th.size, ph.size)}")
            object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.thetas.size, self.phis.size

    def sphere_integral(self) -> float:
        """Integral of the values over the sphere.

        Trapezoid in theta (weight sin theta) and a periodic rectangle rule in phi.
        """
        if self.values is None:
            raise ValueError("grid has no values")
        in_phi = self.values.sum(axis=1) * (2 * np.pi / self.phis.size)
        return float(trapezoid(in_phi * np.sin(self.thetas), self.thetas))


def spherical_grid(n_theta: int, n_phi: int) -> SphericalGrid:
    """theta spans [0, pi] inclusive; phi spans [0, 2 pi) without the endpoint."""
    return SphericalGrid(np.linspace(0, np.pi, n_theta), np.linspace(0, 2 * np.pi, n_phi, endpoint=False))


def _symmetric_amplitudes(state: StateVector) -> np.ndarray:
    if state.representation.kind == "dicke":
        return state.amplitudes
    # product coherent states live in the symmetric sector, so only that part overlaps
    iso = _symmetric_isometry(state.n_qubits)
    return iso.T @ state.amplitudes


def husimi_q(state: StateVector, grid: SphericalGrid, density: bool = False) -> SphericalGrid:
    n = state.n_qubits
    psi = _symmetric_amplitudes(state)
    k = np.arange(n + 1)
    log_binom = 0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
    th = grid.thetas[:, None, None]
    ph = grid.phis[None, :, None]
    c, s = np.cos(th / 2), np.sin(th / 2)
    # <theta,phi|k> = sqrt(C(N,k)) cos^(N-k) sin^k e^{-i k phi}
    mag = np.exp(log_binom) * c ** (n - k) * s**k
    bra = mag * np.exp(-1j * k * ph)
    q = np.abs(bra @ psi) ** 2
    q = np.clip(q.reshape(grid.shape), 0.0, None)
    if density:
        q = q * (n + 1) / (4 * np.pi)
    return SphericalGrid(grid.thetas, grid.phis, q, density)


def q_csv(state: StateVector, resolution, path, density: bool = False, header_comment=None) -> SphericalGrid:
    """Write ``theta,phi,Q`` rows (theta-major) and return the evaluated grid."""
    n_theta, n_phi = resolution
    g = husimi_q(state, spherical_grid(n_theta, n_phi), density)
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("theta,phi,Q\n")
        for i, t in enumerate(g.thetas):
            for j, p in enumerate(g.phis):
                fh.write(f"{t!r},{p!r},{float(g.values[i, j])!r}\n")
    return g


def write_grid_binary(grid: SphericalGrid, path):
    """Magic, uint64 n_theta, uint64 n_phi, then theta, phi and values as float64 (little endian)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", *grid.shape))
        for arr in (grid.thetas, grid.phis, grid.values):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_grid_binary(path, density=False) -> SphericalGrid:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a grid file")
        nt, nph = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != nt + nph + nt * nph:
        raise ValueError(f"{path}: truncated grid file")
    return SphericalGrid(data[:nt], data[nt:nt + nph], data[nt + nph:].reshape(nt, nph), density)
