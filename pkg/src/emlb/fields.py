"""Periodic grid geometry, real/spectral fields and spectral differential operators.

Fields are plain ``numpy`` arrays. A scalar field has the grid shape, a vector
field carries a leading axis of length 3. Two-dimensional grids use the
"2.5-D" embedding: vectors keep three components and ``d/dx_3 == 0``, so curl,
cross products and the background magnetic field are always 3-vectors.

Spectral coefficients use the real-FFT half spectrum (Hermitian symmetry is
implicit) normalised so that a constant field ``c`` has coefficient ``c`` at
``k = 0`` and ``cos(x_1)`` has coefficients ``1/2`` at ``k = (+-1, 0)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.fft

from .errors import ConfigError, DomainError


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform collocated grid on the periodic torus.

    Parameters
    ----------
    dim : 2 or 3
    points : points per axis, each a power of two >= 32
    lengths : box length per axis (default ``2*pi``)
    dealias_fraction : fraction of the per-axis Nyquist index retained by
        :meth:`dealias` (2/3 rule by default)
    workers : FFT threads; results are bit-reproducible for a fixed value
    """

    dim: int
    points: tuple
    lengths: tuple = None
    dealias_fraction: float = 2.0 / 3.0
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigError(f"grid dim must be 2 or 3, got {self.dim}")
        points = self.points
        if isinstance(points, int):
            points = (points,) * self.dim
        points = tuple(int(p) for p in points)
        if len(points) != self.dim:
            raise ConfigError(f"expected {self.dim} point counts, got {len(points)}")
        for p in points:
            if not _is_power_of_two(p) or p < 32:
                raise ConfigError(f"points per axis must be a power of two >= 32, got {p}")
        lengths = self.lengths
        if lengths is None:
            lengths = (2.0 * math.pi,) * self.dim
        elif isinstance(lengths, (int, float)):
            lengths = (float(lengths),) * self.dim
        lengths = tuple(float(L) for L in lengths)
        if len(lengths) != self.dim or any(not (L > 0.0) for L in lengths):
            raise ConfigError(f"lengths must be {self.dim} positive numbers, got {lengths}")
        if not (0.0 < self.dealias_fraction <= 1.0):
            raise ConfigError("dealias_fraction must lie in (0, 1]")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "workers", int(self.workers))

    # -- geometry -------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.points

    @property
    def spectral_shape(self) -> tuple:
        return self.points[:-1] + (self.points[-1] // 2 + 1,)

    @property
    def axes(self) -> tuple:
        return tuple(range(-self.dim, 0))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def cell_volume(self) -> float:
        return self.volume / float(np.prod(self.points))

    @property
    def dx(self) -> float:
        return min(L / n for L, n in zip(self.lengths, self.points))

    @property
    def sigma(self) -> float:
        """Critical regularity index ``1 + N/2``."""
        return 1.0 + self.dim / 2.0

    def coordinates(self) -> list:
        """Broadcastable coordinate arrays ``x_1..x_dim`` (``indexing='ij'``)."""
        axes = [np.arange(n) * (L / n) for n, L in zip(self.points, self.lengths)]
        return list(np.meshgrid(*axes, indexing="ij", sparse=True))

    # -- spectral lattice -------------------------------------------------
    @cached_property
    def wave_indices(self) -> tuple:
        """Integer wave indices per axis on the half spectrum (broadcastable)."""
        idx = []
        for a, n in enumerate(self.points):
            if a == self.dim - 1:
                k = np.arange(n // 2 + 1)
            else:
                k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
            shape = [1] * self.dim
            shape[a] = k.size
            idx.append(k.reshape(shape))
        return tuple(idx)

    @cached_property
    def wavenumbers(self) -> tuple:
        """Physical wavenumbers ``2*pi*m/L`` per axis; third entry is 0 for dim=2."""
        ks = [2.0 * math.pi / L * m.astype(float) for m, L in zip(self.wave_indices, self.lengths)]
        if self.dim == 2:
            ks.append(np.zeros((1, 1)))
        return tuple(ks)

    @cached_property
    def derivative_wavenumbers(self) -> tuple:
        """Wavenumbers for odd derivatives: Nyquist entries set to zero."""
        out = []
        for a, (k, m) in enumerate(zip(self.wavenumbers, self.wave_indices)):
            k = k.copy()
            k[np.abs(m) == self.points[a] // 2] = 0.0
            out.append(k)
        if self.dim == 2:
            out.append(np.zeros((1, 1)))
        return tuple(out)

    @cached_property
    def k_abs(self) -> np.ndarray:
        """``|k|`` on the half spectrum (true wavenumbers, Nyquist included)."""
        k2 = sum(np.broadcast_to(k * k, self.spectral_shape) for k in self.wavenumbers[: self.dim])
        return np.sqrt(k2)

    @cached_property
    def k2_derivative(self) -> np.ndarray:
        """``|k|^2`` built from the derivative wavenumbers (symbol of ``div grad``)."""
        return sum(np.broadcast_to(k * k, self.spectral_shape) for k in self.derivative_wavenumbers)

    @cached_property
    def hermitian_weights(self) -> np.ndarray:
        """Multiplicity of each stored coefficient in the full spectrum."""
        n = self.points[-1]
        m = self.wave_indices[-1]
        w = np.where((m == 0) | (m == n // 2), 1.0, 2.0)
        return np.broadcast_to(w, self.spectral_shape).copy()

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.spectral_shape, dtype=bool)
        for m, n in zip(self.wave_indices, self.points):
            cutoff = math.floor(self.dealias_fraction * (n // 2))
            mask &= np.broadcast_to(np.abs(m) <= cutoff, self.spectral_shape)
        return mask

    @property
    def dealias_cutoff(self) -> tuple:
        return tuple(math.floor(self.dealias_fraction * (n // 2)) for n in self.points)

    def mode_index(self, k: Sequence[int]):
        """Locate integer wavevector ``k`` in the half spectrum.

        Returns ``(index, conjugate)``; when ``conjugate`` is True the stored
        entry holds the coefficient of ``-k`` and must be conjugated.
        """
        k = [int(v) for v in k][: self.dim]
        if len(k) < self.dim:
            k = k + [0] * (self.dim - len(k))
        conj = k[-1] < 0
        if conj:
            k = [-v for v in k]
        index = []
        for a, (v, n) in enumerate(zip(k, self.points)):
            if a == self.dim - 1:
                if v > n // 2:
                    raise ConfigError(f"wave index {v} not resolved on axis {a}")
                index.append(v)
            else:
                if abs(v) > n // 2:
                    raise ConfigError(f"wave index {v} not resolved on axis {a}")
                index.append(v % n)
        return tuple(index), conj

    # -- (de)serialisation ----------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "points": list(self.points),
            "lengths": list(self.lengths),
            "dealias_fraction": self.dealias_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict, workers: int = 1) -> "Grid":
        try:
            return cls(
                dim=int(d["dim"]),
                points=d["points"],
                lengths=d.get("lengths"),
                dealias_fraction=float(d.get("dealias_fraction", 2.0 / 3.0)),
                workers=workers,
            )
        except KeyError as exc:
            raise ConfigError(f"grid config missing key {exc}") from None


@dataclass(frozen=True)
class PhysicalParams:
    """Every scalar appearing in the scaled Euler-Maxwell system.

    ``lam`` is the Debye length (``"lambda"`` in JSON).
    """

    tau: float = 1.0
    eps: float = 1.0
    lam: float = 1.0
    gamma: float = 2.0
    p0: float = 0.5
    n_bar: float = 1.0
    b_bar: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("tau", "eps", "lam"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        if not self.gamma >= 1.0:
            raise ConfigError(f"gamma must be >= 1, got {self.gamma}")
        if not self.p0 > 0.0:
            raise ConfigError(f"p0 must be positive, got {self.p0}")
        if np.ndim(self.n_bar) != 0:
            raise ConfigError("n_bar must be a constant scalar (variable doping is not supported)")
        if not self.n_bar > 0.0:
            raise ConfigError(f"n_bar must be positive, got {self.n_bar}")
        b = tuple(float(v) for v in self.b_bar)
        if len(b) != 3:
            raise ConfigError("b_bar must be a 3-vector")
        object.__setattr__(self, "b_bar", b)

    @property
    def psi_bar(self) -> float:
        """Sound speed at the background density."""
        return math.sqrt(self.p0 * self.gamma * self.n_bar ** (self.gamma - 1.0))

    @property
    def dp_bar(self) -> float:
        """``P'(n_bar)``."""
        return self.p0 * self.gamma * self.n_bar ** (self.gamma - 1.0)

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "eps": self.eps,
            "lambda": self.lam,
            "gamma": self.gamma,
            "p0": self.p0,
            "n_bar": self.n_bar,
            "b_bar": list(self.b_bar),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicalParams":
        known = {"tau", "eps", "lambda", "gamma", "p0", "n_bar", "b_bar"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown parameter keys: {sorted(unknown)}")
        n_bar = d.get("n_bar", 1.0)
        if isinstance(n_bar, (list, dict)):
            raise ConfigError("n_bar must be a constant scalar (variable doping is not supported)")
        return cls(
            tau=float(d.get("tau", 1.0)),
            eps=float(d.get("eps", 1.0)),
            lam=float(d.get("lambda", 1.0)),
            gamma=float(d.get("gamma", 2.0)),
            p0=float(d.get("p0", 0.5)),
            n_bar=float(n_bar),
            b_bar=tuple(d.get("b_bar", (0.0, 0.0, 0.0))),
        )


@dataclass
class State:
    """Physical phase point ``(n, u, E, B)`` on the grid."""

    n: np.ndarray
    u: np.ndarray
    e_field: np.ndarray
    b_field: np.ndarray

    def copy(self) -> "State":
        return State(self.n.copy(), self.u.copy(), self.e_field.copy(), self.b_field.copy())

    def as_dict(self) -> dict:
        return {"n": self.n, "u": self.u, "e_field": self.e_field, "b_field": self.b_field}


def equilibrium(grid: Grid, params: PhysicalParams) -> State:
    """Constant state ``(n_bar, 0, 0, B_bar)``."""
    shape = grid.shape
    b = np.empty((3,) + shape)
    for i in range(3):
        b[i] = params.b_bar[i]
    return State(
        n=np.full(shape, params.n_bar),
        u=np.zeros((3,) + shape),
        e_field=np.zeros((3,) + shape),
        b_field=b,
    )


def _check_shape(grid: Grid, f: np.ndarray, spectral: bool = False):
    target = grid.spectral_shape if spectral else grid.shape
    if tuple(f.shape[-grid.dim:]) != target:
        kind = "spectral" if spectral else "real"
        raise ConfigError(f"{kind} field shape {f.shape} does not match grid {target}")


def to_spectral(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Forward transform over the trailing spatial axes."""
    f = np.asarray(f, dtype=float)
    _check_shape(grid, f)
    return scipy.fft.rfftn(f, axes=grid.axes, norm="forward", workers=grid.workers)


def from_spectral(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_spectral`."""
    _check_shape(grid, fh, spectral=True)
    return scipy.fft.irfftn(fh, s=grid.shape, axes=grid.axes, norm="forward", workers=grid.workers)


# -- spectral derivative kernels (spectral in, spectral out) --------------

def grad_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    kd = grid.derivative_wavenumbers
    return np.stack([1j * k * fh for k in kd])


def div_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    kd = grid.derivative_wavenumbers
    return 1j * (kd[0] * vh[0] + kd[1] * vh[1] + kd[2] * vh[2])


def curl_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    k1, k2, k3 = grid.derivative_wavenumbers
    return 1j * np.stack([
        k2 * vh[2] - k3 * vh[1],
        k3 * vh[0] - k1 * vh[2],
        k1 * vh[1] - k2 * vh[0],
    ])


def gradient_tensor_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    """``d v_i / d x_j`` for a vector field, shape ``(3, 3, ...)`` (i, j)."""
    kd = grid.derivative_wavenumbers
    return np.stack([np.stack([1j * k * vh[i] for k in kd]) for i in range(vh.shape[0])])


# -- real-space operators -------------------------------------------------

def grad(grid: Grid, f: np.ndarray) -> np.ndarray:
    return from_spectral(grid, grad_hat(grid, to_spectral(grid, f)))


def div(grid: Grid, v: np.ndarray) -> np.ndarray:
    return from_spectral(grid, div_hat(grid, to_spectral(grid, v)))


def curl(grid: Grid, v: np.ndarray) -> np.ndarray:
    return from_spectral(grid, curl_hat(grid, to_spectral(grid, v)))


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    return from_spectral(grid, -(grid.k_abs ** 2) * to_spectral(grid, f))


def dealias_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    return np.where(grid.dealias_mask, fh, 0.0)


def dealias(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Zero every coefficient with some ``|k_i|`` above the dealias cutoff."""
    return from_spectral(grid, dealias_hat(grid, to_spectral(grid, f)))


def leray_project_hat(grid: Grid, vh: np.ndarray) -> np.ndarray:
    """Remove the gradient part of a vector field (the mean is kept)."""
    kd = grid.derivative_wavenumbers
    k2 = grid.k2_derivative
    safe = np.where(k2 > 0.0, k2, 1.0)
    kv = (kd[0] * vh[0] + kd[1] * vh[1] + kd[2] * vh[2]) / safe
    kv = np.where(k2 > 0.0, kv, 0.0)
    return np.stack([vh[i] - kd[i] * kv for i in range(3)])


# -- norms ----------------------------------------------------------------

def l2_norm(grid: Grid, f: np.ndarray) -> float:
    """Grid ``L^2`` norm with volume-weighted quadrature (vectors: Euclidean)."""
    return math.sqrt(grid.cell_volume * float(np.sum(np.square(f))))


def spectral_l2_norm(grid: Grid, fh: np.ndarray) -> float:
    """``L^2`` norm evaluated from coefficients (Parseval)."""
    return math.sqrt(grid.volume * float(np.sum(grid.hermitian_weights * np.abs(fh) ** 2)))


def check_finite(f: np.ndarray, name: str = "field"):
    if not np.all(np.isfinite(f)):
        raise DomainError(f"{name} contains non-finite values")
