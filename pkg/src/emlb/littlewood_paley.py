"""Littlewood-Paley filter bank, dyadic blocks and Besov / Chemin-Lerner norms.

The low-pass symbol ``chi`` is a radial smooth ramp equal to 1 on
``|xi| <= 3/4`` and 0 on ``|xi| >= 4/3``; the annulus symbol is
``phi(xi) = chi(xi/2) - chi(xi)`` and block ``q >= 0`` uses
``phi(2^-q xi) = chi(2^-(q+1) xi) - chi(2^-q xi)``. Summing the telescoping
series makes the partition of unity hold to rounding.

Fields passed to the norm routines may be scalar (grid shape), vector
(leading axis of 3, Euclidean pointwise norm) or a tuple/list of such fields,
in which case the norm of the tuple is the sum of the component norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ConfigError, InputError
from .fields import (
    Grid,
    dealias_hat,
    from_spectral,
    grad_hat,
    to_spectral,
)

CHI_INNER = 3.0 / 4.0
CHI_OUTER = 4.0 / 3.0
SHELL = (3.0 / 4.0, 8.0 / 3.0)


def bump(x):
    """Smooth compactly supported bump ``exp(-1/(1-x^2))`` on ``(-1, 1)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def _gauss_legendre(n: int = 160):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=1)
def _bump_mass() -> float:
    x, w = _gauss_legendre()
    return float(np.sum(w * bump(x)))


def ramp(t):
    """Normalised integral of :func:`bump` from -1 to ``t`` (0 below -1, 1 above 1)."""
    t = np.asarray(t, dtype=float)
    tc = np.clip(t, -1.0, 1.0)
    x, w = _gauss_legendre()
    half = 0.5 * (tc + 1.0)
    nodes = -1.0 + half[..., None] * (x + 1.0)
    vals = half * np.sum(w * bump(nodes), axis=-1) / _bump_mass()
    return np.where(t <= -1.0, 0.0, np.where(t >= 1.0, 1.0, vals))


def chi(xi):
    """Radial low-pass symbol evaluated at ``|xi|``."""
    r = np.abs(np.asarray(xi, dtype=float))
    t = 2.0 * (r - CHI_INNER) / (CHI_OUTER - CHI_INNER) - 1.0
    return 1.0 - ramp(t)


def phi(xi):
    """Annulus symbol ``chi(xi/2) - chi(xi)``."""
    r = np.abs(np.asarray(xi, dtype=float))
    return chi(r / 2.0) - chi(r)


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        if not (self.p >= 1.0) or not (self.r >= 1.0):
            raise ConfigError(f"Besov exponents need p, r >= 1, got p={self.p}, r={self.r}")

    def to_dict(self):
        return {"s": self.s, "p": _exp_str(self.p), "r": _exp_str(self.r)}


@dataclass(frozen=True)
class CheminLernerSpec:
    rho: float
    besov: BesovSpec
    t_final: float = None

    def __post_init__(self):
        if not self.rho >= 1.0:
            raise ConfigError(f"time exponent rho must be >= 1, got {self.rho}")
        if self.t_final is not None and not self.t_final > 0.0:
            raise ConfigError("t_final must be positive")

    def to_dict(self):
        d = {"rho": _exp_str(self.rho), "besov": self.besov.to_dict()}
        if self.t_final is not None:
            d["t_final"] = self.t_final
        return d


def _exp_str(v):
    return "inf" if math.isinf(v) else v


def parse_exponent(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "infty", "infinity", "oo"):
        return math.inf
    return float(t)


class FilterBank:
    """Dyadic symbols sampled on a grid's half-spectrum lattice.

    ``symbols[0]`` is ``chi`` (block q = -1); ``symbols[q + 1]`` is the block-q
    annulus symbol for ``q = 0..q_max``.
    """

    def __init__(self, grid: Grid):
        kmax = math.sqrt(sum((2.0 * math.pi / L * (n // 2)) ** 2 for n, L in zip(grid.points, grid.lengths)))
        q_max = math.floor(math.log2(CHI_OUTER * kmax)) if kmax > 0 else -1
        if q_max < 0:
            raise ConfigError("grid too small to resolve the q = 0 annulus")
        self.grid = grid
        self.q_max = q_max
        kabs = grid.k_abs
        radii, inverse = np.unique(kabs, return_inverse=True)
        inverse = inverse.reshape(kabs.shape)
        # c[j] = chi(2^-j r) for j = 0..q_max+1
        c = chi(radii[None, :] / (2.0 ** np.arange(0, q_max + 2))[:, None])
        sym = np.empty((q_max + 2, radii.size))
        sym[0] = c[0]
        sym[1:] = c[1:] - c[:-1]
        self.radial = radii
        self.radial_symbols = sym
        self.symbols = sym[:, inverse]
        self._sq_flat = (self.symbols ** 2).reshape(q_max + 2, -1) * grid.hermitian_weights.reshape(1, -1)

    @property
    def qs(self) -> np.ndarray:
        return np.arange(-1, self.q_max + 1)

    def symbol(self, q: int) -> np.ndarray:
        if not -1 <= q <= self.q_max:
            raise ConfigError(f"block index {q} outside [-1, {self.q_max}]")
        return self.symbols[q + 1]

    def partition_residual(self) -> float:
        return float(np.max(np.abs(self.symbols.sum(axis=0) - 1.0)))

    def weights(self, s: float) -> np.ndarray:
        return 2.0 ** (s * self.qs.astype(float))


def build_filters(grid: Grid) -> FilterBank:
    return FilterBank(grid)


@dataclass
class LPDecomposition:
    blocks: list = field(default_factory=list)

    def reconstruct(self) -> np.ndarray:
        return sum(b for _, b in self.blocks)

    def block(self, q: int) -> np.ndarray:
        for qq, b in self.blocks:
            if qq == q:
                return b
        raise KeyError(q)


def _components(f):
    if isinstance(f, (list, tuple)):
        return list(f)
    return [f]


def _is_vector(grid: Grid, a: np.ndarray) -> bool:
    return a.ndim == grid.dim + 1


def block_hat(fh: np.ndarray, q: int, bank: FilterBank) -> np.ndarray:
    return bank.symbol(q) * fh


def decompose(f: np.ndarray, bank: FilterBank) -> LPDecomposition:
    fh = to_spectral(bank.grid, f)
    return LPDecomposition([(int(q), from_spectral(bank.grid, bank.symbol(q) * fh)) for q in bank.qs])


def block_l2_norms_hat(fh: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Per-block ``L^2`` norms from spectral coefficients (vector: Euclidean)."""
    grid = bank.grid
    power = np.abs(fh) ** 2
    if power.ndim == grid.dim + 1:
        power = power.sum(axis=0)
    sq = bank._sq_flat @ power.reshape(-1)
    return np.sqrt(np.maximum(grid.volume * sq, 0.0))


def block_norms(f: np.ndarray, bank: FilterBank, p: float = 2.0) -> np.ndarray:
    """``||Delta_q f||_{L^p}`` for ``q = -1..q_max`` (single scalar or vector field)."""
    grid = bank.grid
    f = np.asarray(f, dtype=float)
    fh = to_spectral(grid, f)
    if p == 2.0:
        return block_l2_norms_hat(fh, bank)
    vec = _is_vector(grid, f)
    out = np.empty(bank.q_max + 2)
    for i, q in enumerate(bank.qs):
        b = from_spectral(grid, bank.symbol(q) * fh)
        mag = np.sqrt(np.sum(b * b, axis=0)) if vec else np.abs(b)
        if math.isinf(p):
            out[i] = float(np.max(mag))
        else:
            out[i] = (grid.cell_volume * float(np.sum(mag ** p))) ** (1.0 / p)
    return out


def _lr(values: np.ndarray, r: float) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    if math.isinf(r):
        return float(np.max(values))
    if r == 1.0:
        return float(np.sum(values))
    return float(np.sum(values ** r) ** (1.0 / r))


def besov_per_block(f, spec: BesovSpec, bank: FilterBank) -> np.ndarray:
    """Weighted block norms ``2^{qs} ||Delta_q f||_p`` summed over tuple components."""
    w = bank.weights(spec.s)
    return sum(w * block_norms(c, bank, spec.p) for c in _components(f))


def besov_norm(f, spec: BesovSpec, bank: FilterBank) -> float:
    w = bank.weights(spec.s)
    return float(sum(_lr(w * block_norms(c, bank, spec.p), spec.r) for c in _components(f)))


def besov_norm_from_blocks(blocks: np.ndarray, spec: BesovSpec, bank: FilterBank) -> float:
    return _lr(bank.weights(spec.s) * blocks, spec.r)


def norm_report(f, spec: BesovSpec, bank: FilterBank) -> dict:
    per = besov_per_block(f, spec, bank)
    return {
        "spec": spec.to_dict(),
        "value": besov_norm(f, spec, bank),
        "per_block": [[int(q), float(v)] for q, v in zip(bank.qs, per)],
    }


def _time_lp(times: np.ndarray, values: np.ndarray, rho: float) -> np.ndarray:
    """Trapezoidal ``L^rho`` norm in time along axis 0."""
    if math.isinf(rho):
        return np.max(values, axis=0)
    integral = np.trapezoid(values ** rho, times, axis=0) if hasattr(np, "trapezoid") else np.trapz(values ** rho, times, axis=0)
    return np.maximum(integral, 0.0) ** (1.0 / rho)


def _prepare_times(times, n_samples: int, spec: CheminLernerSpec):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size != n_samples:
        raise InputError("times and samples must have equal length")
    if n_samples == 0:
        raise InputError("empty time series")
    if np.any(np.diff(times) <= 0.0):
        raise InputError("sample times must be strictly increasing")
    if not math.isinf(spec.rho) and n_samples < 2:
        raise InputError("at least two samples are needed for a finite time exponent")
    keep = n_samples
    if spec.t_final is not None:
        if times[-1] < spec.t_final - 1e-9 * max(1.0, spec.t_final):
            raise InputError(f"samples end at t={times[-1]} before t_final={spec.t_final}")
        keep = int(np.searchsorted(times, spec.t_final * (1.0 + 1e-12), side="right"))
    return times[:keep], keep


def block_norm_series(samples: Sequence, bank: FilterBank, p: float = 2.0) -> np.ndarray:
    """Array ``(n_times, n_blocks)`` of block norms for one scalar/vector field series."""
    return np.array([block_norms(s, bank, p) for s in samples])


def chemin_lerner_from_blocks(times, blocks: np.ndarray, spec: CheminLernerSpec, bank: FilterBank) -> float:
    """Chemin-Lerner norm from precomputed ``(n_times, n_blocks)`` block norms."""
    times, keep = _prepare_times(times, blocks.shape[0], spec)
    per_q = _time_lp(times, blocks[:keep], spec.rho)
    return _lr(bank.weights(spec.besov.s) * per_q, spec.besov.r)


def chemin_lerner_norm(series, spec: CheminLernerSpec, bank: FilterBank) -> float:
    """``||f||_{L~^rho_T(B^s_{p,r})}`` for ``series = (times, samples)``.

    ``samples`` is a sequence over time whose entries are fields or tuples of
    fields; tuple components are normed separately and summed.
    """
    times, samples = series
    samples = list(samples)
    if not samples:
        raise InputError("empty time series")
    n_comp = len(_components(samples[0]))
    total = 0.0
    for c in range(n_comp):
        blocks = block_norm_series([_components(s)[c] for s in samples], bank, spec.besov.p)
        total += chemin_lerner_from_blocks(times, blocks, spec, bank)
    return total


def time_lebesgue_besov_norm(series, spec: CheminLernerSpec, bank: FilterBank) -> float:
    """``||f||_{L^rho_T(B^s_{p,r})}``: Besov norm per instant, then time ``L^rho``."""
    times, samples = series
    samples = list(samples)
    if not samples:
        raise InputError("empty time series")
    n_comp = len(_components(samples[0]))
    total = 0.0
    w = bank.weights(spec.besov.s)
    for c in range(n_comp):
        blocks = block_norm_series([_components(s)[c] for s in samples], bank, spec.besov.p)
        t, keep = _prepare_times(times, blocks.shape[0], spec)
        inst = np.array([_lr(w * b, spec.besov.r) for b in blocks[:keep]])
        total += float(_time_lp(t, inst, spec.rho))
    return total


def bernstein_verify(f: np.ndarray, q: int, bank: FilterBank) -> dict:
    """Ratio ``||grad f|| / (2^q ||f||)`` after localising ``f`` to block ``q >= 0``."""
    grid = bank.grid
    if q < 0:
        raise ConfigError("Bernstein bracket applies to annulus blocks q >= 0")
    fh = bank.symbol(q) * to_spectral(grid, f)
    power = np.abs(fh) ** 2
    if power.ndim == grid.dim + 1:
        power = power.sum(axis=0)
    k2 = grid.k_abs ** 2
    wts = grid.hermitian_weights
    norm_f = math.sqrt(grid.volume * float(np.sum(wts * power)))
    norm_grad = math.sqrt(grid.volume * float(np.sum(wts * k2 * power)))
    rhs = 2.0 ** q * norm_f
    scale = max(1.0, float(np.max(np.abs(f)))) if np.size(f) else 1.0
    if norm_f <= 1e-14 * scale:
        raise InputError(f"field has no content in block {q}; Bernstein ratio undefined")
    return {"q": int(q), "lhs": norm_grad, "rhs": rhs, "ratio": norm_grad / rhs}


def commutator_hat(uh: np.ndarray, fh: np.ndarray, q: int, bank: FilterBank) -> np.ndarray:
    grid = bank.grid
    sym = bank.symbol(q)
    u = from_spectral(grid, uh)
    grad_q = from_spectral(grid, grad_hat(grid, sym * fh))
    grad_f = from_spectral(grid, grad_hat(grid, fh))
    first = dealias_hat(grid, to_spectral(grid, np.sum(u * grad_q, axis=0)))
    second = sym * dealias_hat(grid, to_spectral(grid, np.sum(u * grad_f, axis=0)))
    return first - second


def commutator_norm(u: np.ndarray, f: np.ndarray, q: int, bank: FilterBank) -> float:
    """``||u . grad(Delta_q f) - Delta_q(u . grad f)||_{L^2}``."""
    grid = bank.grid
    ch = commutator_hat(to_spectral(grid, u), to_spectral(grid, f), q, bank)
    return math.sqrt(grid.volume * float(np.sum(grid.hermitian_weights * np.abs(ch) ** 2)))


def commutator_constant(u: np.ndarray, f: np.ndarray, bank: FilterBank, s: float = None) -> float:
    """``sum_q 2^{qs} ||[u, Delta_q] . grad f|| / (||u||_{B^s} ||f||_{B^s})``, p=2, r=1."""
    grid = bank.grid
    s = grid.sigma if s is None else s
    spec = BesovSpec(s, 2.0, 1.0)
    uh = to_spectral(grid, u)
    fh = to_spectral(grid, f)
    total = 0.0
    for q in bank.qs:
        ch = commutator_hat(uh, fh, int(q), bank)
        total += 2.0 ** (q * s) * math.sqrt(grid.volume * float(np.sum(grid.hermitian_weights * np.abs(ch) ** 2)))
    denom = besov_norm(u, spec, bank) * besov_norm(f, spec, bank)
    if denom == 0.0:
        raise InputError("commutator constant undefined for zero fields")
    return total / denom


def product_constant(times, f_samples, g_samples, bank: FilterBank, s: float = None) -> float:
    """``||fg||_{L~^1_T(B^s)} / (||f||_{L~^2_T(B^s)} ||g||_{L~^2_T(B^s)})`` for scalar series."""
    grid = bank.grid
    s = grid.sigma if s is None else s
    besov = BesovSpec(s, 2.0, 1.0)
    prods = [from_spectral(grid, dealias_hat(grid, to_spectral(grid, a * b))) for a, b in zip(f_samples, g_samples)]
    num = chemin_lerner_norm((times, prods), CheminLernerSpec(1.0, besov), bank)
    den = chemin_lerner_norm((times, list(f_samples)), CheminLernerSpec(2.0, besov), bank) * chemin_lerner_norm(
        (times, list(g_samples)), CheminLernerSpec(2.0, besov), bank
    )
    if den == 0.0:
        raise InputError("product constant undefined for zero series")
    return num / den
