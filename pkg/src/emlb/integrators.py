"""Integrating-factor RK4 time stepping for the Euler-Maxwell family.

The evolved unknowns are spectral perturbations of the equilibrium:
``(n - n_bar, u, E, B - B_bar)`` for Euler-Maxwell, ``(n - n_bar, u)`` for
Euler-Poisson and ``N - n_bar`` for drift-diffusion. The stiff linear part
(relaxation, Maxwell curls, plasma coupling, pressure waves) is propagated by
exact per-mode matrix exponentials; the quadratic remainder is explicit
(Lawson RK4). Only modes inside the dealias band are evolved: the initial
state is filtered to that band and every nonlinear term is dealiased, so the
band is invariant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.fft
import scipy.linalg

from . import models
from .errors import BlowUpError, ConfigError, DomainError
from .fields import (
    Grid,
    PhysicalParams,
    State,
    dealias_hat,
    div_hat,
    equilibrium,
    from_spectral,
    grad_hat,
    gradient_tensor_hat,
    leray_project_hat,
    to_spectral,
)
from .littlewood_paley import BesovSpec, FilterBank, besov_norm_from_blocks, block_l2_norms_hat

log = logging.getLogger(__name__)

SYSTEMS = (
    "euler_maxwell",
    "euler_poisson",
    "drift_diffusion",
    "scaled_relax",
    "scaled_combined",
    "scaled_nonrel",
)
CFL_SAFETY = 0.4
MIN_DENSITY_FRACTION = 1e-6

DIAGNOSTIC_COLUMNS = (
    "time",
    "besov_sigma_n",
    "besov_sigma_u",
    "besov_sigma_E",
    "besov_sigma_B",
    "gauss_residual",
    "divB_residual",
    "min_n",
)


@lru_cache(maxsize=8)
def filter_bank(grid: Grid) -> FilterBank:
    return FilterBank(grid)


def base_system(system: str) -> str:
    """Solver actually integrated for ``system``."""
    if system in ("euler_maxwell", "scaled_relax", "scaled_combined", "scaled_nonrel"):
        return "euler_maxwell"
    return system


def time_scale(system: str, params: PhysicalParams) -> float:
    """Factor ``s`` with ``t_system = s * t_integrated`` (``tau`` on the O(1/tau) scale)."""
    return params.tau if system in ("scaled_relax", "scaled_combined") else 1.0


def validate_system(system: str, params: PhysicalParams):
    if system not in SYSTEMS:
        raise ConfigError(f"unknown system {system!r}; expected one of {list(SYSTEMS)}")
    if system == "scaled_relax" and not (params.eps == 1.0 and params.lam == 1.0):
        raise ConfigError("scaled_relax requires eps = lambda = 1")
    if system == "scaled_combined" and params.lam != 1.0:
        raise ConfigError("scaled_combined requires lambda = 1")
    if system == "scaled_nonrel" and not (params.tau == 1.0 and params.lam == 1.0):
        raise ConfigError("scaled_nonrel requires tau = lambda = 1")


@dataclass
class RunConfig:
    grid: Grid
    params: PhysicalParams
    system: str = "euler_maxwell"
    t_final: float = 1.0
    dt: object = "auto"
    output_stride: int = 1
    initial_data: dict = field(default_factory=lambda: {"kind": "equilibrium"})
    linear_only: bool = False

    def __post_init__(self):
        validate_system(self.system, self.params)
        if not (self.t_final > 0.0):
            raise ConfigError("t_final must be positive")
        if self.dt != "auto":
            try:
                self.dt = float(self.dt)
            except (TypeError, ValueError):
                raise ConfigError(f"dt must be a positive number or 'auto', got {self.dt!r}") from None
            if not self.dt > 0.0:
                raise ConfigError("dt must be positive")
        if int(self.output_stride) < 1:
            raise ConfigError("output_stride must be >= 1")
        self.output_stride = int(self.output_stride)

    def replace(self, **changes) -> "RunConfig":
        d = dict(self.__dict__)
        d.update(changes)
        return RunConfig(**d)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "params": self.params.to_dict(),
            "system": self.system,
            "t_final": self.t_final,
            "dt": self.dt,
            "output_stride": self.output_stride,
            "initial_data": self.initial_data,
            "linear_only": self.linear_only,
        }

    @classmethod
    def from_dict(cls, d: dict, workers: int = 1) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("run config must be a JSON object")
        for key in ("grid", "params"):
            if key not in d:
                raise ConfigError(f"run config missing {key!r}")
        return cls(
            grid=Grid.from_dict(d["grid"], workers=workers),
            params=PhysicalParams.from_dict(d["params"]),
            system=d.get("system", "euler_maxwell"),
            t_final=float(d.get("t_final", 1.0)),
            dt=d.get("dt", "auto"),
            output_stride=d.get("output_stride", 1),
            initial_data=d.get("initial_data", {"kind": "equilibrium"}),
            linear_only=bool(d.get("linear_only", False)),
        )


@dataclass
class TimeSeries:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def diagnostic(self, name: str) -> np.ndarray:
        return np.array([d[name] for d in self.diagnostics])


# -- initial data ---------------------------------------------------------

def init_compatible(grid: Grid, n0, u0, b0_raw, params: PhysicalParams, solenoidal_e=None) -> State:
    """Compatible initial state: Gauss-law ``E`` and divergence-free ``B``."""
    n0 = np.asarray(n0, dtype=float)
    if np.any(~np.isfinite(n0)) or np.any(n0 <= 0.0):
        raise DomainError("initial density must be finite and strictly positive (vacuum is excluded)")
    models.check_mean(grid, n0, params)
    e0 = models.gauss_field(grid, n0, params, check=False)
    if solenoidal_e is not None:
        e0 = e0 + from_spectral(grid, leray_project_hat(grid, to_spectral(grid, solenoidal_e)))
    b0 = from_spectral(grid, leray_project_hat(grid, to_spectral(grid, b0_raw)))
    return State(n0.copy(), np.asarray(u0, dtype=float).copy(), e0, b0)


def _random_band_hat(grid: Grid, rng, n_comp: int, kmax: float) -> np.ndarray:
    shape = (n_comp,) + grid.spectral_shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    radius = np.sqrt(sum(np.broadcast_to(m.astype(float) ** 2, grid.spectral_shape) for m in grid.wave_indices))
    keep = (radius <= kmax) & (radius > 0.0) & grid.dealias_mask
    return np.where(keep, coeffs, 0.0)


def _mode_field(grid: Grid, k, amplitude: float, phase: float) -> np.ndarray:
    x = grid.coordinates()
    kx = sum(2.0 * math.pi / L * float(ki) * xi for ki, xi, L in zip(k, x, grid.lengths))
    return amplitude * np.cos(kx + phase)


_FIELD_ALIASES = {"n": "n", "u": "u", "E": "E", "e_field": "E", "B": "B", "b_field": "B"}


def initial_state(grid: Grid, params: PhysicalParams, spec: dict, seed: int = 0) -> State:
    """Build a compatible initial state from an initial-data spec.

    Kinds: ``equilibrium``; ``modes`` (sum of cosines ``amplitude*cos(k.x + phase)``
    added to chosen field components); ``random`` (seeded band-limited
    perturbation scaled to a target ``B^sigma_{2,1}`` tuple norm). ``E`` is
    always the Gauss-law field plus an optional solenoidal part; ``B`` is
    projected onto divergence-free fields.
    """
    from .snapshot import read_state

    kind = spec.get("kind", "equilibrium")
    eq = equilibrium(grid, params)
    if kind == "equilibrium":
        return init_compatible(grid, eq.n, eq.u, eq.b_field, params)
    if kind == "snapshot":
        _, _, _, st = read_state(spec["path"], workers=grid.workers)
        return init_compatible(grid, st.n, st.u, st.b_field, params, solenoidal_e=st.e_field - models.gauss_field(grid, st.n, params))
    if kind == "modes":
        n0, u0, b0 = eq.n.copy(), eq.u.copy(), eq.b_field.copy()
        e_sol = np.zeros_like(u0)
        for mode in spec.get("modes", []):
            name = _FIELD_ALIASES.get(mode.get("field", "n"))
            if name is None:
                raise ConfigError(f"unknown mode field {mode.get('field')!r}")
            k = mode.get("k")
            if k is None or len(k) != grid.dim:
                raise ConfigError(f"mode wavevector must have {grid.dim} integer entries")
            f = _mode_field(grid, k, float(mode.get("amplitude", 1e-3)), float(mode.get("phase", 0.0)))
            comp = int(mode.get("component", 0))
            if name == "n":
                n0 = n0 + f
            elif not 0 <= comp < 3:
                raise ConfigError("vector component must be 0, 1 or 2")
            elif name == "u":
                u0[comp] += f
            elif name == "E":
                e_sol[comp] += f
            else:
                b0[comp] += f
        return init_compatible(grid, n0, u0, b0, params, solenoidal_e=e_sol)
    if kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", seed)))
        kmax = float(spec.get("kmax", 4))
        fields = spec.get("fields", ["n", "u"])
        unknown = [f for f in fields if _FIELD_ALIASES.get(f) is None]
        if unknown:
            raise ConfigError(f"unknown random fields {unknown}")
        fields = {_FIELD_ALIASES[f] for f in fields}
        zeros_v = np.zeros((3,) + grid.spectral_shape, dtype=complex)
        zeros_s = np.zeros(grid.spectral_shape, dtype=complex)
        nh = _random_band_hat(grid, rng, 1, kmax)[0] if "n" in fields else zeros_s
        if "u" in fields:
            if spec.get("u_potential", False):
                uh = grad_hat(grid, _random_band_hat(grid, rng, 1, kmax)[0])
            else:
                uh = _random_band_hat(grid, rng, 3, kmax)
        else:
            uh = zeros_v
        if grid.dim == 2 and spec.get("planar", False):
            uh[2] = 0.0
        esol_h = leray_project_hat(grid, _random_band_hat(grid, rng, 3, kmax)) if "E" in fields else zeros_v
        bh = leray_project_hat(grid, _random_band_hat(grid, rng, 3, kmax)) if "B" in fields else zeros_v
        n_p = from_spectral(grid, nh)
        u_p = from_spectral(grid, uh)
        e_p = from_spectral(grid, models.gauss_field_hat(grid, nh, params) + esol_h)
        b_p = from_spectral(grid, bh)
        bank = filter_bank(grid)
        spec_b = BesovSpec(grid.sigma, 2.0, 1.0)
        from .littlewood_paley import besov_norm

        norm = besov_norm((n_p, u_p, e_p, b_p), spec_b, bank)
        if norm == 0.0:
            raise ConfigError("random initial data has zero amplitude (empty field list or kmax < 1)")
        c = float(spec.get("amplitude", 1e-3)) / norm
        return init_compatible(
            grid,
            eq.n + c * n_p,
            c * u_p,
            eq.b_field + c * b_p,
            params,
            solenoidal_e=c * from_spectral(grid, esol_h),
        )
    raise ConfigError(f"unknown initial data kind {kind!r}")


# -- stepper ----------------------------------------------------------------

def _cross(a, b):
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _cross_tensor(k):
    """``C(k)`` with ``C(k) v = k x v`` for arrays of wavevectors (last axes 3x3)."""
    z = np.zeros_like(k[0])
    return np.stack([
        np.stack([z, -k[2], k[1]], axis=-1),
        np.stack([k[2], z, -k[0]], axis=-1),
        np.stack([-k[1], k[0], z], axis=-1),
    ], axis=-2)


class Stepper:
    """Lawson RK4 for one (system, grid, params) triple.

    ``W`` is the packed spectral perturbation, shape ``(ncomp,) + spectral_shape``.
    """

    def __init__(self, grid: Grid, params: PhysicalParams, system: str = "euler_maxwell", linear_only: bool = False):
        validate_system(system, params)
        self.grid = grid
        self.params = params
        self.system = system
        self.kind = base_system(system)
        self.linear_only = linear_only
        self.ncomp = {"euler_maxwell": 10, "euler_poisson": 4, "drift_diffusion": 1}[self.kind]
        self.band = np.nonzero(grid.dealias_mask.reshape(-1))[0]
        self._exp_cache = {}
        self._ops = None

    # -- packing ------------------------------------------------------
    def pack(self, state: State) -> np.ndarray:
        g, p = self.grid, self.params
        nh = to_spectral(g, state.n - p.n_bar)
        if self.kind == "drift_diffusion":
            w = nh[None]
        elif self.kind == "euler_poisson":
            w = np.concatenate([nh[None], to_spectral(g, state.u)])
        else:
            f = state.b_field - np.asarray(p.b_bar).reshape((3,) + (1,) * g.dim)
            w = np.concatenate([nh[None], to_spectral(g, state.u), to_spectral(g, state.e_field), to_spectral(g, f)])
        return dealias_hat(g, w)

    def unpack(self, w: np.ndarray) -> State:
        """Physical state on the integrated (unscaled) time axis."""
        g, p = self.grid, self.params
        nt = from_spectral(g, w[0])
        n = nt + p.n_bar
        bbar = np.asarray(p.b_bar).reshape((3,) + (1,) * g.dim)
        if self.kind == "euler_maxwell":
            phys = from_spectral(g, w[1:])
            return State(n, phys[0:3], phys[3:6], phys[6:9] + bbar)
        e = from_spectral(g, models.gauss_field_hat(g, w[0], p))
        b = np.broadcast_to(bbar, (3,) + g.shape).copy()
        if self.kind == "euler_poisson":
            return State(n, from_spectral(g, w[1:4]), e, b)
        u = self._darcy(w[0], nt, e)
        return State(n, u, e, b)

    def _darcy(self, nh, nt, e):
        g, p = self.grid, self.params
        n = nt + p.n_bar
        pr = models.pressure_remainder(n, p)
        grad_p = from_spectral(g, grad_hat(g, p.dp_bar * nh + dealias_hat(g, to_spectral(g, pr))))
        ne = p.n_bar * e + from_spectral(g, dealias_hat(g, to_spectral(g, nt[None] * e)))
        return -(grad_p + ne) / n[None]

    # -- linear part ----------------------------------------------------
    def linear_operator(self) -> np.ndarray:
        """Per-mode generators on the dealias band, shape ``(n_band, ncomp, ncomp)``."""
        g, p = self.grid, self.params
        kd = [np.broadcast_to(k, g.spectral_shape).reshape(-1)[self.band] for k in g.derivative_wavenumbers]
        k2 = g.k2_derivative.reshape(-1)[self.band]
        m = self.band.size
        c = self.ncomp
        if self.kind == "drift_diffusion":
            rate = -(p.dp_bar * k2 + np.where(k2 > 0.0, p.n_bar / p.lam ** 2, 0.0))
            return rate.reshape(m, 1, 1).astype(complex)
        L = np.zeros((m, c, c), dtype=complex)
        kvec = np.stack(kd, axis=-1)
        L[:, 0, 1:4] = -1j * p.n_bar * kvec
        L[:, 1:4, 0] = -1j * (p.dp_bar / p.n_bar) * kvec
        L[:, 1:4, 1:4] = -np.eye(3) / p.tau
        if self.kind == "euler_poisson":
            safe = np.where(k2 > 0.0, k2, 1.0)
            L[:, 1:4, 0] += np.where(k2 > 0.0, -1.0 / (p.lam ** 2 * safe), 0.0)[:, None] * 1j * kvec
            return L
        L[:, 1:4, 1:4] += p.eps * models.cross_matrix(p.b_bar)
        L[:, 1:4, 4:7] = -np.eye(3)
        L[:, 4:7, 1:4] = p.n_bar / p.lam ** 2 * np.eye(3)
        ck = _cross_tensor(np.stack(kd))
        L[:, 4:7, 7:10] = 1j * ck / (p.eps * p.lam ** 2)
        L[:, 7:10, 4:7] = -1j * ck / p.eps
        return L

    def apply_linear(self, w: np.ndarray) -> np.ndarray:
        """``L W`` on the full half spectrum."""
        L = self._linear()
        flat = w.reshape(self.ncomp, -1)
        out = np.zeros_like(flat)
        out[:, self.band] = np.einsum("sij,js->is", L, flat[:, self.band])
        return out.reshape(w.shape)

    def _linear(self):
        if self._ops is None:
            self._ops = self.linear_operator()
        return self._ops

    def exponentials(self, dt: float):
        """``(exp(dt L), exp(dt L / 2))`` per band mode, cached by ``dt``."""
        key = float(dt)
        if key not in self._exp_cache:
            L = self._linear()
            if self.kind == "drift_diffusion":
                full = np.exp(dt * L)
                half = np.exp(0.5 * dt * L)
            else:
                full = scipy.linalg.expm(dt * L)
                half = scipy.linalg.expm(0.5 * dt * L)
            self._exp_cache.clear()
            self._exp_cache[key] = (full, half)
        return self._exp_cache[key]

    def _propagate(self, mat, w):
        flat = w.reshape(self.ncomp, -1)
        out = np.zeros_like(flat)
        if self.kind == "drift_diffusion":
            out[:, self.band] = mat[:, 0, 0][None] * flat[:, self.band]
        else:
            out[:, self.band] = np.einsum("sij,js->is", mat, flat[:, self.band])
        return out.reshape(w.shape)

    # -- nonlinear part -----------------------------------------------------
    def _ifft(self, a):
        g = self.grid
        return scipy.fft.irfftn(a, s=g.shape, axes=g.axes, norm="forward", workers=g.workers)

    def _fft_dealiased(self, a):
        g = self.grid
        return dealias_hat(g, scipy.fft.rfftn(a, axes=g.axes, norm="forward", workers=g.workers))

    def nonlinear(self, w: np.ndarray) -> np.ndarray:
        g, p = self.grid, self.params
        out = np.zeros_like(w)
        if self.linear_only:
            return out
        if self.kind == "drift_diffusion":
            nt = self._ifft(w[0])
            e = self._ifft(models.gauss_field_hat(g, w[0], p))
            pr = models.pressure_remainder(nt + p.n_bar, p)
            prods = self._fft_dealiased(np.concatenate([pr[None], nt[None] * e]))
            out[0] = div_hat(g, grad_hat(g, prods[0]) + prods[1:4])
            return out
        phys = self._ifft(w[:4] if self.kind == "euler_poisson" else w)
        nt = phys[0]
        u = phys[1:4]
        gu = self._ifft(gradient_tensor_hat(g, w[1:4]))
        adv = np.einsum("j...,ij...->i...", u, gu)
        hnl = models.enthalpy_remainder(nt + p.n_bar, p)
        terms = [nt[None] * u, adv, hnl[None]]
        if self.kind == "euler_maxwell":
            terms.append(_cross(u, phys[7:10]))
        prods = self._fft_dealiased(np.concatenate(terms))
        nu_h = prods[0:3]
        out[0] = -div_hat(g, nu_h)
        out[1:4] = -prods[3:6] - grad_hat(g, prods[6])
        if self.kind == "euler_maxwell":
            out[1:4] -= p.eps * prods[7:10]
            out[4:7] = nu_h / p.lam ** 2
        return out

    def tendency(self, w: np.ndarray) -> np.ndarray:
        return self.apply_linear(w) + self.nonlinear(w)

    # -- time stepping -----------------------------------------------------
    def step(self, w: np.ndarray, dt: float) -> np.ndarray:
        full, half = self.exponentials(dt)
        prop = self._propagate
        k1 = self.nonlinear(w)
        ew_half = prop(half, w)
        k2 = self.nonlinear(prop(half, w + 0.5 * dt * k1))
        k3 = self.nonlinear(ew_half + 0.5 * dt * k2)
        k4 = self.nonlinear(prop(full, w) + dt * prop(half, k3))
        return prop(full, w + dt / 6.0 * k1) + dt / 6.0 * (2.0 * prop(half, k2 + k3) + k4)

    def check(self, w: np.ndarray, t: float):
        """Raise :class:`BlowUpError` on non-finite data or near-vacuum density."""
        if not np.all(np.isfinite(w)):
            raise BlowUpError(f"non-finite values at t={t:.6g}", time=t, worst_mode=self.worst_mode(w))
        nmin = float(np.min(self._ifft(w[0]))) + self.params.n_bar
        if not nmin >= MIN_DENSITY_FRACTION * self.params.n_bar:
            raise BlowUpError(
                f"density collapsed (min n = {nmin:.3e}) at t={t:.6g}", time=t, worst_mode=self.worst_mode(w)
            )
        return nmin

    def worst_mode(self, w: np.ndarray):
        mag = np.abs(np.nan_to_num(w, nan=np.inf, posinf=np.inf, neginf=np.inf)).sum(axis=0)
        idx = np.unravel_index(int(np.argmax(mag)), mag.shape)
        return [int(np.broadcast_to(m, mag.shape)[idx]) for m in self.grid.wave_indices]

    def auto_dt(self, state: State) -> float:
        psi_max = float(np.max(models.sound_speed(state.n, self.params)))
        umax = float(np.max(np.sqrt(np.sum(state.u ** 2, axis=0))))
        return CFL_SAFETY * self.grid.dx / (umax + psi_max)


def resolve_steps(t_final: float, dt: float):
    """Number of steps and the adjusted step that lands exactly on ``t_final``."""
    steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    return steps, t_final / steps


def step(state: State, dt: float, config: RunConfig) -> State:
    """Advance ``state`` by one step of length ``dt`` on the integrated time axis."""
    st = Stepper(config.grid, config.params, config.system, config.linear_only)
    w = st.step(st.pack(state), dt)
    st.check(w, dt)
    return st.unpack(w)


# -- diagnostics ------------------------------------------------------------

def diagnostics_from_hat(stepper: Stepper, w: np.ndarray, state: State, t: float) -> dict:
    g, p = stepper.grid, stepper.params
    bank = filter_bank(g)
    spec = BesovSpec(g.sigma, 2.0, 1.0)

    def bn(fh):
        return besov_norm_from_blocks(block_l2_norms_hat(fh, bank), spec, bank)

    if stepper.kind == "euler_maxwell":
        u_h, e_h, f_h = w[1:4], w[4:7], w[7:10]
    else:
        u_h = to_spectral(g, state.u)
        e_h = to_spectral(g, state.e_field)
        f_h = np.zeros_like(e_h)
    gauss = p.lam ** 2 * div_hat(g, e_h) + w[0]
    return {
        "time": float(t),
        "besov_sigma_n": bn(w[0]),
        "besov_sigma_u": bn(u_h),
        "besov_sigma_E": bn(e_h),
        "besov_sigma_B": bn(f_h),
        "gauss_residual": float(np.max(np.abs(from_spectral(g, gauss)))),
        "divB_residual": float(np.max(np.abs(from_spectral(g, div_hat(g, f_h))))),
        "min_n": float(np.min(state.n)),
    }


def _system_state(config: RunConfig, state: State) -> State:
    if config.system in ("scaled_relax", "scaled_combined"):
        return models.scale_state(state, config.params.tau, "forward")
    return state


def _initial_for_config(config: RunConfig, seed: int) -> State:
    st = initial_state(config.grid, config.params, config.initial_data, seed=seed)
    if base_system(config.system) == "euler_poisson":
        # the Euler-Poisson state has no independent E/B
        st = State(st.n, st.u, models.gauss_field(config.grid, st.n, config.params), st.b_field)
    return st


def run(
    config: RunConfig,
    seed: int = 0,
    initial: Optional[State] = None,
    callback: Optional[Callable] = None,
    store_snapshots: bool = True,
) -> TimeSeries:
    """Integrate ``config`` to ``t_final`` and return the stored series.

    Times are reported on the system's own axis (scaled time for the
    O(1/tau)-scaled systems, whose velocities are reported as ``u/tau``).
    ``callback(t, stepper, w)`` is invoked after every step (and at t=0).
    """
    grid, params = config.grid, config.params
    stepper = Stepper(grid, params, config.system, config.linear_only)
    s = time_scale(config.system, params)
    state0 = initial if initial is not None else _initial_for_config(config, seed)
    if base_system(config.system) == "drift_diffusion":
        models.check_mean(grid, state0.n, params)
    w = stepper.pack(state0)
    t_int_final = config.t_final / s
    if config.dt == "auto":
        dt_int = stepper.auto_dt(stepper.unpack(w))
    else:
        dt_int = float(config.dt) / s
    steps, dt_int = resolve_steps(t_int_final, dt_int)
    series = TimeSeries(meta={
        "system": config.system,
        "steps": steps,
        "dt": dt_int * s,
        "dt_integrated": dt_int,
        "t_final": config.t_final,
    })

    def record(t_sys, w):
        phys = stepper.unpack(w)
        st = _system_state(config, phys)
        series.times.append(float(t_sys))
        if store_snapshots:
            series.snapshots.append(st)
        series.diagnostics.append(diagnostics_from_hat(stepper, w, st, t_sys))

    stepper.check(w, 0.0)
    record(0.0, w)
    if callback is not None:
        callback(0.0, stepper, w)
    log.debug("run %s: %d steps of dt=%.4g", config.system, steps, dt_int * s)
    for i in range(1, steps + 1):
        w = stepper.step(w, dt_int)
        t_sys = config.t_final if i == steps else s * i * dt_int
        try:
            stepper.check(w, t_sys)
        except BlowUpError as exc:
            exc.series = series
            raise
        if callback is not None:
            callback(t_sys, stepper, w)
        if i % config.output_stride == 0 or i == steps:
            record(t_sys, w)
    return series


def system_state(config: RunConfig, stepper: Stepper, w: np.ndarray) -> State:
    """State on the system's own variables for a packed ``w`` (used by callbacks)."""
    return _system_state(config, stepper.unpack(w))
