"""Numerical experiments: energy functional, singular-limit sweeps, dispersion
fits, constraint monitoring and long-time decay trends.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.optimize

from . import models
from .errors import BlowUpError, ConfigError, InputError
from .fields import Grid, PhysicalParams, State, gradient_tensor_hat, to_spectral
from .integrators import (
    RunConfig,
    Stepper,
    TimeSeries,
    base_system,
    filter_bank,
    initial_state,
    run,
    time_scale,
)
from .littlewood_paley import (
    BesovSpec,
    CheminLernerSpec,
    besov_norm,
    besov_norm_from_blocks,
    block_l2_norms_hat,
    chemin_lerner_from_blocks,
)

log = logging.getLogger(__name__)

LIMIT_KINDS = ("nonrelativistic", "relaxation", "combined")
LIMIT_COLUMNS = ("param", "err_n", "err_u", "err_gradB", "err_weightedE")


def _trapz(y, x):
    return float(np.trapezoid(y, x)) if hasattr(np, "trapezoid") else float(np.trapz(y, x))


def fit_order(params: Sequence[float], errors: Sequence[float], last: int = 3) -> float:
    """Least-squares slope of ``log(error)`` against ``log(param)`` over the last rungs."""
    p = np.asarray(params, dtype=float)[-last:]
    e = np.asarray(errors, dtype=float)[-last:]
    if p.size < 2 or np.any(e <= 0.0) or not np.all(np.isfinite(e)):
        return float("nan")
    slope, _ = np.polyfit(np.log(p), np.log(e), 1)
    return float(slope)


def monotone_above_floor(errors: Sequence[float], floor: float) -> bool:
    """Errors decrease rung to rung, except where both rungs sit at or below ``floor``."""
    e = list(errors)
    return all(b < a or (a <= floor and b <= floor) for a, b in zip(e, e[1:]))


# -- energy functional --------------------------------------------------------

@dataclass
class EnergyReport:
    """Terms of the uniform energy functional.

    ``sup`` and ``dissipation`` treat ``W`` (and the weighted tuple) as one
    vector per dyadic block; the per-field dissipation terms are reported for
    inspection only.
    """

    sup: float
    dissipation: float
    dissipation_gradf: float
    rhs: float
    ratio: float
    dissipation_rho: float = 0.0
    dissipation_u: float = 0.0
    dissipation_e: float = 0.0
    mu: float = 1.0
    t_final: float = 0.0
    degenerate: bool = False

    @property
    def lhs(self) -> float:
        return self.sup + self.mu * (self.dissipation + self.dissipation_gradf)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lhs"] = self.lhs
        return d


class EnergyAccumulator:
    """Collects per-block norms of ``W = (rho, u, E, F)`` and ``grad F`` over time."""

    def __init__(self, grid: Grid, params: PhysicalParams):
        self.grid = grid
        self.params = params
        self.bank = filter_bank(grid)
        self.times = []
        self.blocks = {"rho": [], "u": [], "e": [], "f": [], "gradf": []}

    def add_hat(self, t: float, rho_h, u_h, e_h, f_h):
        bank = self.bank
        self.times.append(float(t))
        self.blocks["rho"].append(block_l2_norms_hat(rho_h, bank))
        self.blocks["u"].append(block_l2_norms_hat(u_h, bank))
        self.blocks["e"].append(block_l2_norms_hat(e_h, bank))
        self.blocks["f"].append(block_l2_norms_hat(f_h, bank))
        gf = gradient_tensor_hat(self.grid, f_h)
        self.blocks["gradf"].append(block_l2_norms_hat(gf.reshape((9,) + gf.shape[2:]), bank))

    def add(self, t: float, w: models.SymState):
        g = self.grid
        self.add_hat(t, to_spectral(g, w.rho_sym), to_spectral(g, w.u), to_spectral(g, w.e_field), to_spectral(g, w.f_field))

    def add_state(self, t: float, state: State):
        self.add(t, models.to_symmetric(state, self.params))

    def report(self, mu: float = 1.0, rhs: Optional[float] = None) -> EnergyReport:
        if not self.times:
            raise InputError("energy report needs a nonempty series")
        p, g, bank = self.params, self.grid, self.bank
        sigma = g.sigma
        times = np.array(self.times)
        b = {k: np.array(v) for k, v in self.blocks.items()}
        inf = CheminLernerSpec(math.inf, BesovSpec(sigma, 2.0, 1.0))
        # block energy of the whole vector: ||Delta_q W||^2 = sum over fields
        joint = np.sqrt(b["rho"] ** 2 + b["u"] ** 2 + b["e"] ** 2 + b["f"] ** 2)
        sup = chemin_lerner_from_blocks(times, joint, inf, bank)
        if rhs is None:
            rhs = besov_norm_from_blocks(joint[0], inf.besov, bank)
        if times.size >= 2:
            two = CheminLernerSpec(2.0, BesovSpec(sigma, 2.0, 1.0))
            two_m1 = CheminLernerSpec(2.0, BesovSpec(sigma - 1.0, 2.0, 1.0))
            w_rho, w_u, w_e = math.sqrt(p.tau), 1.0 / math.sqrt(p.tau), math.sqrt(p.tau * p.eps)
            weighted = np.sqrt((w_rho * b["rho"]) ** 2 + (w_u * b["u"]) ** 2 + (w_e * b["e"]) ** 2)
            d_all = chemin_lerner_from_blocks(times, weighted, two, bank)
            d_rho = w_rho * chemin_lerner_from_blocks(times, b["rho"], two, bank)
            d_u = w_u * chemin_lerner_from_blocks(times, b["u"], two, bank)
            d_e = w_e * chemin_lerner_from_blocks(times, b["e"], two, bank)
            d_f = chemin_lerner_from_blocks(times, b["gradf"], two_m1, bank) / math.sqrt(p.eps)
        else:
            d_all = d_rho = d_u = d_e = d_f = 0.0
        lhs = sup + mu * (d_all + d_f)
        degenerate = rhs == 0.0
        ratio = 0.0 if degenerate else lhs / rhs
        return EnergyReport(
            sup=sup,
            dissipation=d_all,
            dissipation_gradf=d_f,
            rhs=float(rhs),
            ratio=float(ratio),
            dissipation_rho=d_rho,
            dissipation_u=d_u,
            dissipation_e=d_e,
            mu=mu,
            t_final=float(times[-1] - times[0]),
            degenerate=degenerate,
        )


def energy_report(series, grid: Grid, params: PhysicalParams, mu: float = 1.0) -> EnergyReport:
    """Energy functional of a stored series.

    ``series`` is a :class:`TimeSeries` of physical states or a pair
    ``(times, samples)`` whose samples are :class:`SymState` objects.
    """
    acc = EnergyAccumulator(grid, params)
    if isinstance(series, TimeSeries):
        if not series.snapshots:
            raise InputError("energy report needs a nonempty series")
        for t, st in zip(series.times, series.snapshots):
            acc.add_state(t, st)
    else:
        times, samples = series
        if len(samples) == 0:
            raise InputError("energy report needs a nonempty series")
        for t, w in zip(times, samples):
            acc.add(t, w) if isinstance(w, models.SymState) else acc.add_state(t, w)
    return acc.report(mu)


def energy_run(config: RunConfig, seed: int = 0, mu: float = 1.0) -> EnergyReport:
    """Integrate ``config`` (Euler-Maxwell) and evaluate the energy functional at every step."""
    if base_system(config.system) != "euler_maxwell" or time_scale(config.system, config.params) != 1.0:
        raise ConfigError("energy_run expects an unscaled Euler-Maxwell configuration")
    g, p = config.grid, config.params
    acc = EnergyAccumulator(g, p)

    def cb(t, stepper, w):
        nt = stepper._ifft(w[0])
        rho_h = to_spectral(g, models.symmetrize(nt + p.n_bar, p))
        acc.add_hat(t, rho_h, w[1:4], w[4:7], w[7:10])

    run(config, seed=seed, callback=cb, store_snapshots=False)
    return acc.report(mu)


# -- constraints ----------------------------------------------------------------

def constraint_monitor(series: TimeSeries) -> dict:
    if not series.diagnostics:
        raise InputError("constraint monitor needs a nonempty series")
    gauss = series.diagnostic("gauss_residual")
    divb = series.diagnostic("divB_residual")
    return {
        "max_gauss": float(gauss.max()),
        "max_divB": float(divb.max()),
        "initial_gauss": float(gauss[0]),
        "initial_divB": float(divb[0]),
        "drift_gauss": float(np.max(np.abs(gauss - gauss[0]))),
        "drift_divB": float(np.max(np.abs(divb - divb[0]))),
        "drift": float(max(np.max(np.abs(gauss - gauss[0])), np.max(np.abs(divb - divb[0])))),
    }


# -- dispersion -----------------------------------------------------------------

def physical_constrained_basis(k, params: PhysicalParams) -> np.ndarray:
    """Orthonormal basis (columns) of the linearised constraint subspace in
    ``(n - n_bar, u, E, B - B_bar)``: ``n~ + lambda^2 i k.E = 0`` and ``i k.B = 0``."""
    k = models._pad3(k)
    rows = []
    c = np.zeros(models.SYM_DIM, dtype=complex)
    c[0] = 1.0
    c[4:7] = 1j * params.lam ** 2 * k
    rows.append(c)
    if np.any(k != 0.0):
        d = np.zeros(models.SYM_DIM, dtype=complex)
        d[7:10] = 1j * k
        rows.append(d)
    _, sv, vh = np.linalg.svd(np.array(rows))
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max())))
    return vh[rank:].conj().T


def _mode_slot(grid: Grid, k):
    """Stored index for integer mode ``k`` (normalised so the stored entry is ``k``)."""
    k = [int(v) for v in k][: grid.dim]
    if k[-1] < 0 or (k[-1] == 0 and any(v != 0 for v in k) and next(v for v in k if v != 0) < 0):
        k = [-v for v in k]
    idx, _ = grid.mode_index(k)
    partner = None
    last = idx[-1]
    if last == 0 or last == grid.points[-1] // 2:
        pidx, _ = grid.mode_index([-v for v in k[:-1]] + [k[-1]])
        if pidx != idx:
            partner = pidx
    kphys = [2.0 * math.pi / L * v for v, L in zip(k, grid.lengths)]
    return tuple(k), idx, partner, kphys


def _set_mode(w, idx, partner, v):
    w[(slice(None),) + idx] = v
    if partner is not None:
        w[(slice(None),) + partner] = np.conj(v)


def _match(measured: np.ndarray, reference: np.ndarray):
    cost = np.abs(measured[:, None] - reference[None, :])
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    order = np.empty(reference.size, dtype=int)
    order[cols] = rows
    return measured[order]


def _rel_errors(measured, reference):
    scale = np.abs(reference)
    diff = np.abs(measured - reference)
    return np.where(scale < 1e-12, diff, diff / np.where(scale < 1e-12, 1.0, scale))


def dispersion_test(
    params: PhysicalParams,
    mode_list: Sequence,
    grid: Optional[Grid] = None,
    amplitude: float = 1e-7,
    n_samples: int = 8,
    n_traj: int = 3,
    sample_interval: Optional[float] = None,
    seed: int = 0,
) -> list:
    """Fit linear rates from integrator trajectories and compare with the symbol.

    For each mode, ``n_traj`` random constrained initial vectors are evolved by
    the full (nonlinear) Euler-Maxwell stepper; the coefficient of the mode is
    sampled, projected onto the constrained subspace, and a one-step
    propagator is fitted by least squares across all trajectories. Its
    eigenvalue logarithms are matched to the symbol eigenvalues.
    """
    if amplitude > 1e-6:
        raise ConfigError("dispersion amplitudes must be <= 1e-6 to stay in the linear regime")
    if grid is None:
        dim = max(2, min(3, len(mode_list[0]) if len(mode_list) else 2))
        grid = Grid(dim, 32)
    stepper = Stepper(grid, params, "euler_maxwell")
    rng = np.random.default_rng(seed)
    out = []
    for k in mode_list:
        kint, idx, partner, kphys = _mode_slot(grid, k)
        if not grid.dealias_mask[idx]:
            raise ConfigError(f"mode {list(kint)} lies outside the dealiased band")
        q = physical_constrained_basis(kphys, params)
        lq = q.conj().T @ models.physical_symbol_matrix(kphys, params) @ q
        lam_sym = np.linalg.eigvals(lq)
        dts = sample_interval or min(0.1, 1.0 / max(1.0, float(np.max(np.abs(lam_sym)))))
        m = max(1, int(math.ceil(dts / stepper.auto_dt(stepper.unpack(np.zeros((10,) + grid.spectral_shape, complex))) - 1e-9)))
        dt = dts / m
        real_mode = all(v == 0 for v in kint)
        xs, ys = [], []
        for _ in range(n_traj):
            c = rng.standard_normal(q.shape[1]) + (0.0 if real_mode else 1j * rng.standard_normal(q.shape[1]))
            v = q @ c
            v = amplitude * v / np.max(np.abs(v))
            if real_mode:
                v = v.real
            w = np.zeros((10,) + grid.spectral_shape, dtype=complex)
            _set_mode(w, idx, partner, v)
            z = [q.conj().T @ w[(slice(None),) + idx]]
            for _s in range(n_samples - 1):
                for _i in range(m):
                    w = stepper.step(w, dt)
                z.append(q.conj().T @ w[(slice(None),) + idx])
            z = np.array(z).T
            xs.append(z[:, :-1])
            ys.append(z[:, 1:])
        x = np.concatenate(xs, axis=1)
        y = np.concatenate(ys, axis=1)
        sv = np.linalg.svd(x, compute_uv=False)
        rank_deficient = bool(sv[-1] <= 1e-10 * sv[0])
        prop = y @ np.linalg.pinv(x)
        mu = np.linalg.eigvals(prop)
        rates = np.log(mu.astype(complex)) / dts
        rates = _match(rates, lam_sym)
        rel = _rel_errors(rates, lam_sym)
        requested = [int(v) for v in k][: grid.dim]
        if requested != list(kint):
            # the stored mode is -k; rates at k are the complex conjugates
            rates, lam_sym = np.conj(rates), np.conj(lam_sym)
        out.append({
            "k": requested,
            "sample_interval": dts,
            "measured_rates": [[float(r.real), float(r.imag)] for r in rates],
            "symbol_eigenvalues": [[float(r.real), float(r.imag)] for r in lam_sym],
            "rel_errors": [float(e) for e in rel],
            "max_rel_err": float(np.max(rel)),
            "degenerate_fit": rank_deficient,
        })
    return out


def slowest_constrained_mode(k, params: PhysicalParams):
    """Eigenvalue with the largest real part on the constrained subspace and its
    eigenvector in physical variables."""
    q = physical_constrained_basis(k, params)
    lq = q.conj().T @ models.physical_symbol_matrix(k, params) @ q
    vals, vecs = np.linalg.eig(lq)
    i = int(np.argmax(vals.real))
    return complex(vals[i]), q @ vecs[:, i]


def single_mode_state(grid: Grid, params: PhysicalParams, k, vector: np.ndarray, amplitude: float) -> State:
    """Physical state whose perturbation is ``vector`` placed at the integer mode ``k``."""
    kint, idx, partner, _ = _mode_slot(grid, k)
    w = np.zeros((10,) + grid.spectral_shape, dtype=complex)
    v = amplitude * np.asarray(vector) / np.max(np.abs(vector))
    _set_mode(w, idx, partner, v)
    return Stepper(grid, params, "euler_maxwell").unpack(w)


# -- decay ------------------------------------------------------------------------

def decay_trend(series: TimeSeries, grid: Grid, params: PhysicalParams, delta: float = 0.5, threshold: float = 0.1) -> dict:
    """``B^{sigma-delta}_{2,1}`` norm of ``(n - n_bar, u, E)`` over the series and a
    least-squares exponential rate over its second half."""
    if not series.snapshots:
        raise InputError("decay trend needs stored snapshots")
    bank = filter_bank(grid)
    spec = BesovSpec(grid.sigma - delta, 2.0, 1.0)
    times = np.array(series.times)
    norms = np.array([besov_norm((s.n - params.n_bar, s.u, s.e_field), spec, bank) for s in series.snapshots])
    half = times >= 0.5 * times[-1]
    good = half & (norms > 0.0)
    if np.count_nonzero(good) >= 2:
        rate = float(np.polyfit(times[good], np.log(norms[good]), 1)[0])
    else:
        rate = float("nan")
    initial, final = float(norms[0]), float(norms[-1])
    ratio = 0.0 if initial == 0.0 else final / initial
    return {
        "times": times.tolist(),
        "norms": norms.tolist(),
        "initial": initial,
        "final": final,
        "ratio": ratio,
        "fitted_rate": rate,
        "delta": delta,
        "passed": bool(ratio <= threshold),
    }


# -- singular limits -------------------------------------------------------------

@dataclass
class LimitKind:
    variant: str
    ladder: list

    def __post_init__(self):
        if self.variant not in LIMIT_KINDS:
            raise ConfigError(f"limit kind must be one of {list(LIMIT_KINDS)}, got {self.variant!r}")
        lad = [float(v) for v in self.ladder]
        if len(lad) < 1 or any(not (0.0 < v <= 1.0) for v in lad):
            raise ConfigError("ladder values must lie in (0, 1]")
        if any(b >= a for a, b in zip(lad, lad[1:])):
            raise ConfigError("ladder must be strictly decreasing")
        self.ladder = lad


@dataclass
class LimitReport:
    kind: str
    records: list = field(default_factory=list)
    orders: dict = field(default_factory=dict)
    floor: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    monotone: dict = field(default_factory=dict)

    def column(self, name: str) -> list:
        return [r[name] for r in self.records]

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_rows(self) -> list:
        rows = [[r[c] for c in LIMIT_COLUMNS] for r in self.records]
        rows.append(["order"] + [self.orders.get(c, float("nan")) for c in LIMIT_COLUMNS[1:]])
        return rows


def _rung_config(kind: str, base: RunConfig, value: float) -> RunConfig:
    p = base.params
    if kind == "nonrelativistic":
        return base.replace(params=p.replace(eps=value, tau=1.0, lam=1.0), system="scaled_nonrel")
    if kind == "relaxation":
        return base.replace(params=p.replace(tau=value, eps=1.0, lam=1.0), system="scaled_relax")
    return base.replace(params=p.replace(tau=value, eps=value, lam=1.0), system="scaled_combined")


def _reference_config(kind: str, base: RunConfig) -> RunConfig:
    p = base.params.replace(lam=1.0, tau=1.0, eps=1.0)
    system = "euler_poisson" if kind == "nonrelativistic" else "drift_diffusion"
    return base.replace(params=p, system=system)


def _sampled_integration(stepper: Stepper, w0, t_final: float, scale: float, dt_int_max: float, n_samples: int, dense=None):
    """Integrate to ``t_final`` (system time) hitting ``n_samples`` equal intervals."""
    interval = t_final / scale / n_samples
    m = max(1, int(math.ceil(interval / dt_int_max - 1e-9)))
    dt = interval / m
    w = w0
    samples = [w0]
    if dense is not None:
        dense(0.0, w0)
    count = 0
    for _ in range(n_samples):
        for _ in range(m):
            w = stepper.step(w, dt)
            count += 1
            t = scale * count * dt
            stepper.check(w, t)
            if dense is not None:
                dense(t, w)
        samples.append(w)
    return samples, dt * scale


def limit_sweep(
    kind: LimitKind, base: RunConfig, seed: int = 0, n_samples: int = 20, delta: float = 0.5, workers: int = 1
) -> LimitReport:
    """Run every rung of the ladder and the matching limit solver; tabulate the errors."""
    grid = base.grid
    bank = filter_bank(grid)
    sigma = grid.sigma
    spec_lo = BesovSpec(sigma - delta, 2.0, 1.0)
    spec_hi = BesovSpec(sigma, 2.0, 1.0)
    spec_m1 = BesovSpec(sigma - 1.0, 2.0, 1.0)
    base_params = base.params.replace(lam=1.0)
    state0 = initial_state(grid, base_params, base.initial_data, seed=seed)
    T = base.t_final

    def bnorm(fh, spec):
        return besov_norm_from_blocks(block_l2_norms_hat(fh, bank), spec, bank)

    def run_rung(value):
        cfg = _rung_config(kind.variant, base, value)
        st = Stepper(grid, cfg.params, cfg.system)
        s = time_scale(cfg.system, cfg.params)
        w0 = st.pack(state0)
        dt_max = st.auto_dt(state0) if cfg.dt == "auto" else float(cfg.dt) / s
        weight = {"nonrelativistic": math.sqrt(value), "relaxation": math.sqrt(value), "combined": value}[kind.variant]
        dense = {"t": [], "gradb": [], "wE": []}

        def cb(t, w):
            gf = gradient_tensor_hat(grid, w[7:10])
            dense["t"].append(t)
            dense["gradb"].append(bnorm(gf.reshape((9,) + gf.shape[2:]), spec_m1))
            dense["wE"].append(weight * bnorm(w[4:7], spec_hi))

        try:
            samples, dt_sys = _sampled_integration(st, w0, T, s, dt_max, n_samples, cb)
        except BlowUpError as exc:
            raise BlowUpError(f"rung {value}: {exc}", time=exc.time, worst_mode=exc.worst_mode) from exc
        return dt_sys, (value, cfg, st, s, samples, dense)

    # rungs are independent; results are collected in ladder order
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_rung, kind.ladder))
    else:
        results = [run_rung(v) for v in kind.ladder]
    dts = [r[0] for r in results]
    rungs = [r[1] for r in results]

    ref_cfg = _reference_config(kind.variant, base)
    ref_st = Stepper(grid, ref_cfg.params, ref_cfg.system)
    dt_ref = min(dts + ([float(base.dt)] if base.dt != "auto" else []))
    try:
        ref, _ = _sampled_integration(ref_st, ref_st.pack(state0), T, 1.0, dt_ref, n_samples)
        ref_fine, _ = _sampled_integration(ref_st, ref_st.pack(state0), T, 1.0, dt_ref / 2.0, n_samples)
    except BlowUpError as exc:
        raise BlowUpError(f"reference solver failed: {exc}", time=exc.time, worst_mode=exc.worst_mode) from exc

    def ref_u(w):
        if ref_st.kind == "euler_poisson":
            return w[1:4]
        return to_spectral(grid, ref_st.unpack(w).u)

    floor_n = max(bnorm(a[0] - b[0], spec_lo) for a, b in zip(ref, ref_fine))
    floor_u = max(bnorm(ref_u(a) - ref_u(b), spec_lo) for a, b in zip(ref, ref_fine)) if ref_st.kind == "euler_poisson" else floor_n
    report = LimitReport(kind=kind.variant)
    report.floor = {"err_n": floor_n, "err_u": floor_u, "dt_reference": dt_ref}
    report.reference = {"system": ref_cfg.system, "dt": dt_ref, "t_final": T, "n_samples": n_samples, "delta": delta}
    for value, cfg, st, s, samples, dense in rungs:
        err_n_t = [bnorm(a[0] - b[0], spec_lo) for a, b in zip(samples, ref)]
        if kind.variant == "nonrelativistic":
            err_u_t = [bnorm(a[1:4] - ref_u(b), spec_lo) for a, b in zip(samples, ref)]
            darcy = None
        else:
            # tau^2 u^tau with u^tau = u/tau on the scaled axis
            err_u_t = [bnorm(value * a[1:4], spec_lo) for a in samples]
            darcy_t = [bnorm(a[1:4] / value - ref_u(b), spec_lo) for a, b in zip(samples, ref)]
            darcy = {"sup": float(max(darcy_t)), "final": float(darcy_t[-1])}
        t_dense = np.array(dense["t"])
        gradb = math.sqrt(_trapz(np.square(dense["gradb"]), t_dense))
        weighted_e = math.sqrt(_trapz(np.square(dense["wE"]), t_dense))
        rec = {
            "param": value,
            "system": cfg.system,
            "err_n": float(max(err_n_t)),
            "err_n_final": float(err_n_t[-1]),
            "err_u": float(max(err_u_t)),
            "err_gradB": float(gradb),
            "err_weightedE": float(weighted_e),
            "err_weightedE_sup": float(max(dense["wE"])),
            "dt": float(dense["t"][1] - dense["t"][0]) if len(dense["t"]) > 1 else 0.0,
            "darcy": darcy,
        }
        report.records.append(rec)
    ladder = kind.ladder
    for col in LIMIT_COLUMNS[1:] + ("err_n_final",):
        report.orders[col] = fit_order(ladder, report.column(col))
    report.monotone = {
        "err_n": monotone_above_floor(report.column("err_n"), floor_n),
        "err_n_final": monotone_above_floor(report.column("err_n_final"), floor_n),
        "err_nu": monotone_above_floor([a + b for a, b in zip(report.column("err_n"), report.column("err_u"))], floor_n + floor_u),
        "err_weightedE": monotone_above_floor(report.column("err_weightedE"), 0.0),
        "err_gradB": monotone_above_floor(report.column("err_gradB"), 0.0),
    }
    return report
