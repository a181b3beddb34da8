"""Model equations: pressure law, symmetrisation, Gauss solve, right-hand sides
and the linearised Fourier symbol.

All quadratic products are dealiased before they are differentiated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityError, ConfigError, DomainError
from .fields import (
    Grid,
    PhysicalParams,
    State,
    curl_hat,
    dealias_hat,
    div_hat,
    from_spectral,
    grad_hat,
    gradient_tensor_hat,
    to_spectral,
)

MEAN_TOLERANCE = 1e-10


@dataclass
class SymState:
    """Symmetrised variables ``W = (rho, u, E, F)`` with ``F = B - B_bar``."""

    rho_sym: np.ndarray
    u: np.ndarray
    e_field: np.ndarray
    f_field: np.ndarray

    def copy(self) -> "SymState":
        return SymState(self.rho_sym.copy(), self.u.copy(), self.e_field.copy(), self.f_field.copy())

    def components(self) -> tuple:
        return (self.rho_sym, self.u, self.e_field, self.f_field)


def _worst_point(mask: np.ndarray) -> tuple:
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(mask)), mask.shape))


def _require_positive_density(n: np.ndarray, name: str = "n"):
    n = np.asarray(n, dtype=float)
    bad = ~(n > 0.0)
    if np.any(bad):
        idx = _worst_point(bad)
        raise DomainError(f"{name} must be positive; {name}{list(idx)} = {n[idx]}")


# -- pressure law ---------------------------------------------------------

def pressure(n, params: PhysicalParams):
    _require_positive_density(n)
    return params.p0 * np.asarray(n, dtype=float) ** params.gamma


def pressure_derivative(n, params: PhysicalParams):
    return params.p0 * params.gamma * np.asarray(n, dtype=float) ** (params.gamma - 1.0)


def sound_speed(n, params: PhysicalParams):
    """``psi(n) = sqrt(P'(n))``."""
    _require_positive_density(n)
    return np.sqrt(pressure_derivative(n, params))


def enthalpy(n, params: PhysicalParams):
    """``H(n)`` with ``H' = P'/n`` so that ``grad P / n = grad H``."""
    n = np.asarray(n, dtype=float)
    if params.gamma == 1.0:
        return params.p0 * np.log(n)
    return params.p0 * params.gamma / (params.gamma - 1.0) * n ** (params.gamma - 1.0)


def enthalpy_remainder(n, params: PhysicalParams):
    """``H(n) - H(n_bar) - H'(n_bar)(n - n_bar)``: the nonlinear part of ``H``."""
    nb = params.n_bar
    dh = params.dp_bar / nb
    return enthalpy(n, params) - enthalpy(nb, params) - dh * (np.asarray(n, dtype=float) - nb)


def pressure_remainder(n, params: PhysicalParams):
    """``P(n) - P(n_bar) - P'(n_bar)(n - n_bar)``."""
    nb = params.n_bar
    return params.p0 * (np.asarray(n, dtype=float) ** params.gamma - nb ** params.gamma) - params.dp_bar * (
        np.asarray(n, dtype=float) - nb
    )


# -- symmetrisation -------------------------------------------------------

def symmetrize(n, params: PhysicalParams):
    """Density to the symmetrising variable ``rho``."""
    _require_positive_density(n)
    n = np.asarray(n, dtype=float)
    if params.gamma == 1.0:
        return math.sqrt(params.p0) * (np.log(n) - math.log(params.n_bar))
    return 2.0 / (params.gamma - 1.0) * (np.sqrt(pressure_derivative(n, params)) - params.psi_bar)


def _check_rho_domain(rho, params: PhysicalParams):
    if params.gamma == 1.0:
        return
    base = 0.5 * (params.gamma - 1.0) * np.asarray(rho, dtype=float) + params.psi_bar
    bad = ~(base > 0.0)
    if np.any(bad):
        idx = _worst_point(bad) if np.ndim(base) else ()
        raise DomainError(f"(gamma-1)/2*rho + psi_bar must be positive; violated at grid point {list(idx)}")


def h_of_rho(rho, params: PhysicalParams):
    """``h(rho) = n - n_bar`` expressed through ``rho``; ``h(0) = 0``."""
    rho = np.asarray(rho, dtype=float)
    if params.gamma == 1.0:
        return params.n_bar * np.expm1(rho / math.sqrt(params.p0))
    _check_rho_domain(rho, params)
    g = params.gamma
    base = (0.5 * (g - 1.0) * rho + params.psi_bar) / math.sqrt(params.p0 * g)
    return base ** (2.0 / (g - 1.0)) - params.n_bar


def desymmetrize(rho, params: PhysicalParams):
    return h_of_rho(rho, params) + params.n_bar


def to_symmetric(state: State, params: PhysicalParams) -> SymState:
    f = state.b_field - np.asarray(params.b_bar).reshape((3,) + (1,) * (state.n.ndim))
    return SymState(symmetrize(state.n, params), state.u.copy(), state.e_field.copy(), f)


def from_symmetric(w: SymState, params: PhysicalParams) -> State:
    b = w.f_field + np.asarray(params.b_bar).reshape((3,) + (1,) * (w.rho_sym.ndim))
    return State(desymmetrize(w.rho_sym, params), w.u.copy(), w.e_field.copy(), b)


# -- Gauss law ------------------------------------------------------------

def gauss_field_hat(grid: Grid, nh_tilde: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Curl-free ``E`` (spectral) with ``lambda^2 div E = -(n - n_bar)``; mean mode ignored."""
    k2 = grid.k2_derivative
    safe = np.where(k2 > 0.0, k2, 1.0)
    pot = np.where(k2 > 0.0, nh_tilde / (params.lam ** 2 * safe), 0.0)
    return np.stack([1j * k * pot for k in grid.derivative_wavenumbers])


def check_mean(grid: Grid, n: np.ndarray, params: PhysicalParams, tol: float = MEAN_TOLERANCE):
    mean = float(np.mean(n))
    if abs(mean - params.n_bar) > tol * max(1.0, params.n_bar):
        raise CompatibilityError(
            f"Gauss-law compatibility violated: mean(n0) = {mean!r} differs from n_bar = {params.n_bar!r} "
            "(lambda^2 div E0 = n_bar - n0 is solvable on the torus only when the means agree)"
        )


def gauss_field(grid: Grid, n: np.ndarray, params: PhysicalParams, check: bool = True) -> np.ndarray:
    """Unique curl-free, mean-zero ``E`` with ``lambda^2 div E = n_bar - n``."""
    n = np.asarray(n, dtype=float)
    if check:
        check_mean(grid, n, params)
    nh = to_spectral(grid, n - params.n_bar)
    return from_spectral(grid, gauss_field_hat(grid, nh, params))


def gauss_residual(grid: Grid, state: State, params: PhysicalParams) -> float:
    """``max |lambda^2 div E - (n_bar - n)|``."""
    div_e = from_spectral(grid, div_hat(grid, to_spectral(grid, state.e_field)))
    return float(np.max(np.abs(params.lam ** 2 * div_e - (params.n_bar - state.n))))


def div_residual(grid: Grid, v: np.ndarray) -> float:
    return float(np.max(np.abs(from_spectral(grid, div_hat(grid, to_spectral(grid, v))))))


# -- right-hand sides -----------------------------------------------------

def _dealiased_product(grid, a, b):
    """Real-space product, returned as its dealiased spectrum."""
    return dealias_hat(grid, to_spectral(grid, a * b))


def _advection_hat(grid, u, vh):
    """Dealiased spectrum of ``(u . grad) v`` for a vector ``v`` given spectrally."""
    gv = from_spectral(grid, gradient_tensor_hat(grid, vh))
    adv = np.einsum("j...,ij...->i...", u, gv)
    return dealias_hat(grid, to_spectral(grid, adv))


def _cross(a, b):
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _bvec(params, ndim):
    return np.asarray(params.b_bar, dtype=float).reshape((3,) + (1,) * ndim)


def rhs_euler_maxwell(grid: Grid, state: State, params: PhysicalParams) -> State:
    """Tendency of ``(n, u, E, B)`` with the momentum equation in velocity form."""
    _require_positive_density(state.n)
    n, u, e, b = state.n, state.u, state.e_field, state.b_field
    eps, lam, tau = params.eps, params.lam, params.tau
    nu_h = _dealiased_product(grid, n[None], u)
    dn = -from_spectral(grid, div_hat(grid, nu_h))
    uh = to_spectral(grid, u)
    adv = from_spectral(grid, _advection_hat(grid, u, uh))
    grad_h = from_spectral(grid, grad_hat(grid, dealias_hat(grid, to_spectral(grid, enthalpy(n, params)))))
    lorentz = from_spectral(grid, dealias_hat(grid, to_spectral(grid, _cross(u, b))))
    du = -adv - grad_h - e - eps * lorentz - u / tau
    curl_b = from_spectral(grid, curl_hat(grid, to_spectral(grid, b)))
    de = (curl_b + eps * from_spectral(grid, nu_h)) / (eps * lam ** 2)
    db = -from_spectral(grid, curl_hat(grid, to_spectral(grid, e))) / eps
    return State(dn, du, de, db)


def rhs_symmetrized(grid: Grid, w: SymState, params: PhysicalParams) -> SymState:
    """Tendency of ``W = (rho, u, E, F)`` for the symmetric hyperbolic form.

    The Maxwell source and curl terms carry ``1/lambda^2``; with ``lambda = 1``
    they reduce to the standard symmetrised system.
    """
    rho, u, e, f = w.rho_sym, w.u, w.e_field, w.f_field
    g, psib, eps, lam, tau = params.gamma, params.psi_bar, params.eps, params.lam, params.tau
    h = h_of_rho(rho, params)
    rh = to_spectral(grid, rho)
    uh = to_spectral(grid, u)
    div_u = from_spectral(grid, div_hat(grid, uh))
    grad_r = from_spectral(grid, grad_hat(grid, rh))
    u_grad_r = from_spectral(grid, dealias_hat(grid, to_spectral(grid, np.sum(u * grad_r, axis=0))))
    r_div_u = from_spectral(grid, _dealiased_product(grid, rho, div_u))
    drho = -psib * div_u - u_grad_r - 0.5 * (g - 1.0) * r_div_u
    adv = from_spectral(grid, _advection_hat(grid, u, uh))
    r_grad_r = from_spectral(grid, _dealiased_product(grid, rho[None], grad_r))
    b_total = f + _bvec(params, rho.ndim)
    lorentz = from_spectral(grid, dealias_hat(grid, to_spectral(grid, _cross(u, b_total))))
    du = -psib * grad_r - u / tau - adv - 0.5 * (g - 1.0) * r_grad_r - (e + eps * lorentz)
    curl_f = from_spectral(grid, curl_hat(grid, to_spectral(grid, f)))
    hu = from_spectral(grid, _dealiased_product(grid, h[None], u))
    de = (curl_f / eps + params.n_bar * u + hu) / lam ** 2
    df = -from_spectral(grid, curl_hat(grid, to_spectral(grid, e))) / eps
    return SymState(drho, du, de, df)


def rhs_euler_poisson(grid: Grid, n: np.ndarray, u: np.ndarray, params: PhysicalParams):
    """``(dn/dt, du/dt)`` with ``E`` eliminated through the Gauss law."""
    _require_positive_density(n)
    e = gauss_field(grid, n, params)
    nu_h = _dealiased_product(grid, n[None], u)
    dn = -from_spectral(grid, div_hat(grid, nu_h))
    uh = to_spectral(grid, u)
    adv = from_spectral(grid, _advection_hat(grid, u, uh))
    grad_h = from_spectral(grid, grad_hat(grid, dealias_hat(grid, to_spectral(grid, enthalpy(n, params)))))
    du = -adv - grad_h - e - u / params.tau
    return dn, du


def drift_diffusion_flux(grid: Grid, n: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """``grad P(N) + N E`` (dealiased), ``E`` from the Gauss law."""
    e = gauss_field(grid, n, params)
    grad_p = from_spectral(grid, grad_hat(grid, dealias_hat(grid, to_spectral(grid, pressure(n, params)))))
    ne = from_spectral(grid, _dealiased_product(grid, n[None], e))
    return grad_p + ne


def rhs_drift_diffusion(grid: Grid, n: np.ndarray, params: PhysicalParams) -> np.ndarray:
    _require_positive_density(n)
    flux = drift_diffusion_flux(grid, n, params)
    return from_spectral(grid, div_hat(grid, to_spectral(grid, flux)))


def darcy_velocity(grid: Grid, n: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Velocity candidate ``-(grad P(N) + N E)/N`` implied by the drift-diffusion flux."""
    return -drift_diffusion_flux(grid, n, params) / n[None]


# -- O(1/tau) scaling -------------------------------------------------------

def scale_state(state: State, tau: float, direction: str = "forward") -> State:
    """``u -> u/tau`` (forward) or ``u -> tau*u`` (inverse); other fields copied."""
    if not (0.0 < tau <= 1.0):
        raise ConfigError(f"tau must lie in (0, 1], got {tau}")
    if direction == "forward":
        u = state.u / tau
    elif direction == "inverse":
        u = state.u * tau
    else:
        raise ConfigError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return State(state.n.copy(), u, state.e_field.copy(), state.b_field.copy())


# -- linearised symbol ----------------------------------------------------

SYM_DIM = 10
SLICE_RHO = slice(0, 1)
SLICE_U = slice(1, 4)
SLICE_E = slice(4, 7)
SLICE_F = slice(7, 10)


def _pad3(k) -> np.ndarray:
    k = np.asarray(k, dtype=float).reshape(-1)
    if k.size > 3:
        raise ConfigError("wavevector has more than three components")
    return np.concatenate([k, np.zeros(3 - k.size)])


def cross_matrix(a) -> np.ndarray:
    """Matrix ``C`` with ``C @ v = a x v``."""
    a = _pad3(a)
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


def symbol_matrix(k, params: PhysicalParams) -> np.ndarray:
    """Linearised generator at ``W = 0`` for the mode ``exp(i k.x)``.

    Unknown ordering ``(rho, u_1..3, E_1..3, F_1..3)``; ``k`` is the physical
    wavevector (integer for the default ``2*pi`` box).
    """
    k = _pad3(k)
    psib, eps, lam, tau, nb = params.psi_bar, params.eps, params.lam, params.tau, params.n_bar
    m = np.zeros((SYM_DIM, SYM_DIM), dtype=complex)
    m[0, 1:4] = -1j * psib * k
    m[1:4, 0] = -1j * psib * k
    m[1:4, 1:4] = -np.eye(3) / tau + eps * cross_matrix(params.b_bar)  # -eps u x B_bar = eps B_bar x u
    m[1:4, 4:7] = -np.eye(3)
    m[4:7, 1:4] = nb / lam ** 2 * np.eye(3)
    m[4:7, 7:10] = 1j * cross_matrix(k) / (eps * lam ** 2)
    m[7:10, 4:7] = -1j * cross_matrix(k) / eps
    return m


def density_scaling(params: PhysicalParams) -> np.ndarray:
    """Diagonal ``S`` with ``W_sym = S W_phys`` at linear order (``rho ~ psi_bar/n_bar * n~``)."""
    s = np.ones(SYM_DIM)
    s[0] = params.psi_bar / params.n_bar
    return s


def physical_symbol_matrix(k, params: PhysicalParams) -> np.ndarray:
    """Generator for ``(n - n_bar, u, E, B - B_bar)``: ``S^-1 L S``."""
    s = density_scaling(params)
    return symbol_matrix(k, params) * s[None, :] / s[:, None]


def symbol_eigenvalues(k, params: PhysicalParams) -> np.ndarray:
    return np.linalg.eigvals(symbol_matrix(k, params))


def constrained_basis(k, params: PhysicalParams) -> np.ndarray:
    """Orthonormal basis of the subspace where the linearised constraints hold.

    Constraints (sym variables): ``i k.F = 0`` and ``lambda^2 i k.E + (n_bar/psi_bar) rho = 0``.
    At ``k = 0`` the Gauss constraint forces ``rho = 0`` and ``div F = 0`` is void.
    """
    k = _pad3(k)
    rows = []
    c = np.zeros(SYM_DIM, dtype=complex)
    c[0] = params.n_bar / params.psi_bar
    c[4:7] = 1j * params.lam ** 2 * k
    rows.append(c)
    if np.any(k != 0.0):
        d = np.zeros(SYM_DIM, dtype=complex)
        d[7:10] = 1j * k
        rows.append(d)
    a = np.array(rows)
    _, sv, vh = np.linalg.svd(a)
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv.max())))
    return vh[rank:].conj().T


def kawashima_K(xi) -> np.ndarray:
    """Skew-symmetric compensator ``[[0, xi^T/|xi|], [-xi/|xi|, 0]]`` of size ``1+N``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(xi))
    if norm == 0.0:
        raise ConfigError("compensator undefined at xi = 0")
    n = xi.size
    K = np.zeros((n + 1, n + 1))
    K[0, 1:] = xi / norm
    K[1:, 0] = -xi / norm
    return K


def euler_flux_matrices(params: PhysicalParams, n_dim: int) -> list:
    """``A_j(0) = [[0, psi_bar e_j^T], [psi_bar e_j, 0]]`` for the symmetrised Euler part."""
    out = []
    for j in range(n_dim):
        a = np.zeros((n_dim + 1, n_dim + 1))
        a[0, 1 + j] = params.psi_bar
        a[1 + j, 0] = params.psi_bar
        out.append(a)
    return out


def kawashima_identity_residual(xi, params: PhysicalParams) -> float:
    """Frobenius norm of ``K(xi) sum_j xi_j A_j(0) - diag(psi_bar|xi|, -psi_bar xi xi^T/|xi|)``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(xi))
    K = kawashima_K(xi)
    a = sum(x * aj for x, aj in zip(xi, euler_flux_matrices(params, xi.size)))
    target = np.zeros_like(K)
    target[0, 0] = params.psi_bar * norm
    target[1:, 1:] = -params.psi_bar * np.outer(xi, xi) / norm
    return float(np.linalg.norm(K @ a - target))
