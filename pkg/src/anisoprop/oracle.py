"""Independent reference computations used by the tests and the calibration runs.

Nothing here reuses the closed-form coefficient functions: the eigensolver and
the Crank-Nicolson stepper work from a finite-difference Hamiltonian, the 1D
kernels are written out directly, and the action oracle integrates the
Lagrangian along the numerically solved path.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.integrate import quad

from .action import first_caustic
from .classical import Endpoints, solve_modes, trajectory
from .errors import CalibrationError, CausticError, ConvergenceError
from .evolve import Grid2D, WaveField
from .model import OscillatorConfig, derive
from .propagator import Gauge, apply_kernel, kernel_values
from .spectrum import ALLOWED_KAPPAS, energy_as_printed, levels_sorted

STENCIL_ORDER = 8
MAX_EIGEN_ITERATIONS = 10_000


def central_stencils(order: int):
    """Offsets and central-difference weights for d/dx and d^2/dx^2 (unit spacing)."""
    if order < 2 or order % 2:
        raise ValueError("stencil order must be a positive even integer")
    half = order // 2
    offsets = np.arange(-half, half + 1)
    vander = np.vander(offsets, increasing=True).T.astype(float)
    rhs1 = np.zeros(offsets.size)
    rhs1[1] = 1.0
    rhs2 = np.zeros(offsets.size)
    rhs2[2] = 2.0
    d1 = np.linalg.solve(vander, rhs1)
    d2 = np.linalg.solve(vander, rhs2)
    # exact (anti)symmetry, so the assembled operator is exactly Hermitian
    d1 = 0.5 * (d1 - d1[::-1])
    d2 = 0.5 * (d2 + d2[::-1])
    return offsets, d1, d2


def _difference_matrices(n, h, order):
    offsets, d1, d2 = central_stencils(order)
    diag1 = {int(o): np.full(n - abs(o), w / h) for o, w in zip(offsets, d1) if o != 0}
    diag2 = {int(o): np.full(n - abs(o), w / h**2) for o, w in zip(offsets, d2)}
    D1 = sp.diags(list(diag1.values()), list(diag1.keys()), format="csr")
    D2 = sp.diags(list(diag2.values()), list(diag2.keys()), format="csr")
    return D1, D2


@dataclass(frozen=True)
class SparseHamiltonian:
    matrix: sp.csr_matrix
    grid: Grid2D
    gauge: Gauge
    order: int

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0


def build_hamiltonian(config: OscillatorConfig, grid: Grid2D, gauge: Gauge = Gauge.SYMMETRIC, order: int = STENCIL_ORDER) -> SparseHamiltonian:
    """Finite-difference H on ``grid`` (Dirichlet edges), flattened with y fastest.

    With A = B0 (-alpha y, beta x), alpha + beta = 1:
    H = p^2/2m + (m/2)(w1^2 + beta^2 w0^2) x^2 + (m/2)(w2^2 + alpha^2 w0^2) y^2
        + w0 (alpha y p_x - beta x p_y).
    """
    m, hbar, w0 = config.m, config.hbar, config.omega0
    alpha, beta = _gauge_weights(config, gauge)
    x, y = grid.x, grid.y
    D1x, D2x = _difference_matrices(grid.nx, grid.dx, order)
    D1y, D2y = _difference_matrices(grid.ny, grid.dy, order)
    Ix, Iy = sp.identity(grid.nx, format="csr"), sp.identity(grid.ny, format="csr")
    Xd, Yd = sp.diags(x), sp.diags(y)
    kinetic = -(hbar**2) / (2 * m) * (sp.kron(D2x, Iy) + sp.kron(Ix, D2y))
    pot = 0.5 * m * (
        (config.omega1**2 + beta**2 * w0**2) * x[:, None] ** 2
        + (config.omega2**2 + alpha**2 * w0**2) * y[None, :] ** 2
    )
    # p = -i hbar d; y commutes with d/dx and x with d/dy
    magnetic = -1j * hbar * w0 * (alpha * sp.kron(D1x, Yd) - beta * sp.kron(Xd, D1y))
    H = (kinetic + sp.diags(pot.ravel()) + magnetic).tocsr()
    # entries are Hermitian up to summation order; average to make it exact
    H = ((H + H.conj().T) * 0.5).tocsr()
    H.sum_duplicates()
    return SparseHamiltonian(H, grid, gauge, order)


def _gauge_weights(config: OscillatorConfig, gauge: Gauge):
    if gauge is Gauge.SYMMETRIC:
        return 0.5, 0.5
    s = config.omega1 + config.omega2
    return config.omega2 / s, config.omega1 / s


def schrodinger_residual(config: OscillatorConfig, t, x1, y1, x2, y2, gauge: Gauge = Gauge.SYMMETRIC, h: float = 1e-3, tau: float = 1e-5):
    """Pointwise ``(i hbar dG/dt, H G)`` with H acting on the field point (x2, y2).

    Both sides use centred differences: step ``tau`` in time, ``h`` in space.
    Returned separately so callers can form whichever norm they need.
    """
    m, hbar, w0 = config.m, config.hbar, config.omega0
    alpha, beta = _gauge_weights(config, gauge)

    def G(dt=0.0, dx=0.0, dy=0.0):
        return kernel_values(config, t + dt, x1, y1, x2 + dx, y2 + dy, gauge)

    g0 = G()
    dGdt = (G(dt=tau) - G(dt=-tau)) / (2 * tau)
    gxp, gxm, gyp, gym = G(dx=h), G(dx=-h), G(dy=h), G(dy=-h)
    lap = (gxp + gxm + gyp + gym - 4 * g0) / h**2
    gx = (gxp - gxm) / (2 * h)
    gy = (gyp - gym) / (2 * h)
    pot = 0.5 * m * (
        (config.omega1**2 + beta**2 * w0**2) * x2**2 + (config.omega2**2 + alpha**2 * w0**2) * y2**2
    )
    HG = -(hbar**2) / (2 * m) * lap + pot * g0 - 1j * hbar * w0 * (alpha * y2 * gx - beta * x2 * gy)
    return 1j * hbar * dGdt, HG


def default_eigen_grid(config: OscillatorConfig, n: int = 128, lengths: float = 8.0) -> Grid2D:
    """n x n grid spanning +-``lengths`` oscillator lengths sqrt(hbar / m Omega1)."""
    ell = math.sqrt(config.hbar / (config.m * derive(config).Omega1))
    return Grid2D.square(n, lengths * ell)


def eigensolve(config: OscillatorConfig, grid: Grid2D | None = None, k: int = 6, gauge: Gauge = Gauge.SYMMETRIC, order: int = STENCIL_ORDER) -> np.ndarray:
    """The ``k`` lowest eigenvalues of the discretised Hamiltonian (shift-invert Lanczos)."""
    grid = grid or default_eigen_grid(config)
    H = build_hamiltonian(config, grid, gauge, order).matrix
    try:
        vals, vecs = sla.eigsh(H, k=k, sigma=0.0, which="LM", maxiter=MAX_EIGEN_ITERATIONS, tol=1e-12)
    except sla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
    order_idx = np.argsort(vals.real)
    vals, vecs = vals.real[order_idx], vecs[:, order_idx]
    res = np.linalg.norm(H @ vecs - vecs * vals, axis=0) / np.linalg.norm(vecs, axis=0)
    if np.any(res > 1e-8 * np.maximum(1.0, np.abs(vals))):
        raise ConvergenceError(f"eigenpair residuals too large: {res}")
    return vals


def calibrate_spectrum(configs, levels: int = 6, grid_points: int = 128) -> dict:
    """Pick the energy prefactor that reproduces the finite-difference spectrum.

    Returns a report with the chosen ``kappa``, the max relative error of each
    candidate per config, per-level errors, and the as-printed formula's error.
    """
    per_config = []
    worst = {kappa: 0.0 for kappa in ALLOWED_KAPPAS}
    for config in configs:
        numeric = eigensolve(config, default_eigen_grid(config, grid_points), k=levels)
        entry = {"config": config.to_dict(), "eigensolver": numeric.tolist(), "candidates": {}}
        for kappa in ALLOWED_KAPPAS:
            # the levels each candidate predicts, in its own ascending order
            predicted = np.array([e for _, e in levels_sorted(config, levels, kappa)])
            rel = np.abs(predicted - numeric) / np.abs(numeric)
            entry["candidates"][str(kappa)] = {"levels": predicted.tolist(), "relative_error": rel.tolist()}
            worst[kappa] = max(worst[kappa], float(rel.max()))
        printed = np.array(
            sorted(energy_as_printed(idx, config) for idx, _ in levels_sorted(config, levels))
        )
        entry["printed_relative_error"] = (np.abs(printed - numeric) / np.abs(numeric)).tolist()
        per_config.append(entry)
    winners = [k for k, err in worst.items() if err < 1e-2]
    if len(winners) != 1:
        raise CalibrationError(f"ambiguous spectrum calibration: {worst}")
    return {
        "kappa": winners[0],
        "max_relative_error": {str(k): v for k, v in worst.items()},
        "configs": per_config,
    }


def mehler_kernel(omega: float, m: float, hbar: float, x1, x2, t: float):
    """Exact 1D oscillator propagator, with the Maslov phase past each conjugate point."""
    if omega == 0:
        return cmath.sqrt(m / (2j * math.pi * hbar * t)) * np.exp(1j * m * (x2 - x1) ** 2 / (2 * hbar * t))
    s = math.sin(omega * t)
    if abs(s) < 1e-14:
        raise CausticError(f"omega t = {omega * t!r} is a multiple of pi", t=t)
    crossings = math.floor(omega * t / math.pi)
    pref = math.sqrt(m * omega / (2 * math.pi * hbar * abs(s))) * cmath.exp(-1j * math.pi * (0.25 + 0.5 * crossings))
    phase = m * omega / (2 * hbar * s) * ((x1**2 + x2**2) * math.cos(omega * t) - 2 * x1 * x2)
    return pref * np.exp(1j * phase)


def lagrangian_action(ep: Endpoints, config: OscillatorConfig) -> float:
    """Time integral of L = (m/2)(v^2 - w1^2 x^2 - w2^2 y^2 + w0 (x vy - y vx)) along the path."""
    mc = solve_modes(ep, config)
    w1, w2, w0 = config.omega1, config.omega2, config.omega0

    def lag(t):
        p = trajectory(mc, config, t)
        return 0.5 * config.m * (
            p.vx**2 + p.vy**2 - w1**2 * p.x**2 - w2**2 * p.y**2 + w0 * (p.x * p.vy - p.y * p.vx)
        )

    val, _ = quad(lag, 0.0, ep.T, epsabs=0.0, epsrel=1e-11, limit=200)
    return val


def evolve_reference(psi: WaveField, config: OscillatorConfig, t: float, dt: float | None = None, order: int = STENCIL_ORDER) -> WaveField:
    """Crank-Nicolson integration of the finite-difference Schrodinger equation.

    The step is the largest ``dt <= 1e-3 / Omega1`` that divides ``t`` evenly.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return psi
    dt_max = dt if dt is not None else 1e-3 / derive(config).Omega1
    n_steps = max(1, math.ceil(t / dt_max - 1e-9))
    dt = t / n_steps
    H = build_hamiltonian(config, psi.grid, Gauge.SYMMETRIC, order).matrix
    eye = sp.identity(H.shape[0], format="csc", dtype=complex)
    half = (0.5j * dt / config.hbar) * H
    try:
        lu = sla.splu((eye + half).tocsc())
    except RuntimeError as exc:
        raise ConvergenceError(f"Crank-Nicolson factorisation failed: {exc}") from exc
    rhs_op = (eye - half).tocsr()
    vec = psi.values.ravel().astype(complex)
    for _ in range(n_steps):
        vec = lu.solve(rhs_op @ vec)
    return WaveField(psi.grid, vec.reshape(psi.grid.nx, psi.grid.ny))


def _flat_top(s, plateau=0.3):
    """C-infinity window: 1 for s <= plateau, 0 for s >= 1, smooth in between.

    A flat top matters: any curvature of the window at the stationary point
    would bias the Fresnel integral at O(1 / (Q R^2)).
    """
    u = np.clip((s - plateau) / (1.0 - plateau), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
        b = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
    return a / (a + b)


def composed_short_time_kernel(ep: Endpoints, config: OscillatorConfig, n_slices: int, n_grid: int = 128, half_width: float | None = None) -> complex:
    """Kernel from ``n_slices`` exact short-time kernels integrated over intermediate planes.

    Each intermediate plane is an ``n_grid``^2 box centred on the classical
    path; the conditionally convergent Fresnel integrals are regularised with a
    smooth compact window that equals one around the stationary point, which
    leaves the result unchanged to super-algebraic accuracy.
    """
    if n_slices < 1:
        raise ValueError("n_slices must be >= 1")
    tau = ep.T / n_slices
    if tau >= first_caustic(config):
        raise CausticError(f"slice length {tau!r} reaches the first conjugate time", t=tau)
    if n_slices == 1:
        return complex(kernel_values(config, ep.T, ep.x1, ep.y1, ep.x2, ep.y2))
    if half_width is None:
        # wide enough for many Fresnel zones, narrow enough that the chirp at the
        # window edge stays below the trapezoid aliasing frequency 2 pi / h
        half_width = math.sqrt(1.4 * n_grid * config.hbar * tau / config.m)
    mc = solve_modes(ep, config)
    centers = [trajectory(mc, config, j * tau) for j in range(1, n_slices)]
    radius = 0.9 * half_width

    def plane(c):
        g = Grid2D.square(n_grid, half_width, (c.x, c.y))
        X, Y = g.mesh()
        w = _flat_top(np.hypot(X - c.x, Y - c.y) / radius) * g.weights()
        return g, X, Y, w

    g, X, Y, w = plane(centers[0])
    field = kernel_values(config, tau, ep.x1, ep.y1, X, Y)
    for c in centers[1:]:
        g_next, Xn, Yn, w_next = plane(c)
        field = apply_kernel(config, tau, g.x, g.y, field * w, g_next.x, g_next.y)
        g, X, Y, w = g_next, Xn, Yn, w_next
    last = kernel_values(config, tau, X, Y, ep.x2, ep.y2)
    return complex(np.sum(field * w * last))
