"""Closed-form classical action, its coefficient functions, and conjugate-point search."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .classical import Endpoints, solve_modes, trajectory
from .errors import CalibrationError, CausticError
from .model import OscillatorConfig, derive

# Weight of c1 (x1 y2 - x2 y1) inside the action bracket.  Two factors appear
# in print (4 and 2); arbitrate_cross_factor() against the boundary-term action
# selects 4, which is also the value the printed Van Vleck amplitude assumes.
CROSS_FACTOR = 4
ALLOWED_CROSS_FACTORS = (2, 4)

CAUSTIC_RTOL = 1e-9


@dataclass(frozen=True)
class ActionCoefficients:
    a1: float | np.ndarray
    a2: float | np.ndarray
    b1: float | np.ndarray
    b2: float | np.ndarray
    c1: float | np.ndarray
    c2: float | np.ndarray
    f1: float | np.ndarray
    f2: float | np.ndarray
    D: float | np.ndarray


def _sin2_over(omega_ratio_num, omega, t):
    # (num / omega) sin^2(omega t / 2) == num * omega * (t/2)^2 * sinc^2(omega t / 2),
    # finite and accurate as omega -> 0
    half = 0.5 * t
    return omega_ratio_num * omega * half * half * np.sinc(omega * half / np.pi) ** 2


def coefficients(config: OscillatorConfig, T) -> ActionCoefficients:
    """The nine time functions a1, a2, b1, b2, c1, c2, f1, f2, D at time(s) ``T``."""
    df = derive(config)
    w1, w2, w0 = config.omega1, config.omega2, config.omega0
    op, om = df.omega_plus, df.omega_minus
    T = np.asarray(T, dtype=float)
    wp, wm = w1 + w2, w1 - w2
    sp, cp = np.sin(0.5 * op * T), np.cos(0.5 * op * T)
    sm, cm = np.sin(0.5 * om * T), np.cos(0.5 * om * T)
    # (O+/O-) sin^2(O- T/2) and (O-/O+) sin^2(O+ T/2)
    g_minus = _sin2_over(op, om, T)
    g_plus = (om / op) * sp * sp

    a1 = 0.5 * w1 * (om * wp * np.sin(op * T) - op * wm * np.sin(om * T))
    a2 = 0.5 * w2 * (om * wp * np.sin(op * T) + op * wm * np.sin(om * T))
    b1 = w1 * (om * wp * sp * cm - op * wm * cp * sm)
    b2 = w2 * (om * wp * sp * cm + op * wm * cp * sm)
    c1 = w0 * w1 * w2 * sp * sm
    c2 = w0 * wp * wm * (g_minus - g_plus)
    f1 = w0 * (w2 * wm * g_minus + w2 * wp * g_plus)
    f2 = w0 * (w1 * wm * g_minus - w1 * wp * g_plus)
    D = wp * wp * g_plus - wm * wm * g_minus
    vals = (a1, a2, b1, b2, c1, c2, f1, f2, D)
    if T.ndim == 0:
        vals = tuple(float(v) for v in vals)
    return ActionCoefficients(*vals)


def D_derivative(config: OscillatorConfig, t):
    df = derive(config)
    wp, wm = config.omega1 + config.omega2, config.omega1 - config.omega2
    op, om = df.omega_plus, df.omega_minus
    return 0.5 * (wp * wp * om * np.sin(op * t) - wm * wm * op * np.sin(om * t))


def D_scale(config: OscillatorConfig) -> float:
    """Upper bound on |D(t)|, the reference for the caustic tolerance."""
    df = derive(config)
    wp, wm = config.omega1 + config.omega2, config.omega1 - config.omega2
    op, om = df.omega_plus, df.omega_minus
    second = wm * wm * op / om if om > 0 else 0.0
    return wp * wp * om / op + second


def caustics(config: OscillatorConfig, t_lo: float, t_hi: float) -> list[float]:
    """All conjugate times in ``[t_lo, t_hi]``, ``t = 0`` excluded."""
    if t_lo < 0 or t_hi < t_lo:
        raise ValueError("need 0 <= t_lo <= t_hi")
    if config.decoupled:
        roots = set()
        for w in (config.omega1, config.omega2):
            k0 = max(1, math.ceil(t_lo * w / math.pi))
            k = k0
            while k * math.pi / w <= t_hi:
                roots.add(k * math.pi / w)
                k += 1
        return _dedupe(sorted(roots))

    df = derive(config)
    step = min(math.pi / df.omega_plus, math.pi / df.omega_minus) / 20.0
    n = max(2, int(math.ceil((t_hi - t_lo) / step)) + 1)
    grid = np.linspace(t_lo, t_hi, n)
    vals = coefficients(config, grid).D
    scale = D_scale(config)
    floor = 1e-12 * max(1.0, t_hi)

    def D(t):
        return float(coefficients(config, t).D)

    def dD(t):
        return float(D_derivative(config, t))

    roots = []
    for i in range(n - 1):
        lo, hi = grid[i], grid[i + 1]
        if vals[i] == 0.0 and lo > floor:
            roots.append(lo)
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(D, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps))
    # tangential zeros: |D| has a local minimum where D' changes sign
    slope = D_derivative(config, grid)
    for i in range(n - 1):
        if slope[i] * slope[i + 1] < 0:
            t_star = brentq(dD, grid[i], grid[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps)
            if abs(D(t_star)) <= 1e-10 * scale and t_star > floor:
                roots.append(t_star)
    # the window is closed: keep zeros sitting on either edge
    for edge in (t_lo, t_hi):
        if edge > floor and abs(D(edge)) <= 1e-10 * scale:
            roots.append(edge)
    return _dedupe(sorted(r for r in roots if r > floor))


def _dedupe(roots, tol=1e-9):
    out = []
    for r in roots:
        if not out or r - out[-1] > tol:
            out.append(float(r))
    return out


def first_caustic(config: OscillatorConfig) -> float:
    if config.decoupled:
        return math.pi / max(config.omega1, config.omega2)
    df = derive(config)
    # D > 0 near t = 0 and the first zero lies below 2 pi / O+ (where the
    # positive term vanishes), so this window always contains it
    upper = 2.0 * math.pi / df.omega_plus
    found = caustics(config, 0.0, upper * (1 + 1e-9))
    return found[0]


def caustic_reference(config: OscillatorConfig, T: float) -> float:
    """Size D would have at ``T`` far from any conjugate point.

    D grows like w1 w2 O+ O- T^2 from T = 0 and is bounded by ``D_scale``;
    comparing against the smaller of the two keeps short times, where the
    kernel simply narrows towards a delta function, from looking singular.
    """
    df = derive(config)
    small_t = config.omega1 * config.omega2 * df.omega_plus * df.omega_minus * T * T
    return min(D_scale(config), small_t)


def decoupled_sine(omega: float, T: float, config: OscillatorConfig) -> float:
    """sin(omega T), raising CausticError when it vanishes relative to min(1, omega T)."""
    s = math.sin(omega * T)
    if abs(s) < CAUSTIC_RTOL * min(1.0, omega * T):
        near = caustics(config, max(0.0, T - 4.0 * math.pi / omega), T + 4.0 * math.pi / omega)
        raise CausticError(f"T={T!r} is at a conjugate point", t=T, caustic_times=near)
    return s


def check_caustic(k: ActionCoefficients, config: OscillatorConfig, T: float):
    if abs(k.D) < CAUSTIC_RTOL * caustic_reference(config, T):
        span = 4.0 * math.pi / derive(config).omega_plus
        near = caustics(config, max(0.0, T - span), T + span)
        raise CausticError(
            f"T={T!r} is at a conjugate point (D={k.D:.3e})", t=T, caustic_times=near
        )


@dataclass(frozen=True)
class ActionForm:
    """Classical action as a quadratic form, with every coefficient divided by D.

    ``S = (m/2) [xx (x1^2 + x2^2) + yy (y1^2 + y2^2) - 2 bx x1 x2 - 2 by y1 y2
    + cross (x1 y2 - x2 y1) + mixed (x2 y2 - x1 y1)]``
    """

    m: float
    xx: float
    yy: float
    bx: float
    by: float
    cross: float
    mixed: float

    def __call__(self, x1, y1, x2, y2):
        return 0.5 * self.m * (
            self.xx * (x1 * x1 + x2 * x2)
            + self.yy * (y1 * y1 + y2 * y2)
            - 2.0 * self.bx * x1 * x2
            - 2.0 * self.by * y1 * y2
            + self.cross * (x1 * y2 - x2 * y1)
            + self.mixed * (x2 * y2 - x1 * y1)
        )


def _check_factor(cross_factor):
    if cross_factor not in ALLOWED_CROSS_FACTORS:
        raise CalibrationError(
            f"cross_factor must be one of {ALLOWED_CROSS_FACTORS}, got {cross_factor!r}"
        )


def action_form(config: OscillatorConfig, T: float, cross_factor: int = CROSS_FACTOR) -> ActionForm:
    _check_factor(cross_factor)
    if not T > 0:
        raise ValueError("T must be positive")
    if config.decoupled:
        forms = []
        for w in (config.omega1, config.omega2):
            s = decoupled_sine(w, T, config)
            forms.append((w * math.cos(w * T) / s, w / s))
        (xx, bx), (yy, by) = forms
        return ActionForm(config.m, xx, yy, bx, by, 0.0, 0.0)
    k = coefficients(config, T)
    check_caustic(k, config, T)
    return ActionForm(
        config.m, k.a1 / k.D, k.a2 / k.D, k.b1 / k.D, k.b2 / k.D, cross_factor * k.c1 / k.D, k.c2 / k.D
    )


def action_closed(ep: Endpoints, config: OscillatorConfig, cross_factor: int = CROSS_FACTOR) -> float:
    return float(action_form(config, ep.T, cross_factor)(*ep.vector))


def action_boundary(ep: Endpoints, config: OscillatorConfig) -> float:
    """(m/2) [x v_x + y v_y] between the endpoints, along the solved mode trajectory.

    Velocities come from the linear solve for the mode amplitudes, so this route
    shares nothing with the closed-form coefficient functions.
    """
    mc = solve_modes(ep, config)
    start, end = trajectory(mc, config, 0.0), trajectory(mc, config, ep.T)
    return 0.5 * config.m * (
        end.x * end.vx - start.x * start.vx + end.y * end.vy - start.y * start.vy
    )


def arbitrate_cross_factor(configs, n_points: int = 200, seed: int = 0) -> dict:
    """Fit the cross-term weight against the boundary-term action.

    For each coupled config, random endpoints and times below the first
    conjugate point are drawn; the action without its cross term is subtracted
    from the boundary action and the remainder regressed on
    ``(m/2D) c1 (x1 y2 - x2 y1)``.  Returns a report whose ``"cross_factor"``
    is the unique allowed value consistent with the data.
    """
    rng = np.random.default_rng(seed)
    zs, rs, rows = [], [], []
    for config in configs:
        if config.decoupled:
            continue
        t_max = 0.8 * first_caustic(config)
        for _ in range(n_points):
            T = rng.uniform(0.05 * t_max, t_max)
            x1, y1, x2, y2 = rng.normal(size=4)
            wedge = x1 * y2 - x2 * y1
            if abs(wedge) < 1e-3 * (x1 * x1 + y1 * y1 + x2 * x2 + y2 * y2):
                continue  # no signal in the cross term
            ep = Endpoints(x1, y1, x2, y2, T)
            k = coefficients(config, T)
            s_b = action_boundary(ep, config)
            base = ActionForm(config.m, k.a1 / k.D, k.a2 / k.D, k.b1 / k.D, k.b2 / k.D, 0.0, k.c2 / k.D)
            z = 0.5 * config.m * k.c1 / k.D * wedge
            zs.append(z)
            rs.append(s_b - base(x1, y1, x2, y2))
            rows.append((ep, config, s_b))
    if not zs:
        raise CalibrationError("no coupled configurations with cross-term signal")
    zs, rs = np.array(zs), np.array(rs)
    k_fit = float(zs @ rs / (zs @ zs))
    residuals = {}
    for cand in ALLOWED_CROSS_FACTORS:
        rel = [abs(action_closed(ep, cfg, cand) - s_b) / max(abs(s_b), 1e-300) for ep, cfg, s_b in rows]
        residuals[cand] = float(max(rel))
    good = [c for c, r in residuals.items() if r < 1e-8]
    if len(good) != 1 or abs(k_fit - good[0]) > 1e-6:
        raise CalibrationError(f"ambiguous cross-factor fit: k_fit={k_fit}, residuals={residuals}")
    return {
        "cross_factor": good[0],
        "k_fit": k_fit,
        "residuals": {str(c): r for c, r in residuals.items()},
        "n_points": int(len(zs)),
        "configs": [c.to_dict() for c in configs],
    }


COEFFICIENT_COLUMNS = ("t", "a1", "a2", "b1", "b2", "c1", "c2", "f1", "f2", "D")


def write_coefficients_csv(path, config: OscillatorConfig, times) -> int:
    times = np.asarray(times, dtype=float)
    k = asdict(coefficients(config, times))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COEFFICIENT_COLUMNS)
        for i, t in enumerate(times):
            writer.writerow([repr(float(t))] + [repr(float(k[name][i])) for name in COEFFICIENT_COLUMNS[1:]])
    return len(times)
