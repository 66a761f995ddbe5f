"""Classical trajectories of the coupled oscillator.

For omega0 > 0 the motion is a superposition of two rotating modes with
frequencies Omega1 > Omega2::

    x(t) =  A cos W1 t + B sin W1 t + C cos W2 t + D sin W2 t
    y(t) = -L1 (A sin W1 t - B cos W1 t) - L2 (C sin W2 t - D cos W2 t)

In the decoupled regime (omega0 = 0) the same four coefficients are read as
``x = A cos w1 t + B sin w1 t`` and ``y = C cos w2 t + D sin w2 t``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CausticError, DecoupledRegimeError
from .model import OscillatorConfig, derive

# inverse condition number (after row equilibration) below which the
# boundary-value problem is treated as sitting on a conjugate point
CAUSTIC_RCOND = 1e-9


@dataclass(frozen=True)
class Endpoints:
    x1: float
    y1: float
    x2: float
    y2: float
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("elapsed time T must be positive")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=float)

    def reversed(self) -> "Endpoints":
        return Endpoints(self.x2, self.y2, self.x1, self.y1, self.T)


@dataclass(frozen=True)
class ModeCoefficients:
    A: float
    B: float
    C: float
    D: float

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C, self.D], dtype=float)


@dataclass(frozen=True)
class PhasePoint:
    x: float | np.ndarray
    y: float | np.ndarray
    vx: float | np.ndarray
    vy: float | np.ndarray


def _mode_frequencies(config):
    df = derive(config)
    if df.decoupled:
        return config.omega1, config.omega2, None, None
    return df.Omega1, df.Omega2, df.lambda1, df.lambda2


def boundary_matrix(config: OscillatorConfig, T: float) -> np.ndarray:
    """Rows map (A, B, C, D) onto (x1, y1, x2, y2)."""
    w1, w2, l1, l2 = _mode_frequencies(config)
    c1, s1 = np.cos(w1 * T), np.sin(w1 * T)
    c2, s2 = np.cos(w2 * T), np.sin(w2 * T)
    if l1 is None:
        return np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [c1, s1, 0.0, 0.0],
                [0.0, 0.0, c2, s2],
            ]
        )
    return np.array(
        [
            [1.0, 0.0, 1.0, 0.0],
            [0.0, l1, 0.0, l2],
            [c1, s1, c2, s2],
            [-l1 * s1, l1 * c1, -l2 * s2, l2 * c2],
        ]
    )


def _equilibrated_rcond(mat):
    # rows only: rescaling a column would hide a mode whose whole column
    # shrinks at a conjugate point (sin(w T) -> 0 in the decoupled case)
    scaled = mat / np.linalg.norm(mat, axis=1, keepdims=True)
    return 1.0 / np.linalg.cond(scaled)


def solve_modes(ep: Endpoints, config: OscillatorConfig) -> ModeCoefficients:
    """Mode amplitudes of the classical path joining the two endpoints.

    Solved by pivoted LU rather than through a closed-form inverse.
    """
    mat = boundary_matrix(config, ep.T)
    rcond = _equilibrated_rcond(mat)
    if rcond < CAUSTIC_RCOND:
        raise CausticError(
            f"boundary-value problem is singular at T={ep.T!r} (rcond={rcond:.3e})", t=ep.T
        )
    return ModeCoefficients(*np.linalg.solve(mat, ep.vector))


def modes_from_initial(x, y, vx, vy, config: OscillatorConfig) -> ModeCoefficients:
    """Mode amplitudes for the initial-value problem (position and velocity at t = 0)."""
    w1, w2, l1, l2 = _mode_frequencies(config)
    if l1 is None:
        return ModeCoefficients(x, vx / w1, y, vy / w2)
    # x = A + C, vy = -l1 w1 A - l2 w2 C ; y = l1 B + l2 D, vx = w1 B + w2 D
    A, C = np.linalg.solve([[1.0, 1.0], [-l1 * w1, -l2 * w2]], [x, vy])
    B, D = np.linalg.solve([[l1, l2], [w1, w2]], [y, vx])
    return ModeCoefficients(A, B, C, D)


def trajectory(mc: ModeCoefficients, config: OscillatorConfig, t) -> PhasePoint:
    """Position and velocity at time(s) ``t``; velocities by exact differentiation."""
    w1, w2, l1, l2 = _mode_frequencies(config)
    t = np.asarray(t, dtype=float)
    c1, s1 = np.cos(w1 * t), np.sin(w1 * t)
    c2, s2 = np.cos(w2 * t), np.sin(w2 * t)
    A, B, C, D = mc.A, mc.B, mc.C, mc.D
    if l1 is None:
        x = A * c1 + B * s1
        vx = w1 * (B * c1 - A * s1)
        y = C * c2 + D * s2
        vy = w2 * (D * c2 - C * s2)
    else:
        x = A * c1 + B * s1 + C * c2 + D * s2
        y = -l1 * (A * s1 - B * c1) - l2 * (C * s2 - D * c2)
        vx = w1 * (B * c1 - A * s1) + w2 * (D * c2 - C * s2)
        vy = -l1 * w1 * (A * c1 + B * s1) - l2 * w2 * (C * c2 + D * s2)
    if t.ndim == 0:
        return PhasePoint(float(x), float(y), float(vx), float(vy))
    return PhasePoint(x, y, vx, vy)


def endpoint_velocities(ep: Endpoints, config: OscillatorConfig):
    """Velocities (vx1, vy1, vx2, vy2) at both ends of the classical path, in closed form."""
    from .action import check_caustic, coefficients, decoupled_sine

    x1, y1, x2, y2 = ep.vector
    if config.decoupled:
        out = []
        for w, a, b in ((config.omega1, x1, x2), (config.omega2, y1, y2)):
            s, c = decoupled_sine(w, ep.T, config), np.cos(w * ep.T)
            out.append((w * (b - a * c) / s, w * (b * c - a) / s))
        (vx1, vx2), (vy1, vy2) = out
        return vx1, vy1, vx2, vy2
    k = coefficients(config, ep.T)
    check_caustic(k, config, ep.T)
    vx1 = (-k.a1 * x1 + k.b1 * x2 - 2 * k.c1 * y2 + k.f1 * y1) / k.D
    vx2 = (-k.b1 * x1 + k.a1 * x2 - 2 * k.c1 * y1 + k.f1 * y2) / k.D
    vy1 = (-k.a2 * y1 + k.b2 * y2 + 2 * k.c1 * x2 + k.f2 * x1) / k.D
    vy2 = (-k.b2 * y1 + k.a2 * y2 + 2 * k.c1 * x1 + k.f2 * x2) / k.D
    return vx1, vy1, vx2, vy2


def mechanical_energy(point: PhasePoint, config: OscillatorConfig):
    """Kinetic plus trap energy; the magnetic force does no work, so this is conserved."""
    m = config.m
    return 0.5 * m * (point.vx**2 + point.vy**2) + 0.5 * m * (
        config.omega1**2 * point.x**2 + config.omega2**2 * point.y**2
    )


def eom_residual(mc: ModeCoefficients, config: OscillatorConfig, t, h=None):
    """|x'' + w1^2 x - w0 y'| + |y'' + w2^2 y + w0 x'| from fourth-order centred differences.

    The default step ``5e-3 / w_max`` balances truncation, O((h w)^4), against
    roundoff, O(eps / (h w)^2); both stay near 1e-11 of the acceleration scale.
    """
    if h is None:
        h = 5e-3 / max(config.omega1, config.omega2, config.omega0, derive(config).Omega1)
    t = np.asarray(t, dtype=float)
    p0 = trajectory(mc, config, t)
    p1, m1 = trajectory(mc, config, t + h), trajectory(mc, config, t - h)
    p2, m2 = trajectory(mc, config, t + 2 * h), trajectory(mc, config, t - 2 * h)

    def d1(a):
        return (-a[2] + 8 * a[1] - 8 * a[3] + a[4]) / (12 * h)

    def d2(a):
        return (-a[2] + 16 * a[1] - 30 * a[0] + 16 * a[3] - a[4]) / (12 * h * h)

    xs = (p0.x, p1.x, p2.x, m1.x, m2.x)
    ys = (p0.y, p1.y, p2.y, m1.y, m2.y)
    w0 = config.omega0
    return np.abs(d2(xs) + config.omega1**2 * p0.x - w0 * d1(ys)) + np.abs(
        d2(ys) + config.omega2**2 * p0.y + w0 * d1(xs)
    )


def printed_delta(config: OscillatorConfig, T: float) -> float:
    """Closed-form boundary determinant in the literal (uncorrected) layout.

    Equals ``-det(boundary_matrix)``.
    """
    df = derive(config)
    if not df.lambdas_defined:
        raise DecoupledRegimeError("printed determinant needs omega0 > 0")
    l1, l2 = df.lambda1, df.lambda2
    return (l1 - l2) ** 2 * np.sin(df.Omega1 * T) * np.sin(df.Omega2 * T) - 2 * l1 * l2 * (
        1 - np.cos(df.omega_minus * T)
    )


def printed_cofactors(config: OscillatorConfig, T: float) -> np.ndarray:
    """Literal 4x4 cofactor list a_ij, kept to document its defects.

    Twelve entries agree with ``printed_delta * inv(boundary_matrix)``; the
    four ``(1/2) ... sin sin`` entries (13, 24, 33, 44) do not.
    """
    df = derive(config)
    if not df.lambdas_defined:
        raise DecoupledRegimeError("printed cofactors need omega0 > 0")
    l1, l2 = df.lambda1, df.lambda2
    c1, s1 = np.cos(df.Omega1 * T), np.sin(df.Omega1 * T)
    c2, s2 = np.cos(df.Omega2 * T), np.sin(df.Omega2 * T)
    return np.array(
        [
            [l2 * (l1 * c1 * c2 + l2 * s1 * s2 - l1), l1 * c1 * s2 - l2 * s1 * c2,
             0.5 * l1 * l2 * s1 * s2, l2 * s1 - l1 * s2],
            [l2 * (l1 * s1 * c2 - l2 * c1 * s2), l1 * s1 * s2 + l2 * c1 * c2 - l2,
             l2 * (-l1 * s1 + l2 * s2), 0.5 * l2 * s1 * s2],
            [l1 * (l2 * c1 * c2 + l1 * s1 * s2 - l2), -l1 * c1 * s2 + l2 * s1 * c2,
             -0.5 * l1 * l2 * s1 * s2, -l2 * s1 + l1 * s2],
            [l1 * (-l1 * s1 * c2 + l2 * c1 * s2), l2 * s1 * s2 + l1 * c1 * c2 - l1,
             l1 * (l1 * s1 - l2 * s2), -0.5 * l1 * s1 * s2],
        ]
    )


TRAJECTORY_COLUMNS = ("t", "x", "y", "vx", "vy")


def write_trajectory_csv(path, mc: ModeCoefficients, config: OscillatorConfig, times) -> int:
    times = np.asarray(times, dtype=float)
    pts = trajectory(mc, config, times)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in zip(times, pts.x, pts.y, pts.vx, pts.vy):
            writer.writerow([repr(float(v)) for v in row])
    return len(times)
