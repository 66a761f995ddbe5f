"""Exact kernel G(x1, y1 -> x2, y2; t) = A(t) exp(i S_cl / hbar), gauges and grid application."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .action import action_form, check_caustic, coefficients, decoupled_sine
from .classical import Endpoints
from .model import OscillatorConfig, derive


class Gauge(enum.Enum):
    """Vector-potential choice the kernel is expressed in.

    ``WEIGHTED``: A = B0 (-w2 y, w1 x) / (w1 + w2).
    ``SYMMETRIC``: A = B0 (-y, x) / 2, the gauge of the Lagrangian; canonical here.
    """

    WEIGHTED = "weighted"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class KernelValue:
    amplitude: complex
    phase: float
    gauge: Gauge = Gauge.SYMMETRIC

    @property
    def value(self) -> complex:
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))


def vanvleck_matrix(ep: Endpoints, config: OscillatorConfig) -> np.ndarray:
    """Mixed second derivatives of the action, laid out as

    [[d2S/dx1dx2, d2S/dy1dx2], [d2S/dx1dy2, d2S/dy1dy2]].
    """
    f = action_form(config, ep.T)
    m = config.m
    return np.array([[-m * f.bx, -0.5 * m * f.cross], [0.5 * m * f.cross, -m * f.by]])


def amplitude(config: OscillatorConfig, t: float, form: str = "determinant") -> complex:
    """Prefactor of the kernel for 0 < t < first conjugate time.

    ``form`` selects between equivalent expressions:

    - ``"determinant"``: (m / 2 pi i hbar) sqrt(w1 w2 O+ O- / D(t))
    - ``"explicit"``: D(t) written out in sines
    - ``"vanvleck"``: |det M|^(1/2) / (2 pi i hbar)

    The square root of 1/i is taken as exp(-i pi/4) per dimension.
    """
    m, hbar = config.m, config.hbar
    w1, w2 = config.omega1, config.omega2
    pref = 1.0 / (2j * math.pi * hbar)
    if form == "vanvleck":
        det = np.linalg.det(vanvleck_matrix(Endpoints(0.0, 0.0, 0.0, 0.0, t), config))
        return pref * math.sqrt(abs(det))
    if config.decoupled:
        prod = decoupled_sine(w1, t, config) * decoupled_sine(w2, t, config)
        return pref * m * math.sqrt(w1 * w2 / prod)
    df = derive(config)
    op, om = df.omega_plus, df.omega_minus
    if form == "determinant":
        k = coefficients(config, t)
        check_caustic(k, config, t)
        return pref * m * math.sqrt(w1 * w2 * op * om / k.D)
    if form == "explicit":
        k = coefficients(config, t)
        check_caustic(k, config, t)
        denom = (w1 + w2) ** 2 * om**2 * math.sin(0.5 * op * t) ** 2 - (w1 - w2) ** 2 * op**2 * math.sin(
            0.5 * om * t
        ) ** 2
        return pref * m * op * om * math.sqrt(w1 * w2 / denom)
    raise ValueError(f"unknown amplitude form {form!r}")


def gauge_phase(x, y, config: OscillatorConfig):
    """(q / hbar c) Lambda(x, y) in natural units: (m w0 / 2 hbar) ((w1 - w2)/(w1 + w2)) x y."""
    w1, w2 = config.omega1, config.omega2
    return 0.5 * config.m * config.omega0 / config.hbar * (w1 - w2) / (w1 + w2) * x * y


def _gauge_sign(src: Gauge, dst: Gauge) -> int:
    # symmetric -> weighted multiplies wave functions by exp(+i q Lambda / hbar c)
    if src == dst:
        return 0
    return 1 if dst is Gauge.WEIGHTED else -1


def gauge_transform(value: KernelValue, ep: Endpoints, config: OscillatorConfig, src: Gauge, dst: Gauge) -> KernelValue:
    if src == dst:
        raise ValueError("source and target gauge are identical")
    if value.gauge != src:
        raise ValueError(f"kernel value is in the {value.gauge.value} gauge, not {src.value}")
    sign = _gauge_sign(src, dst)
    shift = sign * (gauge_phase(ep.x2, ep.y2, config) - gauge_phase(ep.x1, ep.y1, config))
    return KernelValue(value.amplitude, value.phase + shift, dst)


def kernel(ep: Endpoints, config: OscillatorConfig, gauge: Gauge = Gauge.SYMMETRIC) -> KernelValue:
    """Kernel from (x1, y1) at time 0 to (x2, y2) at time ``ep.T``."""
    form = action_form(config, ep.T)
    value = KernelValue(amplitude(config, ep.T), float(form(*ep.vector)) / config.hbar)
    if gauge is Gauge.SYMMETRIC:
        return value
    return gauge_transform(value, ep, config, Gauge.SYMMETRIC, gauge)


def kernel_values(config: OscillatorConfig, t: float, x1, y1, x2, y2, gauge: Gauge = Gauge.SYMMETRIC):
    """Vectorised kernel over broadcastable endpoint arrays; returns complex values."""
    form = action_form(config, t)
    phase = form(x1, y1, x2, y2) / config.hbar
    sign = _gauge_sign(Gauge.SYMMETRIC, gauge)
    if sign:
        phase = phase + sign * (gauge_phase(x2, y2, config) - gauge_phase(x1, y1, config))
    return amplitude(config, t) * np.exp(1j * phase)


def apply_kernel(config: OscillatorConfig, t: float, src_x, src_y, src_values, dst_x, dst_y, block: int = 8192):
    """Sum_{r1} G(r1 -> r2; t) f(r1) for every r2 on the tensor grid ``dst_x x dst_y``.

    ``src_values`` holds f(r1) times its quadrature weight, shape
    ``(len(src_x), len(src_y))``.  The bilinear part of the action factorises
    into exp(i x2 u(r1)) exp(i y2 v(r1)), so the sum becomes a matrix product
    ``(E_x * g) @ E_y^T`` evaluated in blocks of source points (symmetric gauge).
    """
    form = action_form(config, t)
    k = 0.5 * config.m / config.hbar
    src_x = np.asarray(src_x, dtype=float)
    src_y = np.asarray(src_y, dtype=float)
    dst_x = np.asarray(dst_x, dtype=float)
    dst_y = np.asarray(dst_y, dtype=float)
    X1, Y1 = np.meshgrid(src_x, src_y, indexing="ij")
    g = (np.asarray(src_values) * np.exp(1j * k * (form.xx * X1**2 + form.yy * Y1**2 - form.mixed * X1 * Y1))).ravel()
    u = (k * (-2.0 * form.bx * X1 - form.cross * Y1)).ravel()
    v = (k * (-2.0 * form.by * Y1 + form.cross * X1)).ravel()
    out = np.zeros((dst_x.size, dst_y.size), dtype=complex)
    for start in range(0, g.size, block):
        sl = slice(start, start + block)
        ex = np.exp(1j * np.multiply.outer(dst_x, u[sl]))
        ey = np.exp(1j * np.multiply.outer(dst_y, v[sl]))
        out += (ex * g[sl]) @ ey.T
    X2, Y2 = np.meshgrid(dst_x, dst_y, indexing="ij")
    out *= amplitude(config, t) * np.exp(1j * k * (form.xx * X2**2 + form.yy * Y2**2 + form.mixed * X2 * Y2))
    return out


def write_kernel_grid(path, config: OscillatorConfig, t: float, x1: float, y1: float, xs, ys, gauge: Gauge = Gauge.SYMMETRIC) -> int:
    """Kernel slice from a fixed source point onto a grid, as CSV or JSON (by suffix)."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    X2, Y2 = np.meshgrid(xs, ys, indexing="ij")
    vals = kernel_values(config, t, x1, y1, X2, Y2, gauge)
    rows = [
        (float(a), float(b), float(z.real), float(z.imag), float(abs(z)), float(np.angle(z)))
        for a, b, z in zip(X2.ravel(), Y2.ravel(), vals.ravel())
    ]
    cols = ("x2", "y2", "re", "im", "modulus", "phase")
    if str(path).endswith(".json"):
        payload = {
            "t": t, "x1": x1, "y1": y1, "gauge": gauge.value, "config": config.to_dict(),
            "columns": list(cols), "rows": [list(r) for r in rows],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for r in rows:
                writer.writerow([repr(v) for v in r])
    return len(rows)
