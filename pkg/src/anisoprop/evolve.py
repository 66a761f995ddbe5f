"""Wave packets on a uniform 2D grid, propagated by quadrature against the exact kernel.

Fields are sampled in the symmetric gauge, the gauge of the kernel.
"""

from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import resample

from .action import action_form, first_caustic
from .classical import modes_from_initial, trajectory
from .errors import GridError
from .model import OscillatorConfig
from .propagator import apply_kernel

# fraction of probability allowed in the outer 3 cells before a field is flagged
ESCAPE_TOL = 1e-6
# default sub-step length as a fraction of the first conjugate time
STEP_FRACTION = 0.6
MAX_UPSAMPLE = 8


class EscapeWarning(UserWarning):
    """Probability reached the edge of the grid."""


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.nx < 16 or self.ny < 16:
            raise GridError("grid needs at least 16 points per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GridError("grid extents must be increasing")

    @classmethod
    def square(cls, n: int, half_width: float, center=(0.0, 0.0)) -> "Grid2D":
        cx, cy = center
        return cls(n, n, cx - half_width, cx + half_width, cy - half_width, cy + half_width)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def weights(self) -> np.ndarray:
        wx = np.full(self.nx, self.dx)
        wy = np.full(self.ny, self.dy)
        wx[[0, -1]] *= 0.5
        wy[[0, -1]] *= 0.5
        return np.outer(wx, wy)

    def contains(self, x, y, margin=0.0) -> bool:
        return (
            self.x_min + margin <= x <= self.x_max - margin
            and self.y_min + margin <= y <= self.y_max - margin
        )


def _integrate(grid, values):
    return trapezoid(trapezoid(values, dx=grid.dy, axis=1), dx=grid.dx)


@dataclass(frozen=True)
class WaveField:
    """Complex samples ``values[ix, iy]`` (y fastest) on ``grid``."""

    grid: Grid2D
    values: np.ndarray
    escaped: bool = False
    norm2: float = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.nx, self.grid.ny):
            raise GridError(f"values shape {vals.shape} does not match grid {(self.grid.nx, self.grid.ny)}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "norm2", float(_integrate(self.grid, np.abs(vals) ** 2)))


@dataclass(frozen=True)
class CatState1DSpec:
    """Two equal Gaussians at +-a0/2, each of variance ``sigma2``."""

    a0: float
    sigma2: float

    def __post_init__(self):
        if self.a0 <= 0 or self.sigma2 <= 0:
            raise ValueError("a0 and sigma2 must be positive")


def _normalized(grid, values):
    return values / math.sqrt(_integrate(grid, np.abs(values) ** 2))


def gaussian(grid: Grid2D, x0=0.0, y0=0.0, px=0.0, py=0.0, sigma_x=1.0, sigma_y=1.0, hbar=1.0) -> WaveField:
    """Normalised Gaussian with position variances sigma^2 and mean momentum (px, py)."""
    if not (grid.contains(x0 - 6 * sigma_x, y0 - 6 * sigma_y) and grid.contains(x0 + 6 * sigma_x, y0 + 6 * sigma_y)):
        raise GridError("Gaussian does not fit: need 6 sigma between centre and every grid edge")
    X, Y = grid.mesh()
    vals = np.exp(
        -((X - x0) ** 2) / (4 * sigma_x**2)
        - (Y - y0) ** 2 / (4 * sigma_y**2)
        + 1j * (px * X + py * Y) / hbar
    )
    return WaveField(grid, _normalized(grid, vals))


def cat_profile(x, spec: CatState1DSpec):
    """Two-Gaussian superposition in one dimension, analytically normalised."""
    s2, a0 = spec.sigma2, spec.a0
    norm = (8 * math.pi * s2) ** -0.25 * (1 + math.exp(-(a0**2) / (8 * s2))) ** -0.5
    return norm * (np.exp(-((x + a0 / 2) ** 2) / (4 * s2)) + np.exp(-((x - a0 / 2) ** 2) / (4 * s2)))


def cat_state(grid: Grid2D, spec: CatState1DSpec, sigma_y: float) -> WaveField:
    """Cat profile along x times the sigma_y ground Gaussian along y."""
    sx = math.sqrt(spec.sigma2)
    reach = spec.a0 / 2 + 6 * sx
    if not (grid.contains(-reach, -6 * sigma_y) and grid.contains(reach, 6 * sigma_y)):
        raise GridError("cat state does not fit inside the grid")
    X, Y = grid.mesh()
    vals = cat_profile(X, spec) * (2 * math.pi * sigma_y**2) ** -0.25 * np.exp(-(Y**2) / (4 * sigma_y**2))
    return WaveField(grid, _normalized(grid, vals))


def _bandwidth(values, h, axis):
    spec = np.abs(np.fft.fft(values, axis=axis)) ** 2
    power = spec.sum(axis=1 - axis)
    k = 2 * np.pi * np.fft.fftfreq(values.shape[axis], d=h)
    live = power > 1e-24 * power.max()
    return float(np.abs(k[live]).max())


def _upsample_factor(psi: WaveField, config, tau):
    """Smallest integer refinement keeping the integrand below 2 pi / h everywhere."""
    grid, vals = psi.grid, psi.values
    form = action_form(config, tau)
    k = 0.5 * config.m / config.hbar
    mag = np.abs(vals)
    ix, iy = np.nonzero(mag > 1e-12 * mag.max())
    xs = (grid.x[ix.min()], grid.x[ix.max()])
    ys = (grid.y[iy.min()], grid.y[iy.max()])
    gx = gy = 0.0
    for x1 in xs:
        for y1 in ys:
            for x2 in (grid.x_min, grid.x_max):
                for y2 in (grid.y_min, grid.y_max):
                    gx = max(gx, abs(k * (2 * form.xx * x1 - 2 * form.bx * x2 + form.cross * y2 - form.mixed * y1)))
                    gy = max(gy, abs(k * (2 * form.yy * y1 - 2 * form.by * y2 - form.cross * x2 - form.mixed * x1)))
    fx = (gx + _bandwidth(vals, grid.dx, 0)) * grid.dx / (0.9 * 2 * math.pi)
    fy = (gy + _bandwidth(vals, grid.dy, 1)) * grid.dy / (0.9 * 2 * math.pi)
    f = max(1, math.ceil(max(fx, fy)))
    if f > MAX_UPSAMPLE:
        warnings.warn(f"kernel chirp needs {f}x refinement; capped at {MAX_UPSAMPLE}", RuntimeWarning)
        f = MAX_UPSAMPLE
    return f


def _quadrature_step(psi: WaveField, config, tau, upsample):
    grid = psi.grid
    f = _upsample_factor(psi, config, tau) if upsample == "auto" else int(upsample)
    if f == 1:
        xs, ys, src = grid.x, grid.y, psi.values * grid.weights()
    else:
        # band-limited (periodic) interpolation; the field vanishes at the edges
        fine = resample(resample(psi.values, f * grid.nx, axis=0), f * grid.ny, axis=1)
        xs = grid.x_min + np.arange(f * grid.nx) * grid.dx / f
        ys = grid.y_min + np.arange(f * grid.ny) * grid.dy / f
        src = fine * (grid.dx * grid.dy / f**2)
    # drop source points that cannot contribute at double precision
    mag = np.abs(src)
    keep_x = np.nonzero(mag.max(axis=1) > 1e-17 * mag.max())[0]
    keep_y = np.nonzero(mag.max(axis=0) > 1e-17 * mag.max())[0]
    xs_k, ys_k = xs[keep_x[0]: keep_x[-1] + 1], ys[keep_y[0]: keep_y[-1] + 1]
    src = src[keep_x[0]: keep_x[-1] + 1, keep_y[0]: keep_y[-1] + 1]
    return apply_kernel(config, tau, xs_k, ys_k, src, grid.x, grid.y)


def kinetic_velocity(psi: WaveField, config: OscillatorConfig):
    """Mean velocity (<p> - q A(<r>)) / m in the symmetric gauge."""
    obs = observables(psi, hbar=config.hbar)
    w0 = config.omega0
    return (
        obs["mean_px"] / config.m + 0.5 * w0 * obs["mean_y"],
        obs["mean_py"] / config.m - 0.5 * w0 * obs["mean_x"],
    )


def centroid_trajectory(psi: WaveField, config: OscillatorConfig, times):
    """Classical path of the packet centroid (exact for a quadratic Hamiltonian)."""
    obs = observables(psi, hbar=config.hbar)
    vx, vy = kinetic_velocity(psi, config)
    mc = modes_from_initial(obs["mean_x"], obs["mean_y"], vx, vy, config)
    return trajectory(mc, config, times)


def edge_probability(psi: WaveField, cells: int = 3) -> float:
    dens = np.abs(psi.values) ** 2
    inner = dens[cells:-cells, cells:-cells]
    total = dens.sum()
    return float((total - inner.sum()) / total) if total > 0 else 0.0


def propagate(
    psi: WaveField,
    config: OscillatorConfig,
    t: float,
    max_step: float | None = None,
    upsample="auto",
) -> WaveField:
    """psi_t(r2) = integral G(r1 -> r2; t) psi_0(r1) d^2 r1 on the same grid.

    Times beyond the first conjugate point are reached by composing equal
    sub-steps of at most ``max_step`` (default 0.6 x first conjugate time);
    each sub-step is a trapezoid quadrature against the exact kernel, with the
    source field refined by band-limited interpolation when the kernel's
    chirp would alias on the grid.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t == 0:
        return psi
    if max_step is None:
        max_step = STEP_FRACTION * first_caustic(config)
    n_steps = max(1, math.ceil(t / max_step - 1e-12))
    tau = t / n_steps

    end = centroid_trajectory(psi, config, t)
    if not psi.grid.contains(end.x, end.y):
        warnings.warn(
            f"classical centroid ({end.x:.3g}, {end.y:.3g}) leaves the grid by t={t}", EscapeWarning
        )

    vals = psi
    for _ in range(n_steps):
        vals = WaveField(psi.grid, _quadrature_step(vals, config, tau, upsample))
    escaped = edge_probability(vals) > ESCAPE_TOL
    if escaped:
        warnings.warn(f"probability at the grid edge exceeds {ESCAPE_TOL} after t={t}", EscapeWarning)
    return WaveField(psi.grid, vals.values, escaped=escaped)


def observables(psi: WaveField, reference: WaveField | None = None, hbar: float = 1.0) -> dict:
    """Trapezoid-rule moments; momenta from spectral derivatives."""
    grid, vals = psi.grid, psi.values
    X, Y = grid.mesh()
    dens = np.abs(vals) ** 2
    norm = _integrate(grid, dens)
    kx = 2 * np.pi * np.fft.fftfreq(grid.nx, d=grid.dx)
    ky = 2 * np.pi * np.fft.fftfreq(grid.ny, d=grid.dy)
    dpx = np.fft.ifft(1j * kx[:, None] * np.fft.fft(vals, axis=0), axis=0)
    dpy = np.fft.ifft(1j * ky[None, :] * np.fft.fft(vals, axis=1), axis=1)
    out = {
        "norm": float(norm),
        "mean_x": float(_integrate(grid, X * dens) / norm),
        "mean_y": float(_integrate(grid, Y * dens) / norm),
        "mean_x2": float(_integrate(grid, X**2 * dens) / norm),
        "mean_y2": float(_integrate(grid, Y**2 * dens) / norm),
        "mean_px": float((_integrate(grid, np.conj(vals) * (-1j * hbar) * dpx) / norm).real),
        "mean_py": float((_integrate(grid, np.conj(vals) * (-1j * hbar) * dpy) / norm).real),
    }
    if reference is not None:
        if reference.grid != grid:
            raise GridError("reference field lives on a different grid")
        out["autocorrelation"] = float(abs(_integrate(grid, np.conj(reference.values) * vals)))
    return out


def l2_distance(a: WaveField, b: WaveField) -> float:
    if a.grid != b.grid:
        raise GridError("fields live on different grids")
    return math.sqrt(_integrate(a.grid, np.abs(a.values - b.values) ** 2))


def write_field_csv(path, psi: WaveField) -> int:
    X, Y = psi.grid.mesh()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("x", "y", "re", "im"))
        for x, y, z in zip(X.ravel(), Y.ravel(), psi.values.ravel()):
            writer.writerow((repr(float(x)), repr(float(y)), repr(float(z.real)), repr(float(z.imag))))
    return psi.values.size


# binary field layout (little-endian):
#   4s magic "APWF" | u32 version | u32 nx | u32 ny | f64 x_min x_max y_min y_max
#   then nx*ny (re, im) f64 pairs, row-major with y fastest
_MAGIC = b"APWF"
_HEADER = struct.Struct("<4sIII4d")


def write_field_binary(path, psi: WaveField) -> None:
    g = psi.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, g.nx, g.ny, g.x_min, g.x_max, g.y_min, g.y_max))
        fh.write(np.ascontiguousarray(psi.values, dtype="<c16").tobytes())


def read_field_binary(path) -> WaveField:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, version, nx, ny, x0, x1, y0, y1 = _HEADER.unpack(head)
        if magic != _MAGIC or version != 1:
            raise ValueError(f"{path}: not a version-1 field file")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} samples, found {data.size}")
    return WaveField(Grid2D(nx, ny, x0, x1, y0, y1), data.reshape(nx, ny).astype(complex))
