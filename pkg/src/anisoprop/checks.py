"""Acceptance checks, one per criterion, shared by ``anisoprop verify`` and the test suite.

Every check returns a :class:`CheckResult` carrying the measured figure of
merit, the tolerance it is held to, and the wall time against its budget.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import action, oracle
from .action import action_boundary, action_closed, arbitrate_cross_factor, caustics, coefficients, first_caustic
from .classical import Endpoints
from .evolve import (
    CatState1DSpec,
    Grid2D,
    cat_state,
    centroid_trajectory,
    gaussian,
    l2_distance,
    observables,
    propagate,
)
from .model import IDENTITY_NAMES, OscillatorConfig, derive, lambda_identities
from .propagator import Gauge, amplitude, gauge_phase, kernel, kernel_values, vanvleck_matrix
from .spectrum import KAPPA

FLAGSHIP = OscillatorConfig(omega1=2.0, omega2=2.0, omega0=3.0)


@dataclass
class CheckResult:
    criterion: int
    name: str
    measured: float
    tolerance: float
    accurate: bool
    runtime: float
    runtime_limit: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.accurate and self.runtime <= self.runtime_limit

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        slow = "" if self.runtime <= self.runtime_limit else " [over time budget]"
        return (
            f"[{tag}] criterion {self.criterion:2d} {self.name}: measured {self.measured:.3e} "
            f"vs tolerance {self.tolerance:.0e}; {self.runtime:.2f} s of {self.runtime_limit:g} s{slow}"
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def _timed(criterion, name, tolerance, limit, fn, *args, **kwargs):
    start = time.perf_counter()
    measured, accurate, details = fn(*args, **kwargs)
    elapsed = time.perf_counter() - start
    return CheckResult(criterion, name, float(measured), tolerance, bool(accurate), elapsed, limit, details)


def random_configs(rng, n, low=0.1, high=10.0):
    """Configs with omega1, omega2, omega0 uniform in [low, high]."""
    w = rng.uniform(low, high, size=(n, 3))
    return [OscillatorConfig(omega1=a, omega2=b, omega0=c) for a, b, c in w]


# 1 ---------------------------------------------------------------------------

def _identities(seed):
    rng = np.random.default_rng(seed)
    configs = random_configs(rng, 1000)
    printed = np.array([lambda_identities(c, printed=True) for c in configs])
    corrected = np.array([lambda_identities(c, printed=False) for c in configs])
    c2_defects = []
    for c in configs:
        T = rng.uniform(0.01, 10.0)
        k = coefficients(c, T)
        c2_defects.append(abs(k.c2 - k.f1 - k.f2) / (abs(k.c2) + abs(k.f1) + abs(k.f2)))
    worst = max(float(printed.max()), float(max(c2_defects)))
    details = {
        "per_identity_max": dict(zip(IDENTITY_NAMES, printed.max(axis=0).tolist())),
        "per_identity_max_corrected_fifth": dict(zip(IDENTITY_NAMES, corrected.max(axis=0).tolist())),
        "c2_minus_f1_plus_f2_max": float(max(c2_defects)),
    }
    return worst, worst < 1e-12, details


def check_identities(seed=0):
    return _timed(1, "mixing-factor identities and c2 = f1 + f2", 1e-12, 1.0, _identities, seed)


# 2 ---------------------------------------------------------------------------

def _flagship():
    c = FLAGSHIP
    df = derive(c)
    t = math.pi / 5
    got = {
        "omega_plus": (df.omega_plus, 5.0),
        "omega_minus": (df.omega_minus, 3.0),
        "gamma": (df.gamma, 1.25),
        "lambda1": (df.lambda1, 1.0),
        "lambda2": (df.lambda2, -1.0),
        "D(pi/5)": (coefficients(c, t).D, 9.6),
        "|A(pi/5)|": (abs(amplitude(c, t)), 5.0 / (4.0 * math.pi)),
    }
    found = caustics(c, 0.0, 2.0 * math.pi * 3.5 / 5.0)
    for k, tk in enumerate(found, start=1):
        got[f"caustic_{k}"] = (tk, 2.0 * math.pi * k / 5.0)
    errs = {k: abs(a - b) / abs(b) for k, (a, b) in got.items()}
    worst = max(errs.values())
    ok = worst < 1e-12 and len(found) == 3
    return worst, ok, {"relative_errors": errs, "caustics_found": found}


def check_flagship():
    return _timed(2, "flagship closed-form fixtures", 1e-12, 1.0, _flagship)


# 3 ---------------------------------------------------------------------------

def _action_consistency(seed, artifact_dir):
    rng = np.random.default_rng(seed)
    report = arbitrate_cross_factor(
        [FLAGSHIP, OscillatorConfig(3.0, 1.0, 2.0), OscillatorConfig(0.7, 1.9, 0.4)], n_points=100, seed=seed
    )
    fit_residual = float(report["residuals"][str(report["cross_factor"])])
    if artifact_dir is not None:
        write_calibration_report(artifact_dir, cross_factor_report=report)
    configs = random_configs(rng, 1000)
    worst_b = worst_l = 0.0
    for c in configs:
        T = rng.uniform(0.05, 0.9) * first_caustic(c)
        ep = Endpoints(*rng.normal(size=4), T)
        s = action_closed(ep, c, report["cross_factor"])
        sb = action_boundary(ep, c)
        sl = oracle.lagrangian_action(ep, c)
        worst_b = max(worst_b, abs(s - sb) / abs(sb))
        worst_l = max(worst_l, abs(s - sl) / abs(sl))
    worst = max(worst_b, worst_l)
    ok = worst < 1e-7 and fit_residual < 1e-8 and report["cross_factor"] == action.CROSS_FACTOR
    details = {
        "cross_factor": report["cross_factor"],
        "k_fit": report["k_fit"],
        "fit_residual": fit_residual,
        "closed_vs_boundary": worst_b,
        "closed_vs_lagrangian": worst_l,
    }
    return worst, ok, details


def check_action(seed=0, artifact_dir=None):
    return _timed(3, "closed action vs boundary route and Lagrangian quadrature", 1e-7, 10.0,
                  _action_consistency, seed, artifact_dir)


# 4 ---------------------------------------------------------------------------

def _mixed_hessian_fd(ep, config, h):
    v = ep.vector
    out = np.empty((2, 2))
    for i, a in enumerate((2, 3)):  # derivative in (x2, y2): rows
        for j, b in enumerate((0, 1)):  # derivative in (x1, y1): columns
            acc = 0.0
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                w = v.copy()
                w[a] += sa * h
                w[b] += sb * h
                acc += sa * sb * action_closed(Endpoints(*w[:4], ep.T), config)
            out[i, j] = acc / (4 * h * h)
    return out


def _vanvleck(seed):
    rng = np.random.default_rng(seed)
    worst_h = worst_a = 0.0
    for c in random_configs(rng, 200):
        T = rng.uniform(0.05, 0.9) * first_caustic(c)
        ep = Endpoints(*rng.normal(size=4), T)
        M = vanvleck_matrix(ep, c)
        fd = _mixed_hessian_fd(ep, c, 1e-4)
        worst_h = max(worst_h, float(np.abs(M - fd).max() / np.abs(M).max()))
        a_det = amplitude(c, T, "determinant")
        for form in ("explicit", "vanvleck"):
            worst_a = max(worst_a, abs(amplitude(c, T, form) - a_det) / abs(a_det))
    ok = worst_h < 1e-6 and worst_a < 1e-12
    return worst_h, ok, {"hessian_vs_fd": worst_h, "amplitude_forms": worst_a}


def check_vanvleck(seed=0):
    return _timed(4, "Van Vleck matrix vs finite differences; amplitude forms", 1e-6, 5.0, _vanvleck, seed)


# 5 ---------------------------------------------------------------------------

def _mehler():
    worst = 0.0
    pts = np.linspace(-1.5, 1.5, 5)
    X1, Y1, X2, Y2 = np.meshgrid(pts, pts, pts, pts, indexing="ij")
    for c in (OscillatorConfig(1.0, 1.0, 0.0), OscillatorConfig(1.3, 0.7, 0.0)):
        for t in (0.3, 1.1, 0.9 * first_caustic(c)):
            g = kernel_values(c, t, X1, Y1, X2, Y2)
            ref = oracle.mehler_kernel(c.omega1, c.m, c.hbar, X1, X2, t) * oracle.mehler_kernel(
                c.omega2, c.m, c.hbar, Y1, Y2, t
            )
            worst = max(worst, float(np.max(np.abs(g - ref) / np.abs(ref))))
    return worst, worst < 1e-10, {"samples_per_case": int(X1.size)}


def check_mehler():
    return _timed(5, "decoupled kernel equals product of 1D Mehler kernels", 1e-10, 1.0, _mehler)


# 6 ---------------------------------------------------------------------------

def _schrodinger(seed):
    rng = np.random.default_rng(seed)
    per = {}
    for c in (FLAGSHIP, OscillatorConfig(3.0, 1.0, 2.0), OscillatorConfig(1.3, 0.7, 0.0)):
        lhs, rhs = [], []
        for _ in range(100):
            t = rng.uniform(0.1, 0.8) * first_caustic(c)
            a, b = oracle.schrodinger_residual(c, t, *rng.uniform(-1, 1, 4), h=1e-3, tau=1e-5)
            lhs.append(a)
            rhs.append(b)
        lhs, rhs = np.array(lhs), np.array(rhs)
        per[json.dumps(c.to_dict())] = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))
    worst = max(per.values())
    return worst, worst < 1e-3, {"per_config": per}


def check_schrodinger(seed=0):
    return _timed(6, "kernel satisfies the Schrodinger equation", 1e-3, 30.0, _schrodinger, seed)


# 7 ---------------------------------------------------------------------------

def _composition(n_grid):
    c = FLAGSHIP
    grid = Grid2D.square(n_grid, 6.0)
    psi = gaussian(grid, 0.5, -0.3, 0.5, 0.0, 0.5, 0.5)
    two = propagate(psi, c, 0.4, max_step=0.2)
    one = propagate(psi, c, 0.4, max_step=0.4)
    field_err = l2_distance(two, one) / math.sqrt(one.norm2)
    # kernel level: one intermediate plane integrated on an n_grid^2 grid
    pts = [(0.3, -0.2, 0.5, 0.1), (-0.8, 0.4, 0.2, 0.9), (1.0, 1.0, -0.5, 0.3)]
    num = den = 0.0
    for p in pts:
        ep = Endpoints(*p, 0.4)
        exact = kernel(ep, c).value
        num += abs(oracle.composed_short_time_kernel(ep, c, 2, n_grid) - exact) ** 2
        den += abs(exact) ** 2
    kernel_err = math.sqrt(num / den)
    worst = max(field_err, kernel_err)
    return worst, worst < 1e-3, {"gaussian_field": field_err, "kernel_points": kernel_err}


def check_composition(n_grid=128):
    return _timed(7, "G(0.2) o G(0.2) = G(0.4) on a grid", 1e-3, 120.0, _composition, n_grid)


# 8 ---------------------------------------------------------------------------

SPECTRUM_CONFIGS = (FLAGSHIP, OscillatorConfig(1.0, 1.0, 0.0), OscillatorConfig(3.0, 1.0, 2.0))


def _spectrum(artifact_dir):
    report = oracle.calibrate_spectrum(SPECTRUM_CONFIGS)
    if artifact_dir is not None:
        write_calibration_report(artifact_dir, spectrum_report=report)
    err = float(report["max_relative_error"][str(KAPPA)])
    printed = max(max(e["printed_relative_error"]) for e in report["configs"])
    ok = report["kappa"] == KAPPA and err < 1e-3
    return err, ok, {
        "kappa": report["kappa"],
        "max_relative_error": report["max_relative_error"],
        "as_printed_max_relative_error": printed,
    }


def check_spectrum(artifact_dir=None):
    return _timed(8, "finite-difference spectrum vs level formula", 1e-3, 120.0, _spectrum, artifact_dir)


# 9 ---------------------------------------------------------------------------

def _evolution():
    c = FLAGSHIP
    grid = Grid2D.square(128, 6.0)
    psi = gaussian(grid, 1.0, 0.5, 1.0, 0.0, 0.5, 0.5)
    t = 0.3
    quad = propagate(psi, c, t)
    ref = oracle.evolve_reference(psi, c, t)
    dist = l2_distance(quad, ref)
    drift = abs(quad.norm2 - psi.norm2)
    obs = observables(quad, hbar=c.hbar)
    cl = centroid_trajectory(psi, c, t)
    centroid = math.hypot(obs["mean_x"] - cl.x, obs["mean_y"] - cl.y) / math.hypot(cl.x, cl.y)
    ok = dist < 1e-3 and drift < 1e-4 and centroid < 1e-4
    details = {"l2_vs_crank_nicolson": dist, "norm_drift": drift, "centroid_relative": centroid,
               "reference_norm_drift": abs(ref.norm2 - psi.norm2)}
    return dist, ok, details


def check_evolution():
    return _timed(9, "quadrature propagation vs Crank-Nicolson", 1e-3, 180.0, _evolution)


# 10 --------------------------------------------------------------------------

def _cat():
    c = FLAGSHIP
    df = derive(c)
    # Omega1 / Omega2 = 4 / 1: both modes return after 2 pi q / Omega2 with q = 1
    revival = 2 * math.pi / df.Omega2
    grid = Grid2D.square(128, 6.0)
    psi = cat_state(grid, CatState1DSpec(a0=3.0, sigma2=0.125), sigma_y=math.sqrt(0.125))
    norm_err = abs(psi.norm2 - 1.0)
    back = propagate(psi, c, revival)
    auto = observables(back, reference=psi)["autocorrelation"]
    ok = norm_err < 1e-10 and auto >= 0.999
    return 1.0 - auto, ok, {"norm_error": norm_err, "autocorrelation": auto, "revival_time": revival}


def check_cat():
    return _timed(10, "cat-state norm and revival autocorrelation (1 - |<psi0|psiT>|)", 1e-3, 180.0, _cat)


# 11 --------------------------------------------------------------------------

def _gauge(seed):
    rng = np.random.default_rng(seed)
    worst_mod = worst_phase = worst_iso = 0.0
    for c in random_configs(rng, 200):
        T = rng.uniform(0.05, 0.9) * first_caustic(c)
        ep = Endpoints(*rng.normal(size=4), T)
        sym = kernel(ep, c, Gauge.SYMMETRIC).value
        wtd = kernel(ep, c, Gauge.WEIGHTED).value
        ratio = wtd / sym
        expected = gauge_phase(ep.x2, ep.y2, c) - gauge_phase(ep.x1, ep.y1, c)
        worst_mod = max(worst_mod, abs(abs(ratio) - 1.0))
        worst_phase = max(worst_phase, abs(ratio - complex(math.cos(expected), math.sin(expected))))
        iso = OscillatorConfig(c.omega1, c.omega1, c.omega0)
        T = rng.uniform(0.05, 0.9) * first_caustic(iso)
        ep = Endpoints(*rng.normal(size=4), T)
        a, b = kernel(ep, iso, Gauge.SYMMETRIC).value, kernel(ep, iso, Gauge.WEIGHTED).value
        worst_iso = max(worst_iso, abs(a - b) / abs(a))
    worst = max(worst_mod, worst_phase, worst_iso)
    return worst, worst < 1e-12, {"modulus": worst_mod, "phase": worst_phase, "isotropic": worst_iso}


def check_gauge(seed=0):
    return _timed(11, "weighted vs symmetric gauge kernels", 1e-12, 1.0, _gauge, seed)


# ---------------------------------------------------------------------------

SUITES = {
    "identities": (1, 2),
    "action": (3, 4),
    "kernel": (5, 6, 7, 11),
    "spectrum": (8,),
    "evolution": (9, 10),
}


def run_checks(criteria=None, seed=0, artifact_dir=None):
    """Run the selected criteria (default all) and return their results in order."""
    table = {
        1: lambda: check_identities(seed),
        2: check_flagship,
        3: lambda: check_action(seed, artifact_dir),
        4: lambda: check_vanvleck(seed),
        5: check_mehler,
        6: lambda: check_schrodinger(seed),
        7: check_composition,
        8: lambda: check_spectrum(artifact_dir),
        9: check_evolution,
        10: check_cat,
        11: lambda: check_gauge(seed),
    }
    chosen = sorted(table) if criteria is None else sorted(criteria)
    return [table[k]() for k in chosen]


def write_calibration_report(directory, cross_factor_report=None, spectrum_report=None) -> Path:
    """Merge calibration results into ``calibration.json`` inside ``directory``."""
    path = Path(directory) / "calibration.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    data = json.loads(path.read_text()) if path.exists() else {}
    now = _dt.datetime.now(_dt.timezone.utc).isoformat()
    data.setdefault("timestamps", {})
    if cross_factor_report is not None:
        data["cross_factor"] = cross_factor_report["cross_factor"]
        data.setdefault("residuals", {})["cross_factor"] = cross_factor_report
        data["timestamps"]["cross_factor"] = now
    if spectrum_report is not None:
        data["kappa"] = spectrum_report["kappa"]
        data.setdefault("residuals", {})["spectrum"] = {
            "max_relative_error": spectrum_report["max_relative_error"],
            "per_config": spectrum_report["configs"],
        }
        data["configs"] = [e["config"] for e in spectrum_report["configs"]]
        data["timestamps"]["kappa"] = now
    path.write_text(json.dumps(data, indent=2))
    return path
