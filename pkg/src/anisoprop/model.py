"""Physical configuration and the derived frequency constants.

Everything downstream reads its frequencies from :func:`derive`, which is
cached on the (frozen, hashable) configuration.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DecoupledRegimeError

# below this ratio omega0/max(omega1, omega2) the Lambda factors ~ 1/omega0 are
# dominated by roundoff; such configs are treated as two independent oscillators
DECOUPLING_THRESHOLD = 1e-8


@dataclass(frozen=True)
class OscillatorConfig:
    """Charged particle in the plane with an anisotropic harmonic trap and a normal field.

    Natural units: ``m`` and ``hbar`` default to 1 and the field enters only
    through the cyclotron frequency ``omega0 = e B0 / (m c)``.
    """

    omega1: float
    omega2: float
    omega0: float = 0.0
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("omega1", "omega2", "omega0", "m", "hbar"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValueError("omega1 and omega2 must be strictly positive")
        if self.omega0 < 0:
            raise ValueError("omega0 must be non-negative")
        if self.m <= 0 or self.hbar <= 0:
            raise ValueError("m and hbar must be strictly positive")

    @property
    def decoupled(self) -> bool:
        return self.omega0 < DECOUPLING_THRESHOLD * max(self.omega1, self.omega2)

    @classmethod
    def from_dict(cls, data: dict) -> "OscillatorConfig":
        unknown = set(data) - {"m", "omega1", "omega2", "omega0", "hbar"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            omega1=data["omega1"],
            omega2=data["omega2"],
            omega0=data.get("omega0", 0.0),
            m=data.get("m", 1.0),
            hbar=data.get("hbar", 1.0),
        )

    @classmethod
    def from_json(cls, path) -> "OscillatorConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def omega0_from_field(charge: float, field: float, mass: float, c: float = 1.0) -> float:
    """Cyclotron frequency |q| B0 / (m c) (Gaussian units; pass ``c=1`` for SI)."""
    if mass <= 0:
        raise ValueError("mass must be positive")
    return abs(charge * field) / (mass * c)


@dataclass(frozen=True)
class DerivedFrequencies:
    """Combined frequencies, scaled-form constants and the mode mixing factors.

    ``lambda1``/``lambda2`` are ``None`` in the decoupled regime, where they
    are undefined (both carry ``1/omega0``).
    """

    omega_plus: float
    omega_minus: float
    Omega1: float
    Omega2: float
    gamma: float
    b: float
    c: float
    lambda1: float | None
    lambda2: float | None
    decoupled: bool

    @property
    def lambdas_defined(self) -> bool:
        return self.lambda1 is not None


def _small_root(s, prod):
    # root r >= 0 of r (r + s) = prod (prod >= 0), evaluated without cancellation
    disc = math.sqrt(s * s + 4.0 * prod)
    if s >= 0:
        return 2.0 * prod / (s + disc) if prod > 0 else 0.0
    return 0.5 * (disc - s)


@lru_cache(maxsize=256)
def derive(config: OscillatorConfig) -> DerivedFrequencies:
    w1, w2, w0 = config.omega1, config.omega2, config.omega0
    op = math.hypot(w0, w1 + w2)
    om = math.hypot(w0, w1 - w2)
    big = 0.5 * (op + om)
    # op - om = 4 w1 w2 / (op + om): avoids cancellation when op ~ om
    small = w1 * w2 / big
    gamma = op / (w1 + w2)
    b = w2 / w1
    c = 2.0 * w0 * math.sqrt(b) / op
    if config.decoupled:
        return DerivedFrequencies(op, om, big, small, gamma, b, c, None, None, True)

    # Lambda_j = (Omega_j^2 - w1^2) / (w0 Omega_j).  The numerators follow from
    # (Omega^2 - w1^2)(Omega^2 - w2^2) = w0^2 Omega^2 and are solved as
    # quadratics in their stable branch.
    s = w1 * w1 - w2 * w2
    p = _small_root(s, (big * w0) ** 2)  # Omega1^2 - w1^2 > 0
    u = _small_root(-s, (small * w0) ** 2)  # w1^2 - Omega2^2 > 0
    lam1 = p / (w0 * big)
    lam2 = -u / (w0 * small)
    return DerivedFrequencies(op, om, big, small, gamma, b, c, lam1, lam2, False)


def lambdas_as_printed(config: OscillatorConfig) -> tuple[float, float]:
    """Mixing factors evaluated literally as ((O+ +- O-)^2 - 4 w1^2) / (2 w0 (O+ +- O-))."""
    if config.omega0 == 0:
        raise DecoupledRegimeError("Lambda factors are undefined for omega0 = 0")
    op = math.hypot(config.omega0, config.omega1 + config.omega2)
    om = math.hypot(config.omega0, config.omega1 - config.omega2)
    w1, w0 = config.omega1, config.omega0
    lam1 = ((op + om) ** 2 - 4 * w1**2) / (2 * w0 * (op + om))
    lam2 = ((op - om) ** 2 - 4 * w1**2) / (2 * w0 * (op - om))
    return lam1, lam2


IDENTITY_NAMES = (
    "L1+L2",
    "L1-L2",
    "L1*O1+L2*O2",
    "L1*O1-L2*O2",
    "L1*O2+L2*O1",
    "L1*O2-L2*O1",
)


def lambda_identities(config: OscillatorConfig, printed: bool = True) -> np.ndarray:
    """Relative residuals of the six sum/difference relations among the mixing factors.

    Each residual is ``|lhs - rhs| / (|term_a| + |term_b|)`` where ``lhs =
    term_a +- term_b``, so cancellation in the left-hand side does not inflate it.

    With ``printed=True`` the fifth relation uses the right-hand side
    ``-(w0^2 + w1^2 - w2^2) / w0`` exactly as it is usually quoted; it only
    holds for ``w1 == w2``.  ``printed=False`` uses the correct
    ``-(w1/w2)(w0^2 + w1^2 - w2^2) / w0``.
    """
    df = derive(config)
    if not df.lambdas_defined:
        raise DecoupledRegimeError("Lambda identities need omega0 > 0")
    w1, w2, w0 = config.omega1, config.omega2, config.omega0
    l1, l2, o1, o2 = df.lambda1, df.lambda2, df.Omega1, df.Omega2
    op, om = df.omega_plus, df.omega_minus
    d = w1 * w1 - w2 * w2
    fifth = -(w0 * w0 + d) / w0
    if not printed:
        fifth *= w1 / w2
    pairs = (
        (l1, l2, -op * (w1 - w2) / (w0 * w2)),
        (l1, -l2, om * (w1 + w2) / (w0 * w2)),
        (l1 * o1, l2 * o2, (w0 * w0 - d) / w0),
        (l1 * o1, -l2 * o2, op * om / w0),
        (l1 * o2, l2 * o1, fifth),
        (l1 * o2, -l2 * o1, (w1 / w2) * op * om / w0),
    )
    return np.array([abs(a + b - rhs) / (abs(a) + abs(b)) for a, b, rhs in pairs])
