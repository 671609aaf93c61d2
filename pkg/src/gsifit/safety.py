"""Parameterized generalized safety index (GSI) and proxemics zones.

All functions accept scalars or numpy arrays and broadcast; scalar inputs
return Python floats.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

RHO_MIN = 0.01
RHO_MAX = 10.0


class ValidationError(ValueError):
    """Raised for inputs violating a documented precondition."""


class ProxemicsZone(str, enum.Enum):
    INTIMATE = "Intimate"
    PERSONAL = "Personal"
    SOCIAL = "Social"
    PUBLIC = "Public"


_ZONES = (ProxemicsZone.INTIMATE, ProxemicsZone.PERSONAL,
          ProxemicsZone.SOCIAL, ProxemicsZone.PUBLIC)


@dataclass(frozen=True)
class SafetyParams:
    """Physical constants of the safety index.

    a_max is the robot's braking limit in m/s^2. d_min/d_max bound the
    normalized margin; zone_edges are the intimate/personal,
    personal/social and social/public boundaries in metres.
    """

    a_max: float = 0.5
    d_min: float = 0.46
    d_max: float = 3.7
    zone_edges: tuple[float, float, float] = (0.46, 1.2, 3.7)

    def __post_init__(self) -> None:
        object.__setattr__(self, "zone_edges", tuple(float(e) for e in self.zone_edges))
        if not np.isfinite(self.a_max) or self.a_max <= 0:
            raise ValidationError(f"a_max must be > 0, got {self.a_max}")
        if not (0 < self.d_min < self.d_max) or not np.isfinite(self.d_max):
            raise ValidationError(
                f"need 0 < d_min < d_max, got d_min={self.d_min}, d_max={self.d_max}")
        edges = self.zone_edges
        if len(edges) != 3 or not all(a < b for a, b in zip((0.0,) + edges, edges)):
            raise ValidationError(f"zone_edges must be 3 strictly increasing positive values, got {edges}")

    @property
    def span(self) -> float:
        return self.d_max - self.d_min


DEFAULT_PARAMS = SafetyParams()


def check_rho(rho):
    """Validates a scalar or an array of exponents; scalars come back as float."""
    r = np.asarray(rho, dtype=float)
    ok = (r >= RHO_MIN) & (r <= RHO_MAX)  # NaN fails both comparisons
    if not np.all(ok):
        bad = r if r.ndim == 0 else r[~ok][0]
        raise ValidationError(f"rho must lie in [{RHO_MIN}, {RHO_MAX}], got {bad}")
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class TrajectorySample:
    """One reading of a human relative to the robot.

    v is positive when the human and robot are closing. bearing is kept for
    bookkeeping only; the index does not use it.
    """

    t: float
    d: float
    v: float
    bearing: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.d >= 0):
            raise ValidationError(f"distance must be >= 0, got {self.d}")


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def stopping_distance(v, params: SafetyParams = DEFAULT_PARAMS):
    """Signed braking distance s(v) * v^2 / (2 a_max), with s(0) = +1."""
    v = np.asarray(v, dtype=float)
    sign = np.where(v >= 0, 1.0, -1.0)
    return _out(sign * v * v / (2.0 * params.a_max))


def safety_margin(d, v, params: SafetyParams = DEFAULT_PARAMS):
    """Normalized distance surplus; unclipped, so it may be < 0 or > 1."""
    d = np.asarray(d, dtype=float)
    stop = np.asarray(stopping_distance(v, params))
    return _out((d - (stop + params.d_min)) / params.span)


def gsi_from_margin(margin, rho):
    """clip(margin ** rho, 0, 1) with the margin clamped at 0 before the power."""
    m = np.asarray(margin, dtype=float)
    base = np.clip(m, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        score = np.where(base > 0, np.power(np.where(base > 0, base, 1.0), rho), 0.0)
    return _out(np.clip(score, 0.0, 1.0))


def gsi(d, v, rho, params: SafetyParams = DEFAULT_PARAMS):
    """Safety score in [0, 1]; 0 means the human is inside the danger envelope."""
    check_rho(rho)
    return gsi_from_margin(safety_margin(d, v, params), rho)


def gsi_grad_rho(margin, rho: float):
    """d/d(rho) of the clipped score: m^rho * ln m on (0, 1), zero elsewhere."""
    m = np.asarray(margin, dtype=float)
    interior = (m > 0) & (m < 1)
    safe = np.where(interior, m, 0.5)
    return _out(np.where(interior, np.power(safe, rho) * np.log(safe), 0.0))


def classify_zone(d: float, params: SafetyParams = DEFAULT_PARAMS) -> ProxemicsZone:
    """Zone whose half-open interval [lo, hi) contains d."""
    if not (d >= 0):
        raise ValidationError(f"distance must be >= 0, got {d}")
    idx = int(np.searchsorted(params.zone_edges, d, side="right"))
    return _ZONES[idx]


def gsi_curve(rho: float, v: float, params: SafetyParams = DEFAULT_PARAMS,
              d_lo: Optional[float] = None, d_hi: Optional[float] = None,
              n_points: int = 101) -> list[tuple[float, float]]:
    """Uniformly sampled (d, gsi) pairs; defaults to d in [d_min, d_max]."""
    d_lo = params.d_min if d_lo is None else float(d_lo)
    d_hi = params.d_max if d_hi is None else float(d_hi)
    if not d_lo < d_hi:
        raise ValidationError(f"need d_lo < d_hi, got [{d_lo}, {d_hi}]")
    if n_points < 2:
        raise ValidationError(f"n_points must be >= 2, got {n_points}")
    ds = np.linspace(d_lo, d_hi, n_points)
    scores = np.asarray(gsi(ds, v, rho, params))
    return [(float(a), float(b)) for a, b in zip(ds, scores)]
