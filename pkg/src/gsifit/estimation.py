"""Maximum-likelihood fitting of the personalization exponent rho.

Ratings are modelled as rating_i = clip(margin_i ** rho) + Normal(0, sigma^2),
so the log-likelihood is a scaled negative sum of squared residuals. Three
fitters share that objective: a 1-D quasi-Newton search in log(rho), the
fixed-step gradient ascent rho <- rho + eta * dl/drho, and a brute-force grid
used as an independent oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from .safety import (RHO_MAX, RHO_MIN, DEFAULT_PARAMS, SafetyParams, TrajectorySample,
                     ValidationError, gsi_from_margin, gsi_grad_rho, safety_margin)


class UnidentifiableRho(ValueError):
    """Every observation sits in a clipped region, so l(rho) is flat."""


class Method(str, enum.Enum):
    QUASI_NEWTON = "QuasiNewton"
    FIXED_STEP = "FixedStep"
    GRID = "Grid"


class Aggregation(str, enum.Enum):
    WORST_CASE = "WorstCase"
    MEAN = "Mean"


@dataclass(frozen=True)
class Observation:
    margin: float
    rating: float
    segment_id: Hashable = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.margin):
            raise ValidationError(f"margin must be finite, got {self.margin}")
        if not (0.0 <= self.rating <= 1.0):
            raise ValidationError(f"rating must lie in [0, 1], got {self.rating}")


@dataclass(frozen=True)
class LikelihoodConfig:
    sigma: float = 1.0
    eta: float = 0.01
    max_iters: int = 500
    tol: float = 1e-6
    rho_init: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be > 0, got {self.sigma}")
        if not self.eta > 0:
            raise ValidationError(f"eta must be > 0, got {self.eta}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValidationError(f"max_iters must be a non-negative integer, got {self.max_iters}")
        if not (RHO_MIN <= self.rho_init <= RHO_MAX):
            raise ValidationError(f"rho_init must lie in [{RHO_MIN}, {RHO_MAX}], got {self.rho_init}")


@dataclass
class EstimationResult:
    rho_hat: float
    log_lik: float
    n_obs: int
    iterations: int
    converged: bool
    method: Method
    sse: float
    at_bound: bool = False
    diagnostics: dict[str, Any] = field(default_factory=dict)


def normalize_likert(k: int, scale_points: int = 5) -> float:
    """Map a 1..scale_points Likert answer onto [0, 1]."""
    if scale_points not in (5, 7):
        raise ValidationError(f"scale_points must be 5 or 7, got {scale_points}")
    if isinstance(k, bool) or int(k) != k or not 1 <= k <= scale_points:
        raise ValidationError(f"Likert value must be an integer in [1, {scale_points}], got {k}")
    return (int(k) - 1) / (scale_points - 1)


def _arrays(obs: Sequence[Observation]) -> tuple[np.ndarray, np.ndarray]:
    if len(obs) == 0:
        raise ValidationError("at least one observation is required")
    margins = np.fromiter((o.margin for o in obs), dtype=float, count=len(obs))
    ratings = np.fromiter((o.rating for o in obs), dtype=float, count=len(obs))
    return margins, ratings


def _sse(rho: float, margins: np.ndarray, ratings: np.ndarray) -> float:
    resid = ratings - gsi_from_margin(margins, rho)
    return float(resid @ resid)


def _grad(rho: float, margins: np.ndarray, ratings: np.ndarray, sigma: float) -> float:
    resid = ratings - gsi_from_margin(margins, rho)
    return float(resid @ gsi_grad_rho(margins, rho)) / sigma**2


def log_likelihood(rho: float, obs: Sequence[Observation],
                   cfg: LikelihoodConfig = LikelihoodConfig()) -> float:
    margins, ratings = _arrays(obs)
    return -_sse(rho, margins, ratings) / (2.0 * cfg.sigma**2)


def log_likelihood_grad(rho: float, obs: Sequence[Observation],
                        cfg: LikelihoodConfig = LikelihoodConfig()) -> float:
    margins, ratings = _arrays(obs)
    return _grad(rho, margins, ratings, cfg.sigma)


def _check_identifiable(margins: np.ndarray) -> None:
    if not np.any((margins > 0) & (margins < 1)):
        raise UnidentifiableRho(
            "no observation has a margin strictly inside (0, 1); the likelihood is constant in rho")


def _result(rho: float, margins: np.ndarray, ratings: np.ndarray, cfg: LikelihoodConfig,
            iterations: int, converged: bool, method: Method, **diag: Any) -> EstimationResult:
    sse = _sse(rho, margins, ratings)
    at_bound = math.isclose(rho, RHO_MIN, rel_tol=1e-9) or math.isclose(rho, RHO_MAX, rel_tol=1e-9)
    return EstimationResult(rho_hat=float(rho), log_lik=-sse / (2.0 * cfg.sigma**2),
                            n_obs=len(margins), iterations=iterations, converged=converged,
                            method=method, sse=sse, at_bound=at_bound, diagnostics=diag)


_XI_LO = math.log(RHO_MIN)
_XI_HI = math.log(RHO_MAX)


def fit_rho_quasi_newton(obs: Sequence[Observation],
                         cfg: LikelihoodConfig = LikelihoodConfig()) -> EstimationResult:
    """Maximize l(rho) by 1-D BFGS over xi = ln(rho) with box projection.

    The inverse-Hessian estimate is the scalar secant s/y; a backtracking
    line search enforces the Armijo condition on f(xi) = -l(exp(xi)).
    """
    margins, ratings = _arrays(obs)
    _check_identifiable(margins)
    sigma2 = cfg.sigma**2

    def f(xi: float) -> float:
        return _sse(math.exp(xi), margins, ratings) / (2.0 * sigma2)

    def g(xi: float) -> float:
        rho = math.exp(xi)
        return -_grad(rho, margins, ratings, cfg.sigma) * rho

    xi = min(max(math.log(cfg.rho_init), _XI_LO), _XI_HI)
    fx, gx = f(xi), g(xi)
    h_inv = 1.0
    converged = False
    n_evals = 1
    it = 0
    for it in range(1, cfg.max_iters + 1):
        # projected gradient vanishes at a bound when the slope points outward
        if (abs(gx) < cfg.tol or (xi <= _XI_LO and gx > 0) or (xi >= _XI_HI and gx < 0)):
            converged = True
            it -= 1
            break
        step = -h_inv * gx
        alpha = 1.0
        while True:
            xi_new = min(max(xi + alpha * step, _XI_LO), _XI_HI)
            f_new = f(xi_new)
            n_evals += 1
            # Armijo on the projected step
            if f_new <= fx + 1e-4 * gx * (xi_new - xi) or alpha < 1e-12:
                break
            alpha *= 0.5
        g_new = g(xi_new)
        s, y = xi_new - xi, g_new - gx
        rho_step = abs(math.exp(xi_new) - math.exp(xi))
        xi, fx, gx = xi_new, f_new, g_new
        if s * y > 1e-300:
            h_inv = s / y
        else:
            h_inv = 1.0
        if rho_step < cfg.tol:
            converged = True
            break
    rho = math.exp(xi)
    rho = min(max(rho, RHO_MIN), RHO_MAX)
    return _result(rho, margins, ratings, cfg, it, converged, Method.QUASI_NEWTON,
                   grad=-gx / rho, f_evals=n_evals)


def fit_rho_fixed_step(obs: Sequence[Observation],
                       cfg: LikelihoodConfig = LikelihoodConfig()) -> EstimationResult:
    """Gradient ascent rho <- rho + eta * dl/drho, projected onto the rho bounds."""
    margins, ratings = _arrays(obs)
    _check_identifiable(margins)
    rho = cfg.rho_init
    converged = False
    moves = 0
    for _ in range(cfg.max_iters):
        new = rho + cfg.eta * _grad(rho, margins, ratings, cfg.sigma)
        new = min(max(new, RHO_MIN), RHO_MAX)
        delta = abs(new - rho)
        if delta < cfg.tol:
            converged = True
            rho = new
            break
        rho = new
        moves += 1
    return _result(rho, margins, ratings, cfg, moves, converged, Method.FIXED_STEP)


def grid_points(grid_step: float) -> np.ndarray:
    if not grid_step > 0:
        raise ValidationError(f"grid_step must be > 0, got {grid_step}")
    n = int(math.floor((RHO_MAX - RHO_MIN) / grid_step + 1e-9)) + 1
    return RHO_MIN + grid_step * np.arange(n)


def fit_rho_grid(obs: Sequence[Observation], cfg: LikelihoodConfig = LikelihoodConfig(),
                 grid_step: float = 1e-3) -> EstimationResult:
    """Exhaustive argmax of l over the rho bounds; ties resolve to the smallest rho.

    A flat likelihood returns the first grid point with converged=False
    instead of raising, so the oracle can be run on any dataset.
    """
    margins, ratings = _arrays(obs)
    rhos = grid_points(grid_step)
    clipped = np.clip(margins, 0.0, 1.0)
    interior = clipped > 0
    safe = np.where(interior, clipped, 1.0)
    # (n_grid, n_obs) table of scores
    scores = np.where(interior, np.exp(np.outer(rhos, np.log(safe))), 0.0)
    resid = ratings[None, :] - scores
    sse = np.einsum("ij,ij->i", resid, resid)
    best = int(np.argmin(sse))
    flat = bool(np.all(sse == sse[0]))
    res = _result(float(rhos[best]), margins, ratings, cfg, len(rhos), not flat, Method.GRID,
                  grid_step=grid_step)
    return res


def fit_rho(obs: Sequence[Observation], cfg: LikelihoodConfig = LikelihoodConfig(),
            method: Method = Method.QUASI_NEWTON, grid_step: float = 1e-3) -> EstimationResult:
    method = Method(method)
    if method is Method.QUASI_NEWTON:
        return fit_rho_quasi_newton(obs, cfg)
    if method is Method.FIXED_STEP:
        return fit_rho_fixed_step(obs, cfg)
    _check_identifiable(_arrays(obs)[0])
    return fit_rho_grid(obs, cfg, grid_step)


def segment_margin(samples: Iterable[TrajectorySample],
                   aggregation: Aggregation = Aggregation.WORST_CASE,
                   params: SafetyParams = DEFAULT_PARAMS) -> float:
    samples = list(samples)
    if not samples:
        raise ValidationError("trajectory segment is empty")
    d = np.array([s.d for s in samples], dtype=float)
    v = np.array([s.v for s in samples], dtype=float)
    margins = np.atleast_1d(safety_margin(d, v, params))
    if Aggregation(aggregation) is Aggregation.WORST_CASE:
        return float(margins.min())
    return float(margins.mean())


def build_observation(samples: Iterable[TrajectorySample], rating: float,
                      aggregation: Aggregation = Aggregation.WORST_CASE,
                      params: SafetyParams = DEFAULT_PARAMS,
                      segment_id: Hashable = None) -> Observation:
    """Pair one normalized rating with the aggregated margin of its segment."""
    return Observation(segment_margin(samples, aggregation, params), float(rating), segment_id)
