"""Synthetic MEDEVAC-style approach episodes and participant cohorts.

The robot drives a 1-D approach toward a participant along a trapezoidal
speed profile. Each participant carries a ground-truth exponent and answers
one perceived-safety item per trial by inverting the rating noise model.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .estimation import Aggregation, Observation, build_observation
from .safety import (DEFAULT_PARAMS, RHO_MAX, RHO_MIN, SafetyParams, TrajectorySample,
                     ValidationError, gsi_from_margin)

LIKERT_GRID = np.array([0.0, 0.25, 0.5, 0.75, 1.0])


class OperatingMode(str, enum.Enum):
    AUTONOMOUS_SLOW = "AS"
    AUTONOMOUS_FAST = "AF"
    TELEOP = "TO"

    @property
    def speed(self) -> float:
        return MODE_SPEEDS[self]


MODE_SPEEDS = {
    OperatingMode.AUTONOMOUS_SLOW: 0.3,
    OperatingMode.AUTONOMOUS_FAST: 0.75,
    OperatingMode.TELEOP: 0.5,
}


class Role(str, enum.Enum):
    BYS = "BYS"
    CAS = "CAS"


# approach item each role answers after a trial
Q3_ITEMS = {Role.CAS: "Q3_approach_B_to_C", Role.BYS: "Q3_motion_C_to_B"}

# closest approach per role; inverts the reported mean index at the reported
# mean exponent, margin = gsi ** (1 / rho), then d = d_min + margin * span
ROLE_STANDOFF = {Role.CAS: 2.31, Role.BYS: 3.50}

# reported mean +- SE, converted to SD with sqrt(n)
DEFAULT_RHO_DISTS = {
    Role.CAS: (0.29, 0.05 * math.sqrt(31)),
    Role.BYS: (0.97, 0.17 * math.sqrt(30)),
}


@dataclass(frozen=True)
class EpisodeSpec:
    mode: OperatingMode = OperatingMode.AUTONOMOUS_SLOW
    route_length: float = 11.0
    dt: float = 0.1
    standoff: float = 0.5
    speed_jitter: Optional[float] = None
    accel: float = 0.25
    speed: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", OperatingMode(self.mode))
        if self.speed_jitter is None:
            object.__setattr__(self, "speed_jitter",
                               0.10 if self.mode is OperatingMode.TELEOP else 0.02)
        if self.speed is None:
            object.__setattr__(self, "speed", self.mode.speed)
        if not (self.route_length > self.standoff >= 0):
            raise ValidationError(
                f"need route_length > standoff >= 0, got {self.route_length}, {self.standoff}")
        if not self.dt > 0:
            raise ValidationError(f"dt must be > 0, got {self.dt}")
        if not self.speed > 0 or not self.accel > 0:
            raise ValidationError("speed and accel must be > 0")
        if self.speed_jitter < 0:
            raise ValidationError(f"speed_jitter must be >= 0, got {self.speed_jitter}")


def generate_episode(spec: EpisodeSpec, seed) -> list[TrajectorySample]:
    """Sample an approach from route_length down to standoff.

    Commanded speed is min(cruise * jitter, accel * t, sqrt(2 * accel * remaining)),
    so jitter perturbs the cruise phase only and the braking curve is never
    exceeded. Jitter factors are clipped to [0.5, 1.5].
    """
    rng = np.random.default_rng(seed)
    total = spec.route_length - spec.standoff
    travelled = 0.0
    t = 0.0
    samples = [TrajectorySample(0.0, spec.route_length, 0.0)]
    # generous cap; the profile always terminates well before this
    max_steps = int(math.ceil(4 * total / (0.5 * spec.speed * spec.dt))) + 10_000
    for _ in range(max_steps):
        remaining = total - travelled
        if remaining <= 1e-12:
            break
        jitter = float(np.clip(1.0 + spec.speed_jitter * rng.standard_normal(), 0.5, 1.5))
        cmd = min(spec.speed * jitter, spec.accel * (t + spec.dt),
                  math.sqrt(2.0 * spec.accel * remaining))
        # floor keeps the tail from creeping asymptotically toward the standoff
        cmd = max(cmd, min(remaining / spec.dt, 0.05 * spec.speed))
        step = min(cmd * spec.dt, remaining)
        done = step >= remaining
        travelled = total if done else travelled + step
        t += spec.dt
        d = spec.standoff if done else spec.route_length - travelled
        samples.append(TrajectorySample(round(t, 9), d, step / spec.dt))
    return samples


@dataclass(frozen=True)
class SyntheticParticipant:
    id: str
    role: Role
    rho_star: float
    rating_noise: float = 0.05
    quantize: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "role", Role(self.role))
        if not (RHO_MIN <= self.rho_star <= RHO_MAX):
            raise ValidationError(f"rho_star outside [{RHO_MIN}, {RHO_MAX}]: {self.rho_star}")
        if self.rating_noise < 0:
            raise ValidationError(f"rating_noise must be >= 0, got {self.rating_noise}")


def noisy_rating(margin: float, rho: float, noise: float, quantize: bool,
                 rng: np.random.Generator) -> float:
    r = gsi_from_margin(margin, rho)
    if noise > 0:
        r += noise * rng.standard_normal()
    r = min(max(r, 0.0), 1.0)
    if quantize:
        r = float(LIKERT_GRID[np.argmin(np.abs(LIKERT_GRID - r))])
    return r


def synth_rating(episode: Sequence[TrajectorySample], participant: SyntheticParticipant,
                 agg: Aggregation = Aggregation.WORST_CASE, seed=None,
                 params: SafetyParams = DEFAULT_PARAMS, segment_id=None) -> Observation:
    obs = build_observation(episode, 0.0, agg, params, segment_id)
    rng = np.random.default_rng(seed)
    rating = noisy_rating(obs.margin, participant.rho_star, participant.rating_noise,
                          participant.quantize, rng)
    return Observation(obs.margin, rating, segment_id)


def synthetic_observations(rho_star: float, n_obs: int, noise: float = 0.0,
                           quantize: bool = False, seed=None,
                           margin_range: tuple[float, float] = (0.1, 0.9)) -> list[Observation]:
    """Observations with margins drawn uniformly from margin_range."""
    rng = np.random.default_rng(seed)
    margins = rng.uniform(*margin_range, size=n_obs)
    return [Observation(float(m), noisy_rating(float(m), rho_star, noise, quantize, rng), i)
            for i, m in enumerate(margins)]


def truncated_normal(mean: float, sd: float, rng: np.random.Generator,
                     lo: float = RHO_MIN, hi: float = RHO_MAX) -> float:
    if sd <= 0:
        return min(max(mean, lo), hi)
    for _ in range(100_000):
        x = mean + sd * rng.standard_normal()
        if lo <= x <= hi:
            return float(x)
    raise ValidationError(f"truncated normal ({mean}, {sd}) has negligible mass in [{lo}, {hi}]")


@dataclass
class Trial:
    participant_id: str
    role: Role
    mode: OperatingMode
    trial: int
    order: int
    samples: list[TrajectorySample]
    item: str
    observation: Observation


@dataclass
class CohortDataset:
    participants: list[SyntheticParticipant]
    trials: list[Trial]
    seed: int
    params: SafetyParams = DEFAULT_PARAMS
    aggregation: Aggregation = Aggregation.WORST_CASE
    meta: dict = field(default_factory=dict)

    def trials_for(self, pid: str) -> list[Trial]:
        return [t for t in self.trials if t.participant_id == pid]


def _participant_trials(p: SyntheticParticipant, index: int, seed: int,
                        standoff: float, agg: Aggregation, params: SafetyParams) -> list[Trial]:
    rng = np.random.default_rng([seed, index])
    modes = [m for m in OperatingMode for _ in range(2)]
    order = rng.permutation(len(modes))
    seen: dict[OperatingMode, int] = {}
    trials = []
    for pos, k in enumerate(order, start=1):
        mode = modes[int(k)]
        seen[mode] = seen.get(mode, 0) + 1
        ep_seed, rating_seed = rng.integers(0, 2**63, size=2)
        samples = generate_episode(EpisodeSpec(mode=mode, standoff=standoff), int(ep_seed))
        seg = (p.id, mode.value, seen[mode])
        obs = synth_rating(samples, p, agg, int(rating_seed), params, seg)
        trials.append(Trial(p.id, p.role, mode, seen[mode], pos, samples, Q3_ITEMS[p.role], obs))
    return trials


def generate_cohort(n_bys: int = 30, n_cas: int = 31,
                    rho_dists: Optional[Mapping[Role, tuple[float, float]]] = None,
                    seed: int = 0, rating_noise: float = 0.05, quantize: bool = False,
                    standoffs: Optional[Mapping[Role, float]] = None,
                    agg: Aggregation = Aggregation.WORST_CASE,
                    params: SafetyParams = DEFAULT_PARAMS) -> CohortDataset:
    """Draw a cohort: CAS participants first (C001...), then BYS (B001...).

    Each participant uses its own RNG stream keyed on (seed, index), so the
    output does not depend on generation order.
    """
    if n_bys < 1 or n_cas < 1:
        raise ValidationError(f"participant counts must be >= 1, got n_bys={n_bys}, n_cas={n_cas}")
    dists = {Role(k): v for k, v in (rho_dists or DEFAULT_RHO_DISTS).items()}
    standoffs = {Role(k): v for k, v in (standoffs or ROLE_STANDOFF).items()}
    people = [(Role.CAS, f"C{i:03d}") for i in range(1, n_cas + 1)]
    people += [(Role.BYS, f"B{i:03d}") for i in range(1, n_bys + 1)]
    participants, trials = [], []
    for index, (role, pid) in enumerate(people):
        rng = np.random.default_rng([seed, index, 0])
        mean, sd = dists[role]
        p = SyntheticParticipant(pid, role, truncated_normal(mean, sd, rng), rating_noise, quantize)
        participants.append(p)
        trials.extend(_participant_trials(p, index, seed, standoffs[role], agg, params))
    return CohortDataset(participants, trials, seed, params, agg,
                         meta={"rating_noise": rating_noise, "quantize": quantize,
                               "standoffs": {r.value: s for r, s in standoffs.items()},
                               "rho_dists": {r.value: list(v) for r, v in dists.items()}})
