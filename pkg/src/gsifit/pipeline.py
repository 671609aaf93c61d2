"""The score / fit / simulate / analyze / curves commands as plain functions.

Each function is a pure mapping from inputs and configuration to rows or
files; the CLI only wires them to paths and streams.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Sequence

import numpy as np

from . import analytics
from .config import RunConfig
from .estimation import (Observation, UnidentifiableRho, build_observation, fit_rho,
                         fit_rho_grid)
from .records import (RatingRecord, TrajectoryRecord, dumps_record, fmt, iter_trajectories,
                      read_ratings, read_table, read_trajectories, table_text, write_records,
                      write_table)
from .safety import (SafetyParams, ValidationError, check_rho, classify_zone, gsi_curve,
                     gsi_from_margin, safety_margin)
from .simulator import Q3_ITEMS, generate_cohort

FIT_COLUMNS = ("participant_id", "role", "status", "method", "aggregation", "rho_hat",
               "log_lik", "sse", "n_obs", "iterations", "converged", "at_bound",
               "oracle_rho", "oracle_gap")


class JoinError(ValidationError):
    """Ratings reference trajectory segments that do not exist."""


# ---------------------------------------------------------------- score

def score_lines(lines: Iterable[str], rho: float, params: SafetyParams) -> Iterator[str]:
    """One output record per input trajectory record, in input order."""
    check_rho(rho)
    for _, rec in iter_trajectories(lines):
        margin = float(safety_margin(rec.d, rec.v, params))
        out = rec.as_dict()
        out["margin"] = margin
        out["gsi"] = float(gsi_from_margin(margin, rho))
        out["zone"] = classify_zone(rec.d, params).value
        yield dumps_record(out)


# ---------------------------------------------------------------- fit

@dataclass
class JoinedTrial:
    participant_id: str
    role: str
    mode: str
    trial: int
    item: str
    raw_value: Optional[int]
    observation: Observation


def join_observations(trajectories: Sequence[TrajectoryRecord], ratings: Sequence[RatingRecord],
                      cfg: RunConfig) -> list[JoinedTrial]:
    """Pair each configured approach-item rating with its trajectory segment."""
    segments: dict[tuple, list[TrajectoryRecord]] = defaultdict(list)
    for rec in trajectories:
        segments[rec.segment].append(rec)
    joined, unmatched = [], []
    for r in ratings:
        if r.item not in cfg.q3_items.get(r.role, ()):
            continue
        seg = segments.get(r.segment)
        if seg is None:
            unmatched.append(r.segment)
            continue
        if seg[0].role != r.role:
            raise JoinError(f"role mismatch for segment {r.segment}: "
                            f"trajectory {seg[0].role}, rating {r.role}")
        obs = build_observation([s.sample() for s in seg], r.normalized, cfg.aggregation,
                                cfg.safety, r.segment)
        joined.append(JoinedTrial(r.participant_id, r.role, r.mode, r.trial, r.item, r.value, obs))
    if unmatched:
        keys = "; ".join("/".join(map(str, k)) for k in sorted(set(unmatched)))
        raise JoinError(f"{len(unmatched)} rating(s) have no trajectory segment: {keys}")
    return joined


def fit_participants(joined: Sequence[JoinedTrial], cfg: RunConfig) -> list[dict]:
    by_pid: dict[str, list[JoinedTrial]] = defaultdict(list)
    for j in joined:
        by_pid[j.participant_id].append(j)
    rows = []
    for pid in sorted(by_pid):
        trials = by_pid[pid]
        obs = [t.observation for t in trials]
        row = {"participant_id": pid, "role": trials[0].role, "method": cfg.method.value,
               "aggregation": cfg.aggregation.value, "n_obs": len(obs)}
        try:
            res = fit_rho(obs, cfg.likelihood, cfg.method, cfg.grid_step)
        except UnidentifiableRho:
            row["status"] = "UnidentifiableRho"
            rows.append(row)
            continue
        oracle = fit_rho_grid(obs, cfg.likelihood, cfg.grid_step)
        row.update(status="ok", rho_hat=res.rho_hat, log_lik=res.log_lik, sse=res.sse,
                   iterations=res.iterations, converged=res.converged, at_bound=res.at_bound,
                   oracle_rho=oracle.rho_hat, oracle_gap=abs(res.rho_hat - oracle.rho_hat))
        rows.append(row)
    return rows


def fit_files(trajectories: Path, ratings: Path, cfg: RunConfig) -> list[dict]:
    with open(trajectories, encoding="utf-8") as fh:
        traj = read_trajectories(fh)
    with open(ratings, encoding="utf-8") as fh:
        rats = read_ratings(fh)
    return fit_participants(join_observations(traj, rats, cfg), cfg)


def write_fits(rows: Sequence[dict], out: IO[str]) -> None:
    write_table(rows, FIT_COLUMNS, out)


# ---------------------------------------------------------------- simulate

def simulate(out_dir: Path, cfg: RunConfig, n_bys: int = 30, n_cas: int = 31,
             rating_noise: float = 0.05, quantize: bool = False) -> dict:
    """Write trajectories.jsonl, ratings.jsonl, ground_truth.csv and manifest.json."""
    cohort = generate_cohort(n_bys=n_bys, n_cas=n_cas, seed=cfg.seed, rating_noise=rating_noise,
                             quantize=quantize, agg=cfg.aggregation, params=cfg.safety)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj_rows, rating_rows = [], []
    # trials are written in each participant's randomized presentation order
    for tr in cohort.trials:
        for s in tr.samples:
            traj_rows.append(TrajectoryRecord(tr.participant_id, tr.role.value, tr.mode.value,
                                              tr.trial, s.t, s.d, s.v, s.bearing))
        r = tr.observation.rating
        if quantize:
            rec = RatingRecord(tr.participant_id, tr.role.value, tr.mode.value, tr.trial, tr.item,
                               value=int(round(r * 4)) + 1, scale_points=5)
        else:
            rec = RatingRecord(tr.participant_id, tr.role.value, tr.mode.value, tr.trial, tr.item,
                               rating=r)
        rating_rows.append(rec)
    with open(out_dir / "trajectories.jsonl", "w", encoding="utf-8") as fh:
        n_traj = write_records(traj_rows, fh)
    with open(out_dir / "ratings.jsonl", "w", encoding="utf-8") as fh:
        n_rat = write_records(rating_rows, fh)
    truth = [{"participant_id": p.id, "role": p.role.value, "rho_star": p.rho_star,
              "n_trials": len(cohort.trials_for(p.id))} for p in cohort.participants]
    with open(out_dir / "ground_truth.csv", "w", encoding="utf-8") as fh:
        write_table(truth, ("participant_id", "role", "rho_star", "n_trials"), fh)
    manifest = {
        "seed": cfg.seed,
        "n_participants": len(cohort.participants),
        "n_bys": n_bys,
        "n_cas": n_cas,
        "n_trials": len(cohort.trials),
        "trajectory_rows": n_traj,
        "rating_rows": n_rat,
        "rating_noise": rating_noise,
        "quantize": quantize,
        "aggregation": cfg.aggregation.value,
        "standoffs": cohort.meta["standoffs"],
        "rho_dists": cohort.meta["rho_dists"],
        "items": {r.value: item for r, item in Q3_ITEMS.items()},
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        fh.write(_dump_json(manifest))
    return manifest


def _round6(x):
    if isinstance(x, float):
        return float(fmt(x)) if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _round6(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round6(v) for v in x]
    return x


def _dump_json(obj) -> str:
    return json.dumps(_round6(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- analyze

NOT_COMPUTABLE = "not-computable"


def _test_row(base: dict, fn, *args) -> dict:
    row = dict(base)
    try:
        res = fn(*args)
    except (analytics.DegenerateInput, ValidationError) as exc:
        row.update(status=f"{NOT_COMPUTABLE}: {exc}")
        return row
    row.update(status="ok", test=res.method.value, statistic=res.statistic, p_value=res.p_value,
               effect_r=res.effect_r, exact=res.exact)
    return row


def _describe_row(base: dict, values) -> dict:
    row = dict(base)
    if len(values) == 0:
        row.update(n=0, status=f"{NOT_COMPUTABLE}: no values")
        return row
    d = analytics.describe(values)
    row.update(n=d.n, mean=d.mean, sd=d.sd, se=d.se, min=d.min, max=d.max, status="ok")
    return row


DESC_COLUMNS = ("n", "mean", "sd", "se", "min", "max", "status")
TEST_COLUMNS = ("test", "statistic", "p_value", "effect_r", "exact", "status")


def analyze(fits: Sequence[dict], joined: Sequence[JoinedTrial], cfg: RunConfig) -> dict[str, str]:
    """Build every report table; returns {file name: file contents}."""
    rho = {r["participant_id"]: float(r["rho_hat"]) for r in fits
           if r.get("status") == "ok" and r.get("rho_hat") not in (None, "")}
    if not rho:
        raise ValidationError("no successfully fitted participants in the fit table")
    roles = ("CAS", "BYS")
    trial_gsi = []
    for j in joined:
        if j.participant_id in rho:
            g = float(gsi_from_margin(j.observation.margin, rho[j.participant_id]))
            trial_gsi.append((j, g))
    pid_role = {}
    for j, _ in trial_gsi:
        pid_role[j.participant_id] = j.role
    per_pid = defaultdict(list)
    for j, g in trial_gsi:
        per_pid[j.participant_id].append(g)
    pid_mean = {pid: float(np.mean(v)) for pid, v in per_pid.items()}

    out: dict[str, str] = {}

    rho_rows, gsi_rows, trial_rows = [], [], []
    for role in roles:
        pids = sorted(p for p in rho if pid_role.get(p) == role)
        rho_rows.append(_describe_row({"role": role}, [rho[p] for p in pids]))
        gsi_rows.append(_describe_row({"role": role},
                                      [g for j, g in trial_gsi if j.role == role]))
        for k in (1, 2):
            trial_rows.append(_describe_row({"role": role, "trial": k},
                                            [g for j, g in trial_gsi if j.role == role and j.trial == k]))
    out["rho_descriptives.csv"] = table_text(rho_rows, ("role",) + DESC_COLUMNS)
    out["gsi_descriptives.csv"] = table_text(gsi_rows, ("role",) + DESC_COLUMNS)
    out["gsi_trial_descriptives.csv"] = table_text(trial_rows, ("role", "trial") + DESC_COLUMNS)

    g_cas = [g for j, g in trial_gsi if j.role == "CAS"]
    g_bys = [g for j, g in trial_gsi if j.role == "BYS"]
    r_cas = [rho[p] for p in sorted(rho) if pid_role.get(p) == "CAS"]
    r_bys = [rho[p] for p in sorted(rho) if pid_role.get(p) == "BYS"]
    contrast = [
        _test_row({"variable": "gsi_trial", "n_cas": len(g_cas), "n_bys": len(g_bys)},
                  analytics.mann_whitney_u, g_cas, g_bys),
        _test_row({"variable": "rho_hat", "n_cas": len(r_cas), "n_bys": len(r_bys)},
                  analytics.mann_whitney_u, r_cas, r_bys),
    ]
    out["role_contrast.csv"] = table_text(contrast, ("variable", "n_cas", "n_bys") + TEST_COLUMNS)

    trial_contrast = []
    for role in roles:
        pairs = defaultdict(dict)
        for j, g in trial_gsi:
            if j.role == role:
                pairs[(j.participant_id, j.mode)][j.trial] = g
        complete = [v for _, v in sorted(pairs.items()) if 1 in v and 2 in v]
        t1 = [v[1] for v in complete]
        t2 = [v[2] for v in complete]
        trial_contrast.append(_test_row({"role": role, "pairs": len(complete)},
                                        analytics.wilcoxon_signed_rank, t1, t2))
    out["trial_contrast.csv"] = table_text(trial_contrast, ("role", "pairs") + TEST_COLUMNS)

    corr = []
    for role in roles:
        xs = [j.observation.rating for j, _ in trial_gsi if j.role == role]
        ys = [g for j, g in trial_gsi if j.role == role]
        corr.append(_test_row({"role": role, "x": "rating", "y": "gsi_trial", "n": len(xs)},
                              analytics.pearson, xs, ys))
    out["correlations.csv"] = table_text(corr, ("role", "x", "y", "n") + TEST_COLUMNS)

    member_rows, summary_rows = [], []
    for role in roles:
        pids = sorted(p for p in pid_mean if pid_role[p] == role)
        values = [pid_mean[p] for p in pids]
        if len(values) < 2:
            summary_rows.append({"role": role, "n": len(values),
                                 "status": f"{NOT_COMPUTABLE}: fewer than 2 participants"})
            continue
        res = analytics.mean_shift(values, cfg.clustering.bandwidth)
        for p, v, lab in zip(pids, values, res.labels):
            member_rows.append({"role": role, "participant_id": p, "gsi_mean": v,
                                "cluster": int(lab), "outlier": res.counts[lab] == 1})
        for k, (count, mode) in enumerate(zip(res.counts, res.modes[:, 0])):
            summary_rows.append({"role": role, "n": len(values), "cluster": k, "mode": float(mode),
                                 "count": count, "outliers": len(res.outliers),
                                 "n_clusters": res.n_clusters, "silhouette": res.silhouette,
                                 "bandwidth": res.bandwidth, "status": "ok"})
    out["clusters.csv"] = table_text(member_rows, ("role", "participant_id", "gsi_mean",
                                                   "cluster", "outlier"))
    out["cluster_summary.csv"] = table_text(summary_rows, ("role", "n", "n_clusters", "cluster", "mode",
                                                       "count", "outliers", "silhouette",
                                                       "bandwidth", "status"))

    kde_rows = []
    for role in roles:
        vals = [rho[p] for p in sorted(rho) if pid_role.get(p) == role]
        if len(vals) < 2:
            continue
        xs, dens = analytics.kde_1d(vals, grid=256)
        kde_rows += [{"role": role, "x": float(x), "density": float(d)} for x, d in zip(xs, dens)]
    out["kde_rho.csv"] = table_text(kde_rows, ("role", "x", "density"))

    flagged = sorted(r["participant_id"] for r in fits if r.get("status") != "ok")
    summary = {
        "aggregation": cfg.aggregation.value,
        "method": cfg.method.value,
        "effect_size": "r = |z| / sqrt(N) for rank tests",
        "trial_gsi": "clip(margin ** rho_hat) at each rated segment's aggregated margin",
        "n_fitted": len(rho),
        "flagged_participants": flagged,
        "mean_rho": {role: _mean([rho[p] for p in rho if pid_role.get(p) == role]) for role in roles},
        "mean_gsi": {"CAS": _mean(g_cas), "BYS": _mean(g_bys)},
    }
    out["summary.json"] = _dump_json(summary)
    return out


def _mean(values) -> Optional[float]:
    return float(np.mean(values)) if len(values) else None


def analyze_files(fits_path: Path, trajectories: Path, ratings: Path, cfg: RunConfig,
                  out_dir: Path) -> dict[str, str]:
    with open(fits_path, encoding="utf-8") as fh:
        fits = read_table(fh)
    with open(trajectories, encoding="utf-8") as fh:
        traj = read_trajectories(fh)
    with open(ratings, encoding="utf-8") as fh:
        rats = read_ratings(fh)
    tables = analyze(fits, join_observations(traj, rats, cfg), cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in tables.items():
        (out_dir / name).write_text(text, encoding="utf-8")
    return tables


# ---------------------------------------------------------------- curves

def curves(rhos: Sequence[float], v: float, params: SafetyParams, n_points: int = 375,
           margin_beyond: float = 0.5) -> tuple[list[dict], list[str]]:
    """GSI over d in [d_min, d_max + margin_beyond], one column per rho.

    The default 375 points put samples every 0.01 m on the default range.
    """
    if not rhos:
        raise ValidationError("at least one rho is required")
    for r in rhos:
        check_rho(r)
    series = [gsi_curve(r, v, params, params.d_min, params.d_max + margin_beyond, n_points)
              for r in rhos]
    columns = ["d"] + [f"gsi_rho_{fmt(float(r))}" for r in rhos]
    rows = []
    for i in range(n_points):
        row = {"d": series[0][i][0]}
        for col, s in zip(columns[1:], series):
            row[col] = s[i][1]
        rows.append(row)
    return rows, columns
