"""Optimal driver placement for a given trip environment.

Finds the behavior profile maximizing the advantage surface at a fixed
environment via CMA-ES over a data-derived box in normalized behavior
space, then matches the real driver whose averaged behavior profile
lies nearest (Euclidean) to that optimum. Matching happens in
normalized space so no single raw unit dominates the distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cmaes import CmaesConfig, CmaesResult, maximize
from .errors import DimensionMismatch, EmptyDataset, EmptyProfiles, InvalidConfig
from .models import AdvantageModel
from .normalization import NormalizationStats
from .trip_data import Dataset

DEFAULT_SIGMA = 0.3
DEFAULT_MAX_GENERATIONS = 300
DEFAULT_RUNNER_UPS = 5


@dataclass(frozen=True)
class DriverProfile:
    """A driver's mean normalized behavior vector over their trips."""

    driver_id: str
    mean_behavior: np.ndarray
    trip_count: int


@dataclass
class PlacementResult:
    env: np.ndarray
    optimal_behavior: np.ndarray
    optimal_behavior_raw: np.ndarray
    optimal_advantage: float
    matched_driver: str
    match_distance: float
    runner_ups: list[tuple[str, float]]
    argmax_consistent: bool
    generations_used: int
    termination: str
    search_history: list[float] | None = None  # running best advantage per generation

    def to_dict(self) -> dict:
        return {
            "env": self.env.tolist(),
            "optimal_behavior_normalized": self.optimal_behavior.tolist(),
            "optimal_behavior_raw": self.optimal_behavior_raw.tolist(),
            # count-like behavior dimensions are searched as continuous
            # values; the rounded view reads naturally for those
            "optimal_behavior_raw_rounded": np.round(self.optimal_behavior_raw).tolist(),
            "optimal_advantage": self.optimal_advantage,
            "matched_driver": self.matched_driver,
            "match_distance": self.match_distance,
            "runner_ups": [[d, dist] for d, dist in self.runner_ups],
            "argmax_consistent": self.argmax_consistent,
            "generations_used": self.generations_used,
            "termination": self.termination,
        }


def build_profiles(ds: Dataset, stats: NormalizationStats) -> list[DriverProfile]:
    """Mean normalized behavior per driver, sorted by driver id."""
    if not ds.records:
        raise EmptyDataset("no records to profile")
    behaviors = stats.normalize_behavior(ds.behavior_matrix())
    profiles = []
    for driver_id in sorted(ds.driver_index):
        idx = list(ds.driver_index[driver_id])
        profiles.append(
            DriverProfile(
                driver_id=driver_id,
                mean_behavior=behaviors[idx].mean(axis=0),
                trip_count=len(idx),
            )
        )
    return profiles


def optimize_behavior(
    model: AdvantageModel,
    s: np.ndarray,
    *,
    seed: int = 0,
    sigma0: float = DEFAULT_SIGMA,
    population: int | None = None,
    max_generations: int = DEFAULT_MAX_GENERATIONS,
    tolerance: float = 1e-9,
    restarts: int = 0,
    bounds: np.ndarray | None = None,
    template_norm: np.ndarray | None = None,
    free_indices: list[int] | None = None,
    s_normalized: bool = False,
    record_candidates: bool = True,
) -> tuple[np.ndarray, float, CmaesResult]:
    """Maximize the advantage surface over behavior at a fixed environment.

    The search runs in normalized behavior space over ``bounds`` (default:
    the model's data-derived box). With ``template_norm`` and
    ``free_indices`` only the listed dimensions are searched while the
    rest stay fixed at the template values. The initial mean is the
    dataset-wide mean behavior (the origin in normalized units), clipped
    into the box.

    Returns the full normalized optimum, its advantage, and the raw
    optimizer result.
    """
    s = np.asarray(s, dtype=float)
    stats = model.stats
    s_norm = s if s_normalized else stats.normalize_env(s)
    if s_norm.shape != (stats.d_env,):
        raise DimensionMismatch(f"expected env vector of length {stats.d_env}")

    d_behavior = stats.d_behavior
    if bounds is None:
        bounds = model.behavior_box
    if bounds is None:
        raise InvalidConfig("no behavior search box: model has none and no bounds were given")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (d_behavior, 2):
        raise DimensionMismatch("bounds must have shape (d_behavior, 2)")

    if free_indices is None:
        free = np.arange(d_behavior)
        base = np.zeros(d_behavior)
    else:
        free = np.asarray(sorted(free_indices), dtype=int)
        if len(free) == 0 or len(set(free.tolist())) != len(free):
            raise InvalidConfig("free_indices must be non-empty and unique")
        if free.min() < 0 or free.max() >= d_behavior:
            raise DimensionMismatch("free index out of range")
        if template_norm is None:
            raise InvalidConfig("a template is required when fixing dimensions")
        base = np.asarray(template_norm, dtype=float).copy()
        if base.shape != (d_behavior,):
            raise DimensionMismatch(f"template must have length {d_behavior}")

    sub_bounds = bounds[free]
    start = np.clip(np.zeros(len(free)), sub_bounds[:, 0], sub_bounds[:, 1])

    def objective(a_free: np.ndarray) -> float:
        candidate = base.copy()
        candidate[free] = a_free
        return float(model.advantage_normalized(s_norm, candidate))

    config = CmaesConfig(
        dim=len(free),
        initial_mean=start,
        initial_sigma=sigma0,
        population=population,
        max_generations=max_generations,
        target_tolerance=tolerance,
        seed=seed,
        bounds=sub_bounds,
        restarts=restarts,
        record_candidates=record_candidates,
    )
    result = maximize(objective, config)
    optimum = base.copy()
    optimum[free] = result.best_point
    return optimum, float(result.best_fitness), result


def match_driver(
    profiles: list[DriverProfile],
    target: np.ndarray,
    invert: bool = False,
) -> tuple[str, float, list[tuple[str, float]]]:
    """Driver whose mean profile is nearest the target behavior vector.

    Returns (driver_id, distance, full ascending-distance list). Ties
    break on ascending driver id. ``invert`` flips the criterion to the
    farthest profile, kept only as a debugging aid for comparing the two
    readings of the matching rule; the returned list stays ascending.
    """
    if not profiles:
        raise EmptyProfiles("no profiles to match against")
    target = np.asarray(target, dtype=float)
    dim = profiles[0].mean_behavior.shape[0]
    if target.shape != (dim,):
        raise DimensionMismatch(f"target length {target.shape} does not match profiles ({dim})")
    distances = []
    for p in profiles:
        if p.mean_behavior.shape != (dim,):
            raise DimensionMismatch("profiles have inconsistent dimensions")
        distances.append((p.driver_id, float(np.linalg.norm(p.mean_behavior - target))))
    ranked = sorted(distances, key=lambda t: (t[1], t[0]))
    if invert:
        winner = sorted(distances, key=lambda t: (-t[1], t[0]))[0]
    else:
        winner = ranked[0]
    return winner[0], winner[1], ranked


def place(
    model: AdvantageModel,
    profiles: list[DriverProfile],
    s: np.ndarray,
    *,
    seed: int = 0,
    top_m: int = DEFAULT_RUNNER_UPS,
    invert_match: bool = False,
    **search_kwargs,
) -> PlacementResult:
    """End-to-end placement: optimize behavior, then match the nearest driver.

    Also records whether the behavior-model and advantage orderings agree
    at their maximum over every candidate the optimizer evaluated (they
    must, since the baseline term is constant in behavior).
    """
    s = np.asarray(s, dtype=float)
    optimum, value, result = optimize_behavior(model, s, seed=seed, **search_kwargs)

    consistent = True
    if result.evaluated_points is not None and len(result.evaluated_points) > 0:
        free = search_kwargs.get("free_indices")
        if free is None:
            candidates = result.evaluated_points
        else:
            free = np.asarray(sorted(free), dtype=int)
            candidates = np.tile(optimum, (len(result.evaluated_points), 1))
            candidates[:, free] = result.evaluated_points
        stats = model.stats
        s_norm = s if search_kwargs.get("s_normalized") else stats.normalize_env(s)
        q_vals = model.behavior.predict_normalized_batch(s_norm, candidates)[:, model.metric_index]
        base = float(model.baseline.predict_normalized(s_norm)[model.metric_index])
        a_vals = q_vals - base
        consistent = bool(q_vals[int(np.argmax(a_vals))] == q_vals.max())

    driver_id, distance, ranked = match_driver(profiles, optimum, invert=invert_match)
    runner_ups = [r for r in ranked if r[0] != driver_id][:top_m]
    return PlacementResult(
        env=s,
        optimal_behavior=optimum,
        optimal_behavior_raw=model.stats.denormalize_behavior(optimum),
        optimal_advantage=value,
        matched_driver=driver_id,
        match_distance=distance,
        runner_ups=runner_ups,
        argmax_consistent=consistent,
        generations_used=result.generations_used,
        termination=result.termination,
        search_history=list(result.history),
    )
