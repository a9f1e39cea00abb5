"""Per-trip behavioral advantage and driver ranking.

A trip's advantage is its observed performance minus the baseline
model's prediction for the same environment: what remains after the
conditions are accounted for. Averaging over each driver's trips gives
an environment-debiased quality estimate, and sorting those means gives
the ranking.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyDataset
from .models import BaselineModel
from .trip_data import Dataset

log = logging.getLogger(__name__)

LOW_TRIP_WARN_THRESHOLD = 10


@dataclass(frozen=True)
class TripAdvantage:
    trip_id: str
    driver_id: str
    advantage: float


@dataclass(frozen=True)
class DriverAssessment:
    driver_id: str
    mean_advantage: float
    std_advantage: float
    trip_count: int


@dataclass(frozen=True)
class Ranking:
    """Assessments sorted by mean advantage, best first; ties by driver id."""

    entries: tuple[DriverAssessment, ...]


def trip_advantages(
    ds: Dataset,
    model: BaselineModel,
    metric_index: int | None = None,
    raw_units: bool = False,
) -> list[TripAdvantage]:
    """Observed-minus-baseline advantage for every trip, in dataset order.

    Values are in normalized target-metric units unless ``raw_units`` is
    set, which scales by the metric's fitted standard deviation.
    """
    stats = model.stats
    if ds.schema.d_env != stats.d_env or ds.schema.d_performance != stats.d_performance:
        raise DimensionMismatch("dataset layout does not match the model's normalization")
    if metric_index is None:
        metric_index = ds.schema.metric_index
    if not 0 <= metric_index < stats.d_performance:
        raise DimensionMismatch(f"metric_index {metric_index} out of range")
    if not ds.records:
        raise EmptyDataset("no trips to assess")

    observed = stats.normalize_performance(ds.performance_matrix())[:, metric_index]
    predicted = model.net.forward_batch(stats.normalize_env(ds.env_matrix()))[:, metric_index]
    values = observed - predicted
    if raw_units:
        values = values * stats.performance_std(metric_index)
    return [
        TripAdvantage(trip_id=rec.trip_id, driver_id=rec.driver_id, advantage=float(v))
        for rec, v in zip(ds.records, values)
    ]


def assess_drivers(
    advs: list[TripAdvantage], min_trips_warn: int = LOW_TRIP_WARN_THRESHOLD
) -> Ranking:
    """Aggregate trip advantages per driver and sort into a ranking.

    Mean uses all of a driver's trips; std is the unbiased sample
    standard deviation (0 for a single trip). A driver with fewer than
    ``min_trips_warn`` trips is reported with a warning, not excluded,
    since a thin trip history may not cover enough driving conditions.
    """
    if not advs:
        raise EmptyDataset("no trip advantages to aggregate")
    by_driver: dict[str, list[float]] = {}
    for adv in advs:
        by_driver.setdefault(adv.driver_id, []).append(adv.advantage)

    assessments = []
    thin = 0
    for driver_id, values in by_driver.items():
        # canonical summation order makes the result independent of row order
        arr = np.sort(np.array(values))
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        assessments.append(
            DriverAssessment(
                driver_id=driver_id,
                mean_advantage=float(arr.mean()),
                std_advantage=std,
                trip_count=len(arr),
            )
        )
        if len(arr) < min_trips_warn:
            thin += 1
    if thin:
        log.warning(
            "%d of %d drivers have fewer than %d trips; their estimates may be unstable",
            thin,
            len(assessments),
            min_trips_warn,
        )
    assessments.sort(key=lambda a: (-a.mean_advantage, a.driver_id))
    return Ranking(entries=tuple(assessments))


RANKING_HEADER = "rank  driver  advantage (std)  trips"


def render_ranking(ranking: Ranking) -> str:
    """Plain-text ranking: one line per driver, best first."""
    lines = [RANKING_HEADER]
    for rank, entry in enumerate(ranking.entries, start=1):
        lines.append(
            f"{rank}  {entry.driver_id}  "
            f"{entry.mean_advantage:.6f} ({entry.std_advantage:.6f})  n={entry.trip_count}"
        )
    return "\n".join(lines) + "\n"


def ranking_rows(ranking: Ranking) -> list[list]:
    """CSV-ready rows: rank, driver_id, mean, std, trip_count."""
    rows = [["rank", "driver_id", "mean_advantage", "std_advantage", "trip_count"]]
    for rank, entry in enumerate(ranking.entries, start=1):
        rows.append(
            [
                rank,
                entry.driver_id,
                repr(entry.mean_advantage),
                repr(entry.std_advantage),
                entry.trip_count,
            ]
        )
    return rows
