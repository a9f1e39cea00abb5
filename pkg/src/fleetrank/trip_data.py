"""Trip record data model and CSV ingestion.

A trip is summarized by four blocks: identifiers (trip and driver),
environmental characteristics outside the driver's control, behavioral
characteristics the driver does control, and measured performance
outcomes. A declarative schema maps file columns onto those blocks.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadValue, EmptyDataset, MissingColumn, UnknownDriver

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TripRecord:
    """One trip: ids plus env / behavior / performance vectors."""

    trip_id: str
    driver_id: str
    env: np.ndarray
    behavior: np.ndarray
    performance: np.ndarray

    def __post_init__(self):
        if not self.driver_id:
            raise ValueError("driver_id must be non-empty")
        for name in ("env", "behavior", "performance"):
            vec = getattr(self, name)
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} vector contains non-finite entries")


@dataclass(frozen=True)
class DatasetSchema:
    """Maps file columns onto the env / behavior / performance blocks.

    ``target_metric`` names the single performance column used for
    ranking and placement (the remaining performance columns are still
    modeled, just not ranked on).
    """

    env_columns: tuple[str, ...]
    behavior_columns: tuple[str, ...]
    performance_columns: tuple[str, ...]
    trip_id_column: str = "trip_id"
    driver_id_column: str = "driver_id"
    target_metric: str = "total_mpg"

    def __post_init__(self):
        object.__setattr__(self, "env_columns", tuple(self.env_columns))
        object.__setattr__(self, "behavior_columns", tuple(self.behavior_columns))
        object.__setattr__(self, "performance_columns", tuple(self.performance_columns))
        groups = [set(self.env_columns), set(self.behavior_columns), set(self.performance_columns)]
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                overlap = groups[i] & groups[j]
                if overlap:
                    raise ValueError(f"column groups overlap: {sorted(overlap)}")
        if self.target_metric not in self.performance_columns:
            raise ValueError(
                f"target_metric {self.target_metric!r} is not a performance column"
            )

    @property
    def d_env(self) -> int:
        return len(self.env_columns)

    @property
    def d_behavior(self) -> int:
        return len(self.behavior_columns)

    @property
    def d_performance(self) -> int:
        return len(self.performance_columns)

    @property
    def metric_index(self) -> int:
        """Index of the target metric within the performance block."""
        return self.performance_columns.index(self.target_metric)

    def to_dict(self) -> dict:
        return {
            "env_columns": list(self.env_columns),
            "behavior_columns": list(self.behavior_columns),
            "performance_columns": list(self.performance_columns),
            "trip_id_column": self.trip_id_column,
            "driver_id_column": self.driver_id_column,
            "target_metric": self.target_metric,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSchema":
        return cls(
            env_columns=tuple(data["env_columns"]),
            behavior_columns=tuple(data["behavior_columns"]),
            performance_columns=tuple(data["performance_columns"]),
            trip_id_column=data.get("trip_id_column", "trip_id"),
            driver_id_column=data.get("driver_id_column", "driver_id"),
            target_metric=data.get("target_metric", "total_mpg"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetSchema":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Dataset:
    """An immutable-by-convention collection of trips plus a driver index."""

    records: list[TripRecord]
    schema: DatasetSchema
    driver_index: dict[str, tuple[int, ...]] = field(default_factory=dict)
    skipped_rows: int = 0

    def __post_init__(self):
        if not self.records:
            raise EmptyDataset("dataset has no records")
        if not self.driver_index:
            self.driver_index = _build_driver_index(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_drivers(self) -> int:
        return len(self.driver_index)

    def driver_indices(self, driver_id: str) -> tuple[int, ...]:
        """Indices of all records belonging to one driver."""
        try:
            return self.driver_index[driver_id]
        except KeyError:
            raise UnknownDriver(driver_id) from None

    def env_matrix(self) -> np.ndarray:
        return np.stack([r.env for r in self.records])

    def behavior_matrix(self) -> np.ndarray:
        return np.stack([r.behavior for r in self.records])

    def performance_matrix(self) -> np.ndarray:
        return np.stack([r.performance for r in self.records])

    def stacked_matrix(self) -> np.ndarray:
        """All numeric blocks concatenated per row: [env, behavior, performance]."""
        return np.hstack([self.env_matrix(), self.behavior_matrix(), self.performance_matrix()])


def _build_driver_index(records: list[TripRecord]) -> dict[str, tuple[int, ...]]:
    index: dict[str, list[int]] = {}
    for i, rec in enumerate(records):
        index.setdefault(rec.driver_id, []).append(i)
    return {k: tuple(v) for k, v in index.items()}


def _parse_cell(raw: str, row: int, column: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise BadValue(row, column, raw) from None
    if not math.isfinite(value):
        raise BadValue(row, column, raw)
    return value


def load_dataset(path: str | Path, schema: DatasetSchema, lenient: bool = False) -> Dataset:
    """Load a CSV file into a Dataset.

    The file must have a header row naming every schema column; column
    order is irrelevant. In strict mode (default) any unparsable or
    non-finite value aborts the load. With ``lenient=True`` such rows are
    skipped and counted instead.
    """
    path = Path(path)
    records: list[TripRecord] = []
    skipped = 0
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        needed = (
            list(schema.env_columns)
            + list(schema.behavior_columns)
            + list(schema.performance_columns)
            + [schema.trip_id_column, schema.driver_id_column]
        )
        for name in needed:
            if name not in header:
                raise MissingColumn(name)
        for row_num, row in enumerate(reader, start=1):
            try:
                env = np.array([_parse_cell(row[c], row_num, c) for c in schema.env_columns])
                behavior = np.array(
                    [_parse_cell(row[c], row_num, c) for c in schema.behavior_columns]
                )
                perf = np.array(
                    [_parse_cell(row[c], row_num, c) for c in schema.performance_columns]
                )
                driver_id = row[schema.driver_id_column]
                if not driver_id:
                    raise BadValue(row_num, schema.driver_id_column, driver_id)
            except BadValue:
                if lenient:
                    skipped += 1
                    continue
                raise
            records.append(
                TripRecord(
                    trip_id=row[schema.trip_id_column] or "",
                    driver_id=driver_id,
                    env=env,
                    behavior=behavior,
                    performance=perf,
                )
            )
    if not records:
        raise EmptyDataset(f"no valid rows in {path}")
    if skipped:
        log.warning("skipped %d unparsable rows while loading %s", skipped, path)
    return Dataset(records=records, schema=schema, skipped_rows=skipped)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write a Dataset back to CSV at full float precision.

    Values are emitted with ``repr`` so a reload reproduces them bitwise.
    """
    schema = ds.schema
    header = (
        [schema.trip_id_column, schema.driver_id_column]
        + list(schema.env_columns)
        + list(schema.behavior_columns)
        + list(schema.performance_columns)
    )
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for rec in ds.records:
            values = [rec.trip_id, rec.driver_id]
            values += [repr(float(v)) for v in rec.env]
            values += [repr(float(v)) for v in rec.behavior]
            values += [repr(float(v)) for v in rec.performance]
            writer.writerow(values)
