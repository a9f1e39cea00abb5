"""Command-line pipeline: synth, train, rank, place, surface.

Every command is deterministic given its seed flags and writes a
manifest next to its artifacts so any output can be reproduced from the
manifest alone. Exit codes: 0 success, 1 runtime or numeric failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import assessment, placement, synth
from .errors import (
    BadValue,
    DimensionMismatch,
    EmptyDataset,
    EmptyProfiles,
    FleetrankError,
    InvalidConfig,
    MissingColumn,
    NonFiniteLoss,
    NonFiniteObjective,
    TooFewSamples,
    UnknownDimension,
    UnknownDriver,
)
from .models import (
    TOOL_VERSION,
    AdvantageModel,
    TrainingParams,
    behavior_box_from,
    load_bundle,
    save_bundle,
    train_baseline,
    train_behavior,
)
from .normalization import fit_stats
from .trip_data import DatasetSchema, load_dataset, save_dataset

USAGE_ERRORS = (
    InvalidConfig,
    MissingColumn,
    BadValue,
    EmptyDataset,
    EmptyProfiles,
    TooFewSamples,
    UnknownDimension,
    UnknownDriver,
    DimensionMismatch,
    FileNotFoundError,
    NotADirectoryError,
)
RUNTIME_ERRORS = (NonFiniteLoss, NonFiniteObjective)


def _write_manifest(out_dir: Path, command: str, args: argparse.Namespace,
                    outputs: list[str], started: float) -> None:
    """Atomic manifest write beside the command's artifacts."""
    manifest = {
        "command": command,
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "seed": getattr(args, "seed", None),
        "outputs": outputs,
        "version": TOOL_VERSION,
        "duration_s": round(time.time() - started, 3),
    }
    tmp = out_dir / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    os.replace(tmp, out_dir / "manifest.json")


def _load_vector(path: str) -> np.ndarray:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "values" in data:
        data = data["values"]
    return np.asarray(data, dtype=float)


def _parse_hidden(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3:
        raise InvalidConfig("--hidden expects three comma-separated widths")
    return tuple(parts)  # type: ignore[return-value]


def _free_indices(schema: DatasetSchema, names_csv: str) -> list[int]:
    indices = []
    for name in names_csv.split(","):
        name = name.strip()
        if name not in schema.behavior_columns:
            raise UnknownDimension(name)
        indices.append(schema.behavior_columns.index(name))
    return indices


def cmd_synth(args: argparse.Namespace) -> int:
    started = time.time()
    config = synth.SynthConfig(
        n_drivers=args.drivers,
        trips_per_driver=args.trips,
        d_env=args.d_env,
        d_behavior=args.d_behavior,
        skill_spacing=args.spacing,
        noise_sigma=args.noise,
        env_shift_mode=args.env_shift,
        interaction_scale=args.interaction,
        seed=args.seed,
    )
    ds, truth = synth.generate(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out / "data.csv")
    ds.schema.save(out / "schema.json")
    truth.save(out / "groundtruth.json")
    _write_manifest(out, "synth", args, ["data.csv", "schema.json", "groundtruth.json"], started)
    print(f"wrote {len(ds)} trips for {ds.n_drivers} drivers to {out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.time()
    schema = DatasetSchema.load(args.schema)
    ds = load_dataset(args.data, schema, lenient=args.lenient)
    stats = fit_stats(ds)
    base_params = TrainingParams(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        hidden_widths=_parse_hidden(args.hidden),
        seed=args.seed,
    )
    behav_params = TrainingParams(
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        hidden_widths=_parse_hidden(args.hidden),
        seed=args.seed + 1,
    )
    baseline, baseline_report = train_baseline(ds, stats, base_params)
    behavior, behavior_report = train_behavior(ds, stats, behav_params)
    model = AdvantageModel(
        baseline=baseline,
        behavior=behavior,
        metric_index=schema.metric_index,
        behavior_box=behavior_box_from(ds, stats),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_bundle(
        out,
        model,
        schema,
        baseline_report=baseline_report,
        behavior_report=behavior_report,
        params=base_params,
        behavior_seed=behav_params.seed,
    )
    for name, report in (("baseline", baseline_report), ("behavior", behavior_report)):
        with (out / f"{name}_curve.csv").open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["epoch", "mse"])
            for epoch, loss in enumerate(report.epoch_losses, start=1):
                writer.writerow([epoch, repr(loss)])
    outputs = [
        "baseline.json", "behavior.json", "stats.json", "meta.json",
        "baseline_curve.csv", "behavior_curve.csv",
    ]
    _write_manifest(out, "train", args, outputs, started)
    print(
        f"trained bundle in {out}: baseline mse {baseline_report.final_loss:.6f}, "
        f"behavior mse {behavior_report.final_loss:.6f}"
    )
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    started = time.time()
    model, schema, _meta = load_bundle(args.bundle)
    if args.schema:
        given = DatasetSchema.load(args.schema)
        if given.to_dict() != schema.to_dict():
            raise InvalidConfig("--schema does not match the schema the bundle was trained on")
    ds = load_dataset(args.data, schema, lenient=args.lenient)
    advs = assessment.trip_advantages(
        ds, model.baseline, metric_index=model.metric_index, raw_units=args.raw_units
    )
    ranking = assessment.assess_drivers(advs, min_trips_warn=args.min_trips)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = assessment.render_ranking(ranking)
    (out / "ranking.txt").write_text(text, encoding="utf-8")
    with (out / "ranking.csv").open("w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(assessment.ranking_rows(ranking))
    _write_manifest(out, "rank", args, ["ranking.txt", "ranking.csv"], started)
    print(text, end="")
    return 0


def cmd_place(args: argparse.Namespace) -> int:
    started = time.time()
    model, schema, _meta = load_bundle(args.bundle)
    env = _load_vector(args.env)
    ds = load_dataset(args.data, schema, lenient=args.lenient)
    profiles = placement.build_profiles(ds, model.stats)

    template_norm = None
    free_indices = None
    if args.fix_template:
        template = _load_vector(args.fix_template)
        template_norm = template if args.normalized else model.stats.normalize_behavior(template)
        if not args.free:
            raise InvalidConfig("--fix-template requires --free naming the searched dimensions")
        free_indices = _free_indices(schema, args.free)
    elif args.free:
        raise InvalidConfig("--free requires --fix-template for the fixed dimensions")

    result = placement.place(
        model,
        profiles,
        env,
        seed=args.seed,
        invert_match=args.invert_match,
        template_norm=template_norm,
        free_indices=free_indices,
        s_normalized=args.normalized,
        max_generations=args.max_generations,
        sigma0=args.sigma0,
        population=args.population,
        restarts=args.restarts,
        tolerance=args.tolerance,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "placement.json").write_text(json.dumps(result.to_dict(), indent=2), encoding="utf-8")
    with (out / "search_history.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["generation", "best_advantage"])
        for gen, best in enumerate(result.search_history, start=1):
            writer.writerow([gen, repr(best)])
    _write_manifest(out, "place", args, ["placement.json", "search_history.csv"], started)
    print(
        f"matched driver {result.matched_driver} at distance {result.match_distance:.6f} "
        f"(advantage {result.optimal_advantage:.6f})"
    )
    return 0


def cmd_surface(args: argparse.Namespace) -> int:
    started = time.time()
    model, schema, _meta = load_bundle(args.bundle)
    env = _load_vector(args.env)
    template = _load_vector(args.template)
    template_norm = template if args.normalized else model.stats.normalize_behavior(template)
    free_indices = _free_indices(schema, args.free)
    if len(free_indices) != 2:
        raise InvalidConfig("--free must name exactly two dimensions for a surface")
    if model.behavior_box is None:
        raise InvalidConfig("bundle has no behavior search box")
    if template_norm.shape != (model.stats.d_behavior,):
        raise DimensionMismatch(f"template must have length {model.stats.d_behavior}")

    s_norm = env if args.normalized else model.stats.normalize_env(env)
    i, j = free_indices
    grid_i = np.linspace(model.behavior_box[i, 0], model.behavior_box[i, 1], args.resolution)
    grid_j = np.linspace(model.behavior_box[j, 0], model.behavior_box[j, 1], args.resolution)
    candidates = np.tile(template_norm, (args.resolution * args.resolution, 1))
    vv_i, vv_j = np.meshgrid(grid_i, grid_j, indexing="ij")
    candidates[:, i] = vv_i.ravel()
    candidates[:, j] = vv_j.ravel()
    values = model.advantage_normalized(s_norm, candidates)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name_i = schema.behavior_columns[i]
    name_j = schema.behavior_columns[j]
    with (out / "surface.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([name_i, name_j, "advantage"])
        for row, value in zip(candidates, values):
            writer.writerow([repr(float(row[i])), repr(float(row[j])), repr(float(value))])
    _write_manifest(out, "surface", args, ["surface.csv"], started)
    print(f"wrote {args.resolution * args.resolution} grid points to {out / 'surface.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetrank",
        description="Environment-debiased driver ranking and optimal driver placement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--drivers", type=int, default=20)
    p.add_argument("--trips", type=int, default=100, help="trips per driver")
    p.add_argument("--d-env", type=int, default=8)
    p.add_argument("--d-behavior", type=int, default=6)
    p.add_argument("--spacing", type=float, default=0.25, help="skill gap between drivers")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--env-shift", action="store_true",
                   help="give odd drivers harder environments (equal skills)")
    p.add_argument("--interaction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="fit normalization and both regressors")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", default="64,64,64")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lenient", action="store_true", help="skip unparsable rows")
    p.add_argument("--out", default="bundle")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="rank drivers by mean debiased advantage")
    p.add_argument("--data", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--schema", help="optional cross-check against the bundle schema")
    p.add_argument("--raw-units", action="store_true")
    p.add_argument("--min-trips", type=int, default=assessment.LOW_TRIP_WARN_THRESHOLD)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--out", default="ranking-out")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("place", help="find the best behavior for an environment and match a driver")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True, help="trips used to build driver profiles")
    p.add_argument("--env", required=True, help="JSON file with the environment vector")
    p.add_argument("--fix-template", help="JSON behavior vector for the fixed dimensions")
    p.add_argument("--free", help="comma-separated names of the searched dimensions")
    p.add_argument("--normalized", action="store_true",
                   help="env and template are already in normalized units")
    p.add_argument("--invert-match", action="store_true",
                   help="debug: match the farthest profile instead of the nearest")
    p.add_argument("--max-generations", type=int, default=placement.DEFAULT_MAX_GENERATIONS)
    p.add_argument("--sigma0", type=float, default=placement.DEFAULT_SIGMA,
                   help="initial search step size in normalized behavior units")
    p.add_argument("--population", type=int, default=None)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="placement-out")
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("surface", help="advantage grid over two behavior dimensions")
    p.add_argument("--bundle", required=True)
    p.add_argument("--env", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--free", required=True, help="two comma-separated dimension names")
    p.add_argument("--resolution", type=int, default=50)
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--out", default="surface-out")
    p.set_defaults(func=cmd_surface)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FleetrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
