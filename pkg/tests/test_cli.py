import csv
import json

import numpy as np
import pytest

from fleetrank.cli import build_parser, main
from fleetrank.models import load_bundle
from fleetrank.synth import SynthConfig, generate


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small synth + train pipeline shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("pipe")
    data = root / "data"
    bundle = root / "bundle"
    assert run("synth", "--drivers", "4", "--trips", "40", "--seed", "3",
               "--out", str(data)) == 0
    assert run("train", "--data", str(data / "data.csv"), "--schema", str(data / "schema.json"),
               "--epochs", "15", "--hidden", "8,8,8", "--seed", "4", "--out", str(bundle)) == 0
    return data, bundle


def test_synth_outputs(tmp_path):
    out = tmp_path / "s"
    assert run("synth", "--drivers", "3", "--trips", "5", "--seed", "1", "--out", str(out)) == 0
    rows = (out / "data.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 15
    assert (out / "schema.json").exists()
    assert (out / "groundtruth.json").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 1
    assert "duration_s" in manifest


def test_synth_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run("synth", "--drivers", "3", "--trips", "5", "--seed", "9", "--out", str(a))
    run("synth", "--drivers", "3", "--trips", "5", "--seed", "9", "--out", str(b))
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    assert (a / "groundtruth.json").read_bytes() == (b / "groundtruth.json").read_bytes()


def test_synth_rejects_single_driver(tmp_path, capsys):
    code = run("synth", "--drivers", "1", "--out", str(tmp_path / "x"))
    assert code == 2
    assert "2 drivers" in capsys.readouterr().err


def test_train_defaults_to_100_epochs():
    parser = build_parser()
    args = parser.parse_args(["train", "--data", "d", "--schema", "s"])
    assert args.epochs == 100
    assert args.batch == 128
    assert args.lr == pytest.approx(1e-3)


def test_train_outputs(pipeline):
    data, bundle = pipeline
    for name in ("baseline.json", "behavior.json", "stats.json", "meta.json",
                 "baseline_curve.csv", "behavior_curve.csv", "manifest.json"):
        assert (bundle / name).exists()
    with (bundle / "baseline_curve.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["epoch", "mse"]
    assert len(rows) == 1 + 15
    meta = json.loads((bundle / "meta.json").read_text())
    assert meta["training"]["epochs"] == 15
    assert meta["behavior_seed"] == 5  # baseline seed + 1


def test_rank_outputs(pipeline, tmp_path):
    data, bundle = pipeline
    out = tmp_path / "rank"
    assert run("rank", "--data", str(data / "data.csv"), "--bundle", str(bundle),
               "--out", str(out)) == 0
    text = (out / "ranking.txt").read_text().splitlines()
    assert len(text) == 1 + 4  # header + one line per driver
    with (out / "ranking.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert len(rows) == 1 + 4
    ranks = [int(r[0]) for r in rows[1:]]
    assert ranks == [1, 2, 3, 4]


def test_rank_raw_units_preserves_order(pipeline, tmp_path):
    data, bundle = pipeline
    a, b = tmp_path / "n", tmp_path / "r"
    run("rank", "--data", str(data / "data.csv"), "--bundle", str(bundle), "--out", str(a))
    run("rank", "--data", str(data / "data.csv"), "--bundle", str(bundle), "--out", str(b),
        "--raw-units")
    with (a / "ranking.csv").open() as f:
        norm = list(csv.reader(f))[1:]
    with (b / "ranking.csv").open() as f:
        raw = list(csv.reader(f))[1:]
    assert [r[1] for r in norm] == [r[1] for r in raw]
    model, _, _ = load_bundle(bundle)
    factor = model.raw_unit_scale()
    for rn, rr in zip(norm, raw):
        assert float(rr[2]) == pytest.approx(float(rn[2]) * factor, rel=1e-9)


def test_place_missing_bundle(tmp_path, capsys):
    env = tmp_path / "env.json"
    env.write_text("[0, 0, 0, 0, 0, 0, 0, 0]")
    code = run("place", "--bundle", str(tmp_path / "nope"), "--data", "x.csv",
               "--env", str(env), "--out", str(tmp_path / "o"))
    assert code == 2


def test_place_end_to_end(pipeline, tmp_path):
    data, bundle = pipeline
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.0] * 8))
    out = tmp_path / "placed"
    assert run("place", "--bundle", str(bundle), "--data", str(data / "data.csv"),
               "--env", str(env), "--seed", "5", "--max-generations", "60",
               "--out", str(out)) == 0
    result = json.loads((out / "placement.json").read_text())
    assert result["matched_driver"].startswith("driver_")
    assert len(result["optimal_behavior_normalized"]) == 6
    assert len(result["runner_ups"]) <= 5
    assert result["argmax_consistent"] is True
    np.testing.assert_array_equal(
        result["optimal_behavior_raw_rounded"],
        np.round(result["optimal_behavior_raw"]),
    )
    with (out / "search_history.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["generation", "best_advantage"]
    assert len(rows) == 1 + result["generations_used"]
    best = [float(r[1]) for r in rows[1:]]
    assert best[-1] == result["optimal_advantage"]
    assert all(b >= a - 1e-15 for a, b in zip(best, best[1:]))  # running max


def test_place_deterministic(pipeline, tmp_path):
    data, bundle = pipeline
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.1] * 8))
    outs = []
    for name in ("p1", "p2"):
        out = tmp_path / name
        assert run("place", "--bundle", str(bundle), "--data", str(data / "data.csv"),
                   "--env", str(env), "--seed", "7", "--max-generations", "60",
                   "--out", str(out)) == 0
        outs.append((out / "placement.json").read_bytes())
    assert outs[0] == outs[1]


def test_place_with_template(pipeline, tmp_path):
    data, bundle = pipeline
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.0] * 8))
    template = tmp_path / "a0.json"
    template.write_text(json.dumps([0.0] * 6))
    out = tmp_path / "constrained"
    assert run("place", "--bundle", str(bundle), "--data", str(data / "data.csv"),
               "--env", str(env), "--fix-template", str(template),
               "--free", "beh_00,beh_01", "--normalized", "--seed", "8",
               "--max-generations", "60", "--out", str(out)) == 0
    result = json.loads((out / "placement.json").read_text())
    behavior = result["optimal_behavior_normalized"]
    assert behavior[2:] == [0.0, 0.0, 0.0, 0.0]  # fixed at the template


def test_place_free_requires_template(pipeline, tmp_path, capsys):
    data, bundle = pipeline
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.0] * 8))
    code = run("place", "--bundle", str(bundle), "--data", str(data / "data.csv"),
               "--env", str(env), "--free", "beh_00", "--out", str(tmp_path / "o"))
    assert code == 2


def test_place_unknown_dimension(pipeline, tmp_path):
    data, bundle = pipeline
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.0] * 8))
    template = tmp_path / "a0.json"
    template.write_text(json.dumps([0.0] * 6))
    code = run("place", "--bundle", str(bundle), "--data", str(data / "data.csv"),
               "--env", str(env), "--fix-template", str(template),
               "--free", "no_such_dim", "--out", str(tmp_path / "o"))
    assert code == 2


def test_surface_grid(pipeline, tmp_path):
    data, bundle = pipeline
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.0] * 8))
    template = tmp_path / "a0.json"
    template.write_text(json.dumps([0.0] * 6))
    out = tmp_path / "surf"
    assert run("surface", "--bundle", str(bundle), "--env", str(env),
               "--template", str(template), "--free", "beh_00,beh_01",
               "--resolution", "21", "--normalized", "--out", str(out)) == 0
    with (out / "surface.csv").open() as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["beh_00", "beh_01", "advantage"]
    assert len(rows) == 1 + 21 * 21


def test_surface_matches_constrained_place(tmp_path):
    # a hand-assembled bundle with a sharp known peak makes the
    # grid-vs-optimizer position agreement unambiguous
    from fleetrank.models import save_bundle
    from fleetrank.trip_data import DatasetSchema
    from tests.test_placement import cone_peak_model

    target = np.array([0.35, -0.6])
    model = cone_peak_model(target)
    schema = DatasetSchema(
        env_columns=("e0", "e1"),
        behavior_columns=("overspeed", "overrpm"),
        performance_columns=("total_mpg",),
    )
    bundle = tmp_path / "bundle"
    save_bundle(bundle, model, schema)
    data = tmp_path / "trips.csv"
    data.write_text(
        "trip_id,driver_id,e0,e1,overspeed,overrpm,total_mpg\n"
        "t1,d1,0.0,0.0,0.3,-0.5,1.0\n"
        "t2,d2,0.0,0.0,-1.0,1.0,1.0\n",
        encoding="utf-8",
    )
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.0, 0.0]))
    template = tmp_path / "a0.json"
    template.write_text(json.dumps([0.0, 0.0]))

    surf_out = tmp_path / "surf"
    run("surface", "--bundle", str(bundle), "--env", str(env), "--template", str(template),
        "--free", "overspeed,overrpm", "--resolution", "41", "--normalized",
        "--out", str(surf_out))
    with (surf_out / "surface.csv").open() as handle:
        rows = list(csv.reader(handle))[1:]
    grid = np.array([[float(a), float(b), float(v)] for a, b, v in rows])
    best = grid[np.argmax(grid[:, 2])]

    place_out = tmp_path / "place"
    run("place", "--bundle", str(bundle), "--data", str(data),
        "--env", str(env), "--fix-template", str(template), "--free", "overspeed,overrpm",
        "--normalized", "--seed", "3", "--sigma0", "0.5", "--population", "16",
        "--tolerance", "1e-12", "--out", str(place_out))
    result = json.loads((place_out / "placement.json").read_text())
    a_star = result["optimal_behavior_normalized"]
    cell = 3.0 / 40  # box is [-1.5, 1.5] in both searched dims
    assert abs(a_star[0] - best[0]) <= cell + 1e-9
    assert abs(a_star[1] - best[1]) <= cell + 1e-9
    assert result["matched_driver"] == "d1"  # profile at the peak


def test_surface_constant_when_behavior_ignored(tmp_path):
    # zero-weight nets make the advantage identically zero over the grid
    from fleetrank.models import AdvantageModel, BaselineModel, BehaviorModel, save_bundle
    from fleetrank.neural import Mlp, MlpConfig
    from fleetrank.normalization import fit_stats

    ds, _ = generate(SynthConfig(n_drivers=3, trips_per_driver=10, seed=2))
    stats = fit_stats(ds)

    def zero_net(d_in):
        config = MlpConfig(d_in, (4, 4, 4), 2, seed=0)
        return Mlp(config,
                   [np.zeros((4, d_in)), np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((2, 4))],
                   [np.zeros(4), np.zeros(4), np.zeros(4), np.zeros(2)])

    model = AdvantageModel(
        baseline=BaselineModel(net=zero_net(8), stats=stats),
        behavior=BehaviorModel(net=zero_net(14), stats=stats),
        metric_index=0,
        behavior_box=np.stack([np.full(6, -1.0), np.full(6, 1.0)], axis=1),
    )
    bundle = tmp_path / "zero_bundle"
    save_bundle(bundle, model, ds.schema)
    env = tmp_path / "env.json"
    env.write_text(json.dumps([0.0] * 8))
    template = tmp_path / "a0.json"
    template.write_text(json.dumps([0.0] * 6))
    out = tmp_path / "surf"
    assert run("surface", "--bundle", str(bundle), "--env", str(env),
               "--template", str(template), "--free", "beh_00,beh_01",
               "--resolution", "11", "--normalized", "--out", str(out)) == 0
    with (out / "surface.csv").open() as handle:
        values = {row[2] for row in list(csv.reader(handle))[1:]}
    assert values == {"0.0"}


def test_usage_error_exit_code():
    assert run("no-such-command") == 2


@pytest.mark.filterwarnings("ignore:overflow", "ignore:invalid value")
def test_numeric_failure_exit_code(pipeline, tmp_path, capsys):
    data, _ = pipeline
    # an absurd learning rate overflows the forward pass within one epoch
    code = run("train", "--data", str(data / "data.csv"), "--schema",
               str(data / "schema.json"), "--epochs", "5", "--lr", "1e40",
               "--hidden", "8,8,8", "--out", str(tmp_path / "b"))
    assert code == 1
    assert "non-finite loss" in capsys.readouterr().err
