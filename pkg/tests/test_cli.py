import csv
import json

import pytest

import tools.experiment
from app import main
from services.experiment_runner import EXPERIMENTS, CellStatus, ExperimentCell, ExperimentRunner, get_plan
from services.field_io import read_field, read_log
from tools.experiment import SUMMARY_COLUMNS, write_summary
from tools.manifest import RunManifest


def _simulate(tmp_path, *extra, name="data.ff", T="1.5", noise="0"):
    out = tmp_path / name
    code = main(["simulate", "--phantom", "a", "--speed", "I", "--N", "32", "--T", T,
                 "--oversample", "1", "--noise", noise, "--out", str(out), *extra])
    assert code == 0
    return out


class TestSimulate:
    def test_writes_data_truth_and_manifest(self, tmp_path, capsys):
        out = _simulate(tmp_path, "--preview")
        for suffix in ("data.ff", "data_truth.ff", "data.pgm", "data.manifest.json"):
            assert (tmp_path / suffix).exists(), suffix
        g = read_field(str(out))
        assert g.grid.N == 32
        assert "data:" in capsys.readouterr().out

    def test_box_defaults_to_t_plus_margin(self, tmp_path):
        _simulate(tmp_path, T="2.0")
        manifest = json.loads((tmp_path / "data.manifest.json").read_text())
        assert manifest["params"]["a"] == 3.25
        assert manifest["command"] == "simulate"
        assert manifest["registry_version"] == 2

    def test_same_seed_same_bytes(self, tmp_path):
        first = _simulate(tmp_path, "--seed", "4", name="one.ff", noise="0.02")
        second = _simulate(tmp_path, "--seed", "4", name="two.ff", noise="0.02")
        assert first.read_bytes() == second.read_bytes()
        third = _simulate(tmp_path, "--seed", "5", name="three.ff", noise="0.02")
        assert third.read_bytes() != first.read_bytes()

    def test_odd_grid_size_is_a_usage_error(self, tmp_path, capsys):
        code = main(["simulate", "--phantom", "a", "--speed", "I", "--N", "33",
                     "--out", str(tmp_path / "x.ff")])
        assert code == 1
        assert "even" in capsys.readouterr().err


class TestReconstruct:
    def test_writes_outputs_and_errors(self, tmp_path):
        data = _simulate(tmp_path)
        prefix = tmp_path / "run"
        code = main(["reconstruct", "--data", str(data), "--speed", "I", "--T", "1.5",
                     "--iters", "3", "--truth", str(tmp_path / "data_truth.ff"),
                     "--out-prefix", str(prefix)])
        assert code == 0
        for suffix in ("_rec.ff", "_rec.pgm", "_log.csv", "_error.pgm", "_manifest.json"):
            assert (tmp_path / f"run{suffix}").exists(), suffix
        log = read_log(str(tmp_path / "run_log.csv"))
        assert len(log) == 3 and log.has_errors
        manifest = RunManifest.load(str(tmp_path / "run_manifest.json"))
        assert manifest.results["iterations"] == 3
        assert 0 <= manifest.results["l2_rel"] < 1

    def test_grid_flag_must_match_data(self, tmp_path, capsys):
        data = _simulate(tmp_path)
        code = main(["reconstruct", "--data", str(data), "--speed", "I", "--T", "1.5",
                     "--N", "40", "--out-prefix", str(tmp_path / "run")])
        assert code == 1
        assert "does not match" in capsys.readouterr().err

    def test_missing_data_file(self, tmp_path):
        code = main(["reconstruct", "--data", str(tmp_path / "none.ff"), "--speed", "I",
                     "--out-prefix", str(tmp_path / "run")])
        assert code == 1

    @pytest.mark.parametrize("value", ["2.5", "0", "-1"])
    def test_lambda_out_of_range(self, tmp_path, value):
        with pytest.raises(SystemExit) as exc:
            main(["reconstruct", "--data", "x.ff", "--speed", "I", "--lambda", value,
                  "--out-prefix", str(tmp_path / "run")])
        assert exc.value.code == 1


class TestContraction:
    def test_reports_ratios(self, capsys):
        code = main(["contraction", "--lambda", "0.5", "--trials", "2", "--speed", "I",
                     "--N", "32", "--T", "1.5"])
        out = capsys.readouterr().out
        assert code == 0
        assert "trial   1" in out and "contraction holds" in out

    def test_zero_trials(self):
        with pytest.raises(SystemExit) as exc:
            main(["contraction", "--trials", "0", "--speed", "I"])
        assert exc.value.code == 1


class TestReplay:
    def test_reproduces_simulation_bytes(self, tmp_path):
        data = _simulate(tmp_path, "--seed", "3", noise="0.02")
        original = data.read_bytes()
        data.unlink()
        assert main(["replay", "--manifest", str(tmp_path / "data.manifest.json")]) == 0
        assert data.read_bytes() == original

    def test_rejects_unknown_command(self, tmp_path):
        path = tmp_path / "m.json"
        RunManifest(command="contraction", params={}).save(str(path))
        assert main(["replay", "--manifest", str(path)]) == 1

    def test_rejects_broken_manifest(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{not json")
        assert main(["replay", "--manifest", str(path)]) == 1

    @pytest.mark.parametrize("params", [{"bogus": 1}, {"phantom": "a"}])
    def test_rejects_parameters_the_command_does_not_take(self, tmp_path, capsys, params):
        path = tmp_path / "m.json"
        RunManifest(command="simulate", params=params).save(str(path))
        assert main(["replay", "--manifest", str(path)]) == 1
        assert "do not fit 'simulate'" in capsys.readouterr().err


class TestManifest:
    def test_serialization_is_stable(self, tmp_path):
        m = RunManifest(command="simulate", params={"b": 1, "a": 2}, registry_version=1)
        path = str(tmp_path / "m.json")
        m.save(path)
        loaded = RunManifest.load(path)
        assert loaded.to_json() == m.to_json()
        assert loaded.artifacts["manifest"] == path


class TestExperimentPlans:
    def test_unknown_experiment_is_a_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["experiment", "--name", "nope", "--out-dir", str(tmp_path)])
        assert exc.value.code == 1
        with pytest.raises(ValueError, match="Unknown experiment"):
            get_plan("nope")

    def test_cell_ids(self):
        ids = [c.cell_id for c in EXPERIMENTS["noisy"].cells()]
        assert ids == ["a_III_exact", "a_III_noise0.02"]
        assert len(EXPERIMENTS["trapping"].cells()) == 3

    def test_iteration_override(self):
        assert all(c.iterations == 5 for c in EXPERIMENTS["constant"].cells(5))


def _fake_execute(cell, **_):
    if cell.phantom == "b":
        raise RuntimeError("boom")
    return {"l2_rel": 0.1, "h10_rel": 0.2, "max_abs": 0.3, "rate": None}, {}


class TestExperimentRunner:
    def test_failed_cell_does_not_stop_the_batch(self):
        cells = EXPERIMENTS["constant"].cells(2)
        ExperimentRunner(_fake_execute).run(cells)
        status = {c.phantom: c.status for c in cells}
        assert status == {"a": CellStatus.COMPLETED, "b": CellStatus.FAILED, "c": CellStatus.COMPLETED}
        failed = next(c for c in cells if c.phantom == "b")
        assert failed.error == "RuntimeError: boom"
        assert failed.elapsed_seconds is not None

    def test_threaded_runner(self):
        cells = EXPERIMENTS["constant"].cells(2)
        ExperimentRunner(_fake_execute, workers=3).run(cells)
        assert [c.status for c in cells].count(CellStatus.COMPLETED) == 2

    def test_rejects_zero_workers(self):
        with pytest.raises(ValueError):
            ExperimentRunner(_fake_execute, workers=0)

    def test_summary_rows(self, tmp_path):
        cell = ExperimentCell("a_I_exact", "a", "I", 0.0, 2.0, 2.0, 80,
                              status=CellStatus.COMPLETED, metrics={"l2_rel": 0.25, "rate": None})
        path = tmp_path / "summary.csv"
        write_summary([cell], str(path))
        rows = list(csv.reader(path.open()))
        assert tuple(rows[0]) == SUMMARY_COLUMNS
        row = dict(zip(rows[0], rows[1]))
        assert row["status"] == "completed" and row["l2_rel"] == "0.25" and row["rate"] == ""

    def test_experiment_command_reports_failures(self, tmp_path, monkeypatch):
        monkeypatch.setattr(tools.experiment, "_execute_cell", _fake_execute)
        code = main(["experiment", "--name", "constant", "--out-dir", str(tmp_path), "--iters", "2"])
        assert code == 2
        manifest = RunManifest.load(str(tmp_path / "manifest.json"))
        assert manifest.results["failed"] == ["b_I_exact"]
        assert manifest.params["iterations"] == 2
        assert (tmp_path / "summary.csv").exists()


class TestExperimentCommand:
    @pytest.mark.parametrize("name", sorted(EXPERIMENTS))
    def test_plan_writes_every_cell_and_replays(self, tmp_path, name):
        out_dir = tmp_path / name
        code = main(["experiment", "--name", name, "--out-dir", str(out_dir),
                     "--N", "32", "--iters", "2", "--oversample", "1"])
        assert code == 0

        cell_ids = [c.cell_id for c in EXPERIMENTS[name].cells()]
        for cell_id in cell_ids:
            rec = read_field(str(out_dir / f"{cell_id}_rec.ff"))
            assert rec.grid.N == 32
            for suffix in ("_rec.pgm", "_error.pgm"):
                assert (out_dir / f"{cell_id}{suffix}").read_bytes().startswith(b"P5")
            assert len(read_log(str(out_dir / f"{cell_id}_log.csv"))) == 2

        rows = list(csv.DictReader((out_dir / "summary.csv").open()))
        assert [r["cell_id"] for r in rows] == cell_ids
        assert all(r["status"] == "completed" and r["iterations"] == "2" for r in rows)

        first = {p.name: p.read_bytes() for p in out_dir.iterdir()}
        assert main(["replay", "--manifest", str(out_dir / "manifest.json")]) == 0
        assert {p.name: p.read_bytes() for p in out_dir.iterdir()} == first
