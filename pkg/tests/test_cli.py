import json
import subprocess
import sys

import jsonschema
import pytest

from bgtkit.cli import load_schema, main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def validate(doc, name):
    jsonschema.validate(doc, load_schema(name))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["--seed", "4", "synth", "--games", "12", "--observations", "50", "--out", str(d / "data.json")]) == 0
    common = ["--data", d / "data.json", "--epochs", "10", "--lr", "0.02", "--splits", "3"]
    assert main(["--seed", "1", "train", *map(str, common), "--out", str(d / "uni.json")]) == 0
    assert main(["--seed", "1", "train", *map(str, common), "--level0", "maxmax", "--out", str(d / "mm.json")]) == 0
    return d


class TestCommands:
    def test_schemas_are_valid(self):
        for name in ("dataset", "model_spec", "result", "comparison", "report", "summary", "theorem31", "probe"):
            jsonschema.Draft202012Validator.check_schema(load_schema(name))

    def test_synth_deterministic(self, tmp_path, workdir, capsys):
        run(capsys, "--seed", 4, "synth", "--games", 12, "--observations", 50, "--out", tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == (workdir / "data.json").read_bytes()
        validate(json.loads((workdir / "data.json").read_text()), "dataset")

    def test_seed_from_env(self, tmp_path, workdir, capsys, monkeypatch):
        monkeypatch.setenv("BGT_SEED", "4")
        run(capsys, "synth", "--games", 12, "--observations", 50, "--out", tmp_path / "env.json")
        assert (tmp_path / "env.json").read_bytes() == (workdir / "data.json").read_bytes()

    def test_ingest(self, workdir, capsys):
        code, out, _ = run(capsys, "ingest", workdir / "data.json")
        assert code == 0
        doc = json.loads(out)
        validate(doc, "summary")
        assert doc["games"] == 12 and doc["observations"] == 600

    def test_ingest_error_names_game(self, tmp_path, capsys):
        bad = {"observations": [{"game_id": "g-7", "u1": [[1, 2]], "u2": [[0, 1]], "counts": [1, 1]}]}
        (tmp_path / "bad.json").write_text(json.dumps(bad))
        code, _, err = run(capsys, "ingest", tmp_path / "bad.json")
        assert code == 1 and "g-7" in err

    def test_train_result_schema(self, workdir):
        doc = json.loads((workdir / "uni.json").read_text())
        validate(doc, "result")
        assert [r["split_id"] for r in doc["runs"]] == [1, 2, 3]
        assert len(doc["runs"][0]["loss_trace"]) == 11

    def test_train_with_spec_file(self, tmp_path, workdir, capsys):
        spec = {"level0": "enet", "strategic": "qch_poisson", "layers": [2], "potentials": "fixed4", "train": {"lr": 0.01}}
        validate(spec, "model_spec")
        (tmp_path / "spec.json").write_text(json.dumps(spec))
        code, out, _ = run(capsys, "train", "--spec", tmp_path / "spec.json", "--data", workdir / "data.json",
                           "--epochs", 3, "--out", tmp_path / "r.json")
        assert code == 0
        run_doc = json.loads((tmp_path / "r.json").read_text())["runs"][0]
        assert run_doc["config"]["lr"] == 0.01 and run_doc["config"]["epochs"] == 3
        assert run_doc["spec"]["potentials"] == "fixed4"

    def test_sweep(self, tmp_path, workdir, capsys, monkeypatch):
        import bgtkit.cli as cli

        monkeypatch.setitem(cli.GRIDS, "enet", {"l1": [1e-4], "dropout": [0.0, 0.05], "replicates": 1})
        code, _, _ = run(capsys, "sweep", "--data", workdir / "data.json", "--level0", "enet", "--layers", "2",
                         "--epochs", 3, "--grid", "enet", "--out", tmp_path / "s.json")
        assert code == 0
        doc = json.loads((tmp_path / "s.json").read_text())
        validate(doc, "result")
        assert len(doc["runs"][0]["sweep"]) == 2

    def test_compare(self, tmp_path, workdir, capsys):
        out = tmp_path / "table.json"
        code, _, _ = run(capsys, "compare", "--results", f"{workdir / 'uni.json'},{workdir / 'mm.json'}",
                         "--reference", "mm", "--resamples", 1000, "--out", out)
        assert code == 0
        doc = json.loads(out.read_text())
        validate(doc, "comparison")
        assert [r["model"] for r in doc["rows"]] == ["uni"]

    def test_report(self, workdir, capsys):
        code, out, _ = run(capsys, "report", "--results", workdir / "uni.json")
        doc = json.loads(out)
        validate(doc, "report")
        assert len(doc["absolute"]) == 1 and "differences" not in doc
        code, out, _ = run(capsys, "report", "--results", f"{workdir / 'uni.json'},{workdir / 'uni.json'}",
                           "--reference", "uni", "--resamples", 1000)
        assert code == 1  # the same name twice is ambiguous
        code, out, _ = run(capsys, "report", "--results", f"{workdir / 'uni.json'},{workdir / 'mm.json'}",
                           "--reference", "uni", "--resamples", 1000)
        doc = json.loads(out)
        validate(doc, "report")
        assert doc["differences"][0]["model"] == "mm"

    def test_report_self_reference_point_interval(self, tmp_path, workdir, capsys):
        (tmp_path / "copy.json").write_text((workdir / "uni.json").read_text())
        code, out, _ = run(capsys, "report", "--results", f"{workdir / 'uni.json'},{tmp_path / 'copy.json'}",
                           "--reference", "uni", "--resamples", 1000)
        row = json.loads(out)["differences"][0]
        assert row["mean_diff"] == 0.0 and row["lo95"] == row["hi95"] == 0.0

    def test_missing_reference(self, workdir, capsys):
        code, _, err = run(capsys, "compare", "--results", workdir / "uni.json", "--reference", "nothere")
        assert code == 1 and "nothere" in err

    @pytest.mark.parametrize("check", ["dominance", "other", "theorem31"])
    def test_probe(self, workdir, capsys, check):
        code, out, _ = run(capsys, "probe", "--model", workdir / "uni.json", "--check", check, "--trials", 5)
        assert code == 0
        validate(json.loads(out), "probe")

    def test_probe_bottleneck(self, tmp_path, workdir, capsys):
        run(capsys, "train", "--data", workdir / "data.json", "--level0", "enet", "--layers", "2",
            "--strategic", "none", "--epochs", 2, "--out", tmp_path / "e.json")
        code, out, _ = run(capsys, "probe", "--model", tmp_path / "e.json", "--check", "bottleneck")
        doc = json.loads(out)
        validate(doc, "probe")
        for pair in doc["pairs"]:
            assert pair["max_output_gap"] < 1e-9 and pair["min_dominant_prob"] <= 0.5 + 1e-9
        code, _, _ = run(capsys, "probe", "--model", workdir / "uni.json", "--check", "bottleneck")
        assert code == 1

    @pytest.mark.parametrize("negative", [False, True])
    def test_verify_theorem31(self, capsys, negative):
        argv = ["verify-theorem31", "--trials", 100] + (["--negative"] if negative else [])
        code, out, _ = run(capsys, *argv)
        doc = json.loads(out)
        validate(doc, "theorem31")
        assert code == 0 and doc["passed"] and doc["negative"] == negative

    def test_numerical_exit_code(self, tmp_path, workdir, capsys):
        code, _, err = run(capsys, "train", "--data", workdir / "data.json", "--lr", "1e6", "--epochs", 50)
        assert code == 2 and "numerical" in err

    def test_validation_exit_code(self, workdir, capsys):
        code, _, _ = run(capsys, "train", "--data", workdir / "data.json", "--level0", "nonsense")
        assert code == 1

    def test_console_script_help(self):
        out = subprocess.run([sys.executable, "-m", "bgtkit.cli", "--help"], capture_output=True, text=True)
        assert out.returncode == 0
        for cmd in ("ingest", "synth", "train", "sweep", "compare", "probe", "verify-theorem31", "report"):
            assert cmd in out.stdout
