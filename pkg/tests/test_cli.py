import csv
import json

import numpy as np
import pytest

from erpaffect import cli
from erpaffect.core import read_json

PIPELINE = ("simulate", "fit-irt", "features", "loso", "report")


def run_pipeline(out, seed=0, extra=()):
    for cmd in PIPELINE:
        assert cli.main([cmd, "--out", str(out), "--seed", str(seed), *extra]) == cli.EXIT_OK, cmd


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    run_pipeline(out)
    return out


class TestPipeline:
    def test_confusion_is_4x4_over_336(self, study):
        rep = read_json(study / "report.json", "report")
        for scale in ("pleasant", "arousal"):
            counts = np.array(rep["scales"][scale]["loso"]["confusion"]["counts"])
            assert counts.shape == (4, 4)
            assert counts.sum() == 336

    def test_rerun_is_byte_identical(self, study, tmp_path):
        run_pipeline(tmp_path)
        assert (tmp_path / "report.json").read_bytes() == (study / "report.json").read_bytes()
        assert (tmp_path / "summary.txt").read_bytes() == (study / "summary.txt").read_bytes()

    def test_manifests(self, study):
        for cmd in PIPELINE:
            m = read_json(study / f"manifest_{cmd}.json", "manifest")
            assert m["command"] == cmd and m["seed"] == 0
            assert set(m["versions"]) == {"erpaffect", "numpy", "scipy", "python"}
        m = read_json(study / "manifest_loso.json", "manifest")
        assert any(p.endswith("ratings.csv") for p in m["inputs"])
        assert all(len(h) == 64 for h in m["inputs"].values())
        assert m["outputs"] == ["loso_arousal.json", "loso_pleasant.json"]

    def test_polygon_table(self, study):
        rows = read_csv(study / "plot_emotion_polygon.csv")
        assert len(rows) == 7
        assert set(rows[0]) == {"emotion", "pleasant_mean", "pleasant_se", "arousal_mean", "arousal_se"}

    def test_accuracy_bars(self, study):
        rows = read_csv(study / "plot_accuracy_pleasant.csv")
        assert [r["rater"] for r in rows] == [f"sub{k}" for k in range(1, 7)] + ["mean"]
        acc = [float(r["accuracy"]) for r in rows]
        assert acc[-1] == pytest.approx(np.mean(acc[:-1]), abs=1e-12)

    def test_crc_rows_sum_to_one(self, study):
        for scale in ("pleasant", "arousal"):
            rows = read_csv(study / f"plot_crc_{scale}.csv")
            assert len(rows) == 6 * 161
            for r in rows:
                total = sum(float(r[f"grade{g}"]) for g in range(1, 10))
                assert total == pytest.approx(1.0, abs=1e-12)

    def test_sensitivity_scatter_and_affect_grid(self, study):
        assert len(read_csv(study / "plot_sensitivity_pleasant.csv")) == 56
        grid = read_csv(study / "plot_affect_grid.csv")
        assert sum(int(r["count"]) for r in grid) == 336

    def test_inputs_untouched(self, study, tmp_path):
        before = (study / "ratings.csv").read_bytes()
        assert cli.main(["report", "--data", str(study), "--out", str(tmp_path)]) == cli.EXIT_MISSING
        assert cli.main(["fit-irt", "--data", str(study), "--out", str(tmp_path)]) == cli.EXIT_OK
        assert (study / "ratings.csv").read_bytes() == before
        assert not (tmp_path / "ratings.csv").exists()

    def test_cluster(self, study, tmp_path):
        assert cli.main(["cluster", "--data", str(study), "--out", str(tmp_path)]) == cli.EXIT_OK
        rows = read_csv(tmp_path / "clusters.csv")
        assert len(rows) == 336

    def test_train(self, study, tmp_path):
        for cmd in ("fit-irt", "features"):
            assert cli.main([cmd, "--data", str(study), "--out", str(tmp_path), "--scale", "pleasant"]) == 0
        for flag in ("48", "192"):
            code = cli.main(["train", "--data", str(study), "--out", str(tmp_path), "--scale", "pleasant",
                             "--features", flag])
            assert code == cli.EXIT_OK
        sens = read_json(tmp_path / "sensitivity_pleasant.json", "sensitivity")
        assert len(sens["regressor"]["selected"]) <= 10
        assert (tmp_path / "classifier_pleasant.json").exists()


class TestErrors:
    def test_report_before_loso(self, tmp_path, capsys):
        for cmd in ("simulate", "fit-irt"):
            assert cli.main([cmd, "--out", str(tmp_path)]) == 0
        capsys.readouterr()
        assert cli.main(["report", "--out", str(tmp_path)]) == cli.EXIT_MISSING
        assert "loso_pleasant.json" in capsys.readouterr().err

    def test_fit_without_ratings(self, tmp_path, capsys):
        assert cli.main(["fit-irt", "--out", str(tmp_path)]) == cli.EXIT_MISSING
        assert "ratings.csv" in capsys.readouterr().err

    def test_bad_flag_value(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            cli.main(["loso", "--out", str(tmp_path), "--features", "64"])
        assert exc.value.code == cli.EXIT_USAGE

    def test_loso_rejects_192(self, tmp_path, capsys):
        assert cli.main(["loso", "--out", str(tmp_path), "--features", "192"]) == cli.EXIT_USAGE
        assert "48" in capsys.readouterr().err

    def test_bad_levels(self, tmp_path):
        assert cli.main(["fit-irt", "--out", str(tmp_path), "--levels", "12"]) == cli.EXIT_USAGE

    def test_schema_mismatch(self, tmp_path, capsys):
        for cmd in ("simulate", "fit-irt"):
            assert cli.main([cmd, "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "grm_pleasant.json").read_text())
        doc["format"] = 99
        (tmp_path / "grm_pleasant.json").write_text(json.dumps(doc))
        assert cli.main(["loso", "--out", str(tmp_path)]) == cli.EXIT_DATA
        assert "format version" in capsys.readouterr().err

    def test_bad_ratings_file(self, tmp_path):
        (tmp_path / "ratings.csv").write_text("rater,item,pleasant,arousal\nsub1,1,0,5\n")
        assert cli.main(["fit-irt", "--out", str(tmp_path)]) == cli.EXIT_DATA


class TestConfig:
    def test_file_values(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# study settings\nseed = 42\nscale = pleasant  # one scale\nridge = 0.01\nlevels = 3\n")
        args = cli.build_parser().parse_args(["loso", "--config", str(path), "--out", str(tmp_path)])
        cfg = cli.make_config(args)
        assert (cfg.seed, cfg.scale, cfg.ridge, cfg.levels) == (42, "pleasant", 0.01, 3)
        assert cfg.data == tmp_path

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 42\n")
        args = cli.build_parser().parse_args(["simulate", "--config", str(path), "--seed", "7"])
        assert cli.make_config(args).seed == 7

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("sead = 42\n")
        assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_DATA

    def test_bad_type(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = lots\n")
        assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_USAGE

    def test_missing_config(self, tmp_path):
        assert cli.main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == cli.EXIT_MISSING

    def test_validation(self):
        with pytest.raises(cli.UsageError):
            cli.PipelineConfig(scale="valence")
        with pytest.raises(cli.UsageError):
            cli.PipelineConfig(seed=-1)
        with pytest.raises(cli.UsageError):
            cli.PipelineConfig(jobs=0)
        assert cli.PipelineConfig(scale="arousal").scales == ("arousal",)

    def test_all_subcommands_exist(self):
        assert set(cli.COMMANDS) == {"simulate", "fit-irt", "cluster", "features", "train", "loso", "report"}
