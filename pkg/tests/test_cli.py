import csv
import json
import subprocess
import sys

import pytest

from fluency import cli
from fluency.errors import TrainError

SUBCOMMANDS = ["synth", "extract", "train", "eval", "sweep", "compare"]


def run(argv, capsys):
    try:
        code = cli.main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def features(tmp_path_factory, small_corpus):
    out = tmp_path_factory.mktemp("feat")
    assert cli.main(["extract", "--manifest", str(small_corpus / "manifest.csv"),
                     "--out", str(out / "f23.csv"), "--jobs", "1"]) == 0
    assert cli.main(["extract", "--manifest", str(small_corpus / "manifest.csv"),
                     "--out", str(out / "f12.csv"), "--n-mfcc", "12", "--no-extras", "--jobs", "1"]) == 0
    return out


class TestUsage:
    @pytest.mark.parametrize("sub", SUBCOMMANDS)
    def test_help_lists_flags(self, sub, capsys):
        code, out, _ = run([sub, "--help"], capsys)
        assert code == 0
        assert "--seed" in out or sub == "eval"
        parser = cli.build_parser()
        subparser = parser._subparsers._group_actions[0].choices[sub]
        for action in subparser._actions:
            for flag in action.option_strings:
                assert flag in out

    def test_unknown_flag(self, capsys):
        code, _, err = run(["synth", "--out", "x", "--frobnicate"], capsys)
        assert code == 64 and "frobnicate" in err

    def test_missing_subcommand(self, capsys):
        assert run([], capsys)[0] == 64

    def test_bad_model_list(self, capsys, small_corpus):
        code, _, _ = run(["sweep", "--manifest", small_corpus / "manifest.csv", "--models", "svm,knn"], capsys)
        assert code == 64

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "fluency", "--version"], capture_output=True, text=True)
        assert res.returncode == 0 and "fluency" in res.stdout


class TestSynth:
    def test_happy_path_echoes_seed(self, tmp_path, capsys):
        code, out, _ = run(["synth", "--out", tmp_path / "data", "--seed", 7, "--counts", "2,1,1",
                            "--jobs", 1], capsys)
        assert code == 0
        assert "seed=7" in out and str(tmp_path / "data" / "manifest.csv") in out
        assert len(list((tmp_path / "data" / "wav").iterdir())) == 4

    def test_default_seed_is_echoed(self, tmp_path, capsys):
        code, out, _ = run(["synth", "--out", tmp_path, "--per-class", 1, "--jobs", 1], capsys)
        assert code == 0 and "seed=42" in out

    def test_balanced(self, tmp_path, capsys):
        code, out, _ = run(["synth", "--out", tmp_path, "--balanced", "--per-class", 50], capsys)
        assert code == 0 and "segments: 150" in out
        rows = list(csv.reader(open(tmp_path / "manifest.csv")))
        assert len(rows) == 151

    def test_unwritable(self, tmp_path, capsys):
        (tmp_path / "f").write_text("")
        code, _, err = run(["synth", "--out", tmp_path / "f" / "sub", "--per-class", 1], capsys)
        assert code == 2 and "error:" in err


class TestExtract:
    def test_width_and_determinism(self, features, small_corpus, tmp_path, capsys):
        header = (features / "f23.csv").read_text().splitlines()[0].split(",")
        assert len(header) == 4 + 23
        code, _, _ = run(["extract", "--manifest", small_corpus / "manifest.csv", "--out",
                          tmp_path / "again.csv", "--n-mfcc", 20, "--extras", "--jobs", 2], capsys)
        assert code == 0
        assert (tmp_path / "again.csv").read_bytes() == (features / "f23.csv").read_bytes()

    def test_zero_mfcc_is_usage_error(self, small_corpus, tmp_path, capsys):
        code, _, _ = run(["extract", "--manifest", small_corpus / "manifest.csv", "--out",
                          tmp_path / "x.csv", "--n-mfcc", 0], capsys)
        assert code == 64

    def test_bad_manifest(self, tmp_path, capsys):
        (tmp_path / "m.csv").write_text("path,speaker,label,sublevel\nmissing.wav,s,low,\n")
        code, _, err = run(["extract", "--manifest", tmp_path / "m.csv", "--out", tmp_path / "x.csv"], capsys)
        assert code == 2 and "missing.wav" in err

    def test_spectrogram_dump(self, tmp_path, capsys):
        cli.main(["synth", "--out", str(tmp_path / "c"), "--counts", "1,0,0", "--jobs", "1"])
        code, _, _ = run(["extract", "--manifest", tmp_path / "c" / "manifest.csv", "--out",
                          tmp_path / "f.csv", "--dump-spectrogram", tmp_path / "spec"], capsys)
        assert code == 0
        dumped = list((tmp_path / "spec").iterdir())
        assert len(dumped) == 1
        first = dumped[0].read_text().splitlines()
        assert len(first) == 1025


class TestTrainEval:
    def test_svm_train_then_eval(self, features, tmp_path, capsys):
        model = tmp_path / "svm.model"
        code, _, _ = run(["train", "--features", features / "f23.csv", "--model", "svm", "--c", 1.0,
                          "--out", model], capsys)
        assert code == 0 and model.exists()
        log = json.loads((tmp_path / "svm.model.log.json").read_text())
        assert log["split"]["ratio"] == 0.7 and log["run_config"]["model"] == "svm"
        code, out, _ = run(["eval", "--model", model, "--features", features / "f23.csv", "--out", tmp_path], capsys)
        assert code == 0
        acc = float(out.split("accuracy: ")[1].split()[0])
        assert 0.0 <= acc <= 1.0
        rows = list(csv.reader(open(tmp_path / "confusion_svm.csv")))
        assert rows[0][1:] == ["Low", "Intermediate", "High"]
        cells = [[int(v) for v in r[1:]] for r in rows[1:]]
        assert sum(map(sum, cells)) == 18
        assert sum(cells[i][i] for i in range(3)) / 18 == acc

    def test_dimension_mismatch_exits_2(self, features, tmp_path, capsys):
        model = tmp_path / "m.model"
        run(["train", "--features", features / "f23.csv", "--model", "svm", "--out", model], capsys)
        code, _, err = run(["eval", "--model", model, "--features", features / "f12.csv"], capsys)
        assert code == 2 and "23" in err

    def test_separate_test_file(self, features, tmp_path, capsys):
        model = tmp_path / "m.model"
        run(["train", "--features", features / "f12.csv", "--model", "rf", "--trees", 5,
             "--all-rows", "--out", model], capsys)
        code, out, _ = run(["eval", "--model", model, "--features", features / "f12.csv",
                            "--test-features", features / "f12.csv", "--out", tmp_path], capsys)
        assert code == 0 and "/60)" in out

    def test_rf_model_files_identical(self, features, tmp_path, capsys):
        for name in ("a", "b"):
            run(["train", "--features", features / "f23.csv", "--model", "rf", "--trees", 100,
                 "--seed", 1, "--out", tmp_path / f"{name}.model"], capsys)
        assert (tmp_path / "a.model").read_bytes() == (tmp_path / "b.model").read_bytes()

    def test_convergence_warning_is_not_fatal(self, features, tmp_path, capsys):
        code, _, err = run(["train", "--features", features / "f23.csv", "--model", "mlp",
                            "--epochs", 1, "--lr", 1e-12, "--out", tmp_path / "m.model"], capsys)
        assert code == 0 and "warning:" in err


class TestExperiments:
    FAST = ["--epochs", 3, "--trees", 10, "--jobs", 1]

    def test_sweep_twelve_cells(self, small_corpus, tmp_path, capsys):
        code, out, _ = run(["sweep", "--manifest", small_corpus / "manifest.csv", "--nmel", "5,10,12,20",
                            "--models", "svm,rf,mlp", "--out", tmp_path, *self.FAST], capsys)
        assert code == 0 and "seed=42" in out
        rows = list(csv.DictReader(open(tmp_path / "report.csv")))
        assert len(rows) == 12
        assert sorted({int(r["n_mfcc"]) for r in rows}) == [5, 10, 12, 20]
        meta = json.loads((tmp_path / "report_meta.json").read_text())
        assert meta["config"]["run_config"]["nmel"] == [5, 10, 12, 20]
        assert meta["config"]["feature_config"]["n_mfcc"] == 20

    def test_compare_two_cells_per_model(self, small_corpus, tmp_path, capsys):
        code, _, _ = run(["compare", "--manifest", small_corpus / "manifest.csv", "--n-mfcc", 20,
                          "--out", tmp_path, *self.FAST], capsys)
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "report.csv")))
        assert len(rows) == 6
        bars = list(csv.DictReader(open(tmp_path / "bars.csv")))
        assert [b["model"] for b in bars] == ["svm", "rf", "mlp"]
        for b in bars:
            assert 0 <= float(b["baseline"]) <= 1 and 0 <= float(b["extras"]) <= 1

    def test_partial_results_flushed(self, small_corpus, tmp_path, capsys, monkeypatch):
        real = cli.run_protocol
        calls = []

        def flaky(ds, feature_sets, *a, **kw):
            calls.append(feature_sets)
            if len(calls) == 2:
                raise TrainError("model=svm n_mfcc=20 extras=False repeat=0: boom")
            return real(ds, feature_sets, *a, **kw)

        monkeypatch.setattr(cli, "run_protocol", flaky)
        code, _, err = run(["sweep", "--manifest", small_corpus / "manifest.csv", "--nmel", "5,20",
                            "--models", "svm", "--out", tmp_path, "--jobs", 1], capsys)
        assert code == 2 and "n_mfcc=20" in err
        rows = list(csv.DictReader(open(tmp_path / "report.csv")))
        assert [r["n_mfcc"] for r in rows] == ["5"]
