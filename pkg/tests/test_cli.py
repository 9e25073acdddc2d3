"""Command-line interface, exercised in-process through cli.main."""

import json

import pytest

from fontauth import cli
from fontauth.fixtures import fixture_counts, fixture_matrix
from fontauth.metrics import BinaryCounts, EvalReport, save_report
from fontauth.synthgen import Dataset, export_pgm_dir, save_dataset

from conftest import make_toy_dataset


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def split_by_flag(ds):
    genuine = [s for s in ds.samples if not s.forged]
    forged = [s for s in ds.samples if s.forged]
    return (Dataset(samples=genuine, alphabet_size=ds.alphabet_size, provenance={}),
            Dataset(samples=forged, alphabet_size=ds.alphabet_size, provenance={}))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Toy dataset files plus CLI-trained models, built once per module."""
    root = tmp_path_factory.mktemp("cli")
    train_ds = make_toy_dataset(12, seed=0)
    val_ds = make_toy_dataset(4, seed=1)
    neg, pos = split_by_flag(make_toy_dataset(6, seed=2))
    paths = {
        "train": root / "train.ffds",
        "val": root / "val.ffds",
        "neg": root / "neg.ffds",
        "pos": root / "pos.ffds",
        "auth_model": root / "c.ffnn",
        "std_model": root / "std.ffnn",
        "root": root,
    }
    save_dataset(train_ds, paths["train"])
    save_dataset(val_ds, paths["val"])
    save_dataset(neg, paths["neg"])
    save_dataset(pos, paths["pos"])
    for kind, out in (("c", paths["auth_model"]), ("std", paths["std_model"])):
        code = cli.main(["train", "--data", str(paths["train"]), "--val", str(paths["val"]),
                         "--out", str(out), "--kind", kind, "--epochs", "4",
                         "--lr", "0.1", "--momentum", "0.8", "--seed", "0"])
        assert code == 0
    field_dir = root / "field"
    export_pgm_dir(Dataset(samples=neg.samples[:5], alphabet_size=4, provenance={}),
                   field_dir)
    paths["field"] = field_dir
    return paths


# --- exit codes ---------------------------------------------------------------

def test_no_command_is_a_usage_error(capsys):
    code, _, _ = run(capsys, *[])
    assert code == 1


def test_missing_required_flag_is_a_usage_error(capsys):
    code, _, _ = run(capsys, "synth", "--out", "x.ffds")
    assert code == 1


def test_unknown_command_is_a_usage_error(capsys):
    code, _, _ = run(capsys, "frobnicate")
    assert code == 1


def test_missing_input_file_is_a_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "eval", "--from-report", str(tmp_path / "absent.json"))
    assert code == 2
    assert "data error" in err


def test_version_flag(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0
    assert "fontauth" in out


# --- synth ---------------------------------------------------------------------

@pytest.mark.slow
def test_synth_is_byte_deterministic(capsys, registry_file, tmp_path):
    outs = []
    for name in ("a.ffds", "b.ffds"):
        out = tmp_path / name
        code, stdout, _ = run(capsys, "synth", "--registry", str(registry_file),
                              "--out", str(out), "--per-cell", "2", "--seed", "5")
        assert code == 0
        assert "samples: 40" in stdout
        assert "dataset hash: " in stdout
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.slow
def test_synth_role_split(capsys, registry_file, tmp_path):
    out = tmp_path / "genuine.ffds"
    code, stdout, _ = run(capsys, "synth", "--registry", str(registry_file),
                          "--out", str(out), "--split", "genuine",
                          "--per-cell", "3", "--seed", "1", "--no-augment")
    assert code == 0
    assert "samples: 30" in stdout
    assert "forged " not in stdout.split("dataset hash")[0].replace("genuine:", "")
    from fontauth.synthgen import load_dataset
    ds = load_dataset(out)
    assert all(not s.forged for s in ds.samples)


# --- train ----------------------------------------------------------------------

def hash_line(stdout):
    return [ln for ln in stdout.splitlines() if ln.startswith("model hash: ")][0]


def test_train_repeats_to_the_same_hash(capsys, workspace, tmp_path):
    lines = []
    for name in ("m1.ffnn", "m2.ffnn"):
        code, stdout, _ = run(capsys, "train", "--data", str(workspace["train"]),
                              "--val", str(workspace["val"]), "--out", str(tmp_path / name),
                              "--kind", "cprime", "--epochs", "2", "--seed", "3")
        assert code == 0
        assert "epoch 0: loss " in stdout
        assert "best epoch: " in stdout
        lines.append(hash_line(stdout))
    assert lines[0] == lines[1]
    assert (tmp_path / "m1.ffnn").read_bytes() == (tmp_path / "m2.ffnn").read_bytes()


def test_train_config_file_and_flag_precedence(capsys, workspace, tmp_path):
    cfg = tmp_path / "train.json"
    cfg.write_text(json.dumps({"kind": "cprime", "epochs": 2, "seed": 9}))
    code, stdout, _ = run(capsys, "train", "--data", str(workspace["train"]),
                          "--val", str(workspace["val"]), "--out", str(tmp_path / "m.ffnn"),
                          "--config", str(cfg), "--epochs", "1")
    assert code == 0
    # the explicit flag overrides the config file
    assert "epoch 1:" not in stdout
    assert "epoch 0:" in stdout

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"learning_rate": 0.1}))
    code, _, err = run(capsys, "train", "--data", str(workspace["train"]),
                       "--val", str(workspace["val"]), "--out", str(tmp_path / "n.ffnn"),
                       "--config", str(bad))
    assert code == 1
    assert "unknown config key" in err


# --- eval -----------------------------------------------------------------------

def test_eval_live_writes_a_report(capsys, workspace, tmp_path):
    report_path = tmp_path / "report.json"
    code, stdout, _ = run(capsys, "eval", "--model", str(workspace["auth_model"]),
                          "--negative", str(workspace["neg"]),
                          "--positive", str(workspace["pos"]),
                          "--out", str(report_path))
    assert code == 0
    assert "sensitivity: " in stdout
    assert "specificity: " in stdout
    payload = json.loads(report_path.read_text())
    assert payload["schema"] == 1
    assert "matrix" in payload
    assert payload["provenance"]["inputs"]["model_sha256"]

    code, stdout, _ = run(capsys, "report", "--report", str(report_path))
    assert code == 0
    assert "overall: sensitivity" in stdout
    assert "font-miss-rate ranking" in stdout


def fixture_report_path(tmp_path):
    counts = fixture_counts("idnum", "multi_task")
    report = EvalReport(per_set={"all": counts}, overall=counts,
                        matrix=fixture_matrix("idnum"))
    path = tmp_path / "fixture_report.json"
    save_report(report, path)
    return path


def test_eval_from_report_reproduces_reference_analyses(capsys, tmp_path):
    path = fixture_report_path(tmp_path)
    code, stdout, _ = run(capsys, "eval", "--from-report", str(path),
                          "--exclude", "0,8", "--force-forged", "0,8")
    assert code == 0
    assert "sensitivity: 90.77%" in stdout
    assert "specificity: 87.35%" in stdout
    assert "exclusion sensitivity (without classes 0,8): 93.08%" in stdout
    assert "force-forged sensitivity (classes 0,8): 95.12%" in stdout


def test_eval_from_report_excludes_live_flags(capsys, tmp_path):
    path = fixture_report_path(tmp_path)
    code, _, err = run(capsys, "eval", "--from-report", str(path),
                       "--model", "whatever.ffnn")
    assert code == 1
    assert "--from-report" in err


def test_eval_analyses_need_a_matrix(capsys, tmp_path):
    counts = BinaryCounts(tp=10, tn=10, fp=1, fn=1)
    report = EvalReport(per_set={"all": counts}, overall=counts)
    path = tmp_path / "binary_report.json"
    save_report(report, path)
    code, _, err = run(capsys, "eval", "--from-report", str(path), "--exclude", "0")
    assert code == 1
    assert "matrix" in err


def test_eval_bad_class_list(capsys, tmp_path):
    path = fixture_report_path(tmp_path)
    code, _, _ = run(capsys, "eval", "--from-report", str(path), "--exclude", "0,zebra")
    assert code == 1


def test_eval_csv_outputs(capsys, tmp_path):
    path = fixture_report_path(tmp_path)
    matrix_csv = tmp_path / "matrix.csv"
    counts_csv = tmp_path / "counts.csv"
    code, _, _ = run(capsys, "eval", "--from-report", str(path),
                     "--matrix-csv", str(matrix_csv), "--counts-csv", str(counts_csv))
    assert code == 0
    assert matrix_csv.exists()
    assert "90.77" in counts_csv.read_text()


# --- verify ---------------------------------------------------------------------

def test_verify_prints_a_verdict(capsys, workspace, tmp_path):
    out = tmp_path / "verdict.json"
    code, stdout, _ = run(capsys, "verify", "--std-model", str(workspace["std_model"]),
                          "--auth-model", str(workspace["auth_model"]),
                          "--field", str(workspace["field"]), "--out", str(out))
    assert code == 0
    assert "flagged weight fraction: " in stdout
    assert "verdict: " in stdout
    lines = [ln for ln in stdout.splitlines() if ln.startswith(("FLAG", "ok  "))]
    assert len(lines) == 5

    payload = json.loads(out.read_text())
    assert payload["format"] == "fontauth-verdict"
    assert payload["result"]["verdict"] in ("genuine", "forged")
    assert len(payload["result"]["symbols"]) == 5
    assert payload["inputs"]["std_model_sha256"]


def test_verify_threshold_precedence(capsys, workspace, tmp_path):
    cfg = tmp_path / "verify.json"
    cfg.write_text(json.dumps({"threshold": 0.5}))
    code, stdout, _ = run(capsys, "verify", "--std-model", str(workspace["std_model"]),
                          "--auth-model", str(workspace["auth_model"]),
                          "--field", str(workspace["field"]), "--config", str(cfg))
    assert code == 0
    assert "(threshold 0.5)" in stdout

    code, stdout, _ = run(capsys, "verify", "--std-model", str(workspace["std_model"]),
                          "--auth-model", str(workspace["auth_model"]),
                          "--field", str(workspace["field"]), "--config", str(cfg),
                          "--threshold", "0.75")
    assert code == 0
    assert "(threshold 0.75)" in stdout


def test_verify_rejects_swapped_models(capsys, workspace):
    code, _, err = run(capsys, "verify", "--std-model", str(workspace["auth_model"]),
                       "--auth-model", str(workspace["std_model"]),
                       "--field", str(workspace["field"]))
    assert code == 2
    assert "char-only" in err


def test_verify_needs_crops(capsys, workspace, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    code, _, err = run(capsys, "verify", "--std-model", str(workspace["std_model"]),
                       "--auth-model", str(workspace["auth_model"]),
                       "--field", str(empty))
    assert code == 1
    assert "crops" in err


def test_verify_force_low_recall_needs_reliability(capsys, workspace):
    code, _, _ = run(capsys, "verify", "--std-model", str(workspace["std_model"]),
                     "--auth-model", str(workspace["auth_model"]),
                     "--field", str(workspace["field"]), "--force-low-recall")
    assert code == 1


# --- selfcheck ------------------------------------------------------------------

def test_selfcheck_passes(capsys):
    code, stdout, _ = run(capsys, "selfcheck")
    assert code == 0
    lines = stdout.strip().splitlines()
    assert all(ln.startswith("ok   - ") for ln in lines[:-1])
    assert lines[-1] == "selfcheck: 10/10 checks passed"


def test_selfcheck_reports_a_broken_fixture(capsys, monkeypatch):
    import fontauth.fixtures

    real = fontauth.fixtures.load_fixture

    def corrupted(name):
        d = real(name)
        if name == "idnum":
            d["multi_task"]["tp"] += 1
        return d

    monkeypatch.setattr(fontauth.fixtures, "load_fixture", corrupted)
    code, stdout, _ = run(capsys, "selfcheck")
    assert code == 3
    assert "FAIL - " in stdout
    assert "selfcheck: 10/10" not in stdout
