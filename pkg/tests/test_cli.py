import json
import subprocess
import sys

import numpy as np
import pytest

from envrisk.classical import LevelMeasure
from envrisk.cli import main, report_is_consistent

ID_CONFIG = {"spec": {"inner": {"rule": "constant", "distortion": {"family": "identity"}}, "outer": {"family": "identity"}}}


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def three_rows(tmp_path):
    return write(tmp_path / "three.csv", "weight,x,z\n1,1,0\n1,3,0\n2,5,1\n")


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_compute_identity_gives_global_mean(tmp_path, three_rows, capsys):
    cfg = write(tmp_path / "cfg.json", json.dumps(ID_CONFIG))
    out = tmp_path / "report.json"
    code, _, _ = run(["compute", "--scenarios", three_rows, "--config", cfg, "--out", out], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["outer"] == pytest.approx((1 + 3 + 2 * 5) / 4)
    assert [row["rho_z"] for row in report["profile"]] == [2.0, 5.0]
    assert report_is_consistent(report)
    assert len(report["inputs"]["scenarios"]["sha256"]) == 64
    assert "meta" in report


def test_compute_wvar_case(tmp_path, capsys):
    rng = np.random.default_rng(17)
    x = np.round(rng.normal(0, 5, size=25), 6)
    px = rng.uniform(0.1, 1, size=25)
    px /= px.sum()
    mu = [(0.25, 0.3), (0.6, 0.2), (0.9, 0.5)]
    lines = ["weight,x,z"]
    for level, wz in mu:
        lines += [f"{float(wz * p)!r},{float(xi)!r},{level}" for xi, p in zip(x, px)]
    csv = write(tmp_path / "wvar.csv", "\n".join(lines) + "\n")
    cfg = {
        "spec": {"inner": {"rule": "level-from-state", "family": "avar", "clamp": [0.25, 0.9]}, "outer": {"family": "identity"}},
        "comparatives": {"wvar": [LevelMeasure.from_atoms(mu).to_json()], "avar": [0.9], "var": [0.5], "rvar": [[0.1, 0.9]]},
    }
    cfgp = write(tmp_path / "cfg.json", json.dumps(cfg))
    out = tmp_path / "r.json"
    code, _, err = run(["compute", "--scenarios", csv, "--config", cfgp, "--out", out, "--no-meta"], capsys)
    assert code == 0, err
    report = json.loads(out.read_text())
    assert abs(report["outer"] - report["comparatives"]["wvar"][0]["value"]) < 1e-10
    assert report_is_consistent(report)


def test_compute_is_byte_stable_without_meta(tmp_path, three_rows, capsys):
    cfg = write(tmp_path / "cfg.json", json.dumps(ID_CONFIG))
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert run(["compute", "--scenarios", three_rows, "--config", cfg, "--out", out, "--no-meta"], capsys)[0] == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    assert b"meta" not in outs[0]


def test_compute_threads_do_not_change_output(tmp_path, three_rows, capsys, monkeypatch):
    cfg = write(tmp_path / "cfg.json", json.dumps(ID_CONFIG))
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("ENVRISK_THREADS", threads)
        out = tmp_path / f"t{threads}.json"
        run(["compute", "--scenarios", three_rows, "--config", cfg, "--out", out, "--no-meta"], capsys)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("text", ["", "weight,x,z\n", "weight,x,z\n1,2\n", "w,x\n1,2\n"])
def test_compute_bad_csv_exits_2(tmp_path, capsys, text):
    csv = write(tmp_path / "bad.csv", text)
    cfg = write(tmp_path / "cfg.json", json.dumps(ID_CONFIG))
    code, _, err = run(["compute", "--scenarios", csv, "--config", cfg, "--out", tmp_path / "o.json"], capsys)
    assert code == 2
    assert "row" in err


def test_compute_missing_csv_exits_2(tmp_path, capsys):
    cfg = write(tmp_path / "cfg.json", json.dumps(ID_CONFIG))
    code, _, _ = run(["compute", "--scenarios", tmp_path / "nope.csv", "--config", cfg], capsys)
    assert code == 2


@pytest.mark.parametrize(
    "cfg",
    [
        "not json",
        json.dumps({"binning": {"mode": "distinct-values"}}),
        json.dumps({"spec": {"inner": {"rule": "constant", "distortion": {"family": "avar", "level": 2}}, "outer": {"family": "identity"}}}),
        json.dumps({**ID_CONFIG, "binning": {"mode": "equiprobable", "k": 5}}),
        json.dumps({**ID_CONFIG, "comparatives": {"var": [1.5]}}),
    ],
)
def test_compute_bad_config_exits_3(tmp_path, three_rows, capsys, cfg):
    cfgp = write(tmp_path / "cfg.json", cfg)
    code, _, _ = run(["compute", "--scenarios", three_rows, "--config", cfgp, "--out", tmp_path / "o.json"], capsys)
    assert code == 3


def test_gbm_commands(capsys):
    code, out, _ = run(["gbm"], capsys)
    assert code == 0
    assert float(out.split()[1]) == pytest.approx(0.934869124963, abs=1e-11)
    code, out, _ = run(["gbm", "--check", "--states", 2000], capsys)
    assert code == 0 and "PASS" in out
    code, _, err = run(["gbm", "--a", 1.5], capsys)
    assert code == 3
    code, _, _ = run(["gbm", "--check", "--states", 10], capsys)
    assert code == 3


def test_verify_commands(capsys):
    code, out, _ = run(["verify", "--suite", "background", "--trials", 50, "--seed", 11], capsys)
    assert code == 0 and "suite background: PASS" in out
    code, _, _ = run(["verify", "--suite", "nope"], capsys)
    assert code == 3
    code, _, _ = run(["verify", "--suite", "dual", "--trials", 0], capsys)
    assert code == 3


def test_verify_violation_exits_5(capsys, monkeypatch):
    from envrisk import cli
    from envrisk.suites import Check, SuiteResult

    monkeypatch.setattr(cli, "run_suite", lambda *a: SuiteResult("fake", [Check("always", 1, 1, 1.0)]))
    code, out, _ = run(["verify", "--suite", "coherence", "--trials", 1], capsys)
    assert code == 5 and "FAIL" in out


def test_verify_writes_report(tmp_path, capsys):
    out = tmp_path / "v.json"
    code, _, _ = run(["verify", "--suite", "recovery", "--trials", 2, "--seed", 3, "--report", out], capsys)
    assert code == 0
    assert json.loads(out.read_text())["ok"] is True


def test_usage_errors_exit_3(capsys):
    with pytest.raises(SystemExit) as info:
        main(["compute"])
    assert info.value.code == 3
    with pytest.raises(SystemExit) as info:
        main(["gbm", "--r", "abc"])
    assert info.value.code == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "envrisk", "gbm"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("closed_form")


@pytest.mark.parametrize("suite, trials, seed", [("coherence", 500, 7), ("dual", 10000, 1)])
def test_verify_reference_runs(capsys, suite, trials, seed):
    code, out, _ = run(["verify", "--suite", suite, "--trials", trials, "--seed", seed], capsys)
    assert code == 0, out
    assert f"suite {suite}: PASS" in out
