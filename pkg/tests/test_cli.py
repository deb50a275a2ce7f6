import io
import json
import subprocess
import sys

import pytest

from gmconn.cli import main


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def test_system_json():
    code, out = run("system", "--mu", "2", "--nu", "2", "--m", "1", "--json")
    rec = json.loads(out)
    assert code == 0 and rec["ok"] and rec["schema"] == "gmconn-report/1"
    assert rec["tag"] == "prop2.2"
    assert rec["result"]["L"] == ["5/6", "7/6"]
    assert rec["result"]["Delta"] == "s0^2 + 4/27*s1^3"


@pytest.mark.parametrize("argv,bound,tag", [
    (("--mu", "2"), 2, "thm5.1.i"),
    (("--mu", "3"), 4, "thm5.1.ii"),
    (("--mu", "4", "--K", "3", "--point", "regular"), 7, "thm5.1.iii"),
])
def test_bounds(argv, bound, tag):
    code, out = run("bounds", *argv, "--json")
    rec = json.loads(out)
    assert code == 0
    assert rec["result"]["bound"] == bound and rec["result"]["formula"] == tag


def test_not_covered_is_structured(capsys):
    code, _ = run("bounds", "--mu", "3", "--K", "2", "--k1", "1")
    err = json.loads(capsys.readouterr().err)
    assert code == 1 and err["error"]["type"] == "NotCoveredError"


def test_strata():
    code, out = run("strata", "--point", "2,-3", "--json")
    assert code == 0 and json.loads(out)["result"]["k"] == 0


def test_exponents_table():
    code, out = run("exponents", "--mu", "4", "--nu", "3", "--kind", "4.2'", "--k", "1",
                    "--t", "0", "--table", "4.2'@0", "--json")
    assert code == 0 and json.loads(out)["result"]["table_agrees"]


def test_periods_and_residual():
    code, out = run("periods", "--s", "0,-1", "--cycle", "1,2", "--json")
    rec = json.loads(out)["result"]
    assert code == 0 and abs(rec["im"] - 0.479256093894237) < 1e-12
    code, out = run("residual", "--s", "0.25,-1", "--json")
    assert code == 0 and json.loads(out)["result"]["residual"] < 1e-8


def test_fit_csv_has_ladder():
    code, out = run("fit", "--s", "0,-1", "--ladder", "8", "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("V_im,V_re,eps") and len(lines) == 9


def test_verify_connection_exit_zero():
    code, out = run("verify", "--suite", "connection", "--mu", "2")
    assert code == 0 and "[PASS] criterion 2" in out


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "defaults.cfg"
    cfg.write_text("# defaults\nmu = 3\nK = 0\n")
    code, out = run("--config", str(cfg), "bounds", "--json")
    assert json.loads(out)["result"]["bound"] == 4
    code, out = run("--config", str(cfg), "bounds", "--mu", "2", "--json")
    assert json.loads(out)["result"]["bound"] == 2


def test_output_is_reproducible():
    a = run("monodromy", "--s", "0,-1", "--json")[1]
    b = run("monodromy", "--s", "0,-1", "--json")[1]
    assert a == b


@pytest.mark.parametrize("argv", [
    ["bounds", "--mu", "1"],
    ["bounds", "--point", "cusp"],
    ["nosuch"],
])
def test_bad_flags_exit_two(argv):
    p = subprocess.run([sys.executable, "-m", "gmconn.cli", *argv], capture_output=True)
    assert p.returncode == 2


def test_bad_precision(monkeypatch, capsys):
    monkeypatch.setenv("GMCONN_MP_PREC", "100")
    code, _ = run("bounds")
    assert code == 1
    monkeypatch.setenv("GMCONN_MP_PREC", "256")
    assert run("bounds")[0] == 0


@pytest.mark.parametrize("argv", [
    ["system"], ["strata", "--point", "0,0"], ["operator"], ["exponents", "--kind", "4.1'", "--t", "1"],
    ["isocheck"], ["bounds"], ["periods", "--s", "0,-1", "--cycle", "1,2"],
    ["residual", "--s", "0.25,-1"], ["fit", "--s", "0,-1", "--ladder", "6"],
    ["monodromy", "--s", "0,-1"], ["verify", "--suite", "bounds"],
])
def test_every_record_is_tagged(argv):
    code, out = run(*argv, "--json")
    rec = json.loads(out)
    assert code == 0 and rec["tag"] and rec["command"] == argv[0]
