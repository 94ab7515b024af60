"""Command-line surface: outputs, exit codes, determinism and sweeps."""
import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ccn32 import cli
from ccn32 import heatkernel as hk


def run(capsys, *args):
    code = cli.main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def records(capsys, *args):
    code, out, _ = run(capsys, *args, "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "cc-n32/1"
    return doc


def test_distance_vertical(capsys):
    rec = records(capsys, "distance", "--x", "0,0,0", "--t", "1,0,0")["records"][0]
    assert rec["d2"] == pytest.approx(4 * math.pi, rel=1e-15)
    assert rec["case_tag"] == "vertical"


def test_distance_abnormal(capsys):
    rec = records(capsys, "distance", "--x", "1,0,0", "--t", "0,0,0")["records"][0]
    assert rec["d2"] == 1.0 and rec["case_tag"] == "abnormal"


def test_distance_chain_recorded(capsys):
    rec = records(capsys, "distance", "--x", "1,0,0", "--t", "0.25,0.25,0")["records"][0]
    assert len(rec["chain"]) == 5
    np.testing.assert_allclose(rec["chain"], rec["d2"], rtol=1e-12)


def test_json_round_trips_inputs(capsys):
    x, t = "0.1,-2.5e-3,3", "1e-7,0.5,-0.25"
    doc = records(capsys, "distance", "--x", x, "--t", t, "--seed", "9")
    assert doc["input"]["x"] == [float(v) for v in x.split(",")]
    assert doc["input"]["t"] == [float(v) for v in t.split(",")]
    assert doc["input"]["seed"] == 9


def test_heatkernel_origin(capsys):
    rec = records(capsys, "heatkernel", "--x", "0,0,0", "--t", "0,0,0")["records"][0]
    assert rec["value"] == pytest.approx(hk.origin_value(), rel=1e-9)
    assert rec["route"] == "FourierForm"
    for key in ("est_error", "bnd", "bound_ratio"):
        assert key in rec


def test_heatkernel_both_routes(capsys):
    rec = records(capsys, "heatkernel", "--x", "2,0,0", "--t", "0.5,0.5,0", "--route", "both")["records"][0]
    assert rec["route_gap"] < 1e-5
    assert set(rec["routes"]) == {"fourier", "laplace"}


def test_heatkernel_rotation(capsys):
    a = records(capsys, "heatkernel", "--x", "1,0,0", "--t", "0.3,0.4,0")["records"][0]["value"]
    b = records(capsys, "heatkernel", "--x", "0,1,0", "--t=-0.4,0.3,0")["records"][0]["value"]
    assert b == pytest.approx(a, rel=1e-8)


def test_heatkernel_time(capsys):
    rec = records(capsys, "heatkernel", "--x", "0.5,0,0", "--t", "0,0.2,0", "--h", "0.25")["records"][0]
    base = hk.log_p(hk.GroupPoint.of((1, 0, 0), (0, 0.8, 0))).log_value
    assert rec["log_value"] == pytest.approx(base - 4.5 * math.log(0.25), rel=1e-12)


def test_regime(capsys):
    rec = records(capsys, "regime", "--x", "1,0,0", "--t", "0.25,0.25,0")["records"][0]
    assert rec["case_tag"] == "generic"
    assert rec["regime_params"]["L1"] > 0 and rec["regime_params"]["L2"] > 0


@pytest.mark.parametrize("args", [
    ("distance", "--x", "1,0", "--t", "0,0,0"),
    ("distance", "--x", "a,b,c", "--t", "0,0,0"),
    ("sweep", "--observable", "mu", "--range", "1:2"),
    ("sweep", "--observable", "mu", "--range", "0:1:0"),
    ("sweep", "--observable", "H", "--range", "0.2:3:5"),
    ("heatkernel", "--x", "1,0,0", "--t", "0,0,0", "--h", "-1"),
    ("nonsense",),
])
def test_usage_errors_exit_2(capsys, args):
    code, _, _ = run(capsys, *args)
    assert code == 2


def test_numeric_failure_exit_3(capsys):
    code, _, err = run(capsys, "heatkernel", "--x", "1,0,0", "--t", "0.3,0.4,0", "--rel-tol", "1e-300")
    assert code == 3 and "numerical" in err
    code, out, _ = run(capsys, "heatkernel", "--x", "1,0,0", "--t", "0.3,0.4,0", "--rel-tol", "1e-300",
                       "--best-effort", "--json")
    assert code == 0 and json.loads(out)["records"][0]["converged"] is False


def test_verify_identities_passes(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "identities", "--json")
    assert code == 0
    assert all(r["passed"] for r in json.loads(out)["records"])


def test_verify_failure_exit_1(capsys, monkeypatch):
    monkeypatch.setitem(cli.verify._SUITE_FUNCS, "identities", lambda rng: [("forced", 1.0, 0.0, False)])
    code, _, _ = run(capsys, "verify", "--suite", "identities")
    assert code == 1


def test_verify_deterministic_across_threads(capsys):
    a = run(capsys, "verify", "--suite", "roundtrip", "--seed", "7", "--threads", "1")[1]
    b = run(capsys, "verify", "--suite", "roundtrip", "--seed", "7", "--threads", "2")[1]
    assert a == b


def test_sweep_h_profile_minimum(capsys):
    rows = records(capsys, "sweep", "--observable", "H", "--u", "1,1", "--range", "0.2:3:57")["records"]
    w = [r["w"] for r in rows]
    H = [r["H"] for r in rows]
    assert abs(w[int(np.argmin(H))] - 1.0) <= 0.05 + 1e-12


def test_sweep_mu_increasing(capsys):
    rows = records(capsys, "sweep", "--observable", "mu", "--range=-3:3:61")["records"]
    assert np.all(np.diff([r["mu"] for r in rows]) > 0)


def test_sweep_bound_ratio_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--observable", "bound_ratio", "--x", "1,0,0", "--t", "0.3,0.4,0",
                       "--range", "1:12:6", "--csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 6
    vals = [float(r["bound_ratio"]) for r in rows]
    assert all(math.isfinite(v) and v > 0 for v in vals)


def test_sweep_output_file_and_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p, th in zip(paths, ("1", "3")):
        assert cli.main(["sweep", "--observable", "d2", "--x", "1,1,0", "--t", "0,0,1",
                         "--range", "0.5:4:8", "--csv", "--threads", th, "--output", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    header = paths[0].read_text().splitlines()[0]
    assert header.startswith("d,")


def test_human_format(capsys):
    code, out, _ = run(capsys, "distance", "--x", "1,0,0", "--t", "0,0,0", "--human")
    assert code == 0 and "abnormal" in out


def test_threads_env_fallback(capsys, monkeypatch):
    parse = lambda *a: cli.config_from_args(cli.build_parser().parse_args(["verify", *a]))
    monkeypatch.setenv("CC_N32_THREADS", "3")
    assert parse().threads == 3
    assert parse("--threads", "2").threads == 2
    monkeypatch.setenv("CC_N32_THREADS", "many")
    code, _, _ = run(capsys, "verify", "--suite", "identities")
    assert code == 2


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "ccn32.cli", "distance", "--x", "0,0,0", "--t", "0,0,2"],
                         capture_output=True, text=True, check=True).stdout
    assert json.loads(out)["records"][0]["d2"] == pytest.approx(8 * math.pi, rel=1e-15)
