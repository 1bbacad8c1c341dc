import csv
import io
import json

import pytest

import cli
import symalg
from analysis import NoConvergenceError
from data_processor import SWEEP_COLUMNS
from utils import THREADS_ENV, CheckReport


@pytest.fixture(autouse=True)
def no_thread_env(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


def invoke(*argv):
    stream = io.StringIO()
    code = cli.run(list(argv), stream)
    return code, stream.getvalue()


def csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# orbit

def test_orbit_fibonacci_column():
    code, out = invoke("orbit", "--point", "1", "0", "0", "--max-steps", "10")
    assert code == cli.EXIT_OK
    rows = csv_rows(out)
    assert [r["re_p"] for r in rows] == ["1", "1", "2", "3", "5", "8", "13", "21", "34", "55", "89"]
    assert all(r["im_p"] == "0" for r in rows)


def test_orbit_zero_point():
    code, out = invoke("orbit", "--point", "0", "0", "0", "--max-steps", "12")
    rows = csv_rows(out)
    assert code == 0 and len(rows) == 13
    assert all(r["re_p"] == "0" and r["im_p"] == "0" for r in rows)


def test_orbit_escape_is_monotone(tmp_path):
    plot = tmp_path / "orbit.png"
    code, out = invoke("orbit", "--alpha-re", "0.9", "--point", "10", "5", "1", "--max-steps", "39",
                       "--log-escape", "1e14", "--plot", str(plot))
    rows = csv_rows(out)
    assert code == 0 and len(rows) == 40
    logs = [float(r["log_mag"]) for r in rows]
    assert all(b > a for a, b in zip(logs, logs[1:]))
    assert plot.exists()


def test_orbit_writes_file(tmp_path):
    target = tmp_path / "orbit.csv"
    code, out = invoke("orbit", "--out", str(target), "--max-steps", "3")
    assert code == 0 and out == ""
    assert target.read_text(encoding="utf-8").startswith("n,re_p,im_p,log_mag")


# classify and green

def test_classify_json():
    code, out = invoke("classify", "--alpha-re", "0.9", "--point", "1", "0", "0")
    payload = json.loads(out)
    assert code == 0
    assert payload["verdict"] == "FibonacciEscape"
    assert payload["evidence"]["fibonacci_limit"][0] == pytest.approx(0.7236067977, abs=1e-8)
    assert payload["params"]["q"] == 2
    assert payload["point"] == [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]


def test_classify_maximal_and_converging():
    _, out = invoke("classify", "--alpha-re", "0.9", "--point", "10", "5", "1")
    assert json.loads(out)["verdict"] == "MaximalEscape"
    _, out = invoke("classify", "--point", "0", "0", "0")
    assert json.loads(out)["verdict"] == "ConvergesToFixedPoint"


def test_green_json():
    code, out = invoke("green", "--alpha-re", "1", "--point", "10", "5", "1")
    payload = json.loads(out)
    assert code == 0
    assert payload["green_plus"]["escaped"]
    assert "green_minus" in payload
    _, out = invoke("green", "--alpha-re", "0.5", "--point", "10", "5", "1")
    assert "green_minus" not in json.loads(out)


@pytest.mark.parametrize("argv", [
    ("classify", "--q", "1"),
    ("classify", "--alpha-re", "1.5"),
    ("orbit", "--max-steps", "0"),
    ("raster", "--width", "0"),
    ("raster", "--nx", "1"),
    ("iterate", "--n-max", "7"),
    ("sweep", "--samples", "0", "--moduli", "0.5", "1.2"),
    ("verify", "--suite", "stable-manifold", "--alpha-re", "0.9"),
])
def test_config_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _ = invoke(*argv)
    assert code == cli.EXIT_CONFIG


def test_invalid_thread_env_exits_2(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "many")
    assert invoke("classify")[0] == cli.EXIT_CONFIG


def test_config_file_error_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"q": "two"}', encoding="utf-8")
    assert invoke("classify", "--config", str(bad))[0] == cli.EXIT_CONFIG


def test_print_schema():
    code, out = invoke("verify", "--print-schema")
    assert code == 0
    assert "alpha_moduli" in json.loads(out)["properties"]


# verify

def test_verify_degrees():
    code, out = invoke("verify", "--suite", "degrees")
    assert code == 0
    assert "degrees=3,7,15,31,63" in out
    assert all(line.startswith("PASS") for line in out.splitlines())


def test_verify_centralizer_cubic():
    code, out = invoke("verify", "--suite", "centralizer", "--q", "3")
    assert code == 0
    assert "centralizer eta=-1" in out


def test_verify_all_suites_pass():
    code, out = invoke("verify", "--suite", "all", "--n-max", "4")
    lines = out.splitlines()
    assert code == 0, out
    assert lines and all(line.startswith("PASS") for line in lines)
    for name in ("conjugacy", "fibration", "lemma-identity", "green-equations", "hyperplane", "fibonacci", "speed",
                 "regions Omega", "regions OmegaPrime", "growth ceiling", "growth continuity", "stable-manifold"):
        assert any(name in line for line in lines)


def test_verify_failure_exits_1(monkeypatch):
    monkeypatch.setitem(cli.SUITES, "fibonacci", lambda config: [CheckReport("broken", False)])
    code, out = invoke("verify", "--suite", "fibonacci")
    assert code == cli.EXIT_CHECK_FAILED
    assert out == "FAIL broken\n"


# sweep

def test_sweep_empty_sample_is_header_only():
    code, out = invoke("sweep", "--samples", "0")
    assert code == 0
    assert out == ",".join(SWEEP_COLUMNS) + "\n"


def test_sweep_extra_points_from_config(tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"samples": 0, "alpha_moduli": [0.3, 0.9],
                                  "extra_points": [[[1, 0], [0, 0], [0, 0]]]}), encoding="utf-8")
    code, out = invoke("sweep", "--config", str(config))
    table = out.split("\n\n")[0]
    rows = csv_rows(table)
    assert code == 0
    assert [r["verdict"] for r in rows] == ["FibonacciEscape", "FibonacciEscape"]
    assert [float(r["alpha_modulus"]) for r in rows] == [0.3, 0.9]


def test_sweep_phase_transition_and_determinism():
    argv = ("sweep", "--samples", "5", "--moduli", "0.3", "0.9", "--seed", "3")
    code, serial = invoke(*argv, "--threads", "1")
    assert code == 0
    for threads in ("4", "8"):
        assert invoke(*argv, "--threads", threads) == (0, serial)
    rows = csv_rows(serial.split("\n\n")[0])
    assert len(rows) == 10
    assert not [r for r in rows if float(r["alpha_modulus"]) == 0.9 and r["verdict"] == "FibonacciEscape"]


# raster

def test_raster_files(tmp_path):
    target = tmp_path / "smoke.pgm"
    code, out = invoke("raster", "--nx", "2", "--ny", "2", "--out", str(target), "--preview",
                       str(tmp_path / "smoke.png"))
    assert code == 0
    assert out.splitlines() == [str(target), str(target) + ".json"]
    assert target.read_bytes().startswith(b"P5\n2 2\n65535\n")
    assert len(target.read_bytes()) == len(b"P5\n2 2\n65535\n") + 8
    assert (tmp_path / "smoke.png").exists()
    meta = json.loads((tmp_path / "smoke.pgm.json").read_text(encoding="utf-8"))
    assert sum(meta["counts"].values()) == 4


def test_moduli_above_one_only_matter_for_sweeps(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"alpha_moduli": [0.5, 1.2]}), encoding="utf-8")
    assert invoke("classify", "--config", str(config))[0] == 0
    assert invoke("sweep", "--config", str(config), "--samples", "0")[0] == cli.EXIT_CONFIG


# stable

def test_stable_json():
    code, out = invoke("stable", "--alpha-re", "0.3", "--point", "0", "0.5", "0.2")
    payload = json.loads(out)
    assert code == 0
    assert payload["converged"] is True
    assert abs(complex(*payload["p0"]) + 0.309) < 0.05
    assert payload["validation_norm"] < 1e-6
    assert payload["sink_radius"] > 0


def test_stable_reports_no_convergence(monkeypatch):
    def no_root(*args, **kwargs):
        raise NoConvergenceError("Newton did not converge")

    monkeypatch.setattr(cli, "stable_root", no_root)
    code, out = invoke("stable", "--alpha-re", "0.3")
    assert code == cli.EXIT_CHECK_FAILED
    assert json.loads(out)["converged"] is False


# iterate

def test_iterate_first_components():
    z0, z1, z2, a = (symalg.MultiPoly.var(i) for i in (symalg.Z0, symalg.Z1, symalg.Z2, symalg.A))
    code, out = invoke("iterate", "--n-max", "1")
    assert code == 0
    assert symalg.load_poly(io.StringIO(out)) == z0 + z1 + z0 ** 2 * z2
    _, out = invoke("iterate", "--map", "psi-inverse", "--n-max", "1")
    assert symalg.load_poly(io.StringIO(out)) == z1
    # b = alpha^l collapses to a for q = 2, d = 1
    _, out = invoke("iterate", "--map", "phi", "--n-max", "1")
    assert symalg.load_poly(io.StringIO(out)) == a * (z0 + z1 + z0 ** 2)


def test_iterate_against_stored_dump(tmp_path):
    stored = tmp_path / "psi3.txt"
    assert invoke("iterate", "--n-max", "3", "--out", str(stored))[0] == 0
    assert symalg.load_poly(io.StringIO(stored.read_text(encoding="utf-8"))).z_degree() == 15
    assert invoke("iterate", "--n-max", "3", "--expect", str(stored))[0] == 0
    assert invoke("iterate", "--n-max", "2", "--expect", str(stored))[0] == cli.EXIT_CHECK_FAILED
    assert invoke("iterate", "--n-max", "1", "--expect", str(tmp_path / "missing.txt"))[0] == cli.EXIT_CONFIG


# verify suites built on the analysis helpers

def test_verify_speed_and_growth_suites():
    for suite in ("speed", "growth", "regions"):
        code, out = invoke("verify", "--suite", suite, "--alpha-re", "0.9")
        assert code == 0, out
        assert all(line.startswith("PASS") for line in out.splitlines())
    assert "OmegaPrime" not in out
