import json
import subprocess
import sys

import pytest
from gmpy2 import mpfr

from circlelab import __version__
from circlelab.cli import main, read_config_file
from circlelab.errors import PreconditionError

FILES = {
    "tune": ["tuned.json"],
    "denjoy": ["denjoy.csv", "denjoy.json"],
    "conjugacy": ["profile.csv", "holder_scan.txt", "conjugacy.json"],
    "report": ["report.json"],
}
FAST = ["--n-max", "8", "--n-orbit", "20000"]


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    for cmd in ("tune", "denjoy", "conjugacy", "report"):
        assert run(cmd, "--out", str(d), *FAST) == 0
    return d


def load(d, name):
    return json.loads((d / name).read_text())


def test_tune_golden_quotients(outdir):
    data = load(outdir, "tuned.json")
    assert data["quotients"][:15] == [1] * 15
    assert len(data["quotients_certified"]) >= 15
    assert data["version"] == __version__
    assert data["config"]["family"] == "arnold"


def test_all_outputs_written(outdir):
    for names in FILES.values():
        for n in names:
            assert (outdir / n).stat().st_size > 0


def test_denjoy_outputs(outdir):
    data = load(outdir, "denjoy.json")
    assert len(data["rows"]) == 8
    assert mpfr(data["summary"]["max_identity_residual"]) < mpfr("1e-38")
    header = (outdir / "denjoy.csv").read_text().split("\n")[0]
    assert header.startswith("n,q_n,Delta_n,l_n,eps_n,S_n")


def test_conjugacy_outputs(outdir):
    data = load(outdir, "conjugacy.json")
    assert data["N"] == 20000
    assert data["order_matches_rotation"] is True
    assert float(data["homological_residual"]) < 1e-6


def test_report_merges_parts(outdir):
    data = load(outdir, "report.json")
    assert {"tuned", "denjoy", "conjugacy"} <= set(data)
    assert "config" not in data["denjoy"]


def test_rerun_is_byte_identical(outdir, tmp_path):
    for cmd in ("tune", "denjoy", "conjugacy", "report"):
        assert run(cmd, "--out", str(tmp_path), *FAST) == 0
    for names in FILES.values():
        for n in names:
            assert (tmp_path / n).read_bytes() == (outdir / n).read_bytes(), n


def test_zero_amplitude_gives_rotation(tmp_path):
    assert run("tune", "--a", "0", "--depth", "10", "--out", str(tmp_path)) == 0
    data = load(tmp_path, "tuned.json")
    assert abs(mpfr(data["t"]) - mpfr(data["rho"])) < mpfr("1e-6")


def test_rotation_family_has_flat_outputs(tmp_path):
    assert run("denjoy", "--family", "rotation", "--n-max", "6", "--out", str(tmp_path)) == 0
    rows = load(tmp_path, "denjoy.json")["rows"]
    assert all(mpfr(r["S_n"]) == 0 for r in rows)


def test_not_a_diffeomorphism(tmp_path, capsys):
    assert run("tune", "--a", "1.5", "--out", str(tmp_path)) == 2
    err = capsys.readouterr().err
    assert err.startswith("error code=NOT_A_DIFFEOMORPHISM exit=2")
    assert not (tmp_path / "tuned.json").exists()


def test_orbit_cap_reports_level(outdir, capsys):
    assert run("denjoy", "--out", str(outdir), "--n-max", "12", "--orbit-cap", "500") == 3
    err = capsys.readouterr().err
    assert "exit=3" in err and "level_reached=11" in err


def test_report_missing_inputs(tmp_path, capsys):
    assert run("report", "--out", str(tmp_path)) == 2
    assert "missing inputs" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "lab.cfg"
    cfg.write_text("# small run\nfamily = arnold\na = 0.25\ndepth = 10\n")
    out = tmp_path / "o"
    assert run("tune", "--config", str(cfg), "--depth", "12", "--out", str(out)) == 0
    c = load(out, "tuned.json")["config"]
    assert c["a"] == "0.25" and c["depth"] == 12


def test_config_file_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(PreconditionError):
        read_config_file(cfg)


def test_console_script_version():
    r = subprocess.run([sys.executable, "-m", "circlelab.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and __version__ in r.stdout
