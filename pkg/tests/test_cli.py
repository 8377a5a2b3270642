import subprocess
import sys

import numpy as np
import pytest

from incremental_adaptive import cli, output
from incremental_adaptive.config import default_scenario, serialize_config

# under ten delays the monitors are skipped, so short runs exit 0
SHORT = ["--override", "integrator.t_final=0.5"]
FAILS = ["--override", "integrator.t_final=2", "--override", "tolerances.tol_e=1e-12"]
GOLDEN_HEADER = "t,x1,yd,e1,ef,eps,iota,sigma,e_eps,u,w,th1,th2,th3,V,L,winV,winTh,winU"


def scenario_file(tmp_path, name="a.cfg", **changes):
    path = tmp_path / name
    path.write_text(serialize_config(default_scenario(**changes)))
    return str(path)


def test_default_run_golden_header_and_exit(tmp_path):
    assert cli.main(["run", "--out", str(tmp_path)]) == cli.EXIT_OK
    raw = (tmp_path / "trajectory.csv").read_bytes()
    assert raw.split(b"\n", 1)[0].decode() == GOLDEN_HEADER
    assert b"\r" not in raw
    header, data = output.read_csv(tmp_path / "trajectory.csv")
    assert data.shape == (100_001, len(header))
    report = output.read_report(tmp_path / "report.txt")
    assert report["summary"]["status"] == "PASS"
    assert report["verdicts"]["tracking"].startswith("PASS")
    assert report["lemma"]["verdict"] == "LEMMA_CONSISTENT"


def test_csv_round_trips_full_precision(tmp_path):
    cli.main(["run", "--out", str(tmp_path), *SHORT])
    header, data = output.read_csv(tmp_path / "trajectory.csv")
    traj, _ = cli.execute(cli.load_config(None, ["integrator.t_final=0.5"]))
    assert np.array_equal(data[:, header.index("x1")], traj.x[:, 0])
    assert np.array_equal(data[:, header.index("th3")], traj.theta_hat[:, 2])


def test_csv_bytes_are_deterministic(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["run", "--out", str(tmp_path / d), *SHORT]) == 0
    assert (tmp_path / "a/trajectory.csv").read_bytes() == (tmp_path / "b/trajectory.csv").read_bytes()


def test_scenario_file_is_written_and_reusable(tmp_path):
    cli.main(["run", "--out", str(tmp_path / "a"), *SHORT])
    cfg = str(tmp_path / "a/scenario.cfg")
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/trajectory.csv").read_bytes() == (tmp_path / "b/trajectory.csv").read_bytes()


@pytest.mark.parametrize(
    "argv, code",
    [
        (["run", "--override", "controller.kappa=0"], cli.EXIT_INVALID),
        (["run", "--override", "adaptation.tau=0.15", "--override", "integrator.h=0.1"],
         cli.EXIT_INVALID),
        (["run", "--override", "nosuch.key=1"], cli.EXIT_INVALID),
        (["run", *FAILS], cli.EXIT_MONITOR),
        (["run", "--override", "adaptation.printed_sign=true"], cli.EXIT_MONITOR),
        (["verify-lemma", "nope"], cli.EXIT_INVALID),
        (["frobnicate"], cli.EXIT_INVALID),
    ],
)
def test_exit_codes(tmp_path, argv, code):
    assert cli.main([*argv, "--out", str(tmp_path / "out")]) == code


def test_monitor_failure_names_property(tmp_path, capsys):
    cli.main(["run", "--out", str(tmp_path), *FAILS])
    assert "tracking" in capsys.readouterr().err


def test_unwritable_output_is_an_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["run", "--out", str(blocker / "sub"), *SHORT]) == cli.EXIT_IO


def test_bad_config_file_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("[plant]\nb = 1\nbee = 2\n")
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize(
    "items",
    [[], ["tau="], ["alpha=1,2"], ["tau"]],
)
def test_parse_grid_rejects(items):
    with pytest.raises(cli.ValidationError):
        cli.parse_grid(items)


def test_grid_points_cartesian():
    grid = cli.parse_grid(["tau=0.2,0.1", "kappa=1,2,3"])
    points = cli.grid_points(grid)
    assert len(points) == 6
    assert points[0] == {"adaptation.tau": "0.2", "controller.kappa": "1"}


def test_invalid_grid_point_stops_before_any_run(tmp_path, capsys):
    out = tmp_path / "sw"
    code = cli.main(["sweep", "--out", str(out), "--grid", "kappa=1,0,-1"])
    assert code == cli.EXIT_INVALID
    assert not out.exists()
    err = capsys.readouterr().err
    assert "grid point 1" in err and "grid point 2" in err


def test_one_point_sweep_matches_run(tmp_path):
    assert cli.main(["sweep", "--out", str(tmp_path / "sw"), "--grid", "kappa=2", *SHORT]) == 0
    assert cli.main(["run", "--out", str(tmp_path / "run"), *SHORT]) == 0
    a = (tmp_path / "sw/point_000/trajectory.csv").read_bytes()
    assert a == (tmp_path / "run/trajectory.csv").read_bytes()
    lines = (tmp_path / "sw/summary.csv").read_text().splitlines()
    assert lines[0].split(",")[:2] == ["index", "kappa"]
    assert len(lines) == 2


def test_sweep_independent_of_concurrency(tmp_path):
    args = ["--grid", "kappa=1.5,2,3", *SHORT]
    assert cli.main(["sweep", "--out", str(tmp_path / "s1"), *args]) == 0
    assert cli.main(["sweep", "--out", str(tmp_path / "s3"), "--jobs", "3", *args]) == 0
    assert (tmp_path / "s1/summary.csv").read_bytes() == (tmp_path / "s3/summary.csv").read_bytes()
    for i in range(3):
        name = f"point_{i:03d}/trajectory.csv"
        assert (tmp_path / "s1" / name).read_bytes() == (tmp_path / "s3" / name).read_bytes()


def test_tau_sweep_approaches_integral_law(tmp_path):
    out = tmp_path / "sw"
    code = cli.main(["sweep", "--out", str(out), "--grid", "tau=0.2,0.1,0.05", "--jobs", "3",
                     "--override", "integrator.t_final=50", "--override", "integrator.h=5e-4"])
    assert code == cli.EXIT_OK
    lines = (out / "summary.csv").read_text().splitlines()
    header = lines[0].split(",")
    col = header.index("distance_to_integral")
    dist = [float(row.split(",")[col]) for row in lines[1:]]
    assert all(a > b for a, b in zip(dist, dist[1:])), dist


def test_compare_identical(tmp_path):
    cfg = scenario_file(tmp_path, integrator__t_final=0.5)
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--config", cfg, "--config", cfg, "--out", str(out),
                     "--bound", "0"]) == 0
    report = output.read_report(out / "divergence.txt")
    assert float(report["divergence"]["sup_state"]) == 0.0
    assert (out / "a/trajectory.csv").exists() and (out / "b/trajectory.csv").exists()


def test_compare_bound_exceeded(tmp_path):
    a = scenario_file(tmp_path, "a.cfg", integrator__t_final=0.5)
    b = scenario_file(tmp_path, "b.cfg", integrator__t_final=0.5, controller__kappa=3.0)
    assert cli.main(["compare", "--config", a, "--config", b, "--out", str(tmp_path / "c"),
                     "--bound", "1e-9"]) == cli.EXIT_MONITOR


def test_compare_grid_mismatch(tmp_path):
    a = scenario_file(tmp_path, "a.cfg", integrator__t_final=0.5)
    b = scenario_file(tmp_path, "b.cfg", integrator__t_final=1.0)
    assert cli.main(["compare", "--config", a, "--config", b,
                     "--out", str(tmp_path / "c")]) == cli.EXIT_INVALID


def test_compare_needs_two_configs(tmp_path):
    a = scenario_file(tmp_path)
    assert cli.main(["compare", "--config", a, "--out", str(tmp_path / "c")]) == cli.EXIT_INVALID


@pytest.mark.parametrize("family", ["exponential", "rational_decay", "bump_train"])
def test_verify_lemma_families(tmp_path, family):
    assert cli.main(["verify-lemma", family, "--out", str(tmp_path)]) == 0
    report = output.read_report(tmp_path / "lemma.txt")
    assert report["summary"]["status"] == "PASS"
    assert report["lemma"]["verdict"] == "LEMMA_CONSISTENT"


def test_verify_lemma_from_run(tmp_path):
    run_dir = tmp_path / "run"
    assert cli.main(["run", "--out", str(run_dir)]) == 0
    assert cli.main(["verify-lemma", f"from_run:{run_dir}", "--out", str(tmp_path / "l")]) == 0
    report = output.read_report(tmp_path / "l/lemma.txt")
    assert report["lemma"]["conclusion_holds"] == "true"


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "incremental_adaptive", "verify-lemma",
                           "exponential", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "LEMMA_CONSISTENT" in proc.stdout
