"""CSV trajectories and plain-text run reports."""

from __future__ import annotations

import configparser
import io
import math
from pathlib import Path

import numpy as np

from .analysis import LemmaVerdict, RunMetrics
from .config import serialize_config

MONITOR_COLUMNS = ("L", "winV", "winTh", "winU")


def csv_header(n, p):
    cols = ["t"]
    cols += [f"x{i}" for i in range(1, n + 1)]
    cols.append("yd")
    cols += [f"e{i}" for i in range(1, n + 1)]
    cols += ["ef", "eps", "iota", "sigma", "e_eps", "u", "w"]
    cols += [f"th{i}" for i in range(1, p + 1)]
    cols += ["V", *MONITOR_COLUMNS]
    return cols


def trajectory_table(traj):
    """Recorded rows as a float array, columns in :func:`csv_header` order."""
    idx = traj.record_indices
    k = len(idx)
    cols = [
        traj.t[idx, None], traj.x[idx], traj.yd[idx, :1], traj.e[idx],
        traj.e_f[idx, None], np.full((k, 1), traj.epsilon if traj.config.controller.kind
                                     == "robust_dead_zone" else 0.0),
        traj.iota[idx, None], traj.sigma[idx, None], traj.e_eps[idx, None],
        traj.u[idx, None], traj.w[idx, None], traj.theta_hat[idx], traj.V[idx, None],
    ]
    cols += [traj.monitor(name)[idx, None] for name in MONITOR_COLUMNS]
    return np.hstack([np.asarray(c, dtype=float) for c in cols])


def write_csv(traj, path):
    table = trajectory_table(traj)
    header = ",".join(csv_header(traj.x.shape[1], traj.theta_hat.shape[1]))
    buf = io.StringIO()
    np.savetxt(buf, table, fmt="%.17g", delimiter=",", header=header, comments="",
               newline="\n")
    # binary mode keeps LF line endings on every platform
    Path(path).write_bytes(buf.getvalue().encode("ascii"))


def read_csv(path):
    """Return ``(header, data)`` from a trajectory CSV."""
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return repr(v) if math.isfinite(v) else str(v)


def _lemma_items(lemma: LemmaVerdict):
    return {
        "verdict": lemma.verdict,
        "gdot_energy_bounded": _num(lemma.hypothesis_bounded),
        "gdot_energy_sup": _num(lemma.gdot_energy_sup),
        "gdot_energy_late_sup": _num(lemma.gdot_energy_late),
        "gdot_energy_limit": _num(lemma.gdot_energy_limit),
        "window_decayed": _num(lemma.window_decayed),
        "window_final": _num(lemma.window_final),
        "conclusion_holds": _num(lemma.conclusion),
        "tail_sup": _num(lemma.tail_sup),
    }


def report_text(traj, metrics: RunMetrics):
    cfg = traj.config
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["summary"] = {
        "scenario": cfg.run.name,
        "status": "PASS" if metrics.passed else "FAIL",
        "failing": ", ".join(metrics.failures()) or "none",
        "law": traj.law,
        "controller": cfg.controller.kind,
        "h": _num(traj.h),
        "tau": _num(traj.tau),
        "t_final": _num(traj.t[-1]),
        "record_stride": _num(cfg.integrator.record_stride),
        "final_e": _num(metrics.final_e),
        "sup_e": _num(metrics.sup_e),
        "sup_x": _num(metrics.sup_x),
        "sup_window_theta_energy": _num(metrics.sup_win_theta),
        "sup_window_u_energy": _num(metrics.sup_win_u),
        "settling_time": _num(metrics.settling_time),
        "final_window_V": _num(metrics.final_winV),
        "L0": _num(metrics.L0),
        "L_step_max": _num(metrics.L_step_max),
        "final_theta_hat": ", ".join(_num(v) for v in traj.theta_hat[-1]),
    }
    parser["verdicts"] = {
        name: (f"{v.status} value={_num(v.value)} threshold={_num(v.threshold)}"
               f" margin={_num(v.margin)} # {v.detail}")
        for name, v in metrics.verdicts.items()
    }
    if metrics.lemma is not None:
        parser["lemma"] = _lemma_items(metrics.lemma)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def lemma_report_text(family, lemma: LemmaVerdict, expected=None, h=None, tau=None):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    summary = {"family": family}
    if h is not None:
        summary["h"] = _num(h)
    if tau is not None:
        summary["tau"] = _num(tau)
    if expected is not None:
        summary["expected_profile"] = ", ".join(_num(v) for v in expected)
        summary["status"] = "PASS" if lemma.profile() == tuple(expected) else "FAIL"
    parser["summary"] = summary
    parser["lemma"] = _lemma_items(lemma)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def write_text(path, text):
    Path(path).write_bytes(text.encode("utf-8"))


def read_report(path):
    """Parse a report into ``{section: {key: value}}`` (strings)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    parser.optionxform = str
    parser.read(path)
    return {sec: dict(parser[sec]) for sec in parser.sections()}


def write_run(traj, metrics, out_dir):
    """Write ``trajectory.csv``, ``report.txt`` and ``scenario.cfg``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(traj, out / "trajectory.csv")
    write_text(out / "report.txt", report_text(traj, metrics))
    write_text(out / "scenario.cfg", serialize_config(traj.config))
    return out
