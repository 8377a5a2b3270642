"""Command line driver: run, sweep, compare and verify-lemma.

Exit codes: 0 all monitors pass, 1 a monitor failed, 2 invalid input,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, output
from .config import default_scenario, parse_config, serialize_config
from .errors import ConfigurationError, NumericFault, ValidationError
from .simulate import simulate

EXIT_OK, EXIT_MONITOR, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3

SWEEP_KEYS = {
    "gamma_prime": "adaptation.gamma_prime",
    "tau": "adaptation.tau",
    "kappa": "controller.kappa",
    "epsilon": "controller.epsilon",
}


class MonitorFailure(Exception):
    pass


def load_config(path=None, overrides=(), seed=None):
    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"run.seed={seed}")
    if path is None:
        text = serialize_config(default_scenario())
    else:
        text = Path(path).read_text()
    return parse_config(text, overrides)


def _prepare_out(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_test"
    probe.write_bytes(b"")
    probe.unlink()
    return out


def execute(cfg, out_dir=None):
    """Simulate ``cfg``, evaluate monitors and optionally write outputs."""
    traj = simulate(cfg)
    metrics = analysis.run_metrics(traj)
    if out_dir is not None:
        output.write_run(traj, metrics, out_dir)
    return traj, metrics


def _log_verdicts(metrics, stream):
    for name, v in metrics.verdicts.items():
        print(f"  {v.status:4s} {name}: {v.value:.6g} (threshold {v.threshold:.6g})", file=stream)


def cmd_run(args):
    cfg = load_config(args.config, args.override, args.seed)
    out = _prepare_out(args.out)
    _, metrics = execute(cfg, out)
    _log_verdicts(metrics, sys.stdout)
    if not metrics.passed:
        raise MonitorFailure("failing monitors: " + ", ".join(metrics.failures()))
    return EXIT_OK


def parse_grid(items):
    """``["tau=0.2,0.1", "kappa=2"]`` -> ``[(override_key, [values...]), ...]``."""
    grid = []
    errors = []
    for item in items or ():
        name, sep, values = item.partition("=")
        name = name.strip()
        key = SWEEP_KEYS.get(name, name if name in SWEEP_KEYS.values() else None)
        if not sep or key is None:
            errors.append(f"grid entry {item!r} must be one of {sorted(SWEEP_KEYS)}=v1,v2,...")
            continue
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not vals:
            errors.append(f"grid entry {item!r} has no values")
            continue
        grid.append((key, vals))
    if not grid and not errors:
        errors.append("sweep grid is empty")
    if errors:
        raise ValidationError(errors)
    return grid


def grid_points(grid):
    keys = [k for k, _ in grid]
    return [dict(zip(keys, combo)) for combo in itertools.product(*(v for _, v in grid))]


def _integral_partner(cfg):
    """Integral-law run on the same grid with gain ``gamma'``."""
    a = cfg.adaptation
    gain = a.gamma_prime if a.gamma_prime is not None else a.gamma * a.tau
    return cfg.replace(controller__kind="integral_ce", controller__epsilon=0.0,
                       adaptation__law="integral", adaptation__gamma=gain,
                       adaptation__gamma_prime=None, adaptation__sat_lo=None,
                       adaptation__sat_hi=None)


def _sweep_point(job):
    """Worker: run one grid point; returns a summary row."""
    index, text, out_dir, with_distance = job
    cfg = parse_config(text)
    try:
        traj, metrics = execute(cfg, out_dir)
    except NumericFault as exc:
        return {"index": index, "passed": False, "error": str(exc)}
    row = {
        "index": index, "passed": metrics.passed,
        "failing": " ".join(metrics.failures()),
        "settling_time": metrics.settling_time, "sup_e": metrics.sup_e,
        "final_window_V": metrics.final_winV, "distance_to_integral": float("nan"),
    }
    if with_distance:
        try:
            ref = simulate(_integral_partner(cfg))
            row["distance_to_integral"] = analysis.compare_runs(traj, ref).sup_state
        except (NumericFault, ConfigurationError):
            row["distance_to_integral"] = float("inf")
    return row


def cmd_sweep(args):
    base = load_config(args.config, args.override, args.seed)
    grid = parse_grid(args.grid)
    points = grid_points(grid)
    base_text = serialize_config(base)
    configs, problems = [], []
    for i, point in enumerate(points):
        try:
            cfg = parse_config(base_text, [f"{k}={v}" for k, v in point.items()])
        except ValidationError as exc:
            problems.extend(f"grid point {i} {point}: {e}" for e in exc.errors)
            continue
        configs.append(cfg)
    if problems:
        raise ValidationError(problems)

    out = _prepare_out(args.out)
    with_distance = base.adaptation.law != "integral" and base.plant.kind == "scalar"
    jobs = [(i, serialize_config(cfg), str(out / f"point_{i:03d}"), with_distance)
            for i, cfg in enumerate(configs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]

    names = [k.split(".")[1] for k, _ in grid]
    fields = ["index", *names, "settling_time", "sup_e", "final_window_V",
              "distance_to_integral", "passed", "failing"]
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n",
                                extrasaction="ignore")
        writer.writeheader()
        for point, row in zip(points, rows):
            rec = {k.split(".")[1]: v for k, v in point.items()}
            for key, value in row.items():
                rec[key] = f"{value:.17g}" if isinstance(value, float) else value
            rec["passed"] = str(bool(row["passed"])).lower()
            writer.writerow(rec)
            print(f"point {row['index']}: {point} -> {'PASS' if row['passed'] else 'FAIL'}")
    failed = [r["index"] for r in rows if not r["passed"]]
    if failed:
        raise MonitorFailure(f"grid points {failed} failed their monitors")
    return EXIT_OK


def cmd_compare(args):
    if len(args.config) != 2:
        raise ValidationError(["compare needs exactly two --config files"])
    cfg_a = load_config(args.config[0], args.override, args.seed)
    cfg_b = load_config(args.config[1], args.override, args.seed)
    ia, ib = cfg_a.integrator, cfg_b.integrator
    if (ia.h, ia.t_final) != (ib.h, ib.t_final):
        raise ValidationError(["configs must share integrator.h and integrator.t_final"])
    out = _prepare_out(args.out)
    ta, ma = execute(cfg_a, out / "a")
    tb, mb = execute(cfg_b, out / "b")
    d = analysis.compare_runs(ta, tb)
    lines = ["[divergence]"]
    for name in ("sup_state", "l2_state", "sup_error", "l2_error", "sup_theta", "l2_theta"):
        lines.append(f"{name} = {getattr(d, name)!r}")
    lines += ["", "[runs]", f"a = {'PASS' if ma.passed else 'FAIL'}",
              f"b = {'PASS' if mb.passed else 'FAIL'}"]
    failures = [f"a:{n}" for n in ma.failures()] + [f"b:{n}" for n in mb.failures()]
    if args.bound is not None:
        lines.append(f"bound = {args.bound!r}")
        if not d.sup_state <= args.bound:
            failures.append("sup_state_bound")
    output.write_text(out / "divergence.txt", "\n".join(lines) + "\n")
    print(f"sup state distance {d.sup_state:.6g}, L2 {d.l2_state:.6g}")
    if failures:
        raise MonitorFailure("failing: " + ", ".join(failures))
    return EXIT_OK


def lemma_samples(family):
    """Resolve a family spec to ``(g, h, tau, expected_profile_or_None)``."""
    if family.startswith("from_run:"):
        run_dir = Path(family.split(":", 1)[1])
        report = output.read_report(run_dir / "report.txt")
        header, data = output.read_csv(run_dir / "trajectory.csv")
        if "V" not in header:
            raise ConfigurationError("trajectory.csv has no V column")
        t = data[:, header.index("t")]
        tau = float(report["summary"]["tau"])
        h = float(t[1] - t[0]) if len(t) > 1 else float(report["summary"]["h"])
        if not np.allclose(np.diff(t), h, rtol=0, atol=1e-9):
            raise ConfigurationError("trajectory is not uniformly recorded")
        return data[:, header.index("V")], h, tau, None
    if family not in analysis.LEMMA_FAMILIES:
        raise ConfigurationError(
            f"unknown family {family!r}; choose from {analysis.LEMMA_FAMILIES} or from_run:<dir>")
    g, h, tau = analysis.lemma_family(family)
    return g, h, tau, analysis.EXPECTED_PROFILES[family]


def cmd_verify_lemma(args):
    g, h, tau, expected = lemma_samples(args.family)
    out = _prepare_out(args.out)
    lemma = analysis.barbalat_monitor(g, h, tau)
    output.write_text(out / "lemma.txt",
                      output.lemma_report_text(args.family, lemma, expected, h, tau))
    print(f"{args.family}: {lemma.verdict} "
          f"(bounded={lemma.hypothesis_bounded}, window={lemma.window_decayed}, "
          f"conclusion={lemma.conclusion})")
    if not lemma.consistent:
        raise MonitorFailure("lemma contradiction: the harness is wrong")
    if expected is not None and lemma.profile() != tuple(expected):
        raise MonitorFailure(f"profile {lemma.profile()} differs from expected {expected}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="incremental-adaptive",
        description="Simulate adaptive tracking with incremental parameter laws.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_append=False):
        if config_append:
            p.add_argument("--config", action="append", default=[], help="scenario file")
        else:
            p.add_argument("--config", help="scenario file (default scalar scenario if omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("run", help="simulate one scenario")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid over gamma_prime, tau, kappa, epsilon")
    common(p)
    p.add_argument("--grid", action="append", default=[], metavar="NAME=V1,V2,...")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="run two scenarios and report their divergence")
    common(p, config_append=True)
    p.add_argument("--bound", type=float, help="fail if the sup state distance exceeds this")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify-lemma", help="check the windowed Barbalat lemma on samples")
    p.add_argument("family", help="exponential | rational_decay | bump_train | from_run:<dir>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify_lemma)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except MonitorFailure as exc:
        print(f"monitor failure: {exc}", file=sys.stderr)
        return EXIT_MONITOR
    except NumericFault as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return EXIT_MONITOR
    except ValidationError as exc:
        print("invalid configuration:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigurationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
