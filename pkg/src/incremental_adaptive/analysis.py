"""Lyapunov quantities, windowed integrals and convergence verdicts.

Everything here works on completed, uniformly sampled series. Windowed
integrals use the trapezoid rule on the sampling grid; derivatives use
central finite differences (``np.gradient``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

CONSISTENT = "LEMMA_CONSISTENT"
INCONSISTENT = "LEMMA_INCONSISTENT"


def lyapunov_V(value):
    return 0.5 * np.square(value)


def _cumulative(values, h, left=None):
    v = np.asarray(values, dtype=float)
    end = v[1:] if left is None else np.asarray(left, dtype=float)[1:]
    return np.concatenate([np.zeros((1,) + v.shape[1:]),
                           np.cumsum(0.5 * h * (v[:-1] + end), axis=0)])


def sliding_trapezoid(values, h, m, left=None):
    """Trapezoid integrals over every run of ``m + 1`` consecutive samples.

    Entry ``i`` integrates ``values[i : i + m + 1]``; the result has
    ``len(values) - m`` entries. ``left`` optionally gives left limits at
    the samples for piecewise-continuous integrands: each panel then uses
    the right limit at its start and the left limit at its end.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] <= m:
        return np.empty((0,) + v.shape[1:])
    c = _cumulative(v, h, left)
    return c[m:] - c[:-m]


def _steps(tau, h):
    m = int(round(tau / h))
    if m < 1 or abs(m * h - tau) > 1e-9 * max(1.0, tau):
        raise ValueError("tau must be an integer multiple of the sampling step")
    return m


def window_integral(values, tau, t, h, t0=0.0):
    """``int_{t - tau}^{t}`` of a series sampled at ``t0 + j h``."""
    v = np.asarray(values, dtype=float)
    m = _steps(tau, h)
    end = int(round((t - t0) / h))
    if abs(t0 + end * h - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t} is not a sample time")
    start = end - m
    if start < 0 or end >= len(v):
        raise ValueError(
            f"samples cover [{t0}, {t0 + (len(v) - 1) * h}], window [{t - tau}, {t}] is not covered"
        )
    return float(np.trapezoid(v[start:end + 1], dx=h))


def partial_window_series(values, h, m, left=None):
    """Window integrals over ``[max(0, t - tau), t]`` for every sample."""
    c = _cumulative(values, h, left)
    out = c.copy()
    out[m:] = c[m:] - c[:-m]
    return out


def krasovskii_L(V, window, b, gamma, tau):
    """``V + |b| / (2 gamma) * int ||theta_tilde||^2`` over one window.

    ``window`` holds ``theta_tilde`` samples spanning exactly ``tau`` on a
    uniform grid (first and last sample on the window ends).
    """
    w = np.asarray(window, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if w.shape[0] < 2 or not np.all(np.isfinite(w)):
        raise ValueError("window needs at least two finite samples spanning tau")
    h = tau / (w.shape[0] - 1)
    energy = np.einsum("ij,ij->i", w, w)
    return float(V + abs(b) / (2.0 * gamma) * np.trapezoid(energy, dx=h))


def L_series(traj):
    """Lyapunov(-Krasovskii) functional along a trajectory.

    Backward laws use the window ``[t - tau, t]`` with the estimate held at
    ``theta_hat0`` before ``t = 0``; the forward law uses ``[t, t + tau]``;
    the integral law uses the pointwise ``|theta_tilde|^2``.
    """
    V = traj.V
    c = abs(traj.b) / (2.0 * traj.gamma)
    tilde = traj.theta_hat - traj.theta_true
    if traj.law == "integral":
        return V + c * np.einsum("ij,ij->i", tilde, tilde)
    m, h = traj.m, traj.h
    theta0 = np.asarray(traj.config.adaptation.theta_hat0 or np.zeros(tilde.shape[1]))
    tilde0 = theta0 - traj.theta_true
    N = len(V)
    left = _left_theta(traj) - traj.theta_true
    if traj.law == "forward_incremental":
        extra = []
        for j in range(N, N + m):
            k = j - m
            extra.append(traj.theta_ahead[k] if k >= 0 else theta0)
        extra = np.asarray(extra).reshape(m, -1) - traj.theta_true
        ext = np.vstack([tilde, extra])
        ext_left = np.vstack([left, extra])
        if N > m:  # the jump at tau recurs past t_final
            idx = np.arange(m, N + m, m)
            ext_left[idx[idx >= N]] += left[m] - tilde[m]
    else:
        pad = np.tile(tilde0, (m, 1))
        ext = np.vstack([pad, tilde])
        ext_left = np.vstack([pad, left])
    energy = np.einsum("ij,ij->i", ext, ext)
    energy_left = np.einsum("ij,ij->i", ext_left, ext_left)
    return V + c * sliding_trapezoid(energy, h, m, energy_left)


def _left_theta(traj):
    return traj.theta_hat if traj.theta_left is None else traj.theta_left


def monitor_series(traj, name):
    """Full-resolution series behind the CSV monitor columns."""
    h, m = traj.h, traj.m
    if name == "L":
        return L_series(traj)
    if name == "winV":
        return partial_window_series(traj.V, h, m)
    if name == "winTh":
        left = _left_theta(traj)
        return partial_window_series(np.einsum("ij,ij->i", traj.theta_hat, traj.theta_hat), h, m,
                                     np.einsum("ij,ij->i", left, left))
    if name == "winU":
        u_left = traj.u if traj.u_left is None else traj.u_left
        return partial_window_series(traj.u ** 2, h, m, u_left ** 2)
    if name == "winGdot":
        return partial_window_series(np.gradient(traj.V, h) ** 2 if len(traj.V) > 1
                                     else np.zeros_like(traj.V), h, m)
    raise KeyError(name)


@dataclass
class Verdict:
    passed: bool | None  # None: not evaluated
    value: float = float("nan")
    threshold: float = float("nan")
    detail: str = ""
    advisory: bool = False  # reported but does not decide the run

    @property
    def margin(self):
        return self.threshold - self.value

    @property
    def status(self):
        if self.passed is False and self.advisory:
            return "WARN"
        return {True: "PASS", False: "FAIL", None: "SKIP"}[self.passed]


def _bounded_trend(series, t, tau, growth_factor, bound=None):
    """Decide boundedness of a windowed series on a finite horizon.

    With ``bound`` the check is ``sup <= bound``. Without one, the series
    counts as bounded when its supremum over the second half of
    ``[tau, T]`` does not exceed ``growth_factor`` times the supremum over
    the first half.
    """
    s = np.asarray(series, dtype=float)
    sel = t >= tau - 1e-12
    if not np.any(sel):
        return True, float("nan"), float("nan")
    T = t[-1]
    sup_all = float(np.max(s[sel]))
    if bound is not None:
        return sup_all <= bound, sup_all, float(bound)
    mid = 0.5 * (tau + T)
    early = s[sel & (t <= mid)]
    late = s[sel & (t >= mid)]
    early_sup = float(np.max(early)) if early.size else 0.0
    late_sup = float(np.max(late)) if late.size else 0.0
    limit = growth_factor * early_sup
    return late_sup <= limit, late_sup, limit


@dataclass
class LemmaVerdict:
    """Outcome of checking the windowed Barbalat-like lemma on one sample.

    ``hypothesis_bounded``: windowed integral of the squared derivative
    stays bounded; ``window_decayed``: the final window integral of ``g``
    is below ``tol_window``; ``conclusion``: ``g`` is below ``tol_g`` on
    the final ``delta`` stretch. The sample is consistent with the lemma
    unless both hypotheses hold while the conclusion fails.
    """

    gdot_energy_sup: float
    gdot_energy_late: float
    gdot_energy_limit: float
    hypothesis_bounded: bool
    window_final: float
    window_decayed: bool
    tail_sup: float
    conclusion: bool
    verdict: str

    @property
    def consistent(self):
        return self.verdict == CONSISTENT

    def profile(self):
        return (self.hypothesis_bounded, self.window_decayed, self.conclusion)


def barbalat_monitor(g, h, tau, M=None, tol_window=1e-4, tol_g=1e-2, delta=None,
                     growth_factor=2.0):
    """Check one sampled nonnegative ``g`` (on ``[0, T]``) against the lemma."""
    g = np.asarray(g, dtype=float)
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ContractViolation("g must be finite and nonnegative")
    m = _steps(tau, h)
    T = (len(g) - 1) * h
    if T < tau:
        raise ValueError("need samples over at least one window")
    t = np.arange(len(g)) * h
    gdot = np.gradient(g, h)
    energy = np.full(len(g), np.nan)
    energy[m:] = sliding_trapezoid(gdot ** 2, h, m)
    bounded, late, limit = _bounded_trend(np.nan_to_num(energy), t, tau, growth_factor, M)
    window_final = float(np.trapezoid(g[-(m + 1):], dx=h))
    delta = tau if delta is None else delta
    tail = g[t >= T - delta - 1e-12]
    tail_sup = float(np.max(tail))
    decayed = window_final <= tol_window
    conclusion = tail_sup <= tol_g
    verdict = INCONSISTENT if (bounded and decayed and not conclusion) else CONSISTENT
    return LemmaVerdict(
        gdot_energy_sup=float(np.nanmax(energy)), gdot_energy_late=late,
        gdot_energy_limit=limit, hypothesis_bounded=bool(bounded),
        window_final=window_final, window_decayed=bool(decayed),
        tail_sup=tail_sup, conclusion=bool(conclusion), verdict=verdict,
    )


def derivative_bound_monitor(g, h, bound=None, growth_factor=2.0):
    """Bounded-derivative variant of the lemma hypothesis.

    Returns ``(passed, late_sup, limit)`` for ``|dg/dt|``.
    """
    g = np.asarray(g, dtype=float)
    t = np.arange(len(g)) * h
    gdot = np.abs(np.gradient(g, h))
    return _bounded_trend(gdot, t, 0.0, growth_factor, bound)


# synthetic families for the lemma


def _bump(t, centre, width):
    arg = (t - centre) / width
    out = np.zeros_like(t)
    sel = np.abs(arg) < 0.5
    out[sel] = np.cos(np.pi * arg[sel]) ** 2
    return out


LEMMA_FAMILIES = ("exponential", "rational_decay", "bump_train")

# expected (hypothesis_bounded, window_decayed, conclusion) per family
EXPECTED_PROFILES = {
    "exponential": (True, True, True),
    "rational_decay": (True, True, True),
    "bump_train": (False, True, False),
}


def lemma_family(name):
    """Return ``(g, h, tau)`` for a named synthetic family."""
    if name == "exponential":
        h, tau, T = 1e-3, 1.0, 30.0
        t = np.arange(int(round(T / h)) + 1) * h
        return np.exp(-t), h, tau
    if name == "rational_decay":
        h, tau, T = 1e-2, 1.0, 200.0
        t = np.arange(int(round(T / h)) + 1) * h
        return 1.0 / (1.0 + t) ** 2, h, tau
    if name == "bump_train":
        # unit-height bumps at t = k of width 2**-k; T puts the last bump
        # inside the final window
        K = 13
        h, tau = 2.0 ** -18, 1.0
        T = K + 0.5
        t = np.arange(int(round(T / h)) + 1) * h
        g = np.zeros_like(t)
        for k in range(1, K + 1):
            w = 2.0 ** -k
            lo, hi = np.searchsorted(t, [k - w, k + w])
            g[lo:hi] += _bump(t[lo:hi], k, w)
        return g, h, tau
    raise ValueError(f"unknown lemma family {name!r}; choose from {LEMMA_FAMILIES}")


# run-level summaries


@dataclass
class RunMetrics:
    sup_e: float
    sup_x: float
    sup_win_theta: float
    sup_win_u: float
    settling_time: float
    final_e: float
    final_winV: float
    L0: float
    L_step_max: float
    verdicts: dict = field(default_factory=dict)
    lemma: LemmaVerdict | None = None

    @property
    def passed(self):
        return not self.failures()

    def failures(self):
        return [k for k, v in self.verdicts.items() if v.passed is False and not v.advisory]


def settling_time(t, err, tol):
    """First time after which ``|err| <= tol`` for good (``inf`` if never)."""
    bad = np.nonzero(np.abs(err) > tol)[0]
    if bad.size == 0:
        return float(t[0])
    if bad[-1] == len(t) - 1:
        return float("inf")
    return float(t[bad[-1] + 1])


def L_steps(L, m, offset):
    """Increments ``L(t_i) - L(t_{i-1})`` along ``t_i = i tau + offset``."""
    idx = np.arange(offset, len(L), m)
    return np.diff(L[idx])


def run_metrics(traj) -> RunMetrics:
    cfg = traj.config
    tol = cfg.tolerances
    t, h, tau, m = traj.t, traj.h, traj.tau, traj.m
    T = float(t[-1])
    err = traj.e_eps  # |e_f| outside the dead zone, |e| for plain tracking
    V = traj.V
    L = traj.monitor("L")
    winTh = traj.monitor("winTh")
    winU = traj.monitor("winU")
    after_tau = t >= tau - 1e-12
    sup_win_theta = float(np.max(winTh[after_tau])) if np.any(after_tau) else float("nan")
    sup_win_u = float(np.max(winU[after_tau])) if np.any(after_tau) else float("nan")

    steps = [L_steps(L, m, off) for off in sorted({0, m // 2})]
    step_max = max((float(np.max(s)) for s in steps if s.size), default=float("-inf"))
    metrics = RunMetrics(
        sup_e=float(np.max(np.abs(traj.e[:, 0]))),
        sup_x=float(np.max(np.linalg.norm(traj.x, axis=1))),
        sup_win_theta=sup_win_theta, sup_win_u=sup_win_u,
        settling_time=settling_time(t, err, tol.tol_e),
        final_e=float(abs(traj.e[-1, 0])),
        final_winV=float(traj.monitor("winV")[-1]),
        L0=float(L[0]), L_step_max=step_max,
    )
    v = metrics.verdicts
    if T < 10 * tau:
        v["horizon"] = Verdict(None, T, 10 * tau, "monitors need t_final >= 10 tau")
        return metrics

    late = t >= tol.settle_from * T - 1e-12
    late_err = float(np.max(err[late]))
    v["tracking"] = Verdict(late_err <= tol.tol_e, late_err, tol.tol_e,
                            f"sup error for t >= {tol.settle_from * T:g}")
    v["window_decay"] = Verdict(metrics.final_winV <= tol.tol_window, metrics.final_winV,
                                tol.tol_window, "window integral of V at t_final")
    tol_L = tol.tol_L_rel * float(L[0])
    law = traj.law
    # the dead-zone switching chatters at the zone edge; fixed-step
    # integration then only resolves L to O(h), so these are reported only
    switching = law == "robust_incremental"
    v["L_monotone"] = Verdict(step_max <= tol_L, step_max, tol_L,
                              "max L(t_i) - L(t_i - tau), t_0 in {0, tau/2}",
                              advisory=switching)
    # finite differences of L pick up the grid-scale jitter that the
    # delay recursion never smooths out, so this check is reported only
    slack, allowance = dL_inequality(traj)
    excess = float(np.max(slack - allowance))
    v["dL"] = Verdict(excess <= 0.0, excess, 0.0,
                      "max of dL/dt + 2 kappa |b| V - tol_dL (1 + V)", advisory=True)

    half = t <= 0.5 * T + 1e-12
    sel_half = after_tau & half
    for name, series in (("theta_energy_bounded", winTh), ("u_energy_bounded", winU)):
        full = float(np.max(series[after_tau]))
        first = float(np.max(series[sel_half]))
        limit = (1.0 + tol.growth) * first
        v[name] = Verdict(bool(np.isfinite(full) and full <= limit), full, limit,
                          "sup over [tau, T] vs (1 + growth) sup over [tau, T/2]")

    lemma = barbalat_monitor(V, h, tau, M=tol.M, tol_window=tol.tol_window, tol_g=tol.tol_g)
    metrics.lemma = lemma
    v["lemma"] = Verdict(lemma.consistent and lemma.hypothesis_bounded and lemma.conclusion,
                         lemma.tail_sup, tol.tol_g, lemma.verdict)

    if law == "saturated_incremental":
        lo = np.asarray(cfg.adaptation.sat_lo)
        hi = np.asarray(cfg.adaptation.sat_hi)
        excess = float(np.max(np.maximum(traj.theta_hat - hi, lo - traj.theta_hat)))
        v["box"] = Verdict(excess <= 0.0, excess, 0.0, "max excursion outside the box")
        ok, late_sup, limit = derivative_bound_monitor(V, h)
        v["derivative_bounded"] = Verdict(ok, late_sup, limit, "sup |dV/dt| late vs early")
    if law == "forward_incremental":
        res = cancellation_residual(traj)
        scale = tol.tol_cancel * (1.0 + traj.phi_sq * traj.e_f ** 2)
        worst = float(np.max(np.abs(res) / scale * tol.tol_cancel))
        v["u1_cancellation"] = Verdict(bool(np.all(np.abs(res) <= scale)), worst,
                                       tol.tol_cancel, "max |residual| / (1 + |phi|^2 e^2)")
    if law == "robust_incremental":
        eps = traj.epsilon
        late_ef = float(np.max(np.abs(traj.e_f[late])))
        v["dead_zone"] = Verdict(late_ef <= eps + tol.tol_dead_zone, late_ef,
                                 eps + tol.tol_dead_zone, "sup |e_f| after settle_from")
        e1 = float(abs(traj.e[-1, 0]))
        v["output_interval"] = Verdict(e1 < eps + tol.tol_interval, e1,
                                       eps + tol.tol_interval, "final |e_1|")
    return metrics


def dL_inequality(traj):
    """Worst excess of ``dL/dt + 2 kappa |b| V`` over ``tol_dL (1 + V)``."""
    L = traj.monitor("L")
    V = traj.V
    dL = np.gradient(L, traj.h)
    slack = dL + 2.0 * traj.kappa * abs(traj.b) * V
    return slack, traj.config.tolerances.tol_dL * (1.0 + V)


def cancellation_residual(traj):
    """``b u1 e + |b| / (2 gamma) |theta_hat(t + tau) - theta_hat(t)|^2``."""
    if traj.theta_ahead is None:
        raise ValueError("cancellation residual needs a forward-law trajectory")
    d = traj.theta_ahead - traj.theta_hat
    return traj.b * traj.u1 * traj.e_f + abs(traj.b) / (2.0 * traj.gamma) * np.einsum("ij,ij->i", d, d)


@dataclass
class Divergence:
    sup_state: float
    l2_state: float
    sup_error: float
    l2_error: float
    sup_theta: float
    l2_theta: float


def compare_runs(a, b) -> Divergence:
    if len(a.t) != len(b.t) or not np.allclose(a.t, b.t, rtol=0, atol=1e-12):
        raise ValueError("trajectories are not on the same grid")
    h = a.t[1] - a.t[0] if len(a.t) > 1 else 0.0

    def dist(x, y):
        d = np.asarray(x) - np.asarray(y)
        d = d.reshape(len(d), -1)
        norm = np.linalg.norm(d, axis=1)
        l2 = math.sqrt(float(np.trapezoid(norm ** 2, dx=h))) if len(norm) > 1 else 0.0
        return float(np.max(norm)), l2

    sx, lx = dist(a.x, b.x)
    se, le = dist(a.e, b.e)
    if a.theta_hat.shape == b.theta_hat.shape:
        st, lt = dist(a.theta_hat, b.theta_hat)
    else:
        st = lt = float("nan")
    return Divergence(sx, lx, se, le, st, lt)
