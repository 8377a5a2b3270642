"""Adaptation laws and the delayed-estimate history they read from.

Five laws are provided:

``integral``
    ``d/dt theta_hat = s * gamma * phi * e`` (ODE state of the integrator)
``incremental``
    ``theta_hat(t) = theta_hat(t - tau) + s * gamma * phi(t) * e(t)``
``forward_incremental``
    ``theta_hat(t + tau) = theta_hat(t) + s * gamma * phi(t) * e(t)``,
    ``theta_hat = theta_hat0`` on ``[0, tau)``
``saturated_incremental``
    recursion on ``theta_star`` with both the history read and the output
    clamped to a box
``robust_incremental``
    incremental law driven by the dead-zone error ``e_eps * sigma_eps``

with ``s = sgn(b)``. The update direction is the one that makes
``b * theta_tilde . phi * e`` cancel in the Lyapunov-Krasovskii derivative
for the controller ``u = -s kappa e - theta_hat . phi``. Passing
``printed_sign=True`` flips it (``-s * gamma ...``); that variant is
destabilising and kept only for comparison runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, HistoryUnderflowError

LAWS = (
    "integral",
    "incremental",
    "forward_incremental",
    "saturated_incremental",
    "robust_incremental",
)


def steps_per_delay(tau, h):
    """Return ``m`` with ``tau == m * h``; raise if ``h`` does not divide ``tau``."""
    if not (tau > 0 and h > 0):
        raise ConfigurationError("tau and h must be positive")
    m = round(tau / h)
    if m < 1 or abs(m * h - tau) > 1e-9 * max(tau, 1.0):
        raise ConfigurationError("tau must be an integer multiple of h")
    return int(m)


def gain_from_tau(gamma_prime, tau):
    """Adaptation gain ``gamma = gamma_prime / tau``."""
    if not (gamma_prime > 0 and tau > 0):
        raise ConfigurationError("gamma_prime and tau must be positive")
    return gamma_prime / tau


def _direction(printed_sign):
    return -1.0 if printed_sign else 1.0


@dataclass
class AdaptationConfig:
    law: str = "incremental"
    tau: float = 0.1
    gamma_prime: float | None = None
    gamma: float | None = None
    theta_hat0: Sequence[float] | None = None
    sat_lo: Sequence[float] | None = None
    sat_hi: Sequence[float] | None = None
    printed_sign: bool = False

    def problems(self):
        """List every violated constraint (empty when valid)."""
        out = []
        if self.law not in LAWS:
            out.append(f"unknown adaptation law {self.law!r}")
        if not self.tau > 0:
            out.append("tau must be positive")
        if self.gamma is not None and self.gamma_prime is not None:
            out.append("gamma and gamma_prime are mutually exclusive")
        elif self.gamma is None and self.gamma_prime is None:
            out.append("one of gamma or gamma_prime is required")
        for name in ("gamma", "gamma_prime"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                out.append(f"{name} must be positive")
        has_box = self.sat_lo is not None or self.sat_hi is not None
        if self.law == "saturated_incremental":
            if self.sat_lo is None or self.sat_hi is None:
                out.append("saturated_incremental requires sat_lo and sat_hi")
            elif len(self.sat_lo) != len(self.sat_hi) or not np.all(
                np.asarray(self.sat_lo, float) < np.asarray(self.sat_hi, float)
            ):
                out.append("sat_lo < sat_hi must hold componentwise")
        elif has_box:
            out.append("saturation box is only allowed with saturated_incremental")
        return out

    @property
    def gain(self):
        if self.gamma is not None:
            return float(self.gamma)
        return gain_from_tau(self.gamma_prime, self.tau)


@dataclass
class TrueParameters:
    """Ground-truth ``theta`` the estimate should match, with the plant gain ``b``."""

    theta: np.ndarray
    b: float

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)

    def error(self, theta_hat):
        return np.asarray(theta_hat, dtype=float) - self.theta


class EstimateHistory:
    """Ring buffer of parameter estimates on the integrator grid.

    Sample ``j`` belongs to time ``j * h``. Each sample holds one value per
    integrator stage; stage 0 is the grid value itself, later stages are the
    values produced at the Runge-Kutta stage points of the step starting at
    ``j * h``. Reads before the first written index return ``theta_hat0``.

    With ``lead=True`` the buffer serves the forward law: writes happen one
    delay ahead and indices below ``m`` read as ``theta_hat0``.
    """

    def __init__(self, tau, h, theta_hat0, stages=1, lead=False):
        self.tau = float(tau)
        self.h = float(h)
        self.m = steps_per_delay(tau, h)
        self.theta_hat0 = tuple(float(v) for v in theta_hat0)
        self.stages = int(stages)
        self.lead = bool(lead)
        self.capacity = self.m + 2
        self.first = self.m if lead else 0
        self._slots = [[self.theta_hat0] * self.stages for _ in range(self.capacity)]
        self.newest = self.first - 1

    # grid-index access, used by the simulator at every stage

    def read(self, j, stage=0):
        if j < self.first:
            return self.theta_hat0
        if j > self.newest or j <= self.newest - self.capacity:
            self._range_error(j)
        return self._slots[j % self.capacity][stage]

    def write(self, j, stage, value):
        if j > self.newest:
            if j != self.newest + 1:
                raise ValueError(f"history write at {j} skips past newest {self.newest}")
            self.newest = j
        elif j <= self.newest - self.capacity + 1 or j < self.first:
            raise HistoryUnderflowError(f"cannot rewrite sample {j}")
        self._slots[j % self.capacity][stage] = value

    def _range_error(self, j):
        if j > self.newest:
            raise LookupError(f"estimate at index {j} not yet computed (newest {self.newest})")
        raise HistoryUnderflowError(
            f"index {j} is older than the retained window "
            f"[{self.newest - self.capacity + 1}, {self.newest}]"
        )

    # time-based access

    def append(self, t, theta_hat):
        """Store a grid sample at time ``t`` (must be the next grid point)."""
        j = round(t / self.h)
        if abs(j * self.h - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not on the grid of step {self.h}")
        value = tuple(float(v) for v in theta_hat)
        for i in range(self.stages):
            self.write(j, i, value)

    def query(self, t):
        """Estimate at time ``t``: exact at grid points, linear in between."""
        if t < self.first * self.h - 1e-12 * max(1.0, abs(t)):
            return np.array(self.theta_hat0)
        x = t / self.h
        j = math.floor(x + 1e-9)
        frac = x - j
        if frac <= 1e-9:
            return np.array(self.read(j))
        lo = np.array(self.read(j))
        hi = np.array(self.read(j + 1))
        return lo + frac * (hi - lo)

    @property
    def oldest(self):
        return max(self.first, self.newest - self.capacity + 1)

    def samples(self):
        return [(j * self.h, np.array(self.read(j)))
                for j in range(self.oldest, self.newest + 1)]

    def __len__(self):
        return max(0, self.newest - self.oldest + 1)


def saturate(v, lo, hi):
    return np.clip(np.asarray(v, dtype=float), lo, hi)


def integral_law_derivative(b_sign, gamma, phi, e, printed_sign=False):
    return _direction(printed_sign) * b_sign * gamma * np.asarray(phi, dtype=float) * e


def incremental_update(h: EstimateHistory, t, b_sign, gamma, phi, e, printed_sign=False):
    """Estimate at ``t`` from the one a delay earlier; the caller appends it."""
    prev = h.query(t - h.tau)
    return prev + _direction(printed_sign) * b_sign * gamma * np.asarray(phi, float) * e


def control_estimate(h: EstimateHistory, t):
    """Estimate the forward law hands to the controller at time ``t``."""
    return h.query(t)


def forward_incremental_update(h: EstimateHistory, t, b_sign, gamma, phi, e,
                               printed_sign=False):
    """Compute ``theta_hat(t + tau)`` and store it in ``h`` (a lead history)."""
    if not h.lead:
        raise ValueError("forward law needs a history built with lead=True")
    current = h.query(t)
    nxt = current + _direction(printed_sign) * b_sign * gamma * np.asarray(phi, float) * e
    h.append(t + h.tau, nxt)
    return nxt


def saturated_incremental_update(h: EstimateHistory, t, b_sign, gamma, phi, e, lo, hi,
                                 printed_sign=False):
    """Return ``(theta_hat, theta_star)``; ``h`` stores ``theta_star``."""
    prev = saturate(h.query(t - h.tau), lo, hi)
    star = prev + _direction(printed_sign) * b_sign * gamma * np.asarray(phi, float) * e
    return saturate(star, lo, hi), star


def robust_incremental_update(h: EstimateHistory, t, b_sign, gamma, phi, e_eps, sigma_eps,
                              printed_sign=False):
    prev = h.query(t - h.tau)
    drive = e_eps * sigma_eps
    return prev + _direction(printed_sign) * b_sign * gamma * np.asarray(phi, float) * drive


# Stage-level law objects used by the simulator. They work on tuples of
# floats because they run at every Runge-Kutta stage.

class StageLaw:
    """Per-stage realisation of a recursive law on a shared history.

    At step ``k`` and stage ``i`` the delayed read uses the value stored
    for the same stage ``m`` steps earlier, so every stage sees the
    estimate that the same Runge-Kutta stage produced one delay ago.
    """

    lead = False

    def __init__(self, cfg: AdaptationConfig, p, b_sign, h, stages):
        theta0 = cfg.theta_hat0 if cfg.theta_hat0 is not None else [0.0] * p
        if len(theta0) != p:
            raise ConfigurationError(f"theta_hat0 needs {p} entries, got {len(theta0)}")
        self.cfg = cfg
        self.p = p
        self.gamma = cfg.gain
        self.coef = _direction(cfg.printed_sign) * b_sign * self.gamma
        self.history = EstimateHistory(cfg.tau, h, theta0, stages, lead=self.lead)
        self.m = self.history.m

    def estimate(self, k, i, phi, err):
        hist = self.history
        prev = hist.read(k - self.m, i)
        c = self.coef * err
        th = tuple(a + c * f for a, f in zip(prev, phi))
        hist.write(k, i, th)
        return th


class IncrementalStageLaw(StageLaw):
    pass


class RobustStageLaw(StageLaw):
    """Same recursion as the incremental law; ``err`` is ``e_eps * sigma_eps``."""


class SaturatedStageLaw(StageLaw):
    def __init__(self, cfg, p, b_sign, h, stages):
        super().__init__(cfg, p, b_sign, h, stages)
        self.lo = tuple(float(v) for v in cfg.sat_lo)
        self.hi = tuple(float(v) for v in cfg.sat_hi)
        if len(self.lo) != p:
            raise ConfigurationError(f"saturation box needs {p} entries, got {len(self.lo)}")

    def clamp(self, v):
        return tuple(min(max(a, lo), hi) for a, lo, hi in zip(v, self.lo, self.hi))

    def estimate(self, k, i, phi, err):
        hist = self.history
        prev = self.clamp(hist.read(k - self.m, i))
        c = self.coef * err
        star = tuple(a + c * f for a, f in zip(prev, phi))
        hist.write(k, i, star)
        return self.clamp(star)


class ForwardStageLaw(StageLaw):
    lead = True

    def estimate(self, k, i, phi, err):
        hist = self.history
        th = hist.read(k, i)
        c = self.coef * err
        hist.write(k + self.m, i, tuple(a + c * f for a, f in zip(th, phi)))
        return th

    def ahead(self, k):
        """Stored grid value ``theta_hat((k + m) h)``."""
        return self.history.read(k + self.m, 0)


class IntegralLaw:
    """Integral law; the estimate lives in the ODE state."""

    def __init__(self, cfg: AdaptationConfig, p, b_sign):
        theta0 = cfg.theta_hat0 if cfg.theta_hat0 is not None else [0.0] * p
        if len(theta0) != p:
            raise ConfigurationError(f"theta_hat0 needs {p} entries, got {len(theta0)}")
        self.theta_hat0 = tuple(float(v) for v in theta0)
        self.gamma = cfg.gain
        self.coef = _direction(cfg.printed_sign) * b_sign * self.gamma

    def derivative(self, phi, err):
        c = self.coef * err
        return [c * f for f in phi]


def make_stage_law(cfg: AdaptationConfig, p, b_sign, h, stages):
    if cfg.law == "integral":
        return IntegralLaw(cfg, p, b_sign)
    cls = {
        "incremental": IncrementalStageLaw,
        "forward_incremental": ForwardStageLaw,
        "saturated_incremental": SaturatedStageLaw,
        "robust_incremental": RobustStageLaw,
    }[cfg.law]
    return cls(cfg, p, b_sign, h, stages)
