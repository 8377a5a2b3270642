"""Uncertain plant families, regressors, error signals and disturbances.

Two plant families are supported:

* a scalar plant ``xdot = theta0 . phi(t, x) + b u (+ w)``
* an order-n SISO plant in companion form
  ``y^(n) + sum_i a_i Y_i(t, x) = b u + w``.

Regressors ``phi`` and nonlinearities ``Y_i`` are looked up by name in small
registries so scenario files can select them; custom evaluators are added
with :func:`register_regressor` / :func:`register_nonlinearity`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation, NumericFault


@dataclass(frozen=True)
class Evaluator:
    """A named function of ``(t, x)``.

    ``bound`` is the declared supremum of the output norm for globally
    bounded evaluators and ``None`` otherwise.
    """

    name: str
    func: Callable
    dim: int
    bound: float | None = None

    @property
    def bounded(self):
        return self.bound is not None


REGRESSORS: dict[str, Evaluator] = {}
NONLINEARITIES: dict[str, Evaluator] = {}


def register_regressor(name, func, dim, bound=None, replace=False):
    """Register ``func(t, x) -> tuple`` as a scalar-plant regressor."""
    if name in REGRESSORS and not replace:
        raise ConfigurationError(f"regressor {name!r} already registered")
    REGRESSORS[name] = Evaluator(name, func, int(dim), bound)
    return REGRESSORS[name]


def register_nonlinearity(name, func, bound=None, replace=False):
    """Register ``func(t, x) -> float`` as a SISO nonlinearity ``Y_i``.

    ``x`` is the full state vector ``[y, y', ..., y^(n-1)]``.
    """
    if name in NONLINEARITIES and not replace:
        raise ConfigurationError(f"nonlinearity {name!r} already registered")
    NONLINEARITIES[name] = Evaluator(name, func, 1, bound)
    return NONLINEARITIES[name]


def get_regressor(name) -> Evaluator:
    try:
        return REGRESSORS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown regressor {name!r}; known: {sorted(REGRESSORS)}"
        ) from None


def get_nonlinearity(name) -> Evaluator:
    try:
        return NONLINEARITIES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown nonlinearity {name!r}; known: {sorted(NONLINEARITIES)}"
        ) from None


# bounded scalar regressors
register_regressor("sincos", lambda t, x: (math.sin(x), math.cos(x)), 2, bound=1.0)
register_regressor(
    "bounded_rational", lambda t, x: (x / (1.0 + x * x), 1.0), 2, bound=math.sqrt(1.25)
)
register_regressor("tanh_bias", lambda t, x: (math.tanh(x), 1.0), 2, bound=math.sqrt(2.0))
register_regressor(
    "sin_state_cos_time", lambda t, x: (math.sin(x), math.cos(t)), 2, bound=math.sqrt(2.0)
)
# unbounded
register_regressor("linear", lambda t, x: (x, 1.0), 2)
register_regressor("polynomial", lambda t, x: (x, x * x), 2)


def _sin_y_dy_rational(t, x):
    dy = x[1]
    return math.sin(x[0]) * dy / (1.0 + dy * dy)


register_nonlinearity("sin_y", lambda t, x: math.sin(x[0]), bound=1.0)
register_nonlinearity("cos_y", lambda t, x: math.cos(x[0]), bound=1.0)
register_nonlinearity("sin_y_dy_rational", _sin_y_dy_rational, bound=0.5)
register_nonlinearity("tanh_dy", lambda t, x: math.tanh(x[1]), bound=1.0)
register_nonlinearity("y", lambda t, x: x[0])
register_nonlinearity("dy", lambda t, x: x[1])


@dataclass
class ScalarPlantParams:
    theta0: Sequence[float]
    b: float
    regressor: str = "sincos"
    wbar: float = 0.0

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=float).reshape(-1)
        self.b = float(self.b)
        self.wbar = float(self.wbar)
        errors = []
        if self.b == 0.0 or not math.isfinite(self.b):
            errors.append("b must be finite and nonzero")
        if self.wbar < 0:
            errors.append("wbar must be nonnegative")
        reg = get_regressor(self.regressor)
        if self.theta0.size != reg.dim:
            errors.append(
                f"theta0 has {self.theta0.size} entries but regressor "
                f"{self.regressor!r} has dimension {reg.dim}"
            )
        if errors:
            raise ConfigurationError("; ".join(errors))

    @property
    def n(self):
        return 1


@dataclass
class SisoPlantParams:
    n: int
    a: Sequence[float]
    b: float
    nonlinearities: Sequence[str]
    wbar: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(-1)
        self.nonlinearities = tuple(self.nonlinearities)
        self.b = float(self.b)
        errors = []
        if int(self.n) != self.n or self.n < 1:
            errors.append("n must be a positive integer")
        self.n = int(self.n)
        if self.b == 0.0 or not math.isfinite(self.b):
            errors.append("b must be finite and nonzero")
        if self.wbar < 0:
            errors.append("wbar must be nonnegative")
        if not self.lam > 0:
            errors.append("lambda must be positive")
        if len(self.a) != len(self.nonlinearities):
            errors.append("len(a) must equal len(nonlinearities)")
        for name in self.nonlinearities:
            get_nonlinearity(name)
        if errors:
            raise ConfigurationError("; ".join(errors))


class ReferenceTrajectory:
    """Desired output ``y_d`` and its derivatives.

    ``kind`` is ``"constant"`` or ``"sinusoid"``
    (``offset + amplitude * sin(frequency * t + phase)``); any other
    trajectory can be supplied as ``func(t, order) -> tuple`` of length
    ``order + 1``.
    """

    def __init__(self, kind="sinusoid", amplitude=1.0, frequency=1.0, phase=0.0,
                 offset=0.0, value=0.0, func=None):
        self.kind = kind
        self.amplitude = float(amplitude)
        self.frequency = float(frequency)
        self.phase = float(phase)
        self.offset = float(offset)
        self.value = float(value)
        self.func = func
        if kind not in ("constant", "sinusoid", "custom"):
            raise ConfigurationError(f"unknown reference kind {kind!r}")
        if kind == "custom" and func is None:
            raise ConfigurationError("custom reference needs func")

    @property
    def is_constant(self):
        return self.kind == "constant"

    def derivatives(self, t, order):
        """Return ``(y_d, y_d', ..., y_d^(order))`` at time ``t``."""
        if self.kind == "constant":
            return (self.value,) + (0.0,) * order
        if self.kind == "custom":
            return tuple(self.func(t, order))
        w = self.frequency
        arg = w * t + self.phase
        s = math.sin(arg)
        c = math.cos(arg)
        cycle = (s, c, -s, -c)
        out = [self.offset + self.amplitude * s]
        scale = self.amplitude
        for k in range(1, order + 1):
            scale *= w
            out.append(scale * cycle[k % 4])
        return tuple(out)


DISTURBANCE_KINDS = ("none", "sinusoid", "seeded_bounded_noise")


@dataclass
class DisturbanceSpec:
    """Bounded disturbance ``w(t)``.

    ``seeded_bounded_noise`` is uniform on ``[-amplitude, amplitude]`` and
    held constant over intervals of length ``hold`` (the integrator step).
    """

    kind: str = "none"
    amplitude: float = 0.0
    frequency: float = 1.0
    seed: int = 0
    hold: float = 1e-3
    _chunks: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    CHUNK = 4096

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ConfigurationError(f"unknown disturbance kind {self.kind!r}")
        if self.amplitude < 0:
            raise ConfigurationError("disturbance amplitude must be nonnegative")
        if self.kind == "seeded_bounded_noise" and not self.hold > 0:
            raise ConfigurationError("noise hold interval must be positive")

    def at_step(self, k):
        """Noise value held over integrator step ``k``."""
        j, r = divmod(k, self.CHUNK)
        chunk = self._chunks.get(j)
        if chunk is None:
            rng = np.random.default_rng([int(self.seed), j])
            chunk = rng.uniform(-self.amplitude, self.amplitude, self.CHUNK)
            np.clip(chunk, -self.amplitude, self.amplitude, out=chunk)
            chunk = chunk.tolist()
            self._chunks[j] = chunk
        return chunk[r]

    def step_index(self, t):
        return int(math.floor(t / self.hold + 1e-9))


def disturbance_sample(d: DisturbanceSpec, t):
    if d.kind == "none" or d.amplitude == 0.0:
        return 0.0
    if d.kind == "sinusoid":
        return d.amplitude * math.sin(d.frequency * t)
    return d.at_step(d.step_index(t))


def disturbance_samples(d: DisturbanceSpec, t):
    """Vectorised :func:`disturbance_sample` over an array of times."""
    t = np.asarray(t, dtype=float)
    if d.kind == "none" or d.amplitude == 0.0:
        return np.zeros_like(t)
    if d.kind == "sinusoid":
        return d.amplitude * np.sin(d.frequency * t)
    idx = np.floor(t / d.hold + 1e-9).astype(np.int64)
    out = np.empty_like(t)
    for j in np.unique(idx // d.CHUNK):
        sel = idx // d.CHUNK == j
        d.at_step(int(j) * d.CHUNK)
        out[sel] = np.asarray(d._chunks[int(j)])[idx[sel] % d.CHUNK]
    return out


def eval_regressor(reg, t, x):
    ev = reg if isinstance(reg, Evaluator) else get_regressor(reg)
    if not math.isfinite(x):
        raise ContractViolation("regressor state must be finite")
    return np.asarray(ev.func(t, x), dtype=float)


def scalar_dynamics(p: ScalarPlantParams, t, x, u, w=0.0):
    """State derivative of the scalar plant."""
    phi = get_regressor(p.regressor).func(t, x)
    xdot = float(np.dot(p.theta0, phi)) + p.b * u + w
    if not math.isfinite(xdot):
        raise NumericFault("scalar_dynamics xdot", t=t, value=xdot)
    return xdot


def siso_dynamics(p: SisoPlantParams, t, x, u, w=0.0):
    """Companion-form state derivative; the output is ``x[0]``."""
    x = np.asarray(x, dtype=float)
    if x.size != p.n:
        raise ContractViolation(f"state has {x.size} entries, expected {p.n}")
    if abs(w) > p.wbar * (1 + 1e-12):
        raise ContractViolation(f"|w|={abs(w)} exceeds wbar={p.wbar}")
    drift = sum(ai * get_nonlinearity(name).func(t, x)
                for ai, name in zip(p.a, p.nonlinearities))
    out = np.empty(p.n)
    out[:-1] = x[1:]
    out[-1] = -drift + p.b * u + w
    if not np.all(np.isfinite(out)):
        raise NumericFault("siso_dynamics xdot", t=t, value=out)
    return out


def filter_coefficients(n, lam):
    """Weights ``C(n-1, k) lam^(n-1-k)`` so that ``e_f = c . e``."""
    return tuple(math.comb(n - 1, k) * lam ** (n - 1 - k) for k in range(n))


def nu_coefficients(n, lam):
    """``[0, Lambda]``: ``d/dt e_f = e_n' + nu_coefficients . e``."""
    return (0.0,) + tuple(math.comb(n - 1, k) * lam ** (n - 1 - k) for k in range(n - 1))


def filtered_error(e, lam):
    """``(d/dt + lam)^(n-1) e_1`` written over the error state."""
    e = np.atleast_1d(np.asarray(e, dtype=float))
    return float(np.dot(filter_coefficients(e.size, lam), e))


def nu_term(e, lam, ydn):
    """Known part of the filtered-error derivative, ``[0 Lambda] e - y_d^(n)``."""
    e = np.atleast_1d(np.asarray(e, dtype=float))
    return float(np.dot(nu_coefficients(e.size, lam), e)) - ydn
