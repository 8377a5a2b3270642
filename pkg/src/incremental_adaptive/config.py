"""Scenario description, text format and validation.

A scenario file is INI-style: one ``[section]`` per part of the experiment
and ``key = value`` lines. Lists are comma separated. Unknown sections or
keys are rejected so a typo never silently falls back to a default::

    [plant]
    kind = scalar
    theta0 = 2, -1
    b = 1
    regressor = sincos

    [adaptation]
    law = incremental
    gamma_prime = 1
    tau = 0.1
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import plant as _plant
from .adaptation import LAWS, AdaptationConfig, steps_per_delay
from .control import CONTROLLERS
from .errors import ConfigParseError, ConfigurationError, ValidationError

INTEGRATORS = ("rk4", "euler")

# controller kind -> adaptation laws it is analysed with
PAIRINGS = {
    "integral_ce": ("integral",),
    "incremental_ce": ("incremental", "saturated_incremental"),
    "open_loop_aug": ("forward_incremental",),
    "robust_dead_zone": ("robust_incremental",),
}


def _f(default, unit=None, kind="float"):
    return field(default=default, metadata={"kind": kind, "unit": unit})


@dataclass
class PlantSection:
    kind: str = _f("scalar", kind="str")
    b: float = _f(1.0, "control gain")
    wbar: float = _f(0.0, "disturbance bound")
    x0: tuple | None = _f(None, "initial state; defaults to zeros", "floats")
    # scalar family
    theta0: tuple = _f((2.0, -1.0), kind="floats")
    regressor: str = _f("sincos", kind="str")
    constant_reference: bool = _f(False, kind="bool")
    # siso family
    n: int = _f(2, "system order", "int")
    a: tuple = _f((1.0,), kind="floats")
    nonlinearities: tuple = _f(("sin_y_dy_rational",), kind="strs")
    lam: float = _f(2.0, "filter pole, 1/s")


@dataclass
class ReferenceSection:
    kind: str = _f("sinusoid", kind="str")
    amplitude: float = _f(1.0)
    frequency: float = _f(1.0, "rad/s")
    phase: float = _f(0.0, "rad")
    offset: float = _f(0.0)
    value: float = _f(0.0, "constant reference level")


@dataclass
class ControllerSection:
    kind: str = _f("incremental_ce", kind="str")
    kappa: float = _f(2.0, "feedback gain, 1/s")
    epsilon: float = _f(0.0, "dead-zone half width")
    wbar_b: float | None = _f(None, "defaults to wbar/|b|")
    strict_paper_form: bool = _f(False, kind="bool")


@dataclass
class AdaptationSection:
    law: str = _f("incremental", kind="str")
    tau: float = _f(0.1, "adaptation interval, s")
    gamma_prime: float | None = _f(None, "gamma = gamma_prime / tau")
    gamma: float | None = _f(None, "adaptation gain")
    theta_hat0: tuple | None = _f(None, "defaults to zeros", "floats")
    sat_lo: tuple | None = _f(None, kind="floats")
    sat_hi: tuple | None = _f(None, kind="floats")
    printed_sign: bool = _f(False, kind="bool")


@dataclass
class IntegratorSection:
    method: str = _f("rk4", kind="str")
    h: float = _f(1e-3, "step, s")
    t_final: float = _f(100.0, "s")
    record_stride: int = _f(1, "grid points per record", "int")


@dataclass
class DisturbanceSection:
    kind: str = _f("none", kind="str")
    amplitude: float = _f(0.0)
    frequency: float = _f(1.0, "rad/s")


@dataclass
class TolerancesSection:
    tol_window: float = _f(1e-4, "bound on the final tau-window integral of V")
    tol_g: float = _f(1e-2, "bound on V over the final window")
    tol_L_rel: float = _f(1e-6, "L step tolerance relative to L(0)")
    tol_e: float = _f(1e-2, "tracking error bound after settle_from")
    settle_from: float = _f(0.8, "fraction of t_final")
    growth: float = _f(0.05, "allowed late growth of window energies")
    tol_dead_zone: float = _f(1e-2, "margin past epsilon for the dead-zone outcome")
    tol_cancel: float = _f(1e-8, "relative u1 cancellation tolerance")
    tol_interval: float = _f(0.05, "margin past epsilon for the final output error")
    tol_dL: float = _f(1e-6, "slack in dL/dt <= -2 kappa |b| V")
    M: float | None = _f(None, "bound for the windowed dV^2 integral")


@dataclass
class RunSection:
    name: str = _f("scenario", kind="str")
    seed: int = _f(0, kind="int")


SECTIONS = {
    "run": RunSection,
    "plant": PlantSection,
    "reference": ReferenceSection,
    "controller": ControllerSection,
    "adaptation": AdaptationSection,
    "integrator": IntegratorSection,
    "disturbance": DisturbanceSection,
    "tolerances": TolerancesSection,
}


@dataclass
class ScenarioConfig:
    run: RunSection = field(default_factory=RunSection)
    plant: PlantSection = field(default_factory=PlantSection)
    reference: ReferenceSection = field(default_factory=ReferenceSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    adaptation: AdaptationSection = field(default_factory=AdaptationSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    disturbance: DisturbanceSection = field(default_factory=DisturbanceSection)
    tolerances: TolerancesSection = field(default_factory=TolerancesSection)

    # derived quantities

    @property
    def order(self):
        return 1 if self.plant.kind == "scalar" else int(self.plant.n)

    @property
    def augmented(self):
        return self.plant.kind == "scalar" and not self.plant.constant_reference

    @property
    def n_params(self):
        if self.plant.kind == "scalar":
            return _plant.get_regressor(self.plant.regressor).dim + int(self.augmented)
        return len(self.plant.a) + 1

    @property
    def b_sign(self):
        return 1.0 if self.plant.b > 0 else -1.0

    @property
    def wbar_b(self):
        if self.controller.wbar_b is not None:
            return self.controller.wbar_b
        return self.plant.wbar / abs(self.plant.b)

    def adaptation_config(self) -> AdaptationConfig:
        a = self.adaptation
        return AdaptationConfig(
            law=a.law, tau=a.tau, gamma_prime=a.gamma_prime, gamma=a.gamma,
            theta_hat0=a.theta_hat0, sat_lo=a.sat_lo, sat_hi=a.sat_hi,
            printed_sign=a.printed_sign,
        )

    def true_theta(self):
        b = self.plant.b
        if self.plant.kind == "scalar":
            th = [v / b for v in self.plant.theta0]
            if self.augmented:
                th.append(1.0 / b)
            return tuple(th)
        return tuple(v / b for v in self.plant.a) + (1.0 / b,)

    def replace(self, **changes):
        """Copy with ``section__key=value`` or ``section=Section(...)`` changes."""
        new = dataclasses.replace(self, **{
            k: dataclasses.replace(getattr(self, k)) for k in SECTIONS
        })
        for key, value in changes.items():
            if "__" in key:
                sec, name = key.split("__", 1)
                setattr(getattr(new, sec), name, value)
            else:
                setattr(new, key, value)
        return new

    def validate(self):
        problems = collect_problems(self)
        if problems:
            raise ValidationError(problems)
        return self


def collect_problems(cfg: ScenarioConfig):
    out = []
    p, r, c, a, ig, d = (cfg.plant, cfg.reference, cfg.controller, cfg.adaptation,
                         cfg.integrator, cfg.disturbance)

    if p.kind not in ("scalar", "siso"):
        out.append(f"plant.kind must be scalar or siso, got {p.kind!r}")
    if not (math.isfinite(p.b) and p.b != 0):
        out.append("plant.b must be finite and nonzero")
    if not p.wbar >= 0:
        out.append("plant.wbar must be nonnegative")
    order = None
    if p.kind == "scalar":
        order = 1
        try:
            reg = _plant.get_regressor(p.regressor)
            if len(p.theta0) != reg.dim:
                out.append(f"plant.theta0 needs {reg.dim} entries for regressor {p.regressor!r}")
        except ConfigurationError as exc:
            out.append(str(exc))
        if p.constant_reference and r.kind != "constant":
            out.append("plant.constant_reference requires reference.kind = constant")
    elif p.kind == "siso":
        if not (isinstance(p.n, int) and p.n >= 1):
            out.append("plant.n must be a positive integer")
        else:
            order = p.n
        if len(p.a) != len(p.nonlinearities):
            out.append("plant.a and plant.nonlinearities must have equal length")
        for name in p.nonlinearities:
            if name not in _plant.NONLINEARITIES:
                out.append(f"unknown nonlinearity {name!r}")
            elif order is not None and order < 2 and name in ("sin_y_dy_rational", "tanh_dy", "dy"):
                out.append(f"nonlinearity {name!r} needs n >= 2")
        if not p.lam > 0:
            out.append("plant.lam must be positive")
    if p.x0 is not None and order is not None and len(p.x0) != order:
        out.append(f"plant.x0 needs {order} entries")

    if r.kind not in ("constant", "sinusoid"):
        out.append(f"reference.kind must be constant or sinusoid, got {r.kind!r}")

    if c.kind not in CONTROLLERS:
        out.append(f"controller.kind must be one of {CONTROLLERS}, got {c.kind!r}")
    if not c.kappa > 0:
        out.append("controller.kappa must be positive")
    if not c.epsilon >= 0:
        out.append("controller.epsilon must be nonnegative")
    if c.wbar_b is not None and not c.wbar_b >= 0:
        out.append("controller.wbar_b must be nonnegative")
    if c.kind == "robust_dead_zone":
        scalar_with_dist = p.kind == "scalar" and (d.kind != "none" or p.wbar > 0)
        if not (p.kind == "siso" or scalar_with_dist):
            out.append("robust_dead_zone requires a siso plant or a scalar plant with disturbance")
    elif c.kind in CONTROLLERS and c.epsilon != 0:
        out.append("controller.epsilon is only used by robust_dead_zone")
    if c.kind in PAIRINGS and a.law in LAWS and a.law not in PAIRINGS[c.kind]:
        out.append(f"controller {c.kind!r} is paired with laws {PAIRINGS[c.kind]}, got {a.law!r}")

    acfg = cfg.adaptation_config()
    out.extend(f"adaptation: {msg}" for msg in acfg.problems())
    try:
        n_params = cfg.n_params
    except ConfigurationError:
        n_params = None
    if n_params is not None:
        for name in ("theta_hat0", "sat_lo", "sat_hi"):
            v = getattr(a, name)
            if v is not None and len(v) != n_params:
                out.append(f"adaptation.{name} needs {n_params} entries")

    if ig.method not in INTEGRATORS:
        out.append(f"integrator.method must be one of {INTEGRATORS}")
    if not ig.h > 0:
        out.append("integrator.h must be positive")
    if not ig.t_final >= 0:
        out.append("integrator.t_final must be nonnegative")
    elif ig.h > 0 and abs(round(ig.t_final / ig.h) * ig.h - ig.t_final) > 1e-9 * max(1.0, ig.t_final):
        out.append("integrator.t_final must be an integer multiple of h")
    if not (isinstance(ig.record_stride, int) and ig.record_stride >= 1):
        out.append("integrator.record_stride must be a positive integer")
    if a.tau > 0 and ig.h > 0:
        try:
            steps_per_delay(a.tau, ig.h)
        except ConfigurationError:
            out.append("tau must be an integer multiple of h")

    if d.kind not in _plant.DISTURBANCE_KINDS:
        out.append(f"disturbance.kind must be one of {_plant.DISTURBANCE_KINDS}")
    if not d.amplitude >= 0:
        out.append("disturbance.amplitude must be nonnegative")
    if d.kind != "none" and d.amplitude > p.wbar * (1 + 1e-12):
        out.append("disturbance.amplitude must not exceed plant.wbar")

    t = cfg.tolerances
    for f_ in fields(t):
        v = getattr(t, f_.name)
        if v is not None and not v >= 0:
            out.append(f"tolerances.{f_.name} must be nonnegative")
    if not 0 <= t.settle_from <= 1:
        out.append("tolerances.settle_from must lie in [0, 1]")
    if not isinstance(cfg.run.seed, int):
        out.append("run.seed must be an integer")
    return out


# text format

def _parse_value(raw, kind, optional):
    raw = raw.strip()
    if optional and raw.lower() in ("", "none"):
        return None
    if kind == "float":
        return float(raw)
    if kind == "int":
        v = float(raw)
        if v != int(v):
            raise ValueError(f"{raw!r} is not an integer")
        return int(v)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"{raw!r} is not a boolean")
    if kind == "floats":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if kind == "strs":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    return raw


def _format_value(v, kind):
    if v is None:
        return "none"
    if kind == "float":
        return repr(float(v))
    if kind == "bool":
        return "true" if v else "false"
    if kind == "floats":
        return ", ".join(repr(float(x)) for x in v)
    if kind == "strs":
        return ", ".join(v)
    return str(v)


def _is_optional(f_):
    return f_.default is None


def _new_parser():
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#", ";"),
        strict=True, default_section="__unused_default__",
    )
    parser.optionxform = str
    return parser


def _key_lines(text):
    """Map (section, key) -> line number, for error messages."""
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif "=" in s and not s.startswith(("#", ";")) and section is not None:
            lines[(section, s.split("=", 1)[0].strip())] = no
    return lines


def parse_config(source, overrides=(), validate=True) -> ScenarioConfig:
    """Parse scenario text or a file path into a :class:`ScenarioConfig`.

    ``overrides`` are ``"section.key=value"`` strings applied after the file.
    Raises :class:`ConfigParseError` for malformed text and
    :class:`ValidationError` listing every problem otherwise.
    """
    if isinstance(source, Path) or ("\n" not in str(source) and Path(str(source)).is_file()):
        text = Path(source).read_text()
    else:
        text = str(source)
    if not text.strip() and not overrides:
        raise ConfigParseError("empty scenario text")
    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(getattr(exc, "message", str(exc)).strip(),
                               getattr(exc, "lineno", None)) from None
    for item in overrides:
        key, sep, value = item.partition("=")
        sec, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigParseError(f"override {item!r} must look like section.key=value")
        if not parser.has_section(sec) and sec in SECTIONS:
            parser.add_section(sec)
        if sec not in SECTIONS:
            raise ValidationError([f"unknown section [{sec}] in override"])
        parser.set(sec, name.strip(), value.strip())

    lines = _key_lines(text)
    errors = []
    cfg = ScenarioConfig()
    for sec in parser.sections():
        if sec not in SECTIONS:
            errors.append(f"unknown section [{sec}]")
            continue
        target = getattr(cfg, sec)
        known = {f_.name: f_ for f_ in fields(SECTIONS[sec])}
        if sec == "plant":
            known["lambda"] = known["lam"]
        for key, raw in parser.items(sec):
            where = f" (line {lines[(sec, key)]})" if (sec, key) in lines else ""
            f_ = known.get(key)
            if f_ is None:
                errors.append(f"unknown key {sec}.{key}{where}")
                continue
            try:
                value = _parse_value(raw, f_.metadata["kind"], _is_optional(f_))
            except ValueError as exc:
                errors.append(f"bad value for {sec}.{key}{where}: {exc}")
                continue
            setattr(target, f_.name, value)
    if errors:
        raise ValidationError(errors)
    if validate:
        cfg.validate()
    return cfg


def serialize_config(cfg: ScenarioConfig) -> str:
    """Render ``cfg`` in the scenario text format (round-trips through parse)."""
    out = []
    for sec, cls in SECTIONS.items():
        out.append(f"[{sec}]")
        obj = getattr(cfg, sec)
        for f_ in fields(cls):
            v = getattr(obj, f_.name)
            if v is None:
                continue
            key = "lambda" if (sec, f_.name) == ("plant", "lam") else f_.name
            line = f"{key} = {_format_value(v, f_.metadata['kind'])}"
            unit = f_.metadata.get("unit")
            if unit:
                line += f"  # {unit}"
            out.append(line)
        out.append("")
    return "\n".join(out)


def default_scenario(**changes) -> ScenarioConfig:
    """Scalar desk-scale scenario used throughout the tests.

    theta0 = [2, -1], b = 1, sincos regressor (augmented with -xd'),
    xd = sin t, kappa = 2, gamma' = 1, tau = 0.1, h = 1e-3, t_final = 100.
    """
    cfg = ScenarioConfig(
        run=RunSection(name="default_scalar"),
        adaptation=AdaptationSection(law="incremental", gamma_prime=1.0, tau=0.1),
    )
    return cfg.replace(**changes) if changes else cfg


def robust_scenario(**changes) -> ScenarioConfig:
    """Second-order SISO plant with sinusoidal disturbance and dead zone."""
    cfg = ScenarioConfig(
        run=RunSection(name="robust_siso"),
        plant=PlantSection(kind="siso", n=2, a=(1.0,), nonlinearities=("sin_y_dy_rational",),
                           b=1.0, wbar=0.3, lam=2.0),
        controller=ControllerSection(kind="robust_dead_zone", kappa=2.0, epsilon=0.1),
        adaptation=AdaptationSection(law="robust_incremental", gamma_prime=1.0, tau=0.1),
        disturbance=DisturbanceSection(kind="sinusoid", amplitude=0.3, frequency=5.0),
    )
    return cfg.replace(**changes) if changes else cfg


def forward_scenario(**changes) -> ScenarioConfig:
    cfg = default_scenario(
        run=RunSection(name="forward_scalar"),
        controller=ControllerSection(kind="open_loop_aug"),
        adaptation=AdaptationSection(law="forward_incremental", gamma_prime=1.0, tau=0.1),
    )
    return cfg.replace(**changes) if changes else cfg


def saturated_scenario(bound=5.0, **changes) -> ScenarioConfig:
    cfg = default_scenario()
    p = cfg.n_params
    cfg = cfg.replace(
        run=RunSection(name="saturated_scalar"),
        adaptation=AdaptationSection(law="saturated_incremental", gamma_prime=1.0, tau=0.1,
                                     sat_lo=(-bound,) * p, sat_hi=(bound,) * p),
    )
    return cfg.replace(**changes) if changes else cfg


def integral_scenario(gamma=1.0, **changes) -> ScenarioConfig:
    cfg = default_scenario(
        run=RunSection(name="integral_scalar"),
        controller=ControllerSection(kind="integral_ce"),
        adaptation=AdaptationSection(law="integral", gamma=gamma, tau=0.1),
    )
    return cfg.replace(**changes) if changes else cfg
