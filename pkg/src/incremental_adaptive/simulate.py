"""Fixed-step closed-loop simulation.

The plant ODE is advanced with RK4 (or explicit Euler). Recursive laws
produce the estimate algebraically at every stage: stage ``i`` of step
``k`` reads the value that stage ``i`` of step ``k - m`` stored
(``tau = m h``). That is exactly RK4 applied to the method-of-steps
unrolling of the delayed loop, so the scheme keeps its order. Only the
integral law carries the estimate as ODE state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .adaptation import ForwardStageLaw, IntegralLaw, SaturatedStageLaw, make_stage_law
from .config import ScenarioConfig
from .control import dead_zone
from .errors import NumericFault
from .plant import (
    DisturbanceSpec,
    ReferenceTrajectory,
    filter_coefficients,
    get_nonlinearity,
    get_regressor,
    nu_coefficients,
)

RK4_NODES = (0.0, 0.5, 0.5, 1.0)


@dataclass
class IntegratorConfig:
    method: str = "rk4"
    h: float = 1e-3
    t_final: float = 100.0
    record_stride: int = 1

    @property
    def nodes(self):
        return RK4_NODES if self.method == "rk4" else (0.0,)

    @property
    def n_steps(self):
        return int(round(self.t_final / self.h))


@dataclass
class TrajectoryRecord:
    """One logged grid point."""

    t: float
    x: np.ndarray
    yd: np.ndarray
    e: np.ndarray
    e_f: float
    eps: float
    iota: int
    sigma: int
    e_eps: float
    u: float
    w: float
    theta_hat: np.ndarray
    V: float
    L: float
    winV: float
    winTh: float
    winU: float


@dataclass
class Trajectory:
    """Full-resolution closed-loop log plus the scenario constants needed
    to evaluate the Lyapunov quantities.

    Arrays are indexed by grid point ``k`` (time ``k h``). Iterating yields
    :class:`TrajectoryRecord` rows for the recorded grid points only.
    """

    config: ScenarioConfig
    t: np.ndarray
    x: np.ndarray
    yd: np.ndarray  # (N+1, n+1): y_d and derivatives
    e: np.ndarray
    e_f: np.ndarray
    iota: np.ndarray
    sigma: np.ndarray
    e_eps: np.ndarray
    u: np.ndarray
    w: np.ndarray
    theta_hat: np.ndarray
    phi_sq: np.ndarray
    u1: np.ndarray
    theta_ahead: np.ndarray | None = None  # forward law: theta_hat(t + tau)
    # left limits at grid points; the recursive laws jump at multiples of
    # tau whenever phi e is nonzero at t = 0
    theta_left: np.ndarray | None = None
    u_left: np.ndarray | None = None
    theta_star: np.ndarray | None = None  # saturated law: unclamped recursion
    monitors: dict = field(default_factory=dict)

    @property
    def h(self):
        return self.config.integrator.h

    @property
    def tau(self):
        return self.config.adaptation.tau

    @property
    def m(self):
        return int(round(self.tau / self.h))

    @property
    def law(self):
        return self.config.adaptation.law

    @property
    def b(self):
        return self.config.plant.b

    @property
    def gamma(self):
        return self.config.adaptation_config().gain

    @property
    def kappa(self):
        return self.config.controller.kappa

    @property
    def epsilon(self):
        return self.config.controller.epsilon

    @property
    def theta_true(self):
        return np.array(self.config.true_theta())

    @property
    def V(self):
        return 0.5 * self.e_eps ** 2

    @property
    def record_indices(self):
        n = len(self.t)
        stride = self.config.integrator.record_stride
        idx = np.arange(0, n, stride)
        if idx[-1] != n - 1:
            idx = np.append(idx, n - 1)
        return idx

    def monitor(self, name):
        if name not in self.monitors:
            self.monitors[name] = analysis.monitor_series(self, name)
        return self.monitors[name]

    def record(self, k):
        V = self.V
        return TrajectoryRecord(
            t=float(self.t[k]), x=self.x[k], yd=self.yd[k], e=self.e[k],
            e_f=float(self.e_f[k]), eps=self.epsilon, iota=int(self.iota[k]),
            sigma=int(self.sigma[k]), e_eps=float(self.e_eps[k]), u=float(self.u[k]),
            w=float(self.w[k]), theta_hat=self.theta_hat[k], V=float(V[k]),
            L=float(self.monitor("L")[k]), winV=float(self.monitor("winV")[k]),
            winTh=float(self.monitor("winTh")[k]), winU=float(self.monitor("winU")[k]),
        )

    def __len__(self):
        return len(self.record_indices)

    def __getitem__(self, i):
        return self.record(int(self.record_indices[i]))

    def __iter__(self):
        for k in self.record_indices:
            yield self.record(int(k))


class ClosedLoop:
    """Plant, controller and adaptation law wired together for one run."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        ig = cfg.integrator
        self.integrator = IntegratorConfig(ig.method, ig.h, ig.t_final, ig.record_stride)
        self.h = ig.h
        self.nodes = self.integrator.nodes
        self.n = cfg.order
        self.p = cfg.n_params
        self.b_sign = cfg.b_sign
        self.law = make_stage_law(cfg.adaptation_config(), self.p, self.b_sign, self.h,
                                  len(self.nodes))
        self.integral = isinstance(self.law, IntegralLaw)
        r = cfg.reference
        self.reference = ReferenceTrajectory(r.kind, r.amplitude, r.frequency, r.phase,
                                             r.offset, r.value)
        d = cfg.disturbance
        self.disturbance = DisturbanceSpec(d.kind, d.amplitude, d.frequency,
                                           seed=cfg.run.seed, hold=self.h)
        self.evaluate = self._build()

    def initial_state(self):
        x0 = self.cfg.plant.x0
        z = [float(v) for v in x0] if x0 is not None else [0.0] * self.n
        if self.integral:
            z.extend(self.law.theta_hat0)
        return z

    def _build(self):
        """Return ``f(k, i, t, z) -> (zdot, info)`` specialised to the scenario."""
        cfg = self.cfg
        n, b_sign = self.n, self.b_sign
        b = cfg.plant.b
        kappa = cfg.controller.kappa
        kind = cfg.controller.kind
        robust = kind == "robust_dead_zone"
        aug_open_loop = kind == "open_loop_aug"
        eps = cfg.controller.epsilon if robust else 0.0
        strict = cfg.controller.strict_paper_form
        wbar_b = cfg.wbar_b
        law = self.law
        integral = self.integral
        gamma = law.gamma
        deriv = self.reference.derivatives
        dist = self.disturbance
        if dist.kind == "none" or dist.amplitude == 0.0:
            def wfun(k, t):
                return 0.0
        elif dist.kind == "sinusoid":
            amp, freq = dist.amplitude, dist.frequency

            def wfun(k, t):
                return amp * math.sin(freq * t)
        else:
            at_step = dist.at_step

            def wfun(k, t):
                return at_step(k)

        if cfg.plant.kind == "scalar":
            reg = get_regressor(cfg.plant.regressor).func
            theta0 = tuple(float(v) for v in cfg.plant.theta0)
            augmented = cfg.augmented

            def plant_side(t, z):
                x = z[0]
                yd = deriv(t, 1)
                e = x - yd[0]
                phi_p = tuple(reg(t, x))
                drift = sum(a * f for a, f in zip(theta0, phi_p))
                phi = phi_p + (-yd[1],) if augmented else phi_p
                return yd, (e,), e, phi, drift

            def state_rate(z, drive):
                return [drive]
        else:
            ys = [get_nonlinearity(name).func for name in cfg.plant.nonlinearities]
            a_coef = tuple(float(v) for v in cfg.plant.a)
            fc = filter_coefficients(n, cfg.plant.lam)
            nc = nu_coefficients(n, cfg.plant.lam)

            def plant_side(t, z):
                x = z[:n]
                yd = deriv(t, n)
                e = tuple(xi - yi for xi, yi in zip(x, yd))
                ef = sum(c * v for c, v in zip(fc, e))
                nu = sum(c * v for c, v in zip(nc, e)) - yd[n]
                yv = [f(t, x) for f in ys]
                drift = -sum(a * y for a, y in zip(a_coef, yv))
                phi = tuple(-y for y in yv) + (nu,)
                return yd, e, ef, phi, drift

            def state_rate(z, drive):
                return list(z[1:n]) + [drive]

        def f(k, i, t, z):
            yd, e, ef, phi, drift = plant_side(t, z)
            if robust:
                dz = dead_zone(ef, eps)
                err = dz.e_eps * dz.sigma
            else:
                mag = abs(ef)
                dz = (0.0, 1 if mag > 0 else 0, (ef > 0) - (ef < 0), mag)
                err = ef
            if integral:
                th = z[n:]
            else:
                th = law.estimate(k, i, phi, err)
            thphi = sum(a * g for a, g in zip(th, phi))
            u1 = 0.0
            if robust:
                switch = dz[1] if strict else dz[2]
                u = -b_sign * kappa * dz[3] * dz[2] - b_sign * wbar_b * switch - thphi * dz[1]
            else:
                u = -b_sign * kappa * ef - thphi
                if aug_open_loop:
                    u1 = -0.5 * b_sign * gamma * sum(g * g for g in phi) * ef
                    u += u1
            w = wfun(k, t)
            zdot = state_rate(z, drift + b * u + w)
            if integral:
                zdot.extend(law.derivative(phi, err))
            return zdot, (yd, e, ef, dz, u, w, th, phi, u1)

        return f


class Simulation:
    """Stateful run: call :meth:`step` repeatedly or :meth:`run` once."""

    def __init__(self, cfg: ScenarioConfig):
        self.loop = ClosedLoop(cfg)
        self.cfg = cfg
        self.h = self.loop.h
        self.k = 0
        self.state = self.loop.initial_state()
        self._rows = []

    @property
    def t(self):
        return self.k * self.h

    def _check(self, info, z):
        total = sum(z) + info[4]
        if total - total != 0.0:
            names = [f"x{j + 1}" for j in range(self.loop.n)]
            names += [f"theta_hat{j + 1}" for j in range(len(z) - self.loop.n)]
            for name, v in zip(names, z):
                if not math.isfinite(v):
                    raise NumericFault(name, t=self.t, step=self.k, value=v)
            raise NumericFault("u", t=self.t, step=self.k, value=info[4])

    def step(self):
        """Advance one step; logs the grid point the step starts from."""
        try:
            k1, info = self._grid_eval()
            self._advance(k1)
        except (ValueError, OverflowError) as exc:
            raise self._fault(exc) from exc
        return self.state

    def _fault(self, exc):
        # math functions reject inf/nan before the finiteness check sees them
        names = [f"x{j + 1}" for j in range(self.loop.n)]
        names += [f"theta_hat{j + 1}" for j in range(len(self.state) - self.loop.n)]
        for name, v in zip(names, self.state):
            if not math.isfinite(v):
                return NumericFault(name, t=self.t, step=self.k, value=v)
        # the overflow happened inside a stage; blame the largest component
        j = max(range(len(self.state)), key=lambda i: abs(self.state[i]))
        return NumericFault(names[j], t=self.t, step=self.k, value=self.state[j])

    def _grid_eval(self):
        k1, info = self.loop.evaluate(self.k, 0, self.t, self.state)
        self._check(info, self.state)
        row = (tuple(self.state), info)
        law = self.loop.law
        if isinstance(law, ForwardStageLaw):
            row = row + (law.ahead(self.k),)
        elif isinstance(law, SaturatedStageLaw):
            row = row + (law.history.read(self.k, 0),)
        self._rows.append(row)
        return k1, info

    def _advance(self, k1):
        f = self.loop.evaluate
        k, t, h, z = self.k, self.t, self.h, self.state
        if self.loop.integrator.method == "euler":
            z = [a + h * d for a, d in zip(z, k1)]
        else:
            hh = 0.5 * h
            k2 = f(k, 1, t + hh, [a + hh * d for a, d in zip(z, k1)])[0]
            k3 = f(k, 2, t + hh, [a + hh * d for a, d in zip(z, k2)])[0]
            k4 = f(k, 3, t + h, [a + h * d for a, d in zip(z, k3)])[0]
            h6 = h / 6.0
            z = [a + h6 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
                 for a, d1, d2, d3, d4 in zip(z, k1, k2, k3, k4)]
        self.state = z
        self.k += 1

    def run(self) -> Trajectory:
        n_steps = self.loop.integrator.n_steps
        try:
            while self.k < n_steps:
                k1, _ = self._grid_eval()
                self._advance(k1)
            self._grid_eval()
        except (ValueError, OverflowError) as exc:
            raise self._fault(exc) from exc
        return self._trajectory()

    def _trajectory(self):
        rows = self._rows
        n = self.loop.n
        cfg = self.cfg
        h = self.h
        N = len(rows)
        t = np.arange(N) * h
        z = np.array([r[0] for r in rows], dtype=float).reshape(N, -1)
        infos = [r[1] for r in rows]
        yd = np.array([i[0] for i in infos], dtype=float)
        e = np.array([i[1] for i in infos], dtype=float).reshape(N, n)
        ef = np.array([i[2] for i in infos], dtype=float)
        dz = np.array([i[3] for i in infos], dtype=float)
        theta = np.array([i[6] for i in infos], dtype=float).reshape(N, -1)
        phi = np.array([i[7] for i in infos], dtype=float).reshape(N, -1)
        traj = Trajectory(
            config=cfg, t=t, x=z[:, :n], yd=yd, e=e, e_f=ef,
            iota=dz[:, 1].astype(int), sigma=dz[:, 2].astype(int), e_eps=dz[:, 3],
            u=np.array([i[4] for i in infos], dtype=float),
            w=np.array([i[5] for i in infos], dtype=float),
            theta_hat=theta, phi_sq=np.einsum("ij,ij->i", phi, phi),
            u1=np.array([i[8] for i in infos], dtype=float),
        )
        law = self.loop.law
        if isinstance(law, ForwardStageLaw):
            traj.theta_ahead = np.array([r[2] for r in rows], dtype=float).reshape(N, -1)
        if isinstance(law, SaturatedStageLaw):
            traj.theta_star = np.array([r[2] for r in rows], dtype=float).reshape(N, -1)
        if not self.loop.integral:
            traj.theta_left = _left_limits(traj, law)
            gap = np.einsum("ij,ij->i", theta - traj.theta_left, phi)
            if cfg.controller.kind == "robust_dead_zone":
                gap *= traj.iota
            traj.u_left = traj.u + gap
        return traj


def _left_limits(traj, law):
    """Left limits of the recursive estimate at the grid points.

    With ``phi e`` nonzero at ``t = 0`` the recursion starts with a jump
    away from ``theta_hat0`` that recurs at every multiple of ``tau``;
    elsewhere the estimate is continuous.
    """
    theta = traj.theta_hat
    m = traj.m
    theta0 = np.array(law.history.theta_hat0)
    left = theta.copy()
    if isinstance(law, SaturatedStageLaw):
        lo, hi = np.array(law.lo), np.array(law.hi)
        star = traj.theta_star
        prev_left, prev = theta0, theta0  # unclamped values one delay back
        for j in range(0, len(theta), m):
            update = star[j] - np.clip(prev, lo, hi)
            star_left = np.clip(prev_left, lo, hi) + update if j else theta0
            left[j] = np.clip(star_left, lo, hi)
            prev_left, prev = star_left, star[j]
        return left
    if isinstance(law, ForwardStageLaw):
        if len(theta) > m:
            left[m::m] += theta0 - theta[m]
        return left
    left[::m] += theta0 - theta[0]
    return left


def step(sim: Simulation):
    """Advance ``sim`` by one integrator step and return the new state."""
    return sim.step()


def simulate(cfg: ScenarioConfig) -> Trajectory:
    """Run the closed loop described by ``cfg`` to ``t_final``."""
    return Simulation(cfg).run()
