"""Controllers and the dead-zone primitives of the robust design."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

CONTROLLERS = ("integral_ce", "incremental_ce", "open_loop_aug", "robust_dead_zone")


class DeadZoneState(NamedTuple):
    """Dead-zone indicators for a filtered error.

    ``iota`` is 1 outside the zone, ``sigma`` is the sign there (0 inside)
    and ``e_eps`` is the distance past the zone edge.
    """

    epsilon: float
    iota: int
    sigma: int
    e_eps: float


def dead_zone(e_f, epsilon):
    """Dead-zone state of ``e_f``; ``|e_f| == epsilon`` counts as inside."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    mag = abs(e_f)
    if mag > epsilon:
        return DeadZoneState(epsilon, 1, 1 if e_f > 0 else -1, mag - epsilon)
    return DeadZoneState(epsilon, 0, 0, 0.0)


def certainty_equiv_control(b_sign, kappa, e, theta_hat, phi):
    """``u = -sgn(b) kappa e - theta_hat . phi``."""
    return -b_sign * kappa * e - float(np.dot(theta_hat, phi))


def aug_term(b_sign, gamma, e, phi):
    """Open-loop component ``u1 = -(1/2) sgn(b) gamma |phi|^2 e``."""
    phi = np.asarray(phi, dtype=float)
    return -0.5 * b_sign * gamma * float(phi @ phi) * e


def open_loop_aug_control(b_sign, kappa, gamma, e, theta_hat, phi):
    return certainty_equiv_control(b_sign, kappa, e, theta_hat, phi) + aug_term(
        b_sign, gamma, e, phi
    )


def robust_control(b_sign, kappa, wbar_b, dz: DeadZoneState, theta_hat, phi,
                   strict_paper_form=False):
    """Dead-zone controller; zero inside the dead zone.

    The disturbance-rejection term is ``-sgn(b) wbar_b sigma`` so that it
    always opposes the filtered error. ``strict_paper_form=True`` uses
    ``iota`` there instead, which pushes the wrong way for negative errors.
    """
    switch = dz.iota if strict_paper_form else dz.sigma
    return (-b_sign * kappa * dz.e_eps * dz.sigma
            - b_sign * wbar_b * switch
            - float(np.dot(theta_hat, phi)) * dz.iota)
