"""Constant-speed, constant-altitude fixed-wing kinematics.

World frame is north-east-down: x north, y east, heading ``psi`` measured
clockwise from north.  A positive bank drops the right wing and turns right.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

G = 9.81
BANK_LIMIT = math.radians(50.0)
BANK_STEP = math.radians(5.0)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


class BankAction(enum.IntEnum):
    """Index 0 lowers the commanded bank by 5 degrees, index 1 raises it."""

    DECREASE = 0
    INCREASE = 1

    @property
    def delta(self) -> float:
        return -BANK_STEP if self is BankAction.DECREASE else BANK_STEP


@dataclass(frozen=True)
class AircraftState:
    x: float
    y: float
    psi: float
    phi: float = 0.0
    phi_cmd: float = 0.0
    v: float = 20.0
    h: float = 200.0

    def __post_init__(self):
        tol = 1e-12
        if abs(self.phi) > BANK_LIMIT + tol or abs(self.phi_cmd) > BANK_LIMIT + tol:
            raise ValueError("bank angle outside +/-50 degrees")


def apply_action(state: AircraftState, action: BankAction | int) -> AircraftState:
    delta = BankAction(action).delta
    cmd = min(BANK_LIMIT, max(-BANK_LIMIT, state.phi_cmd + delta))
    return replace(state, phi_cmd=cmd)


def _deriv(psi: float, v: float, rate: float):
    return v * math.cos(psi), v * math.sin(psi), rate


def integrate(state: AircraftState, dt: float = 0.1, bank_lag: float | None = None) -> AircraftState:
    """Advance one fixed RK4 step.

    With ``bank_lag=None`` the bank snaps to the command at the start of the step.
    Otherwise the bank follows a first-order lag with that time constant, held
    constant over the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if bank_lag is None:
        phi = state.phi_cmd
    else:
        phi = state.phi_cmd + (state.phi - state.phi_cmd) * math.exp(-dt / bank_lag)
    v = state.v
    rate = G * math.tan(phi) / v
    x, y, psi = state.x, state.y, state.psi
    k1 = _deriv(psi, v, rate)
    k2 = _deriv(psi + 0.5 * dt * k1[2], v, rate)
    k3 = _deriv(psi + 0.5 * dt * k2[2], v, rate)
    k4 = _deriv(psi + dt * k3[2], v, rate)
    x += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    y += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    psi += dt * rate
    return replace(state, x=x, y=y, psi=wrap_angle(psi), phi=phi)


def turn_radius(v: float, phi: float) -> float:
    return v * v / (G * math.tan(phi))


def integrate_arrays(x, y, psi, phi, v, dt: float = 0.1):
    """Vectorised RK4 step for many aircraft flying at their commanded bank ``phi``.

    Arguments broadcast; returns new ``(x, y, psi)`` arrays.  Matches
    :func:`integrate` with the bank snapped to the command.
    """
    psi = np.asarray(psi, dtype=float)
    rate = G * np.tan(phi) / v
    p2 = psi + 0.5 * dt * rate
    p4 = psi + dt * rate
    cos_sum = np.cos(psi) + 4.0 * np.cos(p2) + np.cos(p4)
    sin_sum = np.sin(psi) + 4.0 * np.sin(p2) + np.sin(p4)
    x = x + dt / 6.0 * v * cos_sum
    y = y + dt / 6.0 * v * sin_sum
    psi = np.pi - np.mod(np.pi - p4, 2.0 * np.pi)
    return x, y, psi
