"""Magnitude-and-rate-limiting filter between computed and applied control.

The device is a first-order lag whose drive is magnitude-saturated and
whose integration rate is hard-saturated, so the plant input u_p obeys
both limits by construction.  The combined deficiency du2 = du + tau*du_r
is what the plant sees as a known disturbance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .saturation import LimitVector, elliptical_saturate

__all__ = ["ActuatorConfig", "ActuatorState", "compute_rate", "unsaturated_equivalence_check"]


@dataclass(frozen=True)
class ActuatorConfig:
    """Filter time constant and the two limit ellipsoids."""

    tau: float
    u_max: LimitVector
    u_r_max: LimitVector

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise ValueError("tau must be positive and finite")
        if not isinstance(self.u_max, LimitVector):
            object.__setattr__(self, "u_max", LimitVector(self.u_max))
        if not isinstance(self.u_r_max, LimitVector):
            object.__setattr__(self, "u_r_max", LimitVector(self.u_r_max))
        if self.u_max.m != self.u_r_max.m:
            raise ValueError("magnitude and rate limits disagree on channel count")

    @property
    def m(self) -> int:
        return self.u_max.m

    def relaxed(self, factor: float) -> "ActuatorConfig":
        """Same lag with both limit ellipsoids scaled by ``factor``."""
        return ActuatorConfig(self.tau, self.u_max.scaled(factor), self.u_r_max.scaled(factor))


@dataclass
class ActuatorState:
    """Integrator state u_p plus the last evaluated deficiencies."""

    u_p: np.ndarray
    du: np.ndarray = field(default=None)
    du_r: np.ndarray = field(default=None)
    du2: np.ndarray = field(default=None)

    def __post_init__(self):
        self.u_p = np.atleast_1d(np.asarray(self.u_p, dtype=float))
        m = self.u_p.shape[0]
        for name in ("du", "du_r", "du2"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(m))


def compute_rate(u: np.ndarray, state: ActuatorState, cfg: ActuatorConfig):
    """One right-hand-side evaluation of the limiter.

    Returns (u_r, sat_rate, du, du_r, du2) where sat_rate is the value the
    integrator applies as the derivative of u_p.  Deficiencies are exact
    zeros whenever the corresponding limit is inactive.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    sat_u = elliptical_saturate(u, cfg.u_max)
    u_r = (sat_u - state.u_p) / cfg.tau
    sat_rate = elliptical_saturate(u_r, cfg.u_r_max)
    du = sat_u - u
    du_r = sat_rate - u_r
    du2 = du + cfg.tau * du_r
    state.du, state.du_r, state.du2 = du, du_r, du2
    return u_r, sat_rate, du, du_r, du2


def _rk4(f, y0: np.ndarray, h: float, steps: int) -> np.ndarray:
    y = y0.copy()
    out = np.empty((steps + 1,) + y0.shape)
    out[0] = y
    t = 0.0
    for i in range(steps):
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
        out[i + 1] = y
    return out


def unsaturated_equivalence_check(u_of_t, cfg: ActuatorConfig, T: float, h: float,
                                  u_p0: np.ndarray | None = None) -> float:
    """Max deviation between the two limiter realizations (test oracle).

    Realization A integrates u_p' = E_s((E_s(u, u_max) - u_p)/tau, u_r_max)
    directly; realization B integrates the lag form
    u_p' = (-u_p + u + du2)/tau with du2 assembled from the same saturation
    evaluations.  The two right-hand sides are algebraically identical, so
    the deviation measures only arithmetic reordering; for trajectories that
    stay strictly inside both limits du2 is identically zero and B reduces
    to a plain first-order lag.
    """
    m = cfg.m
    u_p0 = np.zeros(m) if u_p0 is None else np.atleast_1d(np.asarray(u_p0, dtype=float))
    tau = cfg.tau

    def rhs_direct(t, u_p):
        sat_u = elliptical_saturate(u_of_t(t), cfg.u_max)
        return elliptical_saturate((sat_u - u_p) / tau, cfg.u_r_max)

    def rhs_lag(t, u_p):
        u = np.atleast_1d(np.asarray(u_of_t(t), dtype=float))
        sat_u = elliptical_saturate(u, cfg.u_max)
        u_r = (sat_u - u_p) / tau
        du = sat_u - u
        du_r = elliptical_saturate(u_r, cfg.u_r_max) - u_r
        du2 = du + tau * du_r
        return (-u_p + u + du2) / tau

    steps = int(round(T / h))
    traj_a = _rk4(rhs_direct, u_p0, h, steps)
    traj_b = _rk4(rhs_lag, u_p0, h, steps)
    return float(np.max(np.linalg.norm(traj_a - traj_b, axis=-1)))
