"""Elliptical vector saturation and its deficiency bookkeeping.

The saturation scales an out-of-bounds vector back along its own direction
onto the axis-aligned ellipsoid whose semi-axes are the per-channel limits.
Deficiencies (saturated minus raw value) are the known disturbances the
adaptive laws compensate for.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LimitVector", "SaturationEvent", "elliptical_saturate", "deficiency"]


@dataclass(frozen=True)
class LimitVector:
    """Per-channel positive limits (magnitude or rate units)."""

    limits: np.ndarray

    def __post_init__(self):
        lim = np.atleast_1d(np.asarray(self.limits, dtype=float))
        if lim.ndim != 1:
            raise ValueError("limits must be a flat vector")
        if not np.all(np.isfinite(lim)) or np.any(lim <= 0.0):
            raise ValueError("limits must be strictly positive and finite")
        object.__setattr__(self, "limits", lim)

    @property
    def m(self) -> int:
        return self.limits.shape[0]

    def scaled(self, factor: float) -> "LimitVector":
        return LimitVector(self.limits * factor)


@dataclass(frozen=True)
class SaturationEvent:
    """Outcome of one saturation evaluation.

    ``ratio`` is ||saturated|| / ||raw|| (1 when inactive or at zero input).
    """

    active: bool
    deficiency: np.ndarray
    ratio: float = field(default=1.0)


def _limits_array(v_max) -> np.ndarray:
    if isinstance(v_max, LimitVector):
        return v_max.limits
    return LimitVector(v_max).limits


def elliptical_saturate(v: np.ndarray, v_max) -> np.ndarray:
    """Scale v onto the limit ellipsoid when it lies outside.

    For ||v|| <= g(v) (boundary included) the input is returned unchanged;
    otherwise the output is (v / ||v||) * g(v) where g is the distance from
    the origin to the ellipsoid along v.  A zero vector maps to zero.
    Broadcasts over leading axes: v may be (..., m).
    """
    lim = _limits_array(v_max)
    v = np.asarray(v, dtype=float)
    scalar_in = v.ndim == 0
    v2 = np.atleast_1d(v)
    if v2.shape[-1] != lim.shape[0]:
        raise ValueError(f"v has {v2.shape[-1]} channels, limits have {lim.shape[0]}")
    nv = np.linalg.norm(v2, axis=-1, keepdims=True)
    # unit direction; zero vectors get a placeholder direction and stay zero
    safe = np.where(nv > 0.0, nv, 1.0)
    e_hat = v2 / safe
    g = 1.0 / np.sqrt(np.sum((e_hat / lim) ** 2, axis=-1, keepdims=True))
    out = np.where(nv > g, e_hat * g, v2)
    return float(out[0]) if scalar_in else out


def deficiency(v: np.ndarray, v_max) -> SaturationEvent:
    """Saturation deficiency E_s(v) - v together with activity and ratio."""
    lim = _limits_array(v_max)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    sat = elliptical_saturate(v, lim)
    d = sat - v
    active = bool(np.any(d != 0.0))
    nv = float(np.linalg.norm(v))
    ratio = float(np.linalg.norm(sat) / nv) if (active and nv > 0.0) else 1.0
    return SaturationEvent(active=active, deficiency=d, ratio=ratio)
