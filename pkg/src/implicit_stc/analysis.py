"""Lyapunov function, invariant-set membership and steady-state metrics.

The closed loop in error coordinates ``(z, q)`` is certified by the
sublevel sets of a quasiconvex Lyapunov function ``V_alpha``, by the
dead-beat set ``Omega`` and, under saturation, by the nested sets
``M1 > M2 > M3``.  Everything here is a pure evaluation; the randomized
property suites that exercise these functions live in :mod:`.verify`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Gains
from .errors import DomainError, ParameterError
from .plant import PiecewiseLinearSignal, Trajectory, disturbance_samples

__all__ = [
    "LyapunovParams",
    "SetVerdict",
    "MSetVerdict",
    "lyapunov_value",
    "sublevel_member",
    "omega_member",
    "m_sets_member",
    "default_alpha",
    "default_delta_margin",
    "unsaturated_conditions",
    "conditioned_conditions",
    "lagged",
    "error_coordinates",
    "convergence_metrics",
]


@dataclass(frozen=True)
class LyapunovParams:
    alpha: float
    k1: float
    k2: float
    L: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (self.k1 > 0 and self.k2 > 0 and self.L >= 0):
            raise ParameterError("need k1 > 0, k2 > 0, L >= 0")

    @property
    def strict(self) -> bool:
        """True when ``V_alpha`` is a strict Lyapunov function for the continuous loop."""
        return self.k1 > math.sqrt(self.k2 + self.L) / self.alpha and self.k2 > self.L


@dataclass(frozen=True)
class SetVerdict:
    """Membership flag plus the largest constraint residual (``<= 0`` inside)."""

    member: bool
    margin: float


@dataclass(frozen=True)
class MSetVerdict:
    in_m1: bool
    in_m2: bool
    in_m3: bool
    gain_condition: bool

    def __iter__(self):
        return iter((self.in_m1, self.in_m2, self.in_m3))


def _finite(*vals):
    for val in vals:
        if not math.isfinite(val):
            raise DomainError(f"non-finite argument {val!r}")


def lyapunov_value(z: float, q: float, p: LyapunovParams) -> float:
    """``V_alpha(z, q)``.

    ``2 sqrt(q^2 + 3 a^2 k1^2 z) - q`` for ``z > 0, q < a k1 sqrt(z)``, the
    mirrored expression for ``z < 0, q > -a k1 sqrt(-z)``, ``3 |q|`` otherwise.
    """
    _finite(z, q)
    g = 3.0 * (p.alpha * p.k1) ** 2
    if z > 0 and q < p.alpha * p.k1 * math.sqrt(z):
        return 2.0 * math.sqrt(q * q + g * z) - q
    if z < 0 and q > -p.alpha * p.k1 * math.sqrt(-z):
        return 2.0 * math.sqrt(q * q - g * z) + q
    return 3.0 * abs(q)


def sublevel_member(z: float, q: float, c: float, p: LyapunovParams) -> SetVerdict:
    """Membership in ``{V_alpha <= c}`` through its two convex inequalities

    ``|12 a^2 k1^2 z - 2 c q| <= c^2 - 3 q^2`` and ``|q| <= c / 3``.
    """
    if c < 0:
        raise ParameterError(f"level must be nonnegative, got {c!r}")
    first = abs(12.0 * (p.alpha * p.k1) ** 2 * z - 2.0 * c * q) - (c * c - 3.0 * q * q)
    second = abs(q) - c / 3.0
    margin = max(first, second)
    return SetVerdict(margin <= 0.0, margin)


def omega_member(z: float, q: float, k2: float, L: float, T: float) -> SetVerdict:
    """Membership in ``{max(|z|, |z + T q|) <= (k2 - L) T^2}``."""
    if not k2 > L:
        raise ParameterError(f"need k2 > L, got k2={k2!r}, L={L!r}")
    margin = max(abs(z), abs(z + T * q)) - (k2 - L) * T * T
    return SetVerdict(margin <= 0.0, margin)


def m_sets_member(z: float, v: float, u_bar: float, gains: Gains, W: float,
                  delta_margin: float) -> MSetVerdict:
    """Nested membership in ``M1 = {|v| <= U}``, ``M2 = M1 & {|z| <= (U+W+d)^2 / k1^2}``
    and ``M3 = M2 & {|u_bar| <= U}``.

    ``gain_condition`` reports whether
    ``k1 > sqrt(2 k2 (U + W + d) / (U - W - k2 T))`` holds, which is what
    makes ``M3`` invariant.
    """
    U = gains.u_max
    if U is None:
        raise ParameterError("m-set membership needs gains.u_max")
    if not U > W + gains.k2 * gains.T:
        raise ParameterError(f"need U > W + k2 T, got U={U!r}, W + k2 T={W + gains.k2 * gains.T!r}")
    if not delta_margin > 0:
        raise ParameterError(f"delta_margin must be positive, got {delta_margin!r}")
    in1 = abs(v) <= U
    in2 = in1 and abs(z) <= (U + W + delta_margin) ** 2 / gains.k1 ** 2
    in3 = in2 and abs(u_bar) <= U
    cond = gains.k1 > math.sqrt(2.0 * gains.k2 * (U + W + delta_margin) / (U - W - gains.k2 * gains.T))
    return MSetVerdict(in1, in2, in3, cond)


def default_alpha(k1: float, k2: float, L: float) -> Optional[float]:
    """Smallest of 0.9, 0.95, 0.99 with ``k1 > sqrt(k2 + L) / alpha``, or None."""
    for alpha in (0.9, 0.95, 0.99):
        if k1 > math.sqrt(k2 + L) / alpha:
            return alpha
    return None


def default_delta_margin(U: float, W: float, k2: float, T: float) -> float:
    return min(0.01 * U, (U - W - k2 * T) / 10.0)


def unsaturated_conditions(gains: Gains, L: float) -> bool:
    """``k1 > sqrt(k2 + L)`` and ``k2 > L``."""
    return gains.k1 > math.sqrt(gains.k2 + L) and gains.k2 > L


def conditioned_conditions(gains: Gains, L: float, W: float) -> bool:
    """``U > W + k2 T``, ``k1 > sqrt(2 k2 (U + W) / (U - W - k2 T))`` and ``k2 > L``."""
    U = gains.u_max
    if U is None:
        return False
    gap = U - W - gains.k2 * gains.T
    return gap > 0 and gains.k2 > L and gains.k1 > math.sqrt(2.0 * gains.k2 * (U + W) / gap)


def lagged(samples, lag: int) -> np.ndarray:
    """``w_{k - lag}`` for each ``k``, with ``w_{-j} := w_0``."""
    s = np.asarray(samples, dtype=float)
    if lag == 0 or s.size == 0:
        return s.copy()
    return np.concatenate((np.full(min(lag, s.size), s[0]), s[:-lag]))


def error_coordinates(traj: Trajectory):
    """``(z_k, q_k) = (x_k - T (w_{k-1} + v_k), v_k + w_{k-2})`` along a run."""
    T = traj.T
    return traj.x - T * (lagged(traj.w_avg, 1) + traj.v), traj.v + lagged(traj.w_avg, 2)


def convergence_metrics(traj: Trajectory, w: Optional[PiecewiseLinearSignal], L: float, T: float,
                        tol: float = 1e-9) -> dict:
    """Detect the exact steady state ``x_k = T (w_{k-1} - w_{k-2})``.

    ``K_star`` is the first index from which the identity holds (within
    ``tol``) up to the end of the run.  After ``K_star`` the report gives the
    largest ``|x_k|``, the largest intersample ``|x(t)|`` and the residual of
    ``v_k = -w_{k-2}``.  A run without such an index is reported as not
    converged.  ``max_abs_x_tail`` covers the second half of the run
    regardless of convergence.

    When ``w`` is given the averages are recomputed from it rather than
    taken from the trajectory.
    """
    n = len(traj)
    wk = disturbance_samples(w, n, T) if w is not None else traj.w_avg
    w1, w2 = lagged(wk, 1), lagged(wk, 2)
    resid = np.abs(traj.x - T * (w1 - w2))
    bad = np.nonzero(~(resid <= tol))[0]
    k_star = int(bad[-1]) + 1 if bad.size else 0
    lt2 = L * T * T
    report = {
        "converged": k_star < n,
        "K_star": k_star if k_star < n else None,
        "max_abs_x_after": None,
        "max_x_sup_after": None,
        "v_identity_residual": None,
        "lt2_bound": lt2,
        "within_lt2": False,
        "max_abs_x_tail": float(np.max(np.abs(traj.x[n // 2:]))),
        "max_abs_u": float(np.max(np.abs(traj.u))),
    }
    if k_star < n:
        tail = slice(k_star, n)
        report["max_abs_x_after"] = float(np.max(np.abs(traj.x[tail])))
        report["max_x_sup_after"] = float(np.max(traj.x_sup[tail]))
        report["v_identity_residual"] = float(np.max(np.abs(traj.v[tail] + w2[tail])))
        report["within_lt2"] = bool(
            report["max_abs_x_after"] <= lt2 + 1e-12 and report["max_x_sup_after"] <= lt2 + 1e-12
        )
    return report
