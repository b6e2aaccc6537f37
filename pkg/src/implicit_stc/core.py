"""Closed-form step functions for the discrete-time super-twisting family.

Every control law here is the explicit solution of an implicit (backward
Euler) generalized equation in the *next* modified sliding variable.  They
all share one scalar resolvent,

    z  in  b - T k1 |z|^(1/2) sign(z) - T^2 k2 Sign(z),

whose unique solution is computed by :func:`resolvent`.

The step functions are pure: they take the sampled sliding variable ``x``,
the integrator value ``v`` (a float or a :class:`ControllerState`) and a
:class:`Gains` record and return a :class:`ControlOutput`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .errors import DomainError, ParameterError

log = logging.getLogger(__name__)

__all__ = [
    "Gains",
    "ControllerState",
    "ControlOutput",
    "ErrorState",
    "sign",
    "spow",
    "sat",
    "resolvent",
    "implicit_stc_step",
    "conditioned_stc_step",
    "brogliato_stc_step",
    "explicit_euler_stc_step",
    "implicit_fosm_step",
    "error_dynamics_step",
    "CONTROLLERS",
    "get_controller",
]


@dataclass(frozen=True)
class Gains:
    """Controller parameters.

    Attributes:
        k1: proportional (square-root) gain.
        k2: integral gain.
        T: sampling time.
        u_max: actuator bound U; ``None`` means unbounded.  ``math.inf`` is
            accepted and behaves like the unbounded law.
        lam: cached ``k2 - k1**2 / 4``.
    """

    k1: float
    k2: float
    T: float
    u_max: Optional[float] = None
    lam: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("k1", "k2", "T"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a positive finite number, got {value!r}")
        if self.u_max is not None and not (self.u_max > 0):
            raise ParameterError(f"u_max must be positive when given, got {self.u_max!r}")
        object.__setattr__(self, "lam", self.k2 - self.k1 * self.k1 / 4.0)

    @property
    def deadbeat_radius(self) -> float:
        """Half-width ``k2 T^2`` of the dead-beat branch."""
        return self.k2 * self.T * self.T

    def unsaturated(self) -> "Gains":
        return Gains(self.k1, self.k2, self.T)

    def with_u_max(self, u_max) -> "Gains":
        return Gains(self.k1, self.k2, self.T, u_max)


@dataclass(frozen=True)
class ControllerState:
    """Integrator value ``v_k`` with an optional tag naming the law that owns it."""

    v: float = 0.0
    controller: str = ""


@dataclass(frozen=True)
class ControlOutput:
    """Result of one controller step.

    ``u_hat`` is the pre-saturation input of the conditioned law and ``None``
    for every other law.
    """

    u: float
    v_next: float
    u_hat: Optional[float] = None


@dataclass(frozen=True)
class ErrorState:
    """Error coordinates ``z = x - T(w_{k-1} + v)`` and ``q = v + w_{k-2}``."""

    z: float
    q: float


StateLike = Union[ControllerState, float]


def sign(y: float) -> float:
    """Scalar sign with ``sign(0) == 0``."""
    if y > 0:
        return 1.0
    if y < 0:
        return -1.0
    return 0.0


def spow(y: float, p: float) -> float:
    """Signed power ``|y|**p * sign(y)``."""
    return math.copysign(abs(y) ** p, y) if y != 0 else 0.0


def sat(y: float, bound: float) -> float:
    """Clamp ``y`` to ``[-bound, bound]``."""
    return max(-bound, min(bound, y))


def _integrator(state: StateLike) -> float:
    v = state.v if isinstance(state, ControllerState) else state
    v = float(v)
    if not math.isfinite(v):
        raise DomainError(f"integrator value must be finite, got {v!r}")
    return v


def _check_x(x) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"sliding variable must be finite, got {x!r}")
    return x


def _root(a: float, gains: Gains) -> float:
    """``sqrt(|z|)`` of the resolvent for ``a = |offset| > k2 T^2``.

    Uses ``sqrt(a - lam T^2) - T k1/2`` in rationalized form; the radicand is
    assembled as a sum of two positive terms so it cannot go negative.
    """
    T = gains.T
    half = 0.5 * T * gains.k1
    excess = a - gains.k2 * T * T
    radicand = excess + half * half
    if radicand < 0.0:  # unreachable for excess > 0; kept as a guard
        log.debug("negative radicand %r clamped to zero", radicand)
        radicand = 0.0
    return excess / (math.sqrt(radicand) + half)


def resolvent(offset: float, gains: Gains) -> float:
    """Unique solution ``z`` of ``z in offset - T k1 |z|^(1/2) sign(z) - T^2 k2 Sign(z)``.

    Returns 0 when ``|offset| <= k2 T^2``; otherwise
    ``(sqrt(|offset| - lam T^2) - T k1 / 2)**2 * sign(offset)``.

    Raises:
        DomainError: if ``offset`` is not finite.
    """
    b = _check_x(offset)
    a = abs(b)
    if a <= gains.deadbeat_radius:
        return 0.0
    r = _root(a, gains)
    return math.copysign(r * r, b)


def implicit_stc_step(x: float, state: StateLike, gains: Gains) -> ControlOutput:
    """Explicit form of the proper implicit super-twisting controller.

    For ``|x| > k2 T^2``::

        u      = v - (2 lam T + k1 sqrt(|x| - lam T^2)) sign(x)
        v_next = v - T k2 sign(x)

    otherwise (dead-beat branch)::

        u      = v - 2 x / T
        v_next = v - x / T

    The outer branch is evaluated as ``v - (2 k2 T + k1 sqrt|z_next|) sign(x)``,
    which is the same expression without the cancellation between
    ``2 lam T`` and ``k1 sqrt(...)`` when ``k1`` is large.
    """
    if gains.u_max is not None:
        raise ParameterError("implicit_stc_step is the unsaturated law; use conditioned_stc_step")
    return ControlOutput(*_unsaturated_pair(_check_x(x), _integrator(state), gains))


def _unsaturated_pair(x: float, v: float, gains: Gains):
    T = gains.T
    if abs(x) <= gains.deadbeat_radius:
        return v - 2.0 * x / T, v - x / T
    s = sign(x)
    r = _root(abs(x), gains)
    return v - (2.0 * gains.k2 * T + gains.k1 * r) * s, v - T * gains.k2 * s


def conditioned_stc_step(x: float, state: StateLike, gains: Gains) -> ControlOutput:
    """Explicit form of the implicit conditioned super-twisting controller.

    ``u_hat`` is the unsaturated law's input, ``u = sat_U(u_hat)`` and the
    integrator stops winding up whenever ``v`` and ``u`` disagree::

        v_next = v - T k2 sign(v - u)   if |v - u| >  2 k2 T
        v_next = (v + u) / 2            if |v - u| <= 2 k2 T
    """
    if gains.u_max is None:
        raise ParameterError("conditioned_stc_step needs gains.u_max")
    x = _check_x(x)
    v = _integrator(state)
    u_hat, _ = _unsaturated_pair(x, v, gains)
    u = sat(u_hat, gains.u_max)
    d = v - u
    if abs(d) > 2.0 * gains.k2 * gains.T:
        v_next = v - gains.T * gains.k2 * sign(d)
    else:
        v_next = 0.5 * (v + u)
    return ControlOutput(u, v_next, u_hat)


def brogliato_stc_step(x: float, state: StateLike, gains: Gains) -> ControlOutput:
    """Implicit super-twisting law driving ``x_k + T u_k`` to zero.

    Solves ``u = -k1 |x + T u|^(1/2) sign(x + T u) + v_next`` together with
    ``v_next in v - k2 T Sign(x + T u)`` through the shared resolvent with
    offset ``x + T v``.
    """
    if gains.u_max is not None:
        raise ParameterError("brogliato_stc_step is an unsaturated law")
    x = _check_x(x)
    v = _integrator(state)
    T = gains.T
    s = resolvent(x + T * v, gains)
    if s == 0.0:
        u = -x / T
        return ControlOutput(u, u)
    return ControlOutput((s - x) / T, v - gains.k2 * T * sign(s))


def explicit_euler_stc_step(x: float, state: StateLike, gains: Gains) -> ControlOutput:
    """Super-twisting controller discretized with the explicit Euler method."""
    x = _check_x(x)
    v = _integrator(state)
    return ControlOutput(
        -gains.k1 * math.sqrt(abs(x)) * sign(x) + v,
        v - gains.T * gains.k2 * sign(x),
    )


def implicit_fosm_step(x: float, c: float, T: float) -> float:
    """Implicit first-order sliding mode law ``u = -sat_c(x / T)``."""
    if not (c > 0 and T > 0):
        raise ParameterError(f"c and T must be positive, got c={c!r}, T={T!r}")
    return -sat(_check_x(x) / T, c)


def error_dynamics_step(e: ErrorState, delta: float, gains: Gains) -> ErrorState:
    """Advance the closed-loop error coordinates by one sample.

    Solves::

        z' = z - T k1 |z'|^(1/2) sign(z') + T q'
        q' in q - T k2 Sign(z') + T delta

    ``delta`` is the disturbance difference quotient ``(w_{k-1} - w_{k-2}) / T``
    entering at this step; the caller is responsible for ``|delta| <= L``.
    """
    T = gains.T
    z_next = resolvent(e.z + T * e.q + T * T * delta, gains)
    if z_next == 0.0:
        q_next = -e.z / T
    else:
        q_next = e.q - T * gains.k2 * sign(z_next) + T * delta
    return ErrorState(z_next, q_next)


Controller = Callable[[float, StateLike, Gains], ControlOutput]


def _fosm_controller(c: Optional[float]) -> Controller:
    def step(x, state, gains):
        bound = c if c is not None else gains.u_max
        if bound is None:
            raise ParameterError("fosm needs a gain c (or gains.u_max)")
        return ControlOutput(implicit_fosm_step(x, bound, gains.T), _integrator(state))

    return step


CONTROLLERS = {
    "implicit_stc": implicit_stc_step,
    "conditioned_stc": conditioned_stc_step,
    "brogliato": brogliato_stc_step,
    "explicit_euler": explicit_euler_stc_step,
    "fosm": None,
}


def get_controller(name: str, c: Optional[float] = None) -> Controller:
    """Look up a step function by name.

    ``fosm`` is wrapped so it fits the common ``(x, state, gains)`` signature;
    its gain ``c`` defaults to ``gains.u_max`` and the integrator is passed
    through untouched.
    """
    if name not in CONTROLLERS:
        raise ParameterError(f"unknown controller {name!r}; expected one of {sorted(CONTROLLERS)}")
    if name == "fosm":
        return _fosm_controller(c)
    return CONTROLLERS[name]
