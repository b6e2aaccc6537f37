"""Exact zero-order-hold simulation of the scalar plant ``dx/dt = u + w``.

Disturbances are piecewise linear, so between two kinks the closed loop is
``x(t) = x_a + (u + w_a) s + slope s^2 / 2`` and every quantity we need
(next sample, sample-averaged disturbance, intersample peak) has a closed
form.  No ODE solver is involved.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from .core import ControllerState, Gains, get_controller
from .errors import DomainError, ParameterError, SimulationError

__all__ = [
    "PiecewiseLinearSignal",
    "StepRecord",
    "Trajectory",
    "CSV_COLUMNS",
    "integrate_interval",
    "average_disturbance",
    "disturbance_samples",
    "constant_disturbance",
    "sawtooth_disturbance",
    "adversary_signal",
    "adversary_disturbance",
    "adversarial_run",
    "random_disturbance",
    "run_closed_loop",
]


class PiecewiseLinearSignal:
    """Continuous piecewise-linear signal given by breakpoints.

    Outside ``[times[0], times[-1]]`` the first/last value is held, unless
    ``periodic`` is set: then the breakpoints describe exactly one period
    (``values[-1]`` must equal ``values[0]``) and the signal repeats with
    period ``times[-1] - times[0]``.
    """

    def __init__(self, times: Sequence[float], values: Sequence[float], periodic: bool = False):
        t = np.asarray(times, dtype=float).ravel()
        y = np.asarray(values, dtype=float).ravel()
        if t.size == 0 or t.shape != y.shape:
            raise ParameterError("times and values must be non-empty and of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise ParameterError("breakpoints must be finite")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("breakpoint times must be strictly ascending")
        if periodic:
            if t.size < 2:
                raise ParameterError("a periodic signal needs at least two breakpoints")
            if y[-1] != y[0]:
                raise ParameterError("periodic signal must end on its first value")
        self.times = t
        self.values = y
        self.periodic = bool(periodic)
        self.period = float(t[-1] - t[0]) if periodic else None
        self._slopes = np.diff(y) / np.diff(t) if t.size > 1 else np.zeros(0)

    def __repr__(self):
        kind = f"periodic, period={self.period!r}" if self.periodic else "hold"
        return f"PiecewiseLinearSignal({self.times.size} breakpoints, {kind})"

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLinearSignal):
            return NotImplemented
        return (
            self.periodic == other.periodic
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    @property
    def slope_bound(self) -> float:
        """Largest segment slope magnitude."""
        return float(np.max(np.abs(self._slopes))) if self._slopes.size else 0.0

    @property
    def amplitude_bound(self) -> float:
        """Largest breakpoint magnitude (the signal's sup norm)."""
        return float(np.max(np.abs(self.values)))

    def _reduce(self, t):
        t0 = self.times[0]
        return t0 + np.mod(np.asarray(t, dtype=float) - t0, self.period)

    def __call__(self, t):
        tt = self._reduce(t) if self.periodic else np.asarray(t, dtype=float)
        out = np.interp(tt, self.times, self.values)
        return float(out) if np.ndim(out) == 0 else out

    def kinks(self, a: float, b: float) -> np.ndarray:
        """Breakpoint times strictly inside ``(a, b)``, ascending."""
        if not self.periodic:
            t = self.times
            return t[(t > a) & (t < b)]
        t0, P = self.times[0], self.period
        inner = self.times[:-1] - t0
        n0 = math.floor((a - t0) / P)
        n1 = math.floor((b - t0) / P)
        cand = (t0 + np.arange(n0, n1 + 1)[:, None] * P + inner[None, :]).ravel()
        return cand[(cand > a) & (cand < b)]

    def pieces(self, a: float, b: float):
        """Split ``[a, b]`` at the kinks; returns the nodes and the signal values there."""
        nodes = np.concatenate(([a], self.kinks(a, b), [b]))
        return nodes, np.atleast_1d(self(nodes))

    def integral(self, a: float, b: float) -> float:
        """Exact integral over ``[a, b]`` (trapezoid rule on kink-free pieces)."""
        if b < a:
            return -self.integral(b, a)
        nodes, vals = self.pieces(a, b)
        return float(np.sum(np.diff(nodes) * 0.5 * (vals[:-1] + vals[1:])))


def integrate_interval(x0: float, u: float, w: PiecewiseLinearSignal, t0: float, t1: float):
    """Flow of ``dx/dt = u + w(t)`` from ``t0`` to ``t1`` with ``u`` held constant.

    Returns:
        ``(x1, x_sup)``: the state at ``t1`` and ``max |x(t)|`` over ``[t0, t1]``.
        The peak is taken over the piece endpoints and the vertex of each
        quadratic piece.

    Raises:
        DomainError: if ``t1 <= t0``.
    """
    if not t1 > t0:
        raise DomainError(f"need t1 > t0, got [{t0!r}, {t1!r}]")
    nodes, vals = w.pieces(t0, t1)
    x = float(x0)
    x_sup = abs(x)
    for h, wa, wb in zip(np.diff(nodes).tolist(), vals[:-1].tolist(), vals[1:].tolist()):
        rate = u + wa
        if wb != wa:
            tau = -rate * h / (wb - wa)
            if 0.0 < tau < h:
                x_sup = max(x_sup, abs(x + 0.5 * rate * tau))
        x = x + h * (u + 0.5 * (wa + wb))
        x_sup = max(x_sup, abs(x))
    return x, x_sup


def average_disturbance(w: PiecewiseLinearSignal, k: int, T: float) -> float:
    """Sample average ``w_k = (1/T) * integral of w over [kT, (k+1)T]``."""
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T!r}")
    return w.integral(k * T, (k + 1) * T) / T


def disturbance_samples(w: PiecewiseLinearSignal, n: int, T: float) -> np.ndarray:
    """``w_0 .. w_{n-1}`` as an array."""
    return np.array([average_disturbance(w, k, T) for k in range(n)])


def constant_disturbance(value: float = 0.0) -> PiecewiseLinearSignal:
    return PiecewiseLinearSignal([0.0], [value])


def sawtooth_disturbance(L: float, W: float, T: float) -> PiecewiseLinearSignal:
    """Triangle wave ``W * eta((L/W)(t - T) - 1)`` with ``eta(s) = |(s mod 4) - 2| - 1``.

    Slope magnitude is exactly ``L``, amplitude exactly ``W``, period ``4W/L``.
    The stored period starts at the trough ``t = T - W/L``.
    """
    if not (L > 0 and W > 0 and T > 0):
        raise ParameterError(f"L, W, T must be positive, got L={L!r}, W={W!r}, T={T!r}")
    a = W / L
    return PiecewiseLinearSignal([T - a, T + a, T + 3 * a], [-W, W, -W], periodic=True)


def adversary_signal(K: int, L: float, T: float, q: int) -> PiecewiseLinearSignal:
    """Disturbance ``-(q L T / 2) * eta_{K+1}(2 t / T)`` used by the lower-bound construction.

    ``eta_M`` follows the unit triangle wave on ``[0, 2M)``, then ramps with
    unit slope for two more units and holds the value ``3 (-1)^M``.
    """
    M = K + 1
    j = np.arange(M + 2)
    eta = np.where(j <= M, (-1.0) ** j, 3.0 * (-1.0) ** M)
    return PiecewiseLinearSignal(T * j.astype(float), -(q * L * T / 2.0) * eta)


def adversary_disturbance(K: int, L: float, T: float, run, W: Optional[float] = None):
    """Pick the worst-case sign ``q`` for step ``K + 2`` from a closed-loop transcript.

    Args:
        K: step after which the adversary acts (``K >= 1``).
        L: slope bound.
        T: sampling time.
        run: anything with ``x`` and ``u`` sample sequences covering at least
            ``K + 2`` steps (a :class:`Trajectory` works).  The samples up to
            ``K + 1`` do not depend on ``q``, so any probe run is fine.
        W: optional amplitude budget; rejected if below ``3 L T / 2``.

    Returns:
        ``(signal, q)``.
    """
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K!r}")
    if not (L >= 0 and T > 0):
        raise ParameterError(f"need L >= 0 and T > 0, got L={L!r}, T={T!r}")
    if W is not None and W < 1.5 * L * T:
        raise ParameterError(f"amplitude budget W={W!r} below 3LT/2={1.5 * L * T!r}")
    x, u = run.x, run.u
    if len(x) < K + 2 or len(u) < K + 2:
        raise DomainError(f"transcript has {min(len(x), len(u))} samples, need {K + 2}")
    s = 1 if K % 2 == 0 else -1
    q = s if 2 * x[K + 1] - x[K] + T * (u[K + 1] - u[K]) >= 0 else -s
    return adversary_signal(K, L, T, q), q


def adversarial_run(controller, gains: Gains, K: int, L: float, x0=0.0, v0=0.0, W=None, c=None):
    """Two-pass lower-bound experiment.

    A probe run with ``q = +1`` fixes the ``q``-independent samples, the sign
    is chosen from them and the loop is replayed for ``K + 3`` steps so that
    ``x_{K+2}`` is sampled.

    Returns:
        ``(trajectory, signal, q)`` of the replay.
    """
    probe = run_closed_loop(controller, gains, adversary_signal(K, L, gains.T, 1), x0, v0, K + 2, c=c)
    signal, q = adversary_disturbance(K, L, gains.T, probe, W=W)
    return run_closed_loop(controller, gains, signal, x0, v0, K + 3, c=c), signal, q


def random_disturbance(rng: np.random.Generator, L: float, W: float, t_end: float,
                       min_seg: float, max_seg: float) -> PiecewiseLinearSignal:
    """Random piecewise-linear signal with ``|slope| <= L`` and ``|w| <= W``.

    Segment lengths are uniform in ``[min_seg, max_seg]``; slopes are uniform
    in ``[-L, L]`` and shortened where they would leave ``[-W, W]``.
    """
    times = [0.0]
    values = [float(rng.uniform(-W, W))]
    while times[-1] < t_end:
        h = float(rng.uniform(min_seg, max_seg))
        y = values[-1] + float(rng.uniform(-L, L)) * h
        times.append(times[-1] + h)
        values.append(min(W, max(-W, y)))
    return PiecewiseLinearSignal(times, values)


CSV_COLUMNS = ("k", "t", "x", "u", "v", "w_avg", "x_sup")


@dataclass(frozen=True)
class StepRecord:
    """One sampling step: ``x``, ``v`` at ``t = kT``, applied ``u``, averaged ``w_k``
    and ``max |x(t)|`` over ``[kT, (k+1)T]``."""

    k: int
    t: float
    x: float
    u: float
    v: float
    w_avg: float
    x_sup: float


@dataclass
class Trajectory:
    """Column-wise store of a closed-loop run.

    ``u_hat`` holds the conditioned law's unsaturated input (NaN for the
    other laws).  ``x_end`` and ``v_end`` are the states after the last step.
    """

    k: np.ndarray
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w_avg: np.ndarray
    x_sup: np.ndarray
    u_hat: np.ndarray
    x_end: float
    v_end: float
    T: float
    controller: str = ""

    def __len__(self):
        return len(self.k)

    def records(self) -> Iterator[StepRecord]:
        for row in zip(self.k, self.t, self.x, self.u, self.v, self.w_avg, self.x_sup):
            yield StepRecord(int(row[0]), *map(float, row[1:]))

    def to_csv(self, target: Union[str, Path, io.TextIOBase, None] = None) -> Optional[str]:
        """Write ``k,t,x,u,v,w_avg,x_sup`` rows with round-trip float formatting.

        Returns the text when ``target`` is None.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records():
            writer.writerow([r.k] + [repr(val) for val in (r.t, r.x, r.u, r.v, r.w_avg, r.x_sup)])
        text = buf.getvalue()
        if target is None:
            return text
        if isinstance(target, (str, Path)):
            Path(target).write_text(text)
        else:
            target.write(text)
        return None

    @staticmethod
    def read_csv(source) -> dict:
        """Parse a trajectory CSV back into a dict of column arrays."""
        text = Path(source).read_text() if isinstance(source, (str, Path)) else source.read()
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != CSV_COLUMNS:
            raise DomainError(f"unexpected CSV header {rows[0]!r}")
        cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(CSV_COLUMNS)
        out = {name: np.array([float(s) for s in col]) for name, col in zip(CSV_COLUMNS, cols)}
        out["k"] = out["k"].astype(int)
        return out


def run_closed_loop(controller: Union[str, Callable], gains: Gains, w: PiecewiseLinearSignal,
                    x0: float, v0: float, n_steps: int, c: Optional[float] = None) -> Trajectory:
    """Simulate ``n_steps`` sampling periods of the sampled-data loop.

    Each step samples ``x_k``, evaluates the controller, holds ``u_k`` and
    integrates the plant exactly over ``[kT, (k+1)T]``.

    Args:
        controller: a name from :data:`implicit_stc.core.CONTROLLERS` or a
            step function ``(x, v, gains) -> ControlOutput``.
        c: FOSM gain, only used when ``controller == "fosm"``.

    Raises:
        SimulationError: when the state becomes non-finite.
    """
    if n_steps < 1:
        raise ParameterError(f"n_steps must be >= 1, got {n_steps!r}")
    name = controller if isinstance(controller, str) else getattr(controller, "__name__", "")
    step = get_controller(controller, c) if isinstance(controller, str) else controller
    T = gains.T
    cols = np.full((7, n_steps), np.nan)
    x, v = float(x0), float(v0)
    for k in range(n_steps):
        if not (math.isfinite(x) and math.isfinite(v)):
            raise SimulationError("non-finite closed-loop state", k)
        t0, t1 = k * T, (k + 1) * T
        out = step(x, ControllerState(v, name), gains)
        x_next, x_sup = integrate_interval(x, out.u, w, t0, t1)
        cols[:, k] = (t0, x, out.u, v, w.integral(t0, t1) / T, x_sup,
                      np.nan if out.u_hat is None else out.u_hat)
        x, v = x_next, out.v_next
    if not (math.isfinite(x) and math.isfinite(v)):
        raise SimulationError("non-finite closed-loop state", n_steps)
    return Trajectory(np.arange(n_steps), *cols, x_end=x, v_end=v, T=T, controller=name)
