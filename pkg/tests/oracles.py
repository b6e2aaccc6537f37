"""Reference computations that do not share code paths with the package."""

import math

from scipy.integrate import quad


def bisect_generalized(offset, k1, k2, T, iters=400):
    """Solve z + T k1 sqrt|z| sign z + T^2 k2 Sign z = offset by scalar bisection."""
    b = abs(offset)
    a1, a2 = T * k1, T * T * k2
    if b <= a2:
        return 0.0
    lo, hi = 0.0, b
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid + a1 * math.sqrt(mid) + a2 - b > 0:
            hi = mid
        else:
            lo = mid
    return math.copysign(0.5 * (lo + hi), offset)


def eta(s):
    """Unit triangle wave |(s mod 4) - 2| - 1 straight from its definition."""
    return abs((s % 4.0) - 2.0) - 1.0


def sawtooth_formula(L, W, T):
    return lambda t: W * eta((L / W) * (t - T) - 1.0)


def quad_average(f, a, b, points=()):
    val, _ = quad(f, a, b, points=[p for p in points if a < p < b] or None, epsabs=1e-15, epsrel=1e-13, limit=200)
    return val / (b - a)


def dense_flow(x0, u, f, t0, t1, n=20001):
    """Sample x(t) = x0 + u (t - t0) + int f on a fine grid (cumulative Simpson-free trapezoid)."""
    h = (t1 - t0) / (n - 1)
    x = x0
    peak = abs(x0)
    prev = f(t0)
    for i in range(1, n):
        cur = f(t0 + i * h)
        x += h * (u + 0.5 * (prev + cur))
        peak = max(peak, abs(x))
        prev = cur
    return x, peak
