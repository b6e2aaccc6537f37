"""Randomized property suites.

Each suite draws its cases from ``numpy.random.default_rng(seed)``, checks
one family of claims and returns a :class:`SuiteReport` with counts, the
worst normalized residual and up to :data:`MAX_COUNTEREXAMPLES` failing
cases.  Suites are reachable by name through :data:`SUITES`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    LyapunovParams,
    default_delta_margin,
    error_coordinates,
    lyapunov_value,
    m_sets_member,
    omega_member,
    sublevel_member,
)
from .core import (
    ErrorState,
    Gains,
    conditioned_stc_step,
    error_dynamics_step,
    explicit_euler_stc_step,
    implicit_stc_step,
    resolvent,
    sat,
    sign,
    spow,
)
from .plant import adversarial_run, random_disturbance, run_closed_loop, sawtooth_disturbance

DEFAULT_SEED = 0
MAX_COUNTEREXAMPLES = 5

SAW_T = 0.01
SAW_L = 5.0
SAW_W = 0.25


@dataclass
class SuiteReport:
    name: str
    seed: int
    checks: int = 0
    violations: int = 0
    worst: float = 0.0
    counterexamples: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.checks > 0 and self.violations == 0

    def record(self, ok: bool, score: float, case: dict):
        """Count one check; ``score`` is a normalized residual (``<= 1`` passes)."""
        self.checks += 1
        if math.isfinite(score):
            self.worst = max(self.worst, score)
        if not ok:
            self.violations += 1
            if len(self.counterexamples) < MAX_COUNTEREXAMPLES:
                self.counterexamples.append(case)

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "seed": self.seed,
            "passed": self.passed,
            "checks": self.checks,
            "violations": self.violations,
            "worst_normalized_residual": self.worst,
            "counterexamples": self.counterexamples,
            **self.details,
        }


def _random_gains(rng, n):
    k1 = rng.uniform(0.1, 50.0, n)
    k2 = rng.uniform(0.1, 50.0, n)
    T = rng.uniform(1e-4, 1.0, n)
    return k1, k2, T


def bisect_resolvent(offset, k1, k2, T, iters=2200):
    """Vectorized bisection for ``z + T k1 sqrt|z| sign z + T^2 k2 Sign z = offset``.

    Independent of the closed form: decides the dead-beat case from the
    inclusion at ``z = 0`` and otherwise brackets the root of the increasing
    map ``r -> r + T k1 sqrt(r) + T^2 k2 - |offset|`` on ``[0, |offset|]``.
    Iterates until no bracket shrinks any more.
    """
    b = np.abs(np.asarray(offset, dtype=float))
    a1 = T * k1
    a2 = T * T * k2
    lo = np.zeros_like(b)
    hi = b.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = mid + a1 * np.sqrt(mid) + a2 - b
        up = f > 0
        new_lo = np.where(up, lo, mid)
        new_hi = np.where(up, mid, hi)
        if np.array_equal(new_lo, lo) and np.array_equal(new_hi, hi):
            break
        lo, hi = new_lo, new_hi
    z = 0.5 * (lo + hi)
    z = np.where(b <= a2, 0.0, z)
    return np.copysign(z, offset)


def suite_resolvent(seed=DEFAULT_SEED, n=100_000, tol=1e-10) -> SuiteReport:
    """Closed-form resolvent vs bisection, plus back-substitution residuals."""
    rep = SuiteReport("resolvent", seed)
    rng = np.random.default_rng(seed)
    offset = rng.uniform(-10.0, 10.0, n)
    k1, k2, T = _random_gains(rng, n)
    z_ref = bisect_resolvent(offset, k1, k2, T)
    deadbeat = 0
    for i in range(n):
        g = Gains(k1[i], k2[i], T[i])
        b = offset[i]
        z = resolvent(b, g)
        scale = max(abs(b), 1e-300)
        err = abs(z - z_ref[i]) / scale
        if z == 0.0:
            deadbeat += 1
            selection = b / (g.T * g.T * g.k2)
            resid = max(0.0, abs(selection) - 1.0)
        else:
            resid = abs(z + g.T * g.k1 * spow(z, 0.5) + g.T * g.T * g.k2 * sign(z) - b) / max(1.0, abs(b))
        score = max(err, resid) / tol
        rep.record(score <= 1.0 and sign(z) in (0.0, sign(b)), score,
                   {"offset": b, "k1": g.k1, "k2": g.k2, "T": g.T, "z": z, "z_bisect": float(z_ref[i])})
    rep.details["deadbeat_cases"] = deadbeat
    return rep


def conditioned_residual(x, v, gains: Gains, out=None):
    """Back-substitution residual of a conditioned step into the implicit system.

    Reconstructs ``z' = x + T (u - v')`` and ``u_bar = -k1 |z'|^(1/2) sign z' + 2 v' - v``
    and measures ``|u - sat_U(u_bar)|`` together with the violation of
    ``v' in v - T k2 Sign(2 v' - v - u)``.  Values within ``1e-12`` of the
    switching points are treated as lying on them.
    """
    out = out or conditioned_stc_step(x, v, gains)
    u, vn = out.u, out.v_next
    T, k1, k2, U = gains.T, gains.k1, gains.k2, gains.u_max
    zscale = abs(x) + T * (abs(u) + abs(vn))
    z = x + T * (u - vn)
    if abs(z) <= 1e-12 * zscale:
        z = 0.0
    u_bar = -k1 * spow(z, 0.5) + 2.0 * vn - v
    r_sat = abs(u - sat(u_bar, U))
    a = 2.0 * vn - v - u
    if abs(a) <= 1e-12 * (abs(v) + abs(u) + abs(vn)):
        r_int = max(0.0, abs(vn - v) - T * k2)
    else:
        r_int = abs(vn - (v - T * k2 * sign(a)))
    footnote = abs(vn - (v - sat((v - u) / 2.0, k2 * T)))
    return max(r_sat, r_int, footnote) / max(1.0, abs(v), abs(u))


def suite_lemma2(seed=DEFAULT_SEED, n=100_000, tol=1e-10) -> SuiteReport:
    """The conditioned explicit law solves the implicit saturated system."""
    rep = SuiteReport("lemma2-equivalence", seed)
    rng = np.random.default_rng(seed)
    k1, k2, T = _random_gains(rng, n)
    U = rng.uniform(0.1, 10.0, n)
    x = rng.choice([-1.0, 1.0], n) * 10.0 ** rng.uniform(-6, 1, n)
    v = rng.uniform(-2.0, 2.0, n) * U
    saturated = 0
    for i in range(n):
        g = Gains(k1[i], k2[i], T[i], U[i])
        out = conditioned_stc_step(x[i], v[i], g)
        saturated += abs(out.u_hat) > g.u_max
        score = conditioned_residual(x[i], v[i], g, out) / tol
        rep.record(score <= 1.0 and abs(out.u) <= g.u_max, score,
                   {"x": x[i], "v": v[i], "k1": g.k1, "k2": g.k2, "T": g.T, "U": g.u_max,
                    "u": out.u, "v_next": out.v_next, "u_hat": out.u_hat})
    rep.details["saturated_cases"] = int(saturated)
    return rep


def printed_implicit_u(x, v, gains: Gains):
    """Input of the unsaturated law evaluated literally as printed (reference form)."""
    if abs(x) / gains.T ** 2 > gains.k2:
        lam, T = gains.lam, gains.T
        return v - (2 * lam * T + gains.k1 * math.sqrt(abs(x) - lam * T * T)) * sign(x)
    return v - 2 * x / gains.T


def suite_branch_continuity(seed=DEFAULT_SEED, n=20_000, tol=1e-9) -> SuiteReport:
    """Both branches of the unsaturated law meet at ``|x| = k2 T^2``."""
    rep = SuiteReport("branch-continuity", seed)
    rng = np.random.default_rng(seed)
    k1, k2, T = _random_gains(rng, n)
    v = rng.uniform(-10.0, 10.0, n)
    side = rng.choice([-1.0, 1.0], n)
    for i in range(n):
        g = Gains(k1[i], k2[i], T[i])
        xb = side[i] * g.deadbeat_radius
        inner = implicit_stc_step(xb * (1 - 1e-12), v[i], g)
        outer = implicit_stc_step(xb * (1 + 1e-12), v[i], g)
        scale = 1.0 + abs(v[i]) + g.k2 * g.T
        du = abs(inner.u - outer.u) / scale
        dv = abs(inner.v_next - outer.v_next) / scale
        # the outer formula evaluated exactly at the boundary equals the dead-beat one
        lam = g.lam
        u_outer_at_b = v[i] - (2 * lam * g.T + g.k1 * math.sqrt(abs(xb) - lam * g.T ** 2)) * sign(xb)
        agree = abs(u_outer_at_b - (v[i] - 2 * xb / g.T)) / scale
        score = max(du, dv, agree) / tol
        rep.record(score <= 1.0, score, {"x_boundary": xb, "v": v[i], "k1": g.k1, "k2": g.k2, "T": g.T})
    return rep


def suite_remark3(seed=DEFAULT_SEED, n=20_000, tol=1e-13) -> SuiteReport:
    """``k1 = 2 sqrt(k2)`` turns the implicit law into explicit Euler outside the dead-beat band."""
    rep = SuiteReport("remark3", seed)
    rng = np.random.default_rng(seed)
    k2 = rng.uniform(0.1, 50.0, n)
    T = rng.uniform(1e-4, 1.0, n)
    v = rng.uniform(-10.0, 10.0, n)
    factor = 10.0 ** rng.uniform(1e-9, 4.0, n)
    side = rng.choice([-1.0, 1.0], n)
    for i in range(n):
        g = Gains(2.0 * math.sqrt(k2[i]), k2[i], T[i])
        x = side[i] * g.deadbeat_radius * factor[i]
        if not abs(x) > g.deadbeat_radius:
            continue
        a = implicit_stc_step(x, v[i], g)
        b = explicit_euler_stc_step(x, v[i], g)
        scale = abs(v[i]) + g.k1 * math.sqrt(abs(x))
        score = max(abs(a.u - b.u) / scale, abs(a.v_next - b.v_next) / scale) / tol
        rep.record(score <= 1.0, score, {"x": x, "v": v[i], "k2": g.k2, "T": g.T})
    return rep


def _random_omega_params(rng):
    L = rng.uniform(0.0, 10.0)
    k2 = L + rng.uniform(0.1, 20.0)
    k1 = math.sqrt(k2 + L) * rng.uniform(1.01, 4.0)
    T = 10.0 ** rng.uniform(-3, 0)
    return Gains(k1, k2, T), L


def suite_omega(seed=DEFAULT_SEED, n=10_000) -> SuiteReport:
    """One-step invariance of Omega and two-step dead-beat to exactly (0, 0)."""
    rep = SuiteReport("omega", seed)
    rng = np.random.default_rng(seed)
    for _ in range(n):
        g, L = _random_omega_params(rng)
        R = (g.k2 - L) * g.T ** 2
        z = rng.uniform(-R, R)
        q = (rng.uniform(-R, R) - z) / g.T
        if not omega_member(z, q, g.k2, L, g.T).member:
            continue
        deltas = rng.uniform(-L, L, 3)
        e0 = ErrorState(z, q)
        e1 = error_dynamics_step(e0, deltas[0], g)
        e2 = error_dynamics_step(e1, deltas[1], g)
        e3 = error_dynamics_step(e2, deltas[2], g)
        verdict = omega_member(e1.z, e1.q, g.k2, L, g.T)
        ok = verdict.member and e2 == ErrorState(0.0, 0.0) and e3 == ErrorState(0.0, 0.0)
        score = max(0.0, verdict.margin / R) + (0.0 if ok else 1e9)
        rep.record(ok, score, {"z": z, "q": q, "k1": g.k1, "k2": g.k2, "T": g.T, "L": L,
                               "deltas": deltas.tolist(), "after_two": [e2.z, e2.q]})
    return rep


def _random_sublevel_params(rng):
    L = rng.uniform(0.0, 10.0)
    k2 = L + rng.uniform(0.1, 20.0)
    alpha = rng.uniform(0.1, 0.99)
    k1 = math.sqrt(k2 + L) / alpha * rng.uniform(1.01, 3.0)
    T = 10.0 ** rng.uniform(-3, -0.5)
    return Gains(k1, k2, T), LyapunovParams(alpha, k1, k2, L), L


def _sample_sublevel(rng, c, p: LyapunovParams, tries=1000):
    """Rejection sample of a point with ``V_alpha <= c``."""
    zmax = (c * c + 2.0 * c * c / 3.0) / (12.0 * (p.alpha * p.k1) ** 2)
    for _ in range(tries):
        z = rng.uniform(-zmax, zmax)
        q = rng.uniform(-c / 3.0, c / 3.0)
        if lyapunov_value(z, q, p) <= c:
            return z, q
    raise RuntimeError("sublevel sampling failed")


def suite_sublevel(seed=DEFAULT_SEED, n=10_000, steps=5) -> SuiteReport:
    """Forward invariance and strict decrease of ``V_alpha``, convexity, and
    agreement of the inequality description with ``V_alpha <= c``."""
    rep = SuiteReport("sublevel", seed)
    rng = np.random.default_rng(seed)
    counts = {"invariance": 0, "decrease": 0, "convexity": 0, "cross_validation": 0, "reached_origin": 0}
    for _ in range(n):
        g, p, L = _random_sublevel_params(rng)
        c = 10.0 ** rng.uniform(-3, 1)
        z, q = _sample_sublevel(rng, c, p)
        e = ErrorState(z, q)
        V = lyapunov_value(z, q, p)
        for _ in range(steps):
            e_next = error_dynamics_step(e, rng.uniform(-L, L), g)
            V_next = lyapunov_value(e_next.z, e_next.q, p)
            origin = e_next == ErrorState(0.0, 0.0)
            inv_ok = V_next <= c
            dec_ok = origin or V_next < V
            counts["invariance"] += 1
            counts["decrease"] += 0 if origin else 1
            rep.record(inv_ok and dec_ok, V_next / c,
                       {"check": "invariance/decrease", "z": e.z, "q": e.q, "c": c, "V": V, "V_next": V_next,
                        "alpha": p.alpha, "k1": g.k1, "k2": g.k2, "T": g.T, "L": L})
            if origin:
                counts["reached_origin"] += 1
                break
            e, V = e_next, V_next
        z2, q2 = _sample_sublevel(rng, c, p)
        mid = sublevel_member(0.5 * (z + z2), 0.5 * (q + q2), c, p)
        counts["convexity"] += 1
        rep.record(mid.member, 0.0, {"check": "convexity", "a": [z, q], "b": [z2, q2], "c": c,
                                     "alpha": p.alpha, "k1": p.k1})
        # inequality form vs V <= c away from the boundary
        zmax = (c * c + 2.0 * c * c / 3.0) / (12.0 * (p.alpha * p.k1) ** 2)
        zr, qr = rng.uniform(-1.5 * zmax, 1.5 * zmax), rng.uniform(-c / 2.0, c / 2.0)
        Vr = lyapunov_value(zr, qr, p)
        if abs(Vr - c) > 1e-9 * c:
            counts["cross_validation"] += 1
            rep.record(sublevel_member(zr, qr, c, p).member == (Vr <= c), 0.0,
                       {"check": "cross-validation", "z": zr, "q": qr, "c": c, "V": Vr})
    rep.details.update(counts)
    return rep


def random_conditioned_scenario(rng):
    """Gains, bounds and disturbance meeting the saturated stability conditions."""
    L = rng.uniform(0.5, 10.0)
    T = 10.0 ** rng.uniform(-3, math.log10(0.02))
    k2 = L * rng.uniform(1.2, 4.0)
    W = rng.uniform(0.05, 1.0)
    U = (W + k2 * T) * rng.uniform(1.2, 3.0)
    delta = default_delta_margin(U, W, k2, T)
    k1 = math.sqrt(2.0 * k2 * (U + W + delta) / (U - W - k2 * T)) * rng.uniform(1.05, 3.0)
    gains = Gains(k1, k2, T, U)
    if rng.uniform() < 0.5:
        w = sawtooth_disturbance(L, W, T)
    else:
        w = random_disturbance(rng, L, W, 4000 * T, T / 3.0, 8.0 * T)
    x0 = rng.uniform(-2.0, 2.0)
    v0 = rng.uniform(-3.0, 3.0) * U
    return gains, w, L, W, delta, x0, v0


def m_set_flags(traj, gains, W, delta):
    z, _ = error_coordinates(traj)
    return np.array([tuple(m_sets_member(zk, vk, uk, gains, W, delta))
                     for zk, vk, uk in zip(z, traj.v, traj.u_hat)])


def first_persistent_violation(flags):
    """Index of the first exit from a set after entering it, per column (or -1)."""
    out = []
    for col in flags.T:
        inside = np.nonzero(col)[0]
        if inside.size == 0:
            out.append(-1)
            continue
        later = np.nonzero(~col[inside[0]:])[0]
        out.append(int(inside[0] + later[0]) if later.size else -1)
    return out


def suite_m_sets(seed=DEFAULT_SEED, n=100, horizon=1500) -> SuiteReport:
    """Once a conditioned closed-loop run enters M1, M2 or M3 it never leaves."""
    rep = SuiteReport("m-sets", seed)
    rng = np.random.default_rng(seed)
    reached = np.zeros(3, dtype=int)
    scenarios = [("sawtooth", Gains(16.0, 10.0, SAW_T, 1.5), sawtooth_disturbance(SAW_L, SAW_W, SAW_T),
                  SAW_L, SAW_W, default_delta_margin(1.5, SAW_W, 10.0, SAW_T), 1.0, 0.0)]
    for i in range(n):
        scenarios.append((f"random-{i}", *random_conditioned_scenario(rng)))
    for name, gains, w, L, W, delta, x0, v0 in scenarios:
        traj = run_closed_loop("conditioned_stc", gains, w, x0, v0, horizon)
        flags = m_set_flags(traj, gains, W, delta)
        exits = first_persistent_violation(flags)
        reached += flags[-1]
        ok = all(e < 0 for e in exits)
        rep.record(ok, 0.0, {"scenario": name, "k1": gains.k1, "k2": gains.k2, "T": gains.T, "U": gains.u_max,
                             "L": L, "W": W, "x0": x0, "v0": v0, "first_exit": exits})
    rep.details["ended_in"] = {"M1": int(reached[0]), "M2": int(reached[1]), "M3": int(reached[2])}
    rep.details["scenarios"] = len(scenarios)
    return rep


def suite_adversary(seed=DEFAULT_SEED, Ks=range(2, 21), x0s=(0.0, 1.0, -0.3)) -> SuiteReport:
    """The worst-case disturbance pushes ``|x_{K+2}|`` up to at least ``L T^2``."""
    rep = SuiteReport("adversary", seed)
    gains = Gains(27.0, 10.0, SAW_T)
    L, T = SAW_L, SAW_T
    bound = L * T * T
    for x0 in x0s:
        for K in Ks:
            traj, _, q = adversarial_run("implicit_stc", gains, K, L, x0=x0, W=SAW_W)
            xk = abs(traj.x[K + 2])
            w_ok = np.all(traj.w_avg[:K + 1] == 0.0) or np.allclose(traj.w_avg[:K + 1], 0.0, atol=1e-15)
            w_last = abs(traj.w_avg[K + 1] - (-1) ** K * q * L * T) <= 1e-15
            ok = xk >= bound - 1e-12 and bool(w_ok) and w_last
            rep.record(ok, bound / max(xk, 1e-300), {"K": K, "x0": x0, "q": q, "abs_x_K2": xk})
    return rep


SUITES = {
    "resolvent": suite_resolvent,
    "branch-continuity": suite_branch_continuity,
    "lemma2-equivalence": suite_lemma2,
    "omega": suite_omega,
    "sublevel": suite_sublevel,
    "m-sets": suite_m_sets,
    "adversary": suite_adversary,
    "remark3": suite_remark3,
}


def run_suite(name: str, seed: int = DEFAULT_SEED, **kwargs) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    return SUITES[name](seed=seed, **kwargs)
