"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``criterion N: PASS|FAIL ...`` line; the lines are
also collected into the pytest terminal summary.  Run alone with

    pytest tests/test_acceptance.py -v
"""

import math
import time

import numpy as np
import pytest

from implicit_stc.analysis import convergence_metrics, lagged
from implicit_stc.core import Gains
from implicit_stc.plant import adversarial_run, run_closed_loop, sawtooth_disturbance
from implicit_stc.verify import run_suite

from conftest import ACCEPTANCE_LINES

T, L, W = 0.01, 5.0, 0.25
LT2 = L * T * T


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@pytest.fixture(scope="module")
def saw():
    return sawtooth_disturbance(L, W, T)


def steady_state(traj, w):
    m = convergence_metrics(traj, w, L, T)
    ok = (m["converged"] and m["v_identity_residual"] <= 1e-9
          and m["max_abs_x_after"] <= LT2 + 1e-12 and m["max_x_sup_after"] <= LT2 + 1e-12)
    return ok, m


def test_criterion_1_exact_steady_state(saw):
    t0 = time.perf_counter()
    traj = run_closed_loop("implicit_stc", Gains(27.0, 10.0, T), saw, 1.0, 0.0, 2000)
    elapsed = time.perf_counter() - t0
    ok, m = steady_state(traj, saw)
    ok = ok and elapsed < 1.0
    report(1, ok, f"K*={m['K_star']} max|x|={m['max_abs_x_after']:.6g} max sup|x(t)|={m['max_x_sup_after']:.6g} "
                  f"v-resid={m['v_identity_residual']:.2g} runtime={elapsed:.3f}s")


def test_criterion_2_conditioned_steady_state(saw):
    traj = run_closed_loop("conditioned_stc", Gains(16.0, 10.0, T, 1.5), saw, 1.0, 0.0, 2000)
    ok, m = steady_state(traj, saw)
    umax = float(np.max(np.abs(traj.u)))
    ok = ok and umax <= 1.5
    report(2, ok, f"K*={m['K_star']} max|x|={m['max_abs_x_after']:.6g} max sup|x(t)|={m['max_x_sup_after']:.6g} "
                  f"v-resid={m['v_identity_residual']:.2g} max|u|={umax}")


def test_criterion_3_lower_bound():
    g = Gains(27.0, 10.0, T)
    worst = math.inf
    for K in range(2, 21):
        traj, _, _ = adversarial_run("implicit_stc", g, K, L, x0=1.0, v0=0.0, W=W)
        worst = min(worst, abs(float(traj.x[K + 2])))
    report(3, worst >= LT2 - 1e-12, f"min over K=2..20 of |x_(K+2)| = {worst!r} (LT^2 = {LT2!r})")


def test_criterion_4_resolvent_oracle():
    t0 = time.perf_counter()
    res = run_suite("resolvent", n=100_000)
    lem = run_suite("lemma2-equivalence", n=100_000)
    elapsed = time.perf_counter() - t0
    ok = res.passed and lem.passed and elapsed < 10.0
    report(4, ok, f"resolvent {res.checks} checks worst={res.worst:.3g}x tol, lemma2 {lem.checks} checks "
                  f"worst={lem.worst:.3g}x tol, runtime={elapsed:.2f}s")


def test_criterion_5_brogliato_residual(saw):
    g = Gains(27.0, 10.0, T)
    brog = run_closed_loop("brogliato", g, saw, 1.0, 0.0, 2000)
    prop = run_closed_loop("implicit_stc", g, saw, 1.0, 0.0, 2000)
    tail = slice(1000, None)
    resid = float(np.max(np.abs(brog.x[tail] - T * lagged(brog.w_avg, 1)[tail])))
    ratio = float(np.max(np.abs(brog.x[tail])) / np.max(np.abs(prop.x[tail])))
    report(5, resid <= 1e-6 and ratio >= 4.0, f"max|x_k - T w_(k-1)|={resid:.3g} contrast ratio={ratio:.4f}")


def test_criterion_6_invariant_suites():
    reps = [run_suite("omega", n=10_000), run_suite("sublevel", n=10_000), run_suite("m-sets", n=100)]
    ok = all(r.passed for r in reps)
    report(6, ok, ", ".join(f"{r.name}: {r.checks} checks {r.violations} violations" for r in reps))


def test_criterion_7_remark3_and_fosm(saw):
    rem = run_suite("remark3")
    U = 1.5
    g = Gains(16.0, 10.0, T, U)
    worst = 0.0
    for c in (0.26, 0.5, 1.0, U):
        traj = run_closed_loop("fosm", g, saw, 1.0, 0.0, 2000, c=c)
        worst = max(worst, float(np.max(np.abs(traj.x[1000:]))))
    ok = rem.passed and worst <= W * T + 1e-9
    report(7, ok, f"remark3 {rem.checks} checks worst={rem.worst:.3g}x tol(1e-13); "
                  f"FOSM steady max|x_k|={worst:.6g} (WT={W * T:g}) for c in (W, U]")
