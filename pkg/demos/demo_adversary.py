"""
No causal controller beats L T^2
================================

A disturbance that is zero on average up to step K, then turns against
the controller, forces |x_{K+2}| >= L T^2.
"""

from implicit_stc import Gains
from implicit_stc.plant import adversarial_run, disturbance_samples

T, L, W = 0.01, 5.0, 0.25
gains = Gains(27.0, 10.0, T)

for K in (2, 5, 10, 20):
    traj, signal, q = adversarial_run("implicit_stc", gains, K, L, x0=0.0, W=W)
    wk = disturbance_samples(signal, K + 2, T)
    print(f"K={K:2d} q={q:+d} w_(K+1)={wk[K + 1]:+.3f} |x_(K+2)|={abs(traj.x[K + 2]):.6e}")

print("L T^2 =", L * T * T)
