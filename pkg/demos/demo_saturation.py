"""
Saturated actuator with the conditioned integrator
==================================================

With |u| <= U the integrator is conditioned so that it never winds up.
The steady state is the same as without saturation.
"""

import numpy as np

from implicit_stc import Gains, run_closed_loop, sawtooth_disturbance
from implicit_stc.analysis import conditioned_conditions, convergence_metrics

T, L, W, U = 0.01, 5.0, 0.25, 1.5
w = sawtooth_disturbance(L, W, T)
gains = Gains(k1=16.0, k2=10.0, T=T, u_max=U)
print("stability conditions hold:", conditioned_conditions(gains, L, W))

###############################################################################
# Start far away so that the input saturates for a while.

traj = run_closed_loop("conditioned_stc", gains, w, x0=1.0, v0=0.0, n_steps=2000)
saturated = np.abs(traj.u) == U
print("saturated steps:", int(saturated.sum()), "last at k =", int(np.nonzero(saturated)[0][-1]))
print("max |u| =", np.abs(traj.u).max())
m = convergence_metrics(traj, w, L, T)
print("K* =", m["K_star"], " max |x| after =", m["max_abs_x_after"])

###############################################################################
# The first-order sliding mode law u = -sat_c(x/T) is simpler but only
# reaches the W T band.

for c in (0.5, 1.0, U):
    traj = run_closed_loop("fosm", gains, w, 1.0, 0.0, 2000, c=c)
    print(f"fosm c={c}: tail max|x_k| = {np.abs(traj.x[1000:]).max():.3e}  (W T = {W * T})")
