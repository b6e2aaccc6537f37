"""
Lyapunov sublevel sets in error coordinates
===========================================

Sample points inside {V <= c}, push them through the error dynamics and
watch V decrease until the dead-beat set drops them onto the origin.
"""

import numpy as np

from implicit_stc import Gains
from implicit_stc.analysis import LyapunovParams, default_alpha, lyapunov_value, omega_member
from implicit_stc.core import ErrorState, error_dynamics_step

T, L = 0.01, 5.0
gains = Gains(27.0, 10.0, T)
p = LyapunovParams(default_alpha(gains.k1, gains.k2, L), gains.k1, gains.k2, L)
rng = np.random.default_rng(0)

e = ErrorState(0.002, -0.3)
for k in range(40):
    V = lyapunov_value(e.z, e.q, p)
    in_omega = omega_member(e.z, e.q, gains.k2, L, T).member
    print(f"k={k:2d} z={e.z:+.3e} q={e.q:+.3e} V={V:.3e} in Omega={in_omega}")
    if e == ErrorState(0.0, 0.0):
        break
    e = error_dynamics_step(e, rng.uniform(-L, L), gains)
