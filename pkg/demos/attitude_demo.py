"""Attitude estimation from a gyro, an accelerometer and a magnetometer.

The truth spins with a slowly varying rate; the estimate starts 40 degrees
off and is pulled back by the gradient-like correction.

    python3 demos/attitude_demo.py
"""

import math

import numpy as np

from invobs import AttitudeConfig, IntegratorConfig, build_attitude_system, default_attitude_observer, integrate
from invobs.lie_core import compose, exp

cfg = AttitudeConfig(K_G=1.0, K_B=1.0)
system = build_attitude_system(cfg)
observer = default_attitude_observer(cfg)

x0 = exp(system.group, [0.1, -0.2, 0.3])
eta0 = exp(system.group, math.radians(40.0) * np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0))
xhat0 = compose(eta0, x0)


def gyro(t):
    return np.array([0.5 * math.sin(0.7 * t), 0.3, -0.4 * math.cos(0.4 * t)])


traj = integrate(system, observer, x0, xhat0, gyro, duration=12.0, cfg=IntegratorConfig(dt=0.01))
angle = np.degrees(np.linalg.norm(traj.xi(), axis=1))
for t in range(0, 13, 2):
    k = int(round(t / 0.01))
    print(f"t = {t:4.1f} s   attitude error = {angle[k]:10.6f} deg")
