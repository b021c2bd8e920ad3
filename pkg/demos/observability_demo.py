"""Why a magnetometer alone cannot give full attitude.

With one reference vector the rotation about that vector is invisible:
the linearized pair loses rank, and in simulation the error component
along the field direction never decays.

    python3 demos/observability_demo.py
"""

import math

import numpy as np

from invobs import AttitudeConfig, IntegratorConfig, build_attitude_system, default_attitude_observer, integrate
from invobs.lie_core import compose, exp
from invobs.observer import observability_check

for label, cfg in (("gravity + field", AttitudeConfig()), ("field only", AttitudeConfig(use_accelerometer=False))):
    system = build_attitude_system(cfg)
    report = observability_check(system)
    print(f"{label:>16}: observability rank {report.rank} / {report.dim}")

cfg = AttitudeConfig(use_accelerometer=False)
system = build_attitude_system(cfg)
x0 = system.group.identity()
xi0 = math.radians(30.0) * np.array([0.6, 0.0, 0.8])
xhat0 = compose(exp(system.group, xi0), x0)
traj = integrate(system, default_attitude_observer(cfg), x0, xhat0, np.zeros(3), duration=20.0, cfg=IntegratorConfig(dt=0.01))

B = cfg.B / np.linalg.norm(cfg.B)
for t in (0, 5, 10, 20):
    xi = traj.xi()[int(round(t / 0.01))]
    along = xi @ B
    across = np.linalg.norm(xi - along * B)
    print(f"t = {t:4.1f} s   along field = {math.degrees(along):8.4f} deg   across = {math.degrees(across):.2e} deg")
