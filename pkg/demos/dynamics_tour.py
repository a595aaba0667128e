"""Order-parameter dynamics of a normalized ReLU student.

Integrates the ODE from a poor start, compares it with a finite-N online
simulation, and prints the learning-rate limits with and without gamma decay.

    python demos/dynamics_tour.py
"""
import numpy as np

from bnlab.dynamics import DynamicsParams, fixed_point, integrate, lr_analysis
from bnlab.sgd_lab import simulate_online

start = (0.5, 0.3, 1.0)
params = DynamicsParams(eta=0.05, zeta=0.25, act="relu", method="wn_gamma_decay")

ode = integrate(start, params, t_end=30.0, dt=0.01, record_every=100)
sim = simulate_online(1024, 0.05, 30.0, zeta=0.25, act="relu", method="wn_gamma_decay",
                      initial=start, seed=0)

print("   t      Q_ode   Q_sim    R_ode   R_sim")
for k in range(0, len(ode.times), 5):
    print(f"{ode.times[k]:5.0f}  {ode.Q[k]:7.4f} {sim.Q[k]:7.4f}  {ode.R[k]:7.4f} {sim.R[k]:7.4f}")

fp = fixed_point(params)
print(f"\nfixed point with decay 0.25: Q = {fp.Q:.4f}, R = {fp.R:.1f}")

print("\nzeta   eta_max(BN)  eta_max(WN)  slack over 2 zeta")
wn = lr_analysis(DynamicsParams(0.1, 0.0, "relu", "wn")).eta_max
for zeta in (0.0, 0.05, 0.1, 0.25, 0.5):
    bn = lr_analysis(DynamicsParams(0.1, zeta, "relu", "bn")).eta_max
    print(f"{zeta:4.2f}   {bn:10.3f}  {wn:11.3f}  {bn - wn - 2 * zeta:+.3f}")

print("\nstability across learning rates (BN, zeta = 0.25, L0 = 1)")
for eta in np.linspace(1.0, 7.0, 7):
    lr = lr_analysis(DynamicsParams(float(eta), 0.25, "relu", "bn"))
    print(f"eta = {eta:3.1f}: eta_eff = {lr.eta_eff:5.3f}, lambda_R = {lr.lambda_R:+.3f}, "
          f"{'stable' if lr.stable else 'unstable'}")
