"""Theory curves for the generalization error, plus a quick BN simulation.

The simulation uses N = 256 so the script finishes in about a minute; the
full-size sweep is `bnlab figure1a`.  Expect the points next to alpha = 1 to
land off the curve: the converged BN student is a shrunk least-squares fit,
and the curve describes a ridge fit.

    python demos/generalization_curves.py
"""
from bnlab.experiments import LINEAR_BN, alpha_sweep
from bnlab.sgd_lab import TeacherStudentConfig
from bnlab.statmech import eps_id_ord, eps_id_wn, eps_relu_ord

S = 0.25
alphas = [0.25, 0.5, 0.75, 1.25, 1.5, 1.75]

print("alpha   least-sq   decay 1/64   decay 0.25   ReLU least-sq")
for a in alphas:
    relu = eps_relu_ord(a, S)
    print(f"{a:5.2f}   {eps_id_ord(a, S):8.3f}   {eps_id_wn(a, 1 / 64, S):10.3f}   "
          f"{eps_id_wn(a, 0.25, S):10.3f}   {relu:12.3f}")

base = TeacherStudentConfig(N=256, S=S, act="identity", method="bn", **LINEAR_BN)
print("\nBN (M = 32, N = 256) against the decay-1/64 curve")
for p in alpha_sweep(base, alphas):
    print(f"alpha {p.alpha:4.2f}: simulated {p.gen_error_sim:.3f}, curve {p.gen_error_theory:.3f}")
