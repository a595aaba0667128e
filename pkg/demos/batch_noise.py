"""Batch-statistic noise as a penalty on the BN scale.

Shows the prior moments of the batch mean and spread, then the split of the
expected BN loss into the population-normalized loss plus zeta * gamma^2.

    python demos/batch_noise.py
"""
import numpy as np

from bnlab.bn_decompose import decompose_check, linear_zeta_exact, verify_priors
from bnlab.sgd_lab import StudentState, TeacherStudentConfig, make_dataset

rng = np.random.default_rng(0)
for name, h in {"gaussian": rng.standard_normal(10**6), "laplace": rng.laplace(size=10**6)}.items():
    for check in verify_priors(h, 32, 10**5).checks:
        print(f"{name:8s} M=32 {check.name:12s} empirical {check.empirical:.5f} "
              f"predicted {check.predicted:.5f} (z = {check.z:+.1f})")

cfg = TeacherStudentConfig(N=256, M=16, alpha=8.0, S=0.25, seed=0)
_, X, y = make_dataset(cfg)
w = np.linalg.lstsq(X, y, rcond=None)[0]
z = X @ w / np.sqrt(np.mean((X @ w) ** 2))
student = StudentState(w, float(z @ y / (z @ z)))

print("\n   M    BN loss    PN loss   zeta*g^2   residual   exact zeta(M)*M")
for M in (16, 32, 64, 128):
    r = decompose_check(X, y, student, M, 10**5, seed=1)
    print(f"{M:4d}  {r.e_bn_mc:.5f}  {r.pn_loss:.5f}  {r.penalty:.6f}  {r.residual:+.2e}"
          f"   {M * linear_zeta_exact(M):.3f}")
