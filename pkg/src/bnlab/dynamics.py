"""Order-parameter ODEs, fixed points and learning-rate limits.

Normalized students (BN, WN, WN with gamma decay) follow

    dQ/dt = eta I1 / Q - eta zeta Q
    dR/dt = eta Q I3 / L^2 - eta R I1 / L^2 - eta^2 Q^2 R I2 / (2 L^4)
    dL/dt = eta^2 Q^2 I2 / (2 L^3)

with t = j/N.  Plain WN has zeta = 0.  A vanilla SGD student has no separate
raw length (L = Q) and picks up the eta^2 I2 term in its length equation
instead.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Activation, DomainError, Method, OrderState, as_activation, as_method
from .kernels import _scalar_kernels, closed_I1, closed_partials

DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class DynamicsParams:
    eta: float
    zeta: float = 0.0
    act: Activation = Activation.RELU
    method: Method = Method.BN
    # drop the eta^2 terms (the small-learning-rate regime of the fixed-point analysis)
    second_order: bool = True

    def __post_init__(self):
        object.__setattr__(self, "act", as_activation(self.act))
        object.__setattr__(self, "method", as_method(self.method))
        if not self.eta > 0:
            raise DomainError("eta must be positive")
        if self.zeta < 0:
            raise DomainError("zeta must be non-negative")

    @property
    def decay(self) -> float:
        """Gamma-decay coefficient that actually enters the dynamics."""
        if self.method in (Method.BN, Method.WN_GAMMA_DECAY):
            return self.zeta
        return 0.0


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 3): columns Q, R, L
    diverged: bool = False

    @property
    def Q(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def R(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def L(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "Q", "R", "L"])
            for t, row in zip(self.times, self.states):
                writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(times=data[:, 0], states=data[:, 1:4])


@dataclass(frozen=True)
class LrAnalysis:
    lambda_Q: float
    lambda_R: float
    lambda_L: float
    eta_max: float
    eta_eff: float
    stable: bool
    eta: float
    fixed_point: OrderState

    @property
    def lambda_Q_per_eta(self) -> float:
        return self.lambda_Q / self.eta


def ode_rhs(state, params: DynamicsParams) -> np.ndarray:
    """Time derivatives (dQ/dt, dR/dt, dL/dt)."""
    if isinstance(state, OrderState):
        state = state.as_array()
    Q, R, L = float(state[0]), float(state[1]), float(state[2])
    if not (Q > 0 and L > 0):
        raise DomainError(f"Q and L must be positive, got Q={Q}, L={L}")
    R = min(max(R, -1.0), 1.0)
    eta, act = params.eta, params.act
    I1, I2, I3 = _scalar_kernels(Q, R, act)
    eta2 = eta * eta if params.second_order else 0.0

    if params.method is Method.VANILLA:
        dQ = eta * I1 / Q + eta2 * I2 / (2.0 * Q)
        dR = eta * I3 / Q - eta * R * I1 / (Q * Q) - eta2 * R * I2 / (2.0 * Q * Q)
        return np.array([dQ, dR, dQ])

    zeta = params.decay
    dQ = eta * I1 / Q - eta * zeta * Q
    dR = eta * (Q * I3 - R * I1) / L**2 - eta2 * Q * Q * R * I2 / (2.0 * L**4)
    dL = eta2 * Q * Q * I2 / (2.0 * L**3)
    return np.array([dQ, dR, dL])


def integrate(
    initial,
    params: DynamicsParams,
    t_end: float,
    dt: float = 0.01,
    record_every: int = 1,
) -> Trajectory:
    """Fixed-step RK4.  Stops early, flagging divergence, if Q or L leaves (0, 1e6]."""
    if not (dt > 0 and t_end > 0):
        raise DomainError("dt and t_end must be positive")
    y = np.asarray(initial.as_array() if isinstance(initial, OrderState) else initial, dtype=float)
    if params.method is Method.VANILLA:
        y[2] = y[0]
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    times, states = [0.0], [y.copy()]
    diverged = False
    def f(z):
        return ode_rhs(z, params)

    for k in range(1, n_steps + 1):
        h = min(dt, t_end - (k - 1) * dt)
        try:
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
        except DomainError:
            diverged = True
            break
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[1] = min(max(y[1], -1.0), 1.0)
        if not np.all(np.isfinite(y)) or y[0] <= 0 or y[2] <= 0 or max(y[0], y[2]) > DIVERGENCE_LIMIT:
            diverged = True
            times.append(times[-1] + h)
            states.append(y.copy())
            break
        if k % record_every == 0 or k == n_steps:
            times.append(min(k * dt, t_end))
            states.append(y.copy())
    return Trajectory(np.asarray(times), np.asarray(states), diverged)


def fixed_point(params: DynamicsParams, L0: float = 1.0) -> OrderState:
    """First-order fixed point (eta^2 terms neglected).

    With gamma decay the length solves I1(Q, 1) = zeta Q^2, giving
    Q0 = 1/(2 zeta + 1) for ReLU and 1/(1 + zeta) for the identity.
    """
    if params.method is Method.VANILLA:
        return OrderState(1.0, 1.0, 1.0)
    zeta = params.decay
    if params.act is Activation.RELU:
        Q0 = 1.0 / (2.0 * zeta + 1.0)
    else:
        Q0 = 1.0 / (1.0 + zeta)
    return OrderState(Q0, 1.0, L0)


def _eta_max_unregularized(act: Activation) -> float:
    p = closed_partials(1.0, 1.0, act)
    return (p["dI3_dR"] - p["dI1_dR"]) / (p["dI2_dR"] / 2.0)


def lr_analysis(params: DynamicsParams, L0: float = 1.0) -> LrAnalysis:
    """Jacobian eigenvalues at the fixed point and the maximum/effective learning rates.

    ``lambda_R`` is the Jacobian's R-row diagonal entry (the eigenvalue by
    inspection, since the matrix is triangular in that row); ``eta_max`` and
    ``eta_eff`` are computed from their own formulas, so the stability
    biconditional ``lambda_R < 0 <=> eta_max > eta_eff`` is a genuine check.
    """
    fp = fixed_point(params, L0)
    Q0, L0 = fp.Q, fp.L
    eta, act, zeta = params.eta, params.act, params.decay
    p = closed_partials(Q0, 1.0, act)
    I1 = closed_I1(Q0, 1.0, act)

    lambda_Q = eta * p["dI1_dQ"] / Q0 - eta * I1 / Q0**2 - eta * zeta
    lambda_R = (eta / L0**2) * (Q0 * p["dI3_dR"] - I1 - p["dI1_dR"]) - (
        eta**2 * Q0**2 / (2.0 * L0**4)
    ) * p["dI2_dR"]

    if params.method in (Method.BN, Method.WN_GAMMA_DECAY):
        eta_max = ((Q0 * p["dI3_dR"] - p["dI1_dR"]) / Q0 - zeta * Q0) / (p["dI2_dR"] / 2.0)
        eta_eff = eta * Q0 / L0**2
    elif params.method is Method.WN:
        eta_max = _eta_max_unregularized(act)
        eta_eff = eta / L0**2
    else:
        eta_max = _eta_max_unregularized(act)
        eta_eff = eta
    return LrAnalysis(
        lambda_Q=float(lambda_Q),
        lambda_R=float(lambda_R),
        lambda_L=0.0,
        eta_max=float(eta_max),
        eta_eff=float(eta_eff),
        stable=bool(lambda_R < 0),
        eta=eta,
        fixed_point=fp,
    )


def numerical_jacobian(state, params: DynamicsParams, h: float = 1e-6) -> np.ndarray:
    """Finite-difference Jacobian of ``ode_rhs``; one-sided in R at R = +-1."""
    y = np.asarray(state.as_array() if isinstance(state, OrderState) else state, dtype=float)
    J = np.empty((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        if k == 1 and y[1] + h > 1.0:
            J[:, k] = (ode_rhs(y, params) - ode_rhs(y - e, params)) / h
        elif k == 1 and y[1] - h < -1.0:
            J[:, k] = (ode_rhs(y + e, params) - ode_rhs(y, params)) / h
        else:
            J[:, k] = (ode_rhs(y + e, params) - ode_rhs(y - e, params)) / (2.0 * h)
    return J
