"""Generalization-error curves for the linear-teacher problem.

Vanilla least squares (identity and ReLU students), the ridge-like
WN + gamma-decay curve, and the zero-temperature free energy of a ReLU
student whose stationary point gives the ReLU curve.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from scipy.optimize import minimize_scalar

from .core import DomainError, Method, PoleError, as_method

__all__ = [
    "GenCurvePoint",
    "FreeEnergyParams",
    "eps_id_ord",
    "eps_relu_ord",
    "eps_id_wn",
    "eps_id_wn_fd",
    "G_resolvent",
    "free_energy",
    "free_energy_zero_temp",
    "solve_free_energy",
    "equilibrium",
    "write_curve_csv",
]

_POLE_TOL = 1e-12


@dataclass(frozen=True)
class GenCurvePoint:
    alpha: float
    eps: float
    method: Method
    S: float
    zeta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "method", as_method(self.method))
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")


def eps_id_ord(alpha: float, S: float) -> float:
    if alpha < 0 or S < 0:
        raise DomainError("alpha and S must be non-negative")
    if abs(alpha - 1.0) < _POLE_TOL:
        raise PoleError("identity least-squares error diverges at alpha = 1")
    if alpha < 1.0:
        return 1.0 - alpha + alpha * S / (1.0 - alpha)
    return S / (alpha - 1.0)


def eps_relu_ord(alpha: float, S: float) -> float:
    if alpha < 0 or S < 0:
        raise DomainError("alpha and S must be non-negative")
    if abs(alpha - 2.0) < _POLE_TOL:
        raise PoleError("ReLU least-squares error diverges at alpha = 2")
    if alpha > 2.0:
        raise DomainError("ReLU curve defined for 0 <= alpha < 2")
    return 1.0 - alpha / 4.0 + alpha * S / (2.0 * (2.0 - alpha))


# ---------------------------------------------------------------------------
# WN + gamma decay, linear student
# ---------------------------------------------------------------------------

def _root(alpha: float, zeta: float) -> float:
    prod = (zeta + (1.0 + math.sqrt(alpha)) ** 2) * (zeta + (1.0 - math.sqrt(alpha)) ** 2)
    if prod < 0:
        raise DomainError("negative square-root argument")
    return math.sqrt(prod)


def G_resolvent(alpha: float, zeta: float) -> float:
    """G = [1 - alpha - zeta + sqrt((zeta + (1+sqrt a)^2)(zeta + (1-sqrt a)^2))] / (2 zeta)."""
    if not zeta > 0:
        raise DomainError("zeta must be positive")
    return (1.0 - alpha - zeta + _root(alpha, zeta)) / (2.0 * zeta)


def _check_wn(alpha, zeta, S):
    if not zeta > 0:
        raise DomainError("zeta must be positive")
    if alpha < 0 or S < 0:
        raise DomainError("alpha and S must be non-negative")


def eps_id_wn(alpha: float, zeta: float, S: float) -> float:
    """S d(zeta G)/dzeta - zeta^2 dG/dzeta, derivatives taken analytically.

    The product under the root equals (1 - alpha + zeta)^2 + 4 alpha zeta =: D^2,
    so with D' = (1 + alpha + zeta)/D

        d(zeta G)/dzeta   = (D' - 1)/2
        zeta^2 dG/dzeta   = (zeta D' - 1 + alpha - D)/2
    """
    _check_wn(alpha, zeta, S)
    D = _root(alpha, zeta)
    dD = (1.0 + alpha + zeta) / D
    d_zG = 0.5 * (dD - 1.0)
    z2_dG = 0.5 * (zeta * dD - 1.0 + alpha - D)
    return S * d_zG - z2_dG


def eps_id_wn_fd(alpha: float, zeta: float, S: float, rel_step: float = 1e-6) -> float:
    """Central finite-difference evaluation of the same expression (cross-check)."""
    _check_wn(alpha, zeta, S)
    h = rel_step * zeta
    zG = lambda z: z * G_resolvent(alpha, z)  # noqa: E731
    d_zG = (zG(zeta + h) - zG(zeta - h)) / (2.0 * h)
    dG = (G_resolvent(alpha, zeta + h) - G_resolvent(alpha, zeta - h)) / (2.0 * h)
    return S * d_zG - zeta * zeta * dG


# ---------------------------------------------------------------------------
# free energy, ReLU student / noisy linear teacher
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FreeEnergyParams:
    gamma: float
    R: float
    q: float
    alpha: float
    S: float
    beta_inv_temp: float = math.inf

    def __post_init__(self):
        if not self.q * self.q > self.gamma * self.gamma:
            raise DomainError("need q^2 > gamma^2")
        if not self.beta_inv_temp > 0:
            raise DomainError("inverse temperature must be positive")
        if abs(self.R) > 1.0:
            raise DomainError("|R| must not exceed 1")


def free_energy(p: FreeEnergyParams) -> float:
    """-beta f at finite inverse temperature, term by term.

    Infinite ``beta_inv_temp`` delegates to ``free_energy_zero_temp``.
    """
    if math.isinf(p.beta_inv_temp):
        return free_energy_zero_temp(p.gamma, p.R, p.q, p.alpha, p.S)
    g, R, q, a, S, b = p.gamma, p.R, p.q, p.alpha, p.S, p.beta_inv_temp
    d = q * q - g * g
    return (
        0.5 * (g * g - g * g * R * R) / d
        + 0.5 * math.log(d)
        - 0.25 * a * math.log1p(b * d)
        - a * b * (1.0 - 2.0 * g * R + g * g + S) / (4.0 * (1.0 + b * d))
        - 0.25 * a * b
        - 0.25 * a * b * S
    )


def free_energy_zero_temp(gamma: float, R: float, q: float, alpha: float, S: float) -> float:
    """beta -> infinity limit of -beta f with the beta-only constants removed.

    ln(1 + beta d) is replaced by ln d and beta X/(1 + beta d) by X/d (the
    a = 1 regime); what is dropped does not depend on (gamma, R).
    """
    d = q * q - gamma * gamma
    if not d > 0:
        raise DomainError("need q^2 > gamma^2")
    return (
        0.5 * (gamma * gamma - gamma * gamma * R * R) / d
        + 0.5 * math.log(d)
        - 0.25 * alpha * math.log(d)
        - alpha * (1.0 - 2.0 * gamma * R + gamma * gamma + S) / (4.0 * d)
    )


def solve_free_energy(alpha: float, S: float, q: float = 3.0, xtol: float = 1e-12) -> tuple[float, float]:
    """Stationary (gamma, R) of the zero-temperature free energy.

    The stationary point is a saddle of f: a minimum along R and a maximum
    along gamma.  It is found by nested bounded scalar searches, inner
    ``min_R f`` on [-1, 1] and outer ``max_gamma`` on (0, q).
    """
    if not 0 < alpha < 2:
        raise DomainError("zero-temperature solution requires 0 < alpha < 2")
    f = lambda g, R: -free_energy_zero_temp(g, R, q, alpha, S)  # noqa: E731
    opts = {"xatol": xtol, "maxiter": 500}

    def inner(g):
        res = minimize_scalar(lambda R: f(g, R), bounds=(-1.0, 1.0), method="bounded", options=opts)
        return res.x, res.fun

    eps = 1e-9 * q
    outer = minimize_scalar(lambda g: -inner(g)[1], bounds=(eps, q - eps), method="bounded", options=opts)
    gamma = float(outer.x)
    return gamma, float(inner(gamma)[0])


def equilibrium(alpha: float, S: float) -> tuple[float, float, float]:
    """(gamma^2, gamma R, eps) at zero temperature."""
    if alpha < 0 or S < 0:
        raise DomainError("alpha and S must be non-negative")
    if abs(alpha - 2.0) < _POLE_TOL:
        raise PoleError("equilibrium diverges at alpha = 2")
    if alpha > 2.0:
        raise DomainError("equilibrium defined for 0 <= alpha < 2")
    gamma_sq = alpha / 2.0 + alpha * S / (2.0 - alpha)
    gamma_R = alpha / 2.0
    return gamma_sq, gamma_R, eps_relu_ord(alpha, S)


def write_curve_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "eps", "method", "S", "zeta"])
        for p in points:
            writer.writerow([f"{p.alpha:.17g}", f"{p.eps:.17g}", p.method.value, f"{p.S:.17g}", f"{p.zeta:.17g}"])
