"""Gaussian expectations behind the order-parameter dynamics.

With the student field ``s = w~.x`` and teacher field ``t = w*.x`` jointly
Gaussian,

    (s, t) ~ N(0, [[Q^2, QR], [QR, 1]]),

and the gradient factor ``delta = g'(s) (g(t) - g(s))``, the three kernels are

    I1 = E[delta s],   I2 = E[delta^2],   I3 = E[delta t].

``I2`` uses ``x.x ~= 1``, exact in the large-N limit.  Closed forms exist for
the identity and ReLU activations; the quadrature and Monte Carlo routines
below evaluate the same expectations from the integrand alone and serve as
independent checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss

from .core import Activation, DomainError, as_activation, check_overlap

__all__ = [
    "GaussIntegrals",
    "closed_I1",
    "closed_I2",
    "closed_I3",
    "closed_integrals",
    "closed_partials",
    "mc_integrals",
    "quad_integrals",
    "gaussian_expectation_2d",
    "gen_integral",
]


@dataclass(frozen=True)
class GaussIntegrals:
    I1: float
    I2: float
    I3: float
    # Monte Carlo standard errors; None for deterministic evaluations.
    stderr: tuple[float, float, float] | None = None

    def as_array(self) -> np.ndarray:
        return np.array([self.I1, self.I2, self.I3])


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def _relu_terms(R):
    # A = pi R + 2 sqrt(1-R^2) + 2 R asin R   (4 pi E[relu(s/Q) relu(t)])
    # B = pi + 2 R sqrt(1-R^2) + 2 asin R     (4 pi E[1{s>0} relu(t) t])
    R = np.clip(R, -1.0, 1.0)
    root = np.sqrt(1.0 - R * R)
    asin = np.arcsin(R)
    A = np.pi * R + 2.0 * root + 2.0 * R * asin
    B = np.pi + 2.0 * R * root + 2.0 * asin
    return A, B, root, asin


def closed_I1(Q, R, act=Activation.RELU):
    check_overlap(R)
    if as_activation(act) is Activation.IDENTITY:
        return Q * R - Q * Q
    A, _, _, _ = _relu_terms(R)
    return Q * A / (4.0 * np.pi) - Q * Q / 2.0


def closed_I2(Q, R, act=Activation.RELU):
    check_overlap(R)
    if as_activation(act) is Activation.IDENTITY:
        return 1.0 - 2.0 * Q * R + Q * Q
    A, B, _, _ = _relu_terms(R)
    return Q * Q / 2.0 + B / (4.0 * np.pi) - Q * A / (2.0 * np.pi)


def closed_I3(Q, R, act=Activation.RELU):
    check_overlap(R)
    if as_activation(act) is Activation.IDENTITY:
        return 1.0 - Q * R
    _, B, _, _ = _relu_terms(R)
    return B / (4.0 * np.pi) - Q * R / 2.0


def _scalar_kernels(Q: float, R: float, act: Activation) -> tuple[float, float, float]:
    # same closed forms on plain floats; the ODE right-hand side calls this per stage
    if act is Activation.IDENTITY:
        return Q * R - Q * Q, 1.0 - 2.0 * Q * R + Q * Q, 1.0 - Q * R
    R = min(max(R, -1.0), 1.0)
    root = math.sqrt(1.0 - R * R)
    asin = math.asin(R)
    A = math.pi * R + 2.0 * root + 2.0 * R * asin
    B = math.pi + 2.0 * R * root + 2.0 * asin
    four_pi = 4.0 * math.pi
    return (
        Q * A / four_pi - Q * Q / 2.0,
        Q * Q / 2.0 + B / four_pi - 2.0 * Q * A / four_pi,
        B / four_pi - Q * R / 2.0,
    )


def closed_integrals(Q: float, R: float, act=Activation.RELU) -> GaussIntegrals:
    return GaussIntegrals(
        float(closed_I1(Q, R, act)),
        float(closed_I2(Q, R, act)),
        float(closed_I3(Q, R, act)),
    )


def closed_partials(Q: float, R: float, act=Activation.RELU) -> dict[str, float]:
    """Analytic first derivatives of I1, I2, I3 with respect to Q and R.

    The ReLU forms stay finite at R = +-1: the square-root singularities of
    the individual terms cancel.
    """
    check_overlap(R)
    if as_activation(act) is Activation.IDENTITY:
        return {
            "dI1_dQ": R - 2.0 * Q, "dI1_dR": Q,
            "dI2_dQ": 2.0 * Q - 2.0 * R, "dI2_dR": -2.0 * Q,
            "dI3_dQ": -R, "dI3_dR": -Q,
        }
    A, _, root, asin = _relu_terms(R)
    dA = np.pi + 2.0 * asin
    dB = 4.0 * root
    return {
        "dI1_dQ": float(A / (4.0 * np.pi) - Q),
        "dI1_dR": float(Q * dA / (4.0 * np.pi)),
        "dI2_dQ": float(Q - A / (2.0 * np.pi)),
        "dI2_dR": float(dB / (4.0 * np.pi) - Q * dA / (2.0 * np.pi)),
        "dI3_dQ": float(-R / 2.0),
        "dI3_dR": float(dB / (4.0 * np.pi) - Q / 2.0),
    }


# ---------------------------------------------------------------------------
# deterministic quadrature
# ---------------------------------------------------------------------------

def _kink_angles(forms: Sequence[tuple[float, float]]) -> np.ndarray:
    angles = [0.0, 2.0 * np.pi]
    for a1, a2 in forms:
        if a1 == 0.0 and a2 == 0.0:
            continue
        theta = np.arctan2(a1, -a2) % np.pi
        angles += [theta, theta + np.pi]
    return np.unique(np.round(np.asarray(angles), 15))


def gaussian_expectation_2d(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    kinks: Sequence[tuple[float, float]] = (),
    order: int = 64,
) -> float:
    """E[f(z1, z2)] for independent standard normal z1, z2.

    Polar coordinates: Gauss-Laguerre in ``u = r^2/2`` and Gauss-Legendre in
    the angle, with the angular range split along every line
    ``a1 z1 + a2 z2 = 0`` listed in ``kinks``.  For integrands that are
    polynomial in r on each sector (ReLU and identity networks) the rule is
    exact up to rounding.
    """
    u, wu = laggauss(order)
    r = np.sqrt(2.0 * u)
    x, wx = leggauss(order)
    edges = _kink_angles(kinks)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo < 1e-14:
            continue
        theta = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        wt = 0.5 * (hi - lo) * wx
        z1 = np.outer(r, np.cos(theta))
        z2 = np.outer(r, np.sin(theta))
        total += wu @ f(z1, z2) @ wt
    return float(total / (2.0 * np.pi))


def _fields(Q, R, z1, z2):
    # explicit Cholesky factor of [[Q^2, QR], [QR, 1]]; valid at R = +-1 too
    s = Q * z1
    t = R * z1 + np.sqrt(max(1.0 - R * R, 0.0)) * z2
    return s, t


def quad_integrals(Q: float, R: float, act=Activation.RELU, order: int = 64) -> GaussIntegrals:
    check_overlap(R)
    act = as_activation(act)
    kinks = [(1.0, 0.0), (R, np.sqrt(max(1.0 - R * R, 0.0)))]

    def integrand(k):
        def f(z1, z2):
            s, t = _fields(Q, R, z1, z2)
            delta = act.prime(s) * (act(t) - act(s))
            return (delta * s, delta * delta, delta * t)[k]
        return f

    vals = [gaussian_expectation_2d(integrand(k), kinks, order) for k in range(3)]
    return GaussIntegrals(*vals)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def mc_integrals(
    Q: float,
    R: float,
    act=Activation.RELU,
    n_samples: int = 10**6,
    seed: int = 0,
    order: int = 64,
) -> GaussIntegrals:
    """Monte Carlo estimate of (I1, I2, I3) with standard errors.

    ``n_samples=0`` selects the deterministic quadrature instead.
    """
    check_overlap(R)
    if n_samples == 0:
        return quad_integrals(Q, R, act, order)
    if n_samples < 10**4:
        raise DomainError("Monte Carlo estimate needs at least 1e4 samples")
    act = as_activation(act)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, n_samples))
    s, t = _fields(Q, R, z[0], z[1])
    delta = act.prime(s) * (act(t) - act(s))
    draws = np.stack([delta * s, delta * delta, delta * t])
    means = draws.mean(axis=1)
    errs = draws.std(axis=1, ddof=1) / np.sqrt(n_samples)
    return GaussIntegrals(*map(float, means), stderr=tuple(map(float, errs)))


# ---------------------------------------------------------------------------
# generalization integral
# ---------------------------------------------------------------------------

def gen_integral(
    gamma: float,
    R: float,
    teacher=Activation.IDENTITY,
    student=Activation.IDENTITY,
    mode: str = "closed",
    order: int = 64,
) -> float:
    """Generalization error of a student with length ``gamma`` and overlap ``R``.

    E[(g*(h1) - g(gamma R h1 + gamma sqrt(1-R^2) h2))^2] over standard normal
    h1, h2, with a noiseless teacher.
    """
    teacher, student = as_activation(teacher), as_activation(student)
    if teacher is not Activation.IDENTITY:
        raise DomainError("only a linear teacher is supported")
    check_overlap(R)
    if mode == "closed":
        if student is Activation.IDENTITY:
            return float(1.0 + gamma * gamma - 2.0 * gamma * R)
        return float(1.0 + gamma * gamma / 2.0 - gamma * R)
    if mode != "quadrature":
        raise ValueError(f"unknown mode {mode!r}")
    root = np.sqrt(max(1.0 - R * R, 0.0))

    def f(h1, h2):
        return (h1 - student(gamma * R * h1 + gamma * root * h2)) ** 2

    return gaussian_expectation_2d(f, [(gamma * R, gamma * root)], order)
