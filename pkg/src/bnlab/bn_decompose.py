"""Batch-statistic noise as an explicit penalty on the BN scale.

For a single normalized unit, averaging a GLM loss over the randomness of the
batch mean and standard deviation gives, to O(1/M),

    E_B[loss(BN)] ~= loss(PN) + zeta(h) * gamma^2

where PN uses population statistics.  ``decompose_check`` estimates the left
side by drawing batches and compares it with the right side assembled from
``zeta_of_h``.

Batches are drawn i.i.d. (with replacement) from the data set and the
resulting statistics are applied to every sample, i.e. the batch noise is
treated as independent of the sample being normalized.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, gammaln
from scipy.stats import kurtosis

from .core import DegenerateError, DomainError
from .sgd_lab import StudentState

LOSSES = ("identity", "softplus")
CONVENTIONS = ("no_bias", "bias")


@dataclass(frozen=True)
class PopulationStats:
    mu_P: float
    sigma_P: float
    rho: float

    def __post_init__(self):
        if not self.sigma_P > 0:
            raise DegenerateError("population standard deviation must be positive")


def estimate_population(h_samples) -> PopulationStats:
    """Mean, biased standard deviation and excess kurtosis."""
    h = np.asarray(h_samples, dtype=float).ravel()
    if h.size < 1000:
        raise DomainError("need at least 1000 samples")
    sigma = float(h.std())
    if not sigma > 0:
        raise DegenerateError("samples have zero variance")
    return PopulationStats(float(h.mean()), sigma, float(kurtosis(h, fisher=True, bias=True)))


# ---------------------------------------------------------------------------
# priors of the batch statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentCheck:
    name: str
    empirical: float
    predicted: float
    stderr: float

    @property
    def rel_dev(self) -> float:
        if self.predicted == 0:
            return float("nan")
        return (self.empirical - self.predicted) / self.predicted

    @property
    def z(self) -> float:
        return (self.empirical - self.predicted) / self.stderr if self.stderr > 0 else math.inf

    def passes(self, n_sigma: float = 3.0) -> bool:
        return abs(self.empirical - self.predicted) <= n_sigma * self.stderr


@dataclass(frozen=True)
class PriorReport:
    population: PopulationStats
    M: int
    trials: int
    checks: tuple[MomentCheck, ...]

    def passes(self, n_sigma: float = 3.0) -> bool:
        return all(c.passes(n_sigma) for c in self.checks)

    def by_name(self) -> dict[str, MomentCheck]:
        return {c.name: c for c in self.checks}


def _var_with_stderr(x: np.ndarray) -> tuple[float, float]:
    # standard error of the sample variance from the fourth central moment
    d = x - x.mean()
    v = float(np.mean(d * d))
    m4 = float(np.mean(d**4))
    return v, math.sqrt(max(m4 - v * v, 0.0) / x.size)


def batch_statistics(h: np.ndarray, M: int, trials: int, rng: np.random.Generator,
                     centered: bool = True, chunk: int = 20000) -> tuple[np.ndarray, np.ndarray]:
    """``trials`` i.i.d. batches of size M: batch means and biased standard deviations.

    ``centered=False`` takes the spread about zero (root mean square) instead.
    """
    mus, sigmas = [], []
    for start in range(0, trials, chunk):
        n = min(chunk, trials - start)
        hb = h[rng.integers(0, h.size, size=(n, M))]
        mus.append(hb.mean(axis=1))
        sigmas.append(hb.std(axis=1) if centered else np.sqrt(np.mean(hb * hb, axis=1)))
    return np.concatenate(mus), np.concatenate(sigmas)


def verify_priors(h_samples, M: int, trials: int = 10**5, seed: int = 0) -> PriorReport:
    """Compare batch-statistic moments with the Gaussian priors

        mu_B ~ N(mu_P, sigma_P^2 / M),   sigma_B ~ N(sigma_P, sigma_P^2 (rho + 2) / (4M)).

    The second variance is quoted for unit sigma_P in the usual statement; the
    sigma_P^2 factor restores units.
    """
    if M < 8:
        raise DomainError("M >= 8 required")
    if trials < 10**4:
        raise DomainError("trials >= 1e4 required")
    h = np.asarray(h_samples, dtype=float).ravel()
    pop = estimate_population(h)
    rng = np.random.default_rng(seed)
    mu_B, sigma_B = batch_statistics(h, M, trials, rng)

    var_mu, se_var_mu = _var_with_stderr(mu_B)
    var_sigma, se_var_sigma = _var_with_stderr(sigma_B)
    s2 = pop.sigma_P**2
    checks = (
        MomentCheck("mean_mu_B", float(mu_B.mean()), pop.mu_P, math.sqrt(var_mu / trials)),
        MomentCheck("var_mu_B", var_mu, s2 / M, se_var_mu),
        MomentCheck("var_sigma_B", var_sigma, s2 * (pop.rho + 2.0) / (4.0 * M), se_var_sigma),
    )
    return PriorReport(pop, M, trials, checks)


# ---------------------------------------------------------------------------
# zeta(h)
# ---------------------------------------------------------------------------

def _loss(u: np.ndarray, y: np.ndarray, loss: str) -> np.ndarray:
    if loss == "identity":
        return 0.5 * (y - u) ** 2
    # Bernoulli GLM with softplus partition function A(u) = log(1 + e^u)
    return np.logaddexp(0.0, u) - y * u


def _A2(u: np.ndarray, loss: str) -> np.ndarray:
    if loss == "identity":
        return np.ones_like(u)
    s = expit(u)
    return s * (1.0 - s)


@dataclass(frozen=True)
class ZetaTerms:
    zeta: float
    fisher_term: float
    sigmoid_term: float
    fisher: float
    rho: float
    convention: str
    variant: str


def zeta_of_h(
    X: np.ndarray,
    w: np.ndarray,
    gamma: float,
    beta_shift: float,
    M: int,
    loss: str = "identity",
    convention: str = "no_bias",
    variant: str = "sigmoid",
    fisher: str = "hessian",
    y: np.ndarray | None = None,
) -> ZetaTerms:
    """Penalty coefficient zeta(h) and its two parts.

    ``fisher_term = (rho + 2)/(8M) * I`` comes from the noise in sigma_B and
    ``sigmoid_term = mean(s(h_bar))/(2M)`` from the noise in mu_B.  The
    latter only enters ``zeta`` under the ``bias`` convention (mu_B
    subtracted); with ``no_bias`` it is reported but not added.

    ``I`` is the GLM Fisher information of gamma, ``mean(A''(h_bar) z^2)``
    (``fisher="hessian"``), or the empirical mean squared score
    ``mean((dloss/dgamma)^2)`` (``fisher="score"``, needs labels).
    ``variant`` picks ``s = sigmoid`` or ``s = sigmoid (1 - sigmoid)`` for the
    softplus loss; the identity loss has A'' = 1 either way.
    """
    if loss not in LOSSES:
        raise ValueError(f"unknown loss {loss!r}")
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    if variant not in ("sigmoid", "sigmoid_prime"):
        raise ValueError(f"unknown variant {variant!r}")
    if M < 1:
        raise DomainError("M must be positive")
    h = np.asarray(X, dtype=float) @ np.asarray(w, dtype=float)
    if convention == "bias":
        mu, sigma = float(h.mean()), float(h.std())
    else:
        # moments about the frozen zero center
        mu, sigma = 0.0, float(np.sqrt(np.mean(h * h)))
    if not sigma > 0:
        raise DegenerateError("pre-activations have zero variance")
    z = (h - mu) / sigma
    rho = float(np.mean(z**4)) - 3.0
    h_bar = gamma * z + beta_shift

    if fisher == "hessian":
        info = float(np.mean(_A2(h_bar, loss) * z * z))
    elif fisher == "score":
        if y is None:
            raise ValueError("score form of the Fisher information needs labels")
        if loss == "identity":
            score = (h_bar - np.asarray(y)) * z
        else:
            score = (expit(h_bar) - np.asarray(y)) * z
        info = float(np.mean(score * score))
    else:
        raise ValueError(f"unknown fisher form {fisher!r}")

    if loss == "identity":
        s_mean = 1.0
    elif variant == "sigmoid":
        s_mean = float(np.mean(expit(h_bar)))
    else:
        s_mean = float(np.mean(_A2(h_bar, loss)))

    fisher_term = (rho + 2.0) / (8.0 * M) * info
    sigmoid_term = s_mean / (2.0 * M)
    zeta = fisher_term + (sigmoid_term if convention == "bias" else 0.0)
    return ZetaTerms(zeta, fisher_term, sigmoid_term, info, rho, convention, variant)


def linear_zeta_exact(M: int, lam: float = 1.0) -> float:
    """Exact-in-M penalty for a linear unit with Gaussian inputs.

    lam * (1 + M G((M-3)/2) / (2 G((M-1)/2)) - sqrt(2M) G((M-2)/2) / G((M-1)/2)),
    G the gamma function, evaluated in log space.
    """
    if M < 5:
        raise DomainError("M >= 5 required")
    r1 = math.exp(gammaln((M - 3) / 2.0) - gammaln((M - 1) / 2.0))
    r2 = math.exp(gammaln((M - 2) / 2.0) - gammaln((M - 1) / 2.0))
    return lam * (1.0 + M * r1 / 2.0 - math.sqrt(2.0 * M) * r2)


# ---------------------------------------------------------------------------
# decomposition check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecompositionReport:
    e_bn_mc: float
    mc_stderr: float
    pn_loss: float
    zeta: float
    fisher_term: float
    sigmoid_term: float
    gamma: float
    residual: float
    M: int
    N: int
    convention: str

    @property
    def penalty(self) -> float:
        return self.zeta * self.gamma**2

    @property
    def gap(self) -> float:
        return self.e_bn_mc - self.pn_loss

    def within(self, n_sigma: float = 3.0, rel: float = 0.1) -> bool:
        return abs(self.residual) <= max(n_sigma * self.mc_stderr, rel * self.penalty)

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _bn_losses(h, y, gamma, beta, mu_B, sigma_B, loss, chunk=256):
    if loss == "identity":
        # closed-form average over samples from the sufficient statistics
        P = h.size
        Sy, Syy, Sh, Shh, Shy = y.sum(), y @ y, h.sum(), h @ h, h @ y
        a = gamma / sigma_B
        b = beta - a * mu_B
        # mean over j of (y_j - a h_j - b)^2 / 2
        return 0.5 * (Syy + a * a * Shh + P * b * b - 2 * a * Shy - 2 * b * Sy + 2 * a * b * Sh) / P
    out = np.empty(mu_B.size)
    for start in range(0, mu_B.size, chunk):
        sl = slice(start, start + chunk)
        u = gamma * (h[None, :] - mu_B[sl, None]) / sigma_B[sl, None] + beta
        out[sl] = _loss(u, y[None, :], loss).mean(axis=1)
    return out


def decompose_check(
    X: np.ndarray,
    y: np.ndarray,
    student: StudentState,
    M: int,
    n_mc: int = 10**5,
    seed: int = 0,
    loss: str = "identity",
    convention: str = "no_bias",
    variant: str = "sigmoid",
) -> DecompositionReport:
    """Monte Carlo left side against ``pn_loss + zeta * gamma^2``.

    Under ``no_bias`` no mean is subtracted anywhere and the batch and
    population spreads are root mean squares about zero, so mu_B plays no
    part.  ``bias`` subtracts mu_B and mu_P and uses centered standard
    deviations.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    h = X @ student.w
    gamma, beta = float(student.gamma), float(student.beta_shift)
    use_mean = convention == "bias"
    mu_P = float(h.mean()) if use_mean else 0.0
    sigma_P = float(h.std()) if use_mean else float(np.sqrt(np.mean(h * h)))
    if not sigma_P > 0:
        raise DegenerateError("pre-activations have zero variance")

    pn = float(np.mean(_loss(gamma * (h - mu_P) / sigma_P + beta, y, loss)))
    rng = np.random.default_rng(seed)
    mu_B, sigma_B = batch_statistics(h, M, n_mc, rng, centered=use_mean)
    sigma_B = np.sqrt(sigma_B**2 + 1e-12)
    if not use_mean:
        mu_B = np.zeros_like(mu_B)
    draws = _bn_losses(h, y, gamma, beta, mu_B, sigma_B, loss)
    e_bn = float(draws.mean())
    stderr = float(draws.std(ddof=1) / math.sqrt(n_mc))
    if stderr == 0.0:
        stderr = np.finfo(float).eps * max(abs(e_bn), 1.0)

    terms = zeta_of_h(X, student.w, gamma, beta, M, loss, convention, variant)
    residual = e_bn - (pn + terms.zeta * gamma**2)
    return DecompositionReport(
        e_bn_mc=e_bn,
        mc_stderr=stderr,
        pn_loss=pn,
        zeta=terms.zeta,
        fisher_term=terms.fisher_term,
        sigmoid_term=terms.sigmoid_term,
        gamma=gamma,
        residual=float(residual),
        M=M,
        N=X.shape[1],
        convention=convention,
    )
