"""Shared types: activation and method tags, order parameters, errors."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a closed form."""


class PoleError(DomainError):
    """A generalization-error curve was evaluated at its divergence point."""


class DegenerateError(ValueError):
    """Population statistics are undefined (zero variance)."""


class Activation(str, enum.Enum):
    IDENTITY = "identity"
    RELU = "relu"

    def __call__(self, x):
        if self is Activation.IDENTITY:
            return x
        return np.maximum(x, 0.0)

    def prime(self, x):
        # ReLU'(0) := 0
        x = np.asarray(x, dtype=float)
        if self is Activation.IDENTITY:
            return np.ones_like(x)
        return (x > 0).astype(float)


class Method(str, enum.Enum):
    BN = "bn"
    WN = "wn"
    WN_GAMMA_DECAY = "wn_gamma_decay"
    VANILLA = "sgd"

    @property
    def normalized(self) -> bool:
        return self is not Method.VANILLA


def as_activation(act) -> Activation:
    return act if isinstance(act, Activation) else Activation(str(act).lower())


def as_method(method) -> Method:
    return method if isinstance(method, Method) else Method(str(method).lower())


@dataclass(frozen=True)
class OrderState:
    """Order parameters of a normalized student.

    Q is the length of the normalized weight vector (the BN scale gamma),
    R the overlap with the teacher and L the length of the raw weights.
    """

    Q: float
    R: float
    L: float = 1.0

    def __post_init__(self):
        if not (self.Q > 0 and self.L > 0):
            raise DomainError(f"Q and L must be positive, got Q={self.Q}, L={self.L}")
        if not -1.0 <= self.R <= 1.0:
            raise DomainError(f"R must lie in [-1, 1], got {self.R}")

    def as_array(self) -> np.ndarray:
        return np.array([self.Q, self.R, self.L])


def check_overlap(R) -> None:
    if np.any(np.abs(np.asarray(R)) > 1.0):
        raise DomainError(f"overlap R must satisfy |R| <= 1, got {R}")
