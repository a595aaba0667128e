"""Numerical laboratory for batch normalization in a teacher-student perceptron."""
from .core import (
    Activation,
    DegenerateError,
    DomainError,
    Method,
    OrderState,
    PoleError,
)

__version__ = "0.1.0"
