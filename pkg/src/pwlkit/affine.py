"""Affine functions: the atom every piecewise-linear representation is built from."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError


def as_vector(v, name="vector"):
    """Coerce to a read-only 1-D float array."""
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {a.shape}")
    a = a.copy()
    a.setflags(write=False)
    return a


class AffineFunction:
    """A linear map plus bias, ``value(x) = jacobian . x + bias``."""

    __slots__ = ("jacobian", "bias")

    def __init__(self, jacobian, bias):
        self.jacobian = as_vector(jacobian, "jacobian")
        self.bias = float(bias)

    @property
    def dim(self):
        return self.jacobian.shape[0]

    def check_dim(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.dim:
            raise DimensionMismatchError(self.dim, x.shape[-1])
        return x

    def value(self, x):
        """Evaluate at a single point."""
        x = self.check_dim(x)
        return float(self.jacobian @ x + self.bias)

    def values(self, points):
        """Evaluate at an (N, n) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None] if self.dim == 1 else points[None, :]
        if points.shape[1] != self.dim:
            raise DimensionMismatchError(self.dim, points.shape[1], what="points")
        return points @ self.jacobian + self.bias

    def scaled(self, c):
        return AffineFunction(c * self.jacobian, c * self.bias)

    def plus(self, other):
        if other.dim != self.dim:
            raise DimensionMismatchError(self.dim, other.dim, what="affine operand")
        return AffineFunction(self.jacobian + other.jacobian, self.bias + other.bias)

    def __neg__(self):
        return self.scaled(-1.0)

    def __repr__(self):
        return f"AffineFunction(jacobian={self.jacobian.tolist()}, bias={self.bias})"

    def same_as(self, other, tol=0.0):
        """Coefficient-wise equality within ``tol``."""
        return (
            self.dim == other.dim
            and np.all(np.abs(self.jacobian - other.jacobian) <= tol)
            and abs(self.bias - other.bias) <= tol
        )


def affine_zero(dim):
    return AffineFunction(np.zeros(dim), 0.0)


def stack_affines(affines):
    """Pack affine functions into a coefficient matrix (N, n) plus bias vector."""
    J = np.array([a.jacobian for a in affines], dtype=float)
    b = np.array([a.bias for a in affines], dtype=float)
    return J, b
