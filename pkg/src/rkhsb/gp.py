"""Datasets and exact GP posterior prediction via a Cholesky factor.

With ``G = (K + sigma_n^2 I)^{-1}`` the posterior is

    mean(x) = K_{x,X} G Y
    var(x)  = k(x, x) - K_{x,X} G K_{X,x}

and ``W_x = K_{x,X} G`` is the weight vector that maps observations to the
prediction. The bounds in :mod:`rkhsb.bounds` are all functions of ``W_x``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import ConditioningError, InputError

VAR_FLOOR = -1e-12


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs ``X`` (m, d), outputs ``y`` (m,) and the noise support ``sigma_v``."""

    X: np.ndarray
    y: np.ndarray
    sigma_v: float = 0.0

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.y, dtype=float, copy=True).reshape(-1)
        if X.ndim != 2 or X.shape[0] < 1:
            raise InputError("dataset needs at least one input row")
        if y.shape[0] != X.shape[0]:
            raise InputError(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InputError("dataset contains non-finite entries")
        if not (math.isfinite(self.sigma_v) and self.sigma_v >= 0):
            raise InputError(f"sigma_v must be >= 0, got {self.sigma_v}")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.dim)] + ["y"])
            for row, yi in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])

    @classmethod
    def from_csv(cls, path, sigma_v=0.0):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise InputError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        d = len(header) - 1
        if d < 1 or header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(d)]:
            raise InputError(f"{path}: header must be x1..xd,y, got {header}")
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
        if data.ndim != 2 or data.shape[1] != d + 1:
            raise InputError(f"{path}: ragged rows")
        return cls(data[:, :d], data[:, d], sigma_v)


def as_points(x, dim):
    """Normalize a query to an ``(n, d)`` array.

    Accepts a scalar (d = 1), a single point of shape ``(d,)``, a batch
    ``(n, d)``, or for d = 1 a flat array of n scalars. Returns the array and
    whether the input denoted a single point.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if dim != 1:
            raise InputError(f"scalar query for a {dim}-dimensional input space")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] == dim:
            return arr.reshape(1, dim), True
        if dim == 1:
            return arr.reshape(-1, 1), False
        raise InputError(f"query of length {arr.shape[0]} for a {dim}-dimensional input space")
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InputError(f"query shape {arr.shape} does not match input dimension {dim}")
    return arr, False


def _out(v, single):
    return float(v[0]) if single else v


class FittedGP:
    """GP conditioned on a dataset, holding the Cholesky factor of ``K + sigma_n^2 I``."""

    def __init__(self, kernel, X, y, sigma_n):
        if not (math.isfinite(sigma_n) and sigma_n > 0):
            raise InputError(f"sigma_n must be > 0, got {sigma_n}")
        self.kernel = kernel
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float).reshape(-1)
        self.sigma_n = float(sigma_n)
        K = kernel.matrix(self.X)
        if not np.all(np.isfinite(K)):
            raise ConditioningError("kernel matrix has non-finite entries")
        self.gram = K
        A = K + self.sigma_n ** 2 * np.eye(self.m)
        try:
            self.chol = cholesky(A, lower=True, check_finite=False)
        except LinAlgError:
            raise ConditioningError(
                f"K + sigma_n^2 I is numerically indefinite at sigma_n={self.sigma_n:g}; "
                "choose a larger sigma_n (sigma_n > sigma_v is allowed)"
            ) from None
        self.alpha = cho_solve((self.chol, True), self.y, check_finite=False)

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @cached_property
    def G(self):
        """Explicit ``(K + sigma_n^2 I)^{-1}`` (symmetrized)."""
        Ginv = cho_solve((self.chol, True), np.eye(self.m), check_finite=False)
        return 0.5 * (Ginv + Ginv.T)

    def refit(self, sigma_n):
        """Same kernel and data, different ``sigma_n``."""
        if sigma_n == self.sigma_n:
            return self
        return FittedGP(self.kernel, self.X, self.y, sigma_n)

    def with_targets(self, y):
        """Same inputs and factor, new outputs (avoids refactorizing)."""
        other = object.__new__(FittedGP)
        other.__dict__.update({k: v for k, v in self.__dict__.items() if k in ("kernel", "X", "sigma_n", "gram", "chol", "G")})
        other.y = np.asarray(y, dtype=float).reshape(-1)
        other.alpha = cho_solve((self.chol, True), other.y, check_finite=False)
        return other

    def cross(self, x):
        pts, _ = as_points(x, self.dim)
        return self.kernel.matrix(pts, self.X)

    def predict_mean(self, x):
        pts, single = as_points(x, self.dim)
        return _out(self.kernel.matrix(pts, self.X) @ self.alpha, single)

    def _solve_half(self, Kx):
        # L^{-1} K_{X,x}, shape (m, n)
        return solve_triangular(self.chol, Kx.T, lower=True, check_finite=False)

    def predict_var(self, x, clamp=True):
        pts, single = as_points(x, self.dim)
        Kx = self.kernel.matrix(pts, self.X)
        v = self._solve_half(Kx)
        var = self.kernel.diag(pts) - np.einsum("ij,ij->j", v, v)
        if clamp:
            var = _clamp_var(var)
        return _out(var, single)

    def predict_std(self, x):
        pts, single = as_points(x, self.dim)
        return _out(np.sqrt(self.predict_var(pts)), single)

    def weights(self, x):
        """``W_x = K_{x,X} G`` via two triangular solves; shape (m,) or (n, m)."""
        pts, single = as_points(x, self.dim)
        Kx = self.kernel.matrix(pts, self.X)
        W = self._weights_from_cross(Kx)
        return W[0] if single else W

    def _weights_from_cross(self, Kx):
        v = self._solve_half(Kx)
        return solve_triangular(self.chol, v, lower=True, trans="T", check_finite=False).T

    def stats(self, x, chunk=20000):
        """Mean, variance, ``|W_x|_2^2`` and ``|W_x|_1`` for a batch of queries.

        Computed in chunks so that large query grids do not materialize an
        ``(n, m)`` weight matrix at once.
        """
        pts, _ = as_points(x, self.dim)
        n = pts.shape[0]
        mean = np.empty(n)
        var = np.empty(n)
        w2 = np.empty(n)
        w1 = np.empty(n)
        for s in range(0, n, chunk):
            P = pts[s:s + chunk]
            Kx = self.kernel.matrix(P, self.X)
            v = self._solve_half(Kx)
            W = solve_triangular(self.chol, v, lower=True, trans="T", check_finite=False).T
            mean[s:s + chunk] = Kx @ self.alpha
            var[s:s + chunk] = _clamp_var(self.kernel.diag(P) - np.einsum("ij,ij->j", v, v))
            w2[s:s + chunk] = np.einsum("ij,ij->i", W, W)
            w1[s:s + chunk] = np.abs(W).sum(axis=1)
        return mean, var, w2, w1


def _clamp_var(var):
    bad = var < VAR_FLOOR
    if np.any(bad):
        raise ConditioningError(
            f"posterior variance {float(np.min(var)):.3e} below {VAR_FLOOR:g}; "
            "the kernel matrix is too ill-conditioned, increase sigma_n"
        )
    return np.maximum(var, 0.0)


def fit(spec, data, sigma_n):
    """Condition a GP with kernel ``spec`` on ``data`` using noise level ``sigma_n``."""
    return FittedGP(spec, data.X, data.y, sigma_n)


def predict_mean(gp, x):
    return gp.predict_mean(x)


def predict_var(gp, x):
    return gp.predict_var(x)


def weights(gp, x):
    return gp.weights(x)
