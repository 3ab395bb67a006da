"""Error bounds for GP regression under bounded-support noise.

All bounds bound ``|mean(x) - f(x)|`` for an ``f`` with RKHS norm at most ``B``
and noise ``|v| <= sigma_v``. The estimator error splits into a noise-free
interpolation part and a noise part ``W_x v``:

* interpolation part: ``sigma(x) * sqrt(B^2 - c*)`` where ``c*`` lower-bounds
  ``f(X)^T G f(X)`` using the observed data and the noise box;
* noise part, deterministic: ``sigma_v * |W_x|_1``;
* noise part, probabilistic (Hoeffding): ``sqrt(lambda_x / 2 * ln(2/delta))`` with
  ``lambda_x = 4 sigma_v^2 |W_x|_2^2``.

Baselines from the literature (Chowdhury et al., Hashimoto et al.,
Abbasi-Yadkori, Srinivas et al., Maddalena et al.) are included for comparison.
Each of those fixes its own ``sigma_n``; the functions refit internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular

from .errors import ConditioningError, InputError, InvalidBoundError
from .gp import FittedGP, as_points
from .qp import minimize_box_quadratic

DEFAULT_SLACK = 0.05
MADDALENA_JITTER = 1e-10
MADDALENA_EXACT_MAX_M = 20


def _check_delta(delta):
    if not (isinstance(delta, (int, float, np.floating)) and 0.0 < delta <= 1.0):
        raise InputError(f"delta must be in (0, 1], got {delta!r}")


def _check_sigma_v(sigma_v):
    if not (math.isfinite(sigma_v) and sigma_v >= 0):
        raise InputError(f"sigma_v must be >= 0, got {sigma_v}")


def _out(v, single):
    return float(v[0]) if single else v


# ---------------------------------------------------------------------------
# c*
# ---------------------------------------------------------------------------


def compute_cstar(gp, sigma_v, *, tol=1e-8, max_iter=100_000):
    """``min_{|v_i| <= sigma_v} (Y - v)^T G (Y - v)``, returned as a certified lower bound.

    The value returned never exceeds the true minimum, so it is always a valid
    ``c*`` even if the solver stops early (it degrades toward 0, never above).
    """
    _check_sigma_v(sigma_v)
    if sigma_v == 0:
        return float(gp.y @ gp.alpha)
    return float(compute_cstar_batch(gp, gp.y[:, None], sigma_v, tol=tol, max_iter=max_iter)[0])


def compute_cstar_batch(gp, Y, sigma_v, *, tol=1e-8, max_iter=100_000):
    """``c*`` for several output vectors (columns of ``Y``) sharing the inputs of ``gp``."""
    _check_sigma_v(sigma_v)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if sigma_v == 0:
        Z = cho_solve((gp.chol, True), Y, check_finite=False)
        return np.einsum("ij,ij->j", Y, Z)
    res = minimize_box_quadratic(gp.G, Y - sigma_v, Y + sigma_v, tol=tol, max_iter=max_iter)
    return np.atleast_1d(res.lower_bound)


# ---------------------------------------------------------------------------
# Context and our bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BoundContext:
    """A fitted GP together with ``B``, ``sigma_v`` and the cached ``c*``."""

    gp: FittedGP
    B: float
    sigma_v: float
    cstar: float = field(default=None)

    def __post_init__(self):
        if not (math.isfinite(self.B) and self.B >= 0):
            raise InputError(f"B must be >= 0, got {self.B}")
        _check_sigma_v(self.sigma_v)
        if self.cstar is None:
            object.__setattr__(self, "cstar", compute_cstar(self.gp, self.sigma_v))
        if self.cstar < 0:
            raise InputError(f"c* must be >= 0, got {self.cstar}")
        if self.cstar > self.B ** 2:
            raise InvalidBoundError(
                f"B too small for observed data: c*={self.cstar:.6g} > B^2={self.B ** 2:.6g}"
            )

    @property
    def rkhs_slack(self):
        """``sqrt(B^2 - c*)``."""
        return math.sqrt(max(self.B ** 2 - self.cstar, 0.0))

    def terms(self, x):
        """Mean, posterior std, ``lambda_x`` and ``Lambda_x`` at a batch of points."""
        mean, var, w2, w1 = self.gp.stats(x)
        return mean, np.sqrt(var), 4.0 * self.sigma_v ** 2 * w2, self.sigma_v * w1

    def evaluate(self, x, delta=None):
        """``(mean, eps)`` arrays; deterministic bound if ``delta`` is None."""
        pts, _ = as_points(x, self.gp.dim)
        mean, std, lam, Lam = self.terms(pts)
        if delta is None:
            return mean, std * self.rkhs_slack + Lam
        _check_delta(delta)
        return mean, std * self.rkhs_slack + np.sqrt(0.5 * lam * math.log(2.0 / delta))


def lambda_x(gp, sigma_v, x):
    """``4 sigma_v^2 |W_x|_2^2``, the Hoeffding variance proxy of ``W_x v``."""
    _check_sigma_v(sigma_v)
    pts, single = as_points(x, gp.dim)
    W = np.atleast_2d(gp.weights(pts))
    return _out(4.0 * sigma_v ** 2 * np.einsum("ij,ij->i", W, W), single)


def capital_lambda_x(gp, sigma_v, x):
    """``sigma_v |W_x|_1``, the worst case of ``|W_x v|`` over the noise box."""
    _check_sigma_v(sigma_v)
    pts, single = as_points(x, gp.dim)
    W = np.atleast_2d(gp.weights(pts))
    return _out(sigma_v * np.abs(W).sum(axis=1), single)


def lemma3_term(ctx, x):
    pts, single = as_points(x, ctx.gp.dim)
    return _out(np.sqrt(ctx.gp.predict_var(pts)) * ctx.rkhs_slack, single)


def prob_bound(ctx, x, delta):
    """Bound holding with probability at least ``1 - delta`` at each fixed ``x``."""
    _check_delta(delta)
    pts, single = as_points(x, ctx.gp.dim)
    return _out(ctx.evaluate(pts, delta)[1], single)


def det_bound(ctx, x):
    """Bound holding for every noise realization in the box."""
    pts, single = as_points(x, ctx.gp.dim)
    return _out(ctx.evaluate(pts, None)[1], single)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def info_gain(gp):
    """``0.5 log det(I + sigma_n^-2 K)`` from the Cholesky factor of ``K + sigma_n^2 I``.

    This is the information gain of the observed inputs, used as an estimate of
    the maximum information gain required by the sub-Gaussian baselines.
    """
    return float(np.sum(np.log(np.diag(gp.chol))) - gp.m * math.log(gp.sigma_n))


def chowdhury_sigma_n(m):
    return math.sqrt(1.0 + 2.0 / m)


def chowdhury_bound(gp, B, R, delta, x, gamma=None):
    """``beta(delta) sigma(x)`` with ``beta = B + R sqrt(2(Gamma + 1 + ln(1/delta)))``.

    Refits with ``sigma_n^2 = 1 + 2/m``; ``gamma`` defaults to :func:`info_gain`
    of that refit.
    """
    _check_delta(delta)
    ref = gp.refit(chowdhury_sigma_n(gp.m))
    if gamma is None:
        gamma = info_gain(ref)
    beta = B + R * math.sqrt(2.0 * (gamma + 1.0 + math.log(1.0 / delta)))
    pts, single = as_points(x, gp.dim)
    return _out(beta * np.sqrt(ref.predict_var(pts)), single)


def _noise_refit(gp, sigma_v):
    _check_sigma_v(sigma_v)
    if sigma_v == 0:
        raise InputError("this baseline sets sigma_n = sigma_v and needs sigma_v > 0")
    return gp.refit(sigma_v)


def hashimoto_beta(gp, B, sigma_v):
    ref = _noise_refit(gp, sigma_v)
    inner = B ** 2 - float(ref.y @ ref.alpha) + ref.m
    if inner < 0:
        raise InvalidBoundError(f"B too small for observed data: B^2 - Y^T G Y + m = {inner:.6g} < 0")
    return math.sqrt(inner)


def hashimoto_bound(gp, B, sigma_v, x):
    """Deterministic ``beta_T sigma(x)`` with ``beta_T = sqrt(B^2 - Y^T G Y + m)``, ``sigma_n = sigma_v``."""
    ref = _noise_refit(gp, sigma_v)
    beta = hashimoto_beta(gp, B, sigma_v)
    pts, single = as_points(x, gp.dim)
    return _out(beta * np.sqrt(ref.predict_var(pts)), single)


def abbasi_bound(gp, B, R, L, delta, x, sigma_n=None):
    """``Delta(delta) sigma(x)`` with
    ``Delta = (R / sigma_n) sqrt(2 ln(1/delta) + (m - 1) L^2 / sigma_n^2) + B``.

    ``sigma_n`` is free in this bound; None selects ``sqrt(1 + 2/m)``.
    """
    _check_delta(delta)
    if sigma_n is None:
        sigma_n = chowdhury_sigma_n(gp.m)
    ref = gp.refit(sigma_n)
    s = ref.sigma_n
    Delta = (R / s) * math.sqrt(2.0 * math.log(1.0 / delta) + (ref.m - 1) * L ** 2 / s ** 2) + B
    pts, single = as_points(x, gp.dim)
    return _out(Delta * np.sqrt(ref.predict_var(pts)), single)


def seeger_bound(gp, B, sigma_v, delta, x, gamma=None):
    """``xi(delta) sigma(x)`` with ``xi = sqrt(2 B^2 + 300 Gamma ln^3(m / delta))``, ``sigma_n = sigma_v``."""
    _check_delta(delta)
    ref = _noise_refit(gp, sigma_v)
    if gamma is None:
        gamma = info_gain(ref)
    xi = math.sqrt(2.0 * B ** 2 + 300.0 * gamma * math.log(ref.m / delta) ** 3)
    pts, single = as_points(x, gp.dim)
    return _out(xi * np.sqrt(ref.predict_var(pts)), single)


def _pd_factor(K):
    try:
        return cholesky(K + MADDALENA_JITTER * np.eye(K.shape[0]), lower=True, check_finite=False)
    except LinAlgError:
        raise ConditioningError(
            "this bound requires a strictly positive definite kernel matrix"
        ) from None


def maddalena_delta_exact(Kinv, y, sigma_v, chunk=1 << 15):
    """``max_{v in {+-sigma_v}^m} v^T K^-1 v + 2 y^T K^-1 v`` by vertex enumeration."""
    m = Kinv.shape[0]
    Ky = Kinv @ y
    best = -np.inf
    total = 1 << m
    bits = np.arange(m)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        V = np.where((idx[:, None] >> bits) & 1, sigma_v, -sigma_v)
        vals = np.einsum("ij,jk,ik->i", V, Kinv, V) + 2.0 * V @ Ky
        best = max(best, float(vals.max()))
    return best


def maddalena_delta_bound(Kinv, y, sigma_v):
    """Conservative ``sigma_v^2 sum|K^-1_ij| + 2 sigma_v sum|(K^-1 y)_i|``."""
    return float(sigma_v ** 2 * np.abs(Kinv).sum() + 2.0 * sigma_v * np.abs(Kinv @ y).sum())


def maddalena_bound(gp, B, sigma_v, x, exact_max_m=MADDALENA_EXACT_MAX_M):
    """Deterministic kernel-ridge bound

    ``P(x) sqrt(B^2 + Delta - Y^T K^-1 Y) + sigma_v |K^-1 K_{X,x}|_1 + |Y^T (K^-1 - G) K_{X,x}|``

    where ``P`` is the noise-free posterior std and ``Delta`` the worst-case
    noise term (exact for ``m <= exact_max_m``, otherwise a termwise upper bound).
    The last term is written with ``K^-1 - G = (K + K^2 / sigma_n^2)^-1``.
    """
    _check_sigma_v(sigma_v)
    K = gp.gram
    Lk = _pd_factor(K)
    Kinv = cho_solve((Lk, True), np.eye(gp.m), check_finite=False)
    Kinv = 0.5 * (Kinv + Kinv.T)
    y = gp.y
    if gp.m <= exact_max_m:
        Delta = maddalena_delta_exact(Kinv, y, sigma_v) if sigma_v > 0 else 0.0
    else:
        Delta = maddalena_delta_bound(Kinv, y, sigma_v)
    inner = B ** 2 + Delta - float(y @ Kinv @ y)
    if inner < 0:
        raise InvalidBoundError(f"B too small for observed data: B^2 + Delta - Y^T K^-1 Y = {inner:.6g} < 0")
    pts, single = as_points(x, gp.dim)
    Kx = gp.kernel.matrix(pts, gp.X)
    v = solve_triangular(Lk, Kx.T, lower=True, check_finite=False)
    P = np.sqrt(np.maximum(gp.kernel.diag(pts) - np.einsum("ij,ij->j", v, v), 0.0))
    interp_w = Kx @ Kinv
    lam = sigma_v * np.abs(interp_w).sum(axis=1)
    third = np.abs(interp_w @ y - Kx @ gp.alpha)
    return _out(P * math.sqrt(inner) + lam + third, single)


# ---------------------------------------------------------------------------
# Uniform bounds over boxes
# ---------------------------------------------------------------------------


def box_grid(region, n):
    """Uniform tensor grid with ``n`` points per axis (corners included)."""
    region = np.asarray(region, dtype=float).reshape(-1, 2)
    if np.any(region[:, 0] > region[:, 1]):
        raise InputError("empty region (lower corner above upper corner)")
    if n < 2:
        raise InputError(f"grid_per_dim must be >= 2, got {n}")
    axes = [np.linspace(lo, hi, n) for lo, hi in region]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, region.shape[0])


def uniform_bound(ctx, region, delta=None, grid_per_dim=5, slack=DEFAULT_SLACK):
    """Supremum of the pointwise bound over a box, estimated on a grid and inflated by ``1 + slack``.

    ``delta=None`` uses the deterministic bound.
    """
    if slack < 0:
        raise InputError("slack must be >= 0")
    pts = box_grid(region, grid_per_dim)
    return float(np.max(ctx.evaluate(pts, delta)[1]) * (1.0 + slack))


# ---------------------------------------------------------------------------
# Empirical coverage
# ---------------------------------------------------------------------------


@dataclass
class CoverageReport:
    trials: int
    queries: int
    deltas: tuple
    det_violations: int
    prob_violation_rate: dict      # delta -> per-query violation frequency (array)
    prob_threshold: dict           # delta -> delta + 3 binomial standard errors
    max_abs_error: float

    @property
    def det_ok(self):
        return self.det_violations == 0

    def prob_ok(self, delta):
        return bool(np.all(self.prob_violation_rate[delta] <= self.prob_threshold[delta]))

    def summary(self):
        lines = [f"det violations: {self.det_violations} / {self.trials * self.queries}"]
        for d in self.deltas:
            rate = self.prob_violation_rate[d]
            lines.append(
                f"delta={d:g}: max per-query violation rate {rate.max():.4f} "
                f"(mean {rate.mean():.4f}, threshold {self.prob_threshold[d]:.4f})"
            )
        lines.append("note: bounds are checked pointwise at fixed queries across noise redraws")
        return "\n".join(lines)


def coverage_report(ctx, system, deltas, trials, queries, seed=0, output=0):
    """Monte Carlo check of both bounds at the fixed inputs ``ctx.gp.X``.

    ``system`` supplies the true function (output ``output``) and the noise
    model. ``queries`` is a count (uniform over the system domain) or an
    explicit ``(Q, d)`` array. Each trial redraws the noise vector, recomputes
    the posterior mean and ``c*``, and checks every query.
    """
    return empirical_coverage(ctx, system.output(output), system.noise.sampler(output),
                              deltas, trials, queries, seed, domain=system.domain)


def empirical_coverage(ctx, f, noise_sampler, deltas, trials, queries, seed=0, domain=None):
    """Same as :func:`coverage_report` with an explicit ``f`` and ``noise_sampler(rng, shape)``."""
    if trials < 1:
        raise InputError("coverage needs at least one trial")
    deltas = tuple(float(d) for d in np.atleast_1d(deltas))
    for d in deltas:
        _check_delta(d)
    rng = np.random.default_rng(seed)
    gp = ctx.gp
    if np.ndim(queries) == 0:
        if domain is None:
            domain = np.stack([gp.X.min(axis=0), gp.X.max(axis=0)], axis=1)
        domain = np.asarray(domain, dtype=float)
        Q = rng.uniform(domain[:, 0], domain[:, 1], size=(int(queries), gp.dim))
    else:
        Q, _ = as_points(queries, gp.dim)
    _, var, w2, w1 = gp.stats(Q)
    std = np.sqrt(var)
    W = np.atleast_2d(gp.weights(Q))
    lam = 4.0 * ctx.sigma_v ** 2 * w2
    Lam = ctx.sigma_v * w1
    fX = np.asarray(f(gp.X), dtype=float).reshape(-1)
    fQ = np.asarray(f(Q), dtype=float).reshape(-1)

    det_viol = 0
    prob_viol = {d: np.zeros(Q.shape[0]) for d in deltas}
    max_err = 0.0
    batch = 1000
    for s in range(0, trials, batch):
        t = min(batch, trials - s)
        V = noise_sampler(rng, (gp.m, t))
        Y = fX[:, None] + V
        cstar = compute_cstar_batch(gp, Y, ctx.sigma_v)
        if np.any(cstar > ctx.B ** 2):
            raise InvalidBoundError("B too small for a redrawn dataset (c* > B^2)")
        slack = np.sqrt(ctx.B ** 2 - cstar)
        err = np.abs(W @ Y - fQ[:, None])
        max_err = max(max_err, float(err.max()))
        interp = std[:, None] * slack[None, :]
        det_viol += int(np.sum(err > interp + Lam[:, None]))
        for d in deltas:
            eps = interp + np.sqrt(0.5 * lam * math.log(2.0 / d))[:, None]
            prob_viol[d] += np.sum(err > eps, axis=1)
    rates = {d: prob_viol[d] / trials for d in deltas}
    thresh = {d: d + 3.0 * math.sqrt(d * (1.0 - d) / trials) for d in deltas}
    return CoverageReport(trials, Q.shape[0], deltas, det_viol, rates, thresh, max_err)
