"""Grid-partition stochastic barrier certificates driven by GP error bounds.

The safe box ``X_s`` is split into axis-aligned cells. For every cell the learned
one-step map is enclosed in an interval ``[min mu - eps, max mu + eps]`` per
output, using a uniform error bound over the cell. Inflating that interval by
the noise support gives the set of cells the system can reach in one step, and
whether it can leave ``X_s``.

A piecewise-constant barrier ``B`` is then found by linear programming::

    minimize    eta + N beta
    subject to  B(q') <= B(q) + beta     for every successor q' of q
                1     <= B(q) + beta     if q can leave X_s
                B(q)  <= eta             if q overlaps the initial set
                0 <= B, eta, beta <= 1

Replacing the expectation of ``B`` after one step by its maximum over the
successor set is sound but conservative. The certificate yields
``P(x(k) in X_s for k <= N) >= 1 - (eta + N beta)``.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse

from .bounds import DEFAULT_SLACK, hashimoto_beta
from .errors import InputError
from .lp import solve_lp

logger = logging.getLogger(__name__)

BOUND_KINDS = ("prob", "det", "hashimoto")
VERIFY_TOL = 1e-9


# ---------------------------------------------------------------------------
# Partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition:
    """Uniform grid of ``cells[i]`` intervals per dimension over the safe box."""

    safe: np.ndarray
    cells: tuple
    initial: np.ndarray

    def __post_init__(self):
        safe = np.asarray(self.safe, dtype=float).reshape(-1, 2)
        init = np.asarray(self.initial, dtype=float).reshape(-1, 2)
        cells = tuple(int(c) for c in np.broadcast_to(self.cells, (safe.shape[0],)))
        if np.any(safe[:, 1] <= safe[:, 0]):
            raise InputError("safe set must be a non-degenerate box")
        if min(cells) < 1:
            raise InputError("need at least one cell per dimension")
        if init.shape != safe.shape:
            raise InputError(f"initial set has dimension {init.shape[0]}, safe set {safe.shape[0]}")
        if np.any(init[:, 0] > init[:, 1]) or np.any(init[:, 0] < safe[:, 0]) or np.any(init[:, 1] > safe[:, 1]):
            raise InputError("initial set must be a box inside the safe set")
        object.__setattr__(self, "safe", safe)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "cells", cells)

    @property
    def dim(self):
        return self.safe.shape[0]

    @property
    def n_regions(self):
        return math.prod(self.cells)

    @property
    def edges(self):
        return [np.linspace(lo, hi, c + 1) for (lo, hi), c in zip(self.safe, self.cells)]

    def region(self, q):
        """Bounds of region ``q`` (flat index), shape ``(d, 2)``."""
        idx = np.unravel_index(q, self.cells)
        return np.array([[e[i], e[i + 1]] for e, i in zip(self.edges, idx)])

    def regions(self):
        """All region boxes, shape ``(n_regions, d, 2)``, in C order of the cell index."""
        grids = np.meshgrid(*[np.arange(c) for c in self.cells], indexing="ij")
        idx = np.stack([g.reshape(-1) for g in grids], axis=1)
        out = np.empty((self.n_regions, self.dim, 2))
        for j, e in enumerate(self.edges):
            out[:, j, 0] = e[idx[:, j]]
            out[:, j, 1] = e[idx[:, j] + 1]
        return out

    def initial_regions(self):
        """Flat indices of regions sharing positive volume with the initial set.

        A degenerate initial box (a point or a face) selects the regions that
        contain it instead.
        """
        ranges = []
        for e, (lo, hi) in zip(self.edges, self.initial):
            if hi > lo:
                sel = np.flatnonzero((e[:-1] < hi) & (e[1:] > lo))
            else:
                sel = np.flatnonzero((e[:-1] <= lo) & (e[1:] >= lo))
            ranges.append(sel)
        grids = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index(tuple(g.reshape(-1) for g in grids), self.cells)

    def contains(self, X):
        X = np.atleast_2d(X)
        return np.all((X >= self.safe[:, 0]) & (X <= self.safe[:, 1]), axis=1)

    def locate(self, X):
        """Flat region index of each point (``-1`` outside ``X_s``)."""
        X = np.atleast_2d(X)
        cols = []
        for j, (e, c) in enumerate(zip(self.edges, self.cells)):
            cols.append(np.clip(np.searchsorted(e, X[:, j], side="right") - 1, 0, c - 1))
        flat = np.ravel_multi_index(tuple(cols), self.cells)
        return np.where(self.contains(X), flat, -1)

    def to_dict(self):
        return {"safe": self.safe.tolist(), "cells": list(self.cells), "initial": self.initial.tolist()}


# ---------------------------------------------------------------------------
# Region dynamics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionDynamicsInterval:
    """Per-output interval ``[lo_i, hi_i]`` enclosing the learned map over one region."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise InputError("interval needs lo <= hi with matching shapes")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)


def _lattice_axes(partition, grid_per_dim):
    return [np.linspace(lo, hi, (grid_per_dim - 1) * c + 1)
            for (lo, hi), c in zip(partition.safe, partition.cells)]


def _lattice_points(axes):
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def _per_region(values, shape, grid_per_dim, reduce):
    """Reduce lattice values over each region's ``grid_per_dim^d`` block."""
    d = len(shape)
    win = sliding_window_view(values.reshape(shape), (grid_per_dim,) * d)
    win = win[(slice(None, None, grid_per_dim - 1),) * d]
    return reduce(win.reshape(*win.shape[:d], -1), axis=-1).reshape(-1)


class LatticeStats:
    """GP statistics on the shared lattice of region grids, computed once per GP.

    Neighbouring regions share their boundary grid points, so the lattice has
    ``((g - 1) c_i + 1)`` points per axis instead of ``g c_i``.
    """

    def __init__(self, partition, grid_per_dim=5):
        if grid_per_dim < 2:
            raise InputError("grid_per_dim must be >= 2")
        self.partition = partition
        self.grid_per_dim = grid_per_dim
        axes = _lattice_axes(partition, grid_per_dim)
        self.shape = tuple(a.size for a in axes)
        self.points = _lattice_points(axes)
        self._cache = {}

    def stats(self, gp):
        key = id(gp)
        if key not in self._cache:
            self._cache[key] = (gp, gp.stats(self.points))
        return self._cache[key][1]

    def reduce(self, values, how):
        return _per_region(values, self.shape, self.grid_per_dim, np.max if how == "max" else np.min)


def _pointwise(ctx, kind, delta, stats):
    """Mean and pointwise bound on the lattice for one output."""
    if kind == "hashimoto":
        gp = ctx.gp.refit(ctx.sigma_v)
        mean, var, _, _ = stats(gp)
        return mean, hashimoto_beta(ctx.gp, ctx.B, ctx.sigma_v) * np.sqrt(var)
    mean, var, w2, w1 = stats(ctx.gp)
    interp = np.sqrt(var) * ctx.rkhs_slack
    if kind == "det":
        return mean, interp + ctx.sigma_v * w1
    if kind == "prob":
        if delta is None:
            raise InputError("probabilistic bounds need delta")
        return mean, interp + np.sqrt(2.0 * ctx.sigma_v ** 2 * w2 * math.log(2.0 / delta))
    raise InputError(f"bound kind must be one of {BOUND_KINDS}, got {kind!r}")


def region_dynamics_all(ctxs, partition, kind="prob", delta=0.05, grid_per_dim=5,
                        slack=DEFAULT_SLACK, lattice=None):
    """Intervals for every region, as ``(lo, hi)`` arrays of shape ``(n_regions, k)``.

    ``ctxs`` holds one :class:`~rkhsb.bounds.BoundContext` per output. Each
    output interval is ``[min mu - eps_bar, max mu + eps_bar]`` over the region
    grid, with ``eps_bar`` the grid maximum of the pointwise bound times
    ``1 + slack``. Passing a shared :class:`LatticeStats` reuses GP evaluations
    across bound kinds.
    """
    if slack < 0:
        raise InputError("slack must be >= 0")
    lattice = LatticeStats(partition, grid_per_dim) if lattice is None else lattice
    lo = np.empty((partition.n_regions, len(ctxs)))
    hi = np.empty_like(lo)
    for i, ctx in enumerate(ctxs):
        mean, eps = _pointwise(ctx, kind, delta, lattice.stats)
        eps_bar = lattice.reduce(eps, "max") * (1.0 + slack)
        lo[:, i] = lattice.reduce(mean, "min") - eps_bar
        hi[:, i] = lattice.reduce(mean, "max") + eps_bar
    return lo, hi


def region_dynamics(ctxs, region, delta=0.05, grid_per_dim=5, kind=None, slack=DEFAULT_SLACK):
    """Interval enclosing the learned map over a single box ``region``.

    ``kind`` defaults to ``"prob"`` when ``delta`` is given and ``"det"`` otherwise.
    """
    kind = kind or ("det" if delta is None else "prob")
    region = np.asarray(region, dtype=float).reshape(-1, 2)
    single = Partition(region, 1, region)
    lo, hi = region_dynamics_all(ctxs, single, kind, delta, grid_per_dim, slack)
    return RegionDynamicsInterval(lo[0], hi[0])


# ---------------------------------------------------------------------------
# Successors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SuccessorMap:
    """Reachable cells of every region, stored as index boxes.

    Region ``q`` reaches the cells whose index ``j`` satisfies
    ``start[q] <= j < stop[q]`` componentwise (empty when any ``start >= stop``),
    plus the unsafe set when ``unsafe[q]``.
    """

    start: np.ndarray
    stop: np.ndarray
    unsafe: np.ndarray
    cells: tuple

    @property
    def n_regions(self):
        return self.unsafe.shape[0]

    def members(self, q):
        ranges = [np.arange(a, b) for a, b in zip(self.start[q], self.stop[q])]
        if any(r.size == 0 for r in ranges):
            return np.empty(0, dtype=int)
        grids = np.meshgrid(*ranges, indexing="ij")
        return np.ravel_multi_index(tuple(g.reshape(-1) for g in grids), self.cells)

    def __iter__(self):
        for q in range(self.n_regions):
            yield self.members(q), bool(self.unsafe[q])


def successor_map(lo, hi, sigma_v, partition):
    """Successor sets for all regions from interval arrays ``(n_regions, d)``.

    The reach box is ``[lo - sigma_v, hi + sigma_v]``. A cell is a successor
    when its closed box meets the reach box; the unsafe flag is set when the
    reach box leaves ``X_s``.
    """
    lo = np.atleast_2d(lo)
    hi = np.atleast_2d(hi)
    if lo.shape[1] != partition.dim:
        raise InputError(f"intervals have {lo.shape[1]} outputs, partition has dimension {partition.dim}")
    sv = np.broadcast_to(np.asarray(sigma_v, dtype=float), (partition.dim,))
    rlo = lo - sv
    rhi = hi + sv
    start = np.empty(lo.shape, dtype=int)
    stop = np.empty(lo.shape, dtype=int)
    for j, e in enumerate(partition.edges):
        # cells i with e[i] <= rhi and e[i+1] >= rlo
        start[:, j] = np.searchsorted(e[1:], rlo[:, j], side="left")
        stop[:, j] = np.searchsorted(e[:-1], rhi[:, j], side="right")
    unsafe = np.any((rlo < partition.safe[:, 0]) | (rhi > partition.safe[:, 1]), axis=1)
    return SuccessorMap(start, np.maximum(stop, start), unsafe, partition.cells)


def successors(interval, sigma_v, partition):
    """Reachable regions of one interval and whether ``X_s`` can be left."""
    smap = successor_map(interval.lo[None, :], interval.hi[None, :], sigma_v, partition)
    return smap.members(0), bool(smap.unsafe[0])


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


def safety_probability(eta, beta, N):
    """``max(0, 1 - (eta + beta N))``."""
    if not (0 <= eta <= 1 and 0 <= beta <= 1 and N >= 0):
        raise InputError(f"need eta, beta in [0, 1] and N >= 0, got {eta}, {beta}, {N}")
    return max(0.0, 1.0 - (eta + beta * N))


@dataclass(frozen=True, eq=False)
class BarrierCertificate:
    values: np.ndarray
    eta: float
    beta: float
    N: int
    P_s: float
    bound_kind: str = "det"
    delta: float | None = None
    confidence: str = "1"
    uniform_bound_calls: int = 0
    conservative: bool = False
    timing_seconds: float = 0.0
    regions: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "regions": None if self.regions is None else self.regions.tolist(),
            "values": self.values.tolist(),
            "eta": self.eta,
            "beta": self.beta,
            "N": self.N,
            "P_s": self.P_s,
            "bound_kind": self.bound_kind,
            "delta": self.delta,
            "timing_seconds": self.timing_seconds,
            "confidence": self.confidence,
            "uniform_bound_calls": self.uniform_bound_calls,
            "conservative": self.conservative,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_dict(cls, doc):
        regions = doc.get("regions")
        return cls(np.asarray(doc["values"], dtype=float), doc["eta"], doc["beta"], doc["N"],
                   doc["P_s"], doc.get("bound_kind", "det"), doc.get("delta"),
                   doc.get("confidence", "1"), doc.get("uniform_bound_calls", 0),
                   doc.get("conservative", False), doc.get("timing_seconds", 0.0),
                   None if regions is None else np.asarray(regions, dtype=float))


# successor pairs above which the range-max formulation is used
DIRECT_PAIR_LIMIT = 50_000


def _constraints(partition, smap, formulation="auto"):
    """Sparse ``A x <= b`` with ``x = (B_0 .. B_{n-1}, aux..., eta, beta)``.

    ``"direct"`` writes one row per successor pair. ``"range"`` introduces
    upper-bound variables for the maxima of ``B`` over power-of-two index
    ranges (a sparse table along each axis), so that each successor box needs
    at most ``2^d`` rows. Both give the same optimum over ``B``, ``eta`` and
    ``beta``. Returns ``(A, b, n_vars)``.
    """
    if formulation == "auto":
        pairs = int(np.prod(smap.stop - smap.start, axis=1).sum())
        formulation = "direct" if pairs <= DIRECT_PAIR_LIMIT else "range"
    if formulation not in ("direct", "range"):
        raise InputError(f"unknown formulation {formulation!r}")
    rows = _Rows()
    n = partition.n_regions
    if formulation == "direct":
        n_aux = 0
        upper_of = None
    else:
        tables, n_aux = _range_tables(partition.cells, n)
        _table_definitions(rows, tables)
        upper_of = tables
    i_eta, i_beta = n + n_aux, n + n_aux + 1
    for q in range(n):
        if np.any(smap.stop[q] <= smap.start[q]):
            targets = np.empty(0, dtype=int)
        elif upper_of is None:
            targets = smap.members(q)
        else:
            targets = _box_cover(upper_of, smap.start[q], smap.stop[q])
        targets = targets[targets != q]
        k = targets.size
        if k:
            rows.add(np.stack([targets, np.full(k, q), np.full(k, i_beta)], axis=1),
                     np.array([1.0, -1.0, -1.0]), np.zeros(k))
        if smap.unsafe[q]:
            rows.add(np.array([[q, i_beta]]), np.array([-1.0, -1.0]), np.array([-1.0]))
    init = partition.initial_regions()
    rows.add(np.stack([init, np.full(init.size, i_eta)], axis=1), np.array([1.0, -1.0]),
             np.zeros(init.size))
    A, b = rows.build(n + n_aux + 2)
    return A, b, n + n_aux + 2


class _Rows:
    """Accumulates rows that share a coefficient pattern."""

    def __init__(self):
        self.cols, self.vals, self.rhs, self.widths = [], [], [], []
        self.count = 0

    def add(self, cols, coef, rhs):
        k = cols.shape[0]
        if k == 0:
            return
        self.cols.append(cols.reshape(-1))
        self.vals.append(np.tile(coef, k))
        self.rhs.append(rhs)
        self.widths.append(np.full(k, cols.shape[1]))
        self.count += k

    def build(self, n_vars):
        if not self.count:
            return sparse.csr_matrix((0, n_vars)), np.zeros(0)
        widths = np.concatenate(self.widths)
        row_idx = np.repeat(np.arange(self.count), widths)
        A = sparse.csr_matrix((np.concatenate(self.vals), (row_idx, np.concatenate(self.cols))),
                              shape=(self.count, n_vars))
        return A, np.concatenate(self.rhs)


def _range_tables(cells, n):
    """Variable layout of the sparse table: level tuple -> (offset, shape)."""
    levels = [range(int(math.log2(c)) + 1) for c in cells]
    tables = {}
    offset = 0
    for k in np.ndindex(*[len(l) for l in levels]):
        shape = tuple(c - 2 ** kj + 1 for c, kj in zip(cells, k))
        tables[k] = (offset, shape)
        offset += math.prod(shape)
    return tables, offset - n


def _table_definitions(rows, tables):
    # T_k(i) >= T_{k - e_j}(i) and T_k(i) >= T_{k - e_j}(i + 2^(k_j - 1) e_j)
    for k, (offset, shape) in tables.items():
        if not any(k):
            continue
        j = next(i for i, kj in enumerate(k) if kj)
        parent = k[:j] + (k[j] - 1,) + k[j + 1:]
        p_off, p_shape = tables[parent]
        idx = np.indices(shape).reshape(len(shape), -1)
        own = offset + np.ravel_multi_index(idx, shape)
        shifted = idx.copy()
        shifted[j] += 2 ** (k[j] - 1)
        for src in (idx, shifted):
            par = p_off + np.ravel_multi_index(src, p_shape)
            rows.add(np.stack([par, own], axis=1), np.array([1.0, -1.0]), np.zeros(own.size))


def _box_cover(tables, start, stop):
    """Table variables whose ranges cover the index box ``[start, stop)``."""
    k = tuple(int(math.log2(b - a)) for a, b in zip(start, stop))
    choices = [sorted({int(a), int(b) - 2 ** kj}) for a, b, kj in zip(start, stop, k)]
    offset, shape = tables[k]
    grids = np.meshgrid(*choices, indexing="ij")
    return offset + np.ravel_multi_index(tuple(g.reshape(-1) for g in grids), shape)


def _tightest(values, partition, smap):
    """Smallest ``eta`` and ``beta`` that make ``values`` a valid certificate."""
    grid = values.reshape(partition.cells)
    beta = 0.0
    for q in range(partition.n_regions):
        sl = tuple(slice(a, b) for a, b in zip(smap.start[q], smap.stop[q]))
        block = grid[sl]
        worst = block.max() if block.size else 0.0
        if smap.unsafe[q]:
            worst = 1.0
        beta = max(beta, worst - values[q])
    init = partition.initial_regions()
    eta = float(values[init].max()) if init.size else 0.0
    return eta, float(min(max(beta, 0.0), 1.0))


def synthesize(partition, smap, N, *, method="auto", formulation="auto", max_iter=50_000,
               bound_kind="det", delta=None, uniform_bound_calls=0):
    """Piecewise-constant barrier minimizing ``eta + N beta``.

    The LP solution is clipped to ``[0, 1]`` and ``eta``/``beta`` are recomputed
    as the tightest values for those barrier values, so the certificate passes
    :func:`verify_certificate` exactly rather than up to solver tolerance. If
    the solver hits its iteration cap, the best feasible point is used and the
    certificate is flagged conservative; without one, the trivial barrier
    ``B = 1, eta = 1, beta = 0`` is returned.
    """
    if N < 0:
        raise InputError("N must be >= 0")
    if smap.n_regions != partition.n_regions:
        raise InputError("successor map does not match the partition")
    t0 = time.perf_counter()
    n = partition.n_regions
    A, b, n_vars = _constraints(partition, smap, formulation)
    c = np.zeros(n_vars)
    c[-2] = 1.0
    c[-1] = float(N)
    res = solve_lp(c, A, b, np.ones(n_vars), method=method, max_iter=max_iter)
    if res.status == "infeasible":
        raise ArithmeticError("barrier LP reported infeasible although B = 1, eta = 1, beta = 0 is feasible")
    conservative = not res.ok
    values = np.ones(n) if res.x is None else np.clip(res.x[:n], 0.0, 1.0)
    eta, beta = _tightest(values, partition, smap)
    if bound_kind == "prob":
        confidence = (f"each of {uniform_bound_calls} region bounds holds with probability "
                      f">= 1 - {delta}")
    else:
        confidence = "1"
    return BarrierCertificate(
        values=values, eta=eta, beta=beta, N=int(N), P_s=safety_probability(eta, beta, N),
        bound_kind=bound_kind, delta=delta, confidence=confidence,
        uniform_bound_calls=uniform_bound_calls, conservative=conservative,
        timing_seconds=time.perf_counter() - t0, regions=partition.regions(),
    )


@dataclass
class VerificationReport:
    ok: bool
    violations: list

    @property
    def first(self):
        return self.violations[0] if self.violations else None

    def __bool__(self):
        return self.ok


def verify_certificate(cert, partition, smap, tol=VERIFY_TOL, max_report=20):
    """Re-check every barrier condition independently of the LP."""
    B = np.asarray(cert.values, dtype=float)
    out = []

    def fail(msg):
        if len(out) < max_report:
            out.append(msg)

    if B.shape != (partition.n_regions,):
        return VerificationReport(False, [f"expected {partition.n_regions} values, got {B.shape}"])
    for name, v in (("eta", cert.eta), ("beta", cert.beta)):
        if not (-tol <= v <= 1 + tol):
            fail(f"{name}={v} outside [0, 1]")
    for q in np.flatnonzero((B < -tol) | (B > 1 + tol)):
        fail(f"region {q}: B={B[q]} outside [0, 1]")
    for q in partition.initial_regions():
        if B[q] > cert.eta + tol:
            fail(f"region {q}: B={B[q]} > eta={cert.eta} on the initial set")
    grid = B.reshape(partition.cells)
    for q in range(partition.n_regions):
        if smap.unsafe[q] and 1.0 > B[q] + cert.beta + tol:
            fail(f"region {q}: reaches unsafe but B + beta = {B[q] + cert.beta} < 1")
        sl = tuple(slice(a, b) for a, b in zip(smap.start[q], smap.stop[q]))
        block = grid[sl]
        if block.size and block.max() > B[q] + cert.beta + tol:
            worst = np.ravel_multi_index(
                tuple(np.array(np.unravel_index(block.argmax(), block.shape)) + smap.start[q]),
                partition.cells)
            fail(f"region {q}: successor {worst} has B={block.max()} > B(q) + beta = {B[q] + cert.beta}")
    expected = max(0.0, 1.0 - (cert.eta + cert.beta * cert.N))
    if abs(cert.P_s - expected) > tol:
        fail(f"P_s={cert.P_s} but 1 - (eta + beta N) gives {expected}")
    return VerificationReport(not out, out)


# ---------------------------------------------------------------------------
# End-to-end run and simulation
# ---------------------------------------------------------------------------


def certify(ctxs, partition, sigma_v, N, kind="prob", delta=0.05, grid_per_dim=5,
            slack=DEFAULT_SLACK, lattice=None, method="auto"):
    """Region intervals, successors, synthesis and verification for one bound kind.

    Returns ``(certificate, report, successor_map)``.
    """
    t0 = time.perf_counter()
    lo, hi = region_dynamics_all(ctxs, partition, kind, delta if kind == "prob" else None,
                                 grid_per_dim, slack, lattice)
    smap = successor_map(lo, hi, sigma_v, partition)
    cert = synthesize(partition, smap, N, method=method, bound_kind=kind,
                      delta=delta if kind == "prob" else None,
                      uniform_bound_calls=partition.n_regions * len(ctxs))
    cert = replace(cert, timing_seconds=time.perf_counter() - t0)
    return cert, verify_certificate(cert, partition, smap), smap


def simulate_safety(system, partition, N, runs, seed=0):
    """Fraction of ``runs`` trajectories from the initial box that leave ``X_s`` within ``N`` steps.

    Uses the true map of ``system`` and its noise model.
    """
    if runs < 1:
        raise InputError("runs must be >= 1")
    rng = np.random.default_rng(seed)
    init = partition.initial
    x = rng.uniform(init[:, 0], init[:, 1], size=(runs, partition.dim))
    alive = partition.contains(x)
    for _ in range(N):
        noise = np.stack([system.noise.draw(rng, runs, system.noise.for_dim(i))
                          for i in range(partition.dim)], axis=1)
        x = system.evaluate(x) + noise
        alive &= partition.contains(x)
    return float(1.0 - alive.mean())
