"""Benchmark systems, bounded noise models and dataset generation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InputError
from .gp import Dataset

NOISE_KINDS = ("uniform", "pert")


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Zero-mean noise supported on ``[-support_i, support_i]`` per dimension.

    ``pert`` is the symmetric PERT distribution (min ``-s``, mode 0, max ``s``,
    shape 4), i.e. ``Beta(3, 3)`` rescaled to ``[-s, s]``.
    """

    kind: str
    support: np.ndarray

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in NOISE_KINDS:
            raise InputError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        sup = np.atleast_1d(np.asarray(self.support, dtype=float))
        if np.any(~np.isfinite(sup)) or np.any(sup < 0):
            raise InputError(f"noise support must be >= 0, got {self.support}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "support", sup)

    def for_dim(self, i):
        s = self.support
        return float(s[0] if s.size == 1 else s[i])

    def draw(self, rng, shape, scale):
        """Samples in ``[-scale, scale]`` from a generator (for per-dimension use)."""
        if scale == 0:
            return np.zeros(shape)
        if self.kind == "uniform":
            return rng.uniform(-scale, scale, size=shape)
        return scale * (2.0 * rng.beta(3.0, 3.0, size=shape) - 1.0)

    def sampler(self, i=0):
        """``(rng, shape) -> samples`` for output dimension ``i``."""
        scale = self.for_dim(i)
        return lambda rng, shape: self.draw(rng, shape, scale)


def sample_noise(spec, n, seed=0, dim=None):
    """``n`` i.i.d. noise vectors, shape ``(n, dim)``; ``dim`` defaults to the support length."""
    if n < 1:
        raise InputError("n must be >= 1")
    dim = spec.support.size if dim is None else dim
    rng = np.random.default_rng(seed)
    return np.stack([spec.draw(rng, n, spec.for_dim(i)) for i in range(dim)], axis=1)


@dataclass(frozen=True, eq=False)
class DynSystem:
    """A map ``f: R^d -> R^k`` with its domain box, RKHS norm bounds and noise."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    domain: np.ndarray
    B: np.ndarray
    noise: NoiseSpec
    description: str = ""
    n_outputs: int = field(default=None)

    def __post_init__(self):
        dom = np.asarray(self.domain, dtype=float).reshape(-1, 2)
        if np.any(dom[:, 1] <= dom[:, 0]):
            raise InputError(f"{self.name}: degenerate domain {dom.tolist()}")
        B = np.atleast_1d(np.asarray(self.B, dtype=float))
        if np.any(B <= 0):
            raise InputError(f"{self.name}: B must be positive")
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "B", B)
        k = self.n_outputs
        if k is None:
            k = np.atleast_2d(self.evaluate(dom.mean(axis=1)[None, :])).shape[1]
            object.__setattr__(self, "n_outputs", int(k))
        if B.size != self.n_outputs:
            raise InputError(f"{self.name}: {B.size} norm bounds for {self.n_outputs} outputs")

    @property
    def dim(self):
        return self.domain.shape[0]

    def evaluate(self, X):
        """``f`` at ``(n, d)`` points, returned as ``(n, k)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.domain.shape[0]:
            raise InputError(f"{self.name} expects dimension {self.domain.shape[0]}, got {X.shape[1]}")
        out = np.asarray(self.f(X), dtype=float)
        return out.reshape(X.shape[0], -1)

    def output(self, i):
        """Scalar-valued ``x -> f_i(x)`` for ``(n, d)`` inputs."""
        return lambda X: self.evaluate(X)[:, i]

    def sample_domain(self, n, rng):
        return rng.uniform(self.domain[:, 0], self.domain[:, 1], size=(n, self.dim))

    def with_noise(self, noise):
        return DynSystem(self.name, self.f, self.domain, self.B, noise, self.description, self.n_outputs)


# ---------------------------------------------------------------------------
# Built-in systems
# ---------------------------------------------------------------------------

LIN4D_MATRIX = np.array([
    [0.6, 0.2, 0.1, 0.0],
    [0.0, 0.63, 0.2, 0.05],
    [0.0, 0.0, 0.51, 0.15],
    [0.0, 0.0, 0.0, 0.2],
])

LIN2D_MATRIX = np.array([
    [0.4, 0.1],
    [0.1, 0.4],
])

DT = 0.1
DUBINS_SPEED = 1.0
DUBINS_TURN = 0.5
CAR_DAMPING = 0.5


def linear_map(A):
    A = np.asarray(A, dtype=float)
    return lambda X: X @ A.T


def _toy1d(X):
    x = X[:, 0]
    return (x * np.sin(x))[:, None]


def _nl2d(X):
    x1, x2 = X[:, 0], X[:, 1]
    return np.stack([x1 + DT * x2, x2 + DT * (-x1 + (1.0 - x1 ** 2) * x2)], axis=1)


def _dubins3d(X):
    px, py, th = X[:, 0], X[:, 1], X[:, 2]
    return np.stack([
        px + DT * DUBINS_SPEED * np.cos(th),
        py + DT * DUBINS_SPEED * np.sin(th),
        th + DT * DUBINS_TURN,
    ], axis=1)


def _car5d(X):
    # planar car with speed and turn rate as states, linear damping on both
    px, py, th, v, w = X.T
    return np.stack([
        px + DT * v * np.cos(th),
        py + DT * v * np.sin(th),
        th + DT * w,
        v - DT * CAR_DAMPING * v,
        w - DT * CAR_DAMPING * w,
    ], axis=1)


EXPRESSIONS = {
    "toy1d": _toy1d,
    "nl2d": _nl2d,
    "dubins3d": _dubins3d,
    "car5d": _car5d,
}


def _builtin_table():
    u = lambda s: NoiseSpec("uniform", [s])
    return {
        "toy1d": dict(f=_toy1d, domain=[[0.0, 10.0]], B=[40.0], noise=u(0.5),
                      description="y = x sin(x)"),
        "lin2d": dict(f=linear_map(LIN2D_MATRIX), domain=[[-2.0, 2.0]] * 2, B=[10.0, 10.0],
                      noise=u(0.1), description="y = (0.4 x1 + 0.1 x2, 0.1 x1 + 0.4 x2)"),
        "nl2d": dict(f=_nl2d, domain=[[-2.0, 2.0]] * 2, B=[10.0, 10.0], noise=u(0.1),
                     description="Van der Pol step, dt = 0.1"),
        "dubins3d": dict(f=_dubins3d, domain=[[0.0, 10.0], [0.0, 2.0], [-0.5, 0.5]],
                         B=[20.0, 5.0, 5.0], noise=u(0.1),
                         description="Dubins car step, speed 1, turn rate 0.5, dt = 0.1"),
        "car5d": dict(f=_car5d, domain=[[-2.0, 2.0]] * 2 + [[-0.5, 0.5]] * 3,
                      B=[8.0, 8.0, 5.0, 5.0, 5.0], noise=u(0.2),
                      description="second-order planar car step, dt = 0.1"),
        "lin4d": dict(f=linear_map(LIN4D_MATRIX), domain=[[-0.7, 0.7]] * 4,
                      B=[1.4, 1.5, 1.4, 0.9], noise=NoiseSpec("pert", [0.05]),
                      description="contractive upper-triangular linear system"),
    }


SYSTEM_NAMES = ("toy1d", "lin2d", "nl2d", "dubins3d", "car5d", "lin4d")


def builtin_system(name):
    table = _builtin_table()
    if name not in table:
        raise InputError(f"unknown system {name!r}; choose from {', '.join(SYSTEM_NAMES)}")
    return DynSystem(name=name, **table[name])


def system_from_config(doc):
    """Build a system from a name or ``{name, matrix | expression, domain, B, noise}``.

    Keys other than ``name`` override the built-in definition of that name. A
    ``matrix`` defines a linear map; ``expression`` selects one of the built-in
    nonlinear maps by id.
    """
    if isinstance(doc, str):
        return builtin_system(doc)
    name = doc.get("name", "custom")
    base = _builtin_table().get(name, {})
    if not base and "matrix" not in doc and "expression" not in doc:
        raise InputError(f"system {name!r} is not built in and defines neither 'matrix' nor 'expression'")
    kw = dict(base)
    if "matrix" in doc:
        kw["f"] = linear_map(doc["matrix"])
    if "expression" in doc:
        if doc["expression"] not in EXPRESSIONS:
            raise InputError(f"unknown expression {doc['expression']!r}; choose from {sorted(EXPRESSIONS)}")
        kw["f"] = EXPRESSIONS[doc["expression"]]
    if "domain" in doc:
        kw["domain"] = doc["domain"]
    if "B" in doc:
        kw["B"] = doc["B"]
    if "noise" in doc:
        kw["noise"] = NoiseSpec(doc["noise"].get("kind", "uniform"), doc["noise"]["support"])
    for req in ("f", "domain", "B", "noise"):
        if req not in kw:
            raise InputError(f"system {name!r}: missing {req!r}")
    kw.pop("description", None)
    return DynSystem(name=name, description=doc.get("description", ""), **kw)


def generate_dataset(system, m, noise=None, seed=0):
    """One :class:`Dataset` per output of ``system``.

    Inputs are uniform over the domain box; ``y_i = f(x_i) + v_i`` with noise
    drawn independently per output dimension.
    """
    if m < 1:
        raise InputError("m must be >= 1")
    noise = system.noise if noise is None else noise
    rng = np.random.default_rng(seed)
    X = system.sample_domain(m, rng)
    F = system.evaluate(X)
    out = []
    for i in range(system.n_outputs):
        s = noise.for_dim(i)
        v = noise.draw(rng, m, s)
        out.append(Dataset(X, F[:, i] + v, s))
    return out
