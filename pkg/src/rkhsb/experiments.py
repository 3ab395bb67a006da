"""Building blocks shared by the command line and the acceptance suite."""

from __future__ import annotations

import numpy as np

from . import bounds
from .errors import InputError
from .gp import Dataset, fit
from .kernels import FeatureMap, KernelSpec, train_feature_map
from .systems import NoiseSpec, generate_dataset

# offset between predictive-data seeds and feature-map training-data seeds
TRAIN_SEED_OFFSET = 10_000

SWEEP_COLUMNS = (
    "mu", "sigma", "eps_det_ours", "eps_prob_ours", "eps_det_hashimoto", "eps_prob_chowdhury",
    "eps_prob_abbasi", "eps_prob_seeger", "eps_det_maddalena", "f_true",
)

# Column order: deterministic bounds first, then probabilistic ones
BENCH_COLUMNS = ("true", "our_det", "lem2_det", "our_prob", "ay_prob", "lem1_prob", "skks_prob")
_BENCH_SOURCE = {
    "our_det": "eps_det_ours", "lem2_det": "eps_det_hashimoto", "our_prob": "eps_prob_ours",
    "ay_prob": "eps_prob_abbasi", "lem1_prob": "eps_prob_chowdhury", "skks_prob": "eps_prob_seeger",
}


def kernel_label(kdoc):
    return "DKL" if "dkl" in kdoc else "SE"


def make_kernel(kdoc, system=None, output=0, seed=0, train_data=None):
    """Kernel from a config entry; a ``dkl`` entry trains a feature map first.

    The feature map is fitted to noisy samples of output ``output`` drawn with
    seed ``TRAIN_SEED_OFFSET + seed`` (or to ``train_data``), so it never sees
    the predictive data.
    """
    ls = kdoc.get("lengthscale", 1.0)
    signal = kdoc.get("signal", 1.0)
    sq = kdoc.get("squared_distance", True)
    if "dkl" not in kdoc:
        return KernelSpec(ls, signal, squared_distance=sq)
    opts = kdoc["dkl"]
    if train_data is None:
        if system is None:
            raise InputError("a DKL kernel needs a system to draw training data from")
        train_data = generate_dataset(system, opts.get("train_size", 1000),
                                      seed=TRAIN_SEED_OFFSET + seed)[output]
    layers = [train_data.dim, *opts.get("hidden", [16, 16]), 1]
    fmap = FeatureMap.init(layers, opts.get("activation", "gelu"), seed=seed)
    fmap = train_feature_map(
        fmap, train_data.X, train_data.y,
        epochs=opts.get("epochs", 2000),
        batch_fraction=opts.get("batch_fraction", 0.02),
        step_size=opts.get("step_size", 1e-3),
        seed=seed,
    )
    return KernelSpec(ls, signal, feature_map=fmap, squared_distance=sq)


def datasets(cfg, seed, m=None):
    """Predictive datasets (one per output) for a run."""
    if cfg.dataset is not None:
        return [Dataset.from_csv(cfg.dataset, cfg.noise_level(0))]
    noise = None
    if cfg.sigma_v is not None:
        noise = NoiseSpec(cfg.system.noise.kind, [cfg.sigma_v])
    return generate_dataset(cfg.system, cfg.m if m is None else m, noise=noise, seed=seed)


def bound_columns(ctx, X, delta, f_true=None):
    """All pointwise bounds at ``X`` as a dict keyed by :data:`SWEEP_COLUMNS`.

    Bounds that need ``sigma_v > 0`` are NaN when ``sigma_v = 0``.
    """
    gp, B, sv = ctx.gp, ctx.B, ctx.sigma_v
    mean, std, lam, Lam = ctx.terms(X)
    slack = ctx.rkhs_slack
    nan = np.full(mean.shape, np.nan)
    L = float(np.max(gp.kernel.diag(X[:1])))
    cols = {
        "mu": mean,
        "sigma": std,
        "eps_det_ours": std * slack + Lam,
        "eps_prob_ours": std * slack + np.sqrt(0.5 * lam * np.log(2.0 / delta)),
        "eps_det_hashimoto": bounds.hashimoto_bound(gp, B, sv, X) if sv > 0 else nan,
        "eps_prob_chowdhury": bounds.chowdhury_bound(gp, B, sv, delta, X),
        "eps_prob_abbasi": bounds.abbasi_bound(gp, B, sv, L, delta, X),
        "eps_prob_seeger": bounds.seeger_bound(gp, B, sv, delta, X) if sv > 0 else nan,
        "eps_det_maddalena": bounds.maddalena_bound(gp, B, sv, X),
        "f_true": nan if f_true is None else np.asarray(f_true, dtype=float),
    }
    return {k: np.atleast_1d(v) for k, v in cols.items()}


def bench_summary(cols):
    """Domain averages in :data:`BENCH_COLUMNS` order (``true`` is the mean absolute error)."""
    out = {"true": float(np.mean(np.abs(cols["mu"] - cols["f_true"])))}
    for name, src in _BENCH_SOURCE.items():
        out[name] = float(np.mean(cols[src]))
    return out


def fit_context(kernel, data, sigma_n, B):
    return bounds.BoundContext(fit(kernel, data, sigma_n), B, data.sigma_v)


def query_points(system, n, seed):
    return system.sample_domain(n, np.random.default_rng(seed))
