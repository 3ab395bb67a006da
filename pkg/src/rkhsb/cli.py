"""``rkhsb`` command line: bound sweeps, benchmark tables, barrier runs and coverage checks.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for numerical
failures (ill-conditioning, invalid norm bound, diverged training, failed
certificate verification).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import barrier as br
from .bounds import BoundContext, coverage_report
from .config import load_config
from .errors import (ConditioningError, ConfigError, InputError, InvalidBoundError,
                     TrainingDivergenceError)
from .experiments import (BENCH_COLUMNS, SWEEP_COLUMNS, bench_summary, bound_columns, datasets,
                          kernel_label, make_kernel)
from .gp import fit
from .svg import LinePlot

logger = logging.getLogger("rkhsb")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
TEST_SEED_OFFSET = 20_000


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def ascii_table(header, rows):
    """Fixed-width table with a rule under the header."""
    cells = [[_cell(v) for v in r] for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    line = lambda vals: "  ".join(v.rjust(w) for v, w in zip(vals, widths))
    out = [line(header), "  ".join("-" * w for w in widths)]
    out += [line(r) for r in cells]
    return "\n".join(out)


def _cell(v):
    if isinstance(v, float):
        return "nan" if np.isnan(v) else f"{v:.4g}"
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _system_name(cfg):
    return cfg.system.name if cfg.system is not None else Path(cfg.dataset).stem


def _tag(*parts):
    return "_".join(str(p).replace("*", "x").replace("/", "-") for p in parts)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_sweep(cfg):
    """Bounds along a 1D line through the domain: CSV plus SVG per seed, kernel and sigma_n."""
    sec = cfg.section("sweep")
    grid, output, axis = sec.get("grid", 500), sec.get("output", 0), sec.get("axis", 0)
    delta = cfg.deltas[0]
    written = []
    for seed in cfg.seeds:
        data = datasets(cfg, seed)[output]
        if axis >= data.dim:
            raise ConfigError(f"sweep axis {axis} out of range for dimension {data.dim}")
        dom = (cfg.system.domain if cfg.system is not None
               else np.stack([data.X.min(axis=0), data.X.max(axis=0)], axis=1))
        X = np.tile(dom.mean(axis=1), (grid, 1))
        X[:, axis] = np.linspace(dom[axis, 0], dom[axis, 1], grid)
        f_true = cfg.system.output(output)(X) if cfg.system is not None else None
        for kdoc in cfg.kernels:
            kernel = make_kernel(kdoc, cfg.system, output, seed)
            for label, sn in cfg.sigma_n_values(output):
                ctx = BoundContext(fit(kernel, data, sn), cfg.norm_bound(output), data.sigma_v)
                cols = bound_columns(ctx, X, delta, f_true)
                name = _tag("sweep", _system_name(cfg), kernel_label(kdoc), f"sn{sn:g}", f"seed{seed}")
                header = [f"x{i + 1}" for i in range(data.dim)] + list(SWEEP_COLUMNS)
                rows = np.column_stack([X] + [cols[c] for c in SWEEP_COLUMNS])
                _write_csv(cfg.out / f"{name}.csv", header, rows.tolist())
                _sweep_plot(X[:, axis], cols, data, axis, output).save(cfg.out / f"{name}.svg")
                written.append(name)
                avg = [(c, float(np.nanmean(cols[c])) if np.isfinite(cols[c]).any() else float("nan"))
                       for c in SWEEP_COLUMNS[2:-1]]
                print(f"{name}: c*={ctx.cstar:.4g}, domain averages (delta={delta:g})")
                print(ascii_table(["bound", "mean"], avg))
    return written


def _sweep_plot(x, cols, data, axis, output):
    plot = LinePlot(f"error bounds, output {output}", f"x{axis + 1}", "value")
    mu = cols["mu"]
    for c in SWEEP_COLUMNS[2:-1]:
        if np.isfinite(cols[c]).any():
            plot.band(x, mu - cols[c], mu + cols[c], c)
    plot.line(x, mu, "mu")
    if np.isfinite(cols["f_true"]).any():
        plot.line(x, cols["f_true"], "f_true", dashed=True)
    return plot


def cmd_bench(cfg):
    """Average bound widths over uniform test points, one row per kernel, sigma_n, seed and output.

    Multi-output systems get an extra ``l1`` row: the averages summed over
    outputs, i.e. the mean L1 norm of the error-bound vector.
    """
    if cfg.system is None:
        raise ConfigError("bench needs a system (true errors require the true map)")
    sec = cfg.section("bench")
    n_test = sec.get("test_points", 10_000)
    delta = cfg.deltas[0]
    header = ["system", "kernel", "sigma_n", "seed", "output", *BENCH_COLUMNS]
    rows = []
    for kdoc in cfg.kernels:
        for seed in cfg.seeds:
            data = datasets(cfg, seed)
            X = cfg.system.sample_domain(n_test, np.random.default_rng(TEST_SEED_OFFSET + seed))
            per_sn = {}
            for i, d in enumerate(data):
                kernel = make_kernel(kdoc, cfg.system, i, seed)
                for label, sn in cfg.sigma_n_values(i):
                    ctx = BoundContext(fit(kernel, d, sn), cfg.norm_bound(i), d.sigma_v)
                    summ = bench_summary(bound_columns(ctx, X, delta, cfg.system.output(i)(X)))
                    per_sn.setdefault(label, []).append(summ)
                    rows.append([cfg.system.name, kernel_label(kdoc), label, seed, i,
                                 *(summ[c] for c in BENCH_COLUMNS)])
            for label, summs in per_sn.items():
                if len(summs) > 1:
                    rows.append([cfg.system.name, kernel_label(kdoc), label, seed, "l1",
                                 *(sum(s[c] for s in summs) for c in BENCH_COLUMNS)])
    _write_csv(cfg.out / f"bench_{cfg.system.name}.csv", header, rows)
    print(f"average |eps| over {n_test} test points (delta={delta:g})")
    print(ascii_table(header, rows))
    if sec.get("m_values"):
        _bench_trend(cfg, sec["m_values"], n_test, delta)
    return rows


def _bench_trend(cfg, m_values, n_test, delta):
    """Bound width against data size for output 0: mean and std across test points."""
    header = ["kernel", "sigma_n", "seed", "m", "bound", "mean", "std"]
    rows = []
    for kdoc in cfg.kernels:
        for seed in cfg.seeds:
            kernel = make_kernel(kdoc, cfg.system, 0, seed)
            X = cfg.system.sample_domain(n_test, np.random.default_rng(TEST_SEED_OFFSET + seed))
            for m in m_values:
                d = datasets(cfg, seed, m=m)[0]
                for label, sn in cfg.sigma_n_values(0):
                    ctx = BoundContext(fit(kernel, d, sn), cfg.norm_bound(0), d.sigma_v)
                    cols = bound_columns(ctx, X, delta, cfg.system.output(0)(X))
                    for c in SWEEP_COLUMNS[2:-1]:
                        rows.append([kernel_label(kdoc), label, seed, m, c,
                                     float(np.mean(cols[c])), float(np.std(cols[c]))])
    _write_csv(cfg.out / f"trend_{cfg.system.name}.csv", header, rows)
    first = [r for r in rows if r[0] == rows[0][0] and r[1] == rows[0][1] and r[2] == rows[0][2]]
    plot = LinePlot("bound width against data size", "m", "mean |eps|", logy=True)
    for c in SWEEP_COLUMNS[2:-1]:
        pts = [(r[3], r[5]) for r in first if r[4] == c]
        if pts and np.isfinite([p[1] for p in pts]).any():
            plot.line([p[0] for p in pts], [p[1] for p in pts], c)
    plot.save(cfg.out / f"trend_{cfg.system.name}.svg")
    print(f"trend over m = {list(m_values)} written to trend_{cfg.system.name}.csv")


def cmd_barrier(cfg):
    """Region intervals, successor sets, LP synthesis and verification for each bound kind."""
    if cfg.system is None:
        raise ConfigError("barrier needs a system (dynamics evaluator and safe set)")
    system = cfg.system
    if system.n_outputs != system.dim:
        raise ConfigError(f"barrier needs a map R^d -> R^d; {system.name} has {system.dim} inputs "
                          f"and {system.n_outputs} outputs")
    sec = cfg.section("barrier")
    if "initial" not in sec:
        raise ConfigError("barrier.initial (the initial box) is required")
    partition = br.Partition(system.domain, sec.get("cells", 7), sec["initial"])
    horizons = sec.get("horizons", [1])
    kinds = sec.get("kinds", list(br.BOUND_KINDS))
    g = sec.get("grid_per_dim", 3)
    slack = sec.get("slack", br.DEFAULT_SLACK)
    delta = cfg.deltas[0]
    kdoc = cfg.kernels[0]
    header = ["system", "seed", "bound", "N", "eta", "beta", "P_s", "t", "verified"]
    rows = []
    for seed in cfg.seeds:
        data = datasets(cfg, seed)
        t0 = time.perf_counter()
        ctxs = []
        for i, d in enumerate(data):
            kernel = make_kernel(kdoc, system, i, seed)
            sn = cfg.sigma_n_values(i)[0][1]
            ctxs.append(BoundContext(fit(kernel, d, sn), cfg.norm_bound(i), d.sigma_v))
        fit_time = time.perf_counter() - t0
        lattice = br.LatticeStats(partition, g)
        sigma_v = [system.noise.for_dim(i) for i in range(system.dim)]
        for kind in kinds:
            t0 = time.perf_counter()
            lo, hi = br.region_dynamics_all(ctxs, partition, kind, delta, g, slack, lattice)
            smap = br.successor_map(lo, hi, sigma_v, partition)
            prep = time.perf_counter() - t0
            for N in horizons:
                cert = br.synthesize(partition, smap, N, bound_kind=kind,
                                     delta=delta if kind == "prob" else None,
                                     uniform_bound_calls=partition.n_regions * len(ctxs))
                cert = replace(cert, timing_seconds=prep + cert.timing_seconds)
                report = br.verify_certificate(cert, partition, smap)
                if not report.ok:
                    raise ArithmeticError(f"certificate verification failed ({kind}, N={N}): {report.first}")
                cert.to_json(cfg.out / f"barrier_{_tag(system.name, kind, f'N{N}', f'seed{seed}')}.json")
                rows.append([system.name, seed, kind, N, cert.eta, cert.beta, cert.P_s,
                             round(cert.timing_seconds, 2), "yes"])
                if cert.conservative:
                    print(f"note: {kind} N={N} hit the LP iteration cap; certificate is conservative")
        print(f"model fitting took {fit_time:.1f}s; {partition.n_regions} regions, delta={delta:g} "
              f"for prob ({partition.n_regions * len(ctxs)} uniform-bound evaluations, "
              "each holding with probability >= 1 - delta)")
        runs = sec.get("simulate", 0)
        if runs:
            for N in horizons:
                freq = br.simulate_safety(system, partition, N, runs, seed)
                print(f"simulated unsafe frequency over {runs} runs, N={N}: {freq:.5f}")
    _write_csv(cfg.out / f"barrier_{system.name}.csv", header, rows)
    print(ascii_table(header, rows))
    return rows


def cmd_coverage(cfg):
    """Monte Carlo coverage of the pointwise bounds at fixed training inputs."""
    if cfg.system is None:
        raise ConfigError("coverage needs a system to redraw noise from")
    sec = cfg.section("coverage")
    trials, queries, output = sec.get("trials", 10_000), sec.get("queries", 100), sec.get("output", 0)
    if trials < 1:
        raise InputError(f"coverage.trials must be >= 1, got {trials}")
    if queries < 1:
        raise InputError(f"coverage.queries must be >= 1, got {queries}")
    kdoc = cfg.kernels[0]
    reports = []
    for seed in cfg.seeds:
        data = datasets(cfg, seed)[output]
        kernel = make_kernel(kdoc, cfg.system, output, seed)
        sn = cfg.sigma_n_values(output)[0][1]
        ctx = BoundContext(fit(kernel, data, sn), cfg.norm_bound(output), data.sigma_v)
        rep = coverage_report(ctx, cfg.system, cfg.deltas, trials, queries, seed=seed, output=output)
        doc = {
            "system": cfg.system.name, "seed": seed, "trials": rep.trials, "queries": rep.queries,
            "det_violations": rep.det_violations,
            "prob": {str(d): {"max_rate": float(rep.prob_violation_rate[d].max()),
                              "mean_rate": float(rep.prob_violation_rate[d].mean()),
                              "threshold": rep.prob_threshold[d], "ok": rep.prob_ok(d)}
                     for d in rep.deltas},
        }
        with open(cfg.out / f"coverage_{_tag(cfg.system.name, f'seed{seed}')}.json", "w") as fh:
            json.dump(doc, fh, indent=2)
        print(f"{cfg.system.name} seed {seed}:")
        print(rep.summary())
        reports.append(rep)
    return reports


COMMANDS = {"sweep": cmd_sweep, "bench": cmd_bench, "barrier": cmd_barrier, "coverage": cmd_coverage}


def build_parser():
    p = argparse.ArgumentParser(prog="rkhsb", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON experiment file")
    p.add_argument("--seed", type=int, help="single seed (overrides 'seeds')")
    p.add_argument("--sigma-n-ratio", type=float, help="sigma_n as a multiple of sigma_v")
    p.add_argument("--delta", type=float, help="confidence parameter (overrides 'deltas')")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.sigma_n_ratio, args.delta, args.out)
        cfg.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConditioningError, InvalidBoundError, TrainingDivergenceError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
