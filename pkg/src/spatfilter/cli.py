"""Config-driven experiment runner.

Subcommands: ``simulate`` (write a dataset), ``filter`` (replicated
likelihood evaluations), ``scaling`` (filter comparison across unit counts),
``slice`` / ``profile`` (likelihood exploration along one parameter, with
adjusted confidence intervals), ``state`` (latent-state estimates) and
``bench`` (replicates-versus-particles budget sweeps).

Experiments are described by a JSON config file; ``--seed``, ``--out`` and
``--threads`` override config values.  Result CSVs are deterministic for a
given (config, seed) apart from the wall-clock runtime column; thread count
affects speed only, never results.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import baselines
from .bagged import BaggedConfig, StateFunction, abf_loglik, abfir_loglik, \
    bagged_state_estimate, ubf_loglik
from .core.errors import ConfigurationError, SpatFilterError
from .core.model import simulate_dataset
from .core.neighborhoods import Neighborhood
from .core.rng import derive_seed
from .inference import IabfConfig, McapInterval, mcap_interval, \
    run_profile, run_slice
from .models import bm_kalman_matrices, build_model, load_case_csv, \
    model_family, parameter_transforms

RESULT_COLUMNS = [
    "experiment_id", "model", "filter", "U", "N", "R", "Np", "S", "Nguide",
    "block_size", "neighborhood_tag", "seed", "loglik",
    "loglik_per_unit_time", "runtime_seconds", "degenerate_weight_events",
    "status",
]

SLICE_COLUMNS = ["row_type", "profiled_value", "loglik", "mc_se", "smoothed",
                 "interval_lo", "interval_hi", "cutoff", "true_value"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "nan" if v != v else repr(v)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_csv(path, columns, rows, append=False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    exists = path.exists() and append
    mode = "a" if append else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not exists:
            writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _load_config(path):
    if path is None:
        raise ConfigurationError("--config is required")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _neighborhood_from(spec, model_name) -> Neighborhood:
    if spec is None:
        return default_neighborhood(model_name)
    kind = spec.get("kind", "lags")
    if kind == "lags":
        return Neighborhood.co_located_lags(int(spec.get("lags", 2)))
    if kind == "offsets":
        return Neighborhood.lags_plus_spatial(
            [tuple(o) for o in spec["offsets"]])
    if kind == "empty":
        return Neighborhood.empty()
    raise ConfigurationError("unknown neighborhood kind %r" % kind)


def default_neighborhood(model_name: str) -> Neighborhood:
    if model_name in ("bm", "lorenz96"):
        return Neighborhood.lags_plus_spatial([(1, 0), (2, 0), (0, 1), (0, 2)])
    return Neighborhood.co_located_lags(2)


def _neighborhood_tag(spec, model_name) -> str:
    if spec is None:
        return "default"
    kind = spec.get("kind", "lags")
    if kind == "lags":
        return "lags%d" % int(spec.get("lags", 2))
    if kind == "offsets":
        return "offsets_" + "_".join("%d-%d" % tuple(o)
                                     for o in spec["offsets"])
    return kind


def _build_model_from(cfg, n_units=None):
    mc = cfg["model"]
    return build_model(mc["name"], n_units or int(mc["n_units"]),
                       int(mc["n_times"]), mc.get("params"),
                       demographics_seed=int(mc.get("demographics_seed", 0)),
                       demographics_path=mc.get("demographics_path"))


def _get_data(cfg, model, seed):
    data_cfg = cfg.get("data", {})
    if "path" in data_cfg:
        return load_case_csv(data_cfg["path"], model.dims.n_units,
                             model.dims.n_times)
    sim_seed = int(data_cfg.get("simulate_seed", derive_seed(seed, 1)))
    return simulate_dataset(model, sim_seed).y


def run_named_filter(name, model, y, fspec, seed):
    """Dispatch one filter run.

    Returns (total, degenerate_events, unit_logliks_or_None).
    """
    scheme = fspec.get("resample_scheme", "systematic")
    nb = _neighborhood_from(fspec.get("neighborhood"), _model_name_of(model))
    if name in ("ubf", "abf", "abfir"):
        cfg = BaggedConfig(
            neighborhood=nb,
            n_replicates=int(fspec.get("n_replicates", 100)),
            n_particles=int(fspec.get("n_particles", 1)),
            n_intermediate=int(fspec.get("n_intermediate", 1)),
            n_guide=int(fspec.get("n_guide", 0)),
            resample_scheme=scheme, seed=seed)
        fn = {"ubf": ubf_loglik, "abf": abf_loglik, "abfir": abfir_loglik}[name]
        res = fn(model, y, cfg)
        return (res.total, res.diagnostics.degenerate_weight_events,
                res.unit_logliks)
    if name == "pf":
        res = baselines.pf_loglik(model, y, int(fspec.get("n_particles", 1000)),
                                  seed=seed, resample_scheme=scheme)
        return res.total, res.diagnostics.degenerate_weight_events, None
    if name == "bpf":
        part = baselines.BlockPartition.contiguous(
            model.dims.n_units, int(fspec.get("block_size", 2)))
        res = baselines.bpf_loglik(model, y,
                                   int(fspec.get("n_particles", 1000)),
                                   part, seed=seed, resample_scheme=scheme)
        return res.total, res.diagnostics.degenerate_weight_events, None
    if name == "enkf":
        res = baselines.enkf_loglik(model, y,
                                    int(fspec.get("n_ensemble", 1000)),
                                    seed=seed)
        return res.total, 0, None
    if name == "girf":
        res = baselines.girf_loglik(
            model, y, int(fspec.get("n_particles", 1000)),
            n_guide=int(fspec.get("n_guide", 30)),
            lookahead=int(fspec.get("lookahead", 1)),
            n_intermediate=int(fspec.get("n_intermediate", 1)),
            seed=seed, resample_scheme=scheme)
        return res.total, res.diagnostics.degenerate_weight_events, None
    if name == "kf":
        system = _kalman_system_for(model)
        res = baselines.kalman_loglik(system, y)
        return res.total, 0, None
    raise ConfigurationError("unknown filter %r" % name)


def _model_name_of(model) -> str:
    from .models.brownian import CorrelatedBrownianMotion
    from .models.lorenz96 import Lorenz96
    from .models.measles import MeaslesMetapop
    from .models.sv import StochasticVolatilityToy
    return {CorrelatedBrownianMotion: "bm", Lorenz96: "lorenz96",
            MeaslesMetapop: "measles",
            StochasticVolatilityToy: "sv"}[type(model)]


def _kalman_system_for(model):
    if _model_name_of(model) != "bm":
        raise ConfigurationError(
            "the exact Kalman evaluator applies to the linear-Gaussian model")
    return baselines.LinearGaussianSystem.from_dict(
        bm_kalman_matrices(model.params))


def make_evaluator(fspec):
    """(model, y, seed) -> total log-likelihood for slice/profile points."""
    name = fspec.get("name", "abf")

    def evaluate(model, y, seed):
        return run_named_filter(name, model, y, fspec, seed)[0]

    return evaluate


def _per_un_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_per_un.csv")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg, args):
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    out = Path(args.out or cfg.get("out", "."))
    model = _build_model_from(cfg)
    data = simulate_dataset(model, seed)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg["model"]["name"]
    if name == "measles":
        obs_cols = ["city_id", "time_index", "cases"]
    else:
        obs_cols = ["unit", "time_index", "value"]
    rows = []
    for u in range(model.dims.n_units):
        for n in range(model.dims.n_times):
            value = data.y[u, n]
            rows.append([u + 1, n + 1,
                         int(value) if name == "measles" else value])
    _write_csv(out / "observations.csv", obs_cols, rows)
    lat_rows = []
    for n in range(model.dims.n_times + 1):
        for u in range(model.dims.n_units):
            for comp in range(model.state_dim):
                lat_rows.append([u + 1, n, comp, data.latent[n, u, comp]])
    _write_csv(out / "latent.csv", ["unit", "time_index", "component", "value"],
               lat_rows)
    manifest = {
        "model": cfg["model"], "seed": seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "files": ["observations.csv", "latent.csv"],
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print("wrote %s" % (out / "observations.csv"))
    return 0


def _filter_rows(cfg, args, model, y, seed, experiment_id=None, n_units=None):
    fspec = cfg["filter"]
    name = fspec["name"]
    replications = int(cfg.get("replications", 1))
    threads = _threads(args, cfg)
    experiment_id = experiment_id or cfg.get("experiment_id", "experiment")
    dims = model.dims

    def one(rep):
        run_seed = derive_seed(seed, 7, rep)
        start = time.perf_counter()
        try:
            total, degen, per_un = run_named_filter(name, model, y, fspec,
                                                    run_seed)
            status = "ok"
        except SpatFilterError as exc:
            total, degen, per_un = float("nan"), 0, None
            status = "error:%s" % exc
        runtime = time.perf_counter() - start
        per_ut = total / (dims.n_units * dims.n_times)
        row = [experiment_id, _model_name_of(model), name, dims.n_units,
               dims.n_times, fspec.get("n_replicates", ""),
               fspec.get("n_particles", ""), fspec.get("n_intermediate", ""),
               fspec.get("n_guide", ""), fspec.get("block_size", ""),
               _neighborhood_tag(fspec.get("neighborhood"),
                                 _model_name_of(model)),
               run_seed, total, per_ut, round(runtime, 3), degen, status]
        return row, (rep, per_un)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(replications)))
    else:
        results = [one(rep) for rep in range(replications)]
    rows = [r[0] for r in results]
    if getattr(args, "per_un", False):
        long_rows = []
        for row, (rep, per_un) in results:
            if per_un is None:
                continue
            for u in range(per_un.shape[0]):
                for n in range(per_un.shape[1]):
                    long_rows.append([experiment_id, rep, u + 1, n + 1,
                                      per_un[u, n]])
        if long_rows:
            out = args.out or cfg.get("out", "results.csv")
            _write_csv(_per_un_path(out),
                       ["experiment_id", "replication", "unit", "time_index",
                        "loglik"], long_rows, append=True)
    return rows


def cmd_filter(cfg, args):
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    model = _build_model_from(cfg)
    y = _get_data(cfg, model, seed)
    rows = _filter_rows(cfg, args, model, y, seed)
    out = args.out or cfg.get("out", "results.csv")
    _write_csv(out, RESULT_COLUMNS, rows, append=True)
    print("wrote %d rows to %s" % (len(rows), out))
    return 0


def cmd_scaling(cfg, args):
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    scaling = cfg.get("scaling", {})
    unit_grid = scaling.get("unit_grid") or [int(cfg["model"]["n_units"])]
    filters = scaling.get("filters") or [cfg["filter"]]
    rows = []
    for n_units in unit_grid:
        model = _build_model_from(cfg, n_units=int(n_units))
        y = _get_data(cfg, model, derive_seed(seed, 11, int(n_units)))
        for fspec in filters:
            sub = dict(cfg)
            sub["filter"] = fspec
            tag = "%s-U%d-%s" % (cfg.get("experiment_id", "scaling"),
                                 int(n_units), fspec["name"])
            rows.extend(_filter_rows(sub, args, model, y, seed,
                                     experiment_id=tag))
    out = args.out or cfg.get("out", "scaling.csv")
    _write_csv(out, RESULT_COLUMNS, rows, append=False)
    print("wrote %d rows to %s" % (len(rows), out))
    return 0


def _interval_for(points, confidence):
    """Adjusted interval, or the unbounded marker when the fit cannot run."""
    try:
        return mcap_interval(points, confidence)
    except ConfigurationError:
        return McapInterval(lo=float("-inf"), hi=float("inf"),
                            cutoff=float("nan"), argmax=float("nan"),
                            max_value=float("nan"),
                            coefficients=(float("nan"),) * 3, unbounded=True)


def _slice_rows(points, interval, true_value):
    rows = []
    for p in points:
        smoothed = "" if interval.unbounded else interval.smoothed(
            p.profiled_value)
        rows.append(["point", p.profiled_value, p.loglik, p.mc_se, smoothed,
                     "", "", "", true_value])
    if interval.unbounded:
        rows.append(["interval", "", "", "", "", "unbounded", "unbounded",
                     "", true_value])
    else:
        rows.append(["interval", "", "", "", "", interval.lo, interval.hi,
                     interval.cutoff, true_value])
    return rows


def cmd_slice(cfg, args):
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    sl = cfg["slice"]
    mc = cfg["model"]
    model = _build_model_from(cfg)
    y = _get_data(cfg, model, seed)
    fam = model_family(mc["name"], model.dims.n_units, model.dims.n_times,
                       mc.get("params"),
                       demographics_seed=int(mc.get("demographics_seed", 0)),
                       demographics_path=mc.get("demographics_path"))
    base = dict(model.theta)
    base.update(mc.get("params") or {})
    points = run_slice(fam, y, sl["param"], sl["grid"],
                       make_evaluator(cfg["filter"]), base,
                       replications=int(sl.get("replications", 2)), seed=seed)
    interval = _interval_for(points, float(sl.get("confidence", 0.95)))
    true_value = (mc.get("params") or {}).get(sl["param"], "")
    rows = _slice_rows(points, interval, true_value)
    out = args.out or cfg.get("out", "slice.csv")
    _write_csv(out, SLICE_COLUMNS, rows)
    print("wrote %s (interval: %s .. %s)" % (out, interval.lo, interval.hi))
    return 0


def cmd_profile(cfg, args):
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    pr = cfg["profile"]
    mc = cfg["model"]
    model = _build_model_from(cfg)
    y = _get_data(cfg, model, seed)
    fam = model_family(mc["name"], model.dims.n_units, model.dims.n_times,
                       mc.get("params"),
                       demographics_seed=int(mc.get("demographics_seed", 0)),
                       demographics_path=mc.get("demographics_path"))
    base = dict(model.theta)
    base.update(mc.get("params") or {})
    iabf_cfg = IabfConfig(
        n_iterations=int(pr.get("n_iterations", 5)),
        n_param_sets=int(pr.get("n_param_sets", 20)),
        perturb_sd=pr.get("perturb_sd", {}),
        cooling=float(pr.get("cooling", 0.5)),
        resample_prop=float(pr.get("resample_prop", 0.5)),
        fixed_params=frozenset(pr.get("fixed_params", [])))
    fspec = cfg["filter"]
    nb = _neighborhood_from(fspec.get("neighborhood"), mc["name"])
    fc = BaggedConfig(neighborhood=nb,
                      n_replicates=int(fspec.get("n_replicates", 100)),
                      n_particles=int(fspec.get("n_particles", 10)),
                      resample_scheme=fspec.get("resample_scheme",
                                                "systematic"),
                      seed=seed)
    transforms = parameter_transforms(mc["name"], list(base.keys()))
    points = run_profile(fam, y, pr["param"], pr["grid"], fc, iabf_cfg, base,
                         make_evaluator(fspec), transforms=transforms,
                         replications=int(pr.get("replications", 2)),
                         seed=seed)
    interval = _interval_for(points, float(pr.get("confidence", 0.95)))
    true_value = (mc.get("params") or {}).get(pr["param"], "")
    rows = _slice_rows(points, interval, true_value)
    out = args.out or cfg.get("out", "profile.csv")
    _write_csv(out, SLICE_COLUMNS, rows)
    print("wrote %s (interval: %s .. %s)" % (out, interval.lo, interval.hi))
    return 0


def cmd_state(cfg, args):
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    st = cfg.get("state", {})
    model = _build_model_from(cfg)
    y = _get_data(cfg, model, seed)
    fspec = cfg["filter"]
    nb_tag = _model_name_of(model)
    cfg_b = BaggedConfig(
        neighborhood=_neighborhood_from(fspec.get("neighborhood"), nb_tag),
        n_replicates=int(fspec.get("n_replicates", 1000)),
        n_particles=int(fspec.get("n_particles", 1)),
        n_intermediate=int(fspec.get("n_intermediate", 1)),
        n_guide=int(fspec.get("n_guide", 0)),
        resample_scheme=fspec.get("resample_scheme", "systematic"),
        seed=seed)
    specs = st.get("functions") or [{"unit": u + 1}
                                    for u in range(model.dims.n_units)]
    functions = [StateFunction.unit_mean(int(s["unit"]),
                                         lags=int(s.get("lags", 1)),
                                         component=int(s.get("component", 0)))
                 for s in specs]
    est = bagged_state_estimate(model, y, cfg_b, functions)
    rows = []
    for k, sf in enumerate(functions):
        for n in range(model.dims.n_times):
            rows.append([sf.name, n + 1, est[k, n]])
    out = args.out or cfg.get("out", "state.csv")
    _write_csv(out, ["function", "time_index", "estimate"], rows)
    print("wrote %s" % out)
    return 0


def cmd_bench(cfg, args):
    """Replicates-versus-particles sweep at an approximately fixed budget."""
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    bench = cfg.get("bench", {})
    budget = int(bench.get("budget", 4000))
    particle_grid = bench.get("particle_grid", [1, 5, 20, 100])
    model = _build_model_from(cfg)
    y = _get_data(cfg, model, seed)
    rows = []
    base_filter = dict(cfg.get("filter", {"name": "abf"}))
    for n_particles in particle_grid:
        n_particles = int(n_particles)
        n_replicates = max(1, budget // n_particles)
        fspec = dict(base_filter)
        fspec.update({"name": "abf", "n_replicates": n_replicates,
                      "n_particles": n_particles})
        sub = dict(cfg)
        sub["filter"] = fspec
        tag = "bench-R%d-Np%d" % (n_replicates, n_particles)
        rows.extend(_filter_rows(sub, args, model, y, seed,
                                 experiment_id=tag))
    out = args.out or cfg.get("out", "bench.csv")
    _write_csv(out, RESULT_COLUMNS, rows, append=False)
    print("wrote %d rows to %s" % (len(rows), out))
    return 0


def _threads(args, cfg) -> int:
    if args.threads is not None:
        return int(args.threads)
    env = os.environ.get("SPATFILTER_THREADS")
    if env:
        return int(env)
    return int(cfg.get("threads", 1))


def main(argv=None) -> int:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON experiment config")
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--threads", type=int, default=None,
                        help="worker threads (speed only, never results)")
    shared.add_argument("--out", default=None)
    shared.add_argument("--per-un", action="store_true", dest="per_un",
                        help="also write per-(unit, time) conditional "
                             "log-likelihoods where available")
    parser = argparse.ArgumentParser(
        prog="spatfilter",
        description="Bagged and baseline filters for spatiotemporal "
                    "state-space models")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "filter", "scaling", "slice", "profile",
                 "state", "bench"):
        sub.add_parser(name, parents=[shared])
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate, "filter": cmd_filter,
        "scaling": cmd_scaling, "slice": cmd_slice, "profile": cmd_profile,
        "state": cmd_state, "bench": cmd_bench,
    }
    try:
        cfg = _load_config(args.config)
        return handlers[args.command](cfg, args)
    except (SpatFilterError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
