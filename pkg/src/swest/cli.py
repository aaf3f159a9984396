"""Command-line interface: ``swest dist | estimate | experiment``.

Exit codes: 0 success, 2 usage or parse error, 3 data error, 4 optimizer
failure, 5 interrupted. Configuration precedence, lowest to highest: JSON
file, ``SWEST_SEED`` environment variable, command-line flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from dataclasses import asdict, fields, is_dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import fit_meswe, fit_mswe
from .exceptions import (
    DataParseError,
    DimensionMismatch,
    MaxIterExceeded,
    NonFiniteObjective,
    SizeCapExceeded,
    SizeMismatch,
)
from .experiments import (
    CltConfig,
    ConsistencyConfig,
    MesweToMsweConfig,
    TimingConfig,
    records_to_csv,
    run_clt_gaussian,
    run_consistency_gaussian,
    run_meswe_to_mswe,
    run_timing_comparison,
)
from .measures import interp_quantile, project_sorted, read_csv_measure
from .models import GaussianParams, sample_model
from .optim import AdamConfig, NelderMeadConfig
from .sampling import RngStream, sample_projections
from .transport import (
    SinkhornConfig,
    SwConfig,
    sinkhorn_distance,
    sw_distance,
    w_exact_assignment,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_OPTIMIZER, EXIT_INTERRUPTED = 0, 2, 3, 4, 5

EXPERIMENTS = {
    "consistency": ConsistencyConfig,
    "clt": CltConfig,
    "meswe-vs-mswe": MesweToMsweConfig,
    "timing": TimingConfig,
}
_NESTED = {"adam": AdamConfig, "nelder_mead": NelderMeadConfig, "sinkhorn": SinkhornConfig}


class ConfigError(ValueError):
    pass


class UsageError(Exception):
    pass


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def build_config(cls, data: dict):
    """Instantiate dataclass ``cls`` from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} config must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _NESTED and isinstance(value, dict):
            value = build_config(_NESTED[key], value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from None


def _jsonable(obj):
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON: {exc}") from None


def _env_seed():
    raw = os.environ.get("SWEST_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SWEST_SEED must be an integer, got {raw!r}") from None


def _timestamp():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -- dist ---------------------------------------------------------------------

def cmd_dist(args) -> int:
    try:
        X = read_csv_measure(args.x)
        Y = read_csv_measure(args.y)
    except FileNotFoundError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except DataParseError as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    if X.d != Y.d:
        _log(f"error: dimension mismatch: {args.x} has d={X.d}, {args.y} has d={Y.d}")
        return EXIT_DATA
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    start = time.perf_counter()
    try:
        if args.method == "sw":
            cfg = SwConfig(p=args.p, L=args.proj, K=max(args.k, 1), seed=seed)
            proj = sample_projections(X.d, cfg.L, RngStream(seed, 0))
            if args.k > 0:
                rng = RngStream(seed, 1).generator
                t = rng.uniform(0.0, 1.0, (cfg.L, cfg.K))
                qx = interp_quantile(project_sorted(X.points, proj.directions), t)
                qy = interp_quantile(project_sorted(Y.points, proj.directions), t)
                value = float(np.mean(np.abs(qx - qy) ** cfg.p)) ** (1.0 / cfg.p)
            else:
                value = sw_distance(X, Y, proj, cfg.p)
        elif args.method == "exact":
            value = w_exact_assignment(X, Y, args.p, cap=args.cap)
        else:
            sk = SinkhornConfig(epsilon=args.epsilon, epsilon_scale=args.epsilon_scale)
            value = sinkhorn_distance(X, Y, args.p, sk)
    except (DimensionMismatch, SizeMismatch, SizeCapExceeded) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    print(f"{value:.12g}")
    _log(f"method={args.method} p={args.p} n={X.n} m={Y.n} d={X.d} "
         f"L={args.proj if args.method == 'sw' else '-'} seed={seed} "
         f"elapsed={time.perf_counter() - start:.3f}s")
    return EXIT_OK


# -- estimate -----------------------------------------------------------------

ESTIMATE_KEYS = {
    "estimator": "mswe",
    "model": {"kind": "gaussian", "alpha": 1.8},
    "data": None,
    "self_test": None,
    "sw": {"p": 2.0, "L": 1, "K": 1000},
    "n_generated": None,
    "n_datasets": 1,
    "optimizer": {"name": "adam"},
    "crn": True,
    "theta0": None,
    "seed": 0,
    "output": None,
}
SELF_TEST_DEFAULTS = {"n": 1000, "d": 10, "threshold": 0.01}


def resolve_estimate_config(raw: dict, seed_flag=None, output_flag=None) -> dict:
    unknown = sorted(set(raw) - set(ESTIMATE_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {**ESTIMATE_KEYS, **raw}
    cfg["model"] = {**ESTIMATE_KEYS["model"], **(raw.get("model") or {})}
    if set(cfg["model"]) - {"kind", "alpha"}:
        raise ConfigError("model accepts only 'kind' and 'alpha'")
    cfg["sw"] = asdict(build_config(SwConfig, {**ESTIMATE_KEYS["sw"], **(raw.get("sw") or {})}))
    opt = dict(cfg["optimizer"] or {})
    name = opt.pop("name", "adam")
    if name == "adam":
        opt_cfg = build_config(AdamConfig, opt)
    elif name == "nelder-mead":
        opt_cfg = build_config(NelderMeadConfig, opt)
    else:
        raise ConfigError(f"unknown optimizer {name!r}")
    cfg["optimizer"] = {"name": name, **asdict(opt_cfg)}
    if cfg["estimator"] not in ("mswe", "meswe"):
        raise ConfigError(f"unknown estimator {cfg['estimator']!r}")
    if cfg["estimator"] == "mswe" and cfg["model"]["kind"] != "gaussian":
        raise ConfigError("MSWE is available for the gaussian model only")
    if cfg["self_test"] is not None:
        st = {**SELF_TEST_DEFAULTS, **cfg["self_test"]}
        if set(st) - set(SELF_TEST_DEFAULTS):
            raise ConfigError("self_test accepts only n, d, threshold")
        cfg["self_test"] = st
    elif cfg["data"] is None:
        raise ConfigError("config needs either 'data' or 'self_test'")
    env = _env_seed()
    if env is not None:
        cfg["seed"] = env
    if seed_flag is not None:
        cfg["seed"] = seed_flag
    if output_flag is not None:
        cfg["output"] = output_flag
    cfg["seed"] = int(cfg["seed"])
    return cfg


def run_estimate(cfg: dict):
    """Fit per a resolved config; returns ``(payload, exit_code)``."""
    if cfg["self_test"] is not None:
        st = cfg["self_test"]
        truth = GaussianParams(np.zeros(st["d"]), 1.0)
        Y = sample_model(truth, st["n"], RngStream(cfg["seed"], 1)).points
    else:
        Y = read_csv_measure(cfg["data"]).points
    sw = cfg["sw"]
    opt = dict(cfg["optimizer"])
    name = opt.pop("name")
    opt_kw = {"adam": AdamConfig(**opt)} if name == "adam" else {"nelder_mead": NelderMeadConfig(**opt)}
    common = dict(p=sw["p"], n_projections=sw["L"], n_levels=sw["K"], method=name, crn=cfg["crn"],
                  theta0=cfg["theta0"], rng=RngStream(cfg["seed"], 0), **opt_kw)
    failed = False
    message = ""
    code = EXIT_OK
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxIterExceeded)
        try:
            if cfg["estimator"] == "mswe":
                result = fit_mswe(Y, **common)
            else:
                result = fit_meswe(Y, cfg["model"]["kind"], alpha=cfg["model"]["alpha"],
                                   n_generated=cfg["n_generated"], n_datasets=cfg["n_datasets"], **common)
        except NonFiniteObjective as exc:
            result = exc.result
            failed, message, code = True, str(exc), EXIT_OPTIMIZER
    payload = {"config": cfg, "code_version": __version__, "timestamp": _timestamp()}
    if result is not None:
        fitted = result.to_dict()
        fitted["fit_config"] = fitted.pop("config")
        payload.update(fitted)
        if not result.converged:
            failed, message, code = True, result.message, EXIT_OPTIMIZER
    payload["failed"] = failed
    payload["failure_message"] = message
    if cfg["self_test"] is not None and result is not None and not failed:
        target = np.concatenate([np.zeros(cfg["self_test"]["d"]), [1.0]])
        theta = np.asarray(result.theta_hat)
        if theta.shape == target.shape:
            mse = float(np.mean((theta - target) ** 2))
            payload["self_test"] = {
                "mse": mse, "threshold": cfg["self_test"]["threshold"],
                "passed": mse <= cfg["self_test"]["threshold"],
            }
    return payload, code


def cmd_estimate(args) -> int:
    try:
        raw = _load_json(args.config)
        cfg = resolve_estimate_config(raw, args.seed, args.output)
        if cfg["data"] is not None and not Path(cfg["data"]).exists():
            raise UsageError(f"data file not found: {cfg['data']}")
        payload, code = run_estimate(cfg)
    except (UsageError, ConfigError, DataParseError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (DimensionMismatch, SizeMismatch) as exc:
        _log(f"error: {exc}")
        return EXIT_DATA
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    if cfg["output"]:
        Path(cfg["output"]).write_text(text + "\n")
    else:
        print(text)
    if code == EXIT_OPTIMIZER:
        _log(f"optimizer failure: {payload['failure_message']}")
    return code


# -- experiment ---------------------------------------------------------------

def resolve_experiment_config(name, args):
    cls = EXPERIMENTS[name]
    raw = {}
    if args.config:
        raw = _load_json(args.config)
        if "config" in raw and isinstance(raw["config"], dict):
            # an echoed sidecar
            if raw.get("experiment", name) != name:
                raise ConfigError(f"sidecar is for experiment {raw.get('experiment')!r}, not {name!r}")
            raw = raw["config"]
    cfg = build_config(cls, raw)
    updates = {}
    env = _env_seed()
    if env is not None:
        updates["seed"] = env
    if args.seed is not None:
        updates["seed"] = args.seed
    for flag, key in (("ns", "ns"), ("ms", "ms"), ("ds", "ds")):
        value = getattr(args, flag)
        if value is not None:
            if key not in {f.name for f in fields(cls)}:
                raise ConfigError(f"--{flag} does not apply to {name}")
            updates[key] = tuple(value)
    if args.reps is not None:
        updates["reps"] = args.reps
    if args.model is not None:
        if name != "meswe-vs-mswe":
            raise ConfigError("--model applies to meswe-vs-mswe only")
        updates["model"] = args.model
    if args.iters is not None:
        if "adam" not in {f.name for f in fields(cls)}:
            raise ConfigError(f"--iters does not apply to {name}")
        updates["adam"] = AdamConfig(**{**asdict(cfg.adam), "iters": args.iters})
    scale = args.scale
    if scale < 1:
        raise ConfigError("--scale must be >= 1")
    reps = updates.get("reps", cfg.reps)
    updates["reps"] = max(1, int(reps // scale))
    return build_config(cls, {**_jsonable(cfg), **_jsonable(updates)})


def _write_outputs(name, cfg, records, out_dir, include_timing, extra, interrupted):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = name.replace("-", "_")
    (out_dir / f"{base}.csv").write_text(records_to_csv(records, include_timing))
    meta = {
        "experiment": name,
        "config": _jsonable(cfg),
        "master_seed": cfg.seed,
        "code_version": __version__,
        "timestamp": _timestamp(),
        "timing_recorded": include_timing,
        "interrupted": interrupted,
        "n_records": len(records),
        "stream_layout": "stream_id = rep * 2**20 + purpose * 2**16 + key",
        "notes": {
            "crn": "gradient fits freeze generated base noise per fit; Nelder-Mead fits also freeze projections",
        },
        **extra,
    }
    (out_dir / f"{base}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _write_clt_extras(result, out_dir):
    out_dir = Path(out_dir)
    lines = ["rep,n,sigma2_hat,rescaled"]
    for n in sorted(result.sigma2_hat):
        for rep, (s, r) in enumerate(zip(result.sigma2_hat[n], result.rescaled[n])):
            lines.append(f"{rep},{n},{float(s)!r},{float(r)!r}")
    (out_dir / "clt_estimates.csv").write_text("\n".join(lines) + "\n")
    bandwidths = {}
    for n, est in sorted(result.kdes.items()):
        rows = ["grid,density"] + [f"{float(g)!r},{float(v)!r}" for g, v in zip(est.grid, est.density)]
        (out_dir / f"clt_kde_n{n}.csv").write_text("\n".join(rows) + "\n")
        bandwidths[str(n)] = est.bandwidth
    return {"kde": {"kernel": "gaussian", "bandwidth_rule": "silverman", "bandwidths": bandwidths}}


def cmd_experiment(args) -> int:
    name = args.name
    try:
        cfg = resolve_experiment_config(name, args)
    except (UsageError, ConfigError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    collect = []
    include_timing = not args.omit_timing
    _log(f"running {name} with seed={cfg.seed} reps={cfg.reps} threads={args.threads}")
    extra = {}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", MaxIterExceeded)
            if name == "consistency":
                records = run_consistency_gaussian(cfg=cfg, threads=args.threads, collect=collect)
            elif name == "clt":
                result = run_clt_gaussian(cfg=cfg, threads=args.threads, collect=collect)
                records = result.records
                Path(args.out).mkdir(parents=True, exist_ok=True)
                extra = _write_clt_extras(result, args.out)
            elif name == "meswe-vs-mswe":
                records = run_meswe_to_mswe(cfg=cfg, threads=args.threads, collect=collect)
            else:
                records = run_timing_comparison(cfg=cfg, threads=args.threads, collect=collect)
    except KeyboardInterrupt:
        _write_outputs(name, cfg, collect, args.out, include_timing, extra, interrupted=True)
        _log(f"interrupted: wrote {len(collect)} partial records to {args.out}")
        return EXIT_INTERRUPTED
    _write_outputs(name, cfg, records, args.out, include_timing, extra, interrupted=False)
    _log(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def _int_list(text):
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"swest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dist", help="distance between two CSV point clouds")
    d.add_argument("x")
    d.add_argument("y")
    d.add_argument("--p", type=float, default=2.0)
    d.add_argument("--proj", type=int, default=100, help="number of projections (sw)")
    d.add_argument("--k", type=int, default=0, help="quantile levels per projection; 0 = exact 1D")
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--method", choices=("sw", "exact", "sinkhorn"), default="sw")
    d.add_argument("--epsilon", type=float, default=0.01, help="Sinkhorn regularization")
    d.add_argument("--epsilon-scale", choices=("max", "median", "absolute"), default="max",
                   help="cost statistic that --epsilon multiplies")
    d.add_argument("--cap", type=int, default=512, help="size cap of the exact solver")
    d.set_defaults(func=cmd_dist)

    e = sub.add_parser("estimate", help="fit MSWE or MESWE from a JSON config")
    e.add_argument("config")
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--output", default=None)
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("experiment", help="run a synthetic study")
    x.add_argument("name", choices=sorted(EXPERIMENTS))
    x.add_argument("--config", default=None, help="JSON config or an echoed sidecar")
    x.add_argument("--out", default="results")
    x.add_argument("--scale", type=float, default=1.0, help="divide replication counts")
    x.add_argument("--threads", type=int, default=1)
    x.add_argument("--seed", type=int, default=None)
    x.add_argument("--reps", type=int, default=None)
    x.add_argument("--ns", type=_int_list, default=None)
    x.add_argument("--ms", type=_int_list, default=None)
    x.add_argument("--ds", type=_int_list, default=None)
    x.add_argument("--model", choices=("gaussian", "ecs"), default=None)
    x.add_argument("--iters", type=int, default=None, help="ADAM iterations per fit")
    x.add_argument("--omit-timing", action="store_true",
                   help="leave wall_time_s empty so the CSV is byte-reproducible")
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
