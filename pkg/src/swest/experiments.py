"""Synthetic studies: consistency, CLT scaling, MESWE -> MSWE, timing.

Each runner splits its grid into independent tasks whose random streams
depend only on ``(master seed, rep, purpose, key)``, so the output is the
same whatever the number of worker processes. Records are returned in a
canonical order.

Stream layout: ``stream_id = rep * 2**20 + purpose * 2**16 + key`` where
``key`` is the sample size (n or m) or the dimension the stream serves.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import linregress

from .estimators import fit_meswe, fit_mewe, fit_mswe
from .exceptions import (
    DegenerateSample,
    InsufficientPoints,
    NonPositive,
    OutOfRange,
    SizeCapExceeded,
)
from .models import ECSLocationParams, GaussianParams, sample_model
from .optim import AdamConfig, NelderMeadConfig
from .sampling import RngStream, stream_id
from .transport import SinkhornConfig

CSV_FIELDS = ("experiment", "rep", "n", "m", "d", "method", "mse", "wall_time_s", "seed")

DATA, INIT, FIT_MSWE, FIT_MESWE, FIT_MEWE_EXACT, FIT_MEWE_SINKHORN = range(6)
_KEY_BITS = 16


def task_stream(seed, rep, purpose, key) -> RngStream:
    if not 0 <= key < (1 << _KEY_BITS):
        raise OutOfRange(f"stream key {key} must lie in [0, 2**{_KEY_BITS})")
    return RngStream(seed, stream_id(rep, (purpose << _KEY_BITS) + key))


@dataclass(frozen=True)
class ExperimentRecord:
    """One fitted estimate. ``m = 0`` marks estimators without generated data."""

    experiment: str
    rep: int
    n: int
    m: int
    d: int
    method: str
    mse: float
    wall_time_s: float
    seed: int

    def sort_key(self):
        return (self.experiment, self.method, self.d, self.n, self.m, self.rep)


@dataclass
class KdeEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    def __call__(self, x):
        return np.interp(x, self.grid, self.density, left=0.0, right=0.0)


def kde(samples, grid_size: int = 512) -> KdeEstimate:
    """Gaussian-kernel density estimate with Silverman's bandwidth.

    ``h = 0.9 * min(sd, IQR / 1.34) * k ** (-1/5)`` on a grid spanning
    ``mean +- 4 sd``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateSample("need at least two samples")
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise DegenerateSample("samples have zero variance")
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    h = 0.9 * spread * x.size ** (-0.2)
    centre = float(np.mean(x))
    grid = np.linspace(centre - 4 * sd, centre + 4 * sd, grid_size)
    density = np.zeros(grid_size)
    for lo in range(0, x.size, 4096):
        z = (grid[:, None] - x[None, lo:lo + 4096]) / h
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density /= x.size * h * math.sqrt(2 * math.pi)
    return KdeEstimate(grid, density, h)


def loglog_slope(xs, ys):
    """Least-squares fit of ``log y = slope * log x + intercept``.

    Returns ``(slope, intercept, r_squared)``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3 or xs.size != ys.size:
        raise InsufficientPoints("need at least three (x, y) pairs of equal length")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise NonPositive("log-log fit needs positive values")
    fit = linregress(np.log(xs), np.log(ys))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def _execute(fn, tasks, threads, collect):
    """Run ``fn`` over ``tasks``; each call returns a list of results."""
    if threads <= 1:
        for task in tasks:
            collect.extend(fn(task))
        return collect
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for out in pool.map(fn, tasks):
            collect.extend(out)
    return collect


def _canonical(records):
    return sorted(records, key=ExperimentRecord.sort_key)


def _gaussian_init(d, rng):
    gen = rng.generator
    m0 = gen.uniform(-1.0, 1.0, d)
    sigma2_0 = math.exp(gen.uniform(math.log(0.5), math.log(2.0)))
    return np.concatenate([m0, [sigma2_0]])


def _mse(a, b):
    return float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))


# -- consistency --------------------------------------------------------------

@dataclass(frozen=True)
class ConsistencyConfig:
    ns: tuple = (10, 32, 100, 316, 1000, 3162, 10000)
    reps: int = 100
    d: int = 10
    p: float = 2.0
    n_projections: int = 1
    n_levels: int = 1000
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0


def _consistency_task(args):
    cfg, n, rep = args
    truth = GaussianParams(np.zeros(cfg.d), 1.0)
    target = truth.to_vector()
    y = sample_model(truth, n, task_stream(cfg.seed, rep, DATA, n)).points
    theta0 = _gaussian_init(cfg.d, task_stream(cfg.seed, rep, INIT, n))
    common = dict(p=cfg.p, n_projections=cfg.n_projections, n_levels=cfg.n_levels,
                  adam=cfg.adam, theta0=theta0)
    r1 = fit_mswe(y, rng=task_stream(cfg.seed, rep, FIT_MSWE, n), **common)
    r2 = fit_meswe(y, "gaussian", n_generated=n, rng=task_stream(cfg.seed, rep, FIT_MESWE, n), **common)
    return [
        ExperimentRecord("consistency", rep, n, 0, cfg.d, "mswe", _mse(r1.theta_hat, target), r1.wall_time, cfg.seed),
        ExperimentRecord("consistency", rep, n, n, cfg.d, "meswe", _mse(r2.theta_hat, target), r2.wall_time, cfg.seed),
    ]


def run_consistency_gaussian(ns=None, reps=None, cfg=None, threads=1, collect=None):
    """MSWE and MESWE (m = n) error to the true (0, 1) for each n."""
    cfg = _override(cfg or ConsistencyConfig(), ns=ns, reps=reps)
    tasks = [(cfg, int(n), rep) for n in cfg.ns for rep in range(cfg.reps)]
    collect = [] if collect is None else collect
    return _canonical(_execute(_consistency_task, tasks, threads, collect))


# -- CLT ----------------------------------------------------------------------

@dataclass(frozen=True)
class CltConfig:
    ns: tuple = (100, 1000, 10000)
    reps: int = 500
    d: int = 10
    p: float = 1.0
    n_projections: int = 1
    n_levels: int = 1000
    adam: AdamConfig = field(default_factory=AdamConfig)
    grid_size: int = 512
    seed: int = 0


@dataclass
class CltResult:
    records: list
    sigma2_hat: dict
    rescaled: dict
    kdes: dict


def _clt_task(args):
    cfg, n, rep = args
    truth = GaussianParams(np.zeros(cfg.d), 1.0)
    y = sample_model(truth, n, task_stream(cfg.seed, rep, DATA, n)).points
    theta0 = _gaussian_init(cfg.d, task_stream(cfg.seed, rep, INIT, n))
    res = fit_mswe(y, p=cfg.p, n_projections=cfg.n_projections, n_levels=cfg.n_levels,
                   adam=cfg.adam, theta0=theta0, rng=task_stream(cfg.seed, rep, FIT_MSWE, n))
    rec = ExperimentRecord("clt", rep, n, 0, cfg.d, f"mswe-p{cfg.p:g}",
                           _mse(res.theta_hat, truth.to_vector()), res.wall_time, cfg.seed)
    return [(rec, float(res.theta_hat[-1]))]


def run_clt_gaussian(ns=None, reps=None, cfg=None, threads=1, collect=None) -> CltResult:
    """Order-1 MSWE variance estimates, rescaled as sqrt(n) (sigma2_hat - 1)."""
    cfg = _override(cfg or CltConfig(), ns=ns, reps=reps)
    tasks = [(cfg, int(n), rep) for n in cfg.ns for rep in range(cfg.reps)]
    pairs = []
    try:
        _execute(_clt_task, tasks, threads, pairs)
    except KeyboardInterrupt:
        if collect is not None:
            collect.extend(pr[0] for pr in pairs)
        raise
    pairs.sort(key=lambda pr: pr[0].sort_key())
    if collect is not None:
        collect.extend(pr[0] for pr in pairs)
    sigma2_hat, rescaled, kdes = {}, {}, {}
    for n in cfg.ns:
        vals = np.array([s for rec, s in pairs if rec.n == n])
        sigma2_hat[n] = vals
        rescaled[n] = math.sqrt(n) * (vals - 1.0)
        if vals.size >= 2 and np.std(vals) > 0:
            kdes[n] = kde(rescaled[n], cfg.grid_size)
    return CltResult([rec for rec, _ in pairs], sigma2_hat, rescaled, kdes)


# -- MESWE -> MSWE ------------------------------------------------------------

@dataclass(frozen=True)
class MesweToMsweConfig:
    """``model='gaussian'`` compares with MSWE; ``'ecs'`` with MESWE at ``m_reference``."""

    model: str = "gaussian"
    n_fixed: int = 2000
    ms: tuple = (10, 100, 1000, 10000)
    reps: int = 100
    d: int = 10
    alpha: float = 1.8
    location: float = 2.0
    m_reference: int = 10000
    p: float = 2.0
    n_projections: int = 1
    n_levels: int = 1000
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0


def _meswe_to_mswe_task(args):
    cfg, rep = args
    n = cfg.n_fixed
    common = dict(p=cfg.p, n_projections=cfg.n_projections, n_levels=cfg.n_levels, adam=cfg.adam)
    if cfg.model == "gaussian":
        truth = GaussianParams(np.zeros(cfg.d), 1.0)
        y = sample_model(truth, n, task_stream(cfg.seed, rep, DATA, n)).points
        theta0 = _gaussian_init(cfg.d, task_stream(cfg.seed, rep, INIT, n))
        ref = fit_mswe(y, theta0=theta0, rng=task_stream(cfg.seed, rep, FIT_MSWE, n), **common)
    elif cfg.model == "ecs":
        truth = ECSLocationParams(np.full(cfg.d, cfg.location), cfg.alpha)
        y = sample_model(truth, n, task_stream(cfg.seed, rep, DATA, n)).points
        theta0 = np.median(y, axis=0)
        ref = fit_meswe(y, "ecs", alpha=cfg.alpha, n_generated=cfg.m_reference, theta0=theta0,
                        rng=task_stream(cfg.seed, rep, FIT_MESWE, cfg.m_reference), **common)
    else:
        raise ValueError(f"unknown model {cfg.model!r}")
    out = []
    for m in cfg.ms:
        res = fit_meswe(y, cfg.model, alpha=cfg.alpha, n_generated=int(m), theta0=theta0,
                        rng=task_stream(cfg.seed, rep, FIT_MESWE, int(m)), **common)
        out.append(ExperimentRecord("meswe-vs-mswe", rep, n, int(m), cfg.d, f"{cfg.model}-meswe",
                                    _mse(res.theta_hat, ref.theta_hat), res.wall_time, cfg.seed))
    return out


def run_meswe_to_mswe(n_fixed=None, ms=None, reps=None, model=None, cfg=None, threads=1, collect=None):
    """Error between MESWE(m) and the reference estimate on fixed data."""
    cfg = _override(cfg or MesweToMsweConfig(), n_fixed=n_fixed, ms=ms, reps=reps, model=model)
    tasks = [(cfg, rep) for rep in range(cfg.reps)]
    collect = [] if collect is None else collect
    return _canonical(_execute(_meswe_to_mswe_task, tasks, threads, collect))


# -- timing -------------------------------------------------------------------

@dataclass(frozen=True)
class TimingConfig:
    ds: tuple = (2, 5, 10)
    n: int = 200
    m: int = 200
    reps: int = 10
    alpha: float = 1.8
    location: float = 2.0
    p: float = 2.0
    n_projections: int = 10
    n_datasets: int = 10
    nelder_mead: NelderMeadConfig = field(
        default_factory=lambda: NelderMeadConfig(xatol=1e-3, fatol=1e-5)
    )
    sinkhorn: SinkhornConfig = field(
        default_factory=lambda: SinkhornConfig(epsilon=0.1, epsilon_scale="median", max_iter=1000, tol=1e-2, strict=False)
    )
    assignment_cap: int = 512
    seed: int = 0


TIMING_METHODS = ("meswe", "mewe-exact", "mewe-sinkhorn")


def _timing_task(args):
    cfg, d, rep = args
    truth = ECSLocationParams(np.full(d, cfg.location), cfg.alpha)
    target = truth.to_vector()
    y = sample_model(truth, cfg.n, task_stream(cfg.seed, rep, DATA, d)).points
    theta0 = np.median(y, axis=0)
    common = dict(alpha=cfg.alpha, n_generated=cfg.m, n_datasets=cfg.n_datasets, p=cfg.p,
                  nelder_mead=cfg.nelder_mead, theta0=theta0)
    out = []
    for method in TIMING_METHODS:
        try:
            if method == "meswe":
                res = fit_meswe(y, "ecs", method="nelder-mead", n_projections=cfg.n_projections,
                                rng=task_stream(cfg.seed, rep, FIT_MESWE, d), **common)
            elif method == "mewe-exact":
                res = fit_mewe(y, "ecs", solver="exact", cap=cfg.assignment_cap,
                               rng=task_stream(cfg.seed, rep, FIT_MEWE_EXACT, d), **common)
            else:
                res = fit_mewe(y, "ecs", solver="sinkhorn", sinkhorn=cfg.sinkhorn,
                               rng=task_stream(cfg.seed, rep, FIT_MEWE_SINKHORN, d), **common)
        except SizeCapExceeded:
            out.append(ExperimentRecord("timing", rep, cfg.n, cfg.m, d, method, math.nan, math.nan, cfg.seed))
            continue
        out.append(ExperimentRecord("timing", rep, cfg.n, cfg.m, d, method,
                                    _mse(res.theta_hat, target), res.wall_time, cfg.seed))
    return out


def run_timing_comparison(ds=None, n=None, m=None, cfg=None, threads=1, collect=None):
    """MESWE vs exact and Sinkhorn MEWE on ECS data, all by Nelder-Mead."""
    cfg = _override(cfg or TimingConfig(), ds=ds, n=n, m=m)
    tasks = [(cfg, int(d), rep) for d in cfg.ds for rep in range(cfg.reps)]
    collect = [] if collect is None else collect
    return _canonical(_execute(_timing_task, tasks, threads, collect))


# -- output -------------------------------------------------------------------

def _override(cfg, **kwargs):
    updates = {k: (tuple(v) if isinstance(v, list) else v) for k, v in kwargs.items() if v is not None}
    return replace(cfg, **updates) if updates else cfg


def format_float(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def records_to_csv(records, include_timing=True) -> str:
    """CSV text with the fixed header; omitted timings are left empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rec in _canonical(records):
        writer.writerow([
            rec.experiment, rec.rep, rec.n, rec.m, rec.d, rec.method, format_float(rec.mse),
            format_float(rec.wall_time_s) if include_timing else "", rec.seed,
        ])
    return buf.getvalue()


def read_records(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ExperimentRecord(
                row["experiment"], int(row["rep"]), int(row["n"]), int(row["m"]), int(row["d"]),
                row["method"], float(row["mse"]),
                float(row["wall_time_s"]) if row["wall_time_s"] else math.nan, int(row["seed"]),
            ))
    return out


def config_to_dict(cfg) -> dict:
    return asdict(cfg)


def median_by(records, key, method=None):
    """Median MSE grouped by ``key`` (an attribute name), ignoring NaNs."""
    groups = {}
    for rec in records:
        if method is not None and rec.method != method:
            continue
        groups.setdefault(getattr(rec, key), []).append(rec.mse)
    return {k: float(np.nanmedian(v)) for k, v in sorted(groups.items())}

