"""Sliced-Wasserstein distances and minimum SW estimators."""

__version__ = "0.1.0"

from .estimators import MESWE, MSWE, fit_meswe, fit_mewe, fit_mswe
from .measures import (
    EmpiricalMeasure,
    ProjectionSet,
    SortedSample1D,
    cdf,
    make_measure,
    project,
    quantile,
)
from .models import ECSLocationParams, GaussianParams, reparametrized_sample, sample_model
from .sampling import RngStream, sample_ecs, sample_gaussian, sample_projections, sample_sphere
from .transport import (
    SinkhornConfig,
    SwConfig,
    expected_sw,
    sinkhorn_distance,
    sliced_wasserstein,
    sw_distance,
    w1d_cdf_mc,
    w1d_exact,
    w1d_quantile_mc,
    w_exact_assignment,
)

__all__ = [
    "MESWE", "MSWE", "fit_meswe", "fit_mewe", "fit_mswe",
    "EmpiricalMeasure", "ProjectionSet", "SortedSample1D", "cdf", "make_measure", "project", "quantile",
    "ECSLocationParams", "GaussianParams", "reparametrized_sample", "sample_model",
    "RngStream", "sample_ecs", "sample_gaussian", "sample_projections", "sample_sphere",
    "SinkhornConfig", "SwConfig", "expected_sw", "sinkhorn_distance", "sliced_wasserstein",
    "sw_distance", "w1d_cdf_mc", "w1d_exact", "w1d_quantile_mc", "w_exact_assignment",
]
