# Error-rate, estimation-error and rate metrics with standard errors.

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


class MetricKind(enum.Enum):
    BER = "BER"
    BLER = "BLER"
    MSE_DEG2 = "MSE_deg2"
    RATE = "rate_bps_hz"
    NMSE = "NMSE"


@dataclass(frozen=True)
class MetricValue:
    value: float
    stderr: float
    count: int      # bits, blocks or samples behind the value


def _proportion(hits: np.ndarray) -> MetricValue:
    n = hits.size
    if n == 0:
        raise InvalidInputError("no samples to score")
    p = float(np.count_nonzero(hits)) / n
    return MetricValue(value=p, stderr=math.sqrt(p * (1.0 - p) / n), count=n)


def mean_with_stderr(samples) -> MetricValue:
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise InvalidInputError("no samples to average")
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return MetricValue(value=float(np.mean(x)), stderr=se, count=x.size)


def compute_metric(kind: MetricKind, truth, estimate) -> MetricValue:
    """Score estimate against truth.

    BER: bit arrays of equal shape. BLER: blocks along the last axis, a
    block is wrong if any bit differs. MSE_deg2: angles in degrees.
    NMSE: complex channel vectors along the last axis, |h_hat - h|^2 / |h|^2
    per vector. RATE: estimate holds per-trial rates, truth is ignored.
    """
    kind = MetricKind(kind)
    est = np.asarray(estimate)
    if kind is MetricKind.RATE:
        return mean_with_stderr(est)
    tru = np.asarray(truth)
    if tru.shape != est.shape:
        raise InvalidInputError(f"truth {tru.shape} and estimate {est.shape} differ")
    if kind is MetricKind.BER:
        return _proportion(tru != est)
    if kind is MetricKind.BLER:
        if tru.ndim < 1:
            raise InvalidInputError("BLER needs blocks along the last axis")
        return _proportion(np.any(tru != est, axis=-1))
    if kind is MetricKind.MSE_DEG2:
        return mean_with_stderr((est.astype(float) - tru.astype(float)) ** 2)
    err = np.sum(np.abs(est - tru) ** 2, axis=-1)
    ref = np.sum(np.abs(tru) ** 2, axis=-1)
    return mean_with_stderr(err / np.maximum(ref, np.finfo(float).tiny))
