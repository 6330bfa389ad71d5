"""Trend statistics over term trajectories: ordinary least squares with
slope significance, Pearson correlation, and point forecasts.

The Student-t tail probability is evaluated through the regularized
incomplete beta function (continued fraction, modified Lentz), so the
module needs no statistics library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import TimeSeries
from .errors import ConfigError, DataError

MIN_OBSERVATIONS = 4

_CF_TOL = 1e-12
_CF_MAX_ITER = 500
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    raise DataError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (a * math.log(x) + b * math.log1p(-x)
                + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b))
    front = math.exp(ln_front)
    # use the fraction on the side where it converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t_abs: float, df: int) -> float:
    """One-sided tail P(T >= t_abs) for t_abs >= 0."""
    if df < 1:
        raise ConfigError("degrees of freedom must be >= 1")
    if t_abs < 0:
        raise ConfigError("student_t_sf expects a nonnegative statistic")
    if math.isinf(t_abs):
        return 0.0
    x = df / (df + t_abs * t_abs)
    return 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)


@dataclass
class TrendFit:
    slope: float
    intercept: float
    r_squared: float
    t_stat: float
    p_value: float
    n: int
    dof: int
    sigma2: float
    label: str = ""


@dataclass
class CorrelationResult:
    r: float
    t_stat: float
    p_value: float
    n: int


def _require_observations(n: int):
    if n < MIN_OBSERVATIONS:
        raise DataError(
            f"insufficient observations: got {n}, trend statistics require "
            f"at least {MIN_OBSERVATIONS}")


def ols_fit(series: TimeSeries) -> TrendFit:
    """Least-squares line over (year, value) points with a two-sided
    slope significance test."""
    n = len(series)
    _require_observations(n)
    t = [float(y) for y in series.years]
    y = [float(v) for v in series.values]
    t_bar = sum(t) / n
    y_bar = sum(y) / n
    sxx = sum((ti - t_bar) ** 2 for ti in t)
    syy = sum((yi - y_bar) ** 2 for yi in y)
    sxy = sum((ti - t_bar) * (yi - y_bar) for ti, yi in zip(t, y))
    if sxx == 0.0:
        raise DataError("zero variance in the time axis")

    slope = sxy / sxx
    intercept = y_bar - slope * t_bar
    r_squared = 0.0 if syy == 0.0 else (sxy * sxy) / (sxx * syy)
    sse = max(syy - slope * sxy, 0.0)
    dof = n - 2
    sigma2 = sse / dof

    if sigma2 == 0.0:
        # exact fit: a nonzero slope is infinitely significant, a zero
        # slope carries no evidence at all
        t_stat = math.inf if slope != 0.0 else 0.0
        p_value = 0.0 if slope != 0.0 else 1.0
    else:
        t_stat = slope / math.sqrt(sigma2 / sxx)
        p_value = 2.0 * student_t_sf(abs(t_stat), dof)
    return TrendFit(slope=slope, intercept=intercept, r_squared=r_squared,
                    t_stat=t_stat, p_value=min(p_value, 1.0), n=n, dof=dof,
                    sigma2=sigma2, label=series.label)


def pearson(a: TimeSeries, b: TimeSeries) -> CorrelationResult:
    """Pearson correlation of two series aligned on identical year sets."""
    if a.years != b.years:
        only_a = sorted(set(a.years) - set(b.years))
        only_b = sorted(set(b.years) - set(a.years))
        raise DataError(
            f"series are not aligned: years only in first={only_a}, "
            f"only in second={only_b}")
    n = len(a)
    _require_observations(n)
    xs = [float(v) for v in a.values]
    ys = [float(v) for v in b.values]
    x_bar = sum(xs) / n
    y_bar = sum(ys) / n
    sxx = sum((x - x_bar) ** 2 for x in xs)
    syy = sum((y - y_bar) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise DataError("undefined correlation: a series has zero variance")
    sxy = sum((x - x_bar) * (y - y_bar) for x, y in zip(xs, ys))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    dof = n - 2
    if abs(r) == 1.0:
        return CorrelationResult(r=r, t_stat=math.inf if r > 0 else -math.inf,
                                 p_value=0.0, n=n)
    t_stat = r * math.sqrt(dof / (1.0 - r * r))
    p_value = 2.0 * student_t_sf(abs(t_stat), dof)
    return CorrelationResult(r=r, t_stat=t_stat, p_value=min(p_value, 1.0), n=n)


@dataclass
class ForecastPoint:
    year: int
    value: float
    clamped: bool = False


def forecast(fit: TrendFit, horizon_years: list[int],
             probability: bool = False) -> list[ForecastPoint]:
    """Point predictions intercept + slope * year; probability trajectories
    are clamped to [0, 1] with the clamp flagged, never silent."""
    out = []
    for year in horizon_years:
        value = fit.intercept + fit.slope * float(year)
        clamped = False
        if probability:
            bounded = min(1.0, max(0.0, value))
            clamped = bounded != value
            value = bounded
        out.append(ForecastPoint(year=int(year), value=value, clamped=clamped))
    return out
