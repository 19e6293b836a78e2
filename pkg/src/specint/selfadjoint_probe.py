"""Finite-scale probes behind the surjectivity of the spectral embedding.

The probes exercise three mechanisms: explicit ramp functions interpolating
between an interval indicator and zero, polynomial sup-approximation of those
ramps, and projections back onto the embedded range after multiplying by
indicators or powers of the spectral position.  At full sub-frame size the
identities hold to rounding; at smaller sizes the defects are recorded as
diagnostics, not asserted.  A separate cross-scale comparison of induced
measures is reported as a heuristic only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import Chebyshev

from .core import OperatorSpec, ValidationError
from .direct_integral import (DirectIntegral, Section, embed, multiply, norm,
                              project_onto_range)
from .sampling import eigendecompose, make_truncation
from .spectral_measure import kolmogorov_distance, pair_measure

__all__ = [
    "RampSpec",
    "RampFit",
    "FitError",
    "ramp_eval",
    "fit_ramp_polynomial",
    "range_indicator_experiment",
    "power_commutation_check",
    "essential_selfadjointness_heuristic",
]

FIT_GRID_POINTS = 2048


@dataclass(frozen=True)
class RampSpec:
    """Piecewise-linear window: 1 on [a, b], sloping to 0 over width 1/k."""

    a: float
    b: float
    k: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValidationError(f"ramp needs a < b, got [{self.a}, {self.b}]")
        if self.k < 1:
            raise ValidationError("ramp slope index must be a positive integer")


def ramp_eval(r: RampSpec, t):
    """Evaluate the ramp; 1 on the plateau, 0 outside (a - 1/k, b + 1/k)."""
    arr = np.asarray(t, dtype=float)
    w = 1.0 / r.k
    out = np.zeros_like(arr)
    out = np.where((arr >= r.a) & (arr <= r.b), 1.0, out)
    left = (arr > r.a - w) & (arr < r.a)
    out = np.where(left, 1.0 + r.k * (arr - r.a), out)
    right = (arr > r.b) & (arr < r.b + w)
    out = np.where(right, 1.0 + r.k * (r.b - arr), out)
    return float(out) if np.isscalar(t) else out


class FitError(ValidationError):
    """Polynomial fit did not reach the target error at the degree cap."""

    def __init__(self, message: str, best_error: float):
        super().__init__(message)
        self.best_error = best_error


@dataclass(frozen=True)
class RampFit:
    poly: Chebyshev
    degree: int
    grid_error: float
    interval: tuple[float, float]


def fit_ramp_polynomial(r: RampSpec, interval: tuple[float, float],
                        max_degree: int = 512) -> RampFit:
    """Chebyshev-node interpolant of the ramp with grid sup-error <= 1/k.

    Degrees double from 2 until the error criterion holds on a fixed uniform
    grid over the interval; exhausting max_degree raises FitError carrying
    the best error seen.  The interval must contain the ramp support.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if lo >= hi:
        raise ValidationError(f"fit interval [{lo}, {hi}] is empty")
    w = 1.0 / r.k
    if r.a <= lo and hi <= r.b:
        # the ramp is constantly 1 over the whole interval
        poly = Chebyshev([1.0], domain=[lo, hi])
        return RampFit(poly=poly, degree=0, grid_error=0.0, interval=(lo, hi))
    if not (lo <= r.a - w and hi >= r.b + w):
        raise ValidationError(
            f"fit interval [{lo}, {hi}] must contain [{r.a - w}, {r.b + w}]")
    grid = np.linspace(lo, hi, FIT_GRID_POINTS)
    target = ramp_eval(r, grid)
    best = np.inf
    deg = 2
    while deg <= max_degree:
        poly = Chebyshev.interpolate(lambda ts: ramp_eval(r, ts), deg, domain=[lo, hi])
        err = float(np.max(np.abs(poly(grid) - target)))
        if err <= 1.0 / r.k:
            return RampFit(poly=poly, degree=deg, grid_error=err, interval=(lo, hi))
        best = min(best, err)
        deg *= 2
    raise FitError(
        f"no degree <= {max_degree} reached sup-error {1.0 / r.k:.3e} "
        f"(best {best:.3e})", best)


def _nudged_endpoint(value: float, positions: np.ndarray, outward: float) -> float:
    """Push an endpoint off any atom it collides with, in the outward direction."""
    spread = float(positions.max() - positions.min()) if positions.size else 1.0
    spread = spread if spread > 0 else 1.0
    tol = 1e-12 * max(1.0, spread)
    v = float(value)
    while np.any(np.abs(positions - v) <= tol):
        v += outward * 1e-9 * spread
    return v


def _window_values(positions: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return ((positions >= lo) & (positions <= hi)).astype(float)


def _check_support(x: np.ndarray, m: int) -> None:
    if np.any(x[m:] != 0):
        raise ValidationError("probe vector must be supported on the first m coordinates")


def range_indicator_experiment(di: DirectIntegral, x: np.ndarray, m: int,
                               a: float, b: float, n: float,
                               k_list: Sequence[int],
                               max_degree: int = 512) -> list[tuple[int, float]]:
    """Distance between ramp-multiplied sections and the projected indicator.

    With Z the section cut to [-n, n] and X_m its range projection, each row
    is (k, |p_k . X_m - proj(1_[a,b] . Z)|).  Endpoints landing on atoms are
    nudged outward first.  The distances are recorded, not asserted; at
    m = N they are bounded by the fit error times the section norm.
    """
    x = np.asarray(x)
    _check_support(x, m)
    if not a < b:
        raise ValidationError("window needs a < b")
    pos = di.measure.positions
    xs = embed(di, x)
    cut_lo = _nudged_endpoint(-float(n), pos, -1.0)
    cut_hi = _nudged_endpoint(float(n), pos, +1.0)
    z = multiply(di, _window_values(pos, cut_lo, cut_hi), xs)
    x_m = project_onto_range(di, m, z).section
    banded = multiply(di, _window_values(pos, a, b), z)
    target = project_onto_range(di, m, banded).section
    span = float(pos.max() - pos.min()) if pos.size else 1.0
    rows: list[tuple[int, float]] = []
    for k in k_list:
        r = RampSpec(a, b, int(k))
        pad = 1e-3 * max(span, 1.0)
        lo = min(float(pos.min()), a - 1.0 / k) - pad
        hi = max(float(pos.max()), b + 1.0 / k) + pad
        fit = fit_ramp_polynomial(r, (lo, hi), max_degree)
        ramped = multiply(di, fit.poly(pos), x_m)
        rows.append((int(k), norm(di, ramped - target)))
    return rows


def power_commutation_check(di: DirectIntegral, x: np.ndarray, m: int, n: float,
                            k_max: int) -> list[tuple[int, float, float, bool]]:
    """Defect of position-power application against projecting afterwards.

    Rows are (k, defect, bound, within) with bound 1e-8 (n+1)^k |X|.  The
    identity is exact when the projection sub-frame spans everything; for
    smaller sub-frames the defect is a recorded diagnostic.
    """
    x = np.asarray(x)
    _check_support(x, m)
    if k_max < 1:
        raise ValidationError("k_max must be at least 1")
    pos = di.measure.positions
    xs = embed(di, x)
    cut_lo = _nudged_endpoint(-float(n), pos, -1.0)
    cut_hi = _nudged_endpoint(float(n), pos, +1.0)
    z = multiply(di, _window_values(pos, cut_lo, cut_hi), xs)
    x_m = project_onto_range(di, m, z).section
    x_norm = norm(di, xs)
    rows: list[tuple[int, float, float, bool]] = []
    for k in range(1, k_max + 1):
        powered = pos ** k
        lhs = multiply(di, powered, x_m)
        rhs = project_onto_range(di, m, multiply(di, powered, z)).section
        defect = norm(di, lhs - rhs)
        bound = 1e-8 * (float(n) + 1.0) ** k * x_norm
        rows.append((k, defect, bound, defect <= bound))
    return rows


def essential_selfadjointness_heuristic(
    spec: OperatorSpec, n_list: Sequence[int],
    vectors: Mapping[str, np.ndarray],
) -> list[tuple[str, int, int, float]]:
    """Cross-scale stability of the diagonal pair measures.  HEURISTIC.

    For each labeled vector (padded with zeros to every scale), reports the
    Kolmogorov distance between its induced measures at successive scales.
    A Cauchy-looking sequence is evidence consistent with essential
    self-adjointness; nothing is asserted.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("scales must be strictly increasing")
    rows: list[tuple[str, int, int, float]] = []
    for label, vec in vectors.items():
        vec = np.asarray(vec)
        if vec.ndim != 1 or vec.size > min(n_list):
            raise ValidationError(
                f"vector {label!r} must fit inside the smallest scale {min(n_list)}")
        measures = []
        for n in n_list:
            t = make_truncation(spec, n)
            d = eigendecompose(t)
            x = np.zeros(n, dtype=vec.dtype)
            x[:vec.size] = vec
            measures.append(pair_measure(t, d, x, x))
        for (na, ma), (nb, mb) in zip(zip(n_list, measures), zip(n_list[1:], measures[1:])):
            rows.append((label, na, nb, kolmogorov_distance(ma, mb)))
    return rows
