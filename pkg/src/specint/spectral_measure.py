"""Atomic spectral measures induced by a weighted truncation.

The probability measure puts mass ``sum_j c_j ||P_lambda e_j||^2`` on each
eigenvalue cluster.  Pair measures carry the sesquilinear data
``<P_lambda x, P_lambda y>`` and are absolutely continuous with respect to
the probability measure; their densities form the Gram matrix field that
the fiber construction factorizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ValidationError, inner
from .sampling import EigenDecomposition, Truncation

__all__ = [
    "AtomicMeasure",
    "GramField",
    "spectral_probability_measure",
    "pair_measure",
    "gram_field",
    "moment",
    "tail_mass_check",
    "cauchy_schwarz_check",
    "perturbation_bound",
    "uniform_integrability_profile",
    "kolmogorov_distance",
    "bin_pushforward",
]

#: Atoms at or below this mass are numerically indistinguishable from the
#: empty eigenspace and are dropped (with the mass reported, never hidden).
TOL_ATOM = 1e-14


@dataclass(frozen=True)
class AtomicMeasure:
    """Purely atomic measure: strictly increasing positions with masses.

    ``kind`` is "probability" (real positive masses) or "signed" (real or
    complex masses).  ``dropped_mass`` records mass removed by the atom
    threshold; it is never folded back into the retained masses.
    """

    positions: np.ndarray
    masses: np.ndarray
    kind: str = "probability"
    dropped_mass: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        masses = np.asarray(self.masses)
        if pos.ndim != 1 or masses.shape != pos.shape:
            raise ValidationError("positions and masses must be 1-d arrays of equal length")
        if pos.size > 1 and not np.all(np.diff(pos) > 0):
            raise ValidationError("atom positions must be strictly increasing")
        if self.kind == "probability":
            if np.iscomplexobj(masses):
                raise ValidationError("probability measures have real masses")
            if np.any(masses <= 0):
                raise ValidationError("probability measures have strictly positive masses")
            masses = masses.astype(np.float64)
        elif self.kind != "signed":
            raise ValidationError(f"unknown measure kind {self.kind!r}")
        pos.setflags(write=False)
        masses = np.array(masses, copy=True)
        masses.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return self.positions.size

    @property
    def total_mass(self):
        """Exactly rounded total (compensated summation)."""
        if np.iscomplexobj(self.masses):
            return complex(math.fsum(self.masses.real), math.fsum(self.masses.imag))
        return math.fsum(self.masses)

    @property
    def total_variation(self) -> float:
        return math.fsum(np.abs(self.masses))

    def cdf(self, t: float, side: str = "right") -> float:
        """Cumulative mass up to t; side="left" gives the open limit at t."""
        if side not in ("right", "left"):
            raise ValidationError(f"side must be 'right' or 'left', got {side!r}")
        k = int(np.searchsorted(self.positions, t, side=side))
        return float(np.sum(self.masses[:k].real))


def _cluster_masses(t: Truncation, d: EigenDecomposition) -> np.ndarray:
    col = t.weights @ (np.abs(d.vectors) ** 2)
    return np.add.reduceat(col, d.boundaries[:-1])


def _retained(t: Truncation, d: EigenDecomposition, tol_atom: float) -> tuple[np.ndarray, np.ndarray, float]:
    masses = _cluster_masses(t, d)
    keep = masses > tol_atom
    dropped = float(np.sum(masses[~keep]))
    return keep, masses, dropped


def spectral_probability_measure(t: Truncation, d: EigenDecomposition,
                                 tol_atom: float = TOL_ATOM) -> AtomicMeasure:
    """Weighted eigenspace masses as a probability measure on the clusters.

    Atoms with mass <= tol_atom are dropped and accounted for in
    ``dropped_mass``; retained masses are reported as computed, so the
    conservation identity reads total_mass + dropped_mass = 1.
    """
    keep, masses, dropped = _retained(t, d, tol_atom)
    if not np.any(keep):
        raise ValidationError("every atom fell below the mass threshold")
    return AtomicMeasure(positions=d.representatives[keep], masses=masses[keep],
                         kind="probability", dropped_mass=dropped)


def _pair_cluster_masses(d: EigenDecomposition, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = d.vectors.shape[0]
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != (n,) or y.shape != (n,):
        raise ValidationError(
            f"vectors have shapes {x.shape} and {y.shape} but the truncation size is {n}"
        )
    zx = d.vectors.conj().T @ x
    zy = d.vectors.conj().T @ y
    return np.add.reduceat(zx * zy.conj(), d.boundaries[:-1])


def pair_measure(t: Truncation, d: EigenDecomposition, x: np.ndarray, y: np.ndarray,
                 tol_atom: float = TOL_ATOM) -> AtomicMeasure:
    """Signed (complex for complex scalars) measure with atom masses <P x, P y>.

    Supported on the retained atoms of the probability measure; atoms whose
    pair mass is exactly zero are omitted, so the support inclusion is exact.
    Linear in x and conjugate-linear in y.  When x and y coincide the masses
    are squared projection norms and the result is tagged as a (possibly
    sub-)probability measure.
    """
    keep, _, _ = _retained(t, d, tol_atom)
    masses = _pair_cluster_masses(d, x, y)[keep]
    diagonal = np.array_equal(np.asarray(x), np.asarray(y))
    if diagonal or not np.iscomplexobj(t.matrix):
        masses = masses.real
    nonzero = masses != 0
    return AtomicMeasure(positions=d.representatives[keep][nonzero],
                         masses=masses[nonzero],
                         kind="probability" if diagonal else "signed")


@dataclass(frozen=True)
class GramField:
    """Density matrices of the pair measures against the probability measure.

    At each retained atom, ``gram(i)`` is the positive semidefinite matrix
    with entries <P e_j, P e_l> / mass.  It is stored through its factor
    ``C`` with ``gram = C @ C^H``, whose columns are the conjugated cluster
    eigenvectors divided by sqrt(mass); the rank therefore equals the
    cluster multiplicity by construction.
    """

    positions: np.ndarray
    masses: np.ndarray
    factors: tuple[np.ndarray, ...]
    tol_psd: float = 1e-10

    def __len__(self) -> int:
        return self.positions.size

    def gram(self, i: int) -> np.ndarray:
        c = self.factors[i]
        return c @ c.conj().T

    def rank(self, i: int) -> int:
        return self.factors[i].shape[1]

    def trace(self, i: int) -> float:
        return float(np.sum(np.abs(self.factors[i]) ** 2))


def gram_field(t: Truncation, d: EigenDecomposition, tol_atom: float = TOL_ATOM,
               tol_psd: float = 1e-10) -> GramField:
    """Gram matrix field over the retained atoms."""
    keep, masses, _ = _retained(t, d, tol_atom)
    positions = d.representatives[keep]
    factors = []
    for i in np.flatnonzero(keep):
        if masses[i] <= tol_atom:
            raise ValidationError(
                f"atom at {d.representatives[i]} has mass {masses[i]:.3e} <= {tol_atom:.1e} "
                "and should have been dropped"
            )
        factors.append(d.basis(int(i)).conj() / np.sqrt(masses[i]))
    return GramField(positions=positions, masses=masses[keep],
                     factors=tuple(factors), tol_psd=tol_psd)


def moment(m: AtomicMeasure, k: int):
    """k-th power moment of the measure (k = 0 gives the total mass)."""
    if k < 0:
        raise ValidationError("moment order must be nonnegative")
    vals = m.masses * np.power(m.positions, k)
    if np.iscomplexobj(vals):
        return complex(math.fsum(vals.real), math.fsum(vals.imag))
    return math.fsum(vals)


def tail_mass_check(t: Truncation, d: EigenDecomposition, n: float,
                    tol_atom: float = TOL_ATOM) -> tuple[float, float]:
    """Observed mass outside [-n, n] and its second-moment bound.

    The bound is (1/n^2) * sum_j c_j ||A e_j||^2, a Chebyshev-type estimate;
    the observed tail can only shrink when atoms are dropped, so
    actual <= bound holds with slack at worst -1e-12.
    """
    if n <= 0:
        raise ValidationError("tail radius must be positive")
    mu = spectral_probability_measure(t, d, tol_atom)
    outside = np.abs(mu.positions) > n
    actual = float(np.sum(mu.masses[outside]))
    column_sq = np.sum(np.abs(t.matrix) ** 2, axis=0)
    bound = float(t.weights @ column_sq) / float(n) ** 2
    return actual, bound


def cauchy_schwarz_check(t: Truncation, d: EigenDecomposition, x: np.ndarray,
                         y: np.ndarray) -> tuple[float, float]:
    """Total variation of the pair measure against ||x|| ||y||."""
    nu = pair_measure(t, d, x, y)
    return nu.total_variation, float(np.linalg.norm(x) * np.linalg.norm(y))


def perturbation_bound(t: Truncation, d: EigenDecomposition,
                       x1: np.ndarray, y1: np.ndarray,
                       x2: np.ndarray, y2: np.ndarray,
                       tol_atom: float = TOL_ATOM) -> tuple[float, float]:
    """Atomwise variation between two pair measures against its Lipschitz cap.

    Returns (lhs, rhs): lhs sums |mass1 - mass2| over the retained atoms,
    rhs = ||x1|| ||y1 - y2|| + ||x1 - x2|| ||y2||; lhs <= rhs up to rounding.
    """
    keep, _, _ = _retained(t, d, tol_atom)
    m1 = _pair_cluster_masses(d, x1, y1)[keep]
    m2 = _pair_cluster_masses(d, x2, y2)[keep]
    lhs = math.fsum(np.abs(m1 - m2).tolist())
    rhs = float(np.linalg.norm(x1) * np.linalg.norm(np.asarray(y1) - np.asarray(y2))
                + np.linalg.norm(np.asarray(x1) - np.asarray(x2)) * np.linalg.norm(y2))
    return lhs, rhs


def uniform_integrability_profile(t: Truncation, d: EigenDecomposition,
                                  x: np.ndarray, y: np.ndarray,
                                  delta_list: Sequence[float],
                                  tol_atom: float = TOL_ATOM) -> list[tuple[float, float, float]]:
    """Largest pair-measure variation carried by small probability-mass sets.

    For each budget delta: atoms are ranked by density |pair| / mass
    (ties broken by ascending position) and taken while the cumulative
    probability mass stays within delta; the atom that would overflow is
    excluded.  Rows are (delta, variation_captured, mass_used).  A profile
    that stays small as delta -> 0 is the finite-scale expression of the
    pair integrand being uniformly integrable.
    """
    keep, masses, _ = _retained(t, d, tol_atom)
    mu_masses = masses[keep]
    nu_masses = np.abs(_pair_cluster_masses(d, x, y)[keep])
    positions = d.representatives[keep]
    density = nu_masses / mu_masses
    order = np.lexsort((positions, -density))
    rows = []
    for delta in delta_list:
        if delta < 0:
            raise ValidationError("mass budgets must be nonnegative")
        used = 0.0
        captured = 0.0
        for idx in order:
            if used + mu_masses[idx] > delta:
                break
            used += float(mu_masses[idx])
            captured += float(nu_masses[idx])
        rows.append((float(delta), captured, used))
    return rows


def kolmogorov_distance(m1: AtomicMeasure, m2: AtomicMeasure | Callable[[float], float]) -> float:
    """Sup distance between cumulative distributions.

    Evaluated from both sides at every atom position, which is where the
    supremum of a difference of step functions (or step vs continuous
    reference) is attained.  The second argument may be a callable
    continuous reference CDF.
    """
    if m1.kind != "probability":
        raise ValidationError("kolmogorov_distance expects probability measures")
    grid = m1.positions
    if isinstance(m2, AtomicMeasure):
        if m2.kind != "probability":
            raise ValidationError("kolmogorov_distance expects probability measures")
        grid = np.union1d(grid, m2.positions)
        f2_right = _step_cdf(m2, grid, "right")
        f2_left = _step_cdf(m2, grid, "left")
    else:
        f2_right = np.asarray([float(m2(v)) for v in grid])
        f2_left = f2_right
    f1_right = _step_cdf(m1, grid, "right")
    f1_left = _step_cdf(m1, grid, "left")
    return float(max(np.max(np.abs(f1_right - f2_right)),
                     np.max(np.abs(f1_left - f2_left))))


def _step_cdf(m: AtomicMeasure, ts: np.ndarray, side: str) -> np.ndarray:
    cum = np.concatenate([[0.0], np.cumsum(m.masses.real)])
    return cum[np.searchsorted(m.positions, ts, side=side)]


def bin_pushforward(m: AtomicMeasure, width: float) -> AtomicMeasure:
    """Group atoms into half-open bins [k w, (k+1) w) at bin midpoints.

    No mass is created, dropped, or renormalized: every atom lands in
    exactly one bin and bin masses are compensated sums.
    """
    if width <= 0:
        raise ValidationError("bin width must be positive")
    keys = np.floor(m.positions / width).astype(np.int64)
    # positions are strictly increasing, so equal keys form contiguous runs
    starts = np.concatenate([[0], np.flatnonzero(np.diff(keys)) + 1])
    ends = np.concatenate([starts[1:], [len(keys)]])
    sums = []
    for b, e in zip(starts, ends):
        chunk = m.masses[b:e]
        if np.iscomplexobj(chunk):
            sums.append(complex(math.fsum(chunk.real), math.fsum(chunk.imag)))
        else:
            sums.append(math.fsum(chunk))
    centers = (keys[starts].astype(np.float64) + 0.5) * width
    return AtomicMeasure(positions=centers, masses=np.asarray(sums), kind=m.kind,
                         dropped_mass=m.dropped_mass)
