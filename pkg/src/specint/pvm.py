"""Projection-valued measure on finite unions of intervals.

Assigning to a Borel set the sum of eigenprojections of the retained atoms
inside it gives a finitely-supported projection-valued measure.  This module
provides the interval-union set algebra, the projection assignment, the
axiom report (idempotence, self-adjointness, multiplicativity, additivity,
nonnegativity, pair-measure compatibility), and the functional calculus with
its reconstruction and moment identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ValidationError, inner
from .sampling import EigenDecomposition, Truncation
from .spectral_measure import TOL_ATOM, AtomicMeasure, _retained, moment, pair_measure

__all__ = [
    "Interval",
    "BorelSet",
    "SpectralProjection",
    "spectral_projection",
    "set_mass",
    "pvm_axiom_report",
    "functional_calculus",
    "reconstruction_residual",
    "moment_identity_check",
]


@dataclass(frozen=True)
class Interval:
    """Interval with independently closed or open endpoints."""

    lo: float
    hi: float
    closed_lo: bool = True
    closed_hi: bool = True

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValidationError(f"interval endpoints out of order: {self.lo} > {self.hi}")
        if self.lo == self.hi and not (self.closed_lo and self.closed_hi):
            raise ValidationError("a degenerate interval must include its point")

    def contains(self, t: float) -> bool:
        if self.lo < t < self.hi:
            return True
        if t == self.lo and self.closed_lo:
            return True
        return t == self.hi and self.closed_hi

    def __str__(self) -> str:
        return (("[" if self.closed_lo else "(") + f"{self.lo}, {self.hi}"
                + ("]" if self.closed_hi else ")"))


def _touch_joined(a: Interval, b: Interval) -> bool:
    """a.hi == b.lo and the shared point belongs to at least one side."""
    return a.hi == b.lo and (a.closed_hi or b.closed_lo)


@dataclass(frozen=True)
class BorelSet:
    """Finite disjoint union of intervals, kept sorted."""

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self):
        ivs = tuple(self.intervals)
        for a, b in zip(ivs, ivs[1:]):
            ok = a.hi < b.lo or (a.hi == b.lo and not (a.closed_hi and b.closed_lo))
            if not ok:
                raise ValidationError(f"intervals {a} and {b} overlap or are unsorted")
        object.__setattr__(self, "intervals", ivs)

    @staticmethod
    def of(*intervals: Interval) -> "BorelSet":
        return BorelSet(tuple(sorted(intervals, key=lambda iv: (iv.lo, iv.hi))))

    @staticmethod
    def closed(lo: float, hi: float) -> "BorelSet":
        return BorelSet((Interval(lo, hi),))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, t: float) -> bool:
        return any(iv.contains(t) for iv in self.intervals)

    def intersect(self, other: "BorelSet") -> "BorelSet":
        pieces = []
        for a in self.intervals:
            for b in other.intervals:
                if a.lo > b.lo or (a.lo == b.lo and not a.closed_lo):
                    lo, closed_lo = a.lo, a.closed_lo and (a.lo != b.lo or b.closed_lo)
                else:
                    lo, closed_lo = b.lo, b.closed_lo and (a.lo != b.lo or a.closed_lo)
                if a.hi < b.hi or (a.hi == b.hi and not a.closed_hi):
                    hi, closed_hi = a.hi, a.closed_hi and (a.hi != b.hi or b.closed_hi)
                else:
                    hi, closed_hi = b.hi, b.closed_hi and (a.hi != b.hi or a.closed_hi)
                if lo < hi or (lo == hi and closed_lo and closed_hi):
                    pieces.append(Interval(lo, hi, closed_lo, closed_hi))
        return BorelSet.of(*pieces)

    def union(self, other: "BorelSet") -> "BorelSet":
        ivs = sorted(self.intervals + other.intervals, key=lambda iv: (iv.lo, iv.hi))
        merged: list[Interval] = []
        for iv in ivs:
            if merged:
                last = merged[-1]
                overlaps = iv.lo < last.hi or (iv.lo == last.hi and (last.closed_hi or iv.closed_lo))
                if overlaps or (iv.lo == last.lo):
                    closed_lo = last.closed_lo or (iv.lo == last.lo and iv.closed_lo)
                    if iv.hi > last.hi:
                        hi, closed_hi = iv.hi, iv.closed_hi
                    elif iv.hi == last.hi:
                        hi, closed_hi = last.hi, last.closed_hi or iv.closed_hi
                    else:
                        hi, closed_hi = last.hi, last.closed_hi
                    merged[-1] = Interval(last.lo, hi, closed_lo, closed_hi)
                    continue
            merged.append(iv)
        return BorelSet(tuple(merged))


def set_mass(m: AtomicMeasure, bset: BorelSet) -> complex | float:
    """Total mass the measure assigns to the set."""
    hit = [mass for pos, mass in zip(m.positions, m.masses) if bset.contains(float(pos))]
    if any(np.iscomplexobj(v) for v in hit):
        return complex(math.fsum(v.real for v in hit), math.fsum(v.imag for v in hit))
    return math.fsum(float(np.real(v)) for v in hit)


@dataclass(frozen=True)
class SpectralProjection:
    """Projection assigned to a Borel set, with the atoms it captured."""

    bset: BorelSet
    matrix: np.ndarray
    atom_indices: tuple[int, ...]


def spectral_projection(t: Truncation, d: EigenDecomposition, bset: BorelSet,
                        tol_atom: float = TOL_ATOM) -> SpectralProjection:
    """Sum of eigenprojections over the retained atoms inside the set."""
    keep, _, _ = _retained(t, d, tol_atom)
    n = t.n
    out = np.zeros((n, n), dtype=d.vectors.dtype)
    captured = []
    for i in np.flatnonzero(keep):
        i = int(i)
        if bset.contains(float(d.representatives[i])):
            out += d.projection(i)
            captured.append(i)
    return SpectralProjection(bset=bset, matrix=out, atom_indices=tuple(captured))


def _entry_norm(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def pvm_axiom_report(t: Truncation, d: EigenDecomposition, sets: Sequence[BorelSet],
                     x: np.ndarray, y: np.ndarray,
                     tol_atom: float = TOL_ATOM) -> list[tuple[str, float, float, bool]]:
    """Axiom checks for the projections of the given sets.

    Rows are (check_name, value, bound, passed) with the convention that a
    check passes when value <= bound.  Multiplicativity is checked for every
    pair, additivity for every disjoint pair.
    """
    nu = pair_measure(t, d, x, y, tol_atom)
    projs = [spectral_projection(t, d, b, tol_atom) for b in sets]
    rows: list[tuple[str, float, float, bool]] = []

    def add(name: str, value: float, bound: float) -> None:
        rows.append((name, float(value), float(bound), bool(value <= bound)))

    for i, p in enumerate(projs):
        mat = p.matrix
        add(f"idempotent[{i}]", _entry_norm(mat @ mat - mat), 1e-10)
        add(f"selfadjoint[{i}]", _entry_norm(mat - mat.conj().T), 1e-10)
        eigs = np.linalg.eigvalsh(mat) if mat.size else np.zeros(1)
        add(f"nonnegative[{i}]", max(0.0, -float(eigs[0])), 1e-10)
        quad = inner(mat @ x, y)
        add(f"pair_compatible[{i}]", abs(quad - set_mass(nu, p.bset)), 1e-10)
    for i in range(len(projs)):
        for j in range(i + 1, len(projs)):
            meet = sets[i].intersect(sets[j])
            pm_ij = spectral_projection(t, d, meet, tol_atom)
            add(f"multiplicative[{i},{j}]",
                _entry_norm(projs[i].matrix @ projs[j].matrix - pm_ij.matrix), 1e-10)
            if meet.is_empty:
                join = sets[i].union(sets[j])
                pj = spectral_projection(t, d, join, tol_atom)
                add(f"additive[{i},{j}]",
                    _entry_norm(projs[i].matrix + projs[j].matrix - pj.matrix), 1e-12)
    return rows


def functional_calculus(t: Truncation, d: EigenDecomposition,
                        phi: Callable[[float], complex],
                        tol_atom: float = TOL_ATOM) -> np.ndarray:
    """Operator sum of phi(position) times the retained eigenprojections."""
    keep, _, _ = _retained(t, d, tol_atom)
    out = np.zeros((t.n, t.n), dtype=d.vectors.dtype)
    for i in np.flatnonzero(keep):
        i = int(i)
        val = phi(float(d.representatives[i]))
        out = out + val * d.projection(i)
    return out


def reconstruction_residual(t: Truncation, d: EigenDecomposition,
                            tol_atom: float = TOL_ATOM) -> float:
    """Entrywise gap between the matrix and the calculus of the identity map."""
    rebuilt = functional_calculus(t, d, lambda v: v, tol_atom)
    return _entry_norm(t.matrix - rebuilt)


def moment_identity_check(t: Truncation, d: EigenDecomposition, x: np.ndarray,
                          k: int, tol_atom: float = TOL_ATOM) -> tuple[float, float]:
    """k-th moment of the diagonal pair measure vs the direct quadratic form."""
    if k < 0:
        raise ValidationError("moment order must be nonnegative")
    nu = pair_measure(t, d, x, x, tol_atom)
    quad = moment(nu, k)
    v = np.asarray(x)
    for _ in range(k):
        v = t.matrix @ v
    direct = inner(v, x)
    return float(np.real(quad)), float(np.real(direct))
