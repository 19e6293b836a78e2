"""Fiber synthesis: from Gram matrices to concrete frame vectors.

Each retained atom carries a positive semidefinite Gram matrix.  This module
turns that matrix into an explicit family of vectors V_1, ..., V_N inside a
fiber of dimension equal to the matrix rank, reproducing all pairwise inner
products.  The construction is triangular: V_n is the part of V_n expressible
through the previous vectors plus, when the remaining diagonal mass is
genuinely positive, a new orthogonal direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ValidationError, inner

__all__ = [
    "FiberFrame",
    "PivotError",
    "measurable_projection",
    "gram_to_sections",
    "build_fibers",
]

# relative floor below which a residual direction is treated as dependent
ZERO_PIVOT_REL = 1e-14


class PivotError(ValidationError):
    """The Gram matrix failed positive semidefiniteness beyond tolerance."""


@dataclass(frozen=True)
class FiberFrame:
    """Vectors V_1..V_N of one fiber, stored in its orthonormal coordinates.

    ``rows[n]`` holds the coordinates of V_{n+1}; only ``rank`` coordinates
    exist, and ``coord_index[r]`` records which vector first opened
    coordinate r (so the frame is lower triangular in that ordering).
    """

    position: float
    rows: np.ndarray
    coord_index: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows)
        if rows.ndim != 2:
            raise ValidationError("frame rows must form a 2d array")
        if rows.shape[1] != len(self.coord_index):
            raise ValidationError("one coordinate index per fiber dimension")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def rank(self) -> int:
        return self.rows.shape[1]

    def vector(self, n: int) -> np.ndarray:
        """Coordinates of V_{n+1} (0-based n)."""
        return self.rows[n]

    def gram(self) -> np.ndarray:
        """Reproduced matrix of pairwise inner products <V_j, V_l>."""
        return self.rows @ self.rows.conj().T


def _mgs_increments(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Modified Gram-Schmidt with zero guards over the rows of ``vectors``.

    Returns (increments, norms_sq, coeffs) where increments[n] is the part of
    row n orthogonal to rows 0..n-1, norms_sq[n] its squared norm (exact 0.0
    when guarded away), and coeffs the strictly lower triangular expansion
    coefficients of row n over the previous increments.
    """
    m, dim = vectors.shape
    increments = np.array(vectors, copy=True)
    norms_sq = np.zeros(m)
    coeffs = np.zeros((m, m), dtype=vectors.dtype)
    trace = 0.0
    for n in range(m):
        v = increments[n]
        for j in range(n):
            if norms_sq[j] == 0.0:
                continue
            a = inner(v, increments[j]) / norms_sq[j]
            coeffs[n, j] = a
            v = v - a * increments[j]
        nsq = float(np.real(inner(v, v)))
        trace += float(np.real(inner(vectors[n], vectors[n])))
        if nsq <= ZERO_PIVOT_REL * trace:
            increments[n] = 0.0
            norms_sq[n] = 0.0
        else:
            increments[n] = v
            norms_sq[n] = nsq
    return increments, norms_sq, coeffs


def measurable_projection(vectors: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Coefficients of the orthogonal projection of y onto the row span.

    Runs the guarded Gram-Schmidt sweep over the rows, peels y against the
    orthogonal increments, and back-substitutes so the returned coefficients
    refer to the original rows: y - sum_j a_j vectors[j] is orthogonal to
    every row.  Directions whose increment fell below the zero threshold
    contribute coefficient 0, so dependent or repeated rows are harmless.
    """
    vectors = np.atleast_2d(np.asarray(vectors))
    y = np.asarray(y)
    if vectors.shape[1] != y.shape[0]:
        raise ValidationError("projection target has mismatched dimension")
    increments, norms_sq, coeffs = _mgs_increments(vectors)
    m = vectors.shape[0]
    dtype = np.result_type(vectors.dtype, y.dtype, float)
    # rep[n] expands increment n over the original rows
    rep = np.zeros((m, m), dtype=dtype)
    for n in range(m):
        rep[n, n] = 1.0
        for j in range(n):
            if coeffs[n, j] != 0.0:
                rep[n] -= coeffs[n, j] * rep[j]
    out = np.zeros(m, dtype=dtype)
    for n in range(m):
        if norms_sq[n] == 0.0:
            continue
        out += (inner(y, increments[n]) / norms_sq[n]) * rep[n]
    return out


def gram_to_sections(position: float, gram: np.ndarray, tol_psd_abs: float) -> FiberFrame:
    """Synthesize frame vectors reproducing a positive semidefinite matrix.

    Triangular construction: V_1 = sqrt(G_11) g_1, and at step n the previous
    increments give the dependent part R with squared norm sum |t_k|^2 / |V^_k|^2;
    the leftover diagonal pivot G_nn - |R|^2 must be nonnegative.  Pivots in
    [-tol_psd_abs, 0) are clamped to zero; anything more negative raises
    PivotError.  A pivot above the relative zero threshold opens a new
    coordinate.
    """
    gram = np.asarray(gram)
    m = gram.shape[0]
    if gram.shape != (m, m):
        raise ValidationError("Gram matrix must be square")
    dtype = np.result_type(gram.dtype, float)
    rows = np.zeros((m, m), dtype=dtype)
    coord_index: list[int] = []
    pivot_sqrts: list[float] = []
    trace = 0.0
    for n in range(m):
        # coordinate r was opened by row p_r; the expansion coefficient of
        # the new vector over that orthogonal direction follows from Gram
        # data alone: <V_n, increment_r> = G[n, p_r] - (already placed part)
        rank = len(coord_index)
        for r in range(rank):
            p = coord_index[r]
            partial = np.sum(rows[n, :r] * rows[p, :r].conj()) if r else 0.0
            rows[n, r] = (gram[n, p] - partial) / pivot_sqrts[r]
        pivot = float(np.real(gram[n, n])) - float(np.sum(np.abs(rows[n, :rank]) ** 2))
        trace += float(np.real(gram[n, n]))
        if pivot < -tol_psd_abs:
            raise PivotError(
                f"Gram matrix at position {position} is not positive semidefinite: "
                f"step {n + 1} pivot {pivot:.3e} below -{tol_psd_abs:.1e}"
            )
        if pivot > ZERO_PIVOT_REL * trace:
            rows[n, rank] = np.sqrt(pivot)
            coord_index.append(n)
            pivot_sqrts.append(float(np.sqrt(pivot)))
    rank = len(coord_index)
    return FiberFrame(position=position, rows=rows[:, :rank],
                      coord_index=np.asarray(coord_index, dtype=np.intp))


def build_fibers(field) -> tuple[FiberFrame, ...]:
    """One frame per retained atom of a Gram field.

    The semidefiniteness tolerance is taken relative to each atom's trace,
    so heavy and light atoms are judged on the same relative scale.
    """
    frames = []
    for i in range(len(field)):
        tol_abs = field.tol_psd * max(field.trace(i), 1.0)
        frames.append(gram_to_sections(float(field.positions[i]), field.gram(i), tol_abs))
    return tuple(frames)
