"""Weighted truncations and their exact finite-dimensional eigenstructure.

A :class:`Truncation` pairs the leading ``N x N`` block with the scale
weights.  :func:`eigendecompose` produces the full orthonormal eigensystem
and groups numerically coincident eigenvalues into clusters, which act as
the exact atoms of everything measure-valued downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OperatorSpec, ScalarField, ValidationError, scale_weights, truncate

__all__ = [
    "EigensolverError",
    "Truncation",
    "EigenDecomposition",
    "make_truncation",
    "eigendecompose",
    "eigenprojection_apply",
    "graph_residual",
    "entry_scale",
]


class EigensolverError(Exception):
    """The factorization failed or did not reproduce the matrix."""


def entry_scale(matrix: np.ndarray) -> float:
    """Largest entry magnitude; the scale in every relative tolerance."""
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


@dataclass(frozen=True)
class Truncation:
    """Leading block of an operator together with its scale weights."""

    n: int
    matrix: np.ndarray
    weights: np.ndarray
    field: ScalarField = ScalarField.REAL
    label: str = ""

    def __post_init__(self):
        if self.matrix.shape != (self.n, self.n):
            raise ValidationError(
                f"matrix shape {self.matrix.shape} does not match n={self.n}"
            )
        if self.weights.shape != (self.n,):
            raise ValidationError(
                f"weights shape {self.weights.shape} does not match n={self.n}"
            )
        if np.any(self.weights <= 0):
            raise ValidationError("weights must be strictly positive")
        total = float(np.sum(self.weights))
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"weights must sum to 1, got {total!r}")

    @property
    def scale(self) -> float:
        return entry_scale(self.matrix)


def make_truncation(spec: OperatorSpec, n: int, weights: np.ndarray | None = None) -> Truncation:
    """Truncate an operator and attach weights (geometric scale by default)."""
    matrix = truncate(spec, n)
    w = scale_weights(n) if weights is None else np.asarray(weights, dtype=np.float64)
    return Truncation(n=n, matrix=matrix, weights=w, field=spec.field, label=spec.name)


@dataclass(frozen=True)
class EigenDecomposition:
    """Complete eigensystem of a truncation, grouped into clusters.

    ``vectors`` holds orthonormal eigenvector columns in ascending eigenvalue
    order; cluster ``i`` owns columns ``boundaries[i]:boundaries[i+1]`` and is
    represented by the mean of its eigenvalues.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    boundaries: np.ndarray
    representatives: np.ndarray
    tol_cluster: float

    @property
    def cluster_count(self) -> int:
        return len(self.representatives)

    def multiplicity(self, i: int) -> int:
        return int(self.boundaries[i + 1] - self.boundaries[i])

    def basis(self, i: int) -> np.ndarray:
        """Orthonormal eigenvector columns spanning cluster i."""
        return self.vectors[:, self.boundaries[i]:self.boundaries[i + 1]]

    def projection(self, i: int) -> np.ndarray:
        """Dense orthogonal projection matrix onto cluster i."""
        b = self.basis(i)
        return b @ b.conj().T

    def cluster_index(self, key) -> int:
        """Resolve a cluster id: an integer position or a representative value."""
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.cluster_count:
                raise ValidationError(f"unknown cluster id {key!r}")
            return int(key)
        pos = int(np.argmin(np.abs(self.representatives - float(key))))
        if abs(self.representatives[pos] - float(key)) > max(self.tol_cluster, 1e-9):
            raise ValidationError(f"no cluster with representative near {key!r}")
        return pos


def _cluster_boundaries(eigenvalues: np.ndarray, tol: float) -> np.ndarray:
    # group by gap, then split any chained group wider than tol so that
    # every pair inside one cluster really differs by <= tol
    cuts = [0]
    start = 0
    for i in range(1, eigenvalues.size):
        if (eigenvalues[i] - eigenvalues[i - 1] > tol
                or eigenvalues[i] - eigenvalues[start] > tol):
            cuts.append(i)
            start = i
    cuts.append(eigenvalues.size)
    return np.asarray(cuts, dtype=np.intp)


def eigendecompose(t: Truncation, tol_cluster: float | None = None) -> EigenDecomposition:
    """Full eigensystem with clustering and a reconstruction check.

    The cluster tolerance defaults to max(1e-10, 1e-12 * spread).  The
    representative-based reconstruction must satisfy
    ``max |A - sum rep * P| <= 1e-10 * (1 + scale * N)``; a violation means
    the factorization (or the clustering) cannot be trusted and raises.
    """
    try:
        eigenvalues, vectors = np.linalg.eigh(t.matrix)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"factorization failed for {t.label or 'matrix'}: {exc}") from exc

    spread = float(eigenvalues[-1] - eigenvalues[0]) if t.n else 0.0
    tol = tol_cluster if tol_cluster is not None else max(1e-10, 1e-12 * spread)
    boundaries = _cluster_boundaries(eigenvalues, tol)
    reps = np.asarray([
        float(np.mean(eigenvalues[boundaries[i]:boundaries[i + 1]]))
        for i in range(len(boundaries) - 1)
    ])
    if np.any(np.diff(reps) <= 0):
        raise EigensolverError("cluster representatives are not strictly increasing")

    recon = (vectors * reps.repeat(np.diff(boundaries))) @ vectors.conj().T
    defect = entry_scale(t.matrix - recon)
    tol_recon = 1e-10 * (1.0 + t.scale * t.n)
    if defect > tol_recon:
        raise EigensolverError(
            f"reconstruction defect {defect:.3e} exceeds {tol_recon:.3e} "
            f"for {t.label or 'matrix'}"
        )
    return EigenDecomposition(eigenvalues=eigenvalues, vectors=vectors,
                              boundaries=boundaries, representatives=reps,
                              tol_cluster=tol)


def eigenprojection_apply(d: EigenDecomposition, cluster, x: np.ndarray) -> np.ndarray:
    """Apply the orthogonal projection onto one cluster's eigenspace."""
    i = d.cluster_index(cluster)
    b = d.basis(i)
    x = np.asarray(x)
    if x.shape != (b.shape[0],):
        raise ValidationError(
            f"vector has shape {x.shape} but the truncation size is {b.shape[0]}"
        )
    return b @ (b.conj().T @ x)


def graph_residual(spec: OperatorSpec, x: np.ndarray, n: int) -> float:
    """How far the truncation is from the exact action on a given vector.

    ``x`` lives on the first ``m <= n`` basis directions.  The residual is
    the l2 distance between the exact image A x (kept to its full reach, so
    couplings cut at the truncation boundary count) and the truncated image
    padded with zeros.  Zero for diagonal operators; |b_n x_n| for a
    tridiagonal operator probed at the boundary.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.size > n:
        raise ValidationError(f"probe vector must have at most n={n} coefficients")
    xpad = np.zeros(n, dtype=spec.field.dtype)
    xpad[: x.size] = x
    exact = spec._apply(xpad)
    block = truncate(spec, n) @ xpad
    reach = max(exact.size, n)
    diff = np.zeros(reach, dtype=np.complex128)
    diff[: exact.size] = exact
    diff[: n] -= block
    return float(np.linalg.norm(diff))
