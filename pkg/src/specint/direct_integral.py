"""Direct integral assembled over the retained atoms.

The ambient space is the mass-weighted sum of the fibers: a section assigns
to each atom a vector in that atom's fiber, and the inner product integrates
fiberwise inner products against the probability measure.  Embedding the
truncated space coordinate-wise through the fiber frames is an isometry that
turns the truncated operator into multiplication by the spectral position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ValidationError, inner
from .sampling import EigenDecomposition, Truncation, eigendecompose
from .sections import FiberFrame, build_fibers
from .spectral_measure import (
    TOL_ATOM,
    AtomicMeasure,
    GramField,
    gram_field,
    spectral_probability_measure,
)

__all__ = [
    "Section",
    "DirectIntegral",
    "ProjectionResult",
    "ConditioningError",
    "build_direct_integral",
    "embed",
    "inner_product",
    "norm",
    "multiply",
    "intertwining_residual",
    "project_onto_range",
]


class ConditioningError(ValidationError):
    """Normal equations too ill-conditioned to trust the projection."""


@dataclass(frozen=True)
class Section:
    """One fiber vector per retained atom."""

    positions: np.ndarray
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.blocks) != self.positions.size:
            raise ValidationError("one block per atom required")

    def __add__(self, other: "Section") -> "Section":
        self._check_compatible(other)
        return Section(self.positions,
                       tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __sub__(self, other: "Section") -> "Section":
        self._check_compatible(other)
        return Section(self.positions,
                       tuple(a - b for a, b in zip(self.blocks, other.blocks)))

    def scale(self, c: complex) -> "Section":
        return Section(self.positions, tuple(c * b for b in self.blocks))

    def _check_compatible(self, other: "Section") -> None:
        if len(self.blocks) != len(other.blocks) or any(
            a.shape != b.shape for a, b in zip(self.blocks, other.blocks)
        ):
            raise ValidationError("sections live on different fiber families")


@dataclass(frozen=True)
class DirectIntegral:
    """Measure, Gram field, and synthesized fiber frames of one truncation."""

    truncation: Truncation
    decomposition: EigenDecomposition
    measure: AtomicMeasure
    field: GramField
    frames: tuple[FiberFrame, ...]

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def fiber_ranks(self) -> np.ndarray:
        return np.asarray([f.rank for f in self.frames], dtype=np.intp)


def build_direct_integral(t: Truncation, d: EigenDecomposition | None = None,
                          tol_atom: float = TOL_ATOM,
                          tol_psd: float = 1e-10) -> DirectIntegral:
    """Assemble measure, Gram field, and fibers for one truncation."""
    if d is None:
        d = eigendecompose(t)
    measure = spectral_probability_measure(t, d, tol_atom=tol_atom)
    field = gram_field(t, d, tol_atom=tol_atom, tol_psd=tol_psd)
    frames = build_fibers(field)
    return DirectIntegral(truncation=t, decomposition=d, measure=measure,
                          field=field, frames=frames)


def embed(di: DirectIntegral, x: np.ndarray) -> Section:
    """Isometry: coordinates x to the section with values sum_j x_j V_j."""
    x = np.asarray(x)
    if x.shape != (di.truncation.n,):
        raise ValidationError("vector length must match the truncation size")
    return Section(di.measure.positions, tuple(x @ f.rows for f in di.frames))


def inner_product(di: DirectIntegral, xs: Section, ys: Section) -> complex | float:
    """Integral of fiberwise inner products against the probability measure."""
    vals = [inner(a, b) * m for a, b, m in
            zip(xs.blocks, ys.blocks, di.measure.masses)]
    if any(np.iscomplexobj(v) for v in vals):
        return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))
    return math.fsum(float(v) for v in vals)


def norm(di: DirectIntegral, xs: Section) -> float:
    return math.sqrt(max(float(np.real(inner_product(di, xs, xs))), 0.0))


def multiply(di: DirectIntegral, phi: Callable[[float], complex] | np.ndarray,
             xs: Section) -> Section:
    """Pointwise multiplication by a function of the spectral position."""
    if callable(phi):
        values = np.asarray([phi(float(p)) for p in xs.positions])
    else:
        values = np.asarray(phi)
        if values.shape != (len(xs.blocks),):
            raise ValidationError("one multiplier value per atom required")
    return Section(xs.positions,
                   tuple(v * b for v, b in zip(values, xs.blocks)))


def intertwining_residual(di: DirectIntegral, x: np.ndarray) -> float:
    """Norm of (embed A x) - (position * embed x); zero when nothing drops."""
    ax = di.truncation.matrix @ np.asarray(x)
    lhs = embed(di, ax)
    rhs = multiply(di, di.measure.positions, embed(di, x))
    return norm(di, lhs - rhs)


@dataclass(frozen=True)
class ProjectionResult:
    section: Section
    coefficients: np.ndarray
    gram_condition: float


def project_onto_range(di: DirectIntegral, m: int, ys: Section,
                       cond_limit: float = 1e12) -> ProjectionResult:
    """Orthogonal projection onto the embedded span of the first m coordinates.

    Solves the normal equations against the Gram matrix of the embedded
    basis sections; a condition number beyond cond_limit raises
    ConditioningError rather than returning an untrustworthy answer.
    """
    n = di.truncation.n
    if not 1 <= m <= n:
        raise ValidationError(f"m must lie in 1..{n}, got {m}")
    dtype = complex if any(np.iscomplexobj(f.rows) for f in di.frames) else float
    gram = np.zeros((m, m), dtype=dtype)
    rhs = np.zeros(m, dtype=complex)
    for f, block, mass in zip(di.frames, ys.blocks, di.measure.masses):
        lead = f.rows[:m]
        gram += mass * (lead @ lead.conj().T)
        rhs += mass * (lead.conj() @ block)
    cond = float(np.linalg.cond(gram))
    if cond > cond_limit:
        raise ConditioningError(
            f"embedded-basis Gram condition {cond:.3e} exceeds {cond_limit:.1e}"
        )
    # <sum_j a_j E_j, E_l> = b_l with gram[j, l] = <E_j, E_l>
    coeffs = np.linalg.solve(gram.conj(), rhs if dtype is complex else rhs.real)
    full = np.zeros(n, dtype=coeffs.dtype)
    full[:m] = coeffs
    return ProjectionResult(section=embed(di, full), coefficients=coeffs,
                            gram_condition=cond)
