"""Operator specifications, built-in registry, configuration and truncation.

A symmetric operator is described by an :class:`OperatorSpec` giving the
action on the canonical basis ``e_1, e_2, ...``.  Everything downstream works
with the leading ``N x N`` block produced by :func:`truncate` together with
the geometric scale weights from :func:`scale_weights`.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "AsymmetryError",
    "DimensionError",
    "ParseError",
    "ValidationError",
    "inner",
    "ScalarField",
    "OperatorSpec",
    "DiagonalSpec",
    "JacobiSpec",
    "BandedSpec",
    "DenseSpec",
    "CallableSpec",
    "Tolerances",
    "RunConfig",
    "scale_weights",
    "truncate",
    "truncate_report",
    "symmetry_tolerance",
    "get_operator",
    "list_operators",
    "load_config",
]


class ParseError(Exception):
    """Raised when a configuration file cannot be parsed at all."""


class ValidationError(Exception):
    """Raised when parsed input violates a documented constraint."""


class DimensionError(ValidationError):
    """Requested truncation size is out of range for the operator."""


class AsymmetryError(ValidationError):
    """A matrix block deviates from its conjugate transpose beyond tolerance."""


class ScalarField(str, enum.Enum):
    """Scalar field of the coefficient space."""

    REAL = "real"
    COMPLEX = "complex"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.complex128 if self is ScalarField.COMPLEX else np.float64)


def inner(x: np.ndarray, y: np.ndarray):
    """Coefficient-space inner product, linear in the first argument."""
    return np.vdot(y, x)


def symmetry_tolerance(block: np.ndarray) -> float:
    """Hermitian-deviation tolerance for a matrix block: 1e-12 * (1 + max |entry|)."""
    scale = float(np.max(np.abs(block))) if block.size else 0.0
    return 1e-12 * (1.0 + scale)


def _entry_value(source, j: int):
    # source is a callable on 1-based indices or an indexable sequence
    if callable(source):
        return source(j)
    return source[j - 1]


def _entry_array(source, count: int, dtype) -> np.ndarray:
    if callable(source):
        return np.asarray([source(j) for j in range(1, count + 1)], dtype=dtype)
    arr = np.asarray(source, dtype=dtype)
    if arr.ndim != 1 or arr.size < count:
        raise DimensionError(
            f"need {count} entries but the stored sequence has {arr.size}"
        )
    return arr[:count].copy()


@dataclass(frozen=True)
class OperatorSpec:
    """Description of a symmetric operator on the canonical basis.

    Subclasses fix the storage ``kind`` and provide the leading block and the
    exact action on finitely supported vectors.  ``max_dim`` is ``None`` for
    operators defined at every index.
    """

    name: str = "operator"
    field: ScalarField = ScalarField.REAL
    notes: str = ""

    @property
    def kind(self) -> str:
        raise NotImplementedError

    @property
    def max_dim(self) -> int | None:
        return None

    def _block(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def _apply(self, x: np.ndarray) -> np.ndarray:
        """Exact action on a finitely supported coefficient vector.

        The result carries every coefficient the operator can reach from the
        support of ``x``; callers compare truncated actions against it.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class DiagonalSpec(OperatorSpec):
    entries: Sequence[float] | Callable[[int], float] = (0.0,)

    @property
    def kind(self) -> str:
        return "diagonal"

    @property
    def max_dim(self) -> int | None:
        if callable(self.entries):
            return None
        return len(self.entries)

    def _block(self, n: int) -> np.ndarray:
        return np.diag(_entry_array(self.entries, n, self.field.dtype))

    def _apply(self, x: np.ndarray) -> np.ndarray:
        d = _entry_array(self.entries, x.size, self.field.dtype)
        return d * x


@dataclass(frozen=True)
class JacobiSpec(OperatorSpec):
    """Real symmetric tridiagonal operator: diagonal a_j, coupling b_j between j and j+1."""

    diag: float | Sequence[float] | Callable[[int], float] = 0.0
    offdiag: float | Sequence[float] | Callable[[int], float] = 1.0

    def _diag_source(self):
        return (lambda j: self.diag) if np.isscalar(self.diag) else self.diag

    def _off_source(self):
        return (lambda j: self.offdiag) if np.isscalar(self.offdiag) else self.offdiag

    @property
    def kind(self) -> str:
        return "jacobi"

    @property
    def max_dim(self) -> int | None:
        dims = []
        if not np.isscalar(self.diag) and not callable(self.diag):
            dims.append(len(self.diag))
        if not np.isscalar(self.offdiag) and not callable(self.offdiag):
            dims.append(len(self.offdiag) + 1)
        return min(dims) if dims else None

    def _block(self, n: int) -> np.ndarray:
        a = _entry_array(self._diag_source(), n, np.float64)
        out = np.diag(a)
        if n > 1:
            b = _entry_array(self._off_source(), n - 1, np.float64)
            idx = np.arange(n - 1)
            out[idx, idx + 1] = b
            out[idx + 1, idx] = b
        return out

    def _apply(self, x: np.ndarray) -> np.ndarray:
        m = x.size
        reach = m + 1
        if self.max_dim is not None:
            reach = min(reach, self.max_dim)
        a = _entry_array(self._diag_source(), reach, np.float64)
        b = _entry_array(self._off_source(), reach - 1, np.float64)
        xp = np.zeros(reach, dtype=np.float64)
        xp[:m] = x[:reach]
        y = a * xp
        y[:-1] += b * xp[1:]
        y[1:] += b * xp[:-1]
        return y


@dataclass(frozen=True)
class BandedSpec(OperatorSpec):
    """Hermitian operator with entries vanishing for |i - j| > bandwidth."""

    bandwidth: int = 1
    entry: Callable[[int, int], complex] = lambda i, j: 0.0
    dim_cap: int | None = None

    @property
    def kind(self) -> str:
        return "banded"

    @property
    def max_dim(self) -> int | None:
        return self.dim_cap

    def _block(self, n: int) -> np.ndarray:
        out = np.zeros((n, n), dtype=self.field.dtype)
        for i in range(1, n + 1):
            for j in range(max(1, i - self.bandwidth), min(n, i + self.bandwidth) + 1):
                out[i - 1, j - 1] = self.entry(i, j)
        tol = symmetry_tolerance(out)
        asym = float(np.max(np.abs(out - out.conj().T))) if n else 0.0
        if asym > tol:
            raise AsymmetryError(
                f"banded generator for {self.name!r} deviates from Hermitian by {asym:.3e}"
            )
        return (out + out.conj().T) / 2.0

    def _apply(self, x: np.ndarray) -> np.ndarray:
        m = x.size
        reach = m + self.bandwidth
        if self.dim_cap is not None:
            reach = min(reach, self.dim_cap)
        block = self._block(reach)
        xpad = np.zeros(reach, dtype=self.field.dtype)
        xpad[:m] = x
        return block @ xpad


@dataclass(frozen=True)
class DenseSpec(OperatorSpec):
    """Explicitly stored Hermitian matrix; truncations read leading blocks."""

    matrix: np.ndarray = dataclass_field(default_factory=lambda: np.zeros((2, 2)))

    def __post_init__(self):
        mat = np.asarray(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("dense operator storage must be a square matrix")
        asym = float(np.max(np.abs(mat - mat.conj().T))) if mat.size else 0.0
        if asym > symmetry_tolerance(mat):
            raise AsymmetryError(
                f"dense matrix for {self.name!r} deviates from Hermitian by {asym:.3e}"
            )
        herm = (mat + mat.conj().T) / 2.0
        fld = ScalarField.COMPLEX if np.iscomplexobj(herm) else ScalarField.REAL
        herm = herm.astype(fld.dtype)
        herm.setflags(write=False)
        object.__setattr__(self, "matrix", herm)
        object.__setattr__(self, "field", fld)

    @property
    def kind(self) -> str:
        return "dense"

    @property
    def max_dim(self) -> int | None:
        return self.matrix.shape[0]

    def _block(self, n: int) -> np.ndarray:
        return self.matrix[:n, :n].copy()

    def _apply(self, x: np.ndarray) -> np.ndarray:
        m = self.matrix.shape[0]
        xpad = np.zeros(m, dtype=self.field.dtype)
        xpad[: x.size] = x
        return self.matrix @ xpad


@dataclass(frozen=True)
class CallableSpec(OperatorSpec):
    """Operator given by a rule: ``action(j)`` lists the coefficients of A e_j.

    Floating-point rules need not return exactly symmetric blocks, so the
    truncation symmetrizes (B + B*)/2 and reports the deviation; deviations
    above :func:`symmetry_tolerance` raise instead of being repaired.
    """

    action: Callable[[int], Sequence[complex]] = lambda j: (0.0,)
    dim_cap: int | None = None

    @property
    def kind(self) -> str:
        return "callable"

    @property
    def max_dim(self) -> int | None:
        return self.dim_cap

    def _raw_block(self, n: int) -> np.ndarray:
        out = np.zeros((n, n), dtype=self.field.dtype)
        for j in range(1, n + 1):
            col = np.asarray(self.action(j), dtype=self.field.dtype)
            take = min(col.size, n)
            out[:take, j - 1] = col[:take]
        return out

    def _block(self, n: int) -> np.ndarray:
        block, _ = self._symmetrized(n)
        return block

    def _symmetrized(self, n: int) -> tuple[np.ndarray, float]:
        raw = self._raw_block(n)
        asym = float(np.max(np.abs(raw - raw.conj().T))) if n else 0.0
        if asym > symmetry_tolerance(raw):
            raise AsymmetryError(
                f"callable operator {self.name!r} returned a block {asym:.3e} away from Hermitian"
            )
        return (raw + raw.conj().T) / 2.0, asym

    def _apply(self, x: np.ndarray) -> np.ndarray:
        cols = [np.asarray(self.action(j), dtype=self.field.dtype) for j in range(1, x.size + 1)]
        reach = max((c.size for c in cols), default=x.size)
        if self.dim_cap is not None:
            reach = min(reach, self.dim_cap)
        y = np.zeros(reach, dtype=self.field.dtype)
        for xj, col in zip(x, cols):
            if xj != 0:
                y[: min(col.size, reach)] += xj * col[: min(col.size, reach)]
        return y


# ---------------------------------------------------------------------------
# truncation and weights


def _check_dim(spec: OperatorSpec, n: int) -> None:
    if n < 2:
        raise DimensionError(f"truncation size must be at least 2, got {n}")
    if spec.max_dim is not None and n > spec.max_dim:
        raise DimensionError(
            f"operator {spec.name!r} is defined up to dimension {spec.max_dim}, got {n}"
        )


def truncate(spec: OperatorSpec, n: int) -> np.ndarray:
    """Leading n x n block of the operator, exactly Hermitian.

    Idempotent in n: the leading k x k block of ``truncate(spec, n)`` equals
    ``truncate(spec, k)`` entry for entry.
    """
    block, _ = truncate_report(spec, n)
    return block


def truncate_report(spec: OperatorSpec, n: int) -> tuple[np.ndarray, float]:
    """Truncate and report the pre-symmetrization Hermitian deviation.

    The deviation is zero for every kind except ``callable``, whose raw block
    is symmetrized to (B + B*)/2.
    """
    _check_dim(spec, n)
    if isinstance(spec, CallableSpec):
        return spec._symmetrized(n)
    return spec._block(n), 0.0


def scale_weights(n: int) -> np.ndarray:
    """Geometric scale weights c_j = 2^-j / (1 - 2^-N), j = 1..N.

    Strictly positive, summing to one, with c_j = 2 c_{j+1}.  The early basis
    directions dominate every weighted average downstream.
    """
    if n < 1:
        raise ValidationError(f"need at least one weight, got N={n}")
    j = np.arange(1, n + 1, dtype=np.float64)
    c = np.power(2.0, -j)
    return c / (1.0 - 2.0 ** float(-n))


# ---------------------------------------------------------------------------
# built-in registry


def _oscillator_levels() -> int:
    return 1024


@functools.lru_cache(maxsize=None)
def _oscillator_coefficients() -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Tridiagonal coefficients with spectrum {2j - 1 : j = 1..levels}.

    The operator is the multiplication operator on the discrete measure
    sum_k w_k delta_{2k-1}, w_k proportional to exp(-sqrt(k)), written in the
    orthonormal basis generated from the constant function.  The slowly
    decaying weights keep every truncation eigenvector's leading entry well
    above the pivot guards, unlike a coherent-state basis whose factorial
    weight decay underflows them.  Coefficients come from the three-term
    recurrence, run with full reorthogonalization for stability.
    """
    levels = _oscillator_levels()
    nodes = 2.0 * np.arange(1, levels + 1, dtype=np.float64) - 1.0
    # decay rate 1/2 keeps the smallest quadrature weight of any truncation
    # around 1e-8, far above the 1e-14 pivot guard
    w = np.exp(-0.5 * np.sqrt(np.arange(1, levels + 1, dtype=np.float64)))
    w /= w.sum()

    basis = np.zeros((levels, levels))
    basis[:, 0] = np.sqrt(w)
    alphas = np.zeros(levels)
    betas = np.zeros(levels - 1)
    for k in range(levels):
        q = basis[:, k]
        r = nodes * q
        alphas[k] = float(q @ r)
        if k == levels - 1:
            break
        r = r - alphas[k] * q
        if k > 0:
            r = r - betas[k - 1] * basis[:, k - 1]
        # two reorthogonalization sweeps keep the recurrence accurate to ~1e-15
        for _ in range(2):
            r = r - basis[:, : k + 1] @ (basis[:, : k + 1].T @ r)
        beta = float(np.linalg.norm(r))
        if beta <= 0.0:
            raise ValidationError(f"recurrence broke down at step {k + 1}")
        betas[k] = beta
        basis[:, k + 1] = r / beta
    return tuple(alphas.tolist()), tuple(betas.tolist())


def _make_diag3() -> OperatorSpec:
    return DiagonalSpec(
        name="diag3",
        entries=lambda j: float((j - 1) % 3 + 1),
        notes="diagonal entries cycle 1,2,3; leading block diag(1,2,3); "
        "bounded, so the truncation graph pairs span densely",
    )


def _make_free_jacobi() -> OperatorSpec:
    return JacobiSpec(
        name="free_jacobi",
        diag=0.0,
        offdiag=1.0,
        notes="free tridiagonal operator; spectrum [-2,2], first-basis-vector "
        "measure is the semicircle law; bounded",
    )


def _make_discrete_laplacian() -> OperatorSpec:
    return JacobiSpec(
        name="discrete_laplacian",
        diag=2.0,
        offdiag=-1.0,
        notes="second-difference operator on the half line; spectrum [0,4]; bounded",
    )


def _make_harmonic_oscillator() -> OperatorSpec:
    alphas, betas = _oscillator_coefficients()
    return JacobiSpec(
        name="harmonic_oscillator",
        diag=alphas,
        offdiag=betas,
        notes="oscillator spectrum 2j-1 in the orthonormal basis of a slowly "
        f"spreading cyclic vector; dimension capped at {_oscillator_levels()}; "
        "unbounded spectrum but every truncation pair is exact",
    )


_REGISTRY: dict[str, tuple[str, Callable[[], OperatorSpec]]] = {
    "diag3": ("diagonal, entries cycling 1,2,3", _make_diag3),
    "free_jacobi": ("tridiagonal, zero diagonal, unit coupling", _make_free_jacobi),
    "discrete_laplacian": ("tridiagonal, diagonal 2, coupling -1", _make_discrete_laplacian),
    "harmonic_oscillator": ("tridiagonal, spectrum 2j-1", _make_harmonic_oscillator),
}

_DENSE_PREFIX = "dense_file:"


def list_operators() -> list[tuple[str, str]]:
    """Names and one-line summaries of the built-in operators."""
    rows = [(name, summary) for name, (summary, _) in sorted(_REGISTRY.items())]
    rows.append((_DENSE_PREFIX + "<path>", "Hermitian matrix loaded from a .npy or CSV file"))
    return rows


def _load_dense_file(path_text: str) -> OperatorSpec:
    path = Path(path_text)
    if not path.exists():
        raise ValidationError(f"dense operator file not found: {path}")
    if path.suffix == ".npy":
        mat = np.load(path)
    else:
        try:
            mat = np.loadtxt(path, delimiter=",", dtype=np.complex128)
        except ValueError as exc:
            raise ParseError(f"could not read matrix from {path}: {exc}") from exc
        if np.max(np.abs(mat.imag)) == 0.0:
            mat = mat.real
    return DenseSpec(name=f"dense_file:{path.name}", matrix=mat,
                     notes=f"loaded from {path}")


def get_operator(name: str) -> OperatorSpec:
    """Resolve a registry name (or dense_file:<path>) to an operator."""
    if name.startswith(_DENSE_PREFIX):
        return _load_dense_file(name[len(_DENSE_PREFIX):])
    try:
        _, factory = _REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise ValidationError(f"unknown operator name {name!r}; known: {known}") from None
    return factory()


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances threaded through a run.

    ``tol_cluster=None`` selects the spread-scaled default
    max(1e-10, 1e-12 * (lambda_max - lambda_min)) at decomposition time.
    ``tol_psd`` is relative to the trace of each atom's Gram matrix.
    """

    tol_cluster: float | None = None
    tol_atom: float = 1e-14
    tol_psd: float = 1e-10

    def __post_init__(self):
        if self.tol_cluster is not None and not self.tol_cluster > 0:
            raise ValidationError("tol_cluster must be positive when given")
        if not self.tol_atom > 0 or not self.tol_psd > 0:
            raise ValidationError("tolerances must be positive")


@dataclass(frozen=True)
class RunConfig:
    """A validated batch-run request: operators x truncation sizes."""

    operators: tuple[OperatorSpec, ...]
    N_list: tuple[int, ...]
    weights: str | tuple[float, ...] = "geometric"
    tolerances: Tolerances = Tolerances()
    output_dir: Path | None = None

    def __post_init__(self):
        if not self.operators:
            raise ValidationError("at least one operator is required")
        if not self.N_list:
            raise ValidationError("N_list must be nonempty")
        for n in self.N_list:
            if not isinstance(n, int) or n < 2:
                raise ValidationError(f"every N must be an integer >= 2, got {n!r}")
        if isinstance(self.weights, str):
            if self.weights != "geometric":
                raise ValidationError(
                    f"weights must be 'geometric' or a list, got {self.weights!r}"
                )
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.size == 0 or np.any(w <= 0):
                raise ValidationError("user weights must be strictly positive")
            if abs(float(w.sum()) - 1.0) > 1e-12:
                raise ValidationError(
                    f"user weights must sum to one, got {float(w.sum())!r}"
                )

    def resolve_weights(self, n: int) -> np.ndarray:
        if isinstance(self.weights, str):
            return scale_weights(n)
        w = np.asarray(self.weights, dtype=np.float64)
        if w.size != n:
            raise ValidationError(
                f"user weights have length {w.size} but the truncation size is {n}"
            )
        return w.copy()


def _require_table(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ValidationError(f"{where} must be a table of key/value pairs")
    return obj


def _reject_unknown(table: dict, allowed: set[str], where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)} in {where}")


def _operator_from_table(table: dict, index: int) -> OperatorSpec:
    where = f"operator[{index}]"
    _reject_unknown(_require_table(table, where), {"kind", "params"}, where)
    kind = table.get("kind")
    params = _require_table(table.get("params", {}), where + ".params")
    if kind == "registry":
        _reject_unknown(params, {"name"}, where + ".params")
        if "name" not in params:
            raise ValidationError(f"{where}: registry operator needs a 'name'")
        return get_operator(params["name"])
    if kind == "diagonal":
        _reject_unknown(params, {"entries", "name"}, where + ".params")
        entries = params.get("entries")
        if not isinstance(entries, list) or not entries:
            raise ValidationError(f"{where}: diagonal operator needs a list of entries")
        return DiagonalSpec(name=params.get("name", "diagonal"),
                            entries=tuple(float(v) for v in entries))
    if kind == "jacobi":
        _reject_unknown(params, {"diag", "offdiag", "name"}, where + ".params")
        diag = params.get("diag")
        offdiag = params.get("offdiag")
        for label, seq in (("diag", diag), ("offdiag", offdiag)):
            if not isinstance(seq, (int, float, list)):
                raise ValidationError(f"{where}: jacobi {label} must be a number or a list")
        as_value = lambda v: float(v) if isinstance(v, (int, float)) else tuple(float(t) for t in v)
        return JacobiSpec(name=params.get("name", "jacobi"),
                          diag=as_value(diag), offdiag=as_value(offdiag))
    if kind == "dense":
        _reject_unknown(params, {"path", "matrix", "name"}, where + ".params")
        if "path" in params:
            return _load_dense_file(params["path"])
        if "matrix" in params:
            rows = params["matrix"]
            if not isinstance(rows, list):
                raise ValidationError(f"{where}: dense matrix must be a list of rows")
            return DenseSpec(name=params.get("name", "dense"), matrix=np.asarray(rows))
        raise ValidationError(f"{where}: dense operator needs 'path' or 'matrix'")
    raise ValidationError(
        f"{where}: unsupported operator kind {kind!r} "
        "(expected registry, diagonal, jacobi, or dense)"
    )


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a run configuration file (JSON with nested tables)."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed configuration {path}: {exc}") from exc

    top = _require_table(raw, "configuration")
    _reject_unknown(top, {"operator", "run", "output"}, "configuration")
    if "operator" not in top or "run" not in top:
        raise ValidationError("configuration needs 'operator' and 'run' sections")

    op_section = top["operator"]
    tables = op_section if isinstance(op_section, list) else [op_section]
    operators = tuple(_operator_from_table(t, i) for i, t in enumerate(tables))

    run = _require_table(top["run"], "run")
    _reject_unknown(run, {"N_list", "weights", "tolerances"}, "run")
    n_list = run.get("N_list")
    if not isinstance(n_list, list) or not n_list:
        raise ValidationError("run.N_list must be a nonempty list of integers")
    for n in n_list:
        if not isinstance(n, int) or n < 2:
            raise ValidationError(f"run.N_list entries must be integers >= 2, got {n!r}")

    weights = run.get("weights", "geometric")
    if isinstance(weights, list):
        weights = tuple(float(v) for v in weights)
    elif not isinstance(weights, str):
        raise ValidationError("run.weights must be 'geometric' or a list of floats")

    tol_table = _require_table(run.get("tolerances", {}), "run.tolerances")
    _reject_unknown(tol_table, {"tol_cluster", "tol_atom", "tol_psd"}, "run.tolerances")
    tolerances = Tolerances(
        tol_cluster=tol_table.get("tol_cluster"),
        tol_atom=tol_table.get("tol_atom", 1e-14),
        tol_psd=tol_table.get("tol_psd", 1e-10),
    )

    output_dir = None
    if "output" in top:
        out = _require_table(top["output"], "output")
        _reject_unknown(out, {"dir"}, "output")
        if "dir" in out:
            output_dir = Path(out["dir"])

    return RunConfig(operators=operators, N_list=tuple(n_list), weights=weights,
                     tolerances=tolerances, output_dir=output_dir)
