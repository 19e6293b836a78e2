"""Deterministic random vectors for probes and experiments.

The generator is a 64-bit splitmix-style sequence so that runs are exactly
reproducible across platforms and numpy versions.  State advances by the
golden-ratio increment 0x9E3779B97F4A7C15 and each output is finalized with
the standard two multiply-xorshift rounds (0xBF58476D1CE4E5B9 with shift 30,
0x94D049BB133111EB with shift 27, final shift 31).  Substreams are seeded by
XORing the base seed with the FNV-1a 64-bit hash of a text label.  Uniform
doubles take the top 53 bits of one output.  The base seed comes from the
SPECINT_SEED environment variable, default 0.
"""

from __future__ import annotations

import os

import numpy as np

from .core import ParseError

__all__ = ["SplitMix64", "env_seed", "stream", "unit_vector"]

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class SplitMix64:
    """Counter-based 64-bit generator with splitmix output finalization."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0 ** -53


def env_seed() -> int:
    """SPECINT_SEED from the environment (decimal or 0x-prefixed), default 0."""
    raw = os.environ.get("SPECINT_SEED", "0").strip()
    try:
        return int(raw, 0) & _MASK
    except ValueError as exc:
        raise ParseError(f"SPECINT_SEED must be an integer, got {raw!r}") from exc


def _fnv1a64(label: str) -> int:
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK
    return h


def stream(seed: int, label: str) -> SplitMix64:
    """Independent substream for a label: seed XOR FNV-1a64(label)."""
    return SplitMix64((seed ^ _fnv1a64(label)) & _MASK)


def unit_vector(gen: SplitMix64, n: int, complex_field: bool = False) -> np.ndarray:
    """Unit vector with components drawn uniformly from [-1, 1).

    Complex vectors draw real then imaginary part per coordinate, in index
    order, so the consumed sequence length is documented and fixed.
    """
    if complex_field:
        flat = np.asarray([2.0 * gen.uniform() - 1.0 for _ in range(2 * n)])
        v = flat[0::2] + 1j * flat[1::2]
    else:
        v = np.asarray([2.0 * gen.uniform() - 1.0 for _ in range(n)])
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:
        v = np.zeros(n, dtype=complex if complex_field else float)
        v[0] = 1.0
        return v
    return v / nrm
