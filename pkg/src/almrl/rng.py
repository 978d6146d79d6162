"""Deterministic, splittable random streams.

Every stream is a PCG64 generator keyed by ``SeedSequence((base_seed, stream_id))``,
so the full draw sequence is a pure function of the ``(base_seed, stream_id)`` pair.
Standard normals use the inverse-CDF transform (``scipy.special.ndtri``) applied to
the generator's uniforms; the transform is fixed so that two streams built from the
same pair produce identical draws within one build of the package.

Cross-platform floating-point bit-equality is not promised, only determinism
within one installation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

# Smallest uniform admitted into ndtri; gen.random() can return exactly 0.0,
# which would map to -inf.
_U_MIN = 2.0**-53


@dataclass(frozen=True)
class SeedSpec:
    """A (base_seed, stream_id) pair identifying one independent stream."""

    base_seed: int
    stream_id: int = 0


def derive_stream(seed: SeedSpec) -> np.random.Generator:
    """Build the generator for ``seed``.

    The derivation is ``PCG64(SeedSequence((base_seed, stream_id)))``; distinct
    pairs give statistically independent streams, identical pairs give the
    identical sequence.
    """
    ss = np.random.SeedSequence((seed.base_seed, seed.stream_id))
    return np.random.Generator(np.random.PCG64(ss))


def next_standard_normal(stream: np.random.Generator) -> float:
    """One N(0,1) draw via inverse-CDF of the stream's next uniform."""
    u = stream.random()
    if u < _U_MIN:
        u = _U_MIN
    return float(ndtri(u))


def standard_normals(stream: np.random.Generator, size) -> np.ndarray:
    """Array of N(0,1) draws; consumes exactly ``prod(size)`` uniforms."""
    u = stream.random(size)
    np.clip(u, _U_MIN, None, out=u)
    return ndtri(u)
