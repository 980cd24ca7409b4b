"""Joint count tables."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..detectors import DetectorArray
from ..errors import NumericalError, ParameterError
from ..number_stats import NumberDistribution

CLAMP_TOL = 1e-14


class Backend(str, enum.Enum):
    NETWORK = "Network"
    MOMENT_ORACLE = "MomentOracle"
    COHERENT_QUADRATURE = "CoherentQuadrature"


def clamp(probs: np.ndarray) -> np.ndarray:
    """Zero out roundoff negatives; anything below -CLAMP_TOL is a bug."""
    low = probs.min(initial=0.0)
    if low < -CLAMP_TOL:
        raise NumericalError(f"probability {low:.3e} below clamp tolerance")
    return np.where(probs < 0, 0.0, probs)


@dataclass(frozen=True)
class CountTable:
    """Probabilities ``P(n_1, ..., n_M)`` on a dense box.

    ``probs[i_1, ..., i_M]`` is the probability of ``n_m = offsets[m] + i_m``;
    entries outside the box are zero.  A table built for a single outcome of
    one detector (``given = (m, n)``, 0-based ``m``) holds only that slice, so
    its total mass is the marginal probability of the outcome.
    """

    probs: np.ndarray
    offsets: tuple[int, ...]
    backend: Backend
    source_desc: str = ""
    given: tuple[int, int] | None = None

    def __post_init__(self):
        probs = clamp(np.asarray(self.probs, dtype=float))
        if len(self.offsets) != probs.ndim:
            raise ParameterError("one offset per detector axis required")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "offsets", tuple(int(o) for o in self.offsets))
        object.__setattr__(self, "backend", Backend(self.backend))

    @property
    def n_detectors(self) -> int:
        return self.probs.ndim

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum(dtype=np.float64))

    def __getitem__(self, counts) -> float:
        idx = tuple(c - o for c, o in zip(counts, self.offsets))
        if len(idx) != self.n_detectors:
            raise ParameterError(f"expected {self.n_detectors} counts")
        if any(i < 0 or i >= s for i, s in zip(idx, self.probs.shape)):
            return 0.0
        return float(self.probs[idx])

    def items(self):
        """Nonzero entries as ``((n_1, ..., n_M), p)`` in lexicographic order."""
        for idx in zip(*np.nonzero(self.probs)):
            yield tuple(int(i) + o for i, o in zip(idx, self.offsets)), float(self.probs[idx])

    def marginal_array(self, m: int) -> tuple[int, np.ndarray]:
        """``(start, pmf)`` of the 0-based detector ``m``."""
        axes = tuple(a for a in range(self.n_detectors) if a != m)
        return self.offsets[m], self.probs.sum(axis=axes)

    def mean(self, m: int) -> float:
        start, pmf = self.marginal_array(m)
        return float(pmf @ np.arange(start, start + pmf.size)) / pmf.sum()

    def slice(self, m: int, count: int) -> "CountTable":
        """Restriction to ``n_m = count`` (0-based ``m``)."""
        i = count - self.offsets[m]
        probs = np.take(self.probs, [i], axis=m) if 0 <= i < self.probs.shape[m] else None
        if probs is None:
            shape = list(self.probs.shape)
            shape[m] = 1
            probs = np.zeros(shape)
        offsets = list(self.offsets)
        offsets[m] = count
        return CountTable(probs, tuple(offsets), self.backend, self.source_desc, (m, count))

    def expand(self, stop) -> np.ndarray:
        """Dense array over ``[0, stop_m)`` on every axis."""
        out = np.zeros(tuple(stop))
        src = tuple(
            slice(0, max(0, min(s, st - o))) for s, st, o in zip(self.probs.shape, stop, self.offsets)
        )
        dst = tuple(slice(o, o + (sl.stop - sl.start)) for o, sl in zip(self.offsets, src))
        out[dst] = self.probs[src]
        return out

    @property
    def stop(self) -> tuple[int, ...]:
        return tuple(o + s for o, s in zip(self.offsets, self.probs.shape))


def total_variation(a: CountTable, b: CountTable) -> float:
    """Half the L1 distance between two tables over the union of their boxes."""
    if a.n_detectors != b.n_detectors:
        raise ParameterError("tables have different detector counts")
    lo = tuple(min(x, y) for x, y in zip(a.offsets, b.offsets))
    hi = tuple(max(x, y) for x, y in zip(a.stop, b.stop))
    shift = lambda t: CountTable(t.probs, tuple(o - l for o, l in zip(t.offsets, lo)), t.backend)
    shape = tuple(h - l for h, l in zip(hi, lo))
    return 0.5 * float(np.abs(shift(a).expand(shape) - shift(b).expand(shape)).sum())


@dataclass(frozen=True)
class JointCountDistribution:
    table: CountTable
    source_a: NumberDistribution
    source_b: NumberDistribution
    array: DetectorArray

    @property
    def n_detectors(self) -> int:
        return self.table.n_detectors
