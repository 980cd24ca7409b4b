"""Detector matrices, mean-field counts and the dilated network.

Detector ``m`` registers the flux ``I_m = sum_ll' R_ll' a_l^dag a_l'`` of the
two source modes ``(a, b)``.  ``R`` is stored through its three independent
entries; ``r_ab`` multiplies ``a^dag b`` and its argument is the fringe
phase ``theta``.

Detectors are numbered from 1 in user-facing APIs.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonHermitianOrNegative, OverComplete, ParameterError

VALIDATION_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-12
EIGEN_DROP = 1e-14

LOSS = -1

__all__ = [
    "Completeness",
    "DetectorArray",
    "DetectorMatrix",
    "DilatedNetwork",
    "LOSS",
    "build_dilation",
    "homodyne_pair",
    "mean_count",
    "mean_field_count",
    "paper_pair",
    "scale_array",
    "validate_array",
]


@dataclass(frozen=True)
class DetectorMatrix:
    r_aa: float
    r_bb: float
    r_ab: complex
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "r_aa", float(self.r_aa))
        object.__setattr__(self, "r_bb", float(self.r_bb))
        object.__setattr__(self, "r_ab", complex(self.r_ab))

    @classmethod
    def from_polar(cls, r_aa, r_bb, modulus, theta, label=""):
        return cls(r_aa, r_bb, modulus * complex(math.cos(theta), math.sin(theta)), label)

    @classmethod
    def rank_one(cls, r_aa, r_bb, theta, label=""):
        """Detector with maximal interference, ``|r_ab|^2 = r_aa r_bb``."""
        return cls.from_polar(r_aa, r_bb, math.sqrt(r_aa * r_bb), theta, label)

    @property
    def theta(self) -> float:
        return math.atan2(self.r_ab.imag, self.r_ab.real)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.r_aa, self.r_ab], [self.r_ab.conjugate(), self.r_bb]])

    def scaled(self, factor: float) -> "DetectorMatrix":
        return DetectorMatrix(self.r_aa * factor, self.r_bb * factor, self.r_ab * factor, self.label)

    def rotated(self, phi: float) -> "DetectorMatrix":
        """Same detector with ``r_ab`` multiplied by ``exp(i phi)``."""
        return DetectorMatrix(self.r_aa, self.r_bb, self.r_ab * complex(math.cos(phi), math.sin(phi)), self.label)

    def check(self, tol: float = VALIDATION_TOL):
        scale = max(1.0, self.r_aa, self.r_bb)
        if self.r_aa < -tol * scale or self.r_bb < -tol * scale:
            raise NonHermitianOrNegative(f"detector {self.label or ''} has a negative diagonal entry")
        if abs(self.r_ab) ** 2 > self.r_aa * self.r_bb + tol * scale**2:
            raise NonHermitianOrNegative(
                f"detector {self.label or ''} violates |r_ab|^2 <= r_aa r_bb"
            )


class Completeness(enum.Enum):
    COMPLETE = "Complete"
    SUB_UNITY = "SubUnity"


@dataclass(frozen=True)
class DetectorArray:
    detectors: tuple[DetectorMatrix, ...]
    completeness: Completeness
    min_residual_eigenvalue: float = field(default=0.0, compare=False)

    def __len__(self):
        return len(self.detectors)

    def __iter__(self):
        return iter(self.detectors)

    def __getitem__(self, i):
        return self.detectors[i]

    @property
    def total(self) -> np.ndarray:
        return sum((d.matrix for d in self.detectors), np.zeros((2, 2), complex))

    @property
    def is_complete(self) -> bool:
        return self.completeness is Completeness.COMPLETE


def _eigh2(m):
    """Closed-form eigen-decomposition of a 2x2 Hermitian matrix (ascending)."""
    a, d = m[0, 0].real, m[1, 1].real
    b = m[0, 1]
    half_tr = 0.5 * (a + d)
    disc = math.hypot(0.5 * (a - d), abs(b))
    lam = np.array([half_tr - disc, half_tr + disc])
    if abs(b) == 0.0:
        vecs = np.eye(2, dtype=complex)
        if a > d:
            vecs = vecs[:, ::-1]
            lam = np.array([d, a])
        else:
            lam = np.array([a, d])
        return lam, vecs
    vecs = np.empty((2, 2), complex)
    for j, lj in enumerate(lam):
        # (a - l) x + b y = 0  ->  choose the better-conditioned row
        if abs(a - lj) > abs(d - lj):
            v = np.array([-b / (a - lj), 1.0], complex)
        else:
            v = np.array([1.0, -b.conjugate() / (d - lj)], complex)
        vecs[:, j] = v / np.linalg.norm(v)
    return lam, vecs


def validate_array(detectors) -> DetectorArray:
    """Check each matrix is PSD and that ``sum R <= I``."""
    detectors = tuple(detectors)
    if not detectors:
        raise ParameterError("detector array must be nonempty")
    for d in detectors:
        if not isinstance(d, DetectorMatrix):
            raise ParameterError(f"expected DetectorMatrix, got {type(d).__name__}")
        d.check()
    total = sum((d.matrix for d in detectors), np.zeros((2, 2), complex))
    lam, _ = _eigh2(np.eye(2) - total)
    if lam[0] < -VALIDATION_TOL:
        raise OverComplete(
            f"sum of detector matrices has eigenvalue {1 - lam[0]:.12g} > 1"
        )
    complete = np.abs(np.eye(2) - total).max() <= VALIDATION_TOL
    return DetectorArray(
        detectors,
        Completeness.COMPLETE if complete else Completeness.SUB_UNITY,
        float(lam[0]),
    )


def scale_array(array: DetectorArray, q: float, keep: int | None = None) -> DetectorArray:
    """Magnify the first ``keep`` detectors by ``1/q`` and drop the rest."""
    if not 0 < q <= 1:
        raise ParameterError(f"scaling q must lie in (0, 1], got {q!r}")
    keep = len(array) if keep is None else keep
    if not 1 <= keep <= len(array):
        raise ParameterError(f"keep must lie in [1, {len(array)}], got {keep!r}")
    return validate_array(d.scaled(1.0 / q) for d in array.detectors[:keep])


def mean_count(d: DetectorMatrix, nbar_a: float, nbar_b: float) -> float:
    """Mean count of a U(1)-invariant source pair at detector ``d``."""
    if np.any(np.less(nbar_a, 0)) or np.any(np.less(nbar_b, 0)):
        raise ParameterError("mean particle numbers must be nonnegative")
    return d.r_aa * nbar_a + d.r_bb * nbar_b


def mean_field_count(d: DetectorMatrix, nbar_a: float, nbar_b: float, delta) -> float:
    """Mean count for coherent amplitudes with relative phase ``delta``."""
    base = mean_count(d, nbar_a, nbar_b)
    out = base + 2 * abs(d.r_ab) * np.sqrt(np.multiply(nbar_a, nbar_b)) * np.cos(np.add(delta, d.theta))
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class DilatedNetwork:
    """Rank-one rows ``t_k`` with ``sum_k t_k t_k^dag = I``.

    Output mode ``k`` receives ``conj(t_k[0]) a^dag + conj(t_k[1]) b^dag``
    per input creation operator.  ``detector_of_row[k]`` is a 0-based
    detector index or ``LOSS``.
    """

    rows: np.ndarray
    detector_of_row: tuple[int, ...]
    n_detectors: int

    def __post_init__(self):
        rows = np.array(self.rows, dtype=complex).reshape(-1, 2)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_loss_rows(self) -> int:
        return sum(1 for d in self.detector_of_row if d == LOSS)

    def detector_sum(self, m: int) -> np.ndarray:
        """``sum t t^dag`` over the rows of 0-based detector ``m``."""
        sel = self.rows[[k for k, d in enumerate(self.detector_of_row) if d == m]]
        return sel.T @ sel.conj()

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.rows).tobytes())
        h.update(np.asarray(self.detector_of_row, dtype=np.int64).tobytes())
        h.update(str(self.n_detectors).encode())
        return h.hexdigest()[:20]


def _rank_rows(m):
    lam, vecs = _eigh2(m)
    return [math.sqrt(l) * vecs[:, j] for j, l in enumerate(lam) if l > EIGEN_DROP]


def build_dilation(array: DetectorArray) -> DilatedNetwork:
    """Split detectors into rank-one rows and complete with loss rows."""
    rows, owner = [], []
    for m, d in enumerate(array.detectors):
        for t in _rank_rows(d.matrix):
            rows.append(t)
            owner.append(m)
    residual = np.eye(2) - array.total
    lam, vecs = _eigh2(residual)
    if lam[0] < -VALIDATION_TOL:
        raise OverComplete(f"residual I - sum R has eigenvalue {lam[0]:.3g}")
    for j, l in enumerate(lam):
        if l > EIGEN_DROP:
            rows.append(math.sqrt(l) * vecs[:, j])
            owner.append(LOSS)
    return DilatedNetwork(np.array(rows, complex).reshape(-1, 2), tuple(owner), len(array))


def paper_pair(R: float, split: float = 0.6, dtheta: float = 0.9 * math.pi, theta1: float = 0.0) -> DetectorArray:
    """Mirror-symmetric pair of rank-one detectors.

    Detector 1 has ``r_aa = split*R, r_bb = (1-split)*R``; detector 2 swaps
    the diagonal and sits at fringe phase ``theta1 + dtheta``.
    """
    d1 = DetectorMatrix.rank_one(split * R, (1 - split) * R, theta1, "1")
    d2 = DetectorMatrix.rank_one((1 - split) * R, split * R, theta1 + dtheta, "2")
    return validate_array([d1, d2])


def homodyne_pair() -> DetectorArray:
    """Balanced two-mode homodyne, ``I_{1,2} = (a^dag +- b^dag)(a +- b)/2``."""
    return validate_array([
        DetectorMatrix(0.5, 0.5, 0.5, "+"),
        DetectorMatrix(0.5, 0.5, -0.5, "-"),
    ])
