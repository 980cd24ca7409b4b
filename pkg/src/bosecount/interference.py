"""Conditional count distributions, mean-field phase inference and peak widths.

A count ``n_1`` at a detector with nonzero interference term fixes
``cos(delta + theta_1)`` in the mean-field rate, which leaves two phase
branches.  Each branch predicts a rate at a second detector; narrow
conditional peaks at those rates are the signature that the mean-field
picture applies, with the Poisson width as the yardstick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .detectors import DetectorArray, DetectorMatrix, mean_count, mean_field_count
from .errors import DegenerateDetector, NegligibleEvidence, NoPeaks, ParameterError
from .kernel.mixture import scaling_residual
from .kernel.tables import JointCountDistribution
from .number_stats import NumberDistribution

EVIDENCE_FLOOR = 1e-15
COS_SLACK = 1e-9
WIDTH_MASS = 0.683
MERGE_RADIUS = 2

__all__ = [
    "MeanFieldEstimate",
    "NoSolution",
    "PeakReport",
    "conditional",
    "find_peaks",
    "fold_phase",
    "infer_phase",
    "mass_width",
    "poisson_shape_residual",
    "predict_counts",
    "scaling_invariance_check",
]


def fold_phase(x):
    """Map angles onto ``(-pi, pi]``."""
    out = math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2 * math.pi)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class MeanFieldEstimate:
    """Both phase branches for an observed count.

    ``delta_plus`` and ``delta_minus`` are values of ``delta + theta_1`` in
    ``(-pi, pi]``, with ``delta_plus = -delta_minus`` and ``delta_minus``
    in ``[0, pi]``.  ``predicted_n2`` holds the rates at a second detector
    for the two branches, in that order, when one was supplied.
    """

    n1: int
    delta_plus: float
    delta_minus: float
    theta1: float
    predicted_n2: tuple[float, float] | None = None

    def phases(self) -> tuple[float, float]:
        """The two values of ``delta`` itself."""
        return fold_phase(self.delta_plus - self.theta1), fold_phase(self.delta_minus - self.theta1)


@dataclass(frozen=True)
class NoSolution:
    """The count lies outside the mean-field range ``<n_1> +- 2|r_ab| sqrt(N_a N_b)``."""

    n1: int
    cos_value: float
    low: float
    high: float

    def __bool__(self):
        return False


def conditional(
    joint: JointCountDistribution,
    given_detector: int,
    given_count: int,
    target: int | None = None,
) -> NumberDistribution:
    """Distribution of the count at ``target`` given ``n_m = given_count``.

    Detector indices are 1-based.  With two detectors ``target`` defaults
    to the other one.
    """
    M = joint.n_detectors
    if not 1 <= given_detector <= M:
        raise ParameterError(f"given_detector must lie in [1, {M}], got {given_detector}")
    if target is None:
        if M != 2:
            raise ParameterError("target detector required when there are more than two")
        target = 3 - given_detector
    if not 1 <= target <= M or target == given_detector:
        raise ParameterError(f"invalid target detector {target}")
    table = joint.table
    g = given_detector - 1
    if table.given is not None and table.given != (g, given_count):
        raise ParameterError(f"table holds only the slice {table.given}")
    sl = table if table.given is not None else table.slice(g, given_count)
    start, pmf = sl.marginal_array(target - 1)
    mass = float(pmf.sum())
    if mass <= EVIDENCE_FLOOR:
        nearest = None
        if table.given is None:
            s0, marg = table.marginal_array(g)
            ok = np.flatnonzero(marg > EVIDENCE_FLOOR) + s0
            if ok.size:
                nearest = int(ok[np.argmin(np.abs(ok - given_count))])
        raise NegligibleEvidence(
            f"P(n_{given_detector} = {given_count}) = {mass:.3g} is negligible"
            + (f"; nearest supported count is {nearest}" if nearest is not None else ""),
            nearest,
        )
    nz = np.flatnonzero(pmf)
    pmf = pmf[nz[0]: nz[-1] + 1] / mass
    return NumberDistribution(
        start + int(nz[0]), pmf / pmf.sum(), "conditional",
        {"given_detector": given_detector, "given_count": given_count, "target": target, "evidence": mass},
    )


def infer_phase(
    n1: int,
    d1: DetectorMatrix,
    nbar_a: float,
    nbar_b: float,
    d2: DetectorMatrix | None = None,
) -> MeanFieldEstimate | NoSolution:
    """Invert the mean-field rate at ``d1`` for the phase branches.

    Solves ``cos(delta + theta_1) = (n1 - <n_1>) / (2 |r_ab| sqrt(N_a N_b))``.
    If ``d2`` is given, the branch predictions at it are filled in.
    """
    if not (nbar_a > 0 and nbar_b > 0):
        raise ParameterError("mean particle numbers must be positive")
    if abs(d1.r_ab) == 0.0:
        raise DegenerateDetector("detector has no interference term (r_ab = 0)")
    base = mean_count(d1, nbar_a, nbar_b)
    amp = 2 * abs(d1.r_ab) * math.sqrt(nbar_a * nbar_b)
    c = (n1 - base) / amp
    if abs(c) > 1 + COS_SLACK:
        return NoSolution(int(n1), c, base - amp, base + amp)
    x = math.acos(max(-1.0, min(1.0, c)))
    est = MeanFieldEstimate(int(n1), fold_phase(-x), x, d1.theta)
    if d2 is not None:
        est = MeanFieldEstimate(est.n1, est.delta_plus, est.delta_minus, est.theta1,
                                predict_counts(est, d2, nbar_a, nbar_b))
    return est


def predict_counts(est: MeanFieldEstimate, d2: DetectorMatrix, nbar_a: float, nbar_b: float) -> tuple[float, float]:
    """Mean-field rates at ``d2`` on the two branches ``(delta_plus, delta_minus)``."""
    dp, dm = est.phases()
    return (mean_field_count(d2, nbar_a, nbar_b, dp), mean_field_count(d2, nbar_a, nbar_b, dm))


@dataclass(frozen=True)
class Peak:
    location: int
    mass: float
    width: float


@dataclass(frozen=True)
class PeakReport:
    peaks: tuple[Peak, ...]
    poisson_width_at_peak: tuple[float, ...]
    narrower_than_poisson: tuple[bool, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "narrower_than_poisson",
            tuple(p.width < w for p, w in zip(self.peaks, self.poisson_width_at_peak)),
        )

    @property
    def width_ratios(self) -> tuple[float, ...]:
        return tuple(p.width / w for p, w in zip(self.peaks, self.poisson_width_at_peak))

    @property
    def max_width_ratio(self) -> float:
        return max(self.width_ratios)


def mass_width(pmf: np.ndarray, mode: int, lo: int = 0, hi: int | None = None, level: float = WIDTH_MASS) -> float:
    """Half-length of the smallest window around ``mode`` holding ``level`` of the mass.

    The window grows one cell at a time toward the larger neighbour inside
    ``[lo, hi)``; the last cell counts fractionally, so the result varies
    continuously with the pmf.  A Gaussian gives its standard deviation.
    """
    hi = pmf.size if hi is None else hi
    target = level * float(pmf[lo:hi].sum())
    left = right = mode
    acc = float(pmf[mode])
    cells = 1
    if acc >= target:
        return 0.5 * (target / acc if acc > 0 else 0.0)
    while True:
        cand_l = pmf[left - 1] if left - 1 >= lo else -1.0
        cand_r = pmf[right + 1] if right + 1 < hi else -1.0
        if cand_l < 0 and cand_r < 0:
            return 0.5 * cells
        if cand_r >= cand_l:
            right += 1
            cell = float(cand_r)
        else:
            left -= 1
            cell = float(cand_l)
        if acc + cell >= target:
            frac = (target - acc) / cell if cell > 0 else 0.0
            return 0.5 * (cells + frac)
        acc += cell
        cells += 1


def _smooth(p):
    padded = np.concatenate(([0.0], p, [0.0]))
    counts = np.full(p.size, 3.0)
    counts[0] -= 1
    counts[-1] -= 1
    if p.size == 1:
        counts[0] = 1
    return (padded[:-2] + padded[1:-1] + padded[2:]) / counts


def _maxima(s):
    """Local maxima of ``s``, including maxima at either end; plateaus give their middle."""
    idx = []
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[j + 1] == s[i]:
            j += 1
        left_ok = i == 0 or s[i - 1] < s[i]
        right_ok = j == s.size - 1 or s[j + 1] < s[i]
        if left_ok and right_ok and s.size > 1:
            idx.append((i + j) // 2)
        i = j + 1
    return idx


def _merge(maxima, s):
    out = []
    for i in maxima:
        if out and i - out[-1] < MERGE_RADIUS:
            if s[i] > s[out[-1]]:
                out[-1] = i
        else:
            out.append(i)
    return out


def _basins(peaks, s):
    cuts = [0]
    for a, b in zip(peaks[:-1], peaks[1:]):
        cuts.append(a + int(np.argmin(s[a:b + 1])))
    cuts.append(s.size)
    return list(zip(cuts[:-1], cuts[1:]))


def poisson_reference_width(mode: int, level: float = WIDTH_MASS) -> float:
    """:func:`mass_width` of a Poisson pmf with mean ``mode`` around its own mode."""
    law = stats.poisson(mode)
    hi = int(law.isf(1e-14)) + 2
    pmf = law.pmf(np.arange(hi))
    return mass_width(pmf, int(np.argmax(pmf)), level=level)


def find_peaks(dist: NumberDistribution, min_mass: float = 0.01) -> PeakReport:
    """Local maxima with their basin masses and widths.

    The pmf is smoothed over three points, maxima closer than two counts
    are merged, and basins are split at the smoothed minimum between
    neighbouring maxima.  Maxima at the ends of the support count: number
    conservation can pile a peak against the upper edge.  A pmf falling
    from ``n = 0`` thus reports a peak at 0, whose Poisson reference is
    nearly zero, so its width ratio is large.  Peaks whose basin holds
    less than ``min_mass`` are dropped and the basins recomputed.
    """
    if not 0 < min_mass < 0.5:
        raise ParameterError(f"min_mass must lie in (0, 0.5), got {min_mass!r}")
    p = dist.pmf / dist.pmf.sum()
    s = _smooth(p)
    peaks = _merge(_maxima(s), s)
    while peaks:
        basins = _basins(peaks, s)
        masses = [float(p[a:b].sum()) for a, b in basins]
        keep = [pk for pk, m in zip(peaks, masses) if m >= min_mass]
        if len(keep) == len(peaks):
            break
        peaks = keep
    if not peaks:
        raise NoPeaks(f"no maximum of {dist.describe()} holds mass >= {min_mass}")
    found, ref = [], []
    for pk, (a, b), m in zip(peaks, basins, masses):
        lo, hi = max(a, pk - MERGE_RADIUS), min(b, pk + MERGE_RADIUS + 1)
        mode = lo + int(np.argmax(p[lo:hi]))
        found.append(Peak(dist.start + mode, m, mass_width(p, mode, a, b)))
        ref.append(poisson_reference_width(dist.start + mode))
    return PeakReport(tuple(found), tuple(ref))


def poisson_shape_residual(dist: NumberDistribution, mode: int) -> tuple[float, float]:
    """Fit ``C lam^n / n!`` over ``mode +- sqrt(mode)``.

    The fit is linear least squares in ``log p(n) + log n!``.  Returns the
    largest relative deviation from the fit over the window and the fitted
    rate ``lam``.
    """
    half = math.sqrt(mode)
    n = np.arange(math.ceil(mode - half), math.floor(mode + half) + 1)
    p = np.array([dist(int(k)) for k in n])
    if np.any(p <= 0):
        return math.inf, math.nan
    y = np.log(p) + gammaln(n + 1.0)
    slope, icpt = np.polyfit(n, y, 1)
    fit = np.exp(icpt + slope * n - gammaln(n + 1.0))
    return float(np.max(np.abs(p - fit) / fit)), float(math.exp(slope))


def scaling_invariance_check(
    source_a: NumberDistribution,
    source_b: NumberDistribution,
    array: DetectorArray,
    q: float,
    keep: int | None = None,
    **kwargs,
) -> float:
    """Total variation between the original joint table and the one from
    thinned sources on detectors magnified by ``1/q``."""
    return scaling_residual(source_a, source_b, array, q, keep, **kwargs)[0]
