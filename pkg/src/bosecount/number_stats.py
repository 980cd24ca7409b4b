"""Particle-number distributions of the sources and their binomial thinning.

A source is U(1)-invariant, so its density matrix is diagonal in the Fock
basis and is fully described by a probability mass function ``p(N)``.
Infinite-support families are truncated so that the dropped probability is
below ``tail_tolerance``; the dropped amount is kept in ``truncation_mass``.

Classical families (Poisson, thermal, gamma_p) additionally carry their
U(1)-invariant P-function as a :class:`PFunction`, which is what the
coherent-state quadrature backend integrates against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .errors import ParameterError

DEFAULT_TAIL_TOLERANCE = 1e-10
NORMALIZATION_EPS = 1e-12

__all__ = [
    "DEFAULT_TAIL_TOLERANCE",
    "Classification",
    "MomentSummary",
    "NumberDistribution",
    "PFunction",
    "binomial",
    "binomial_thinning",
    "classify",
    "custom",
    "effective_moments",
    "fock",
    "gamma_p",
    "make_distribution",
    "moments",
    "photon_added_thermal",
    "poisson",
    "thermal",
]


@dataclass(frozen=True)
class PFunction:
    """Radial law of a U(1)-invariant P-representation.

    The intensity ``I = |alpha|^2`` is either a point mass (``point``, a
    coherent state with random phase) or a signed mixture of Gamma laws
    ``gammas = ((weight, shape, scale), ...)``.  Negative weights describe
    nonclassical states whose P-function is still a regular function.
    """

    point: float | None = None
    gammas: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if (self.point is None) == (len(self.gammas) == 0):
            raise ParameterError("PFunction needs exactly one of point or gammas")

    @property
    def is_classical(self) -> bool:
        return all(w >= 0 for w, _, _ in self.gammas)

    @property
    def mean(self) -> float:
        if self.point is not None:
            return self.point
        return sum(w * k * th for w, k, th in self.gammas)

    def scaled(self, q: float) -> "PFunction":
        """P-function after every particle survives with probability ``q``."""
        if self.point is not None:
            return PFunction(point=q * self.point)
        return PFunction(gammas=tuple((w, k, q * th) for w, k, th in self.gammas))


@dataclass(frozen=True)
class NumberDistribution:
    """Finite probability mass function over particle number.

    ``pmf[i]`` is the probability of ``N = start + i``.
    """

    start: int
    pmf: np.ndarray
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    truncation_mass: float = 0.0
    p_function: PFunction | None = None

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        if pmf.ndim != 1 or pmf.size == 0:
            raise ParameterError("pmf must be a nonempty 1-D array")
        if self.start < 0:
            raise ParameterError("support must be nonnegative")
        if np.any(pmf < 0) or not np.all(np.isfinite(pmf)):
            raise ParameterError("pmf entries must be finite and nonnegative")
        total = pmf.sum()
        if total > 1 + NORMALIZATION_EPS or total < 1 - self.truncation_mass - NORMALIZATION_EPS:
            raise ParameterError(
                f"pmf mass {total!r} inconsistent with truncation mass {self.truncation_mass!r}"
            )
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.pmf.size)

    @property
    def stop(self) -> int:
        """One past the largest particle number in the support."""
        return self.start + self.pmf.size

    @property
    def total_mass(self) -> float:
        return float(self.pmf.sum())

    def __call__(self, n):
        """Probability of ``n`` particles (zero outside the support)."""
        n = np.asarray(n)
        idx = n - self.start
        inside = (idx >= 0) & (idx < self.pmf.size)
        out = np.where(inside, self.pmf[np.clip(idx, 0, self.pmf.size - 1)], 0.0)
        return out if out.ndim else float(out)

    def dense(self, stop: int | None = None) -> np.ndarray:
        """Probabilities for ``N = 0 .. stop-1``."""
        stop = self.stop if stop is None else stop
        out = np.zeros(stop)
        hi = min(stop, self.stop)
        if hi > self.start:
            out[self.start:hi] = self.pmf[: hi - self.start]
        return out

    def describe(self) -> str:
        if not self.params:
            return self.family
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.family}({args})"


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    fano: float
    mandel_q_param: float


class Classification(enum.Enum):
    SUB_POISSONIAN = "SubPoissonian"
    POISSONIAN = "Poissonian"
    SUPER_POISSONIAN = "SuperPoissonian"


def _truncate(frozen, tol):
    """Support bounds [lo, hi] of a scipy discrete law, dropping < tol mass."""
    half = tol / 2
    lo = int(frozen.ppf(half))
    while lo > 0 and frozen.cdf(lo - 1) > half:
        lo -= 1
    hi = int(frozen.isf(half))
    while frozen.sf(hi) > half:
        hi += 1
    lost = (frozen.cdf(lo - 1) if lo > 0 else 0.0) + frozen.sf(hi)
    return lo, hi, float(lost)


def _from_frozen(frozen, tol, family, params, p_function):
    lo, hi, lost = _truncate(frozen, tol)
    n = np.arange(lo, hi + 1)
    pmf = np.exp(frozen.logpmf(n))
    return NumberDistribution(lo, pmf, family, params, lost, p_function)


def _check_tol(tol):
    if not 0 < tol < 1:
        raise ParameterError(f"tail_tolerance must be in (0, 1), got {tol!r}")


def fock(n: int) -> NumberDistribution:
    """Number state ``|n>``."""
    if int(n) != n or n < 0:
        raise ParameterError(f"Fock number must be a nonnegative integer, got {n!r}")
    return NumberDistribution(int(n), np.array([1.0]), "fock", {"N": int(n)})


def poisson(mean: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> NumberDistribution:
    """Coherent state with a uniformly random phase."""
    if not mean > 0:
        raise ParameterError(f"Poisson mean must be positive, got {mean!r}")
    _check_tol(tail_tolerance)
    return _from_frozen(
        stats.poisson(mean), tail_tolerance, "poisson", {"mean": mean}, PFunction(point=mean)
    )


def thermal(nbar: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> NumberDistribution:
    """Bose-Einstein distribution ``nbar^N / (1 + nbar)^(N+1)``."""
    if not nbar > 0:
        raise ParameterError(f"thermal mean must be positive, got {nbar!r}")
    _check_tol(tail_tolerance)
    x = nbar / (1 + nbar)
    # upper tail P(N > hi) = x^(hi+1)
    hi = max(0, math.ceil(math.log(tail_tolerance) / math.log(x)) - 1)
    while x ** (hi + 1) > tail_tolerance:
        hi += 1
    n = np.arange(hi + 1)
    pmf = np.exp(n * math.log(x) - math.log1p(nbar))
    return NumberDistribution(
        0, pmf, "thermal", {"nbar": nbar}, x ** (hi + 1), PFunction(gammas=((1.0, 1.0, nbar),))
    )


def gamma_p(mean: float, Q: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> NumberDistribution:
    """Poisson law mixed over a Gamma-distributed intensity.

    The intensity has shape ``1/Q`` and scale ``Q*mean``, so the number
    variance is ``mean + Q*mean**2``.  ``Q = 1`` is thermal light and
    ``Q -> 0`` the Poisson limit.
    """
    if not mean > 0:
        raise ParameterError(f"gamma_p mean must be positive, got {mean!r}")
    if not Q > 0:
        raise ParameterError(f"gamma_p needs Q > 0, got {Q!r}")
    _check_tol(tail_tolerance)
    shape, scale = 1.0 / Q, Q * mean
    lo, hi, lost = _truncate(stats.nbinom(shape, 1.0 / (1.0 + scale)), tail_tolerance)
    # 1 - p = scale/(1+scale) loses digits when scale is tiny, so build
    # log p(N) from the term ratios (shape+j)/(j+1) * scale/(1+scale)
    j = np.arange(hi)
    steps = np.log((shape + j) / (j + 1.0)) + (math.log(scale) - math.log1p(scale))
    logp = -shape * math.log1p(scale) + np.concatenate(([0.0], np.cumsum(steps)))
    pmf = np.exp(logp[lo:])
    return NumberDistribution(
        lo, pmf * ((1.0 - lost) / pmf.sum()), "gamma_p", {"mean": mean, "Q": Q}, lost,
        PFunction(gammas=((1.0, shape, scale),)),
    )


def photon_added_thermal(nbar: float, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> NumberDistribution:
    """Single-photon-added thermal state, ``rho ~ a^dag rho_th a``.

    Diagonal elements are ``N p_th(N-1) / (nbar + 1)``, i.e.
    ``N nbar^(N-1) / (1 + nbar)^(N+1)`` for ``N >= 1``; the mean is
    ``2 nbar + 1``.  The P-function is the regular signed combination
    ``(1+nbar)/nbar * Gamma(2, nbar) - 1/nbar * Gamma(1, nbar)``.
    """
    if not nbar > 0:
        raise ParameterError(f"thermal mean must be positive, got {nbar!r}")
    _check_tol(tail_tolerance)
    x = nbar / (1 + nbar)

    def upper(k):  # P(N > k)
        return x**k * (k + 1 - k * x)

    hi = 1
    while upper(hi) > tail_tolerance:
        hi *= 2
    lo_b, hi_b = hi // 2, hi
    while hi_b - lo_b > 1:
        mid = (lo_b + hi_b) // 2
        if upper(mid) > tail_tolerance:
            lo_b = mid
        else:
            hi_b = mid
    hi = max(hi_b, 1)
    n = np.arange(1, hi + 1)
    pmf = np.exp(np.log(n) + (n - 1) * math.log(x) - 2 * math.log1p(nbar))
    pf = PFunction(gammas=(((1 + nbar) / nbar, 2.0, nbar), (-1.0 / nbar, 1.0, nbar)))
    return NumberDistribution(1, pmf, "photon_added_thermal", {"nbar": nbar}, upper(hi), pf)


def binomial(n: int, q: float) -> NumberDistribution:
    if int(n) != n or n < 0:
        raise ParameterError(f"binomial N must be a nonnegative integer, got {n!r}")
    if not 0 <= q <= 1:
        raise ParameterError(f"binomial q must lie in [0, 1], got {q!r}")
    n = int(n)
    if q == 1:
        return NumberDistribution(n, np.array([1.0]), "binomial", {"N": n, "q": 1.0})
    k = np.arange(n + 1)
    pmf = stats.binom.pmf(k, n, q)
    return NumberDistribution(0, pmf / pmf.sum(), "binomial", {"N": n, "q": q})


def custom(pmf, start: int = 0) -> NumberDistribution:
    """Arbitrary pmf over ``N = start, start+1, ...``; normalized on input."""
    pmf = np.asarray(pmf, dtype=float)
    if pmf.ndim != 1 or pmf.size == 0:
        raise ParameterError("custom pmf must be a nonempty 1-D sequence")
    if np.any(pmf < 0):
        raise ParameterError("custom pmf has negative entries")
    total = pmf.sum()
    if not total > 0:
        raise ParameterError("custom pmf has zero total mass")
    nz = np.flatnonzero(pmf)
    pmf = pmf[nz[0]: nz[-1] + 1] / total
    return NumberDistribution(start + int(nz[0]), pmf, "custom")


_FAMILIES = {
    "fock": (fock, False),
    "poisson": (poisson, True),
    "thermal": (thermal, True),
    "gamma_p": (gamma_p, True),
    "photon_added_thermal": (photon_added_thermal, True),
    "binomial": (binomial, False),
    "custom": (custom, False),
}


def make_distribution(family: str, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE, **params) -> NumberDistribution:
    """Build a source distribution by family name.

    >>> make_distribution("gamma_p", mean=50, Q=0.5).family
    'gamma_p'
    """
    try:
        ctor, truncated = _FAMILIES[family]
    except KeyError:
        raise ParameterError(f"unknown family {family!r}; expected one of {sorted(_FAMILIES)}") from None
    try:
        if truncated:
            return ctor(tail_tolerance=tail_tolerance, **params)
        return ctor(**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {family}: {exc}") from None


def moments(dist: NumberDistribution) -> MomentSummary:
    """Mean, variance, Fano factor and Q = (V - N)/N^2 of the truncated pmf."""
    p = dist.pmf / dist.pmf.sum()
    n = dist.support.astype(float)
    mean = float(p @ n)
    var = float(p @ (n - mean) ** 2)
    if mean > 0:
        fano, q_param = var / mean, (var - mean) / mean**2
    else:
        fano = q_param = math.nan
    return MomentSummary(mean, var, fano, q_param)


def classify(dist: NumberDistribution, tolerance: float = 1e-9) -> Classification:
    m = moments(dist)
    return _classify(m.mean, m.variance, tolerance)


def _classify(mean, var, tolerance):
    if not tolerance > 0:
        raise ParameterError("tolerance must be positive")
    if abs(var - mean) <= tolerance * mean:
        return Classification.POISSONIAN
    return Classification.SUB_POISSONIAN if var < mean else Classification.SUPER_POISSONIAN


def effective_moments(mean: float, variance: float, q: float) -> tuple[float, float]:
    """Mean and variance after binomial thinning with survival probability q."""
    if mean < 0 or variance < 0:
        raise ParameterError("mean and variance must be nonnegative")
    if not 0 < q <= 1:
        raise ParameterError(f"thinning probability must lie in (0, 1], got {q!r}")
    return q * mean, q * q * variance + (1 - q) * q * mean


def _thinned_family(dist, q):
    f, p = dist.family, dist.params
    if f == "fock":
        return "binomial", {"N": p["N"], "q": q}
    if f == "binomial":
        return "binomial", {"N": p["N"], "q": p["q"] * q}
    if f == "poisson":
        return "poisson", {"mean": q * p["mean"]}
    if f == "thermal":
        return "thermal", {"nbar": q * p["nbar"]}
    if f == "gamma_p":
        return "gamma_p", {"mean": q * p["mean"], "Q": p["Q"]}
    if f in ("photon_added_thermal", "thinned_photon_added_thermal"):
        return "thinned_photon_added_thermal", {"nbar": p["nbar"], "q": p.get("q", 1.0) * q}
    return "custom", {}


def binomial_thinning(dist: NumberDistribution, q: float) -> NumberDistribution:
    """Effective statistics when each particle survives with probability q.

    ``p~(N) = sum_{N' >= N} p(N') C(N', N) q^N (1-q)^(N'-N)``.  The binomial
    weights are evaluated in log space, so supports of a few thousand are
    safe.  Total mass is preserved.
    """
    if not 0 < q <= 1:
        raise ParameterError(f"thinning probability must lie in (0, 1], got {q!r}")
    if q == 1:
        return dist
    family, params = _thinned_family(dist, q)
    pf = dist.p_function.scaled(q) if dist.p_function is not None else None
    src = dist.support
    out = np.zeros(dist.stop)
    lq, l1q = math.log(q), math.log1p(-q)
    k = np.arange(dist.stop)
    lgk = gammaln(k + 1)
    chunk = max(1, 4_000_000 // max(1, dist.stop))
    for i0 in range(0, src.size, chunk):
        nn = src[i0:i0 + chunk, None]
        mask = k[None, :] <= nn
        logb = gammaln(nn + 1) - lgk[None, :] - gammaln(np.maximum(nn - k[None, :], 0) + 1)
        logb = logb + k[None, :] * lq + np.maximum(nn - k[None, :], 0) * l1q
        b = np.where(mask, np.exp(logb), 0.0)
        out += dist.pmf[i0:i0 + chunk] @ b
    # enforce exact mass conservation against roundoff in the weights
    total = out.sum()
    if total > 0:
        out *= dist.pmf.sum() / total
    nz = np.flatnonzero(out)
    out = out[nz[0]: nz[-1] + 1]
    return NumberDistribution(int(nz[0]), out, family, params, dist.truncation_mass, pf)
