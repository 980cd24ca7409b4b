"""Count tables for sources with a regular P-function.

A coherent pair ``|alpha, beta>`` gives independent Poisson counts with the
mean-field rates.  Sources described by a P-function are handled by
integrating that closed form against the radial laws and a uniform relative
phase:

* point x point: trapezoid rule in the phase only;
* point x Gamma: generalized Gauss-Laguerre in the Gamma intensity;
* Gamma x Gamma: the total intensity ``s = I_a + I_b`` is integrated
  analytically, since every rate is homogeneous of degree one in
  ``(I_a, I_b)``.  What remains is a negative multinomial per node of the
  split ``u = I_a / s`` (Gauss rule for the Beta law of ``u``) and of the
  phase.

Every node contributes a product over detectors up to a factor that depends
on the total count only, so tables are assembled blockwise with per-node
log shifts and never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, xlogy

from ..detectors import DetectorArray, mean_field_count
from ..errors import ParameterError
from ..number_stats import DEFAULT_TAIL_TOLERANCE, NumberDistribution, PFunction
from .tables import Backend, CountTable

# largest log-ratio kept when rescaling node contributions
_LOG_RANGE = 740.0
_BLOCK = 256


def gauss_laguerre(n: int, alpha: float):
    """Nodes and normalized weights for the weight ``x^alpha e^-x`` on (0, inf)."""
    k = np.arange(n, dtype=float)
    diag = 2 * k + alpha + 1
    off = np.sqrt(k[1:] * (k[1:] + alpha))
    x, v = eigh_tridiagonal(diag, off)
    return x, v[0] ** 2


def gauss_beta(n: int, a: float, b: float):
    """Nodes and normalized weights for the Beta(a, b) law on (0, 1)."""
    al, be = b - 1.0, a - 1.0
    ab = al + be
    k = np.arange(n, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        diag = (be**2 - al**2) / ((2 * k + ab) * (2 * k + ab + 2))
    if abs(ab) < 1e-14:
        diag[0] = (be - al) / (ab + 2)
    kk = k[1:]
    # (k + ab) / (2k + ab - 1) is 0/0 at k = 1 when ab = -1; its limit is 1
    num, den = kk + ab, 2 * kk + ab - 1
    ratio = np.where(np.abs(den) < 1e-14, 1.0, num / np.where(den == 0, 1.0, den))
    off = np.sqrt(4 * kk * (kk + al) * (kk + be) * ratio / ((2 * kk + ab) ** 2 * (2 * kk + ab + 1)))
    x, v = eigh_tridiagonal(diag, off)
    return (x + 1) / 2, v[0] ** 2


def phase_grid(n: int):
    return 2 * math.pi * np.arange(n) / n, np.full(n, 1.0 / n)


@dataclass
class _NodeSet:
    """Nodes sharing one count law.

    ``K is None``: product of Poissons with rates ``rates[j, m]``.
    Otherwise a negative multinomial with shape ``K``, zero-count
    probability ``p0[j]`` and detector probabilities ``rates[j, m]``.
    ``weights`` may be negative.
    """

    weights: np.ndarray
    rates: np.ndarray
    K: float | None = None
    p0: np.ndarray | None = None

    def base(self):
        """``log|w_j|`` plus the count-independent part of the node law."""
        with np.errstate(divide="ignore"):
            lw = np.log(np.abs(self.weights))
        if self.K is None:
            return lw - self.rates.sum(axis=1)
        return lw + self.K * np.log(self.p0)

    def marginal(self, m):
        if self.K is None:
            return stats.poisson(self.rates[:, m])
        return stats.nbinom(self.K, self.p0 / (self.p0 + self.rates[:, m]))


def _rates(array, i_a, i_b, phase):
    return np.stack([mean_field_count(d, i_a, i_b, phase) for d in array.detectors], axis=-1)


def _pair_nodes(comp_a, comp_b, array, phases, pw, radial_nodes):
    """Node sets for one component of each source's P-function."""
    kind_a, kind_b = comp_a[0], comp_b[0]
    w0 = comp_a[1] * comp_b[1]
    if kind_a == "point" and kind_b == "point":
        rates = _rates(array, comp_a[2], comp_b[2], phases)
        return _NodeSet(w0 * pw, np.maximum(rates, 0.0))
    if kind_a == "point" or kind_b == "point":
        point, gamma = (comp_a, comp_b) if kind_a == "point" else (comp_b, comp_a)
        x, xw = gauss_laguerre(radial_nodes, gamma[2] - 1)
        inten = (x * gamma[3])[:, None]
        ia, ib = (point[2], inten) if kind_a == "point" else (inten, point[2])
        rates = _rates(array, ia, ib, phases[None, :]).reshape(-1, len(array))
        return _NodeSet(w0 * (xw[:, None] * pw[None, :]).ravel(), np.maximum(rates, 0.0))
    (_, _, ka, tha), (_, _, kb, thb) = comp_a, comp_b
    u, uw = gauss_beta(radial_nodes, ka, kb)
    g = _rates(array, u[:, None], (1 - u)[:, None], phases[None, :])
    g = np.maximum(g, 0.0).reshape(-1, len(array))
    c = np.repeat(u / tha + (1 - u) / thb, phases.size)
    K = ka + kb
    log_h = -ka * math.log(tha) - kb * math.log(thb) - K * np.log(c)
    tot = c + g.sum(axis=1)
    w = w0 * (uw[:, None] * pw[None, :]).ravel() * np.exp(log_h)
    return _NodeSet(w, g / tot[:, None], K, c / tot)


def _components(spec):
    pf = spec.p_function if isinstance(spec, NumberDistribution) else spec
    if not isinstance(pf, PFunction):
        raise ParameterError("source has no P-function; use the Network backend")
    if pf.point is not None:
        return [("point", 1.0, pf.point)]
    return [("gamma", w, k, th) for w, k, th in pf.gammas]


def _box(node_sets, M, tol, given):
    """Per-detector ``[lo, hi]`` holding all but ``tol`` of the mass."""
    w_abs = np.concatenate([np.abs(s.weights) for s in node_sets])
    order = np.sort(w_abs)
    drop_below = order[np.searchsorted(np.cumsum(order), tol / (4 * M), side="right")] if order.size else 0
    eps = tol / (4 * M) / max(w_abs[w_abs >= drop_below].sum(), 1e-300)
    lo, hi = [], []
    for m in range(M):
        if given is not None and given[0] == m:
            lo.append(given[1])
            hi.append(given[1])
            continue
        l_m, h_m = math.inf, 0
        for s in node_sets:
            keep = np.abs(s.weights) >= drop_below
            if not keep.any():
                continue
            law = _NodeSet(s.weights[keep], s.rates[keep], s.K, None if s.p0 is None else s.p0[keep]).marginal(m)
            h_m = max(h_m, int(np.max(law.isf(eps))) + 1)
            l_m = min(l_m, int(np.min(law.ppf(eps))))
        lo.append(max(0, int(l_m) if l_m != math.inf else 0))
        hi.append(max(h_m, lo[-1]))
    return lo, hi


def _contract(v, mats):
    """``sum_j v_j prod_m mats[m][j, n_m]`` as a dense array."""
    if len(mats) == 1:
        return v @ mats[0]
    if len(mats) == 2:
        return (mats[0] * v[:, None]).T @ mats[1]
    out = np.zeros(tuple(mat.shape[1] for mat in mats))
    letters = "abcdefghijklmnopqrstuvwxyz"[: len(mats)]
    expr = "j," + ",".join("j" + c for c in letters) + "->" + letters
    step = max(1, 2_000_000 // int(np.prod(out.shape)))
    for j0 in range(0, v.size, step):
        out += np.einsum(expr, v[j0:j0 + step], *(mat[j0:j0 + step] for mat in mats), optimize=True)
    return out


def _accumulate(out, lo, node_sets, ranges):
    """Add every node set's contribution on one block of the count box."""
    grids = [np.arange(a, b) for a, b in ranges]
    lgf = [gammaln(n + 1.0) for n in grids]
    n_tot = sum(np.meshgrid(*grids, indexing="ij", sparse=True))
    for s in node_sets:
        base = s.base()
        if s.K is None:
            log_rates = [s.rates[:, m] for m in range(len(grids))]
            corr = np.zeros_like(n_tot, dtype=float)
        else:
            lam = s.K + sum((a + b - 1) / 2 for a, b in ranges)
            log_rates = [s.rates[:, m] * lam for m in range(len(grids))]
            corr = gammaln(s.K + n_tot) - gammaln(s.K) - n_tot * math.log(lam)
        logs = [xlogy(n[None, :], r[:, None]) - lg[None, :] for n, r, lg in zip(grids, log_rates, lgf)]
        peaks = [lm.max(axis=1) for lm in logs]
        node_peak = base + sum(peaks)
        top = node_peak.max()
        if not np.isfinite(top):
            continue
        keep = node_peak > top - _LOG_RANGE
        v = np.sign(s.weights[keep]) * np.exp(node_peak[keep] - top)
        mats = [np.exp(lm[keep] - pk[keep, None]) for lm, pk in zip(logs, peaks)]
        part = _contract(v, mats)
        with np.errstate(divide="ignore"):
            val = np.sign(part) * np.exp(np.log(np.abs(part)) + top + corr)
        sl = tuple(slice(a - o, b - o) for (a, b), o in zip(ranges, lo))
        out[sl] += val


def _assemble(node_sets, M, tol, given, source_desc):
    lo, hi = _box(node_sets, M, tol, given)
    out = np.zeros(tuple(h - l + 1 for l, h in zip(lo, hi)))
    # one block suffices for Poisson nodes; negative multinomials need the
    # total count to vary little within a block
    nm = any(s.K is not None for s in node_sets)
    size = max(16, 512 // M) if nm else max(h - l + 1 for l, h in zip(lo, hi))
    starts = [range(l, h + 1, size) for l, h in zip(lo, hi)]
    for corner in np.ndindex(*(len(s) for s in starts)):
        ranges = []
        for m, i in enumerate(corner):
            a = starts[m][i]
            ranges.append((a, min(a + size, hi[m] + 1)))
        _accumulate(out, lo, node_sets, ranges)
    # signed weights leave roundoff negatives around true zeros
    out[(out < 0) & (out > -1e-13)] = 0.0
    return CountTable(out, tuple(lo), Backend.COHERENT_QUADRATURE, source_desc, given)


def coherent_joint(
    i_a: float,
    i_b: float,
    delta: float,
    array: DetectorArray,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> CountTable:
    """Counts for coherent amplitudes ``|alpha|^2 = i_a``, ``|beta|^2 = i_b``.

    Independent Poisson counts with means ``mean_field_count(d_m, i_a, i_b,
    delta)``, truncated so that less than ``tail_tolerance`` is dropped.
    """
    if i_a < 0 or i_b < 0:
        raise ParameterError("intensities must be nonnegative")
    rates = np.maximum(_rates(array, i_a, i_b, np.array([delta])), 0.0)
    nodes = _NodeSet(np.ones(1), rates)
    return _assemble([nodes], len(array), tail_tolerance, None, f"coherent({i_a:g}, {i_b:g}, {delta:g})")


def classical_joint(
    spec_a,
    spec_b,
    array: DetectorArray,
    phase_nodes: int = 256,
    radial_nodes: int = 48,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    given: tuple[int, int] | None = None,
) -> CountTable:
    """Counts for two independent sources with regular P-functions.

    Parameters
    ----------
    spec_a, spec_b : NumberDistribution or PFunction
        Sources; distributions must carry a ``p_function`` (Poisson,
        thermal, gamma_p, photon-added thermal, or thinned versions).
    phase_nodes : int
        Trapezoid nodes in the relative phase; a power of two, at least 64.
    radial_nodes : int
        Gauss nodes per radial integral; at least 16 when a source has a
        Gamma component.
    given : (m, count), optional
        Only compute the slice ``n_m = count`` (0-based ``m``).
    """
    if phase_nodes < 64 or phase_nodes & (phase_nodes - 1):
        raise ParameterError(f"phase_nodes must be a power of two >= 64, got {phase_nodes}")
    comps_a, comps_b = _components(spec_a), _components(spec_b)
    if any(c[0] == "gamma" for c in comps_a + comps_b) and radial_nodes < 16:
        raise ParameterError(f"radial_nodes must be >= 16 for Gamma sources, got {radial_nodes}")
    if given is not None and not 0 <= given[0] < len(array):
        raise ParameterError(f"given detector index {given[0]} out of range")
    phases, pw = phase_grid(phase_nodes)
    node_sets = [
        _pair_nodes(ca, cb, array, phases, pw, radial_nodes) for ca in comps_a for cb in comps_b
    ]
    desc = " x ".join(
        s.describe() if isinstance(s, NumberDistribution) else repr(s) for s in (spec_a, spec_b)
    )
    return _assemble(node_sets, len(array), tail_tolerance, given, desc)
