"""Normal-ordered moment expansion for small Fock inputs.

Inside normal ordering the mode operators commute, so

    P(n) = sum_{k >= n} prod_m (-1)^(k_m - n_m) C(k_m, n_m) <:prod_m I_m^k_m / k_m!:>

and ``<:prod I^k:>`` reduces to falling factorials of ``N_a`` and ``N_b``
once only balanced monomials are kept.  A product of ``d`` fluxes is a
polynomial in ``(a*, a, b*, b)`` of bidegree ``(d, d)``; it is stored as
``P[i, j]``, the coefficient of ``a*^i a^j b*^(d-i) b^(d-j)``.  The sum over
``k`` is finite because the falling factorials vanish for ``d > N_a + N_b``.

Every double is a dyadic rational, so the detector entries are scaled to
Gaussian integers and the whole expansion runs in exact integer arithmetic.
Only the final division rounds.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from ..detectors import DetectorArray
from ..errors import BudgetExceeded, NumericalError, ParameterError
from .tables import Backend, CountTable, clamp

ORACLE_MAX_PHOTONS = 40


def _scaled_entries(array):
    """Detector entries as Gaussian integers over a common power of two."""
    vals = []
    for d in array.detectors:
        vals += [d.r_aa, 0.0, d.r_ab.real, d.r_ab.imag, d.r_ab.real, -d.r_ab.imag, d.r_bb, 0.0]
    shift = max(Fraction(v).denominator.bit_length() - 1 for v in vals)
    ints = [int(Fraction(v) * (1 << shift)) for v in vals]
    per = [tuple(zip(ints[i:i + 8:2], ints[i + 1:i + 8:2])) for i in range(0, len(ints), 8)]
    return per, shift


def _flux_product_moments(array, n_tot, na, nb):
    """Scaled ``<:prod_m I_m^k_m:>`` for every ``k`` with ``sum k <= n_tot``.

    Returns ``(moments, shift)``; ``moments[k]`` is a pair of integers
    ``(re, im)`` equal to the moment times ``2^(shift * sum(k))``.
    """
    coeffs, shift = _scaled_entries(array)
    ffa = [math.perm(na, i) for i in range(n_tot + 1)]
    ffb = [math.perm(nb, i) for i in range(n_tot + 1)]
    M = len(coeffs)
    one = np.ones((1, 1), dtype=object)
    zero = np.zeros((1, 1), dtype=object)
    polys = {(0,) * M: (one, zero)}
    moments = {(0,) * M: (1, 0)}
    # breadth-first over total degree; each tuple extends its parent by one flux
    for d in range(1, n_tot + 1):
        for k in _tuples_with_sum(M, d):
            m = next(i for i in range(M) if k[i] > 0)
            parent = list(k)
            parent[m] -= 1
            pre, pim = polys[tuple(parent)]
            nre = np.zeros((d + 1, d + 1), dtype=object)
            nim = np.zeros((d + 1, d + 1), dtype=object)
            # a*a, a*b, b*a, b*b shift the (a*, a) degrees by (1,1), (1,0), (0,1), (0,0)
            for (x, y), (si, sj) in zip(coeffs[m], ((1, 1), (1, 0), (0, 1), (0, 0))):
                sl = (slice(si, si + d), slice(sj, sj + d))
                if x:
                    nre[sl] += x * pre
                    nim[sl] += x * pim
                if y:
                    nre[sl] -= y * pim
                    nim[sl] += y * pre
            polys[k] = (nre, nim)
            w = [ffa[i] * ffb[d - i] for i in range(d + 1)]
            moments[k] = (
                sum(nre[i, i] * w[i] for i in range(d + 1)),
                sum(nim[i, i] * w[i] for i in range(d + 1)),
            )
        for k in _tuples_with_sum(M, d - 1):
            polys.pop(k, None)
    return moments, shift


def _tuples_with_sum(M, d):
    for cut in itertools.combinations(range(d + M - 1), M - 1):
        prev, out = -1, []
        for c in cut + (d + M - 1,):
            out.append(c - prev - 1)
            prev = c
        yield tuple(out)


def moment_oracle(na: int, nb: int, array: DetectorArray, n_cap: int | None = None) -> CountTable:
    """Count table of ``|na, nb>`` by direct expansion of the counting formula.

    Independent of the network construction; meant as a cross-check at
    small photon numbers (``na + nb <= 40``).  Exact up to the final
    rounding of each entry to double.
    """
    if na < 0 or nb < 0 or int(na) != na or int(nb) != nb:
        raise ParameterError("Fock numbers must be nonnegative integers")
    na, nb = int(na), int(nb)
    n_tot = na + nb
    if n_tot > ORACLE_MAX_PHOTONS:
        raise BudgetExceeded(f"moment oracle limited to {ORACLE_MAX_PHOTONS} photons, got {n_tot}")
    n_cap = n_tot if n_cap is None else int(n_cap)
    if n_cap < n_tot:
        raise ParameterError(f"n_cap must be at least na + nb = {n_tot}")
    M = len(array)
    mom, shift = _flux_product_moments(array, n_tot, na, nb)
    # common denominator (n_tot!)^M 2^(shift n_tot); numerators are exact integers
    fn = math.factorial(n_tot)
    dense = np.zeros((n_tot + 1,) * M, dtype=object)
    imag = np.zeros((n_tot + 1,) * M, dtype=object)
    for k, (re, im) in mom.items():
        scale = (1 << (shift * (n_tot - sum(k)))) * math.prod(fn // math.factorial(x) for x in k)
        dense[k] = re * scale
        imag[k] = im * scale
    coef = np.zeros((n_tot + 1, n_tot + 1), dtype=object)
    for n in range(n_tot + 1):
        for k in range(n, n_tot + 1):
            coef[n, k] = (-1) ** (k - n) * math.comb(k, n)
    for axis in range(M):
        dense = np.moveaxis(np.tensordot(coef, dense, axes=([1], [axis])), 0, axis)
        imag = np.moveaxis(np.tensordot(coef, imag, axes=([1], [axis])), 0, axis)
    if any(imag.ravel()):
        raise NumericalError("moment expansion produced a complex probability")
    denom = fn**M << (shift * n_tot)
    probs = np.array([float(Fraction(int(x), denom)) for x in dense.ravel()]).reshape(dense.shape)
    return CountTable(clamp(probs), (0,) * M, Backend.MOMENT_ORACLE, f"fock({na}) x fock({nb})")
