"""Exact Fock-pair kernels by propagation through the dilated network.

Input mode ``a`` feeds output row ``k`` with amplitude ``A_k = conj(t_k[0])``
and ``b`` with ``B_k = conj(t_k[1])``; ``A`` and ``B`` are orthonormal
columns of a ``K``-row isometry.  Adjacent-row Givens rotations reduce
``[A B]`` to the first two unit vectors up to phases, so

    |N_a, N_b>  ->  rep(g_1^dag) ... rep(g_L^dag) |N_a, N_b, 0, ..., 0>.

Each ``rep(g)`` is the ``n``-photon representation of a two-mode unitary,
obtained from a real tridiagonal eigenproblem.  Every step is unitary, so
roundoff stays at machine precision however large the photon numbers;
expanding creation operators directly would instead lose all digits to
cancellation once interference terms dominate.

Count probabilities follow by summing ``|amplitude|^2`` over loss-row
occupations and over rows of the same detector.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, schur

from ..detectors import DilatedNetwork
from ..errors import BudgetExceeded, ParameterError
from ._fock_py import binomial_table
from .backend import get_impl
from .cache import KernelCache
from .tables import Backend, CountTable, clamp

DEFAULT_BUDGET = 10_000_000


def configuration_count(n_photons: int, n_rows: int) -> int:
    """Number of output configurations of ``n_photons`` in ``n_rows`` rows."""
    return math.comb(n_photons + n_rows - 1, n_rows - 1)


def check_budget(n_photons: int, net: DilatedNetwork, budget: int):
    work = configuration_count(n_photons, net.n_rows)
    if work > budget:
        raise BudgetExceeded(
            f"{n_photons} photons in {net.n_rows} rows need {work:.3g} configurations "
            f"(budget {budget:.3g}); reduce the photon numbers by magnifying the "
            "detectors with scale_array(array, q) and thinning both sources with "
            "binomial_thinning(source, q), which leaves the joint counts unchanged"
        )


def givens_sequence(net: DilatedNetwork) -> list[tuple[int, np.ndarray]]:
    """Rotations ``(i, g)`` on rows ``(i, i+1)`` with ``g_L ... g_1 [A B]`` diagonal."""
    cols = net.rows.conj().copy()
    K = cols.shape[0]
    seq = []
    for c in range(2):
        for i in range(K - 2, c - 1, -1):
            x, y = cols[i, c], cols[i + 1, c]
            r = math.hypot(abs(x), abs(y))
            if abs(y) == 0.0 or r == 0.0:
                continue
            g = np.array([[x.conjugate() / r, y.conjugate() / r], [-y / r, x / r]])
            cols[i:i + 2] = g @ cols[i:i + 2]
            seq.append((i, g))
    return seq


def two_mode_representation(u: np.ndarray, n_max: int):
    """``n``-photon representations of the 2x2 unitary ``u`` for ``n <= n_max``.

    Returned flat, with ``rep_off[n]`` the start of the row-major
    ``(n+1) x (n+1)`` block in the basis ``|m_p = k, m_q = n - k>``.
    """
    # u = exp(iH); the representation is exp(i dGamma(H))
    T, Z = schur(u.astype(complex), output="complex")
    H = Z @ np.diag(np.angle(np.diag(T))) @ Z.conj().T
    H = 0.5 * (H + H.conj().T)
    hpp, hqq, hpq = H[0, 0].real, H[1, 1].real, H[0, 1]
    psi = np.angle(hpq)
    offs = np.zeros(n_max + 2, dtype=np.int64)
    offs[1:] = np.cumsum((np.arange(n_max + 1) + 1) ** 2)
    flat = np.empty(offs[-1], dtype=complex)
    for n in range(n_max + 1):
        k = np.arange(n + 1)
        diag = hpp * k + hqq * (n - k)
        if n == 0 or abs(hpq) == 0.0:
            rep = np.diag(np.exp(1j * diag))
        else:
            # the gauge |k> -> e^{ik psi}|k> makes dGamma(H) real symmetric
            off = abs(hpq) * np.sqrt((k[:-1] + 1.0) * (n - k[:-1]))
            lam, W = eigh_tridiagonal(diag, off)
            phase = np.exp(1j * psi * k)
            rep = (phase[:, None] * W) @ (np.exp(1j * lam)[:, None] * W.T) * phase.conj()[None, :]
        flat[offs[n]: offs[n + 1]] = rep.ravel()
    return flat, offs[:-1]


@dataclass
class _Plan:
    net: DilatedNetwork
    steps: list
    row_det: np.ndarray
    s: int


_PLANS: dict = {}
_PLANS_LOCK = threading.Lock()


def _plan(net: DilatedNetwork, s: int) -> _Plan:
    """Rotation sequence with representations for up to ``s`` photons."""
    key = net.fingerprint
    with _PLANS_LOCK:
        hit = _PLANS.get(key)
    # representations do not depend on the total, so a larger plan serves
    if hit is not None and hit.s >= s:
        return hit
    steps = []
    # rep(g_L^dag) acts first
    for i, g in reversed(givens_sequence(net)):
        flat, offs = two_mode_representation(g.conj().T, s)
        steps.append((i, flat, offs))
    row_det = np.asarray([d if d >= 0 else -1 for d in net.detector_of_row], dtype=np.int32)
    plan = _Plan(net, steps, row_det, s)
    with _PLANS_LOCK:
        if len(_PLANS) > 64:
            _PLANS.clear()
        old = _PLANS.get(key)
        if old is None or old.s < s:
            _PLANS[key] = plan
        return _PLANS[key]


def _propagate(pairs, net, impl):
    """Output states for every ``(na, nb)`` in ``pairs`` (same total)."""
    s = pairs[0][0] + pairs[0][1]
    K = net.n_rows
    plan = _plan(net, s)
    binom = binomial_table(s, K)
    dim = configuration_count(s, K)
    state = np.zeros((dim, len(pairs)), complex)
    for col, (na, nb) in enumerate(pairs):
        m = np.zeros(K, np.int64)
        m[0], m[1] = na, nb
        rem, r = s, 0
        for i in range(K - 1):
            j = K - 1 - i
            r += binom[rem + j, j] - binom[rem - m[i] + j, j]
            rem -= m[i]
        state[r, col] = 1.0
    for i, flat, offs in plan.steps:
        state = impl.apply_two_mode(state, s, K, i, i + 1, flat, offs)
    return state, plan.row_det


def _tables(pairs, net, impl):
    state, row_det = _propagate(pairs, net, impl)
    s = pairs[0][0] + pairs[0][1]
    return {
        pair: clamp(impl.detector_probs(np.ascontiguousarray(state[:, c]), s, row_det, net.n_detectors))
        for c, pair in enumerate(pairs)
    }


def _check_pair(na, nb):
    if na < 0 or nb < 0 or int(na) != na or int(nb) != nb:
        raise ParameterError("Fock numbers must be nonnegative integers")
    return int(na), int(nb)


def fock_joint(na: int, nb: int, net: DilatedNetwork, budget: int = DEFAULT_BUDGET, impl: str | None = None) -> CountTable:
    """Exact count table for the number-state input ``|na, nb>``."""
    na, nb = _check_pair(na, nb)
    check_budget(na + nb, net, budget)
    probs = _tables([(na, nb)], net, get_impl(impl))[(na, nb)]
    return CountTable(probs, (0,) * net.n_detectors, Backend.NETWORK, f"fock({na}) x fock({nb})")


def fock_kernels(
    na_values,
    nb_values,
    net: DilatedNetwork,
    budget: int = DEFAULT_BUDGET,
    cache: KernelCache | None = None,
    threads: int = 1,
    impl: str | None = None,
) -> dict[tuple[int, int], np.ndarray]:
    """Count tables for every pair in ``na_values x nb_values``.

    Pairs with the same total photon number are propagated together as the
    columns of one state matrix.  Totals are independent and run on
    ``threads`` workers.  The table for ``(na, nb)`` has shape
    ``(na + nb + 1,) * M``.
    """
    na_values = sorted({int(x) for x in na_values})
    nb_values = sorted({int(x) for x in nb_values})
    if not na_values or not nb_values:
        return {}
    for a in na_values + nb_values:
        _check_pair(a, 0)
    check_budget(na_values[-1] + nb_values[-1], net, budget)
    fp = net.fingerprint
    out = {}
    by_total: dict[int, list] = {}
    for na in na_values:
        for nb in nb_values:
            hit = cache.get((fp, na, nb)) if cache is not None else None
            if hit is None:
                by_total.setdefault(na + nb, []).append((na, nb))
            else:
                out[(na, nb)] = hit
    impl_ns = get_impl(impl)
    jobs = [by_total[s] for s in sorted(by_total)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda pairs: _tables(pairs, net, impl_ns), jobs))
    else:
        results = [_tables(pairs, net, impl_ns) for pairs in jobs]
    for res in results:
        for key, probs in res.items():
            if cache is not None:
                probs = cache.put((fp,) + key, probs)
            out[key] = probs
    return out
